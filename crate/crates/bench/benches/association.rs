use std::hint::black_box;

use argus_bench::{filled_table, random_boxes, scenario};
use argus_core::association::{Slot, TemporalCache};
use argus_core::experiment::run_strategy;
use argus_core::geometry::iou;
use argus_core::scenario::StrategyKind;
use argus_core::CameraId;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pairwise_iou(c: &mut Criterion) {
    let boxes = random_boxes(1, 64);
    c.bench_function("iou_64x64", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for a in &boxes {
                for o in &boxes {
                    acc += iou(a, o);
                }
            }
            black_box(acc)
        })
    });
}

fn entry_lookup(c: &mut Criterion) {
    let mut group = c.benchmark_group("lookup_entry");
    for entries in [64, 512, 4096] {
        let mut table = filled_table(2, 4, entries);
        let probe = table.entries()[entries / 2].slots.clone();
        let observed: Vec<(CameraId, Slot)> = probe.into_iter().take(2).enumerate().map(|(i, s)| (CameraId(i), s)).collect();
        group.bench_with_input(BenchmarkId::from_parameter(entries), &observed, |b, obs| {
            b.iter(|| black_box(table.lookup_entry(obs).map(|e| e.id)))
        });
    }
    group.finish();
}

fn cache_lookup(c: &mut Criterion) {
    let boxes = random_boxes(3, 32);
    let mut cache = TemporalCache::new(1, 20);
    for b in &boxes {
        cache.temporal_update(CameraId(0), *b, None, None, 0, false);
    }
    c.bench_function("temporal_lookup_32", |bch| {
        bch.iter(|| {
            for b in &boxes {
                black_box(cache.temporal_lookup(CameraId(0), b, 1));
            }
        })
    });
}

fn tracker_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_50_steps");
    group.sample_size(20);
    for name in ["garden-4cam", "intersection-5cam"] {
        let (scn, tl) = scenario(name, 50);
        for kind in [StrategyKind::Argus, StrategyKind::Conv] {
            group.bench_function(BenchmarkId::new(kind.as_str(), name), |b| {
                b.iter(|| black_box(run_strategy(&scn, &tl, kind, 1, None).expect("run").report.mean_ids))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, pairwise_iou, entry_lookup, cache_lookup, tracker_steps);
criterion_main!(benches);
