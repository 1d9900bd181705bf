use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use argus_core::experiment::{parse_grid, run_scenario, sweep, write_outputs, write_sweep};
use argus_core::scenario::{parse_override, Scenario};
use argus_core::Error;
use clap::{Parser, Subcommand};

const OUT_ENV: &str = "ARGUS_OUT_DIR";
const DEFAULT_OUT: &str = "argus-out";

/// Multi-camera tracking simulator.
///
/// Any `--key.subkey=value` argument overrides the matching config entry.
#[derive(Parser, Debug)]
#[command(name = "argus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every (strategy, seed) pair and write reports.
    Run {
        /// Scenario file or builtin name.
        config: String,
        /// Comma-separated strategy list.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Output directory.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        /// Extra `key.subkey=value` overrides.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a parameter grid and write aggregated rows.
    Sweep {
        config: String,
        /// `key=v1,v2;other=v3`; `cameras.count` enumerates camera subsets.
        #[arg(long)]
        grid: String,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check a scenario without running it.
    Validate {
        config: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

/// Pulls `--a.b=value` arguments out before clap sees them.
fn split_dotted(args: impl Iterator<Item = String>) -> (Vec<String>, Vec<String>) {
    let mut rest = Vec::new();
    let mut dotted = Vec::new();
    for a in args {
        let is_dotted = a
            .strip_prefix("--")
            .and_then(|s| s.split_once('='))
            .is_some_and(|(k, _)| k.contains('.'));
        if is_dotted {
            dotted.push(a);
        } else {
            rest.push(a);
        }
    }
    (rest, dotted)
}

fn overrides(dotted: &[String], set: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    dotted
        .iter()
        .chain(set)
        .map(|a| parse_override(a).map_err(Into::into))
        .collect()
}

fn list(values: &[impl ToString]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("\"{}\"", v.to_string())).collect();
    format!("[{}]", items.join(","))
}

fn out_dir(flag: Option<PathBuf>, scn: &Scenario) -> PathBuf {
    flag.or_else(|| scn.config.output.dir.as_ref().map(|d| scn.resolve(d)))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn execute(cli: Cli, dotted: &[String]) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Run {
            config,
            strategies,
            seeds,
            out: out_flag,
            set,
        } => {
            let mut ov = overrides(dotted, &set)?;
            if !strategies.is_empty() {
                ov.push(("strategies".into(), list(&strategies)));
            }
            if !seeds.is_empty() {
                let s: Vec<String> = seeds.iter().map(u64::to_string).collect();
                ov.push(("seeds".into(), format!("[{}]", s.join(","))));
            }
            let scn = Scenario::load(&config, &ov)?;
            let results = run_scenario(&scn, None)?;
            let dir = out_dir(out_flag, &scn);
            let report = write_outputs(&scn, &results, &dir)?;
            for r in &results {
                let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
                writeln!(
                    out,
                    "{:<9} seed {:<4} mean_ids {:>8.3}  latency {:>7.4}s  motp {}  mota {}",
                    r.strategy.as_str(),
                    r.seed,
                    r.report.mean_ids,
                    r.report.mean_latency_s,
                    opt(r.report.motp),
                    opt(r.report.mota)
                )?;
            }
            writeln!(out, "report: {}", report.display())?;
        }
        Command::Sweep {
            config,
            grid,
            out: out_flag,
            set,
        } => {
            let scn = Scenario::load(&config, &overrides(dotted, &set)?)?;
            let axes = parse_grid(&grid)?;
            if axes.is_empty() {
                writeln!(out, "empty grid, nothing to run")?;
                return Ok(());
            }
            let rows = sweep(&scn, &axes)?;
            let dir = out_dir(out_flag, &scn);
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("sweep.csv");
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_sweep(&axes, &rows, file)?;
            fs::write(dir.join("config.resolved.toml"), scn.echo()?)?;
            writeln!(out, "{} rows: {}", rows.len(), path.display())?;
        }
        Command::Validate { config, set } => {
            let scn = Scenario::load(&config, &overrides(dotted, &set)?)?;
            let c = &scn.config;
            let names: Vec<&str> = c.strategies.iter().map(|s| s.as_str()).collect();
            writeln!(
                out,
                "ok: {} ({} cameras, strategies {}, {} seeds, {} steps)",
                c.name,
                scn.camera_count(),
                names.join(","),
                c.seeds.len(),
                c.steps.map_or_else(|| "all".to_string(), |n| n.to_string())
            )?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Invariant(_)) => 3,
        Some(
            Error::Config(_)
            | Error::UnknownPreset(_)
            | Error::TraceParse { .. }
            | Error::TraceValidation { .. }
            | Error::SnapshotParse { .. }
            | Error::UnknownPeer(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let (args, dotted) = split_dotted(std::env::args());
    let cli = Cli::parse_from(args);
    match execute(cli, &dotted) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_flags_are_split_from_clap_flags() {
        let args = ["argus", "run", "x.toml", "--argus.alpha=0.3", "--out=o", "--seeds", "1"].map(String::from);
        let (rest, dotted) = split_dotted(args.into_iter());
        assert_eq!(dotted, vec!["--argus.alpha=0.3"]);
        assert_eq!(rest, vec!["argus", "run", "x.toml", "--out=o", "--seeds", "1"]);
    }

    #[test]
    fn invariant_and_config_errors_map_to_their_codes() {
        assert_eq!(exit_code(&Error::Invariant("x".into()).into()), 3);
        assert_eq!(exit_code(&Error::UnknownPreset("p".into()).into()), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 1);
    }
}
