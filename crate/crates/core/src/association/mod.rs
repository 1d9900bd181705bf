//! Spatial mapping entries across cameras and per-camera temporal caches.

mod cache;
mod snapshot;
mod table;

pub use cache::{CacheLookup, RecordId, TemporalCache, TemporalCacheRecord};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_HEADER};
pub use table::{
    predict_slots, EntryId, MappingEntry, MappingTable, RecordError, Slot, SlotPrediction,
    DEFAULT_CAPACITY, DEFAULT_PRUNE_IOU,
};
