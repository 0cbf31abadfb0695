//! Engine-side measurements shared by the storage reader and the map/shuffle/reduce phases.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Live counters. Every field tolerates concurrent increments from map and reduce tasks.
#[derive(Debug, Default)]
pub struct Counters {
    map_input_records: AtomicU64,
    map_output_records: AtomicU64,
    shuffle_groups: AtomicU64,
    reduce_input_records: AtomicU64,
    bytes_read: AtomicU64,
    bytes_shuffled: AtomicU64,
}

impl Counters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_map_input_records(&self, n: u64) {
        self.map_input_records.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_map_output_records(&self, n: u64) {
        self.map_output_records.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_shuffle_groups(&self, n: u64) {
        self.shuffle_groups.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_reduce_input_records(&self, n: u64) {
        self.reduce_input_records.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_bytes_read(&self, n: u64) {
        self.bytes_read.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_bytes_shuffled(&self, n: u64) {
        self.bytes_shuffled.fetch_add(n, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            map_input_records: self.map_input_records.load(Ordering::Relaxed),
            map_output_records: self.map_output_records.load(Ordering::Relaxed),
            shuffle_groups: self.shuffle_groups.load(Ordering::Relaxed),
            reduce_input_records: self.reduce_input_records.load(Ordering::Relaxed),
            bytes_read: self.bytes_read.load(Ordering::Relaxed),
            bytes_shuffled: self.bytes_shuffled.load(Ordering::Relaxed),
        }
    }
}

/// Point-in-time copy of [`Counters`], as stored in job results and reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub map_input_records: u64,
    pub map_output_records: u64,
    pub shuffle_groups: u64,
    pub reduce_input_records: u64,
    pub bytes_read: u64,
    pub bytes_shuffled: u64,
}
