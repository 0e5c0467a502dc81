//! Host-level built-in types: `Storage` and `Map`.
//!
//! `Storage` simulates a persistent store: `store` snapshots an object's
//! field values under an integer key, `load` materializes the snapshot as
//! a live object. Within one top-level access, repeated loads of a key
//! return the same live object so load → mutate → store is coherent
//! across nested accesses; a later access starts from the snapshots
//! again, which is what makes storing back observable.

use std::collections::HashMap;

use crate::value::{RootHandle, Value};

/// A stored object snapshot: type name plus copied field values.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub type_name: String,
    pub fields: HashMap<String, Value>,
}

#[derive(Debug)]
pub struct StorageInstance {
    /// Unique label used in trace events (`st0`, `st1`, …).
    pub label: String,
    pub records: HashMap<i64, Snapshot>,
    /// Live object behind each key, valid for the current top-level
    /// access only; the runtime expires these between accesses.
    pub live: HashMap<i64, RootHandle>,
    pub open_count: u32,
}

impl StorageInstance {
    pub fn new(label: String) -> Self {
        StorageInstance {
            label,
            records: HashMap::new(),
            live: HashMap::new(),
            open_count: 0,
        }
    }
}

#[derive(Debug, Default)]
pub struct MapInstance {
    pub entries: HashMap<String, RootHandle>,
}
