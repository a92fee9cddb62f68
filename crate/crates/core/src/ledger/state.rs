//! Versioned key-value world state.

use std::collections::BTreeMap;
use std::ops::Bound;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::codec::Writer;
use crate::crypto::Digest;

use super::asset::StateKey;
use super::tx::Version;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub value: Vec<u8>,
    pub version: Version,
}

#[derive(Debug, Default)]
pub struct StateStore {
    entries: BTreeMap<StateKey, Entry>,
    reads: AtomicU64,
}

impl Clone for StateStore {
    fn clone(&self) -> Self {
        StateStore {
            entries: self.entries.clone(),
            reads: AtomicU64::new(0),
        }
    }
}

impl StateStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &StateKey) -> Option<&Entry> {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.entries.get(key)
    }

    pub fn version(&self, key: &StateKey) -> Option<Version> {
        self.get(key).map(|e| e.version)
    }

    /// Point reads served since construction; every `get` counts as one.
    pub fn read_ops(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    pub(crate) fn put(&mut self, key: StateKey, value: Vec<u8>, version: Version) {
        if let Some(prev) = self.entries.get(&key) {
            debug_assert!(prev.version < version, "versions must be monotone per key");
        }
        self.entries.insert(key, Entry { value, version });
    }

    pub(crate) fn delete(&mut self, key: &StateKey) {
        self.entries.remove(key);
    }

    /// Entries whose key starts with `prefix`, in key order.
    pub fn scan_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a StateKey, &'a Entry)> + 'a {
        let start = StateKey::from_raw(prefix.to_owned());
        self.entries
            .range((Bound::Included(start), Bound::Unbounded))
            .take_while(move |(k, _)| k.as_str().starts_with(prefix))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical serialization of the full state, keys in order.
    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(self.entries.len() * 96);
        w.u64(self.entries.len() as u64);
        for (k, e) in &self.entries {
            w.str(k.as_str()).u64(e.version.height).u32(e.version.tx_index).bytes(&e.value);
        }
        w.into_bytes()
    }

    pub fn snapshot_digest(&self) -> Digest {
        Digest::of(&self.snapshot_bytes())
    }
}
