//! Sliding-window replay cache for request nonces.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use crate::clock::Timestamp;
use crate::eid::Eid;

pub const DEFAULT_REPLAY_WINDOW_MS: u64 = 60_000;

#[derive(Debug)]
pub struct NonceCache {
    window_ms: u64,
    inner: Mutex<Inner>,
}

#[derive(Debug, Default)]
struct Inner {
    seen: HashMap<(Eid, u64), Timestamp>,
    order: VecDeque<(Timestamp, (Eid, u64))>,
}

impl Default for NonceCache {
    fn default() -> Self {
        NonceCache::new(DEFAULT_REPLAY_WINDOW_MS)
    }
}

impl NonceCache {
    pub fn new(window_ms: u64) -> Self {
        NonceCache {
            window_ms,
            inner: Mutex::new(Inner::default()),
        }
    }

    pub fn window_ms(&self) -> u64 {
        self.window_ms
    }

    /// Record `nonce` from `src`; false when it was already seen inside the
    /// window ending at `now`.
    pub fn check_and_insert(&self, src: Eid, nonce: u64, now: Timestamp) -> bool {
        let mut inner = self.inner.lock().expect("nonce cache poisoned");
        inner.prune(now, self.window_ms);
        let key = (src, nonce);
        if inner.seen.contains_key(&key) {
            return false;
        }
        inner.seen.insert(key, now);
        inner.order.push_back((now, key));
        true
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("nonce cache poisoned").seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Inner {
    fn prune(&mut self, now: Timestamp, window_ms: u64) {
        while let Some(&(at, key)) = self.order.front() {
            if now.since(at) < window_ms {
                break;
            }
            self.order.pop_front();
            if self.seen.get(&key) == Some(&at) {
                self.seen.remove(&key);
            }
        }
    }
}
