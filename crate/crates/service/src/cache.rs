use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

/// Byte-bounded least-recently-used map.
#[derive(Debug)]
pub struct LruCache<K, V> {
    budget: usize,
    used: usize,
    tick: u64,
    entries: HashMap<K, (u64, usize, Arc<V>)>,
}

impl<K: Eq + Hash + Clone, V> LruCache<K, V> {
    pub fn new(budget_bytes: usize) -> Self {
        LruCache {
            budget: budget_bytes,
            used: 0,
            tick: 0,
            entries: HashMap::new(),
        }
    }

    pub fn get(&mut self, key: &K) -> Option<Arc<V>> {
        self.tick += 1;
        let tick = self.tick;
        self.entries.get_mut(key).map(|e| {
            e.0 = tick;
            e.2.clone()
        })
    }

    /// Inserts `value` costing `bytes`, evicting the least recently used
    /// entries to stay within budget. Values larger than the whole budget are
    /// not kept.
    pub fn insert(&mut self, key: K, value: Arc<V>, bytes: usize) {
        if bytes > self.budget {
            return;
        }
        self.tick += 1;
        if let Some(old) = self.entries.insert(key, (self.tick, bytes, value)) {
            self.used -= old.1;
        }
        self.used += bytes;
        while self.used > self.budget {
            let oldest = self
                .entries
                .iter()
                .min_by_key(|(_, e)| e.0)
                .map(|(k, _)| k.clone())
                .expect("non-empty while over budget");
            let e = self.entries.remove(&oldest).expect("present");
            self.used -= e.1;
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bytes(&self) -> usize {
        self.used
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.entries.keys()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.used = 0;
    }
}
