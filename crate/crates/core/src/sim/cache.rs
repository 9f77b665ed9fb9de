//! Least-recently-used cache bounded by an approximate byte budget.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, Mutex};

struct Entry<V> {
    value: Arc<V>,
    bytes: usize,
    stamp: u64,
}

struct Inner<K, V> {
    map: HashMap<K, Entry<V>>,
    used: usize,
    clock: u64,
}

pub(crate) struct ByteLru<K, V> {
    budget: usize,
    inner: Mutex<Inner<K, V>>,
}

impl<K: Eq + Hash + Clone, V> ByteLru<K, V> {
    pub fn new(budget: usize) -> Self {
        ByteLru { budget, inner: Mutex::new(Inner { map: HashMap::new(), used: 0, clock: 0 }) }
    }

    pub fn get(&self, key: &K) -> Option<Arc<V>> {
        let mut inner = self.inner.lock().expect("cache poisoned");
        inner.clock += 1;
        let now = inner.clock;
        inner.map.get_mut(key).map(|e| {
            e.stamp = now;
            Arc::clone(&e.value)
        })
    }

    /// Inserts and evicts the stalest entries until the budget holds again.
    /// An entry larger than the whole budget is returned but not retained.
    pub fn insert(&self, key: K, value: V, bytes: usize) -> Arc<V> {
        let value = Arc::new(value);
        if bytes > self.budget {
            return value;
        }
        let mut inner = self.inner.lock().expect("cache poisoned");
        inner.clock += 1;
        let stamp = inner.clock;
        if let Some(old) = inner.map.insert(key, Entry { value: Arc::clone(&value), bytes, stamp }) {
            inner.used -= old.bytes;
        }
        inner.used += bytes;
        while inner.used > self.budget {
            let oldest = inner.map.iter().min_by_key(|(_, e)| e.stamp).map(|(k, _)| k.clone());
            match oldest {
                Some(k) => {
                    let e = inner.map.remove(&k).expect("present");
                    inner.used -= e.bytes;
                }
                None => break,
            }
        }
        value
    }

    pub fn get_or_try_insert<E>(
        &self,
        key: &K,
        bytes_of: impl Fn(&V) -> usize,
        make: impl FnOnce() -> Result<V, E>,
    ) -> Result<Arc<V>, E> {
        if let Some(v) = self.get(key) {
            return Ok(v);
        }
        let v = make()?;
        let bytes = bytes_of(&v);
        Ok(self.insert(key.clone(), v, bytes))
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache poisoned").map.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_least_recent_first() {
        let c: ByteLru<u32, u32> = ByteLru::new(10);
        c.insert(1, 10, 4);
        c.insert(2, 20, 4);
        assert_eq!(c.get(&1).as_deref(), Some(&10));
        c.insert(3, 30, 4);
        assert!(c.get(&2).is_none());
        assert!(c.get(&1).is_some() && c.get(&3).is_some());
        let big = c.insert(4, 40, 11);
        assert_eq!(*big, 40);
        assert!(c.get(&4).is_none());
        assert_eq!(c.len(), 2);
    }
}
