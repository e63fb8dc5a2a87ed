//! Expert-indexed replay buffer with a global image budget and whole-entry
//! FIFO eviction.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::task::{Task, CHANNELS};
use crate::{Error, Real, Result, Tensor};

/// Stored images, labels and frozen-expert features of one past task.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEntry<S> {
    pub task_id: String,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    /// `[N, feature_dim]`, computed once by the routed expert.
    pub features: Tensor<S>,
    /// Global insertion order, assigned by the buffer.
    pub insertion_step: u64,
}

impl<S: Real> ReplayEntry<S> {
    pub fn new(task: &Task, features: Tensor<S>) -> Result<Self> {
        let e = ReplayEntry {
            task_id: task.task_id.clone(),
            height: task.height,
            width: task.width,
            pixels: task.pixels.clone(),
            labels: task.labels.clone(),
            features,
            insertion_step: 0,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_dim(&self) -> usize {
        CHANNELS * self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.pixels.len() != n * self.image_dim() {
            return Err(Error::shape("replay entry pixels", &[n * self.image_dim()], &[self.pixels.len()]));
        }
        if self.features.shape().len() != 2 || self.features.rows() != n {
            return Err(Error::shape("replay entry features", &[n], self.features.shape()));
        }
        Ok(())
    }

    /// Flattened image `i` scaled to `[0, 1]`.
    pub fn image(&self, i: usize) -> impl Iterator<Item = S> + '_ {
        let d = self.image_dim();
        self.pixels[i * d..(i + 1) * d]
            .iter()
            .map(|&b| S::from_f64(b as f64 / 255.0))
    }

    /// Per-task mean of the stored feature rows.
    pub fn mean_feature(&self) -> Vec<f64> {
        let d = self.features.row_len();
        let mut m = alloc::vec![0.0; d];
        for i in 0..self.len() {
            for (a, &v) in m.iter_mut().zip(self.features.row(i)) {
                *a += v.as_f64();
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Keeps only the newest `keep` samples.
    fn keep_last(&mut self, keep: usize) {
        let n = self.len();
        let drop = n - keep;
        let d = self.image_dim();
        self.pixels.drain(..drop * d);
        self.labels.drain(..drop);
        let idx: Vec<usize> = (drop..n).collect();
        self.features = self.features.select_rows(&idx);
    }
}

/// What a store evicted or trimmed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreReport {
    /// `(expert, task_id)` of whole entries evicted, oldest first.
    pub evicted: Vec<(usize, String)>,
    /// Samples dropped from the new entry because it alone exceeded capacity.
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<S> {
    capacity: usize,
    store: BTreeMap<usize, Vec<ReplayEntry<S>>>,
    next_step: u64,
}

impl<S: Real> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            store: BTreeMap::new(),
            next_step: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total stored images across all experts.
    pub fn total(&self) -> usize {
        self.store.values().flatten().map(ReplayEntry::len).sum()
    }

    pub fn experts(&self) -> impl Iterator<Item = usize> + '_ {
        self.store.keys().copied()
    }

    /// Appends `entry` under `expert`, then evicts globally oldest entries
    /// until the image total fits the capacity.
    pub fn store(&mut self, expert: usize, mut entry: ReplayEntry<S>) -> Result<StoreReport> {
        entry.validate()?;
        let mut report = StoreReport::default();
        if entry.len() > self.capacity {
            report.truncated = entry.len() - self.capacity;
            log::warn!(
                "replay entry {} has {} samples, keeping the newest {}",
                entry.task_id,
                entry.len(),
                self.capacity
            );
            entry.keep_last(self.capacity);
        }
        entry.insertion_step = self.next_step;
        self.next_step += 1;
        self.store.entry(expert).or_default().push(entry);
        let mut total = self.total();
        while total > self.capacity {
            let (&key, _) = self
                .store
                .iter()
                .filter(|(_, v)| !v.is_empty())
                .min_by_key(|(_, v)| v[0].insertion_step)
                .expect("over capacity implies a stored entry");
            let list = self.store.get_mut(&key).expect("key exists");
            let old = list.remove(0);
            total -= old.len();
            if list.is_empty() {
                self.store.remove(&key);
            }
            report.evicted.push((key, old.task_id));
        }
        Ok(report)
    }

    /// Entries under `expert`, oldest first. Unknown experts yield an empty slice.
    pub fn retrieve(&self, expert: usize) -> &[ReplayEntry<S>] {
        self.store.get(&expert).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Restores an entry with its original insertion step (checkpoint resume).
    pub fn restore(&mut self, expert: usize, entry: ReplayEntry<S>) -> Result<()> {
        entry.validate()?;
        self.next_step = self.next_step.max(entry.insertion_step + 1);
        let list = self.store.entry(expert).or_default();
        list.push(entry);
        list.sort_by_key(|e| e.insertion_step);
        Ok(())
    }

    pub fn next_step(&self) -> u64 {
        self.next_step
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::TaskRole;
    use alloc::format;
    use alloc::vec;

    fn entry(id: &str, n: usize) -> ReplayEntry<f64> {
        let task = Task {
            task_id: id.into(),
            role: TaskRole::Lifelong,
            height: 1,
            width: 1,
            pixels: (0..3 * n).map(|i| i as u8).collect(),
            labels: vec![0; n],
            class_pair: (0, 1),
            archetype: None,
        };
        let features = Tensor::from_vec(&[n, 2], (0..2 * n).map(|i| i as f64).collect()).unwrap();
        ReplayEntry::new(&task, features).unwrap()
    }

    #[test]
    fn five_full_entries_fit_and_sixth_evicts_oldest() {
        let mut b = ReplayBuffer::new(1000);
        for k in 0..5 {
            let r = b.store(k % 2, entry(&format!("t{k}"), 200)).unwrap();
            assert!(r.evicted.is_empty());
        }
        assert_eq!(b.total(), 1000);
        let r = b.store(4, entry("t5", 200)).unwrap();
        assert_eq!(r.evicted, vec![(0, "t0".into())]);
        assert_eq!(b.total(), 1000);
    }

    #[test]
    fn retrieve_preserves_order_and_follows_eviction() {
        let mut b = ReplayBuffer::new(10);
        assert!(b.retrieve(3).is_empty());
        b.store(3, entry("A", 5)).unwrap();
        b.store(3, entry("B", 5)).unwrap();
        let ids: Vec<_> = b.retrieve(3).iter().map(|e| e.task_id.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
        b.store(1, entry("C", 5)).unwrap();
        let ids: Vec<_> = b.retrieve(3).iter().map(|e| e.task_id.as_str()).collect();
        assert_eq!(ids, ["B"]);
    }

    #[test]
    fn oversized_entry_keeps_newest_samples() {
        let mut b = ReplayBuffer::new(3);
        let r = b.store(0, entry("big", 5)).unwrap();
        assert_eq!(r.truncated, 2);
        let e = &b.retrieve(0)[0];
        assert_eq!(e.len(), 3);
        assert_eq!(e.features.row(0), &[4.0, 5.0]);
        assert_eq!(e.pixels[0], 6);
    }
}
