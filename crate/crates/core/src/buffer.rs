//! Greedy class-balancing replay memory over a fixed byte budget.
//!
//! Capacity is counted in instances (`⌊budget / instance_bytes⌋`) since every
//! instance in a run has the same encoded size. Each class may hold
//! `⌊capacity / classes_seen⌋` instances; once memory is full a new instance
//! of an under-quota class replaces a random instance of the largest class.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{ByteBudget, ClassId, Instance};

/// Per-class allowance once `classes_seen` classes have been observed.
pub fn class_quota(capacity_instances: usize, classes_seen: usize) -> usize {
    assert!(
        classes_seen >= 1,
        "class_quota needs at least one seen class"
    );
    capacity_instances / classes_seen
}

#[derive(Clone, Debug)]
struct Slot {
    seq: u64,
    instance: Instance,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    budget: ByteBudget,
    instance_bytes: usize,
    capacity: usize,
    per_class: BTreeMap<ClassId, Vec<Slot>>,
    seen: BTreeSet<ClassId>,
    len: usize,
    next_seq: u64,
}

impl ReplayBuffer {
    pub fn new(budget: ByteBudget, instance_bytes: usize) -> Result<Self> {
        if instance_bytes == 0 {
            return Err(Error::Shape("instance size must be positive".into()));
        }
        if instance_bytes > budget.capacity() {
            return Err(Error::BudgetTooSmall {
                capacity: budget.capacity(),
                instance_bytes,
            });
        }
        Ok(ReplayBuffer {
            budget,
            instance_bytes,
            capacity: budget.capacity() / instance_bytes,
            per_class: BTreeMap::new(),
            seen: BTreeSet::new(),
            len: 0,
            next_seq: 0,
        })
    }

    pub fn budget(&self) -> ByteBudget {
        self.budget
    }

    pub fn instance_bytes(&self) -> usize {
        self.instance_bytes
    }

    pub fn capacity_instances(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len >= self.capacity
    }

    pub fn stored_bytes(&self) -> usize {
        self.len * self.instance_bytes
    }

    /// Classes observed by [`offer`](Self::offer), whether or not any instance was kept.
    pub fn classes_seen(&self) -> usize {
        self.seen.len()
    }

    pub fn count(&self, class: ClassId) -> usize {
        self.per_class.get(&class).map_or(0, Vec::len)
    }

    /// Stored count per class, omitting classes with nothing stored.
    pub fn counts(&self) -> BTreeMap<ClassId, usize> {
        self.per_class
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&c, v)| (c, v.len()))
            .collect()
    }

    /// Offers one instance to memory and reports whether it was stored.
    ///
    /// The class is counted as seen on first offer. An instance is stored when
    /// its class is below quota, when memory still has free room and the
    /// class is below the rounded-up share (so a remainder slot is not wasted),
    /// or when memory is full and moving one slot from a largest class to this
    /// one narrows the gap between them.
    /// Storing into a full memory evicts a uniformly chosen instance from a
    /// uniformly chosen maximal-count class other than the offered one.
    /// Randomness is drawn only on eviction.
    pub fn offer<R: Rng + ?Sized>(&mut self, inst: Instance, rng: &mut R) -> Result<bool> {
        if inst.byte_size() != self.instance_bytes {
            return Err(Error::ByteSizeMismatch {
                expected: self.instance_bytes,
                actual: inst.byte_size(),
            });
        }
        let class = inst.class();
        self.seen.insert(class);
        let seen = self.seen.len();
        let quota = class_quota(self.capacity, seen);
        let share = self.capacity.div_ceil(seen);
        let count = self.count(class);
        let full = self.is_full();

        let largest_other = self
            .per_class
            .iter()
            .filter(|(&c, _)| c != class)
            .map(|(_, v)| v.len())
            .max()
            .unwrap_or(0);
        let rebalance = full && count + 1 < largest_other;
        if !(count < quota || (!full && count < share) || rebalance) {
            return Ok(false);
        }
        if full {
            self.evict_from_largest(class, rng);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.per_class.entry(class).or_default().push(Slot {
            seq,
            instance: inst,
        });
        self.len += 1;
        Ok(true)
    }

    fn evict_from_largest<R: Rng + ?Sized>(&mut self, offered: ClassId, rng: &mut R) {
        let max = self.per_class.values().map(Vec::len).max().unwrap_or(0);
        debug_assert!(max > 0, "eviction from an empty buffer");
        let mut candidates: Vec<ClassId> = self
            .per_class
            .iter()
            .filter(|(&c, v)| v.len() == max && c != offered)
            .map(|(&c, _)| c)
            .collect();
        if candidates.is_empty() {
            candidates.push(offered);
        }
        let victim_class = candidates[rng.random_range(0..candidates.len())];
        let slots = self
            .per_class
            .get_mut(&victim_class)
            .expect("candidate class present");
        let victim = rng.random_range(0..slots.len());
        slots.remove(victim);
        self.len -= 1;
    }

    /// Stored instances ordered by class, then by insertion.
    pub fn iter(&self) -> impl Iterator<Item = &Instance> + '_ {
        self.per_class.values().flat_map(|v| {
            debug_assert!(v.windows(2).all(|w| w[0].seq < w[1].seq));
            v.iter().map(|s| &s.instance)
        })
    }

    pub fn snapshot(&self) -> Vec<(ClassId, Instance)> {
        self.iter().map(|i| (i.class(), i.clone())).collect()
    }
}
