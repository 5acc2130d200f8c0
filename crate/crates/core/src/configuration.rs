//! Spin and bond configurations.
//!
//! Each configuration carries a snapshot id that changes on every mutation, so a
//! cluster labeling can tell whether it still describes the configuration it was
//! built from.

use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_SNAPSHOT: AtomicU64 = AtomicU64::new(1);

fn fresh_snapshot() -> u64 {
    NEXT_SNAPSHOT.fetch_add(1, Ordering::Relaxed)
}

/// Per-vertex spins in {-1, +1}.
#[derive(Debug)]
pub struct SpinConfig {
    spins: Vec<i8>,
    snapshot: u64,
}

impl SpinConfig {
    pub fn uniform(n: usize, sign: i8) -> Self {
        assert!(sign == 1 || sign == -1, "spin must be +1 or -1");
        Self::from_vec(vec![sign; n])
    }

    pub fn from_vec(spins: Vec<i8>) -> Self {
        assert!(spins.iter().all(|&s| s == 1 || s == -1), "spin must be +1 or -1");
        SpinConfig {
            spins,
            snapshot: fresh_snapshot(),
        }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn get(&self, v: usize) -> i8 {
        self.spins[v]
    }

    pub fn set(&mut self, v: usize, s: i8) {
        debug_assert!(s == 1 || s == -1);
        self.spins[v] = s;
        self.snapshot = fresh_snapshot();
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.spins
    }

    /// Mutable access for bulk updates; invalidates labelings once.
    pub fn as_mut_slice(&mut self) -> &mut [i8] {
        self.snapshot = fresh_snapshot();
        &mut self.spins
    }

    pub fn snapshot(&self) -> u64 {
        self.snapshot
    }

    pub fn flipped(&self) -> SpinConfig {
        SpinConfig::from_vec(self.spins.iter().map(|&s| -s).collect())
    }
}

impl Clone for SpinConfig {
    fn clone(&self) -> Self {
        SpinConfig {
            spins: self.spins.clone(),
            snapshot: self.snapshot,
        }
    }
}

impl PartialEq for SpinConfig {
    fn eq(&self, other: &Self) -> bool {
        self.spins == other.spins
    }
}

impl Eq for SpinConfig {}

/// Per-edge open/closed bits.
#[derive(Debug)]
pub struct BondConfig {
    open: Vec<bool>,
    snapshot: u64,
}

impl BondConfig {
    pub fn closed(n: usize) -> Self {
        Self::from_vec(vec![false; n])
    }

    pub fn open(n: usize) -> Self {
        Self::from_vec(vec![true; n])
    }

    pub fn from_vec(open: Vec<bool>) -> Self {
        BondConfig {
            open,
            snapshot: fresh_snapshot(),
        }
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn is_open(&self, e: usize) -> bool {
        self.open[e]
    }

    pub fn set(&mut self, e: usize, open: bool) {
        self.open[e] = open;
        self.snapshot = fresh_snapshot();
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.open
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        self.snapshot = fresh_snapshot();
        &mut self.open
    }

    pub fn count_open(&self) -> usize {
        self.open.iter().filter(|&&b| b).count()
    }

    pub fn snapshot(&self) -> u64 {
        self.snapshot
    }
}

impl Clone for BondConfig {
    fn clone(&self) -> Self {
        BondConfig {
            open: self.open.clone(),
            snapshot: self.snapshot,
        }
    }
}

impl PartialEq for BondConfig {
    fn eq(&self, other: &Self) -> bool {
        self.open == other.open
    }
}

impl Eq for BondConfig {}
