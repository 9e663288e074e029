//! Integer partitions in nonincreasing-parts form.

use crate::error::{Error, Result};

/// Largest k for which partitions are enumerated by default (p(60) = 966467).
pub const DEFAULT_PARTITION_CAP: usize = 60;

/// A partition of an integer: nonincreasing positive parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    /// Builds a partition from parts in any order. Zero parts are rejected.
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        if parts.contains(&0) {
            return Err(Error::Parameter("partition parts must be positive".into()));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// The partitioned integer.
    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Number of parts equal to `value`.
    pub fn multiplicity(&self, value: usize) -> usize {
        self.parts.iter().filter(|&&p| p == value).count()
    }

    /// (part value, count) pairs in decreasing value order.
    pub fn multiplicities(&self) -> Vec<(usize, usize)> {
        run_lengths(&self.parts)
    }
}

fn run_lengths(parts: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &p in parts {
        match out.last_mut() {
            Some((v, c)) if *v == p => *c += 1,
            _ => out.push((p, 1)),
        }
    }
    out
}

/// Visits every partition of `k` in reverse lexicographic order, starting
/// from `[k]` and ending at `[1, 1, ..., 1]`, without allocating per item.
/// `k = 0` visits the single empty partition.
pub fn for_each_partition(k: usize, mut visit: impl FnMut(&[usize])) {
    let mut parts = Vec::with_capacity(k);
    if k > 0 {
        parts.push(k);
    }
    loop {
        visit(&parts);
        let mut ones = 0;
        while parts.last() == Some(&1) {
            parts.pop();
            ones += 1;
        }
        let Some(last) = parts.pop() else {
            return;
        };
        let next = last - 1;
        parts.push(next);
        let mut rest = ones + 1;
        while rest > 0 {
            let part = next.min(rest);
            parts.push(part);
            rest -= part;
        }
    }
}

/// All partitions of `k`, subject to `cap`.
pub fn enumerate_partitions_capped(k: usize, cap: usize) -> Result<Vec<Partition>> {
    if k > cap {
        return Err(Error::PartitionCap { k, cap });
    }
    let mut out = Vec::new();
    for_each_partition(k, |parts| out.push(Partition { parts: parts.to_vec() }));
    Ok(out)
}

pub fn enumerate_partitions(k: usize) -> Result<Vec<Partition>> {
    enumerate_partitions_capped(k, DEFAULT_PARTITION_CAP)
}

pub(crate) fn multiplicities_of(parts: &[usize]) -> Vec<(usize, usize)> {
    run_lengths(parts)
}
