use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Circular singly linked list over the cachelines of a region, stored as a
/// successor table. Built so that the successor map is a single cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChaseChain {
    next: Vec<u32>,
    pos: u32,
}

/// Seeded random single-cycle permutation over `lines` cachelines (Sattolo).
pub fn build_chase(lines: u64, seed: u64) -> Result<ChaseChain> {
    if lines < 2 {
        return Err(Error::config(
            "workload.wss_bytes",
            format!("pointer chase needs at least 2 cachelines per thread, got {lines}"),
        ));
    }
    if lines > u32::MAX as u64 {
        return Err(Error::config("workload.wss_bytes", "pointer chase region too large"));
    }
    let n = lines as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..i);
        perm.swap(i, j);
    }
    Ok(ChaseChain { next: perm, pos: 0 })
}

impl ChaseChain {
    pub fn len(&self) -> usize {
        self.next.len()
    }

    pub fn is_empty(&self) -> bool {
        self.next.is_empty()
    }

    /// Line index the next access targets.
    pub fn current(&self) -> u32 {
        self.pos
    }

    pub fn successor(&self, line: u32) -> u32 {
        self.next[line as usize]
    }

    /// Follow the pointer stored in the current line.
    pub fn advance(&mut self) -> u32 {
        self.pos = self.next[self.pos as usize];
        self.pos
    }
}
