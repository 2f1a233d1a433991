//! Capacity-level last-level cache model.
//!
//! Residency is tracked as bytes per workload, not as tags. A lookup hits
//! with probability `min(1, resident / wss)`; a retired miss fills one line.
//! Partitions bound each workload's resident bytes; lines above a lowered
//! bound are evicted lazily, one per subsequent fill.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LlcModel {
    capacity: u64,
    line: u64,
    wss: Vec<u64>,
    quota: Vec<Option<f64>>,
    occupancy: Vec<u64>,
    rng: ChaCha8Rng,
    pub hits: Vec<u64>,
    pub lookups: Vec<u64>,
}

impl LlcModel {
    /// One slot per workload; `wss[i]` is workload `i`'s working set in bytes.
    pub fn new(capacity_bytes: u64, line: u64, wss: Vec<u64>, seed: u64) -> Self {
        let n = wss.len();
        LlcModel {
            capacity: capacity_bytes,
            line,
            wss,
            quota: vec![None; n],
            occupancy: vec![0; n],
            rng: ChaCha8Rng::seed_from_u64(seed),
            hits: vec![0; n],
            lookups: vec![0; n],
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn occupancy(&self, workload: usize) -> u64 {
        self.occupancy[workload]
    }

    pub fn total_occupancy(&self) -> u64 {
        self.occupancy.iter().sum()
    }

    /// Bound `workload` to `fraction` of capacity; `None` returns it to free competition.
    pub fn set_partition(&mut self, workload: usize, fraction: Option<f64>) -> Result<()> {
        if let Some(f) = fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config("llc.partitions", format!("fraction {f} outside [0, 1]")));
            }
        }
        let old = self.quota[workload];
        self.quota[workload] = fraction;
        let sum: f64 = self.quota.iter().flatten().sum();
        if sum > 1.0 + 1e-9 {
            self.quota[workload] = old;
            return Err(Error::config(
                "llc.partitions",
                format!("partition fractions sum to {sum:.3}, more than 1"),
            ));
        }
        Ok(())
    }

    fn limit(&self, w: usize) -> u64 {
        let q = match self.quota[w] {
            Some(f) => ((self.capacity as f64 * f) as u64 / self.line) * self.line,
            None => self.capacity,
        };
        q.min(self.wss[w].div_ceil(self.line) * self.line)
    }

    pub fn hit_probability(&self, workload: usize) -> f64 {
        (self.occupancy[workload] as f64 / self.wss[workload] as f64).min(1.0)
    }

    pub fn lookup(&mut self, workload: usize) -> bool {
        let p = self.hit_probability(workload);
        self.lookups[workload] += 1;
        let hit = p >= 1.0 || (p > 0.0 && self.rng.gen::<f64>() < p);
        if hit {
            self.hits[workload] += 1;
        }
        hit
    }

    /// Insert one line for `workload` after a miss retires.
    pub fn fill(&mut self, w: usize) {
        let limit = self.limit(w);
        if self.occupancy[w] + self.line > limit {
            if self.occupancy[w] > limit {
                self.occupancy[w] -= self.line;
            }
            return;
        }
        if self.total_occupancy() + self.line > self.capacity {
            let Some(v) = self.victim(w) else { return };
            self.occupancy[v] -= self.line;
        }
        self.occupancy[w] += self.line;
    }

    /// Most over-quota workload if any, else an occupancy-weighted draw
    /// among the others. `None` when only `w` holds lines.
    fn victim(&mut self, w: usize) -> Option<usize> {
        let over = (0..self.occupancy.len())
            .filter(|&i| self.occupancy[i] > self.limit(i))
            .max_by_key(|&i| (self.occupancy[i] - self.limit(i), std::cmp::Reverse(i)));
        if over.is_some() {
            return over;
        }
        let others: u64 = (0..self.occupancy.len())
            .filter(|&i| i != w && self.quota[i].is_none())
            .map(|i| self.occupancy[i])
            .sum();
        if others == 0 {
            return None;
        }
        let mut pick = self.rng.gen_range(0..others);
        for i in 0..self.occupancy.len() {
            if i == w || self.quota[i].is_some() {
                continue;
            }
            if pick < self.occupancy[i] {
                return Some(i);
            }
            pick -= self.occupancy[i];
        }
        unreachable!("weighted pick lies inside the total")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MB: u64 = 1 << 20;

    fn warm(m: &mut LlcModel, n: usize, workloads: &[usize]) {
        for i in 0..n {
            let w = workloads[i % workloads.len()];
            if !m.lookup(w) {
                m.fill(w);
            }
        }
    }

    fn rate(m: &mut LlcModel, w: usize, n: usize) -> f64 {
        (0..n).filter(|_| m.lookup(w)).count() as f64 / n as f64
    }

    #[test]
    fn fully_resident_hits_always() {
        let mut m = LlcModel::new(4 * MB, 64, vec![MB], 1);
        warm(&mut m, 400_000, &[0]);
        assert_eq!(rate(&mut m, 0, 10_000), 1.0);
    }

    #[test]
    fn zero_allocation_never_hits() {
        let mut m = LlcModel::new(4 * MB, 64, vec![MB], 1);
        m.set_partition(0, Some(0.0)).unwrap();
        warm(&mut m, 10_000, &[0]);
        assert_eq!(rate(&mut m, 0, 10_000), 0.0);
    }

    #[test]
    fn twice_allocation_hits_half() {
        let mut m = LlcModel::new(4 * MB, 64, vec![8 * MB], 3);
        warm(&mut m, 400_000, &[0]);
        let r = rate(&mut m, 0, 100_000);
        assert!((r - 0.5).abs() <= 0.02, "{r}");
    }

    #[test]
    fn free_competition_both_fit() {
        let mut m = LlcModel::new(4 * MB, 64, vec![MB, MB], 5);
        warm(&mut m, 200_000, &[0, 1]);
        assert!(rate(&mut m, 0, 10_000) > 0.95);
        assert!(rate(&mut m, 1, 10_000) > 0.95);
    }

    #[test]
    fn lowered_partition_decays_lazily() {
        let mut m = LlcModel::new(4 * MB, 64, vec![MB, 8 * MB], 7);
        warm(&mut m, 400_000, &[0]);
        assert_eq!(m.occupancy(0), MB);
        m.set_partition(0, Some(0.0)).unwrap();
        m.set_partition(1, Some(1.0)).unwrap();
        assert_eq!(m.occupancy(0), MB);
        warm(&mut m, 200_000, &[0, 1]);
        assert_eq!(m.occupancy(0), 0);
        assert!(m.occupancy(1) <= 4 * MB);
    }

    #[test]
    fn partitions_bound_occupancy() {
        let mut m = LlcModel::new(4 * MB, 64, vec![8 * MB, 8 * MB], 9);
        m.set_partition(0, Some(0.25)).unwrap();
        m.set_partition(1, Some(0.75)).unwrap();
        warm(&mut m, 500_000, &[0, 1]);
        assert!(m.occupancy(0) <= MB);
        assert!(m.occupancy(1) <= 3 * MB);
        assert!(m.total_occupancy() <= m.capacity());
    }

    #[test]
    fn oversubscribed_partitions_rejected() {
        let mut m = LlcModel::new(4 * MB, 64, vec![MB, MB], 1);
        m.set_partition(0, Some(0.7)).unwrap();
        assert!(m.set_partition(1, Some(0.4)).is_err());
        assert!(m.set_partition(1, Some(1.5)).is_err());
        m.set_partition(1, Some(0.3)).unwrap();
    }
}
