//! The simplex grid of size-`k` samples over `m` strategies.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RwsError};

/// Default cap on the number of grid points enumerated anywhere.
pub const DEFAULT_GRID_CAP: usize = 1_000_000;

/// Counts of a size-`k` sample over `m` strategies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub counts: Vec<u32>,
}

impl GridPoint {
    pub fn k(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// The empirical mixed strategy `counts / k`.
    pub fn frequencies(&self) -> Vec<f64> {
        let k = self.k() as f64;
        self.counts.iter().map(|&c| c as f64 / k).collect()
    }
}

/// `C(k + m - 1, m - 1)`, saturating at `u128::MAX`.
pub fn grid_size(m: usize, k: u32) -> u128 {
    if m == 0 {
        return 0;
    }
    let n = k as u128 + m as u128 - 1;
    let r = (m as u128 - 1).min(k as u128);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub(crate) fn check_grid(m: usize, k: u32, cap: usize) -> Result<u128> {
    if m == 0 || k == 0 {
        return Err(RwsError::InvalidParameter(format!(
            "simplex grid needs m >= 1 and k >= 1, got m = {m}, k = {k}"
        )));
    }
    let size = grid_size(m, k);
    if size > cap as u128 {
        return Err(RwsError::GridCapExceeded { size, cap });
    }
    Ok(size)
}

/// Visits every count vector in lexicographic order: the first coordinate
/// varies slowest, starting from the all-on-last-strategy point.
pub(crate) fn for_each_count_vector(m: usize, k: u32, mut visit: impl FnMut(&[u32])) {
    let mut counts = vec![0u32; m];
    fill(&mut counts, 0, k, &mut visit);
}

fn fill(counts: &mut [u32], pos: usize, remaining: u32, visit: &mut impl FnMut(&[u32])) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        fill(counts, pos + 1, remaining - c, visit);
    }
    counts[pos] = 0;
}

/// All count vectors of length `m` summing to `k`, each exactly once.
pub fn simplex_grid(m: usize, k: u32, cap: usize) -> Result<Vec<GridPoint>> {
    let size = check_grid(m, k, cap)?;
    let mut out = Vec::with_capacity(size as usize);
    for_each_count_vector(m, k, |c| out.push(GridPoint { counts: c.to_vec() }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn counts(points: &[GridPoint]) -> Vec<Vec<u32>> {
        points.iter().map(|p| p.counts.clone()).collect()
    }

    #[test]
    fn two_strategies_three_samples() {
        let g = simplex_grid(2, 3, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(counts(&g), vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]);
    }

    #[test]
    fn single_sample_gives_unit_vectors() {
        let g = simplex_grid(3, 1, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(counts(&g), vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]);
    }

    #[test]
    fn cardinality_is_binomial() {
        // C(22, 2) = 22 * 21 / 2
        assert_eq!(simplex_grid(3, 20, DEFAULT_GRID_CAP).unwrap().len(), 231);
        for m in 1..6 {
            for k in 1..12u32 {
                let g = simplex_grid(m, k, DEFAULT_GRID_CAP).unwrap();
                assert_eq!(g.len() as u128, grid_size(m, k));
                let unique: HashSet<_> = g.iter().collect();
                assert_eq!(unique.len(), g.len());
                assert!(g.iter().all(|p| p.k() == k));
                assert!(g.windows(2).all(|w| w[0].counts < w[1].counts));
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            simplex_grid(6, 100, 1000),
            Err(RwsError::GridCapExceeded { .. })
        ));
        assert_eq!(grid_size(6, 100), 96_560_646);
        assert!(simplex_grid(2, 0, 10).is_err());
    }
}
