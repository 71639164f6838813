//! Support enumeration for small bimatrix games.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RwsError};
use crate::game::{Game, Role};

/// Largest strategy count per role accepted by [`solve_nash_small`].
pub const MAX_NASH_STRATEGIES: usize = 4;

/// Largest profitable pure deviation tolerated in a returned equilibrium.
pub const REGRET_TOLERANCE: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashProfile {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

impl NashProfile {
    pub fn is_completely_mixed(&self) -> bool {
        self.x1.iter().chain(self.x2.iter()).all(|&v| v > 0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NashSolution {
    pub equilibria: Vec<NashProfile>,
    /// Support pairs whose indifference system was singular.
    pub warnings: Vec<String>,
}

impl NashSolution {
    pub fn is_degenerate(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Largest gain from a pure deviation by either role.
pub fn max_regret(game: &Game, x1: &[f64], x2: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (role, own, opp) in [(Role::One, x1, x2), (Role::Two, x2, x1)] {
        let values = game.expected_payoffs(role, opp);
        let current: f64 = values.iter().zip(own).map(|(v, w)| v * w).sum();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(best - current);
    }
    worst
}

/// All Nash equilibria found by enumerating equal-size support pairs.
pub fn solve_nash_small(game: &Game) -> Result<NashSolution> {
    let (m1, m2) = (game.m1(), game.m2());
    if m1 > MAX_NASH_STRATEGIES || m2 > MAX_NASH_STRATEGIES {
        return Err(RwsError::GameTooLarge(format!(
            "support enumeration handles up to {MAX_NASH_STRATEGIES}x{MAX_NASH_STRATEGIES}, got {m1}x{m2}"
        )));
    }
    let mut out = NashSolution::default();
    for size in 1..=m1.min(m2) {
        for s1 in subsets(m1, size) {
            for s2 in subsets(m2, size) {
                // Role 2's mix on s2 makes role 1 indifferent on s1, and vice versa.
                let y = indifference_mix(game, Role::One, &s1, &s2);
                let x = indifference_mix(game, Role::Two, &s2, &s1);
                let (x, y) = match (x, y) {
                    (Some(x), Some(y)) => (x, y),
                    _ => {
                        out.warnings.push(format!(
                            "singular indifference system for supports {:?} x {:?}",
                            one_based(&s1),
                            one_based(&s2)
                        ));
                        continue;
                    }
                };
                let x1 = expand(m1, &s1, &x);
                let x2 = expand(m2, &s2, &y);
                if x.iter().chain(y.iter()).any(|&v| v <= PIVOT_EPS) {
                    continue;
                }
                if max_regret(game, &x1, &x2) > REGRET_TOLERANCE {
                    continue;
                }
                let duplicate = out.equilibria.iter().any(|e| {
                    e.x1.iter().zip(&x1).all(|(a, b)| (a - b).abs() < 1e-9)
                        && e.x2.iter().zip(&x2).all(|(a, b)| (a - b).abs() < 1e-9)
                });
                if !duplicate {
                    out.equilibria.push(NashProfile { x1, x2 });
                }
            }
        }
    }
    Ok(out)
}

fn one_based(s: &[usize]) -> Vec<usize> {
    s.iter().map(|a| a + 1).collect()
}

fn expand(m: usize, support: &[usize], w: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; m];
    for (&i, &x) in support.iter().zip(w) {
        v[i] = x;
    }
    v
}

/// Mix of the opponent (on `opp_support`) that makes `role` indifferent
/// across `own_support`. `None` when the system is singular.
fn indifference_mix(
    game: &Game,
    role: Role,
    own_support: &[usize],
    opp_support: &[usize],
) -> Option<Vec<f64>> {
    let n = opp_support.len();
    // unknowns: opponent weights (n) and the common value v
    let dim = n + 1;
    let mut a = vec![vec![0.0; dim + 1]; dim];
    for (r, &own) in own_support.iter().enumerate() {
        for (c, &opp) in opp_support.iter().enumerate() {
            a[r][c] = game.payoff(role, own, opp);
        }
        a[r][n] = -1.0;
        a[r][dim] = 0.0;
    }
    a[n][..n].fill(1.0);
    a[n][dim] = 1.0;
    let sol = solve_linear(a)?;
    Some(sol[..n].to_vec())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_linear(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r[..n].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= PIVOT_EPS * scale {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (x, p) in a[row][col..=n].iter_mut().zip(&pivot_row[col..=n]) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn subsets(m: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << m))
        .filter(|mask| mask.count_ones() as usize == size)
        .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn matching_pennies_has_unique_mixed_equilibrium() {
        let sol = solve_nash_small(&Game::builtin("matching-pennies").unwrap()).unwrap();
        assert_eq!(sol.equilibria.len(), 1);
        assert!(close(&sol.equilibria[0].x1, &[0.5, 0.5]));
        assert!(close(&sol.equilibria[0].x2, &[0.5, 0.5]));
    }

    #[test]
    fn unstable_rps_symmetric_equilibrium() {
        let sol = solve_nash_small(&Game::builtin("unstable-rps").unwrap()).unwrap();
        assert_eq!(sol.equilibria.len(), 1);
        let x = [9.0 / 32.0, 10.0 / 32.0, 13.0 / 32.0];
        assert!(close(&sol.equilibria[0].x1, &x));
        assert!(close(&sol.equilibria[0].x2, &x));
    }

    #[test]
    fn coordination_has_three_equilibria() {
        let sol = solve_nash_small(&Game::builtin("coordination").unwrap()).unwrap();
        assert_eq!(sol.equilibria.len(), 3);
        let pure = sol.equilibria.iter().filter(|e| !e.is_completely_mixed()).count();
        assert_eq!(pure, 2);
        let mixed = sol.equilibria.iter().find(|e| e.is_completely_mixed()).unwrap();
        assert!(close(&mixed.x1, &[1.0 / 3.0, 2.0 / 3.0]));
        assert!(close(&mixed.x2, &[1.0 / 3.0, 2.0 / 3.0]));
    }

    #[test]
    fn every_equilibrium_has_no_profitable_deviation() {
        for name in crate::game::BUILTIN_GAMES {
            let g = Game::builtin(name).unwrap();
            for e in solve_nash_small(&g).unwrap().equilibria {
                assert!(max_regret(&g, &e.x1, &e.x2) <= REGRET_TOLERANCE, "{name}");
            }
        }
    }

    #[test]
    fn large_games_are_rejected() {
        let g = Game::new("big", 5, 2, vec![0.0; 10], vec![0.0; 10]).unwrap();
        assert!(matches!(solve_nash_small(&g), Err(RwsError::GameTooLarge(_))));
    }

    #[test]
    fn degenerate_games_warn() {
        // constant payoffs make every indifference system singular beyond size one
        let g = Game::new("flat", 2, 2, vec![1.0; 4], vec![1.0; 4]).unwrap();
        let sol = solve_nash_small(&g).unwrap();
        assert!(sol.is_degenerate());
    }
}
