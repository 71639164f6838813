//! Comparison processes: finite-memory adaptive play and fictitious play
//! with recency.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{push_toward, PlayProfile};
use crate::error::{Result, RwsError};
use crate::game::{Game, Role, StatePoint};
use crate::rng::ChainRng;

/// Finite-memory adaptive play: the last `m` profiles, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungState {
    pub memory: VecDeque<PlayProfile>,
    pub k: usize,
    pub epsilon: f64,
}

impl YoungState {
    pub fn new(game: &Game, memory: Vec<PlayProfile>, k: usize, epsilon: f64) -> Result<YoungState> {
        if memory.is_empty() {
            return Err(RwsError::InvalidParameter("memory must be nonempty".into()));
        }
        if k == 0 || k > memory.len() {
            return Err(RwsError::InvalidParameter(format!(
                "sample size k = {k} must lie in 1..={}",
                memory.len()
            )));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(RwsError::InvalidParameter(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        if memory.iter().any(|p| p.s1 >= game.m1() || p.s2 >= game.m2()) {
            return Err(RwsError::InvalidParameter("memory holds an out-of-range strategy".into()));
        }
        Ok(YoungState {
            memory: memory.into(),
            k,
            epsilon,
        })
    }

    /// Memory from two digit strings of 1-based strategies, oldest first,
    /// e.g. `"111122222"` for role 1 and role 2.
    pub fn from_rows(game: &Game, row1: &str, row2: &str, k: usize, epsilon: f64) -> Result<YoungState> {
        let parse = |row: &str| -> Result<Vec<usize>> {
            row.chars()
                .map(|c| {
                    c.to_digit(10)
                        .filter(|&d| d >= 1)
                        .map(|d| d as usize - 1)
                        .ok_or_else(|| RwsError::InvalidParameter(format!("bad memory entry `{c}`")))
                })
                .collect()
        };
        let (a, b) = (parse(row1)?, parse(row2)?);
        if a.len() != b.len() {
            return Err(RwsError::Dimension("memory rows differ in length".into()));
        }
        let memory = a.into_iter().zip(b).map(|(s1, s2)| PlayProfile { s1, s2 }).collect();
        YoungState::new(game, memory, k, epsilon)
    }

    /// A memory of length `m` whose per-role frequencies are as close as
    /// possible to uniform, each role cycling through its strategies.
    pub fn balanced(game: &Game, m: usize, k: usize, epsilon: f64) -> Result<YoungState> {
        YoungState::from_state(game, &StatePoint::uniform(game.m1(), game.m2()), m, k, epsilon)
    }

    /// A memory of length `m` approximating `state`: each entry goes to the
    /// strategy furthest behind its target count, lowest index on ties.
    pub fn from_state(game: &Game, state: &StatePoint, m: usize, k: usize, epsilon: f64) -> Result<YoungState> {
        let state = StatePoint::new(state.p1.clone(), state.p2.clone())?.for_game(game)?;
        let row = |p: &[f64]| -> Vec<usize> {
            let mut counts = vec![0usize; p.len()];
            (0..m)
                .map(|t| {
                    let deficit = |j: usize| p[j] * (t + 1) as f64 - counts[j] as f64;
                    let mut best = 0;
                    for j in 1..p.len() {
                        if deficit(j) > deficit(best) + 1e-12 {
                            best = j;
                        }
                    }
                    counts[best] += 1;
                    best
                })
                .collect()
        };
        let memory = row(&state.p1)
            .into_iter()
            .zip(row(&state.p2))
            .map(|(s1, s2)| PlayProfile { s1, s2 })
            .collect();
        YoungState::new(game, memory, k, epsilon)
    }

    pub fn m(&self) -> usize {
        self.memory.len()
    }

    /// Per-role frequencies of the remembered plays.
    pub fn frequencies(&self, game: &Game) -> StatePoint {
        let mut p1 = vec![0.0; game.m1()];
        let mut p2 = vec![0.0; game.m2()];
        let w = 1.0 / self.memory.len() as f64;
        for p in &self.memory {
            p1[p.s1] += w;
            p2[p.s2] += w;
        }
        StatePoint { p1, p2 }
    }
}

fn young_play(game: &Game, state: &YoungState, role: Role, rng: &mut ChainRng) -> usize {
    let m_own = game.strategies(role);
    if state.epsilon > 0.0 && rng.random::<f64>() < state.epsilon {
        return rng.random_range(0..m_own);
    }
    let mut counts = vec![0u32; game.strategies(role.other())];
    let opp = |p: &PlayProfile| p.get(role.other());
    if state.k == state.memory.len() {
        for p in &state.memory {
            counts[opp(p)] += 1;
        }
    } else {
        for i in index::sample(rng, state.memory.len(), state.k) {
            counts[opp(&state.memory[i])] += 1;
        }
    }
    let replies = game.best_replies_to_counts(role, &counts);
    match replies.len() {
        1 => replies[0],
        len => replies[rng.random_range(0..len)],
    }
}

/// One period of adaptive play: each role samples `k` of the remembered
/// opponent plays without replacement, best-replies (uniform ties) or
/// trembles, then the new profile replaces the oldest one.
pub fn young_step(state: &YoungState, game: &Game, rng: &mut ChainRng) -> (YoungState, PlayProfile) {
    let mut next = state.clone();
    let play = young_step_in_place(&mut next, game, rng);
    (next, play)
}

pub fn young_step_in_place(state: &mut YoungState, game: &Game, rng: &mut ChainRng) -> PlayProfile {
    let s1 = young_play(game, state, Role::One, rng);
    let s2 = young_play(game, state, Role::Two, rng);
    let play = PlayProfile { s1, s2 };
    state.memory.pop_front();
    state.memory.push_back(play);
    play
}

/// Fictitious play with recency: deterministic best replies to the current
/// belief vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpRecencyState {
    pub beliefs: StatePoint,
    pub beta: f64,
}

impl FpRecencyState {
    pub fn new(game: &Game, beliefs: StatePoint, beta: f64) -> Result<FpRecencyState> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(RwsError::InvalidParameter(format!(
                "beta must lie in (0, 1), got {beta}"
            )));
        }
        let beliefs = StatePoint::new(beliefs.p1, beliefs.p2)?.for_game(game)?;
        Ok(FpRecencyState { beliefs, beta })
    }
}

/// Each role plays its lowest-index best reply to the other role's belief
/// vector; beliefs then follow the recency recursion.
pub fn fp_recency_step(state: &FpRecencyState, game: &Game) -> (FpRecencyState, PlayProfile) {
    let mut next = state.clone();
    let play = fp_recency_step_in_place(&mut next, game);
    (next, play)
}

pub fn fp_recency_step_in_place(state: &mut FpRecencyState, game: &Game) -> PlayProfile {
    let s1 = game.best_replies(Role::One, &state.beliefs.p2)[0];
    let s2 = game.best_replies(Role::Two, &state.beliefs.p1)[0];
    push_toward(&mut state.beliefs.p1, s1, state.beta);
    push_toward(&mut state.beliefs.p2, s2, state.beta);
    PlayProfile { s1, s2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamSeed;

    fn mp() -> Game {
        Game::builtin("matching-pennies").unwrap()
    }

    #[test]
    fn cycling_example_first_step() {
        let game = mp();
        let state = YoungState::from_rows(&game, "111122222", "111122222", 9, 0.0).unwrap();
        let mut rng = StreamSeed::new(0, 0).rng();
        let (next, play) = young_step(&state, &game, &mut rng);
        assert_eq!(play, PlayProfile { s1: 1, s2: 0 });
        assert_eq!(next.m(), 9);
        assert_eq!(next.memory.back(), Some(&play));
        assert_eq!(next.memory.front(), Some(&PlayProfile { s1: 0, s2: 0 }));
    }

    #[test]
    fn full_sample_without_noise_is_deterministic() {
        let game = mp();
        let state = YoungState::from_rows(&game, "121122212", "211122122", 9, 0.0).unwrap();
        let first = young_step(&state, &game, &mut StreamSeed::new(1, 0).rng()).1;
        for seed in 2..20 {
            assert_eq!(young_step(&state, &game, &mut StreamSeed::new(seed, 0).rng()).1, first);
        }
    }

    #[test]
    fn memory_length_is_preserved() {
        let game = Game::builtin("unstable-rps").unwrap();
        let mut state = YoungState::balanced(&game, 30, 7, 0.1).unwrap();
        let mut rng = StreamSeed::new(5, 0).rng();
        for _ in 0..100 {
            young_step_in_place(&mut state, &game, &mut rng);
            assert_eq!(state.m(), 30);
        }
    }

    #[test]
    fn pure_noise_is_uniform() {
        let game = mp();
        let mut state = YoungState::from_rows(&game, "1111", "1111", 4, 1.0).unwrap();
        let mut rng = StreamSeed::new(9, 0).rng();
        let n = 40_000;
        let mut ones = 0;
        for _ in 0..n {
            if young_step_in_place(&mut state, &game, &mut rng).s1 == 0 {
                ones += 1;
            }
        }
        let f = ones as f64 / n as f64;
        // four standard errors of a fair coin
        assert!((f - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn memory_from_state() {
        let game = Game::builtin("unstable-rps").unwrap();
        let s = YoungState::balanced(&game, 7, 2, 0.0).unwrap();
        let rows: Vec<usize> = s.memory.iter().map(|p| p.s1).collect();
        assert_eq!(rows, vec![0, 1, 2, 0, 1, 2, 0]);
        let target = StatePoint::new(vec![0.5, 0.25, 0.25], vec![0.0, 0.0, 1.0]).unwrap();
        let s = YoungState::from_state(&game, &target, 8, 3, 0.0).unwrap();
        assert_eq!(s.frequencies(&game), target);
        let corner = YoungState::from_state(&game, &StatePoint::corner(3, 3, 0, 1), 5, 5, 0.0).unwrap();
        assert!(corner.memory.iter().all(|p| *p == PlayProfile { s1: 0, s2: 1 }));
    }

    #[test]
    fn invalid_sample_size_is_rejected() {
        let game = mp();
        assert!(YoungState::from_rows(&game, "12", "12", 3, 0.0).is_err());
        assert!(YoungState::from_rows(&game, "12", "1", 1, 0.0).is_err());
    }

    #[test]
    fn fp_recency_strict_and_tied_replies() {
        let game = mp();
        let s = FpRecencyState::new(&game, StatePoint::new(vec![0.5, 0.5], vec![1.0, 0.0]).unwrap(), 0.9).unwrap();
        assert_eq!(fp_recency_step(&s, &game).1.s1, 0);

        let rps = Game::builtin("unstable-rps").unwrap();
        let nash = vec![9.0 / 32.0, 10.0 / 32.0, 13.0 / 32.0];
        let s = FpRecencyState::new(&rps, StatePoint::new(nash.clone(), nash).unwrap(), 0.9).unwrap();
        let (next, play) = fp_recency_step(&s, &rps);
        assert_eq!(play, PlayProfile { s1: 0, s2: 0 });
        assert!((next.beliefs.p1[0] - (0.9 * 9.0 / 32.0 + 0.1)).abs() < 1e-15);
    }
}
