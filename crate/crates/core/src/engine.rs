//! The recency weighted sampler: state recursion, exact play laws,
//! simulation, one-step transition support and history approximation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RwsError};
use crate::game::{check_simplex, Game, Role, StatePoint};
use crate::grid::{check_grid, for_each_count_vector, DEFAULT_GRID_CAP};
use crate::rng::{ChainRng, StreamSeed};

/// Recency `beta`, sample size `k` and error rate `epsilon`, shared by both
/// roles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwsParams {
    pub beta: f64,
    pub k: u32,
    pub epsilon: f64,
}

impl RwsParams {
    pub fn new(beta: f64, k: u32, epsilon: f64) -> Result<RwsParams> {
        let p = RwsParams { beta, k, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(RwsError::InvalidParameter(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.k == 0 {
            return Err(RwsError::InvalidParameter("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(RwsError::InvalidParameter(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// A warning when `beta` is at or below the uniform ergodicity bound
    /// `1 - 1/max(m1, m2)`. Such parameters are still simulated.
    pub fn ergodicity_warning(&self, game: &Game) -> Option<String> {
        let m = game.m1().max(game.m2()) as f64;
        let bound = 1.0 - 1.0 / m;
        (self.beta <= bound).then(|| {
            format!(
                "beta = {} is not above 1 - 1/max(m1, m2) = {bound}; uniform ergodicity is not guaranteed",
                self.beta
            )
        })
    }

    pub fn with_beta(self, beta: f64) -> RwsParams {
        RwsParams { beta, ..self }
    }

    pub fn with_epsilon(self, epsilon: f64) -> RwsParams {
        RwsParams { epsilon, ..self }
    }

    pub fn with_k(self, k: u32) -> RwsParams {
        RwsParams { k, ..self }
    }
}

/// A realized strategy profile (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlayProfile {
    pub s1: usize,
    pub s2: usize,
}

impl PlayProfile {
    pub fn get(&self, role: Role) -> usize {
        match role {
            Role::One => self.s1,
            Role::Two => self.s2,
        }
    }
}

pub(crate) fn push_toward(p: &mut [f64], s: usize, beta: f64) {
    for x in p.iter_mut() {
        *x *= beta;
    }
    p[s] += 1.0 - beta;
}

/// One step of the frequency recursion `p_i <- beta p_i + (1 - beta) e_{s_i}`.
pub fn state_update(state: &StatePoint, play: PlayProfile, beta: f64) -> StatePoint {
    let mut next = state.clone();
    push_toward(&mut next.p1, play.s1, beta);
    push_toward(&mut next.p2, play.s2, beta);
    next
}

/// Exact law of one role's sampled best reply, with the simplex grid and
/// best reply sets precomputed for a fixed `k`.
#[derive(Debug, Clone)]
pub struct SampledBestReply {
    role: Role,
    m_own: usize,
    m_opp: usize,
    k: u32,
    counts: Vec<u32>,
    log_coef: Vec<f64>,
    reply_start: Vec<usize>,
    replies: Vec<usize>,
}

fn log_factorials(k: u32) -> Vec<f64> {
    let mut t = Vec::with_capacity(k as usize + 1);
    let mut acc = 0.0f64;
    t.push(0.0);
    for i in 1..=k {
        acc += (i as f64).ln();
        t.push(acc);
    }
    t
}

impl SampledBestReply {
    pub fn new(game: &Game, role: Role, k: u32) -> Result<SampledBestReply> {
        Self::with_cap(game, role, k, DEFAULT_GRID_CAP)
    }

    pub fn with_cap(game: &Game, role: Role, k: u32, cap: usize) -> Result<SampledBestReply> {
        let m_opp = game.strategies(role.other());
        let size = check_grid(m_opp, k, cap)? as usize;
        let lf = log_factorials(k);
        let mut counts = Vec::with_capacity(size * m_opp);
        let mut log_coef = Vec::with_capacity(size);
        let mut reply_start = Vec::with_capacity(size + 1);
        let mut replies = Vec::with_capacity(size);
        let mut br = Vec::new();
        reply_start.push(0);
        for_each_count_vector(m_opp, k, |c| {
            counts.extend_from_slice(c);
            log_coef.push(lf[k as usize] - c.iter().map(|&n| lf[n as usize]).sum::<f64>());
            game.best_replies_to_counts_into(role, c, &mut br);
            replies.extend_from_slice(&br);
            reply_start.push(replies.len());
        });
        Ok(SampledBestReply {
            role,
            m_own: game.strategies(role),
            m_opp,
            k,
            counts,
            log_coef,
            reply_start,
            replies,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn grid_len(&self) -> usize {
        self.log_coef.len()
    }

    /// `P(BR-hat(D) = a)` for the sample mean `D` of `k` draws from
    /// `opp_freq`, without the tremble.
    pub fn reply_law(&self, opp_freq: &[f64]) -> Vec<f64> {
        debug_assert_eq!(opp_freq.len(), self.m_opp);
        let log_p: Vec<f64> = opp_freq.iter().map(|&p| p.ln()).collect();
        let mut law = vec![0.0; self.m_own];
        'points: for (i, c) in self.counts.chunks_exact(self.m_opp).enumerate() {
            let mut lp = self.log_coef[i];
            for (j, &n) in c.iter().enumerate() {
                if n > 0 {
                    if opp_freq[j] <= 0.0 {
                        continue 'points;
                    }
                    lp += n as f64 * log_p[j];
                }
            }
            let pmf = lp.exp();
            let br = &self.replies[self.reply_start[i]..self.reply_start[i + 1]];
            let share = pmf / br.len() as f64;
            for &a in br {
                law[a] += share;
            }
        }
        law
    }

    /// `P(BR-tilde(opp_freq) = a) = epsilon / m + (1 - epsilon) P(BR-hat(D) = a)`.
    pub fn distribution(&self, opp_freq: &[f64], epsilon: f64) -> Vec<f64> {
        let floor = epsilon / self.m_own as f64;
        self.reply_law(opp_freq)
            .into_iter()
            .map(|q| floor + (1.0 - epsilon) * q)
            .collect()
    }
}

/// Probability that `role` plays each of its strategies when it samples `k`
/// plays from `opp_freq`, best-replies with uniform tie-breaking and
/// trembles to uniform with probability `epsilon`.
pub fn exact_play_distribution(
    game: &Game,
    role: Role,
    opp_freq: &[f64],
    params: &RwsParams,
) -> Result<Vec<f64>> {
    exact_play_distribution_capped(game, role, opp_freq, params, DEFAULT_GRID_CAP)
}

pub fn exact_play_distribution_capped(
    game: &Game,
    role: Role,
    opp_freq: &[f64],
    params: &RwsParams,
    cap: usize,
) -> Result<Vec<f64>> {
    params.validate()?;
    if opp_freq.len() != game.strategies(role.other()) {
        return Err(RwsError::Dimension(format!(
            "opponent frequency has {} entries, role {} has {} strategies",
            opp_freq.len(),
            role.other().number(),
            game.strategies(role.other())
        )));
    }
    check_simplex("opponent frequency", opp_freq)?;
    let kernel = SampledBestReply::with_cap(game, role, params.k, cap)?;
    Ok(kernel.distribution(opp_freq, params.epsilon))
}

/// Reusable buffers for drawing sampled best replies.
#[derive(Debug, Clone, Default)]
struct SampleScratch {
    cumulative: Vec<f64>,
    counts: Vec<u32>,
    replies: Vec<usize>,
}

/// Draws one sampled best reply by the literal procedure: tremble with
/// probability `epsilon`, otherwise draw `k` plays from `opp_freq`, then pick
/// uniformly among the best replies to the sample.
fn draw_play(
    game: &Game,
    role: Role,
    opp_freq: &[f64],
    params: &RwsParams,
    rng: &mut ChainRng,
    scratch: &mut SampleScratch,
) -> usize {
    let m = game.strategies(role);
    if params.epsilon > 0.0 && rng.random::<f64>() < params.epsilon {
        return rng.random_range(0..m);
    }
    let n = opp_freq.len();
    scratch.cumulative.clear();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in opp_freq.iter().enumerate() {
        acc += p;
        scratch.cumulative.push(acc);
        if p > 0.0 {
            last_positive = j;
        }
    }
    scratch.counts.clear();
    scratch.counts.resize(n, 0);
    for _ in 0..params.k {
        let u: f64 = rng.random();
        let j = scratch
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(last_positive);
        scratch.counts[j] += 1;
    }
    game.best_replies_to_counts_into(role, &scratch.counts, &mut scratch.replies);
    match scratch.replies.len() {
        1 => scratch.replies[0],
        len => scratch.replies[rng.random_range(0..len)],
    }
}

/// One RWS step: both roles draw independently from the current state,
/// then both frequency vectors are updated.
pub fn simulate_step(
    state: &StatePoint,
    game: &Game,
    params: &RwsParams,
    rng: &mut ChainRng,
) -> (StatePoint, PlayProfile) {
    let mut scratch = SampleScratch::default();
    let play = draw_profile(state, game, params, rng, &mut scratch);
    (state_update(state, play, params.beta), play)
}

fn draw_profile(
    state: &StatePoint,
    game: &Game,
    params: &RwsParams,
    rng: &mut ChainRng,
    scratch: &mut SampleScratch,
) -> PlayProfile {
    let s1 = draw_play(game, Role::One, &state.p2, params, rng, scratch);
    let s2 = draw_play(game, Role::Two, &state.p1, params, rng, scratch);
    PlayProfile { s1, s2 }
}

/// Draws a single role's play; used by Monte Carlo checks of the exact law.
pub fn sample_play(
    game: &Game,
    role: Role,
    opp_freq: &[f64],
    params: &RwsParams,
    rng: &mut ChainRng,
) -> usize {
    draw_play(game, role, opp_freq, params, rng, &mut SampleScratch::default())
}

/// A running chain that updates its state in place.
#[derive(Debug, Clone)]
pub struct RwsChain {
    game: Game,
    params: RwsParams,
    state: StatePoint,
    rng: ChainRng,
    scratch: SampleScratch,
}

impl RwsChain {
    pub fn new(game: &Game, params: RwsParams, start: StatePoint, seed: StreamSeed) -> Result<RwsChain> {
        params.validate()?;
        let state = StatePoint::new(start.p1, start.p2)?.for_game(game)?;
        Ok(RwsChain {
            game: game.clone(),
            params,
            state,
            rng: seed.rng(),
            scratch: SampleScratch::default(),
        })
    }

    pub fn state(&self) -> &StatePoint {
        &self.state
    }

    pub fn params(&self) -> &RwsParams {
        &self.params
    }

    pub fn step(&mut self) -> PlayProfile {
        let play = draw_profile(
            &self.state,
            &self.game,
            &self.params,
            &mut self.rng,
            &mut self.scratch,
        );
        push_toward(&mut self.state.p1, play.s1, self.params.beta);
        push_toward(&mut self.state.p2, play.s2, self.params.beta);
        play
    }

    pub fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }
}

/// A simulated path: `states[t + 1]` is the update of `states[t]` with
/// `plays[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: RwsParams,
    pub initial: StatePoint,
    pub states: Vec<StatePoint>,
    pub plays: Vec<PlayProfile>,
    pub seed: StreamSeed,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.plays.len()
    }
}

pub fn simulate_trajectory(
    initial: &StatePoint,
    game: &Game,
    params: &RwsParams,
    horizon: usize,
    seed: StreamSeed,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(RwsError::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut chain = RwsChain::new(game, *params, initial.clone(), seed)?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut plays = Vec::with_capacity(horizon);
    states.push(chain.state().clone());
    for _ in 0..horizon {
        plays.push(chain.step());
        states.push(chain.state().clone());
    }
    Ok(Trajectory {
        params: *params,
        initial: initial.clone(),
        states,
        plays,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Successor {
    pub play: PlayProfile,
    pub state: StatePoint,
    pub probability: f64,
}

/// The at most `m1 * m2` states reachable in one step, with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSupport {
    pub successors: Vec<Successor>,
}

impl TransitionSupport {
    pub fn total_probability(&self) -> f64 {
        self.successors.iter().map(|s| s.probability).sum()
    }
}

pub fn transition_support(
    state: &StatePoint,
    game: &Game,
    params: &RwsParams,
) -> Result<TransitionSupport> {
    let state = state.clone().for_game(game)?;
    let q1 = exact_play_distribution(game, Role::One, &state.p2, params)?;
    let q2 = exact_play_distribution(game, Role::Two, &state.p1, params)?;
    let mut successors = Vec::with_capacity(q1.len() * q2.len());
    for (s1, &a) in q1.iter().enumerate() {
        for (s2, &b) in q2.iter().enumerate() {
            let play = PlayProfile { s1, s2 };
            successors.push(Successor {
                play,
                state: state_update(&state, play, params.beta),
                probability: a * b,
            });
        }
    }
    Ok(TransitionSupport { successors })
}

/// A finite play record whose recency-weighted frequencies approximate a
/// target from below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryApproximation {
    /// `plays[tau - 1]` is the strategy played `tau` periods ago.
    pub plays: Vec<usize>,
    /// `(1 - beta) * sum_tau beta^(tau - 1) * 1{plays[tau - 1] = j}`.
    pub frequencies: Vec<f64>,
}

/// Smallest `n` with `beta^n < delta`.
pub fn history_length(beta: f64, delta: f64) -> usize {
    let mut n = 0;
    let mut power = 1.0;
    while power >= delta {
        power *= beta;
        n += 1;
    }
    n
}

/// Greedy construction of a history whose frequencies lie in
/// `(max(target_j - delta, 0), target_j]` for every `j`. Each period adds the
/// strategy with the largest remaining deficit, lowest index first on ties.
pub fn approximate_history(target: &[f64], beta: f64, delta: f64) -> Result<HistoryApproximation> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(RwsError::InvalidParameter(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(RwsError::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    check_simplex("target", target)?;
    let m = target.len();
    let value = (1.0 - beta) * m as f64;
    if value > 1.0 {
        return Err(RwsError::HistoryPrecondition { beta, m, value });
    }
    let n = history_length(beta, delta);
    let mut frequencies = vec![0.0; m];
    let mut plays = Vec::with_capacity(n);
    let mut weight = 1.0 - beta;
    for _ in 0..n {
        let mut a = 0;
        let mut gap = f64::NEG_INFINITY;
        for (j, (&t, &f)) in target.iter().zip(&frequencies).enumerate() {
            if t - f > gap {
                gap = t - f;
                a = j;
            }
        }
        frequencies[a] += weight;
        plays.push(a);
        weight *= beta;
    }
    Ok(HistoryApproximation { plays, frequencies })
}
