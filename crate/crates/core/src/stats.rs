//! Monte Carlo estimators over long chains: empirical invariant measures,
//! marginal Wasserstein distances, ergodicity decay, block occupancy,
//! concentration around `x*` and variance scaling in `1 - beta`.
//!
//! Sweeps run one chain per job. Job `i` of a sweep seeded with `seed` uses
//! the stream `seed.child(i)`, so results do not depend on scheduling.

use serde::{Deserialize, Serialize};

use crate::curb::{in_any_neighborhood, Block};
use crate::engine::{RwsChain, RwsParams, Trajectory};
use crate::error::{Result, RwsError};
use crate::game::{Game, StatePoint};
use crate::meanfield::fixed_point_2x2;
use crate::rng::StreamSeed;

/// `ceil(10 / (1 - beta))` steps.
pub fn default_burn_in(beta: f64) -> u64 {
    (10.0 / (1.0 - beta)).ceil() as u64
}

/// `ceil(1 / (1 - beta))` steps, the memory length of the state.
pub fn default_thin(beta: f64) -> u64 {
    (1.0 / (1.0 - beta)).ceil() as u64
}

pub(crate) fn map_jobs<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    /// Equally weighted samples.
    pub samples: Vec<StatePoint>,
    pub params: RwsParams,
    pub seed: StreamSeed,
    pub burn_in: u64,
    pub thin: u64,
}

impl EmpiricalMeasure {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of coordinates, `m1 + m2`.
    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    /// Values of coordinate `c` (role 1's strategies first) across samples.
    pub fn marginal(&self, c: usize) -> Vec<f64> {
        marginal(&self.samples, c)
    }

    pub fn mean(&self) -> StatePoint {
        let n = self.samples.len() as f64;
        let mut mean = self.samples[0].clone();
        for (i, v) in mean.p1.iter_mut().enumerate() {
            *v = self.samples.iter().map(|s| s.p1[i]).sum::<f64>() / n;
        }
        for (i, v) in mean.p2.iter_mut().enumerate() {
            *v = self.samples.iter().map(|s| s.p2[i]).sum::<f64>() / n;
        }
        mean
    }
}

fn marginal(samples: &[StatePoint], c: usize) -> Vec<f64> {
    samples.iter().map(|s| s.coords().nth(c).unwrap_or(f64::NAN)).collect()
}

/// Runs `burn_in` steps from `start`, then records the state `n` times,
/// `thin` steps apart.
pub fn estimate_invariant(
    game: &Game,
    params: &RwsParams,
    start: &StatePoint,
    burn_in: u64,
    n: usize,
    thin: u64,
    seed: StreamSeed,
) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(RwsError::InvalidParameter("sample count n must be at least 1".into()));
    }
    if thin == 0 {
        return Err(RwsError::InvalidParameter("thinning stride must be at least 1".into()));
    }
    let mut chain = RwsChain::new(game, *params, start.clone(), seed)?;
    chain.advance(burn_in);
    let mut samples = Vec::with_capacity(n);
    samples.push(chain.state().clone());
    for _ in 1..n {
        chain.advance(thin);
        samples.push(chain.state().clone());
    }
    Ok(EmpiricalMeasure {
        samples,
        params: *params,
        seed,
        burn_in,
        thin,
    })
}

/// Order-1 Wasserstein distance between two equally sized empirical
/// distributions on the line: the mean gap between sorted samples.
pub fn w1_marginal(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(RwsError::Estimator(format!(
            "sample lists differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(RwsError::Estimator("sample lists are empty".into()));
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / a.len() as f64)
}

/// Largest marginal W1 distance over all coordinates.
pub fn w1_max_coordinate(a: &[StatePoint], b: &[StatePoint]) -> Result<f64> {
    let dim = a.first().map_or(0, StatePoint::dim);
    if b.first().map_or(0, StatePoint::dim) != dim {
        return Err(RwsError::Dimension("measures live on different games".into()));
    }
    (0..dim).try_fold(0.0f64, |m, c| Ok(m.max(w1_marginal(&marginal(a, c), &marginal(b, c))?)))
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub window: u64,
    /// Max-coordinate marginal W1 between the two chains, per window.
    pub distances: Vec<f64>,
    /// Fit of `ln(distance)` against the 1-based window index, over windows
    /// with positive distance. Absent when fewer than two qualify.
    pub fit: Option<LinearFit>,
    pub starts: [StatePoint; 2],
    pub seeds: [StreamSeed; 2],
}

/// Runs one chain from each start and compares their states window by
/// window.
pub fn ergodicity_decay(
    game: &Game,
    params: &RwsParams,
    starts: [&StatePoint; 2],
    seeds: [StreamSeed; 2],
    window: u64,
    horizon: u64,
) -> Result<ErgodicityReport> {
    if window == 0 || horizon == 0 || !horizon.is_multiple_of(window) {
        return Err(RwsError::InvalidParameter(format!(
            "horizon {horizon} must be a positive multiple of the window {window}"
        )));
    }
    let windows = (horizon / window) as usize;
    let runs = map_jobs(vec![0usize, 1], |i| -> Result<Vec<Vec<StatePoint>>> {
        let mut chain = RwsChain::new(game, *params, starts[i].clone(), seeds[i])?;
        Ok((0..windows)
            .map(|_| {
                (0..window)
                    .map(|_| {
                        chain.step();
                        chain.state().clone()
                    })
                    .collect()
            })
            .collect())
    });
    let mut runs = runs.into_iter();
    let (a, b) = (runs.next().unwrap()?, runs.next().unwrap()?);
    let distances = a
        .iter()
        .zip(&b)
        .map(|(wa, wb)| w1_max_coordinate(wa, wb))
        .collect::<Result<Vec<f64>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0.0)
        .map(|(i, d)| ((i + 1) as f64, d.ln()))
        .unzip();
    Ok(ErgodicityReport {
        window,
        fit: linear_fit(&xs, &ys),
        distances,
        starts: [starts[0].clone(), starts[1].clone()],
        seeds,
    })
}

/// Fraction of the trajectory's states (including the initial one) lying
/// in the union of the blocks' `delta`-neighborhoods.
pub fn occupancy_fraction(traj: &Trajectory, blocks: &[Block], delta: f64) -> f64 {
    let inside = traj
        .states
        .iter()
        .filter(|s| in_any_neighborhood(s, blocks, delta))
        .count();
    inside as f64 / traj.states.len() as f64
}

/// Occupancy of a single chain over `steps` states after `burn_in`, without
/// storing the path.
#[allow(clippy::too_many_arguments)]
pub fn occupancy_run(
    game: &Game,
    params: &RwsParams,
    start: &StatePoint,
    burn_in: u64,
    steps: u64,
    blocks: &[Block],
    delta: f64,
    seed: StreamSeed,
) -> Result<f64> {
    if steps == 0 {
        return Err(RwsError::InvalidParameter("steps must be at least 1".into()));
    }
    let mut chain = RwsChain::new(game, *params, start.clone(), seed)?;
    chain.advance(burn_in);
    let mut inside = 0u64;
    for _ in 0..steps {
        chain.step();
        if in_any_neighborhood(chain.state(), blocks, delta) {
            inside += 1;
        }
    }
    Ok(inside as f64 / steps as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRow {
    pub epsilon: f64,
    /// Mean over seeds.
    pub fraction: f64,
    pub per_seed: Vec<f64>,
}

/// Mean occupancy per tremble rate, `seeds` chains each. Job
/// `i * seeds + j` covers the `i`-th rate and `j`-th replicate.
#[allow(clippy::too_many_arguments)]
pub fn occupancy_sweep(
    game: &Game,
    base: &RwsParams,
    epsilons: &[f64],
    start: &StatePoint,
    burn_in: u64,
    steps: u64,
    blocks: &[Block],
    delta: f64,
    seeds: usize,
    seed: StreamSeed,
) -> Result<Vec<OccupancyRow>> {
    if epsilons.is_empty() || seeds == 0 {
        return Err(RwsError::InvalidParameter("empty occupancy sweep".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..epsilons.len())
        .flat_map(|i| (0..seeds).map(move |j| (i, j)))
        .collect();
    let results = map_jobs(jobs, |(i, j)| {
        let params = base.with_epsilon(epsilons[i]);
        let job = (i * seeds + j) as u64;
        occupancy_run(game, &params, start, burn_in, steps, blocks, delta, seed.child(job))
    });
    let results = results.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(epsilons
        .iter()
        .zip(results.chunks(seeds))
        .map(|(&epsilon, chunk)| OccupancyRow {
            epsilon,
            fraction: chunk.iter().sum::<f64>() / seeds as f64,
            per_seed: chunk.to_vec(),
        })
        .collect())
}

/// Sampling plan of a stationary estimate at one `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub burn_in: u64,
    pub thin: u64,
    pub n: usize,
}

impl SamplingPlan {
    pub fn for_beta(beta: f64, n: usize) -> SamplingPlan {
        SamplingPlan {
            burn_in: default_burn_in(beta),
            thin: default_thin(beta),
            n,
        }
    }
}

/// Streams `n` thinned post-burn-in states of one chain into `visit`.
fn visit_stationary(
    game: &Game,
    params: &RwsParams,
    start: &StatePoint,
    plan: SamplingPlan,
    seed: StreamSeed,
    mut visit: impl FnMut(&StatePoint),
) -> Result<()> {
    let mut chain = RwsChain::new(game, *params, start.clone(), seed)?;
    chain.advance(plan.burn_in);
    for i in 0..plan.n {
        if i > 0 {
            chain.advance(plan.thin);
        }
        visit(chain.state());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub beta: f64,
    pub eta: f64,
    /// Estimate of `mu*(|x - x*|_inf >= eta)`.
    pub probability: f64,
    /// Binomial standard error.
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCurve {
    pub x_star: StatePoint,
    pub rows: Vec<ConcentrationRow>,
    pub seed: StreamSeed,
}

/// The reference point for 2x2 games with a unique mixed equilibrium.
fn default_x_star(game: &Game, params: &RwsParams) -> Result<StatePoint> {
    Ok(fixed_point_2x2(game, params)?.x_star)
}

/// Exceedance probabilities of `|x - x*|_inf >= eta` under the empirical
/// stationary measure, one chain per `beta` started at `x*`, for every eta.
/// Without `x_star`, the 2x2 fixed point is used.
pub fn concentration_curve(
    game: &Game,
    base: &RwsParams,
    betas: &[f64],
    etas: &[f64],
    n: usize,
    seed: StreamSeed,
    x_star: Option<&StatePoint>,
) -> Result<ConcentrationCurve> {
    if betas.is_empty() || etas.is_empty() {
        return Err(RwsError::InvalidParameter("beta and eta grids must be nonempty".into()));
    }
    if n == 0 {
        return Err(RwsError::Estimator("sample count n must be at least 1".into()));
    }
    let x_star = match x_star {
        Some(x) => StatePoint::new(x.p1.clone(), x.p2.clone())?.for_game(game)?,
        None => default_x_star(game, base)?,
    };
    let jobs: Vec<(usize, f64)> = betas.iter().copied().enumerate().collect();
    let counts = map_jobs(jobs, |(i, beta)| -> Result<Vec<usize>> {
        let params = base.with_beta(beta);
        params.validate()?;
        let mut hits = vec![0usize; etas.len()];
        visit_stationary(game, &params, &x_star, SamplingPlan::for_beta(beta, n), seed.child(i as u64), |s| {
            let d = s.dist_inf(&x_star);
            for (h, &eta) in hits.iter_mut().zip(etas) {
                if d >= eta {
                    *h += 1;
                }
            }
        })?;
        Ok(hits)
    });
    let mut rows = Vec::with_capacity(betas.len() * etas.len());
    for (&beta, hits) in betas.iter().zip(counts) {
        for (&eta, h) in etas.iter().zip(hits?) {
            let p = h as f64 / n as f64;
            rows.push(ConcentrationRow {
                beta,
                eta,
                probability: p,
                stderr: (p * (1.0 - p) / n as f64).sqrt(),
                n,
            });
        }
    }
    Ok(ConcentrationCurve { x_star, rows, seed })
}

/// Mean of `values` and its delete-one-block jackknife standard error.
pub fn jackknife_mean(values: &[f64], block_len: usize) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(RwsError::Estimator(format!(
            "variance needs n >= 2 samples, got {}",
            values.len()
        )));
    }
    let block_len = block_len.clamp(1, values.len() / 2);
    let blocks: Vec<f64> = values
        .chunks_exact(block_len)
        .map(|c| c.iter().sum::<f64>())
        .collect();
    let g = blocks.len();
    let used = (g * block_len) as f64;
    let total: f64 = blocks.iter().sum();
    let mean = total / used;
    let leave_out: Vec<f64> = blocks
        .iter()
        .map(|b| (total - b) / (used - block_len as f64))
        .collect();
    let lo_mean = leave_out.iter().sum::<f64>() / g as f64;
    let var = (g as f64 - 1.0) / g as f64 * leave_out.iter().map(|v| (v - lo_mean).powi(2)).sum::<f64>();
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub beta: f64,
    /// Estimate of `E |p - x*|_2^2`.
    pub var: f64,
    pub stderr: f64,
    /// `var / (1 - beta)`.
    pub ratio: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTable {
    pub x_star: StatePoint,
    pub rows: Vec<VarianceRow>,
    pub seed: StreamSeed,
}

/// Stationary mean squared distance to the 2x2 fixed point per `beta`,
/// with standard errors from a jackknife over blocks spanning
/// `1 / (1 - beta)` steps.
pub fn variance_scaling(
    game: &Game,
    base: &RwsParams,
    betas: &[f64],
    n: usize,
    seed: StreamSeed,
) -> Result<VarianceTable> {
    if n < 2 {
        return Err(RwsError::Estimator(format!("variance needs n >= 2 samples, got {n}")));
    }
    if betas.is_empty() {
        return Err(RwsError::InvalidParameter("beta grid must be nonempty".into()));
    }
    let x_star = default_x_star(game, base)?;
    let jobs: Vec<(usize, f64)> = betas.iter().copied().enumerate().collect();
    let rows = map_jobs(jobs, |(i, beta)| -> Result<VarianceRow> {
        let params = base.with_beta(beta);
        params.validate()?;
        let plan = SamplingPlan::for_beta(beta, n);
        let mut values = Vec::with_capacity(n);
        visit_stationary(game, &params, &x_star, plan, seed.child(i as u64), |s| {
            values.push(s.dist2_sq(&x_star));
        })?;
        let block_len = (1.0 / ((1.0 - beta) * plan.thin as f64)).ceil() as usize;
        let (var, stderr) = jackknife_mean(&values, block_len)?;
        Ok(VarianceRow {
            beta,
            var,
            stderr,
            ratio: var / (1.0 - beta),
            n,
        })
    });
    Ok(VarianceTable {
        x_star,
        rows: rows.into_iter().collect::<Result<_>>()?,
        seed,
    })
}

/// Time average of `|p(t) - target|_inf` over a path.
pub fn mean_distance(states: &[StatePoint], target: &StatePoint) -> f64 {
    states.iter().map(|s| s.dist_inf(target)).sum::<f64>() / states.len() as f64
}

/// Fraction of a path within `radius` of `target` in the sup norm.
pub fn fraction_within(states: &[StatePoint], target: &StatePoint, radius: f64) -> f64 {
    let n = states.iter().filter(|s| s.dist_inf(target) < radius).count();
    n as f64 / states.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp() -> Game {
        Game::builtin("matching-pennies").unwrap()
    }

    #[test]
    fn w1_examples() {
        assert_eq!(w1_marginal(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.0);
        assert_eq!(w1_marginal(&[0.0; 4], &[1.0; 4]).unwrap(), 1.0);
        assert_eq!(w1_marginal(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 0.5);
        assert!(w1_marginal(&[0.0], &[0.0, 1.0]).is_err());
        assert!(w1_marginal(&[], &[]).is_err());
    }

    #[test]
    fn single_sample_measure() {
        let p = RwsParams::new(0.9, 3, 0.1).unwrap();
        let start = StatePoint::uniform(2, 2);
        let m = estimate_invariant(&mp(), &p, &start, 0, 1, 5, StreamSeed::new(1, 0)).unwrap();
        assert_eq!(m.samples, vec![start]);
        assert!(estimate_invariant(&mp(), &p, &StatePoint::uniform(2, 2), 0, 0, 5, StreamSeed::new(1, 0)).is_err());
    }

    #[test]
    fn linear_fit_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn jackknife_with_unit_blocks_is_the_standard_error() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (m, se) = jackknife_mean(&v, 1).unwrap();
        assert!((m - 3.0).abs() < 1e-12);
        // sample sd / sqrt(n)
        assert!((se - (2.5f64 / 5.0).sqrt()).abs() < 1e-12);
        assert!(jackknife_mean(&[1.0], 1).is_err());
    }

    #[test]
    fn variance_needs_two_samples() {
        let p = RwsParams::new(0.9, 21, 0.05).unwrap();
        assert!(matches!(
            variance_scaling(&mp(), &p, &[0.9], 1, StreamSeed::new(0, 0)),
            Err(RwsError::Estimator(_))
        ));
    }

    #[test]
    fn concentration_trivial_radii() {
        let p = RwsParams::new(0.9, 21, 0.05).unwrap();
        let c = concentration_curve(&mp(), &p, &[0.8, 0.9], &[0.0, 2.0], 200, StreamSeed::new(3, 0), None).unwrap();
        for r in &c.rows {
            let expect = if r.eta == 0.0 { 1.0 } else { 0.0 };
            assert_eq!(r.probability, expect);
            assert_eq!(r.stderr, 0.0);
        }
    }

    #[test]
    fn occupancy_trivial_cases() {
        let g = Game::builtin("coordination").unwrap();
        let p = RwsParams::new(0.9, 5, 0.0).unwrap();
        let blocks = crate::curb::minimal_k_curb_blocks(&g, 5).unwrap();
        let start = StatePoint::corner(2, 2, 0, 0);
        let t = crate::engine::simulate_trajectory(&start, &g, &p, 500, StreamSeed::new(2, 0)).unwrap();
        assert_eq!(occupancy_fraction(&t, &blocks, 0.0), 1.0);
        let noisy = crate::engine::simulate_trajectory(&start, &g, &p.with_epsilon(1.0), 500, StreamSeed::new(2, 0)).unwrap();
        assert_eq!(occupancy_fraction(&noisy, &blocks, 1.0), 1.0);
    }
}
