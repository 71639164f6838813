//! The deterministic mean-value process `x' = E[BR~(x)] - x`: vector field,
//! RK4 integration, fixed points and the Lyapunov function
//! `V(x) = |x - x*|^2 / 2`.

use serde::{Deserialize, Serialize};

use crate::engine::{RwsParams, SampledBestReply};
use crate::error::{Result, RwsError};
use crate::game::{Game, Role, StatePoint};
use crate::nash::solve_nash_small;

/// Largest renormalization correction tolerated per integration step.
pub const DRIFT_BOUND: f64 = 1e-8;

/// Residual `|F(x)|_inf` at which fixed-point iteration stops.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;

const BISECTION_TOLERANCE: f64 = 1e-12;
const INTEGER_CUTOFF_TOLERANCE: f64 = 1e-9;
const DAMPING: f64 = 0.5;
const MAX_DAMPED_ITERATIONS: usize = 100_000;
const STALL_ITERATIONS: usize = 2_000;

/// Velocity of both roles' frequency vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

impl Velocity {
    pub fn norm_inf(&self) -> f64 {
        self.v1
            .iter()
            .chain(self.v2.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The vector field with both roles' exact play laws precomputed.
#[derive(Debug, Clone)]
pub struct MeanField {
    params: RwsParams,
    law1: SampledBestReply,
    law2: SampledBestReply,
}

impl MeanField {
    pub fn new(game: &Game, params: RwsParams) -> Result<MeanField> {
        params.validate()?;
        Ok(MeanField {
            params,
            law1: SampledBestReply::new(game, Role::One, params.k)?,
            law2: SampledBestReply::new(game, Role::Two, params.k)?,
        })
    }

    pub fn params(&self) -> &RwsParams {
        &self.params
    }

    /// `(E[BR~_1(x_2)], E[BR~_2(x_1)])`: the expected unit vector of each
    /// role's play is its play distribution.
    pub fn expected_play(&self, x: &StatePoint) -> StatePoint {
        StatePoint {
            p1: self.law1.distribution(&x.p2, self.params.epsilon),
            p2: self.law2.distribution(&x.p1, self.params.epsilon),
        }
    }

    pub fn velocity(&self, x: &StatePoint) -> Velocity {
        let e = self.expected_play(x);
        Velocity {
            v1: e.p1.iter().zip(&x.p1).map(|(a, b)| a - b).collect(),
            v2: e.p2.iter().zip(&x.p2).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn residual(&self, x: &StatePoint) -> f64 {
        self.velocity(x).norm_inf()
    }

    /// Classical RK4 from `x0` with the state projected back onto the
    /// simplex product after every step.
    pub fn integrate(&self, x0: &StatePoint, horizon: f64, dt: f64) -> Result<MeanPath> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(RwsError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if horizon.is_nan() || horizon < dt {
            return Err(RwsError::InvalidParameter(format!(
                "horizon {horizon} must be at least dt = {dt}"
            )));
        }
        let steps = (horizon / dt).round() as usize;
        let mut x = x0.clone();
        let mut times = Vec::with_capacity(steps + 1);
        let mut points = Vec::with_capacity(steps + 1);
        let mut max_drift: f64 = 0.0;
        times.push(0.0);
        points.push(x.clone());
        for step in 1..=steps {
            let k1 = self.velocity(&x);
            let k2 = self.velocity(&offset(&x, &k1, dt / 2.0));
            let k3 = self.velocity(&offset(&x, &k2, dt / 2.0));
            let k4 = self.velocity(&offset(&x, &k3, dt));
            let raw = StatePoint {
                p1: rk4_combine(&x.p1, &k1.v1, &k2.v1, &k3.v1, &k4.v1, dt),
                p2: rk4_combine(&x.p2, &k1.v2, &k2.v2, &k3.v2, &k4.v2, dt),
            };
            let (next, drift) = renormalize(raw);
            let t = step as f64 * dt;
            if drift > DRIFT_BOUND {
                return Err(RwsError::StepSize {
                    drift,
                    bound: DRIFT_BOUND,
                    t,
                });
            }
            max_drift = max_drift.max(drift);
            x = next;
            times.push(t);
            points.push(x.clone());
        }
        Ok(MeanPath {
            times,
            points,
            params: self.params,
            dt,
            max_drift,
        })
    }
}

fn offset(x: &StatePoint, v: &Velocity, h: f64) -> StatePoint {
    StatePoint {
        p1: x.p1.iter().zip(&v.v1).map(|(a, b)| a + h * b).collect(),
        p2: x.p2.iter().zip(&v.v2).map(|(a, b)| a + h * b).collect(),
    }
}

fn rk4_combine(x: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64], dt: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Clips negatives and rescales each role to unit mass; returns the largest
/// coordinate change.
fn renormalize(mut x: StatePoint) -> (StatePoint, f64) {
    let mut drift: f64 = 0.0;
    for p in [&mut x.p1, &mut x.p2] {
        let clipped: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        for (v, c) in p.iter_mut().zip(clipped) {
            let n = c / sum;
            drift = drift.max((n - *v).abs());
            *v = n;
        }
    }
    (x, drift)
}

pub fn vector_field(game: &Game, params: &RwsParams, x: &StatePoint) -> Result<Velocity> {
    let x = x.clone().for_game(game)?;
    Ok(MeanField::new(game, *params)?.velocity(&x))
}

/// A solution of the mean-value ODE on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPath {
    pub times: Vec<f64>,
    pub points: Vec<StatePoint>,
    pub params: RwsParams,
    pub dt: f64,
    /// Largest renormalization correction applied along the path.
    pub max_drift: f64,
}

impl MeanPath {
    pub fn terminal(&self) -> &StatePoint {
        self.points.last().expect("paths hold at least the initial point")
    }
}

pub fn integrate_meanfield(
    game: &Game,
    params: &RwsParams,
    x0: &StatePoint,
    horizon: f64,
    dt: f64,
) -> Result<MeanPath> {
    let x0 = StatePoint::new(x0.p1.clone(), x0.p2.clone())?.for_game(game)?;
    MeanField::new(game, *params)?.integrate(&x0, horizon, dt)
}

/// Probability of playing the "high" action when more than `m` of `k`
/// Bernoulli(`x`) samples succeed, with an `epsilon` tremble:
/// `(1 - epsilon) P(Bin(k, x) > m) + epsilon / 2`.
pub fn rho(k: u32, m: u32, epsilon: f64, x: f64) -> f64 {
    (1.0 - epsilon) * binomial_upper_tail(k, m, x) + epsilon / 2.0
}

/// `P(Bin(k, x) > m)`.
pub fn binomial_upper_tail(k: u32, m: u32, x: f64) -> f64 {
    if m >= k {
        return 0.0;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if k <= 50 {
        // exact coefficients; dyadic x gives an exact sum
        let mut coef = vec![1.0f64; k as usize + 1];
        let mut c: u128 = 1;
        for i in 1..=k as u128 {
            c = c * (k as u128 - i + 1) / i;
            coef[i as usize] = c as f64;
        }
        ((m + 1)..=k)
            .map(|i| coef[i as usize] * x.powi(i as i32) * (1.0 - x).powi((k - i) as i32))
            .sum()
    } else {
        let mut lf = vec![0.0f64; k as usize + 1];
        for i in 1..=k as usize {
            lf[i] = lf[i - 1] + (i as f64).ln();
        }
        let (lx, l1x) = (x.ln(), (1.0 - x).ln());
        ((m + 1)..=k)
            .map(|i| {
                let i = i as usize;
                let k = k as usize;
                (lf[k] - lf[i] - lf[k - i] + i as f64 * lx + (k - i) as f64 * l1x).exp()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointMethod {
    Bisection2x2,
    DampedIteration,
    Integration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub x_star: StatePoint,
    /// `|F(x*)|_inf` evaluated with the exact play laws.
    pub residual: f64,
    pub method: FixedPointMethod,
    pub nash_reference: Option<StatePoint>,
    pub converged: bool,
    pub iterations: usize,
    /// Role whose best reply follows the opponent's first strategy, for the
    /// 2x2 solver.
    pub agreeing_role: Option<Role>,
}

/// Play probability of strategy 1 for one role of a 2x2 game as a function
/// of the opponent's probability `q` of strategy 1.
#[derive(Debug, Clone, Copy)]
struct CutoffResponse {
    cutoff: u32,
    increasing: bool,
}

impl CutoffResponse {
    fn eval(&self, k: u32, epsilon: f64, q: f64) -> f64 {
        let up = rho(k, self.cutoff, epsilon, q);
        if self.increasing {
            up
        } else {
            1.0 - up
        }
    }
}

fn unique_mixed_nash(game: &Game) -> Result<StatePoint> {
    let sol = solve_nash_small(game)?;
    match sol.equilibria.as_slice() {
        [only] if only.is_completely_mixed() => Ok(StatePoint {
            p1: only.x1.clone(),
            p2: only.x2.clone(),
        }),
        eqs => Err(RwsError::FixedPoint(format!(
            "the 2x2 solver needs a unique completely mixed equilibrium; found {} equilibria ({} completely mixed)",
            eqs.len(),
            eqs.iter().filter(|e| e.is_completely_mixed()).count()
        ))),
    }
}

/// The unique interior fixed point of a 2x2 game with a unique completely
/// mixed equilibrium, by bisection on `f1(f2(a)) - a`.
///
/// Each role plays its first strategy exactly when the number of opponent
/// first-strategy samples crosses the cut-off `floor(x_hat * k)` set by the
/// opponent's equilibrium weight. The agreeing role's response increases in
/// that count and the disagreeing role's decreases, so the composition is
/// strictly decreasing and has exactly one crossing.
pub fn fixed_point_2x2(game: &Game, params: &RwsParams) -> Result<FixedPointResult> {
    params.validate()?;
    if game.m1() != 2 || game.m2() != 2 {
        return Err(RwsError::FixedPoint(format!(
            "expected a 2x2 game, got {}x{}",
            game.m1(),
            game.m2()
        )));
    }
    let nash = unique_mixed_nash(game)?;
    let k = params.k;
    for role in Role::BOTH {
        let value = nash.get(role)[0] * k as f64;
        if (value - value.round()).abs() < INTEGER_CUTOFF_TOLERANCE {
            return Err(RwsError::IntegerCutoff {
                role: role.number(),
                k,
                value,
            });
        }
    }
    let response = |role: Role| {
        let slope = (game.payoff(role, 0, 0) - game.payoff(role, 1, 0))
            - (game.payoff(role, 0, 1) - game.payoff(role, 1, 1));
        CutoffResponse {
            cutoff: (nash.get(role.other())[0] * k as f64).floor() as u32,
            increasing: slope > 0.0,
        }
    };
    let (r1, r2) = (response(Role::One), response(Role::Two));
    if r1.increasing == r2.increasing {
        return Err(RwsError::FixedPoint(
            "no agreeing/disagreeing role split; use the general solver".into(),
        ));
    }
    let eps = params.epsilon;
    let f1 = |q: f64| r1.eval(k, eps, q);
    let f2 = |a: f64| r2.eval(k, eps, a);
    let h = |a: f64| f1(f2(a)) - a;

    let (mut lo, mut hi) = (eps / 2.0, 1.0 - eps / 2.0);
    let (h_lo, h_hi) = (h(lo), h(hi));
    if h_lo < 0.0 || h_hi > 0.0 {
        return Err(RwsError::FixedPoint(format!(
            "bisection bracket lost its sign change: h({lo}) = {h_lo}, h({hi}) = {h_hi}"
        )));
    }
    let mut a = 0.5 * (lo + hi);
    let mut iterations = 0;
    for _ in 0..200 {
        iterations += 1;
        a = 0.5 * (lo + hi);
        let v = h(a);
        if v == 0.0 || v.abs() < BISECTION_TOLERANCE && hi - lo < BISECTION_TOLERANCE {
            break;
        }
        if v > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        if hi - lo <= f64::EPSILON * 4.0 {
            break;
        }
    }
    let b = f2(a);
    let x_star = StatePoint {
        p1: vec![a, 1.0 - a],
        p2: vec![b, 1.0 - b],
    };
    let residual = MeanField::new(game, *params)?.residual(&x_star);
    Ok(FixedPointResult {
        converged: residual < FIXED_POINT_TOLERANCE,
        x_star,
        residual,
        method: FixedPointMethod::Bisection2x2,
        nash_reference: Some(nash),
        iterations,
        agreeing_role: Some(if r1.increasing { Role::One } else { Role::Two }),
    })
}

/// A root of `F` by damped iteration `x <- x/2 + E[BR~(x)]/2`, falling back
/// to long-horizon integration followed by more heavily damped iteration
/// when the iteration stalls. Outside 2x2 games
/// with a unique mixed equilibrium the root need not be unique.
pub fn fixed_point_general(game: &Game, params: &RwsParams, x0: &StatePoint) -> Result<FixedPointResult> {
    let x0 = StatePoint::new(x0.p1.clone(), x0.p2.clone())?.for_game(game)?;
    let field = MeanField::new(game, *params)?;
    let nash_reference = if game.m1() <= 4 && game.m2() <= 4 {
        unique_mixed_nash(game).ok()
    } else {
        None
    };
    let finish = |x: StatePoint, method, iterations| {
        let residual = field.residual(&x);
        FixedPointResult {
            converged: residual < FIXED_POINT_TOLERANCE,
            x_star: x,
            residual,
            method,
            nash_reference: nash_reference.clone(),
            iterations,
            agreeing_role: None,
        }
    };

    let (x, iterations, converged) = damped_iteration(&field, x0.clone(), DAMPING, MAX_DAMPED_ITERATIONS);
    if converged {
        return Ok(finish(x, FixedPointMethod::DampedIteration, iterations));
    }

    // integrate in chunks, polishing with the damped map whenever it helps
    let mut best = if field.residual(&x) < field.residual(&x0) { x } else { x0 };
    let mut total = iterations;
    for _ in 0..40 {
        let path = field.integrate(&best, 50.0, 0.05)?;
        let end = path.terminal().clone();
        total += path.times.len() - 1;
        best = end;
        // smaller steps stabilize the map wherever the flow is stable
        let mut alpha = DAMPING;
        while alpha >= 1.0 / 64.0 {
            let (polished, used, ok) = damped_iteration(&field, best.clone(), alpha, STALL_ITERATIONS * 5);
            total += used;
            if ok {
                return Ok(finish(polished, FixedPointMethod::Integration, total));
            }
            if field.residual(&polished) < field.residual(&best) {
                best = polished;
            }
            alpha /= 2.0;
        }
        if field.residual(&best) < FIXED_POINT_TOLERANCE {
            return Ok(finish(best, FixedPointMethod::Integration, total));
        }
    }
    Ok(finish(best, FixedPointMethod::Integration, total))
}

/// Returns the best point seen, iterations used and whether the tolerance
/// was reached.
fn damped_iteration(field: &MeanField, mut x: StatePoint, alpha: f64, budget: usize) -> (StatePoint, usize, bool) {
    let mut best = x.clone();
    let mut best_residual = f64::INFINITY;
    let mut since_best = 0;
    for iter in 0..budget {
        let e = field.expected_play(&x);
        let residual = e
            .coords()
            .zip(x.coords())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if residual < best_residual {
            best_residual = residual;
            best = x.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        if residual < FIXED_POINT_TOLERANCE {
            return (x, iter, true);
        }
        if since_best > STALL_ITERATIONS {
            return (best, iter, false);
        }
        for (xi, ei) in [(&mut x.p1, &e.p1), (&mut x.p2, &e.p2)] {
            for (a, b) in xi.iter_mut().zip(ei) {
                *a = (1.0 - alpha) * *a + alpha * b;
            }
            // rounding in the mass compounds by a factor k per step otherwise
            let mass: f64 = xi.iter().sum();
            xi.iter_mut().for_each(|a| *a /= mass);
        }
    }
    (best, budget, false)
}

/// `V(t) = |x(t) - x*|_2^2 / 2` along a path and its largest increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub values: Vec<f64>,
    /// Largest `V(t + dt) - V(t)`; zero when `V` never increases.
    pub max_increase: f64,
}

pub fn lyapunov_value(x: &StatePoint, x_star: &StatePoint) -> f64 {
    0.5 * x.dist2_sq(x_star)
}

pub fn lyapunov_check(path: &MeanPath, x_star: &StatePoint) -> LyapunovReport {
    let values: Vec<f64> = path.points.iter().map(|x| lyapunov_value(x, x_star)).collect();
    let max_increase = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    LyapunovReport { values, max_increase }
}

/// One row of a fixed-point sweep over `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: u32,
    pub x_star: Option<StatePoint>,
    /// `|x* - x_hat|_inf`.
    pub distance_to_nash: Option<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

pub fn k_sweep_2x2(game: &Game, params: &RwsParams, ks: &[u32]) -> Vec<KSweepRow> {
    ks.iter()
        .map(|&k| match fixed_point_2x2(game, &params.with_k(k)) {
            Ok(r) => KSweepRow {
                k,
                distance_to_nash: r.nash_reference.as_ref().map(|n| r.x_star.dist_inf(n)),
                residual: Some(r.residual),
                x_star: Some(r.x_star),
                error: None,
            },
            Err(e) => KSweepRow {
                k,
                x_star: None,
                distance_to_nash: None,
                residual: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp() -> Game {
        Game::builtin("matching-pennies").unwrap()
    }

    #[test]
    fn rho_examples() {
        for x in [0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
            assert!((rho(1, 0, 0.0, x) - x).abs() < 1e-15);
        }
        assert_eq!(rho(3, 1, 0.0, 0.5), 0.5);
        for (k, m) in [(5, 2), (20, 0), (21, 10), (80, 40)] {
            assert_eq!(rho(k, m, 0.05, 0.0), 0.025);
            assert!((rho(k, m, 0.05, 1.0) - 0.975).abs() < 1e-15);
        }
    }

    #[test]
    fn rho_large_k_matches_small_k_path() {
        // both branches agree where they overlap in accuracy
        let direct = binomial_upper_tail(50, 20, 0.43);
        let mut lf = vec![0.0f64; 51];
        for i in 1..=50 {
            lf[i] = lf[i - 1] + (i as f64).ln();
        }
        let logspace: f64 = (21..=50usize)
            .map(|i| (lf[50] - lf[i] - lf[50 - i] + i as f64 * 0.43f64.ln() + (50 - i) as f64 * 0.57f64.ln()).exp())
            .sum();
        assert!((direct - logspace).abs() < 1e-13);
    }

    #[test]
    fn velocity_of_each_role_sums_to_zero() {
        let g = Game::builtin("unstable-rps").unwrap();
        let p = RwsParams::new(0.9, 6, 0.1).unwrap();
        let x = StatePoint::new(vec![0.2, 0.3, 0.5], vec![0.6, 0.1, 0.3]).unwrap();
        let v = vector_field(&g, &p, &x).unwrap();
        assert!(v.v1.iter().sum::<f64>().abs() < 1e-10);
        assert!(v.v2.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn center_is_stationary_for_odd_k() {
        let p = RwsParams::new(0.9, 21, 0.05).unwrap();
        let v = vector_field(&mp(), &p, &StatePoint::uniform(2, 2)).unwrap();
        assert!(v.norm_inf() < 1e-14);
    }

    #[test]
    fn fixed_point_matching_pennies() {
        let p = RwsParams::new(0.9, 21, 0.05).unwrap();
        let r = fixed_point_2x2(&mp(), &p).unwrap();
        assert_eq!(r.x_star, StatePoint::uniform(2, 2));
        assert!(r.residual < 1e-12);
        assert_eq!(r.agreeing_role, Some(Role::One));
    }

    #[test]
    fn integer_cutoff_is_rejected() {
        let p = RwsParams::new(0.9, 20, 0.05).unwrap();
        match fixed_point_2x2(&mp(), &p) {
            Err(RwsError::IntegerCutoff { value, .. }) => assert_eq!(value, 10.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn games_without_unique_mixed_equilibrium_are_rejected() {
        let p = RwsParams::new(0.9, 5, 0.05).unwrap();
        assert!(fixed_point_2x2(&Game::builtin("coordination").unwrap(), &p).is_err());
        assert!(fixed_point_2x2(&Game::builtin("unstable-rps").unwrap(), &p).is_err());
    }

    #[test]
    fn asymmetric_2x2_matches_general_solver() {
        // a matching-pennies variant with an off-center equilibrium
        let g = Game::new("skewed", 2, 2, vec![3.0, -1.0, -1.0, 1.0], vec![-1.0, 1.0, 2.0, -1.0]).unwrap();
        let p = RwsParams::new(0.95, 7, 0.1).unwrap();
        let a = fixed_point_2x2(&g, &p).unwrap();
        assert!(a.residual < 1e-12, "{}", a.residual);
        let b = fixed_point_general(&g, &p, &StatePoint::uniform(2, 2)).unwrap();
        assert!(b.converged);
        assert!(a.x_star.dist_inf(&b.x_star) < 1e-9, "{a:?} {b:?}");
    }

    #[test]
    fn general_solver_at_a_known_root_needs_no_iterations() {
        let p = RwsParams::new(0.9, 21, 0.05).unwrap();
        let r = fixed_point_general(&mp(), &p, &StatePoint::uniform(2, 2)).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn stationary_start_gives_constant_path() {
        let p = RwsParams::new(0.9, 21, 0.05).unwrap();
        let x = StatePoint::uniform(2, 2);
        let path = integrate_meanfield(&mp(), &p, &x, 50.0, 0.01).unwrap();
        assert!(path.points.iter().all(|y| y.dist_inf(&x) < 1e-8));
        let l = lyapunov_check(&path, &x);
        assert!(l.values.iter().all(|&v| (0.0..1e-16).contains(&v)));
    }

    #[test]
    fn integration_rejects_bad_steps() {
        let p = RwsParams::new(0.9, 3, 0.05).unwrap();
        let x = StatePoint::uniform(2, 2);
        assert!(integrate_meanfield(&mp(), &p, &x, 1.0, 0.0).is_err());
        assert!(integrate_meanfield(&mp(), &p, &x, 0.001, 0.01).is_err());
        // a huge step overshoots the simplex boundary
        let corner = StatePoint::corner(2, 2, 0, 0);
        assert!(matches!(
            integrate_meanfield(&mp(), &p, &corner, 10.0, 5.0),
            Err(RwsError::StepSize { .. })
        ));
    }
}
