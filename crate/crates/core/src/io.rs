//! CSV renderings of trajectories, mean paths and estimator tables.
//!
//! Numbers use Rust's shortest round-trip formatting, so equal values always
//! print to equal bytes.

use std::fmt::Write;

use crate::baselines::YoungState;
use crate::engine::{PlayProfile, Trajectory};
use crate::game::{Game, StatePoint};
use crate::meanfield::{lyapunov_value, MeanPath};
use crate::stats::{ConcentrationCurve, ErgodicityReport, OccupancyRow, VarianceTable};

fn state_header(out: &mut String, m1: usize, m2: usize) {
    for i in 1..=m1 {
        let _ = write!(out, ",p1_{i}");
    }
    for i in 1..=m2 {
        let _ = write!(out, ",p2_{i}");
    }
}

fn state_cells(out: &mut String, s: &StatePoint) {
    for v in s.coords() {
        let _ = write!(out, ",{v}");
    }
}

/// Rows of `(state before the play, play)` pairs; strategies are 1-based.
pub struct TrajectoryRows<'a> {
    pub states: &'a [StatePoint],
    pub plays: &'a [PlayProfile],
}

impl<'a> From<&'a Trajectory> for TrajectoryRows<'a> {
    fn from(t: &'a Trajectory) -> Self {
        TrajectoryRows {
            states: &t.states[..t.plays.len()],
            plays: &t.plays,
        }
    }
}

/// `t,s1,s2,p1_1..,p2_1..`, with a leading `process` column when tagged.
pub fn trajectory_csv(game: &Game, rows: TrajectoryRows<'_>, process: Option<&str>) -> String {
    let mut out = String::new();
    if process.is_some() {
        out.push_str("process,");
    }
    out.push_str("t,s1,s2");
    state_header(&mut out, game.m1(), game.m2());
    out.push('\n');
    for (t, (s, play)) in rows.states.iter().zip(rows.plays).enumerate() {
        if let Some(tag) = process {
            let _ = write!(out, "{tag},");
        }
        let _ = write!(out, "{t},{},{}", play.s1 + 1, play.s2 + 1);
        state_cells(&mut out, s);
        out.push('\n');
    }
    out
}

/// A path of the finite-memory process with its memory frequencies as the
/// state columns.
#[derive(Debug, Clone, Default)]
pub struct YoungPath {
    pub states: Vec<StatePoint>,
    pub plays: Vec<PlayProfile>,
}

impl YoungPath {
    pub fn record(&mut self, game: &Game, before: &YoungState, play: PlayProfile) {
        self.states.push(before.frequencies(game));
        self.plays.push(play);
    }
}

/// `t,p1_1..,p2_1..,V` with `V = |x - x*|^2 / 2`.
pub fn meanpath_csv(path: &MeanPath, x_star: &StatePoint) -> String {
    let first = path.terminal();
    let mut out = String::from("t");
    state_header(&mut out, first.p1.len(), first.p2.len());
    out.push_str(",V\n");
    for (t, x) in path.times.iter().zip(&path.points) {
        let _ = write!(out, "{t}");
        state_cells(&mut out, x);
        let _ = writeln!(out, ",{}", lyapunov_value(x, x_star));
    }
    out
}

pub fn concentration_csv(curve: &ConcentrationCurve) -> String {
    let mut out = String::from("beta,eta,prob,stderr,n\n");
    for r in &curve.rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.beta, r.eta, r.probability, r.stderr, r.n);
    }
    out
}

pub fn ergodicity_csv(report: &ErgodicityReport) -> String {
    let mut out = String::from("window,distance\n");
    for (i, d) in report.distances.iter().enumerate() {
        let _ = writeln!(out, "{},{d}", i + 1);
    }
    out
}

pub fn occupancy_csv(rows: &[OccupancyRow]) -> String {
    let mut out = String::from("epsilon,fraction\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", r.epsilon, r.fraction);
    }
    out
}

pub fn variance_csv(table: &VarianceTable) -> String {
    let mut out = String::from("beta,var,ratio\n");
    for r in &table.rows {
        let _ = writeln!(out, "{},{},{}", r.beta, r.var, r.ratio);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate_trajectory, RwsParams};
    use crate::rng::StreamSeed;

    #[test]
    fn trajectory_header_and_rows() {
        let g = Game::builtin("unstable-rps").unwrap();
        let p = RwsParams::new(0.9, 3, 0.1).unwrap();
        let t = simulate_trajectory(&StatePoint::uniform(3, 3), &g, &p, 4, StreamSeed::new(1, 0)).unwrap();
        let csv = trajectory_csv(&g, (&t).into(), None);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,s1,s2,p1_1,p1_2,p1_3,p2_1,p2_2,p2_3");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,"));
        let tagged = trajectory_csv(&g, (&t).into(), Some("rws"));
        assert!(tagged.starts_with("process,t,s1,s2"));
        assert!(tagged.lines().nth(1).unwrap().starts_with("rws,0,"));
    }
}
