//! Finite two-player games, mixed strategies and best replies.
//!
//! Strategy indices are 0-based in the API. Reports and CSV files written by
//! the experiment runner use 1-based indices.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RwsError};

/// Relative indifference band for argmax comparisons over payoffs.
///
/// The band is scaled by the payoff range of the acting role, so the set of
/// best replies does not change under positive affine payoff transformations.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Tolerance on the unit sum of probability vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Payoff magnitude below which integer payoffs are compared in exact
/// integer arithmetic.
const EXACT_PAYOFF_LIMIT: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    One,
    Two,
}

impl Role {
    pub const BOTH: [Role; 2] = [Role::One, Role::Two];

    pub fn other(self) -> Role {
        match self {
            Role::One => Role::Two,
            Role::Two => Role::One,
        }
    }

    /// 1 or 2.
    pub fn number(self) -> usize {
        match self {
            Role::One => 1,
            Role::Two => 2,
        }
    }
}

/// A finite two-player game in bimatrix form.
///
/// Both payoff matrices are indexed `[s1][s2]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    name: String,
    m1: usize,
    m2: usize,
    payoff1: Vec<f64>,
    payoff2: Vec<f64>,
    integral: bool,
}

/// On-disk JSON form of a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    #[serde(default)]
    pub name: String,
    pub m1: usize,
    pub m2: usize,
    pub payoff1: Vec<Vec<f64>>,
    pub payoff2: Vec<Vec<f64>>,
}

pub const BUILTIN_GAMES: [&str; 4] = [
    "matching-pennies",
    "unstable-rps",
    "three-by-two-example",
    "coordination",
];

impl Game {
    pub fn new(
        name: impl Into<String>,
        m1: usize,
        m2: usize,
        payoff1: Vec<f64>,
        payoff2: Vec<f64>,
    ) -> Result<Game> {
        if m1 < 2 || m2 < 2 {
            return Err(RwsError::Dimension(format!(
                "each role needs at least two strategies, got {m1}x{m2}"
            )));
        }
        for (label, matrix) in [("payoff1", &payoff1), ("payoff2", &payoff2)] {
            if matrix.len() != m1 * m2 {
                return Err(RwsError::Dimension(format!(
                    "{label} has {} entries, expected {m1}x{m2} = {}",
                    matrix.len(),
                    m1 * m2
                )));
            }
        }
        for (label, matrix) in [("payoff1", &payoff1), ("payoff2", &payoff2)] {
            if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
                return Err(RwsError::NonFinitePayoff {
                    matrix: label,
                    row: pos / m2,
                    col: pos % m2,
                });
            }
        }
        let integral = payoff1
            .iter()
            .chain(payoff2.iter())
            .all(|v| v.fract() == 0.0 && v.abs() < EXACT_PAYOFF_LIMIT);
        Ok(Game {
            name: name.into(),
            m1,
            m2,
            payoff1,
            payoff2,
            integral,
        })
    }

    pub fn from_document(doc: GameDocument) -> Result<Game> {
        let flatten = |label: &str, rows: Vec<Vec<f64>>| -> Result<Vec<f64>> {
            if rows.len() != doc.m1 || rows.iter().any(|r| r.len() != doc.m2) {
                let shape: Vec<usize> = rows.iter().map(Vec::len).collect();
                return Err(RwsError::Dimension(format!(
                    "{label} must be {}x{}, got {} rows with lengths {:?}",
                    doc.m1,
                    doc.m2,
                    rows.len(),
                    shape
                )));
            }
            Ok(rows.into_iter().flatten().collect())
        };
        let payoff1 = flatten("payoff1", doc.payoff1)?;
        let payoff2 = flatten("payoff2", doc.payoff2)?;
        Game::new(doc.name, doc.m1, doc.m2, payoff1, payoff2)
    }

    pub fn to_document(&self) -> GameDocument {
        let rows = |m: &[f64]| m.chunks(self.m2).map(<[f64]>::to_vec).collect();
        GameDocument {
            name: self.name.clone(),
            m1: self.m1,
            m2: self.m2,
            payoff1: rows(&self.payoff1),
            payoff2: rows(&self.payoff2),
        }
    }

    pub fn from_json(text: &str) -> Result<Game> {
        let doc: GameDocument =
            serde_json::from_str(text).map_err(|e| RwsError::GameDocument(e.to_string()))?;
        Game::from_document(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("game document serializes")
    }

    /// Resolves one of the bundled games by name.
    pub fn builtin(name: &str) -> Result<Game> {
        match name {
            "matching-pennies" => Game::new(
                name,
                2,
                2,
                vec![1.0, -1.0, -1.0, 1.0],
                vec![-1.0, 1.0, 1.0, -1.0],
            ),
            "unstable-rps" => Game::new(
                name,
                3,
                3,
                vec![0.0, -3.0, 1.0, 1.0, 0.0, -2.0, -3.0, 1.0, 0.0],
                vec![0.0, 1.0, -3.0, -3.0, 0.0, 1.0, 1.0, -2.0, 0.0],
            ),
            "three-by-two-example" => Game::new(
                name,
                3,
                2,
                vec![2.0, -100.0, -100.0, 2.0, 1.0, 1.0],
                vec![-100.0, 2.0, 2.0, -100.0, 0.0, 0.0],
            ),
            "coordination" => Game::new(
                name,
                2,
                2,
                vec![2.0, 0.0, 0.0, 1.0],
                vec![2.0, 0.0, 0.0, 1.0],
            ),
            other => Err(RwsError::UnknownGame(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    /// Number of pure strategies of `role`.
    pub fn strategies(&self, role: Role) -> usize {
        match role {
            Role::One => self.m1,
            Role::Two => self.m2,
        }
    }

    /// True when every payoff is an integer of moderate size.
    pub fn is_integral(&self) -> bool {
        self.integral
    }

    /// Payoff to `role` when it plays `own` against `opp`.
    pub fn payoff(&self, role: Role, own: usize, opp: usize) -> f64 {
        match role {
            Role::One => self.payoff1[own * self.m2 + opp],
            Role::Two => self.payoff2[opp * self.m2 + own],
        }
    }

    fn payoff_range(&self, role: Role) -> f64 {
        let m = match role {
            Role::One => &self.payoff1,
            Role::Two => &self.payoff2,
        };
        let (lo, hi) = m
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        hi - lo
    }

    /// Expected payoff of each pure strategy of `role` against opponent
    /// weights. The weights need not be normalized.
    pub fn expected_payoffs(&self, role: Role, opp: &[f64]) -> Vec<f64> {
        debug_assert_eq!(opp.len(), self.strategies(role.other()));
        (0..self.strategies(role))
            .map(|a| {
                opp.iter()
                    .enumerate()
                    .map(|(j, &w)| w * self.payoff(role, a, j))
                    .sum()
            })
            .collect()
    }

    /// All best replies of `role` to (possibly unnormalized) opponent
    /// weights, ascending.
    pub fn best_replies(&self, role: Role, opp: &[f64]) -> Vec<usize> {
        let values = self.expected_payoffs(role, opp);
        let mass: f64 = opp.iter().sum();
        let range = self.payoff_range(role);
        let scale = if range > 0.0 { range } else { 1.0 };
        let band = TIE_TOLERANCE * scale * mass.abs().max(f64::MIN_POSITIVE);
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= best - band)
            .map(|(a, _)| a)
            .collect()
    }

    /// Best replies of `role` to an empirical sample given as counts.
    ///
    /// Integer games are compared exactly; other games use the tie band.
    pub fn best_replies_to_counts(&self, role: Role, counts: &[u32]) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.strategies(role));
        self.best_replies_to_counts_into(role, counts, &mut out);
        out
    }

    pub(crate) fn best_replies_to_counts_into(
        &self,
        role: Role,
        counts: &[u32],
        out: &mut Vec<usize>,
    ) {
        out.clear();
        if self.integral {
            let mut best = i64::MIN;
            for a in 0..self.strategies(role) {
                let v: i64 = counts
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| c as i64 * self.payoff(role, a, j) as i64)
                    .sum();
                if v > best {
                    best = v;
                    out.clear();
                    out.push(a);
                } else if v == best {
                    out.push(a);
                }
            }
        } else {
            let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            out.extend(self.best_replies(role, &weights));
        }
    }

    /// The best reply set of `role` against the opponent's mixed strategy.
    pub fn best_reply_set(&self, role: Role, opp: &MixedStrategy) -> Result<Vec<usize>> {
        if opp.role != role.other() || opp.weights.len() != self.strategies(role.other()) {
            return Err(RwsError::Dimension(format!(
                "role {} replies to a mixed strategy of role {} with {} weights",
                role.number(),
                role.other().number(),
                self.strategies(role.other())
            )));
        }
        Ok(self.best_replies(role, &opp.weights))
    }
}

pub(crate) fn check_simplex(label: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(RwsError::NotASimplexVector(format!("{label} is empty")));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(RwsError::NotASimplexVector(format!(
            "{label} has entry {x}"
        )));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(RwsError::NotASimplexVector(format!(
            "{label} sums to {sum}"
        )));
    }
    Ok(())
}

/// A mixed strategy of one role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    pub role: Role,
    pub weights: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(role: Role, weights: Vec<f64>) -> Result<MixedStrategy> {
        check_simplex("mixed strategy", &weights)?;
        Ok(MixedStrategy { role, weights })
    }

    pub fn pure(role: Role, m: usize, s: usize) -> MixedStrategy {
        let mut weights = vec![0.0; m];
        weights[s] = 1.0;
        MixedStrategy { role, weights }
    }
}

/// The Markov state: each role's recency-weighted frequency of its own past
/// plays. Role `i` samples from the other role's vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePoint {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl StatePoint {
    pub fn new(p1: Vec<f64>, p2: Vec<f64>) -> Result<StatePoint> {
        check_simplex("p1", &p1)?;
        check_simplex("p2", &p2)?;
        Ok(StatePoint { p1, p2 })
    }

    /// Checks the state against a game's dimensions.
    pub fn for_game(self, game: &Game) -> Result<StatePoint> {
        if self.p1.len() != game.m1() || self.p2.len() != game.m2() {
            return Err(RwsError::Dimension(format!(
                "state has {}+{} coordinates, game is {}x{}",
                self.p1.len(),
                self.p2.len(),
                game.m1(),
                game.m2()
            )));
        }
        Ok(self)
    }

    pub fn uniform(m1: usize, m2: usize) -> StatePoint {
        StatePoint {
            p1: vec![1.0 / m1 as f64; m1],
            p2: vec![1.0 / m2 as f64; m2],
        }
    }

    /// Point mass on the profile `(s1, s2)`.
    pub fn corner(m1: usize, m2: usize, s1: usize, s2: usize) -> StatePoint {
        let mut p1 = vec![0.0; m1];
        let mut p2 = vec![0.0; m2];
        p1[s1] = 1.0;
        p2[s2] = 1.0;
        StatePoint { p1, p2 }
    }

    pub fn get(&self, role: Role) -> &[f64] {
        match role {
            Role::One => &self.p1,
            Role::Two => &self.p2,
        }
    }

    /// Concatenation `(p1, p2)`.
    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        self.p1.iter().chain(self.p2.iter()).copied()
    }

    pub fn dim(&self) -> usize {
        self.p1.len() + self.p2.len()
    }

    pub fn dist_inf(&self, other: &StatePoint) -> f64 {
        self.coords()
            .zip(other.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn dist2_sq(&self, other: &StatePoint) -> f64 {
        self.coords()
            .zip(other.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn is_valid(&self) -> bool {
        check_simplex("p1", &self.p1).is_ok() && check_simplex("p2", &self.p2).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_match_tables() {
        let mp = Game::builtin("matching-pennies").unwrap();
        assert_eq!((mp.m1(), mp.m2()), (2, 2));
        assert_eq!(mp.payoff(Role::One, 0, 0), 1.0);
        assert_eq!(mp.payoff(Role::One, 0, 1), -1.0);

        let rps = Game::builtin("unstable-rps").unwrap();
        let row2: Vec<f64> = (0..3).map(|j| rps.payoff(Role::One, 1, j)).collect();
        assert_eq!(row2, vec![1.0, 0.0, -2.0]);
        // symmetric: the column player's payoffs for P mirror row P
        let col: Vec<f64> = (0..3).map(|j| rps.payoff(Role::Two, 1, j)).collect();
        assert_eq!(col, vec![1.0, 0.0, -2.0]);
        assert!(rps.is_integral());

        assert!(matches!(
            Game::builtin("chicken"),
            Err(RwsError::UnknownGame(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = r#"{"name":"bad","m1":2,"m2":3,
            "payoff1":[[1,2,3],[4,5,6]],
            "payoff2":[[1,2],[3,4],[5,6]]}"#;
        assert!(matches!(Game::from_json(text), Err(RwsError::Dimension(_))));
    }

    #[test]
    fn non_finite_payoff_is_rejected() {
        let err = Game::new("x", 2, 2, vec![0.0, f64::NAN, 0.0, 0.0], vec![0.0; 4]);
        assert!(matches!(
            err,
            Err(RwsError::NonFinitePayoff { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        for name in BUILTIN_GAMES {
            let g = Game::builtin(name).unwrap();
            assert_eq!(Game::from_json(&g.to_json()).unwrap(), g);
        }
    }

    #[test]
    fn best_reply_examples() {
        let mp = Game::builtin("matching-pennies").unwrap();
        let opp = MixedStrategy::new(Role::Two, vec![0.6, 0.4]).unwrap();
        assert_eq!(mp.expected_payoffs(Role::One, &opp.weights), vec![
            0.6 - 0.4,
            -0.6 + 0.4
        ]);
        assert_eq!(mp.best_reply_set(Role::One, &opp).unwrap(), vec![0]);
        let half = MixedStrategy::new(Role::Two, vec![0.5, 0.5]).unwrap();
        assert_eq!(mp.best_reply_set(Role::One, &half).unwrap(), vec![0, 1]);

        let g = Game::builtin("three-by-two-example").unwrap();
        let row3 = MixedStrategy::pure(Role::One, 3, 2);
        assert_eq!(g.best_reply_set(Role::Two, &row3).unwrap(), vec![0, 1]);
    }

    #[test]
    fn count_replies_match_float_replies() {
        let g = Game::builtin("unstable-rps").unwrap();
        for counts in [[7u32, 7, 6], [0, 0, 20], [10, 5, 5], [3, 9, 8]] {
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / 20.0).collect();
            assert_eq!(
                g.best_replies_to_counts(Role::One, &counts),
                g.best_replies(Role::One, &w)
            );
        }
    }

    #[test]
    fn wrong_role_mixed_strategy_is_rejected() {
        let mp = Game::builtin("matching-pennies").unwrap();
        let opp = MixedStrategy::new(Role::One, vec![0.5, 0.5]).unwrap();
        assert!(mp.best_reply_set(Role::One, &opp).is_err());
    }

    #[test]
    fn state_point_validation() {
        assert!(StatePoint::new(vec![0.2, 0.8], vec![1.0, 0.0]).is_ok());
        assert!(StatePoint::new(vec![0.2, 0.7], vec![1.0, 0.0]).is_err());
        assert!(StatePoint::new(vec![-0.1, 1.1], vec![1.0, 0.0]).is_err());
    }
}
