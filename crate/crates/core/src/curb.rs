//! k-CURB blocks: best reply closure over sample grids, minimal blocks and
//! their neighborhoods.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RwsError};
use crate::game::{Game, Role, StatePoint};
use crate::grid::{check_grid, for_each_count_vector, DEFAULT_GRID_CAP};

pub use crate::grid::{simplex_grid, GridPoint};

/// Default bound on `m1 + m2` for the minimal block search.
pub const MAX_CURB_STRATEGIES: usize = 12;

/// A product set `c1 x c2` of pure strategies (0-based, sorted).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Block {
    pub c1: BTreeSet<usize>,
    pub c2: BTreeSet<usize>,
}

impl Block {
    pub fn new(
        game: &Game,
        c1: impl IntoIterator<Item = usize>,
        c2: impl IntoIterator<Item = usize>,
    ) -> Result<Block> {
        let block = Block {
            c1: c1.into_iter().collect(),
            c2: c2.into_iter().collect(),
        };
        if block.c1.is_empty() || block.c2.is_empty() {
            return Err(RwsError::InvalidParameter("block sides must be nonempty".into()));
        }
        let out_of_range = |set: &BTreeSet<usize>, m: usize| set.iter().any(|&s| s >= m);
        if out_of_range(&block.c1, game.m1()) || out_of_range(&block.c2, game.m2()) {
            return Err(RwsError::InvalidParameter(format!(
                "block strategies exceed the {}x{} game",
                game.m1(),
                game.m2()
            )));
        }
        Ok(block)
    }

    pub fn full(game: &Game) -> Block {
        Block {
            c1: (0..game.m1()).collect(),
            c2: (0..game.m2()).collect(),
        }
    }

    pub fn side(&self, role: Role) -> &BTreeSet<usize> {
        match role {
            Role::One => &self.c1,
            Role::Two => &self.c2,
        }
    }

    fn side_mut(&mut self, role: Role) -> &mut BTreeSet<usize> {
        match role {
            Role::One => &mut self.c1,
            Role::Two => &mut self.c2,
        }
    }

    pub fn is_subset(&self, other: &Block) -> bool {
        self.c1.is_subset(&other.c1) && self.c2.is_subset(&other.c2)
    }

    pub fn is_strict_subset(&self, other: &Block) -> bool {
        self.is_subset(other) && self != other
    }

    pub fn len(&self) -> usize {
        self.c1.len() * self.c2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Best replies of `role` to every size-`k` sample supported on the other
/// side of `block`.
fn replies_on_block(game: &Game, role: Role, block: &Block, k: u32, cap: usize) -> Result<BTreeSet<usize>> {
    let support: Vec<usize> = block.side(role.other()).iter().copied().collect();
    check_grid(support.len(), k, cap)?;
    let mut counts = vec![0u32; game.strategies(role.other())];
    let mut br = Vec::new();
    let mut out = BTreeSet::new();
    for_each_count_vector(support.len(), k, |local| {
        for (&j, &c) in support.iter().zip(local) {
            counts[j] = c;
        }
        game.best_replies_to_counts_into(role, &counts, &mut br);
        out.extend(br.iter().copied());
    });
    Ok(out)
}

/// Smallest block containing `seed` that is closed under best replies to
/// every size-`k` sample from its own strategies.
pub fn k_best_reply_closure(game: &Game, seed: &Block, k: u32) -> Result<Block> {
    k_best_reply_closure_capped(game, seed, k, DEFAULT_GRID_CAP)
}

pub fn k_best_reply_closure_capped(game: &Game, seed: &Block, k: u32, cap: usize) -> Result<Block> {
    let mut block = Block::new(game, seed.c1.iter().copied(), seed.c2.iter().copied())?;
    loop {
        let mut grew = false;
        for role in Role::BOTH {
            let replies = replies_on_block(game, role, &block, k, cap)?;
            let side = block.side_mut(role);
            let before = side.len();
            side.extend(replies);
            grew |= side.len() > before;
        }
        if !grew {
            return Ok(block);
        }
    }
}

/// All minimal k-CURB blocks.
///
/// A closed block contains some profile `(a, b)` and therefore the closure of
/// `{a} x {b}`, which is itself closed. A minimal block thus equals the
/// closure of every profile it contains, so the minimal blocks are exactly the
/// singleton closures that contain no other singleton closure.
pub fn minimal_k_curb_blocks(game: &Game, k: u32) -> Result<Vec<Block>> {
    minimal_k_curb_blocks_limited(game, k, MAX_CURB_STRATEGIES)
}

pub fn minimal_k_curb_blocks_limited(game: &Game, k: u32, max_strategies: usize) -> Result<Vec<Block>> {
    if game.m1() + game.m2() > max_strategies {
        return Err(RwsError::GameTooLarge(format!(
            "minimal block search is limited to m1 + m2 <= {max_strategies}, got {}",
            game.m1() + game.m2()
        )));
    }
    let mut closures = BTreeSet::new();
    for a in 0..game.m1() {
        for b in 0..game.m2() {
            let seed = Block::new(game, [a], [b])?;
            closures.insert(k_best_reply_closure(game, &seed, k)?);
        }
    }
    let minimal = closures
        .iter()
        .filter(|c| !closures.iter().any(|d| d.is_strict_subset(c)))
        .cloned()
        .collect();
    Ok(minimal)
}

const MASS_TOLERANCE: f64 = 1e-12;

/// Whether both roles put at least `1 - delta` of their frequency on their
/// own side of `block`.
pub fn in_neighborhood(state: &StatePoint, block: &Block, delta: f64) -> bool {
    Role::BOTH.iter().all(|&role| {
        let p = state.get(role);
        let mass: f64 = block.side(role).iter().map(|&s| p[s]).sum();
        mass >= 1.0 - delta - MASS_TOLERANCE
    })
}

/// Membership in the union of the neighborhoods of `blocks`.
pub fn in_any_neighborhood(state: &StatePoint, blocks: &[Block], delta: f64) -> bool {
    blocks.iter().any(|b| in_neighborhood(state, b, delta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurbBlockReport {
    /// 1-based strategy indices of role 1.
    pub c1: Vec<usize>,
    /// 1-based strategy indices of role 2.
    pub c2: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurbReport {
    pub game: String,
    pub k: u32,
    pub blocks: Vec<CurbBlockReport>,
}

impl CurbReport {
    pub fn new(game: &Game, k: u32, blocks: &[Block]) -> CurbReport {
        let one_based = |s: &BTreeSet<usize>| s.iter().map(|a| a + 1).collect();
        CurbReport {
            game: game.name().to_string(),
            k,
            blocks: blocks
                .iter()
                .map(|b| CurbBlockReport {
                    c1: one_based(&b.c1),
                    c2: one_based(&b.c2),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(name: &str) -> Game {
        Game::builtin(name).unwrap()
    }

    fn block(game: &Game, c1: &[usize], c2: &[usize]) -> Block {
        Block::new(game, c1.iter().copied(), c2.iter().copied()).unwrap()
    }

    #[test]
    fn closure_on_the_three_by_two_game() {
        let game = g("three-by-two-example");
        let seed = block(&game, &[0, 1], &[0, 1]);
        assert_eq!(k_best_reply_closure(&game, &seed, 1).unwrap(), seed);
        assert_eq!(k_best_reply_closure(&game, &seed, 2).unwrap(), Block::full(&game));
    }

    #[test]
    fn matching_pennies_closes_to_the_full_game() {
        let game = g("matching-pennies");
        for k in 1..8 {
            let c = k_best_reply_closure(&game, &block(&game, &[0], &[0]), k).unwrap();
            assert_eq!(c, Block::full(&game));
        }
    }

    #[test]
    fn minimal_blocks() {
        let coord = g("coordination");
        assert_eq!(minimal_k_curb_blocks(&coord, 5).unwrap(), vec![
            block(&coord, &[0], &[0]),
            block(&coord, &[1], &[1])
        ]);
        let mp = g("matching-pennies");
        assert_eq!(minimal_k_curb_blocks(&mp, 5).unwrap(), vec![Block::full(&mp)]);
        let ex = g("three-by-two-example");
        assert_eq!(minimal_k_curb_blocks(&ex, 1).unwrap(), vec![block(&ex, &[0, 1], &[0, 1])]);
        assert_eq!(minimal_k_curb_blocks(&ex, 2).unwrap(), vec![Block::full(&ex)]);
    }

    #[test]
    fn size_limit_is_enforced() {
        let game = g("unstable-rps");
        assert!(matches!(
            minimal_k_curb_blocks_limited(&game, 3, 5),
            Err(RwsError::GameTooLarge(_))
        ));
    }

    #[test]
    fn invalid_blocks_are_rejected() {
        let game = g("matching-pennies");
        assert!(Block::new(&game, [], [0]).is_err());
        assert!(Block::new(&game, [0], [2]).is_err());
    }

    #[test]
    fn neighborhood_examples() {
        let game = g("unstable-rps");
        let b = block(&game, &[0, 1], &[0, 1]);
        let inside = StatePoint::new(vec![0.5, 0.5, 0.0], vec![0.2, 0.8, 0.0]).unwrap();
        assert!(in_neighborhood(&inside, &b, 0.0));

        let s = StatePoint::new(vec![0.5, 0.45, 0.05], vec![0.5, 0.4, 0.1]).unwrap();
        assert!(!in_neighborhood(&s, &b, 0.08));
        assert!(in_neighborhood(&s, &b, 0.1));
        let far = StatePoint::new(vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]).unwrap();
        assert!(in_neighborhood(&far, &b, 1.0));
    }

    #[test]
    fn report_uses_one_based_indices() {
        let game = g("coordination");
        let r = CurbReport::new(&game, 5, &minimal_k_curb_blocks(&game, 5).unwrap());
        assert_eq!(r.blocks[1].c1, vec![2]);
        assert_eq!(r.blocks[1].c2, vec![2]);
    }
}
