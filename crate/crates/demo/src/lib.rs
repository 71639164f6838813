//! Browser bindings for the sampler. Each exported function has a plain Rust
//! twin in [`ops`] so the logic can be tested off the browser.

use wasm_bindgen::prelude::*;

pub mod ops {
    use rws_core::meanfield::integrate_meanfield;
    use rws_core::{exact_play_distribution, simulate_trajectory, Game, Role, RwsParams, StatePoint, StreamSeed};

    pub type OpResult<T> = Result<T, String>;

    /// A bundled game name or a JSON game document.
    pub fn game(spec: &str) -> OpResult<Game> {
        let spec = spec.trim();
        let g = if spec.starts_with('{') { Game::from_json(spec) } else { Game::builtin(spec) };
        g.map_err(|e| e.to_string())
    }

    fn start(g: &Game, p1: &[f64], p2: &[f64]) -> OpResult<StatePoint> {
        if p1.is_empty() && p2.is_empty() {
            return Ok(StatePoint::uniform(g.m1(), g.m2()));
        }
        StatePoint::new(p1.to_vec(), p2.to_vec())
            .and_then(|x| x.for_game(g))
            .map_err(|e| e.to_string())
    }

    fn flatten<'a>(points: impl Iterator<Item = &'a StatePoint>) -> Vec<f64> {
        points.flat_map(|x| x.p1.iter().chain(&x.p2).copied()).collect()
    }

    /// Row-major `[m1, m2]` strategy counts.
    pub fn dimensions(spec: &str) -> OpResult<Vec<u32>> {
        let g = game(spec)?;
        Ok(vec![g.m1() as u32, g.m2() as u32])
    }

    /// Simulated states, every `every`-th one, each row `p1 ++ p2`.
    #[allow(clippy::too_many_arguments)]
    pub fn simulate(
        spec: &str,
        beta: f64,
        k: u32,
        epsilon: f64,
        horizon: u32,
        every: u32,
        seed: u32,
        p1: &[f64],
        p2: &[f64],
    ) -> OpResult<Vec<f64>> {
        let g = game(spec)?;
        let params = RwsParams::new(beta, k, epsilon).map_err(|e| e.to_string())?;
        let x0 = start(&g, p1, p2)?;
        let t = simulate_trajectory(&x0, &g, &params, horizon as usize, StreamSeed::new(seed as u64, 0))
            .map_err(|e| e.to_string())?;
        Ok(flatten(t.states.iter().step_by(every.max(1) as usize)))
    }

    /// Mean-field path from `p1, p2`, same row layout as [`simulate`].
    pub fn meanfield(
        spec: &str,
        k: u32,
        epsilon: f64,
        time: f64,
        dt: f64,
        p1: &[f64],
        p2: &[f64],
    ) -> OpResult<Vec<f64>> {
        let g = game(spec)?;
        // memory does not enter the flow
        let params = RwsParams::new(0.5, k, epsilon).map_err(|e| e.to_string())?;
        let x0 = start(&g, p1, p2)?;
        let path = integrate_meanfield(&g, &params, &x0, time, dt).map_err(|e| e.to_string())?;
        Ok(flatten(path.points.iter()))
    }

    /// Exact law of `role`'s next play against opponent frequencies `opp`.
    pub fn play_distribution(spec: &str, role: u8, k: u32, epsilon: f64, opp: &[f64]) -> OpResult<Vec<f64>> {
        let g = game(spec)?;
        let role = match role {
            1 => Role::One,
            2 => Role::Two,
            r => return Err(format!("role must be 1 or 2, got {r}")),
        };
        let params = RwsParams::new(0.5, k, epsilon).map_err(|e| e.to_string())?;
        exact_play_distribution(&g, role, opp, &params).map_err(|e| e.to_string())
    }
}

fn js(r: ops::OpResult<Vec<f64>>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn dimensions(game: &str) -> Result<Vec<u32>, JsError> {
    ops::dimensions(game).map_err(|e| JsError::new(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn simulate(
    game: &str,
    beta: f64,
    k: u32,
    epsilon: f64,
    horizon: u32,
    every: u32,
    seed: u32,
    p1: &[f64],
    p2: &[f64],
) -> Result<Vec<f64>, JsError> {
    js(ops::simulate(game, beta, k, epsilon, horizon, every, seed, p1, p2))
}

#[wasm_bindgen]
pub fn meanfield(game: &str, k: u32, epsilon: f64, time: f64, dt: f64, p1: &[f64], p2: &[f64]) -> Result<Vec<f64>, JsError> {
    js(ops::meanfield(game, k, epsilon, time, dt, p1, p2))
}

#[wasm_bindgen]
pub fn play_distribution(game: &str, role: u8, k: u32, epsilon: f64, opp: &[f64]) -> Result<Vec<f64>, JsError> {
    js(ops::play_distribution(game, role, k, epsilon, opp))
}
