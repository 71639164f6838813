//! Recency weighted sampler (RWS) learning dynamics for finite two-player
//! games.
//!
//! Each role keeps a recency-weighted frequency vector of its own past
//! plays. Every period, each role samples `k` plays of the opponent from
//! that opponent's vector, best-replies to the sample (or trembles with
//! probability `epsilon`), and both vectors move toward the realized play by
//! a factor `1 - beta`.

pub mod baselines;
pub mod curb;
pub mod engine;
pub mod error;
pub mod game;
pub mod grid;
pub mod io;
pub mod meanfield;
pub mod nash;
pub mod rng;
pub mod stats;

pub use engine::{
    approximate_history, exact_play_distribution, simulate_step, simulate_trajectory,
    state_update, transition_support, PlayProfile, RwsChain, RwsParams, SampledBestReply,
    Trajectory, TransitionSupport,
};
pub use error::{Result, RwsError};
pub use game::{Game, MixedStrategy, Role, StatePoint};
pub use rng::StreamSeed;
