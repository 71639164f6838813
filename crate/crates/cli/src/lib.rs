//! Experiment runner for the recency weighted sampler.
//!
//! [`run_experiment`] executes one [`ExperimentConfig`] and writes its CSV or
//! JSON output into the output directory, each file next to a
//! `<stem>.meta.json` sidecar holding the configuration, seeds, game and
//! build description needed to re-run it. Outputs depend only on the
//! configuration, so a re-run reproduces them byte for byte.

pub mod config;

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use rws_core::baselines::{fp_recency_step_in_place, young_step_in_place, FpRecencyState, YoungState};
use rws_core::curb::{minimal_k_curb_blocks, CurbReport};
use rws_core::game::GameDocument;
use rws_core::io::{self, TrajectoryRows, YoungPath};
use rws_core::meanfield::{
    fixed_point_2x2, fixed_point_general, integrate_meanfield, k_sweep_2x2, FixedPointResult,
};
use rws_core::nash::solve_nash_small;
use rws_core::stats::{
    concentration_curve, default_burn_in, ergodicity_decay, mean_distance, occupancy_sweep,
    variance_scaling,
};
use rws_core::{simulate_trajectory, Game, RwsError, RwsParams, StatePoint, StreamSeed};

pub use config::{parse_start, resolve_game, CommandKind, ExperimentConfig};

/// Build description baked in at compile time.
pub const GIT_DESCRIBE: &str = env!("RWS_GIT_DESCRIBE");

/// Placeholder recency for commands whose output does not depend on it.
const UNUSED_BETA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("missing required field `{field}` for {command}")]
    Missing { field: &'static str, command: &'static str },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Module(#[from] RwsError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn missing(field: &'static str, command: &'static str) -> CliError {
        CliError::Missing { field, command }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Module(_) => 1,
            CliError::Io { .. } => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JobSeed {
    pub job: usize,
    pub label: String,
    pub master: u64,
    pub chain: u64,
}

impl JobSeed {
    fn new(job: usize, label: impl Into<String>, seed: StreamSeed) -> JobSeed {
        JobSeed {
            job,
            label: label.into(),
            master: seed.master,
            chain: seed.chain,
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    git_describe: &'static str,
    command: &'static str,
    file: &'a str,
    config: &'a ExperimentConfig,
    game: GameDocument,
    jobs: &'a [JobSeed],
    details: &'a serde_json::Value,
}

/// Files written by one run, in writing order.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Collector<'a> {
    dir: PathBuf,
    command: CommandKind,
    config: &'a ExperimentConfig,
    game: &'a Game,
    report: RunReport,
}

impl Collector<'_> {
    fn write(&mut self, name: &str, contents: &str, jobs: &[JobSeed], details: serde_json::Value) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_file(&path, contents)?;
        let meta = Metadata {
            tool: "rws",
            version: env!("CARGO_PKG_VERSION"),
            git_describe: GIT_DESCRIBE,
            command: self.command.name(),
            file: name,
            config: self.config,
            game: self.game.to_document(),
            jobs,
            details: &details,
        };
        let stem = Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name);
        let meta_path = self.dir.join(format!("{stem}.meta.json"));
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
        write_file(&meta_path, &text)?;
        self.report.files.push(path);
        self.report.files.push(meta_path);
        Ok(())
    }

    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.report.warnings.push(message);
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

/// Fills command defaults into the configuration so the sidecar records
/// every value the run used. The output directory is left out, keeping
/// sidecars independent of where they are written.
fn resolve_defaults(config: &ExperimentConfig, game: &Game) -> Result<ExperimentConfig, CliError> {
    let command = config.command()?;
    let mut c = config.clone();
    c.out_dir = None;
    let uniform = || Some("uniform".to_string());
    match command {
        CommandKind::Simulate | CommandKind::Compare | CommandKind::Occupancy => {
            c.start = c.start.or_else(uniform);
        }
        CommandKind::FixedPoint | CommandKind::Meanfield => {
            c.start = c.start.or_else(uniform);
            c.beta = c.beta.or(Some(UNUSED_BETA));
            if command == CommandKind::Meanfield {
                c.dt = c.dt.or(Some(0.01));
            }
        }
        CommandKind::Ergodicity => {
            c.start = c.start.or_else(|| Some("corner:1,1".into()));
            c.start_b = c.start_b.or_else(|| Some(format!("corner:{},{}", game.m1(), game.m2())));
        }
        CommandKind::Concentration => {
            c.x_star = c.x_star.or_else(|| Some("fixed-point".into()));
        }
        CommandKind::Curb | CommandKind::VarianceScan => {}
    }
    if command == CommandKind::Occupancy {
        c.replicates = c.replicates.or(Some(1));
        if let Some(beta) = c.beta {
            c.burn_in = c.burn_in.or(Some(default_burn_in(beta)));
        }
    }
    Ok(c)
}

fn params(c: &ExperimentConfig) -> Result<RwsParams, CliError> {
    Ok(RwsParams::new(
        c.require(&c.beta, "beta")?,
        c.require(&c.k, "k")?,
        c.require(&c.epsilon, "epsilon")?,
    )?)
}

fn root_seed(c: &ExperimentConfig) -> Result<StreamSeed, CliError> {
    Ok(StreamSeed::new(c.require(&c.seed, "seed")?, 0))
}

/// The game's unique completely mixed equilibrium, if it has one.
fn unique_mixed_nash(game: &Game) -> Option<StatePoint> {
    let sol = solve_nash_small(game).ok()?;
    match sol.equilibria.as_slice() {
        [e] if e.is_completely_mixed() => Some(StatePoint {
            p1: e.x1.clone(),
            p2: e.x2.clone(),
        }),
        _ => None,
    }
}

/// The 2x2 solver where it applies, the general solver otherwise.
fn fixed_point(game: &Game, params: &RwsParams, start: &StatePoint) -> Result<FixedPointResult, CliError> {
    if game.m1() == 2 && game.m2() == 2 {
        if let Ok(r) = fixed_point_2x2(game, params) {
            return Ok(r);
        }
    }
    Ok(fixed_point_general(game, params, start)?)
}

/// Runs one experiment and writes its outputs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    let command = config.command()?;
    let game = resolve_game(&config.require(&config.game, "game")?)?;
    if command.is_stochastic() {
        config.require(&config.seed, "seed")?;
    }
    let c = resolve_defaults(config, &game)?;
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut out = Collector {
        dir,
        command,
        config: &c,
        game: &game,
        report: RunReport::default(),
    };
    match command {
        CommandKind::Simulate => simulate(&c, &game, &mut out)?,
        CommandKind::Curb => curb(&c, &game, &mut out)?,
        CommandKind::FixedPoint => fixed_point_cmd(&c, &game, &mut out)?,
        CommandKind::Meanfield => meanfield(&c, &game, &mut out)?,
        CommandKind::Ergodicity => ergodicity(&c, &game, &mut out)?,
        CommandKind::Concentration => concentration(&c, &game, &mut out)?,
        CommandKind::Occupancy => occupancy(&c, &game, &mut out)?,
        CommandKind::VarianceScan => variance(&c, &game, &mut out)?,
        CommandKind::Compare => compare(&c, &game, &mut out)?,
    }
    Ok(out.report)
}

fn start_of(spec: &Option<String>, game: &Game) -> Result<StatePoint, CliError> {
    parse_start(spec.as_deref().unwrap_or("uniform"), game)
}

fn check_ergodicity(params: &RwsParams, game: &Game, out: &mut Collector<'_>) {
    if let Some(w) = params.ergodicity_warning(game) {
        out.warn(w);
    }
}

fn simulate(c: &ExperimentConfig, game: &Game, out: &mut Collector<'_>) -> Result<(), CliError> {
    let params = params(c)?;
    check_ergodicity(&params, game, out);
    let horizon = c.require(&c.horizon, "horizon")? as usize;
    let seed = root_seed(c)?;
    let start = start_of(&c.start, game)?;
    let traj = simulate_trajectory(&start, game, &params, horizon, seed)?;
    let csv = io::trajectory_csv(game, (&traj).into(), None);
    out.write("trajectory.csv", &csv, &[JobSeed::new(0, "rws", seed)], json!({}))
}

fn curb(c: &ExperimentConfig, game: &Game, out: &mut Collector<'_>) -> Result<(), CliError> {
    let k = c.require(&c.k, "k")?;
    let blocks = minimal_k_curb_blocks(game, k)?;
    let report = CurbReport::new(game, k, &blocks);
    out.write("curb.json", &to_json(&report), &[], json!({}))
}

fn fixed_point_cmd(c: &ExperimentConfig, game: &Game, out: &mut Collector<'_>) -> Result<(), CliError> {
    let epsilon = c.require(&c.epsilon, "epsilon")?;
    let beta = c.beta.unwrap_or(UNUSED_BETA);
    if c.k.is_none() && c.ks.is_none() {
        return Err(CliError::missing("k", "fixed-point"));
    }
    let start = start_of(&c.start, game)?;
    let result = match c.k {
        Some(k) => {
            let params = RwsParams::new(beta, k, epsilon)?;
            Some(if game.m1() == 2 && game.m2() == 2 {
                fixed_point_2x2(game, &params)?
            } else {
                fixed_point_general(game, &params, &start)?
            })
        }
        None => None,
    };
    let sweep = match &c.ks {
        Some(ks) => {
            let base = RwsParams::new(beta, ks.first().copied().unwrap_or(1), epsilon)?;
            Some(k_sweep_2x2(game, &base, ks))
        }
        None => None,
    };
    let report = json!({
        "game": game.name(),
        "epsilon": epsilon,
        "result": result,
        "k_sweep": sweep,
    });
    out.write("fixed_point.json", &to_json(&report), &[], json!({}))
}

fn meanfield(c: &ExperimentConfig, game: &Game, out: &mut Collector<'_>) -> Result<(), CliError> {
    let params = params(c)?;
    let time = c.require(&c.time, "time")?;
    let dt = c.dt.unwrap_or(0.01);
    let start = start_of(&c.start, game)?;
    let fp = fixed_point(game, &params, &StatePoint::uniform(game.m1(), game.m2()))?;
    let path = integrate_meanfield(game, &params, &start, time, dt)?;
    let csv = io::meanpath_csv(&path, &fp.x_star);
    let details = json!({
        "x_star": fp.x_star,
        "x_star_residual": fp.residual,
        "x_star_method": fp.method,
        "max_drift": path.max_drift,
    });
    out.write("meanpath.csv", &csv, &[], details)
}

fn ergodicity(c: &ExperimentConfig, game: &Game, out: &mut Collector<'_>) -> Result<(), CliError> {
    let params = params(c)?;
    check_ergodicity(&params, game, out);
    let window = c.require(&c.window, "window")?;
    let horizon = c.require(&c.horizon, "horizon")?;
    let root = root_seed(c)?;
    let a = start_of(&c.start, game)?;
    let b = start_of(&c.start_b, game)?;
    let seeds = if c.coupled {
        [root.child(0), root.child(0)]
    } else {
        [root.child(0), root.child(1)]
    };
    let report = ergodicity_decay(game, &params, [&a, &b], seeds, window, horizon)?;
    let jobs = [JobSeed::new(0, "chain-a", seeds[0]), JobSeed::new(1, "chain-b", seeds[1])];
    let details = json!({ "fit": report.fit });
    out.write("ergodicity.csv", &io::ergodicity_csv(&report), &jobs, details)?;
    out.write("ergodicity_fit.json", &to_json(&report), &jobs, json!({}))
}

fn concentration(c: &ExperimentConfig, game: &Game, out: &mut Collector<'_>) -> Result<(), CliError> {
    let betas = c.require_list(&c.betas, "betas")?;
    let etas = c.require_list(&c.etas, "etas")?;
    let base = RwsParams::new(betas[0], c.require(&c.k, "k")?, c.require(&c.epsilon, "epsilon")?)?;
    let n = c.require(&c.n, "n")?;
    let root = root_seed(c)?;
    let reference = c.x_star.as_deref().unwrap_or("fixed-point");
    let x_star = match reference {
        "fixed-point" => fixed_point(game, &base, &StatePoint::uniform(game.m1(), game.m2()))?.x_star,
        "nash" => unique_mixed_nash(game)
            .ok_or_else(|| CliError::Invalid("the game has no unique completely mixed equilibrium".into()))?,
        other => parse_start(other, game)?,
    };
    for &beta in &betas {
        check_ergodicity(&base.with_beta(beta), game, out);
    }
    let curve = concentration_curve(game, &base, &betas, &etas, n, root, Some(&x_star))?;
    let jobs: Vec<JobSeed> = betas
        .iter()
        .enumerate()
        .map(|(i, b)| JobSeed::new(i, format!("beta={b}"), root.child(i as u64)))
        .collect();
    let details = json!({ "x_star": x_star, "burn_in": "ceil(10/(1-beta))", "thin": "ceil(1/(1-beta))" });
    out.write("concentration.csv", &io::concentration_csv(&curve), &jobs, details)
}

fn occupancy(c: &ExperimentConfig, game: &Game, out: &mut Collector<'_>) -> Result<(), CliError> {
    let beta = c.require(&c.beta, "beta")?;
    let k = c.require(&c.k, "k")?;
    let epsilons = c.require_list(&c.epsilons, "epsilons")?;
    let delta = c.require(&c.delta, "delta")?;
    let horizon = c.require(&c.horizon, "horizon")?;
    let replicates = c.replicates.unwrap_or(1);
    let burn_in = c.burn_in.unwrap_or_else(|| default_burn_in(beta));
    let base = RwsParams::new(beta, k, epsilons[0])?;
    for &e in &epsilons {
        check_ergodicity(&base.with_epsilon(e), game, out);
    }
    let root = root_seed(c)?;
    let start = start_of(&c.start, game)?;
    let blocks = minimal_k_curb_blocks(game, k)?;
    let rows = occupancy_sweep(game, &base, &epsilons, &start, burn_in, horizon, &blocks, delta, replicates, root)?;
    let jobs: Vec<JobSeed> = (0..epsilons.len() * replicates)
        .map(|j| {
            let label = format!("epsilon={},replicate={}", epsilons[j / replicates], j % replicates);
            JobSeed::new(j, label, root.child(j as u64))
        })
        .collect();
    let details = json!({
        "blocks": CurbReport::new(game, k, &blocks).blocks,
        "per_seed": rows.iter().map(|r| &r.per_seed).collect::<Vec<_>>(),
    });
    out.write("occupancy.csv", &io::occupancy_csv(&rows), &jobs, details)
}

fn variance(c: &ExperimentConfig, game: &Game, out: &mut Collector<'_>) -> Result<(), CliError> {
    let betas = c.require_list(&c.betas, "betas")?;
    let base = RwsParams::new(betas[0], c.require(&c.k, "k")?, c.require(&c.epsilon, "epsilon")?)?;
    let n = c.require(&c.n, "n")?;
    let root = root_seed(c)?;
    let table = variance_scaling(game, &base, &betas, n, root)?;
    let jobs: Vec<JobSeed> = betas
        .iter()
        .enumerate()
        .map(|(i, b)| JobSeed::new(i, format!("beta={b}"), root.child(i as u64)))
        .collect();
    let details = json!({
        "x_star": table.x_star,
        "stderr": table.rows.iter().map(|r| r.stderr).collect::<Vec<_>>(),
    });
    out.write("variance.csv", &io::variance_csv(&table), &jobs, details)
}

const PROCESSES: [&str; 3] = ["rws", "young", "fp_recency"];

fn compare(c: &ExperimentConfig, game: &Game, out: &mut Collector<'_>) -> Result<(), CliError> {
    let processes = c.require_list(&c.processes, "processes")?;
    if let Some(bad) = processes.iter().find(|p| !PROCESSES.contains(&p.as_str())) {
        return Err(CliError::Invalid(format!(
            "unknown process `{bad}`; expected one of {}",
            PROCESSES.join(", ")
        )));
    }
    let k = c.require(&c.k, "k")?;
    let epsilon = c.require(&c.epsilon, "epsilon")?;
    let horizon = c.require(&c.horizon, "horizon")? as usize;
    if horizon == 0 {
        return Err(CliError::Invalid("horizon must be at least 1".into()));
    }
    let root = root_seed(c)?;
    let start = start_of(&c.start, game)?;
    let reference = unique_mixed_nash(game);
    let mut summary = Vec::new();
    for (i, process) in processes.iter().enumerate() {
        let seed = root.child(i as u64);
        let name = format!("trajectory_{process}.csv");
        let (csv, states) = match process.as_str() {
            "rws" => {
                let params = RwsParams::new(c.require(&c.beta, "beta")?, k, epsilon)?;
                check_ergodicity(&params, game, out);
                let traj = simulate_trajectory(&start, game, &params, horizon, seed)?;
                let csv = io::trajectory_csv(game, (&traj).into(), Some("rws"));
                let mut states = traj.states;
                states.truncate(horizon);
                (csv, states)
            }
            "young" => {
                let m = c.require(&c.young_m, "young-m")?;
                let mut state = YoungState::from_state(game, &start, m, k as usize, epsilon)?;
                let mut rng = seed.rng();
                let mut path = YoungPath::default();
                for _ in 0..horizon {
                    let before = state.clone();
                    let play = young_step_in_place(&mut state, game, &mut rng);
                    path.record(game, &before, play);
                }
                let rows = TrajectoryRows {
                    states: &path.states,
                    plays: &path.plays,
                };
                (io::trajectory_csv(game, rows, Some("young")), path.states)
            }
            _ => {
                let beta = c.require(&c.beta, "beta")?;
                let mut state = FpRecencyState::new(game, start.clone(), beta)?;
                let (mut states, mut plays) = (Vec::with_capacity(horizon), Vec::with_capacity(horizon));
                for _ in 0..horizon {
                    states.push(state.beliefs.clone());
                    plays.push(fp_recency_step_in_place(&mut state, game));
                }
                let rows = TrajectoryRows {
                    states: &states,
                    plays: &plays,
                };
                (io::trajectory_csv(game, rows, Some("fp_recency")), states)
            }
        };
        let distance = reference.as_ref().map(|r| mean_distance(&states, r));
        summary.push(json!({ "process": process, "mean_distance_to_nash": distance }));
        out.write(&name, &csv, &[JobSeed::new(i, process.clone(), seed)], json!({}))?;
    }
    let jobs: Vec<JobSeed> = processes
        .iter()
        .enumerate()
        .map(|(i, p)| JobSeed::new(i, p.clone(), root.child(i as u64)))
        .collect();
    let report = json!({ "nash": reference, "processes": summary });
    out.write("compare.json", &to_json(&report), &jobs, json!({}))
}
