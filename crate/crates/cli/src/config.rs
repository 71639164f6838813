//! Experiment configuration shared by command-line flags and config files.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use rws_core::{Game, StatePoint};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Simulate,
    Curb,
    FixedPoint,
    Meanfield,
    Ergodicity,
    Concentration,
    Occupancy,
    VarianceScan,
    Compare,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Curb => "curb",
            CommandKind::FixedPoint => "fixed-point",
            CommandKind::Meanfield => "meanfield",
            CommandKind::Ergodicity => "ergodicity",
            CommandKind::Concentration => "concentration",
            CommandKind::Occupancy => "occupancy",
            CommandKind::VarianceScan => "variance-scan",
            CommandKind::Compare => "compare",
        }
    }

    /// Commands that draw random numbers and therefore need a seed.
    pub fn is_stochastic(self) -> bool {
        !matches!(
            self,
            CommandKind::Curb | CommandKind::FixedPoint | CommandKind::Meanfield
        )
    }
}

/// Every field of an experiment. On the command line each field is a
/// `--kebab-case` flag; in a TOML or JSON config file it is a key of the
/// same name, plus `command`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,

    /// Built-in game name or path to a game JSON file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub game: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,

    /// Sample size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,

    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,

    /// Sample sizes of a fixed-point sweep.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<u32>>,

    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,

    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,

    /// Steps to simulate (after burn-in where one applies).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,

    /// Length of a mean-field path in continuous time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,

    /// Stationary samples per chain.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<u64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// `uniform`, `corner:A,B` (1-based) or `point:x1,..;y1,..`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,

    /// Start of the second ergodicity chain.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_b: Option<String>,

    /// Run both ergodicity chains on the same random stream.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub coupled: bool,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<u64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,

    /// Independent chains per occupancy setting.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,

    /// Comma-separated subset of `rws,young,fp_recency`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub processes: Option<Vec<String>>,

    /// Memory length of the finite-memory process.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub young_m: Option<usize>,

    /// Concentration reference: `fixed-point`, `nash` or `point:..`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_star: Option<String>,

    #[arg(long, env = "RWS_OUT_DIR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads a `.toml` or `.json` config file. Parse errors carry the file
    /// name and the parser's line, column and field.
    pub fn from_file(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| CliError::Config {
            path: path.display().to_string(),
            message: message.trim_end().to_string(),
        })
    }

    pub fn command(&self) -> Result<CommandKind, CliError> {
        self.command.ok_or_else(|| CliError::missing("command", "config"))
    }

    pub(crate) fn require<T: Clone>(&self, value: &Option<T>, field: &'static str) -> Result<T, CliError> {
        let command = self.command.map_or("config", CommandKind::name);
        value.clone().ok_or_else(|| CliError::missing(field, command))
    }

    pub(crate) fn require_list<T: Clone>(&self, value: &Option<Vec<T>>, field: &'static str) -> Result<Vec<T>, CliError> {
        let list = self.require(value, field)?;
        if list.is_empty() {
            return Err(CliError::Invalid(format!("`{field}` must not be empty")));
        }
        Ok(list)
    }
}

/// Built-in name first, then a JSON file path.
pub fn resolve_game(spec: &str) -> Result<Game, CliError> {
    if rws_core::game::BUILTIN_GAMES.contains(&spec) {
        return Ok(Game::builtin(spec)?);
    }
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        return Ok(Game::from_json(&text)?);
    }
    Err(CliError::Invalid(format!(
        "unknown game `{spec}`: not a built-in ({}) and no such file",
        rws_core::game::BUILTIN_GAMES.join(", ")
    )))
}

/// Parses `uniform`, `corner:A,B` or `point:x1,..;y1,..`.
pub fn parse_start(spec: &str, game: &Game) -> Result<StatePoint, CliError> {
    let bad = |why: &str| CliError::Invalid(format!("bad start `{spec}`: {why}"));
    let numbers = |s: &str| -> Result<Vec<f64>, CliError> {
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("expected numbers")))
            .collect()
    };
    let (m1, m2) = (game.m1(), game.m2());
    if spec == "uniform" {
        return Ok(StatePoint::uniform(m1, m2));
    }
    if let Some(rest) = spec.strip_prefix("corner:") {
        let idx: Vec<usize> = rest
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| bad("expected two 1-based strategies")))
            .collect::<Result<_, _>>()?;
        return match idx.as_slice() {
            [a, b] if (1..=m1).contains(a) && (1..=m2).contains(b) => {
                Ok(StatePoint::corner(m1, m2, a - 1, b - 1))
            }
            _ => Err(bad("expected two 1-based strategies within the game")),
        };
    }
    if let Some(rest) = spec.strip_prefix("point:") {
        let (a, b) = rest.split_once(';').ok_or_else(|| bad("separate the roles with `;`"))?;
        let state = StatePoint::new(numbers(a)?, numbers(b)?)?;
        return Ok(state.for_game(game)?);
    }
    Err(bad("expected uniform, corner:A,B or point:x..;y.."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_specs() {
        let g = Game::builtin("unstable-rps").unwrap();
        assert_eq!(parse_start("uniform", &g).unwrap(), StatePoint::uniform(3, 3));
        assert_eq!(parse_start("corner:1,3", &g).unwrap(), StatePoint::corner(3, 3, 0, 2));
        let p = parse_start("point:0.5,0.5,0;0,0,1", &g).unwrap();
        assert_eq!(p.p1, vec![0.5, 0.5, 0.0]);
        assert!(parse_start("corner:0,1", &g).is_err());
        assert!(parse_start("corner:1,4", &g).is_err());
        assert!(parse_start("point:0.5,0.5;1,0,0", &g).is_err());
        assert!(parse_start("middle", &g).is_err());
    }

    #[test]
    fn toml_keys_mirror_flags() {
        let c: ExperimentConfig = toml::from_str(
            "command = \"variance-scan\"\ngame = \"matching-pennies\"\nbetas = [0.9, 0.99]\nburn-in = 10\nyoung-m = 5\n",
        )
        .unwrap();
        assert_eq!(c.command, Some(CommandKind::VarianceScan));
        assert_eq!(c.burn_in, Some(10));
        assert_eq!(c.young_m, Some(5));
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1\n").is_err());
    }
}
