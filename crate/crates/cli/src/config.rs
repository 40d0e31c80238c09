//! Run configuration: command-line flags layered over an optional TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Problems with flags or the config file; all map to exit status 2.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Bidder means, comma separated, each in (0, 1).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub means: Option<Vec<f64>>,
    /// Symmetric mean shared by every bidder (with --n).
    #[arg(long)]
    pub m: Option<f64>,
    /// Number of symmetric bidders (with --m).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Independent random streams for Monte Carlo runs.
    #[arg(long)]
    pub streams: Option<usize>,
    /// Grid size: reserve grid for `verify`, value grid for `oracle`.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Reserve grid of `oracle` (defaults to --grid).
    #[arg(long)]
    pub reserve_grid: Option<usize>,
    /// Stratified certificate profiles for `verify`.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the JSON result on stdout instead of a summary line.
    #[arg(long)]
    pub json: bool,
    /// TOML file with any of the long flag names as keys (dashes become underscores).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    /// Command-specific flags that were given, by config key name.
    fn present(&self) -> Vec<&'static str> {
        [
            (self.trials.is_some(), "trials"),
            (self.streams.is_some(), "streams"),
            (self.grid.is_some(), "grid"),
            (self.reserve_grid.is_some(), "reserve_grid"),
            (self.samples.is_some(), "samples"),
        ]
        .into_iter()
        .filter_map(|(set, key)| set.then_some(key))
        .collect()
    }
}

/// Flags of `verify` only.
#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    /// Shift nature's alpha to exercise the failure path.
    #[arg(long, allow_hyphen_values = true)]
    pub perturb_alpha: Option<f64>,
    /// Also solve the discretized game as a linear program.
    #[arg(long)]
    pub oracle: bool,
    /// Value and reserve grid size of the LP cross-check.
    #[arg(long)]
    pub oracle_grid: Option<usize>,
    /// Support points of the worst-case law checked for zero certificate slack.
    #[arg(long)]
    pub support_samples: Option<usize>,
    /// Tolerance on indifference, mass and mean residuals.
    #[arg(long)]
    pub analytic_tol: Option<f64>,
    /// Allowed negative certificate slack.
    #[arg(long)]
    pub slack_tol: Option<f64>,
}

/// Keys accepted in the config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub means: Option<Vec<f64>>,
    pub m: Option<f64>,
    pub n: Option<usize>,
    pub n_range: Option<NRangeSpec>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub streams: Option<usize>,
    pub grid: Option<usize>,
    pub reserve_grid: Option<usize>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub perturb_alpha: Option<f64>,
    pub oracle: Option<bool>,
    pub oracle_grid: Option<usize>,
    pub support_samples: Option<usize>,
    pub analytic_tol: Option<f64>,
    pub slack_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NRangeSpec {
    Text(String),
    List(Vec<usize>),
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source: Box::new(source) })
    }

    /// Keys present in the file, by name.
    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut add = |set: bool, name| {
            if set {
                keys.push(name);
            }
        };
        add(self.means.is_some(), "means");
        add(self.m.is_some(), "m");
        add(self.n.is_some(), "n");
        add(self.n_range.is_some(), "n_range");
        add(self.trials.is_some(), "trials");
        add(self.streams.is_some(), "streams");
        add(self.grid.is_some(), "grid");
        add(self.reserve_grid.is_some(), "reserve_grid");
        add(self.samples.is_some(), "samples");
        add(self.perturb_alpha.is_some(), "perturb_alpha");
        add(self.oracle.is_some(), "oracle");
        add(self.oracle_grid.is_some(), "oracle_grid");
        add(self.support_samples.is_some(), "support_samples");
        add(self.analytic_tol.is_some(), "analytic_tol");
        add(self.slack_tol.is_some(), "slack_tol");
        keys
    }
}

/// Parses `a..b` (inclusive), `a..=b` or a comma list.
pub fn parse_n_range(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    let bad = |e: std::num::ParseIntError| format!("invalid n range {s:?}: {e}");
    let list: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        (a..=b).collect()
    } else if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(bad)).collect::<Result<_, _>>()?
    };
    if list.is_empty() {
        return Err(format!("n range {s:?} is empty"));
    }
    if list.contains(&0) {
        return Err("n range must not contain 0".into());
    }
    Ok(list)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Equilibrium,
    Verify,
    Oracle,
    Simulate,
    Sweep,
}

impl CommandKind {
    /// Config keys that only make sense for some commands.
    fn accepts(self, key: &str) -> bool {
        use CommandKind::*;
        match key {
            "n_range" => self == Sweep,
            "means" | "n" => self != Sweep,
            "trials" | "streams" => matches!(self, Simulate | Sweep),
            "grid" => matches!(self, Verify | Oracle),
            "reserve_grid" => self == Oracle,
            "samples" | "perturb_alpha" | "oracle" | "oracle_grid" | "support_samples" | "analytic_tol"
            | "slack_tol" => self == Verify,
            _ => true,
        }
    }
}

/// Fully resolved configuration. Everything except the output directory
/// enters the config hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub means: Option<Vec<f64>>,
    pub m: Option<f64>,
    pub n_range: Option<Vec<usize>>,
    pub seed: u64,
    pub trials: Option<u64>,
    pub streams: usize,
    pub grid: usize,
    pub reserve_grid: usize,
    pub samples: usize,
    pub support_samples: usize,
    pub analytic_tol: f64,
    pub slack_tol: f64,
    pub oracle: bool,
    pub oracle_grid: usize,
    pub perturb_alpha: f64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub json: bool,
}

impl RunConfig {
    pub fn resolve(
        command: CommandKind,
        common: &CommonArgs,
        verify: Option<&VerifyArgs>,
        n_range_flag: Option<&str>,
    ) -> Result<Self, ConfigError> {
        let file = match &common.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        if let Some(key) = file.present().into_iter().find(|k| !command.accepts(k)) {
            return Err(invalid(format!("config key {key:?} does not apply to this command")));
        }
        if let Some(key) = common.present().into_iter().find(|k| !command.accepts(k)) {
            return Err(invalid(format!("--{} does not apply to this command", key.replace('_', "-"))));
        }
        let v = verify.cloned().unwrap_or_default();

        // Flags override the file; --means and --m/--n replace each other.
        let (means_src, m_src, n_src) = if common.means.is_some() || common.m.is_some() || common.n.is_some() {
            (common.means.clone(), common.m, common.n)
        } else {
            (file.means.clone(), file.m, file.n)
        };
        let (means, m) = if command == CommandKind::Sweep {
            if means_src.is_some() || n_src.is_some() {
                return Err(invalid("sweep takes --m and --n-range, not --means or --n"));
            }
            (None, Some(m_src.ok_or_else(|| invalid("sweep needs --m"))?))
        } else {
            let means = match (means_src, m_src, n_src) {
                (Some(means), None, None) => means,
                (None, Some(m), Some(n)) => vec![m; n],
                (Some(_), _, _) => return Err(invalid("give either --means or --m with --n, not both")),
                (None, Some(_), None) | (None, None, Some(_)) => return Err(invalid("--m and --n go together")),
                (None, None, None) => return Err(invalid("missing means: give --means or --m with --n")),
            };
            (Some(means), None)
        };

        let n_range = match (n_range_flag, &file.n_range) {
            (Some(s), _) => Some(parse_n_range(s).map_err(invalid)?),
            (None, Some(NRangeSpec::Text(s))) => Some(parse_n_range(s).map_err(invalid)?),
            (None, Some(NRangeSpec::List(list))) => {
                let text = list.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
                Some(parse_n_range(&text).map_err(invalid)?)
            }
            (None, None) if command == CommandKind::Sweep => return Err(invalid("sweep needs --n-range")),
            (None, None) => None,
        };

        let default_grid = match command {
            CommandKind::Oracle => 101,
            _ => 10_000,
        };
        let grid = common.grid.or(file.grid).unwrap_or(default_grid);
        let trials = common.trials.or(file.trials).or(match command {
            CommandKind::Simulate => Some(1_000_000),
            _ => None,
        });
        let oracle_grid = v.oracle_grid.or(file.oracle_grid).unwrap_or(101);
        let cfg = Self {
            command,
            means,
            m,
            n_range,
            seed: common.seed.or(file.seed).unwrap_or(0),
            trials,
            streams: common.streams.or(file.streams).unwrap_or(16),
            grid,
            reserve_grid: common.reserve_grid.or(file.reserve_grid).unwrap_or(grid),
            samples: common.samples.or(file.samples).unwrap_or(100_000),
            support_samples: v.support_samples.or(file.support_samples).unwrap_or(1000),
            analytic_tol: v.analytic_tol.or(file.analytic_tol).unwrap_or(1e-9),
            slack_tol: v.slack_tol.or(file.slack_tol).unwrap_or(1e-9),
            oracle: v.oracle || file.oracle.unwrap_or(false),
            oracle_grid,
            perturb_alpha: v.perturb_alpha.or(file.perturb_alpha).unwrap_or(0.0),
            out: common.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("output")),
            json: common.json,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.trials == Some(0) {
            return Err(invalid("--trials must be at least 1"));
        }
        if self.streams == 0 {
            return Err(invalid("--streams must be at least 1"));
        }
        if self.grid < 2 || self.reserve_grid < 2 || self.oracle_grid < 2 {
            return Err(invalid("grid sizes must be at least 2"));
        }
        if !self.perturb_alpha.is_finite() {
            return Err(invalid("--perturb-alpha must be finite"));
        }
        if let Some(m) = self.m {
            if !(m > 0.0 && m < 1.0) {
                return Err(invalid(format!("mean {m} is outside (0, 1)")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
