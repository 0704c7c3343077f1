//! Run configuration: parameter source, depths, tolerances and seeds.

use std::path::Path;

use chfif::constraints::{solve_constraints, SearchConfig};
use chfif::ifs::HiddenParams;
use chfif::presets::{self, ParamExprs, PUBLISHED_PRESET};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::GlobalArgs;

/// Contents of a `--config` file. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub n: Option<usize>,
    /// Name of a preset such as `paper-sec4`.
    pub preset: Option<String>,
    /// Explicit parameters as expressions (`"sqrt7-3"`, `"1/20"`, `"0.3"`).
    pub params: Option<ParamExprs>,
    /// Search for orthogonal parameters instead.
    #[serde(default)]
    pub solve: bool,
    pub depth: Option<u32>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

/// Where the parameters came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Preset(String),
    Explicit(ParamExprs),
    Solve { n: usize, seed: u64 },
}

/// Flags merged with the config file.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub source: Source,
    pub depth: Option<u32>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub output: Option<String>,
}

impl Resolved {
    pub fn from_args(g: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &g.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let n = g.n.or(file.n);
        let seed = g.seed.or(file.seed);
        let given = [file.preset.is_some(), file.params.is_some(), file.solve];
        if given.iter().filter(|&&b| b).count() > 1 {
            return Err(CliError::input("config sets more than one of preset, params and solve"));
        }
        let source = if let Some(name) = g.preset.clone().or(file.preset) {
            presets::by_name(&name).map_err(CliError::from)?;
            Source::Preset(name)
        } else if let Some(p) = file.params {
            Source::Explicit(p)
        } else if file.solve || n.is_some_and(|n| n != 2) {
            Source::Solve {
                n: n.unwrap_or(2),
                seed: seed.unwrap_or(0),
            }
        } else {
            Source::Preset(PUBLISHED_PRESET.into())
        };
        Ok(Self {
            source,
            depth: g.depth.or(file.depth),
            tol: g.tol.or(file.tol),
            seed,
            output: g.output.clone().map(|p| p.to_string_lossy().into_owned()).or(file.output),
        })
    }

    pub fn is_published_preset(&self) -> bool {
        matches!(&self.source, Source::Preset(p) if p == PUBLISHED_PRESET)
    }

    pub fn params(&self) -> Result<HiddenParams, CliError> {
        match &self.source {
            Source::Preset(name) => Ok(presets::by_name(name)?.evaluate()?),
            Source::Explicit(p) => Ok(p.evaluate()?),
            Source::Solve { n, seed } => {
                let cfg = SearchConfig {
                    seed: *seed,
                    end_orthogonality: true,
                    ..SearchConfig::new(*n)
                };
                Ok(solve_constraints(&cfg)?.params)
            }
        }
    }
}

/// Version and configuration hash attached to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the command name and resolved configuration.
    pub config_hash: String,
}

impl Metadata {
    pub fn new(command: &str, cfg: &Resolved, extra: &serde_json::Value) -> Self {
        let body = serde_json::json!({ "command": command, "config": cfg, "inputs": extra });
        let digest = Sha256::digest(serde_json::to_vec(&body).expect("config serializes"));
        Self {
            tool: "chfif".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: format!("{digest:x}"),
        }
    }
}
