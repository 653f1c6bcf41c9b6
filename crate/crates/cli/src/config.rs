//! JSON configuration for `fpcr simulate`.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "seed": 7,
//!   "n": [50, 200],
//!   "c": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
//!   "slope_kinds": ["sparsest", "sparse", "dense", "densest"]
//! }
//! ```
//!
//! Every other field has the protocol default. Scenarios are the Cartesian
//! product of `n`, `c`, `slope_kinds` and `spaces`; all of them share the
//! seed, so neighbouring scenarios use common random numbers.

use std::path::Path;

use fpcr_core::function_space::Space;
use fpcr_core::simulation::{ExperimentConfig, MaternParams, SlopeKind};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

fn default_m() -> usize {
    50
}
fn default_alpha() -> f64 {
    0.05
}
fn default_bootstrap() -> usize {
    1000
}
fn default_reps() -> usize {
    500
}
fn default_fve() -> f64 {
    0.75
}
fn default_jmax() -> usize {
    20
}
fn default_spaces() -> Vec<Space> {
    vec![Space::L2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub n: Vec<usize>,
    pub c: Vec<f64>,
    pub slope_kinds: Vec<SlopeKind>,
    #[serde(default = "default_spaces")]
    pub spaces: Vec<Space>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_fve")]
    pub fve_threshold: f64,
    #[serde(default = "default_jmax")]
    pub j_max: usize,
    #[serde(default)]
    pub matern: MaternParams,
}

impl SimulationConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        // serde_json reports line and column, and the field name for unknown
        // or mistyped fields
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |field: &str, msg: String| Err(CliError::Input(format!("config field `{field}`: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return bad(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            );
        }
        for (field, empty) in [
            ("n", self.n.is_empty()),
            ("c", self.c.is_empty()),
            ("slope_kinds", self.slope_kinds.is_empty()),
            ("spaces", self.spaces.is_empty()),
        ] {
            if empty {
                return bad(field, "scenario list is empty".into());
            }
        }
        // per-scenario checks reuse the core validation, tagged with the field
        for cfg in self.scenarios() {
            cfg.validate().map_err(|e| CliError::Input(format!("config scenario (n={}, c={}): {e}", cfg.n, cfg.c)))?;
        }
        Ok(())
    }

    pub fn scenarios(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &c in &self.c {
                for &slope_kind in &self.slope_kinds {
                    for &space in &self.spaces {
                        out.push(ExperimentConfig {
                            n,
                            m: self.m,
                            c,
                            slope_kind,
                            space,
                            alpha: self.alpha,
                            bootstrap: self.bootstrap,
                            reps: self.reps,
                            fve_threshold: self.fve_threshold,
                            j_max: self.j_max,
                            seed: self.seed,
                            matern: self.matern,
                        });
                    }
                }
            }
        }
        out
    }
}
