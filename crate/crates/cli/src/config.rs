//! Experiment configuration. Every field has a default, so `{"schema_version": 1}`
//! is a complete config.

use std::path::PathBuf;

use pinnlab::fdsolve::SolverSettings;
use pinnlab::mms::{LogBase, Manufactured};
use pinnlab::optim::Schedule;
use pinnlab::pinnloss::Weighting;
use pinnlab::scenarios::{Mode, Tag, DEFAULT_ALPHAS, DEFAULT_EVAL_GRID};
use pinnlab::tapenet::Architecture;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn default_tags() -> Vec<Tag> {
    Tag::ALL.to_vec()
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

fn default_alphas() -> Vec<f64> {
    DEFAULT_ALPHAS.to_vec()
}

fn default_grid() -> usize {
    DEFAULT_EVAL_GRID
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_tags")]
    pub tags: Vec<Tag>,
    #[serde(default)]
    pub preset: Architecture,
    #[serde(default)]
    pub weighting: Weighting,
    /// Replaces the mode's preset schedule when present.
    #[serde(default)]
    pub schedule: Option<Schedule>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub log_base: LogBase,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    /// Number of log-spaced viscosities in the evaluation curve.
    #[serde(default = "default_grid")]
    pub eval_grid: usize,
    /// Also run FD solves on the evaluation grid for the reference column.
    #[serde(default)]
    pub eval_fd_reference: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_mode() -> Mode {
    Mode::Standard
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mode: default_mode(),
            tags: default_tags(),
            preset: Architecture::default(),
            weighting: Weighting::default(),
            schedule: None,
            seed: 0,
            out_dir: default_out(),
            log_base: LogBase::default(),
            solver: SolverSettings::default(),
            alphas: default_alphas(),
            eval_grid: default_grid(),
            eval_fd_reference: false,
            workers: default_workers(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_slice(bytes).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.tags.is_empty() {
            return bad("no tags selected".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha {a} outside [0, 1]"));
        }
        if let Weighting::Fixed { alpha } = self.weighting {
            if !(0.0..=1.0).contains(&alpha) {
                return bad(format!("alpha {alpha} outside [0, 1]"));
            }
        }
        if self.eval_grid == 0 || self.workers == 0 {
            return bad("eval_grid and workers must be positive".into());
        }
        let s = self.schedule();
        if s.batch_size == 0 || s.record_stride == 0 {
            return bad("batch_size and record_stride must be positive".into());
        }
        let lr_ok = |lr: f64| lr.is_finite() && lr > 0.0;
        if !lr_ok(s.adamw.lr) || !lr_ok(s.warmup.lr) {
            return bad("learning rates must be positive".into());
        }
        if s.lbfgs.memory == 0 || s.lbfgs.max_trials == 0 {
            return bad("L-BFGS memory and trial budget must be positive".into());
        }
        if !(self.solver.cfl > 0.0 && self.solver.cfl < 1.0) || !(self.solver.tol > 0.0) {
            return bad("solver cfl must lie in (0, 1) and tol must be positive".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule.unwrap_or_else(|| self.mode.default_schedule())
    }

    pub fn problem(&self) -> Manufactured {
        Manufactured::new(self.log_base)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.preset.layer_sizes(self.mode.input_dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::from_json(br#"{"schema_version": 1}"#).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.schedule(), Schedule::standard());
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::default();
        c.mode = Mode::Parametric;
        c.weighting = Weighting::Fixed { alpha: 0.25 };
        c.tags = vec![Tag::C2];
        let back = ExperimentConfig::from_json(c.to_json().as_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.schedule(), Schedule::parametric());
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            r#"{"schema_version": 2}"#,
            r#"{"schema_version": 1, "alphas": [1.5]}"#,
            r#"{"schema_version": 1, "tags": []}"#,
            r#"{"schema_version": 1, "bogus": 3}"#,
            r#"{"schema_version": 1, "weighting": {"kind": "fixed", "alpha": -1}}"#,
            r#"{"schema_version": 1, "solver": {"cfl": 2.0}}"#,
            r#"{"schema_version": 1, "tags": ["C9"]}"#,
            "not json",
        ] {
            let e = ExperimentConfig::from_json(bad.as_bytes()).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}");
        }
    }
}
