//! Config ingestion: JSON file plus flag overrides, flags winning.

use crate::LabError;
use entropylab_core::{DyadicCube, ExperimentKind, SparseSpec, WeightKind, WeightSpec};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const DEFAULT_DIMENSION: u32 = 1;
pub const DEFAULT_DEPTH: u32 = 4;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Constants,
    Norm,
    Verify,
    Search,
    Gen,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Constants => "constants",
            CommandKind::Norm => "norm",
            CommandKind::Verify => "verify",
            CommandKind::Search => "search",
            CommandKind::Gen => "gen",
        }
    }

    fn parse(name: &str) -> Result<Self, LabError> {
        match name {
            "constants" => Ok(CommandKind::Constants),
            "norm" => Ok(CommandKind::Norm),
            "verify" => Ok(CommandKind::Verify),
            "search" => Ok(CommandKind::Search),
            "gen" => Ok(CommandKind::Gen),
            other => Err(LabError::Config(format!("unknown command `{other}`"))),
        }
    }
}

/// On-disk config. Every field optional so files can be partial; unknown
/// fields are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub command: Option<String>,
    pub target: Option<String>,
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub dimension: Option<u32>,
    pub depth: Option<u32>,
    pub sigma: Option<WeightKind>,
    pub w: Option<WeightKind>,
    pub sparse: Option<SparseSpec>,
    pub q0: Option<DyadicCube>,
    pub trials: Option<u32>,
    pub max_iterations: Option<u32>,
    pub tolerance: Option<f64>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        // serde_json errors carry line/column in their Display form.
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("config: {e}")))
    }
}

/// Per-run flag values; `None` means "not given on the command line".
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub target: Option<String>,
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub dimension: Option<u32>,
    pub depth: Option<u32>,
    pub trials: Option<u32>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
}

/// Fully merged run description; still lazy about per-command requirements,
/// which `require_*` enforce at dispatch.
#[derive(Clone, Debug)]
pub struct Settings {
    pub command: CommandKind,
    pub target: Option<ExperimentKind>,
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub dimension: u32,
    pub depth: u32,
    pub sigma: WeightKind,
    pub w: WeightKind,
    pub sparse: Option<SparseSpec>,
    pub q0: Option<DyadicCube>,
    pub trials: Option<u32>,
    pub max_iterations: Option<u32>,
    pub tolerance: Option<f64>,
    pub budget: u64,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub threads: usize,
}

pub fn parse_target(token: &str) -> Result<ExperimentKind, LabError> {
    match token {
        "max" | "maximal-bound" => Ok(ExperimentKind::MaximalBound),
        "separated" | "separated-bump-bound" => Ok(ExperimentKind::SeparatedBumpBound),
        "joint-sum" | "joint-bump-sum-bound" => Ok(ExperimentKind::JointBumpSumBound),
        "ap-ainfty" | "ap-ainfty-bound" => Ok(ExperimentKind::ApAinftyBound),
        other => Err(LabError::Config(format!(
            "unknown target `{other}` (expected max, separated, joint-sum or ap-ainfty)"
        ))),
    }
}

fn check_positive(name: &str, value: Option<f64>) -> Result<(), LabError> {
    if let Some(v) = value {
        if !(v.is_finite() && v > 0.0) {
            return Err(LabError::Config(format!("field `{name}` must be positive and finite")));
        }
    }
    Ok(())
}

impl Settings {
    pub fn merge(
        command: CommandKind,
        file: Option<FileConfig>,
        flags: Overrides,
        env_threads: Option<usize>,
    ) -> Result<Self, LabError> {
        let file = file.unwrap_or_default();
        if let Some(named) = &file.command {
            if CommandKind::parse(named)? != command {
                return Err(LabError::Config(format!(
                    "config file is for command `{named}`, invoked as `{}`",
                    command.name()
                )));
            }
        }
        let target_token = flags.target.or(file.target);
        let target = target_token.as_deref().map(parse_target).transpose()?;
        if target.is_some() && !matches!(command, CommandKind::Verify | CommandKind::Search) {
            return Err(LabError::Config(format!(
                "field `target` is only used by verify and search, not `{}`",
                command.name()
            )));
        }
        let p = flags.p.or(file.p);
        let delta = flags.delta.or(file.delta);
        check_positive("delta", delta)?;
        if let Some(p) = p {
            if !(p.is_finite() && p > 1.0) {
                return Err(LabError::Config(format!("field `p` must lie in (1, inf), got {p}")));
            }
        }
        check_positive("tolerance", file.tolerance)?;
        let settings = Settings {
            command,
            target,
            p,
            delta,
            dimension: flags.dimension.or(file.dimension).unwrap_or(DEFAULT_DIMENSION),
            depth: flags.depth.or(file.depth).unwrap_or(DEFAULT_DEPTH),
            sigma: file.sigma.unwrap_or(WeightKind::Constant),
            w: file.w.unwrap_or(WeightKind::Constant),
            sparse: file.sparse,
            q0: file.q0,
            trials: flags.trials.or(file.trials),
            max_iterations: file.max_iterations,
            tolerance: file.tolerance,
            budget: flags.budget.or(file.budget).unwrap_or(0),
            seed: flags.seed.or(file.seed),
            out: flags.out.or(file.out),
            format: flags.format.or(file.format).unwrap_or(Format::Json),
            threads: flags.threads.or(file.threads).or(env_threads).unwrap_or(1),
        };
        Ok(settings)
    }

    pub fn require_p(&self) -> Result<f64, LabError> {
        self.p
            .ok_or_else(|| LabError::Config("missing required field `p`".into()))
    }

    pub fn require_delta(&self) -> Result<f64, LabError> {
        self.delta
            .ok_or_else(|| LabError::Config("missing required field `delta`".into()))
    }

    pub fn require_seed(&self) -> Result<u64, LabError> {
        self.seed
            .ok_or_else(|| LabError::Config("missing required field `seed`".into()))
    }

    pub fn require_target(&self) -> Result<ExperimentKind, LabError> {
        self.target
            .ok_or_else(|| LabError::Config("missing required field `target`".into()))
    }

    pub fn sigma_spec(&self) -> WeightSpec {
        WeightSpec {
            dimension: self.dimension,
            depth: self.depth,
            kind: self.sigma.clone(),
        }
    }

    pub fn w_spec(&self) -> WeightSpec {
        WeightSpec {
            dimension: self.dimension,
            depth: self.depth,
            kind: self.w.clone(),
        }
    }

    pub fn iteration_params(&self) -> Result<entropylab_core::IterationParams, LabError> {
        let defaults = entropylab_core::IterationParams::default();
        let params = entropylab_core::IterationParams {
            trials: self.trials.unwrap_or(defaults.trials),
            max_iterations: self.max_iterations.unwrap_or(defaults.max_iterations),
            tolerance: self.tolerance.unwrap_or(defaults.tolerance),
            seed: self.require_seed()?,
        };
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = FileConfig::parse(r#"{"p": 2.0, "qq": 1}"#).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("qq"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn flags_override_file_values() {
        let file = FileConfig::parse(r#"{"p": 2.0, "seed": 1, "depth": 5}"#).unwrap();
        let flags = Overrides {
            p: Some(3.0),
            ..Overrides::default()
        };
        let s = Settings::merge(CommandKind::Norm, Some(file), flags, None).unwrap();
        assert_eq!(s.p, Some(3.0));
        assert_eq!(s.seed, Some(1));
        assert_eq!(s.depth, 5);
    }

    #[test]
    fn command_mismatch_is_a_config_error() {
        let file = FileConfig::parse(r#"{"command": "norm"}"#).unwrap();
        let err = Settings::merge(CommandKind::Gen, Some(file), Overrides::default(), None)
            .unwrap_err();
        assert!(format!("{err}").contains("norm"));
    }

    #[test]
    fn env_threads_fills_in_last() {
        let s = Settings::merge(CommandKind::Gen, None, Overrides::default(), Some(3)).unwrap();
        assert_eq!(s.threads, 3);
        let flags = Overrides {
            threads: Some(2),
            ..Overrides::default()
        };
        let s = Settings::merge(CommandKind::Gen, None, flags, Some(3)).unwrap();
        assert_eq!(s.threads, 2);
    }

    #[test]
    fn config_round_trip_is_idempotent() {
        let text = r#"{
            "command": "verify",
            "target": "max",
            "p": 1.5,
            "delta": 0.5,
            "dimension": 1,
            "depth": 6,
            "sigma": {"kind": "lognormal", "seed": 11, "variance": 1.0},
            "w": {"kind": "spike", "leaf": 3, "mass": 2.0},
            "seed": 7
        }"#;
        let parsed = FileConfig::parse(text).unwrap();
        let reserialized = serde_json::to_string(&parsed).unwrap();
        assert_eq!(FileConfig::parse(&reserialized).unwrap(), parsed);
    }

    #[test]
    fn target_tokens_cover_all_checkers() {
        assert_eq!(parse_target("max").unwrap(), ExperimentKind::MaximalBound);
        assert_eq!(
            parse_target("separated").unwrap(),
            ExperimentKind::SeparatedBumpBound
        );
        assert_eq!(
            parse_target("joint-sum").unwrap(),
            ExperimentKind::JointBumpSumBound
        );
        assert_eq!(
            parse_target("ap-ainfty").unwrap(),
            ExperimentKind::ApAinftyBound
        );
        assert!(parse_target("everything").is_err());
    }

    #[test]
    fn validation_errors_name_the_field() {
        let s = Settings::merge(CommandKind::Norm, None, Overrides::default(), None).unwrap();
        assert!(format!("{}", s.require_p().unwrap_err()).contains("`p`"));
        assert!(format!("{}", s.require_seed().unwrap_err()).contains("`seed`"));
        let bad = FileConfig::parse(r#"{"p": 0.5}"#).unwrap();
        let err =
            Settings::merge(CommandKind::Norm, Some(bad), Overrides::default(), None).unwrap_err();
        assert!(format!("{err}").contains("`p`"));
    }
}
