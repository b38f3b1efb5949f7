//! The JSON run configuration and its validation.

use gglab_core::damping::{build_mask, BumpProfile, DampingError};
use gglab_core::timestepper::{NonlinearForm, Scheme};
use gglab_core::{
    DampingConfig, DampingKind, DampingTarget, Grid, InitialCondition, Nonlinearity, StepperConfig,
    SystemParams,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema: u32,
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub params: SystemParams,
    #[serde(default = "classic")]
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub damping: DampingSection,
    pub ic: InitialCondition,
    #[serde(default)]
    pub outputs: OutputSection,
}

fn classic() -> Nonlinearity {
    Nonlinearity::Classic
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "half")]
    pub theta: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "one_step")]
    pub record_stride: usize,
    #[serde(default = "default_floor")]
    pub energy_floor: f64,
    #[serde(default)]
    pub nonlinear_form: NonlinearForm,
    #[serde(default = "default_cfl")]
    pub cfl_guard: f64,
}

fn half() -> f64 {
    0.5
}

fn one_step() -> usize {
    1
}

fn default_floor() -> f64 {
    1e-14
}

fn default_cfl() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DampingKindName {
    #[default]
    None,
    MeanZeroProjection,
    Multiplicative,
}

/// Flat damping description; `b0` and `profile` only apply to
/// multiplicative damping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSection {
    #[serde(default)]
    pub kind: DampingKindName,
    #[serde(default = "default_omega")]
    pub omega: [f64; 2],
    #[serde(default)]
    pub target: DampingTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<BumpProfile>,
}

fn default_omega() -> [f64; 2] {
    [0.3, 0.7]
}

impl Default for DampingSection {
    fn default() -> Self {
        Self {
            kind: DampingKindName::None,
            omega: default_omega(),
            target: DampingTarget::Both,
            b0: None,
            profile: None,
        }
    }
}

impl DampingSection {
    pub fn to_config(&self) -> DampingConfig {
        let kind = match self.kind {
            DampingKindName::None => DampingKind::None,
            DampingKindName::MeanZeroProjection => DampingKind::MeanZeroProjection,
            DampingKindName::Multiplicative => DampingKind::Multiplicative {
                b0: self.b0.unwrap_or(f64::NAN),
                profile: self.profile.unwrap_or_default(),
            },
        };
        DampingConfig {
            kind,
            omega: (self.omega[0], self.omega[1]),
            target: self.target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub snapshots: bool,
    #[serde(default = "default_snapshot_stride")]
    pub snapshot_stride: usize,
    /// Fraction of the recorded time span used by the decay fit.
    #[serde(default = "default_fit_window")]
    pub fit_window: [f64; 2],
    /// Horizon of the observability quotient; defaults to `time.t_end`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quotient_horizon: Option<f64>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_snapshot_stride() -> usize {
    1000
}

fn default_fit_window() -> [f64; 2] {
    [0.2, 1.0]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            snapshots: false,
            snapshot_stride: default_snapshot_stride(),
            fit_window: default_fit_window(),
            quotient_horizon: None,
        }
    }
}

/// One failed invariant, tagged with the config path it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ValidationErrors(pub Vec<Issue>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(Issue::to_string).collect();
        write!(f, "{}", lines.join("\n"))
    }
}

impl ValidationErrors {
    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|i| i.to_string().contains(needle))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config:\n{0}")]
    Validation(#[from] ValidationErrors),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("preset '{0}' is a {1}, not a {2}")]
    WrongPresetKind(String, &'static str, &'static str),
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, ValidationErrors> {
        Grid::new(self.grid.length, self.grid.n).map_err(|e| {
            ValidationErrors(vec![Issue {
                path: "grid".into(),
                message: e.to_string(),
            }])
        })
    }

    pub fn stepper_config(&self) -> StepperConfig {
        StepperConfig {
            dt: self.time.dt,
            theta: self.time.theta,
            scheme: self.time.scheme,
            nonlinear_form: self.time.nonlinear_form,
            cfl_guard: self.time.cfl_guard,
        }
    }

    pub fn damping_config(&self) -> DampingConfig {
        self.damping.to_config()
    }

    pub fn quotient_horizon(&self) -> f64 {
        self.outputs.quotient_horizon.unwrap_or(self.time.t_end)
    }

    /// Every violated invariant, not just the first.
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut issues = Vec::new();
        let mut push = |path: &str, message: String| {
            issues.push(Issue {
                path: path.to_string(),
                message,
            })
        };

        if self.schema != SCHEMA_VERSION {
            push(
                "schema",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema
                ),
            );
        }

        let grid = Grid::new(self.grid.length, self.grid.n);
        if let Err(e) = &grid {
            push("grid", e.to_string());
        }

        let t = &self.time;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            push("time.dt", format!("must be > 0 (got {})", t.dt));
        }
        if !(t.t_end.is_finite() && t.t_end >= 0.0) {
            push("time.t_end", format!("must be >= 0 (got {})", t.t_end));
        }
        if !(0.5..=1.0).contains(&t.theta) {
            push(
                "time.theta",
                format!("must lie in [0.5, 1] (got {})", t.theta),
            );
        }
        if t.record_stride == 0 {
            push("time.record_stride", "must be >= 1".into());
        }
        if !(t.energy_floor >= 0.0 && t.energy_floor < 1.0) {
            push(
                "time.energy_floor",
                format!("must lie in [0, 1) (got {})", t.energy_floor),
            );
        }
        if t.cfl_guard.is_nan() || t.cfl_guard <= 0.0 {
            push(
                "time.cfl_guard",
                format!("must be > 0 (got {})", t.cfl_guard),
            );
        }

        for e in self.params.violations() {
            let msg = match e {
                gglab_core::model::ModelError::CoercivityViolation { value } => {
                    format!("1 - a3^2*b2 must be > 0 (got {value})")
                }
                other => other.to_string(),
            };
            push("params", msg);
        }

        if let Err(e) = self.nonlinearity.validate() {
            push("nonlinearity.p", e.to_string());
        }

        let d = &self.damping;
        if d.kind != DampingKindName::Multiplicative && (d.b0.is_some() || d.profile.is_some()) {
            push(
                "damping.b0",
                "b0 and profile only apply to multiplicative damping".into(),
            );
        }
        if d.kind == DampingKindName::Multiplicative {
            match d.b0 {
                Some(b0) if b0.is_finite() && b0 > 0.0 => {}
                Some(b0) => push("damping.b0", format!("must be > 0 (got {b0})")),
                None => push("damping.b0", "required for multiplicative damping".into()),
            }
        }
        if d.kind != DampingKindName::None {
            if let Ok(g) = &grid {
                match build_mask(g, (d.omega[0], d.omega[1])) {
                    Ok(_) => {}
                    Err(DampingError::EmptyOmega { .. }) => push("damping.omega", "empty".into()),
                    Err(e) => push("damping.omega", e.to_string()),
                }
            }
        }

        for (path, profile) in [("ic.u", &self.ic.u), ("ic.v", &self.ic.v)] {
            if let Err(e) = profile.validate() {
                push(path, e.to_string());
            }
        }
        if let Some(e) = self.ic.energy {
            if !(e.is_finite() && e >= 0.0) {
                push("ic.energy", format!("must be >= 0 (got {e})"));
            }
        }

        let o = &self.outputs;
        let [lo, hi] = o.fit_window;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            push(
                "outputs.fit_window",
                format!("must satisfy 0 <= lo < hi <= 1 (got [{lo}, {hi}])"),
            );
        }
        if o.snapshot_stride == 0 {
            push("outputs.snapshot_stride", "must be >= 1".into());
        } else if o.snapshots
            && t.record_stride > 0
            && !o.snapshot_stride.is_multiple_of(t.record_stride)
        {
            push(
                "outputs.snapshot_stride",
                "must be a multiple of time.record_stride".into(),
            );
        }
        if let Some(h) = o.quotient_horizon {
            if !(h.is_finite() && h > 0.0) {
                push("outputs.quotient_horizon", format!("must be > 0 (got {h})"));
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(issues))
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn read_text(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and validates a run config from a file or a `preset:NAME` reference.
pub fn load_config(source: &str) -> Result<RunConfig, ConfigError> {
    if let Some(name) = source.strip_prefix("preset:") {
        return crate::presets::run_preset(name);
    }
    RunConfig::from_json(&read_text(Path::new(source))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"L": 1.0, "n": 64},
        "time": {"dt": 1e-3, "t_end": 0.1},
        "ic": {"u": {"kind": "zero"}, "v": {"kind": "zero"}}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.schema, 1);
        assert_eq!(cfg.time.theta, 0.5);
        assert_eq!(cfg.time.record_stride, 1);
        assert_eq!(cfg.time.scheme, Scheme::Ars222);
        assert_eq!(cfg.nonlinearity, Nonlinearity::Classic);
        assert_eq!(cfg.damping.kind, DampingKindName::None);
        assert_eq!(cfg.params, SystemParams::default());
        assert_eq!(cfg.outputs.fit_window, [0.2, 1.0]);
        assert_eq!(cfg.quotient_horizon(), 0.1);
    }

    #[test]
    fn roundtrip_is_lossless() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn collects_every_issue() {
        let text = r#"{
            "grid": {"L": 1.0, "n": 64},
            "time": {"dt": -1.0, "t_end": 0.1, "theta": 0.2},
            "params": {"a1": 0, "a2": 0, "a3": 1.0, "b1": 1.0, "b2": 1.0, "r": 0},
            "damping": {"kind": "mean_zero_projection", "omega": [0.9, 0.9]},
            "ic": {"u": {"kind": "zero"}, "v": {"kind": "zero"}}
        }"#;
        let err = match RunConfig::from_json(text) {
            Err(ConfigError::Validation(v)) => v,
            other => panic!("{other:?}"),
        };
        assert!(err.mentions("params: 1 - a3^2*b2 must be > 0"));
        assert!(err.mentions("damping.omega: empty"));
        assert!(err.mentions("time.dt"));
        assert!(err.mentions("time.theta"));
        assert_eq!(err.0.len(), 4);
    }

    #[test]
    fn multiplicative_needs_b0() {
        let text = r#"{
            "grid": {"L": 1.0, "n": 64},
            "time": {"dt": 1e-3, "t_end": 0.1},
            "damping": {"kind": "multiplicative", "omega": [0.3, 0.7]},
            "ic": {"u": {"kind": "zero"}, "v": {"kind": "zero"}}
        }"#;
        assert!(matches!(
            RunConfig::from_json(text),
            Err(ConfigError::Validation(v)) if v.mentions("damping.b0")
        ));
    }

    #[test]
    fn malformed_is_parse_error() {
        assert!(matches!(
            RunConfig::from_json("{\"grid\": 3}"),
            Err(ConfigError::Parse(_))
        ));
    }
}
