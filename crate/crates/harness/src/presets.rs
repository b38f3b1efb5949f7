//! Named configurations shipped with the binary.

use crate::config::{ConfigError, RunConfig};
use crate::sweep::SweepConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Run,
    Sweep,
}

impl PresetKind {
    pub fn name(self) -> &'static str {
        match self {
            PresetKind::Run => "run",
            PresetKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub kind: PresetKind,
    pub summary: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal, $kind:ident, $summary:literal) => {
        Preset {
            name: $name,
            kind: PresetKind::$kind,
            summary: $summary,
            text: include_str!(concat!("../presets/", $name, ".json")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!(
        "linear-check",
        Run,
        "linearized system, projection damping, short horizon"
    ),
    preset!(
        "main-G-damped",
        Run,
        "quadratic nonlinearity with projection damping on both fields"
    ),
    preset!(
        "main-undamped",
        Run,
        "main-G-damped without interior damping"
    ),
    preset!(
        "theoremB-bx",
        Run,
        "multiplicative damping b(x) = 1 on the damping region"
    ),
    preset!(
        "critical-u4-small",
        Run,
        "quartic nonlinearity u^4 at small energy"
    ),
    preset!(
        "open-problem-uonly",
        Run,
        "projection damping acting on u only"
    ),
    preset!(
        "open-problem-vonly",
        Run,
        "projection damping acting on v only"
    ),
    preset!(
        "p-sweep",
        Sweep,
        "nonlinearity exponent sweep at small energy"
    ),
    preset!(
        "target-sweep",
        Sweep,
        "damping target sweep: both, u only, v only"
    ),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

fn lookup(name: &str, want: PresetKind) -> Result<&'static Preset, ConfigError> {
    let p = find(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
    if p.kind != want {
        return Err(ConfigError::WrongPresetKind(
            name.to_string(),
            p.kind.name(),
            want.name(),
        ));
    }
    Ok(p)
}

pub fn run_preset(name: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_json(lookup(name, PresetKind::Run)?.text)
}

pub fn sweep_preset(name: &str) -> Result<SweepConfig, ConfigError> {
    SweepConfig::from_json(lookup(name, PresetKind::Sweep)?.text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            match p.kind {
                PresetKind::Run => {
                    run_preset(p.name).unwrap_or_else(|e| panic!("{}: {e}", p.name));
                }
                PresetKind::Sweep => {
                    sweep_preset(p.name).unwrap_or_else(|e| panic!("{}: {e}", p.name));
                }
            }
        }
    }

    #[test]
    fn kinds_are_checked() {
        assert!(matches!(
            run_preset("p-sweep"),
            Err(ConfigError::WrongPresetKind(..))
        ));
        assert!(matches!(
            run_preset("nope"),
            Err(ConfigError::UnknownPreset(_))
        ));
    }

    #[test]
    fn twins_differ_only_in_damping() {
        let damped = run_preset("main-G-damped").unwrap();
        let undamped = run_preset("main-undamped").unwrap();
        assert_eq!(damped.grid, undamped.grid);
        assert_eq!(damped.time, undamped.time);
        assert_eq!(damped.params, undamped.params);
        assert_eq!(damped.ic, undamped.ic);
        assert_ne!(damped.damping, undamped.damping);
    }
}
