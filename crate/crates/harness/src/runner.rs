//! Single simulation runs and their result files.

use crate::config::RunConfig;
use crate::output::{self, OutputError};
use gglab_core::diagnostics::{
    energy, fill_residuals, max_abs_residual, observability_quotient, DecayFit, EnergyRecord,
    EnergyRecorder,
};
use gglab_core::timestepper::{run, RunError, StepError};
use gglab_core::{RunOptions, State, Stepper, StopReason};
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Invalid,
    BlowUp,
    SolveFailure,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Invalid => "invalid",
            RunStatus::BlowUp => "blowup",
            RunStatus::SolveFailure => "solve_failure",
        }
    }

    pub fn is_ok(self) -> bool {
        self == RunStatus::Ok
    }
}

/// Outcome of one run, including failures.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: RunStatus,
    pub message: Option<String>,
    pub e0: f64,
    pub records: Vec<EnergyRecord>,
    pub snapshots: Vec<State>,
    pub final_state: Option<State>,
    pub steps: usize,
    pub stop_reason: Option<StopReason>,
    pub fit: Option<DecayFit>,
    pub fit_error: Option<String>,
    /// `max |residual| / E(0)`; zero for zero data.
    pub max_residual: Option<f64>,
    pub quotient_horizon: f64,
    pub quotient: Option<f64>,
    pub multiplier_ratio: Option<f64>,
    pub max_h1_seminorm: f64,
    pub cfl_warnings: usize,
    pub max_courant: f64,
    pub wall_time_s: f64,
}

impl RunReport {
    pub(crate) fn failed(status: RunStatus, message: String, cfg: &RunConfig) -> Self {
        Self {
            status,
            message: Some(message),
            e0: f64::NAN,
            records: Vec::new(),
            snapshots: Vec::new(),
            final_state: None,
            steps: 0,
            stop_reason: None,
            fit: None,
            fit_error: None,
            max_residual: None,
            quotient_horizon: cfg.quotient_horizon(),
            quotient: None,
            multiplier_ratio: None,
            max_h1_seminorm: f64::NAN,
            cfl_warnings: 0,
            max_courant: f64::NAN,
            wall_time_s: 0.0,
        }
    }

    pub fn k(&self) -> Option<f64> {
        self.fit.map(|f| f.k)
    }
}

fn classify(err: &RunError) -> RunStatus {
    match err {
        RunError::BlowUp { .. } => RunStatus::BlowUp,
        RunError::Step(StepError::SolveFailure(_)) => RunStatus::SolveFailure,
        RunError::Step(_) | RunError::InvalidHorizon { .. } => RunStatus::Invalid,
    }
}

/// Records every `snapshot_stride` steps.
struct Snapshots {
    stride: usize,
    states: Vec<State>,
}

impl gglab_core::Observer for Snapshots {
    fn observe(&mut self, step: usize, state: &State, _: &Stepper) {
        if step.is_multiple_of(self.stride) {
            self.states.push(state.clone());
        }
    }
}

/// Runs the simulation in memory; nothing is written to disk.
pub fn simulate(cfg: &RunConfig) -> RunReport {
    let start = Instant::now();
    if let Err(e) = cfg.validate() {
        return RunReport::failed(RunStatus::Invalid, e.to_string(), cfg);
    }
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return RunReport::failed(RunStatus::Invalid, e.to_string(), cfg),
    };
    let stepper = match Stepper::new(
        grid,
        cfg.params,
        cfg.nonlinearity,
        &cfg.damping_config(),
        cfg.stepper_config(),
    ) {
        Ok(s) => s,
        Err(e) => {
            let status = match e {
                StepError::SolveFailure(_) => RunStatus::SolveFailure,
                _ => RunStatus::Invalid,
            };
            return RunReport::failed(status, e.to_string(), cfg);
        }
    };
    let ic = match cfg.ic.build(&grid, &cfg.params) {
        Ok(s) => s,
        Err(e) => return RunReport::failed(RunStatus::Invalid, e.to_string(), cfg),
    };
    let e0 = energy(&ic, &cfg.params, &grid);

    let opts = RunOptions {
        t_end: cfg.time.t_end,
        record_stride: cfg.time.record_stride,
        energy_floor: cfg.time.energy_floor,
    };
    let mut recorder = EnergyRecorder::new();
    let mut snaps = Snapshots {
        stride: cfg.outputs.snapshot_stride.max(1),
        states: Vec::new(),
    };
    let result = if cfg.outputs.snapshots {
        run(&stepper, &ic, &opts, &mut [&mut recorder, &mut snaps])
    } else {
        run(&stepper, &ic, &opts, &mut [&mut recorder])
    };
    let mut records = recorder.finish();
    let _ = fill_residuals(&mut records);

    let mut report = RunReport::failed(RunStatus::Ok, String::new(), cfg);
    report.message = None;
    report.e0 = e0;
    report.max_h1_seminorm = records.iter().map(|r| r.h1_seminorm).fold(0.0, f64::max);
    match result {
        Ok(summary) => {
            report.steps = summary.steps;
            report.stop_reason = Some(summary.stop_reason);
            report.cfl_warnings = summary.cfl_warnings;
            report.max_courant = summary.max_courant;
            report.final_state = Some(summary.final_state);
        }
        Err(e) => {
            report.status = classify(&e);
            report.message = Some(e.to_string());
            if let RunError::BlowUp { step, .. } = e {
                report.steps = step;
            }
        }
    }

    if report.status.is_ok() {
        analyse(cfg, &mut report, &records);
    }
    report.records = records;
    report.snapshots = snaps.states;
    report.wall_time_s = start.elapsed().as_secs_f64();
    report
}

fn analyse(cfg: &RunConfig, report: &mut RunReport, records: &[EnergyRecord]) {
    let e0 = report.e0;
    if e0 == 0.0 {
        report.fit = Some(DecayFit {
            c: 0.0,
            k: 0.0,
            r_squared: 0.0,
            window: window_times(cfg, records),
        });
        report.max_residual = Some(0.0);
        return;
    }
    let [lo, hi] = cfg.outputs.fit_window;
    match gglab_core::diagnostics::fit_decay(records, (lo, hi)) {
        Ok(fit) => report.fit = Some(fit),
        Err(e) => report.fit_error = Some(e.to_string()),
    }
    report.max_residual = max_abs_residual(records).ok().map(|m| m / e0);
    match observability_quotient(records, report.quotient_horizon, e0) {
        Ok(obs) => {
            report.quotient = Some(obs.quotient);
            report.multiplier_ratio = Some(obs.multiplier_ratio);
        }
        Err(e) => log::warn!("observability quotient unavailable: {e}"),
    }
}

fn window_times(cfg: &RunConfig, records: &[EnergyRecord]) -> (f64, f64) {
    let (t0, t1) = match (records.first(), records.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => (0.0, cfg.time.t_end),
    };
    let [lo, hi] = cfg.outputs.fit_window;
    (t0 + lo * (t1 - t0), t0 + hi * (t1 - t0))
}

/// Runs `cfg` and writes `energy.csv`, `fit.json`, `summary.json` and,
/// if enabled, `snapshots/` into `dir`.
pub fn run_single(cfg: &RunConfig, dir: &Path) -> Result<RunReport, OutputError> {
    let report = simulate(cfg);
    output::write_run(cfg, &report, dir)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gglab_core::InitialCondition;

    fn small(ic: InitialCondition) -> RunConfig {
        let mut cfg = crate::presets::run_preset("main-G-damped").unwrap();
        cfg.grid.n = 64;
        cfg.time.t_end = 0.5;
        cfg.time.dt = 1e-3;
        cfg.time.record_stride = 1;
        cfg.ic = ic;
        cfg
    }

    #[test]
    fn zero_data_reports_zero_rate() {
        let r = simulate(&small(InitialCondition::zero()));
        assert!(r.status.is_ok());
        assert!(r.records.iter().all(|r| r.energy == 0.0));
        assert_eq!(r.k(), Some(0.0));
        assert_eq!(r.max_residual, Some(0.0));
        assert_eq!(r.quotient, None);
    }

    #[test]
    fn invalid_config_is_reported_not_run() {
        let mut cfg = small(InitialCondition::zero());
        cfg.params.a3 = 2.0;
        let r = simulate(&cfg);
        assert_eq!(r.status, RunStatus::Invalid);
        assert!(r.message.unwrap().contains("1 - a3^2*b2"));
    }

    #[test]
    fn blowup_is_classified() {
        let mut cfg = crate::presets::run_preset("main-undamped").unwrap();
        cfg.grid.n = 64;
        cfg.time.dt = 0.05;
        cfg.time.t_end = 50.0;
        cfg.time.cfl_guard = 1e9;
        cfg.params.r = 0.0;
        cfg.time.theta = 0.5;
        cfg.time.scheme = gglab_core::Scheme::Theta;
        cfg.nonlinearity = gglab_core::Nonlinearity::Power { p: 4.0 };
        cfg.ic.energy = Some(1e4);
        let r = simulate(&cfg);
        assert_eq!(r.status, RunStatus::BlowUp, "{:?}", r.message);
        assert!(r.fit.is_none());
    }
}
