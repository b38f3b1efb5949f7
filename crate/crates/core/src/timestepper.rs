//! IMEX time integration: the stiff linear dispersive operator is implicit,
//! nonlinear fluxes and damping are explicit.
//!
//! Two schemes are offered. [`Scheme::Ars222`] (the default) is the
//! two-stage, L-stable, second-order IMEX Runge–Kutta method of Ascher,
//! Ruuth and Spiteri; it damps the stiff boundary-localized modes of the
//! third-derivative closure instead of letting them ring. [`Scheme::Theta`]
//! is the classical θ-scheme for the linear part with a Heun
//! predictor–corrector for the explicit terms.

use crate::banded::BandedOp;
use crate::banded::{BandedError, BandedLu};
use crate::damping::{DampingConfig, DampingError, DampingOperator};
use crate::diagnostics;
use crate::discretization::{assemble_linear, build_d1, LinearSystemOp};
use crate::model::{Grid, ModelError, Nonlinearity, State, SystemParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Damping(#[from] DampingError),
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
    #[error("linear solve failed: {0}")]
    SolveFailure(#[from] BandedError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("non-finite field at step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("t_end ({t_end}) precedes the initial time ({t0})")]
    InvalidHorizon { t0: f64, t_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Ars222,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearForm {
    Conservative,
    #[default]
    SkewSplit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    /// Implicitness of [`Scheme::Theta`]; ignored by ARS(2,2,2).
    pub theta: f64,
    pub scheme: Scheme,
    pub nonlinear_form: NonlinearForm,
    /// Largest tolerated `dt · max(|u|, |v|) / dx` before a warning.
    pub cfl_guard: f64,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(StepError::InvalidConfig(format!(
                "dt must be positive (got {})",
                self.dt
            )));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(StepError::InvalidConfig(format!(
                "theta must lie in [0.5, 1] (got {})",
                self.theta
            )));
        }
        if self.cfl_guard.is_nan() || self.cfl_guard <= 0.0 {
            return Err(StepError::InvalidConfig(format!(
                "cfl_guard must be positive (got {})",
                self.cfl_guard
            )));
        }
        Ok(())
    }
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            theta: 0.5,
            scheme: Scheme::Ars222,
            nonlinear_form: NonlinearForm::SkewSplit,
            cfl_guard: 0.5,
        }
    }
}

/// Diagonal coefficient `γ = 1 - 1/√2` of ARS(2,2,2).
pub const ARS_GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
/// Explicit weight `δ = 1 - 1/(2γ)` of ARS(2,2,2).
pub const ARS_DELTA: f64 = 1.0 - 1.0 / (2.0 * ARS_GAMMA);

/// LU factors of `I - c·dt·A` for a fixed step size.
#[derive(Debug, Clone)]
pub struct FactoredSystem {
    matrix: BandedOp,
    lu: BandedLu,
    coeff: f64,
}

impl FactoredSystem {
    pub fn new(linear: &LinearSystemOp, coeff: f64) -> Result<Self, BandedError> {
        let matrix = linear.matrix().shifted(-coeff, 1.0);
        let lu = matrix.factor()?;
        Ok(Self { matrix, lu, coeff })
    }

    /// `c·dt` in `I - c·dt·A`.
    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn matrix(&self) -> &BandedOp {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, BandedError> {
        self.lu.solve(rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepWarning {
    CflGuardTripped { courant: f64 },
}

/// Everything needed to advance one configuration: operators, damping and
/// the factored implicit matrix.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    params: SystemParams,
    nonlinearity: Nonlinearity,
    config: StepperConfig,
    linear: LinearSystemOp,
    d1: BandedOp,
    damping: DampingOperator,
    system: FactoredSystem,
}

impl Stepper {
    pub fn new(
        grid: Grid,
        params: SystemParams,
        nonlinearity: Nonlinearity,
        damping: &DampingConfig,
        config: StepperConfig,
    ) -> Result<Self, StepError> {
        config.validate()?;
        nonlinearity.validate()?;
        let linear = assemble_linear(&params, &grid)?;
        let d1 = build_d1(&grid)?;
        let damping = DampingOperator::new(damping, &grid)?;
        let c = match config.scheme {
            Scheme::Ars222 => ARS_GAMMA,
            Scheme::Theta => config.theta,
        };
        let system = FactoredSystem::new(&linear, c * config.dt)?;
        Ok(Self {
            grid,
            params,
            nonlinearity,
            config,
            linear,
            d1,
            damping,
            system,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn linear(&self) -> &LinearSystemOp {
        &self.linear
    }

    pub fn damping(&self) -> &DampingOperator {
        &self.damping
    }

    pub fn system(&self) -> &FactoredSystem {
        &self.system
    }

    /// Nonlinear contributions to `(du/dt, dv/dt)`, already negated and with
    /// the `v` part divided by `b1`.
    pub fn nonlinear_rhs(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        nonlinear_terms(
            u,
            v,
            &self.params,
            &self.nonlinearity,
            self.config.nonlinear_form,
            &self.d1,
        )
    }

    /// Explicit part `N(U) - damping` in packed form.
    fn explicit(&self, x: &[f64]) -> Vec<f64> {
        let (u, v) = self.linear.unpack(x);
        let (mut nu, mut nv) = self.nonlinear_rhs(&u, &v);
        if self.damping.is_active() {
            let (fu, fv) = self.damping.forces(&u, &v);
            let inv_b1 = 1.0 / self.params.b1;
            for i in 0..nu.len() {
                nu[i] -= fu[i];
                nv[i] -= inv_b1 * fv[i];
            }
        }
        self.linear.pack(&nu, &nv)
    }

    /// Full semi-discrete right-hand side at `state`, as node vectors.
    pub fn rhs(&self, state: &State) -> (Vec<f64>, Vec<f64>) {
        let x = self.linear.pack(&state.u, &state.v);
        let ax = self.linear.matrix().matvec(&x);
        let f = self.explicit(&x);
        let sum: Vec<f64> = ax.iter().zip(&f).map(|(a, b)| a + b).collect();
        self.linear.unpack(&sum)
    }

    pub fn courant(&self, state: &State) -> f64 {
        self.config.dt * state.sup_norm() / self.grid.dx()
    }

    /// Advances `state` by one step of size `dt`.
    pub fn step(&self, state: &State) -> Result<(State, Option<StepWarning>), StepError> {
        let courant = self.courant(state);
        let warning =
            (courant > self.config.cfl_guard).then_some(StepWarning::CflGuardTripped { courant });
        let dt = self.config.dt;
        let x0 = self.linear.pack(&state.u, &state.v);
        let a = self.linear.matrix();
        let x1 = match self.config.scheme {
            Scheme::Ars222 => {
                let k1 = self.explicit(&x0);
                let rhs: Vec<f64> = x0
                    .iter()
                    .zip(&k1)
                    .map(|(x, k)| x + ARS_GAMMA * dt * k)
                    .collect();
                let y2 = self.system.solve(&rhs)?;
                let k2 = self.explicit(&y2);
                let ay2 = a.matvec(&y2);
                let rhs: Vec<f64> = (0..x0.len())
                    .map(|i| {
                        x0[i]
                            + dt * (ARS_DELTA * k1[i] + (1.0 - ARS_DELTA) * k2[i])
                            + (1.0 - ARS_GAMMA) * dt * ay2[i]
                    })
                    .collect();
                self.system.solve(&rhs)?
            }
            Scheme::Theta => {
                let theta = self.config.theta;
                let ax0 = a.matvec(&x0);
                let base: Vec<f64> = x0
                    .iter()
                    .zip(&ax0)
                    .map(|(x, ax)| x + (1.0 - theta) * dt * ax)
                    .collect();
                let f0 = self.explicit(&x0);
                let pred: Vec<f64> = base.iter().zip(&f0).map(|(b, f)| b + dt * f).collect();
                let xp = self.system.solve(&pred)?;
                let fp = self.explicit(&xp);
                let corr: Vec<f64> = (0..x0.len())
                    .map(|i| base[i] + 0.5 * dt * (f0[i] + fp[i]))
                    .collect();
                self.system.solve(&corr)?
            }
        };
        let (u, v) = self.linear.unpack(&x1);
        let mut next = State {
            t: state.t + dt,
            u,
            v,
        };
        next.enforce_dirichlet();
        Ok((next, warning))
    }
}

/// Nonlinear terms for a given flux form. See [`Stepper::nonlinear_rhs`].
///
/// The skew-split form mixes conservative and advective discretizations with
/// weights that make every flux exactly neutral in the discrete energy
/// (central `D1` is skew-adjoint on fields vanishing at both ends):
/// `[(p+1) D A(u) + a(u) D u] / (p+2)` for the self-interaction and
/// `[2 D(fg) + f D g + g D f] / 3` for each quadratic product.
pub fn nonlinear_terms(
    u: &[f64],
    v: &[f64],
    params: &SystemParams,
    nl: &Nonlinearity,
    form: NonlinearForm,
    d1: &BandedOp,
) -> (Vec<f64>, Vec<f64>) {
    let len = u.len();
    if nl.is_off() {
        return (vec![0.0; len], vec![0.0; len]);
    }
    let SystemParams { a1, a2, b1, b2, .. } = *params;
    let d = |f: &[f64]| d1.matvec(f);
    let au: Vec<f64> = u.iter().map(|&s| nl.primitive(s)).collect();
    let av: Vec<f64> = v.iter().map(|&s| nl.primitive(s)).collect();
    let uu: Vec<f64> = u.iter().map(|s| 0.5 * s * s).collect();
    let vv: Vec<f64> = v.iter().map(|s| 0.5 * s * s).collect();
    let uv: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
    let (d_au, d_av, d_uu, d_vv, d_uv) = (d(&au), d(&av), d(&uu), d(&vv), d(&uv));
    let mut nu = vec![0.0; len];
    let mut nv = vec![0.0; len];
    match form {
        NonlinearForm::Conservative => {
            for i in 0..len {
                nu[i] = -(d_au[i] + a1 * d_vv[i] + a2 * d_uv[i]);
                nv[i] = -(d_av[i] + b2 * a2 * d_uu[i] + b2 * a1 * d_uv[i]) / b1;
            }
        }
        NonlinearForm::SkewSplit => {
            let du = d(u);
            let dv = d(v);
            let p = nl.degree();
            let (wc, wa) = ((p + 1.0) / (p + 2.0), 1.0 / (p + 2.0));
            let third = 1.0 / 3.0;
            for i in 0..len {
                let self_u = wc * d_au[i] + wa * nl.eval(u[i]) * du[i];
                let self_v = wc * d_av[i] + wa * nl.eval(v[i]) * dv[i];
                let vvx = third * (2.0 * d_vv[i] + v[i] * dv[i]);
                let uux = third * (2.0 * d_uu[i] + u[i] * du[i]);
                let uvx = third * (2.0 * d_uv[i] + u[i] * dv[i] + v[i] * du[i]);
                nu[i] = -(self_u + a1 * vvx + a2 * uvx);
                nv[i] = -(self_v + b2 * a2 * uux + b2 * a1 * uvx) / b1;
            }
        }
    }
    (nu, nv)
}

/// Called with every recorded state.
pub trait Observer {
    fn observe(&mut self, step: usize, state: &State, stepper: &Stepper);
}

impl<F: FnMut(usize, &State, &Stepper)> Observer for F {
    fn observe(&mut self, step: usize, state: &State, stepper: &Stepper) {
        self(step, state, stepper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    /// Observers fire every `record_stride` steps (and at step 0).
    pub record_stride: usize,
    /// Stop once `E < energy_floor · E(0)`; `0` disables.
    pub energy_floor: f64,
}

impl RunOptions {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            record_stride: 1,
            energy_floor: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    EnergyFloor,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub final_state: State,
    pub stop_reason: StopReason,
    pub cfl_warnings: usize,
    pub max_courant: f64,
}

/// Number of steps needed to reach `t_end` from `t0`.
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> usize {
    let steps = (t_end - t0) / dt;
    let rounded = steps.round();
    if (steps - rounded).abs() < 1e-9 * steps.max(1.0) {
        rounded as usize
    } else {
        steps.ceil() as usize
    }
}

/// Integrates from `ic` to `opts.t_end`, feeding recorded states to
/// `observers`.
pub fn run(
    stepper: &Stepper,
    ic: &State,
    opts: &RunOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<RunSummary, RunError> {
    if opts.t_end.is_nan() || opts.t_end < ic.t {
        return Err(RunError::InvalidHorizon {
            t0: ic.t,
            t_end: opts.t_end,
        });
    }
    let stride = opts.record_stride.max(1);
    let dt = stepper.config().dt;
    let total = step_count(ic.t, opts.t_end, dt);
    let params = stepper.params();
    let grid = stepper.grid();
    let e0 = diagnostics::energy(ic, params, grid);
    let floor = if opts.energy_floor > 0.0 && e0 > 0.0 {
        opts.energy_floor * e0
    } else {
        0.0
    };

    let mut state = ic.clone();
    state.enforce_dirichlet();
    for obs in observers.iter_mut() {
        obs.observe(0, &state, stepper);
    }
    let mut summary = RunSummary {
        steps: 0,
        final_state: state.clone(),
        stop_reason: StopReason::Completed,
        cfl_warnings: 0,
        max_courant: stepper.courant(&state),
    };
    for k in 1..=total {
        let (mut next, warning) = stepper.step(&state)?;
        next.t = ic.t + k as f64 * dt;
        if !next.is_finite() {
            return Err(RunError::BlowUp { step: k, t: next.t });
        }
        if let Some(StepWarning::CflGuardTripped { courant }) = warning {
            summary.cfl_warnings += 1;
            log::warn!("step {k}: courant number {courant:.3e} exceeds guard");
        }
        state = next;
        summary.steps = k;
        summary.max_courant = summary.max_courant.max(stepper.courant(&state));
        if k % stride == 0 {
            for obs in observers.iter_mut() {
                obs.observe(k, &state, stepper);
            }
        }
        if floor > 0.0 && diagnostics::energy(&state, params, grid) < floor {
            summary.stop_reason = StopReason::EnergyFloor;
            break;
        }
    }
    summary.final_state = state;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::DampingConfig;
    use crate::model::{InitialCondition, Profile, Window};

    fn smooth_ic(grid: &Grid, params: &SystemParams, e: f64) -> State {
        InitialCondition {
            u: Profile::RandomModes {
                seed: 5,
                modes: 2,
                amplitude: 1.0,
                window: Some(Window { left: 6, right: 6 }),
            },
            v: Profile::RandomModes {
                seed: 6,
                modes: 2,
                amplitude: 1.0,
                window: Some(Window { left: 6, right: 6 }),
            },
            energy: Some(e),
        }
        .build(grid, params)
        .unwrap()
    }

    fn coupled() -> SystemParams {
        SystemParams {
            a1: 1.0,
            a2: 1.0,
            a3: 0.5,
            ..SystemParams::default()
        }
    }

    #[test]
    fn ars_constants() {
        use std::f64::consts::FRAC_1_SQRT_2;
        assert!((ARS_GAMMA - (1.0 - FRAC_1_SQRT_2)).abs() < 1e-15);
        assert!((ARS_DELTA + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(StepperConfig::new(0.0).validate().is_err());
        let c = StepperConfig {
            theta: 0.4,
            ..StepperConfig::new(1e-3)
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::new(1.0, 32).unwrap();
        for scheme in [Scheme::Ars222, Scheme::Theta] {
            let cfg = StepperConfig {
                scheme,
                ..StepperConfig::new(1e-3)
            };
            let s = Stepper::new(
                g,
                coupled(),
                Nonlinearity::Classic,
                &DampingConfig::projection(0.3, 0.7),
                cfg,
            )
            .unwrap();
            let (next, w) = s.step(&State::zeros(&g)).unwrap();
            assert!(w.is_none());
            assert_eq!(next.t, 1e-3);
            assert!(next.u.iter().chain(&next.v).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn factored_system_residual() {
        let g = Grid::new(1.0, 64).unwrap();
        let s = Stepper::new(
            g,
            coupled(),
            Nonlinearity::Classic,
            &DampingConfig::none(),
            StepperConfig::new(1e-3),
        )
        .unwrap();
        let sys = s.system();
        let rhs: Vec<f64> = (0..s.linear().dim())
            .map(|i| ((i * 37 % 11) as f64) - 5.0)
            .collect();
        let x = sys.solve(&rhs).unwrap();
        let r = sys.matrix().matvec(&x);
        let err: f64 = r
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(err <= 1e-11 * norm);
    }

    #[test]
    fn symmetric_nonlinear_terms() {
        let g = Grid::new(1.0, 64).unwrap();
        let p = SystemParams {
            a1: 0.7,
            a2: 0.7,
            ..SystemParams::default()
        };
        let d1 = build_d1(&g).unwrap();
        let u = smooth_ic(&g, &p, 1.0).u;
        for form in [NonlinearForm::Conservative, NonlinearForm::SkewSplit] {
            let (nu, nv) = nonlinear_terms(&u, &u, &p, &Nonlinearity::Classic, form, &d1);
            assert_eq!(nu, nv);
        }
    }

    #[test]
    fn skew_split_is_energy_neutral() {
        let g = Grid::new(1.0, 80).unwrap();
        let p = SystemParams {
            a1: 0.8,
            a2: -1.3,
            a3: 0.2,
            b1: 1.7,
            b2: 0.6,
            r: 0.0,
        };
        let d1 = build_d1(&g).unwrap();
        let s = smooth_ic(&g, &p, 1.0);
        for nl in [
            Nonlinearity::Classic,
            Nonlinearity::Power { p: 2.5 },
            Nonlinearity::CriticalU4,
        ] {
            let (nu, nv) = nonlinear_terms(&s.u, &s.v, &p, &nl, NonlinearForm::SkewSplit, &d1);
            let rate = p.b2 * g.dot(&s.u, &nu) + p.b1 * g.dot(&s.v, &nv);
            let scale = g.dot(&nu, &nu).sqrt();
            assert!(rate.abs() < 1e-13 * scale.max(1.0), "{nl:?}: {rate}");
        }
    }

    #[test]
    fn run_zero_horizon() {
        let g = Grid::new(1.0, 32).unwrap();
        let s = Stepper::new(
            g,
            coupled(),
            Nonlinearity::Classic,
            &DampingConfig::none(),
            StepperConfig::new(1e-3),
        )
        .unwrap();
        let ic = smooth_ic(&g, &coupled(), 1e-3);
        let mut count = 0;
        let mut obs = |_: usize, _: &State, _: &Stepper| count += 1;
        let sum = run(&s, &ic, &RunOptions::new(0.0), &mut [&mut obs]).unwrap();
        assert_eq!(sum.steps, 0);
        assert_eq!(count, 1);
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(0.0, 1.0, 1e-4), 10_000);
        assert_eq!(step_count(0.0, 0.3, 0.1), 3);
        assert_eq!(step_count(0.0, 0.35, 0.1), 4);
        assert_eq!(step_count(0.0, 0.0, 0.1), 0);
    }
}
