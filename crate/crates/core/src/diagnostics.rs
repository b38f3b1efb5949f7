//! Energy, the dissipation identity, decay fits and observability quotients.

use crate::discretization::{boundary_slopes, BoundarySlopes};
use crate::model::{Grid, State, SystemParams};
use crate::timestepper::{Observer, Stepper};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("records are not uniformly spaced in time")]
    NonUniformStride,
    #[error("fit window holds {0} usable points (need 10)")]
    WindowEmpty(usize),
    #[error("non-positive energy at t = {0} inside the fit window")]
    NonPositiveEnergy(f64),
    #[error("no dissipation over [0, T]")]
    ZeroDenominator,
    #[error("records end at t = {t_last} before T = {horizon}")]
    InsufficientCoverage { t_last: f64, horizon: f64 },
}

/// `E = ½∫(b2 u² + b1 v²)` by the trapezoid rule.
pub fn energy(state: &State, params: &SystemParams, grid: &Grid) -> f64 {
    0.5 * (params.b2 * grid.dot(&state.u, &state.u) + params.b1 * grid.dot(&state.v, &state.v))
}

/// Norm of the weighted space: `sqrt((b2/b1)∫u² + ∫v²)`.
pub fn x_norm(state: &State, params: &SystemParams, grid: &Grid) -> f64 {
    ((params.b2 / params.b1) * grid.dot(&state.u, &state.u) + grid.dot(&state.v, &state.v)).sqrt()
}

/// `sqrt(∫ u_x² + v_x²)` from forward differences.
pub fn h1_seminorm(state: &State, grid: &Grid) -> f64 {
    let h = grid.dx();
    let s: f64 = [&state.u, &state.v]
        .iter()
        .flat_map(|f| f.windows(2).map(|w| (w[1] - w[0]).powi(2)))
        .sum();
    (s / h).sqrt()
}

/// Boundary dissipation `½(√b2 ux + a3√b2 vx)² + ½(1 - a3² b2) vx²`.
pub fn boundary_term(slopes: BoundarySlopes, params: &SystemParams) -> f64 {
    let sb2 = params.b2.sqrt();
    let mixed = sb2 * slopes.ux0 + params.a3 * sb2 * slopes.vx0;
    0.5 * mixed * mixed + 0.5 * params.coercivity() * slopes.vx0 * slopes.vx0
}

/// `(boundary_term, damping_term)` at `state`.
pub fn dissipation_prediction(stepper: &Stepper, state: &State) -> (f64, f64) {
    let slopes = boundary_slopes(state, stepper.grid());
    let b = boundary_term(slopes, stepper.params());
    let d = stepper
        .damping()
        .power(&state.u, &state.v, stepper.params());
    (b, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub energy: f64,
    pub boundary_term: f64,
    pub damping_term: f64,
    /// Centred difference of the recorded energy; NaN at the first and last
    /// record.
    pub de_dt: f64,
    /// `de_dt + boundary_term + damping_term`; NaN where `de_dt` is.
    pub residual: f64,
    pub h1_seminorm: f64,
}

/// Observer that records energy and dissipation terms.
#[derive(Debug, Clone, Default)]
pub struct EnergyRecorder {
    records: Vec<EnergyRecord>,
}

impl EnergyRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[EnergyRecord] {
        &self.records
    }

    /// Records with `de_dt` and `residual` filled in where possible.
    pub fn finish(self) -> Vec<EnergyRecord> {
        let mut records = self.records;
        let _ = fill_residuals(&mut records);
        records
    }
}

impl Observer for EnergyRecorder {
    fn observe(&mut self, _step: usize, state: &State, stepper: &Stepper) {
        let (b, d) = dissipation_prediction(stepper, state);
        self.records.push(EnergyRecord {
            t: state.t,
            energy: energy(state, stepper.params(), stepper.grid()),
            boundary_term: b,
            damping_term: d,
            de_dt: f64::NAN,
            residual: f64::NAN,
            h1_seminorm: h1_seminorm(state, stepper.grid()),
        });
    }
}

fn check_uniform(records: &[EnergyRecord]) -> Result<f64, DiagnosticsError> {
    let dt = records[1].t - records[0].t;
    let ok = records
        .windows(2)
        .all(|w| ((w[1].t - w[0].t) - dt).abs() <= 1e-6 * dt.abs());
    if ok && dt > 0.0 {
        Ok(dt)
    } else {
        Err(DiagnosticsError::NonUniformStride)
    }
}

/// Fills `de_dt` and `residual` in place.
pub fn fill_residuals(records: &mut [EnergyRecord]) -> Result<(), DiagnosticsError> {
    for r in records.iter_mut() {
        r.de_dt = f64::NAN;
        r.residual = f64::NAN;
    }
    let res = dissipation_residual(records)?;
    for (k, r) in res.into_iter().enumerate() {
        let rec = &mut records[k + 1];
        rec.residual = r;
        rec.de_dt = r - rec.boundary_term - rec.damping_term;
    }
    Ok(())
}

/// `dE/dt + boundary_term + damping_term` at the interior records, with
/// `dE/dt` from centred differences.
pub fn dissipation_residual(records: &[EnergyRecord]) -> Result<Vec<f64>, DiagnosticsError> {
    if records.len() < 3 {
        return Err(DiagnosticsError::TooFewRecords {
            needed: 3,
            got: records.len(),
        });
    }
    let dt = check_uniform(records)?;
    Ok(records
        .windows(3)
        .map(|w| {
            let de = (w[2].energy - w[0].energy) / (2.0 * dt);
            de + w[1].boundary_term + w[1].damping_term
        })
        .collect())
}

/// `max |residual|` over the interior records.
pub fn max_abs_residual(records: &[EnergyRecord]) -> Result<f64, DiagnosticsError> {
    Ok(dissipation_residual(records)?
        .into_iter()
        .fold(0.0, |m, r| m.max(r.abs())))
}

/// Least-squares fit `E ≈ C e^{-k t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(rename = "C")]
    pub c: f64,
    pub k: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Fits `log E` against `t` over the fraction `window` of the recorded
/// time span `[t_first, t_last]`.
pub fn fit_decay(
    records: &[EnergyRecord],
    window: (f64, f64),
) -> Result<DecayFit, DiagnosticsError> {
    if records.is_empty() {
        return Err(DiagnosticsError::WindowEmpty(0));
    }
    let t0 = records[0].t;
    let span = records[records.len() - 1].t - t0;
    let lo = t0 + window.0 * span;
    let hi = t0 + window.1 * span;
    let eps = 1e-9 * span.abs().max(1e-300);
    let pts: Vec<&EnergyRecord> = records
        .iter()
        .filter(|r| r.t >= lo - eps && r.t <= hi + eps)
        .collect();
    if pts.len() < 10 {
        return Err(DiagnosticsError::WindowEmpty(pts.len()));
    }
    if let Some(r) = pts.iter().find(|r| r.energy.is_nan() || r.energy <= 0.0) {
        return Err(DiagnosticsError::NonPositiveEnergy(r.t));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|r| r.t).sum::<f64>() / m;
    let ym = pts.iter().map(|r| r.energy.ln()).sum::<f64>() / m;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for r in &pts {
        let dx = r.t - tm;
        let dy = r.energy.ln() - ym;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (slope, r_squared) = if syy > 1e-300 * m {
        (sxy / sxx, (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0))
    } else {
        (0.0, 0.0)
    };
    let intercept = ym - slope * tm;
    Ok(DecayFit {
        c: intercept.exp(),
        k: -slope,
        r_squared,
        window: (lo, hi),
    })
}

/// Empirical constants of the observability inequality over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observability {
    /// `E(0) / ∫₀ᵀ (boundary_term + damping_term) dt`.
    pub quotient: f64,
    /// `∫₀ᵀ (boundary_term + damping_term) dt`.
    pub dissipated: f64,
    /// `E(0) / ((1/T) ∫₀ᵀ E dt + ∫₀ᵀ (boundary_term + damping_term) dt)`,
    /// the constant of the `(T - t)`-weighted multiplier identity.
    pub multiplier_ratio: f64,
}

/// Trapezoid-in-time integrals over the records with `t ≤ T`.
///
/// Runs may stop at the energy floor before `T`; records that end early are
/// accepted only if the energy has decayed below `1e-10·E0`, so the
/// uncovered tail contributes nothing measurable.
pub fn observability_quotient(
    records: &[EnergyRecord],
    horizon: f64,
    e0: f64,
) -> Result<Observability, DiagnosticsError> {
    if records.len() < 2 {
        return Err(DiagnosticsError::TooFewRecords {
            needed: 2,
            got: records.len(),
        });
    }
    let last = records[records.len() - 1];
    let tol = 1e-9 * horizon.abs().max(1.0);
    if last.t < horizon - tol && (last.energy.is_nan() || last.energy > 1e-10 * e0) {
        return Err(DiagnosticsError::InsufficientCoverage {
            t_last: last.t,
            horizon,
        });
    }
    let (mut diss, mut en) = (0.0, 0.0);
    for w in records.windows(2) {
        if w[1].t > horizon + tol {
            break;
        }
        let dt = w[1].t - w[0].t;
        diss += 0.5
            * dt
            * (w[0].boundary_term + w[0].damping_term + w[1].boundary_term + w[1].damping_term);
        en += 0.5 * dt * (w[0].energy + w[1].energy);
    }
    if diss.is_nan() || diss <= 0.0 {
        return Err(DiagnosticsError::ZeroDenominator);
    }
    Ok(Observability {
        quotient: e0 / diss,
        dissipated: diss,
        multiplier_ratio: e0 / (en / horizon + diss),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, e: f64) -> EnergyRecord {
        EnergyRecord {
            t,
            energy: e,
            boundary_term: 0.0,
            damping_term: 0.0,
            de_dt: f64::NAN,
            residual: f64::NAN,
            h1_seminorm: 0.0,
        }
    }

    #[test]
    fn energy_examples() {
        let g = Grid::new(1.0, 256).unwrap();
        let p = SystemParams::default();
        let mut s = State::zeros(&g);
        assert_eq!(energy(&s, &p, &g), 0.0);
        s.u = g
            .xs()
            .iter()
            .map(|x| (std::f64::consts::PI * x).sin())
            .collect();
        assert!((energy(&s, &p, &g) - 0.25).abs() < 1e-5);
        let p2 = SystemParams { b2: 2.0, ..p };
        assert_eq!(energy(&s, &p2, &g), 2.0 * energy(&s, &p, &g));
    }

    #[test]
    fn boundary_term_collapses() {
        let p = SystemParams::default();
        let s = BoundarySlopes {
            ux0: 0.3,
            vx0: -1.1,
        };
        assert!((boundary_term(s, &p) - 0.5 * (0.09 + 1.21)).abs() < 1e-15);
        assert_eq!(boundary_term(BoundarySlopes::default(), &p), 0.0);
    }

    #[test]
    fn exact_exponential_fit() {
        let r: Vec<_> = (0..100)
            .map(|i| {
                let t = i as f64 * 0.1;
                rec(t, 3.0 * (-0.7 * t).exp())
            })
            .collect();
        let f = fit_decay(&r, (0.0, 1.0)).unwrap();
        assert!((f.k - 0.7).abs() < 1e-12);
        assert!((f.c - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_energy_fit() {
        let r: Vec<_> = (0..50).map(|i| rec(i as f64, 2.0)).collect();
        let f = fit_decay(&r, (0.2, 1.0)).unwrap();
        assert_eq!(f.k, 0.0);
        assert_eq!(f.r_squared, 0.0);
    }

    #[test]
    fn fit_errors() {
        let r: Vec<_> = (0..5).map(|i| rec(i as f64, 1.0)).collect();
        assert!(matches!(
            fit_decay(&r, (0.2, 1.0)),
            Err(DiagnosticsError::WindowEmpty(_))
        ));
        let mut r: Vec<_> = (0..20).map(|i| rec(i as f64, 1.0)).collect();
        r[15].energy = 0.0;
        assert!(matches!(
            fit_decay(&r, (0.2, 1.0)),
            Err(DiagnosticsError::NonPositiveEnergy(_))
        ));
    }

    #[test]
    fn residual_errors_and_zero() {
        assert!(matches!(
            dissipation_residual(&[rec(0.0, 0.0), rec(1.0, 0.0)]),
            Err(DiagnosticsError::TooFewRecords { .. })
        ));
        let z: Vec<_> = (0..10).map(|i| rec(i as f64, 0.0)).collect();
        assert!(dissipation_residual(&z).unwrap().iter().all(|&r| r == 0.0));
        let bad = [rec(0.0, 0.0), rec(1.0, 0.0), rec(3.0, 0.0)];
        assert!(matches!(
            dissipation_residual(&bad),
            Err(DiagnosticsError::NonUniformStride)
        ));
    }

    #[test]
    fn quotient_zero_denominator() {
        let z: Vec<_> = (0..10).map(|i| rec(i as f64, 0.0)).collect();
        assert!(matches!(
            observability_quotient(&z, 9.0, 0.0),
            Err(DiagnosticsError::ZeroDenominator)
        ));
    }
}
