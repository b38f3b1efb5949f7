//! Localized feedback damping: the mean-zero projection onto a subinterval
//! and multiplicative damping by a nonnegative coefficient.
//!
//! The subinterval `ω = (l, r)` is represented by an [`OmegaMask`]: nodes
//! `ceil(l/dx) ..= floor(r/dx)` carry composite trapezoid weights (half a
//! cell at the two clipped ends), everything else carries zero. Both the
//! mean in the projection and every `L²(ω)` product use these weights.

use crate::model::{Grid, SystemParams};
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DampingError {
    #[error("damping region ({l}, {r}) holds no interior grid node")]
    EmptyOmega { l: f64, r: f64 },
    #[error("damping region ({l}, {r}) must lie within [0, {length}]")]
    InvalidOmega { l: f64, r: f64, length: f64 },
    #[error("multiplicative damping requested on a {0} configuration")]
    WrongKind(&'static str),
    #[error("b0 must be positive (got {0})")]
    NonPositiveB0(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    #[default]
    Constant,
    /// `b0 · exp(1 - 1/(1 - (2s-1)²))` with `s = (x-l)/(r-l)`, zero outside `ω`.
    SmoothBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingKind {
    None,
    MeanZeroProjection,
    Multiplicative {
        b0: f64,
        #[serde(default)]
        profile: BumpProfile,
    },
}

impl DampingKind {
    pub fn name(&self) -> &'static str {
        match self {
            DampingKind::None => "none",
            DampingKind::MeanZeroProjection => "mean_zero_projection",
            DampingKind::Multiplicative { .. } => "multiplicative",
        }
    }
}

/// Which equations receive the damping term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DampingTarget {
    #[default]
    Both,
    UOnly,
    VOnly,
}

impl DampingTarget {
    pub fn damps_u(self) -> bool {
        matches!(self, DampingTarget::Both | DampingTarget::UOnly)
    }

    pub fn damps_v(self) -> bool {
        matches!(self, DampingTarget::Both | DampingTarget::VOnly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    pub kind: DampingKind,
    pub omega: (f64, f64),
    #[serde(default)]
    pub target: DampingTarget,
}

impl DampingConfig {
    pub fn none() -> Self {
        Self {
            kind: DampingKind::None,
            omega: (0.0, 0.0),
            target: DampingTarget::Both,
        }
    }

    pub fn projection(l: f64, r: f64) -> Self {
        Self {
            kind: DampingKind::MeanZeroProjection,
            omega: (l, r),
            target: DampingTarget::Both,
        }
    }

    pub fn multiplicative(l: f64, r: f64, b0: f64, profile: BumpProfile) -> Self {
        Self {
            kind: DampingKind::Multiplicative { b0, profile },
            omega: (l, r),
            target: DampingTarget::Both,
        }
    }

    pub fn with_target(self, target: DampingTarget) -> Self {
        Self { target, ..self }
    }
}

/// Trapezoid weights of `ω` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMask {
    pub weights: Vec<f64>,
    pub measure: f64,
    pub nodes: RangeInclusive<usize>,
    pub omega: (f64, f64),
}

pub fn build_mask(grid: &Grid, omega: (f64, f64)) -> Result<OmegaMask, DampingError> {
    let (l, r) = omega;
    let length = grid.length();
    if !(l.is_finite() && r.is_finite() && 0.0 <= l && r <= length) {
        return Err(DampingError::InvalidOmega { l, r, length });
    }
    let h = grid.dx();
    let tol = 1e-9;
    let first = (l / h - tol).ceil().max(0.0) as usize;
    let last = ((r / h + tol).floor() as usize).min(grid.cells());
    if last < first + 2 {
        return Err(DampingError::EmptyOmega { l, r });
    }
    let mut weights = vec![0.0; grid.nodes()];
    for w in &mut weights[first..=last] {
        *w = h;
    }
    weights[first] = 0.5 * h;
    weights[last] = 0.5 * h;
    let measure = (last - first) as f64 * h;
    Ok(OmegaMask {
        weights,
        measure,
        nodes: first..=last,
        omega,
    })
}

impl OmegaMask {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        let s: f64 = self.nodes.clone().map(|i| self.weights[i] * f[i]).sum();
        s / self.measure
    }

    /// `∫_ω f g` under the mask quadrature.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.nodes
            .clone()
            .map(|i| self.weights[i] * f[i] * g[i])
            .sum()
    }

    pub fn norm_sq(&self, f: &[f64]) -> f64 {
        self.dot(f, f)
    }
}

/// The mean-zero projection `1_ω (f - mean_ω f)`.
pub fn apply_g(f: &[f64], mask: &OmegaMask) -> Vec<f64> {
    assert_eq!(f.len(), mask.len());
    let m = mask.mean(f);
    let mut g = vec![0.0; f.len()];
    for i in mask.nodes.clone() {
        g[i] = f[i] - m;
    }
    g
}

/// Node values of the multiplicative coefficient `b`.
pub fn coefficient(grid: &Grid, b0: f64, profile: BumpProfile, mask: &OmegaMask) -> Vec<f64> {
    let (l, r) = mask.omega;
    let mut b = vec![0.0; grid.nodes()];
    for i in mask.nodes.clone() {
        b[i] = match profile {
            BumpProfile::Constant => b0,
            BumpProfile::SmoothBump => b0 * bump((grid.x(i) - l) / (r - l)),
        };
    }
    b
}

/// Standard bump on `(0, 1)` with peak value 1 at `s = 1/2`.
pub fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let z = 2.0 * s - 1.0;
    (1.0 - 1.0 / (1.0 - z * z)).exp()
}

pub fn apply_multiplicative(
    f: &[f64],
    grid: &Grid,
    cfg: &DampingConfig,
    mask: &OmegaMask,
) -> Result<Vec<f64>, DampingError> {
    match cfg.kind {
        DampingKind::Multiplicative { b0, profile } => {
            let b = coefficient(grid, b0, profile, mask);
            Ok(f.iter().zip(&b).map(|(f, b)| f * b).collect())
        }
        other => Err(DampingError::WrongKind(other.name())),
    }
}

/// `b2 ‖gu‖²_ω + ‖gv‖²_ω`.
pub fn damping_power(gu: &[f64], gv: &[f64], params: &SystemParams, mask: &OmegaMask) -> f64 {
    params.b2 * mask.norm_sq(gu) + mask.norm_sq(gv)
}

/// Damping resolved on a grid, ready to be evaluated every step.
///
/// [`forces_into`](Self::forces_into) returns nodal vectors `χ·(Gf)` or
/// `χ·b·f`, where `χ_i = w_i / H_i` is the ratio of the mask weight to the
/// full trapezoid weight. This makes the discrete damping power equal to the
/// mask quadrature of the damping term exactly, and gives the damping force
/// zero total integral for the projection.
#[derive(Debug, Clone)]
pub struct DampingOperator {
    config: DampingConfig,
    mask: Option<OmegaMask>,
    chi: Vec<f64>,
    coef: Vec<f64>,
}

impl DampingOperator {
    pub fn new(cfg: &DampingConfig, grid: &Grid) -> Result<Self, DampingError> {
        if cfg.kind == DampingKind::None {
            return Ok(Self {
                config: *cfg,
                mask: None,
                chi: Vec::new(),
                coef: Vec::new(),
            });
        }
        if let DampingKind::Multiplicative { b0, .. } = cfg.kind {
            if !(b0.is_finite() && b0 > 0.0) {
                return Err(DampingError::NonPositiveB0(b0));
            }
        }
        let mask = build_mask(grid, cfg.omega)?;
        let chi: Vec<f64> = mask
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| w / grid.weight(i))
            .collect();
        let coef = match cfg.kind {
            DampingKind::Multiplicative { b0, profile } => coefficient(grid, b0, profile, &mask),
            _ => Vec::new(),
        };
        Ok(Self {
            config: *cfg,
            mask: Some(mask),
            chi,
            coef,
        })
    }

    pub fn config(&self) -> &DampingConfig {
        &self.config
    }

    pub fn mask(&self) -> Option<&OmegaMask> {
        self.mask.as_ref()
    }

    pub fn is_active(&self) -> bool {
        self.mask.is_some()
    }

    fn field_force(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let Some(mask) = &self.mask else { return };
        match self.config.kind {
            DampingKind::MeanZeroProjection => {
                let m = mask.mean(f);
                for i in mask.nodes.clone() {
                    out[i] = self.chi[i] * (f[i] - m);
                }
            }
            DampingKind::Multiplicative { .. } => {
                for i in mask.nodes.clone() {
                    out[i] = self.chi[i] * self.coef[i] * f[i];
                }
            }
            DampingKind::None => {}
        }
    }

    /// Writes the damping terms of the two equations (before division by
    /// `b1`), zero for untargeted fields.
    pub fn forces_into(&self, u: &[f64], v: &[f64], fu: &mut [f64], fv: &mut [f64]) {
        if self.config.target.damps_u() {
            self.field_force(u, fu);
        } else {
            fu.iter_mut().for_each(|x| *x = 0.0);
        }
        if self.config.target.damps_v() {
            self.field_force(v, fv);
        } else {
            fv.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn forces(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut fu = vec![0.0; u.len()];
        let mut fv = vec![0.0; v.len()];
        self.forces_into(u, v, &mut fu, &mut fv);
        (fu, fv)
    }

    /// Rate of energy removal by damping: `b2 ‖Gu‖²_ω + ‖Gv‖²_ω` for the
    /// projection, `∫_ω b (b2 u² + v²)` for multiplicative damping, with
    /// untargeted fields omitted.
    pub fn power(&self, u: &[f64], v: &[f64], params: &SystemParams) -> f64 {
        let Some(mask) = &self.mask else { return 0.0 };
        let field = |f: &[f64]| match self.config.kind {
            DampingKind::MeanZeroProjection => mask.norm_sq(&apply_g(f, mask)),
            DampingKind::Multiplicative { .. } => mask
                .nodes
                .clone()
                .map(|i| mask.weights[i] * self.coef[i] * f[i] * f[i])
                .sum(),
            DampingKind::None => 0.0,
        };
        let mut p = 0.0;
        if self.config.target.damps_u() {
            p += params.b2 * field(u);
        }
        if self.config.target.damps_v() {
            p += field(v);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_interval_mask() {
        let g = Grid::new(2.0, 32).unwrap();
        let m = build_mask(&g, (0.0, 2.0)).unwrap();
        assert!((m.measure - 2.0).abs() < 1e-14);
        for i in 0..g.nodes() {
            assert_eq!(m.weights[i], g.weight(i));
        }
    }

    #[test]
    fn quarter_mask() {
        let g = Grid::new(1.0, 16).unwrap();
        let m = build_mask(&g, (0.25, 0.5)).unwrap();
        assert_eq!(m.nodes, 4..=8);
        assert!((m.measure - 0.25).abs() < 1e-14);
        assert!((m.weights.iter().sum::<f64>() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn narrow_omega_is_empty() {
        let g = Grid::new(1.0, 16).unwrap();
        assert!(matches!(
            build_mask(&g, (0.30, 0.33)),
            Err(DampingError::EmptyOmega { .. })
        ));
        assert!(matches!(
            build_mask(&g, (0.5, 0.4)),
            Err(DampingError::EmptyOmega { .. })
        ));
        assert!(matches!(
            build_mask(&g, (0.5, 1.4)),
            Err(DampingError::InvalidOmega { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let g = Grid::new(1.0, 16).unwrap();
        let m = build_mask(&g, (0.25, 0.5)).unwrap();
        let c = apply_g(&[3.0; 17], &m);
        assert!(c.iter().all(|x| x.abs() < 1e-14));
        assert!(apply_g(&[0.0; 17], &m).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bump_profile() {
        assert_eq!(bump(0.0), 0.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(0.5), 1.0);
        let g = Grid::new(1.0, 20).unwrap();
        let cfg = DampingConfig::multiplicative(0.25, 0.75, 2.0, BumpProfile::SmoothBump);
        let m = build_mask(&g, cfg.omega).unwrap();
        let f: Vec<f64> = g.xs().iter().map(|x| 1.0 + x).collect();
        let bf = apply_multiplicative(&f, &g, &cfg, &m).unwrap();
        assert_eq!(bf[10], 2.0 * f[10]);
        assert_eq!(bf[2], 0.0);
    }

    #[test]
    fn multiplicative_requires_kind() {
        let g = Grid::new(1.0, 20).unwrap();
        let cfg = DampingConfig::projection(0.2, 0.6);
        let m = build_mask(&g, cfg.omega).unwrap();
        assert!(matches!(
            apply_multiplicative(&[0.0; 21], &g, &cfg, &m),
            Err(DampingError::WrongKind(_))
        ));
    }

    #[test]
    fn power_examples() {
        let g = Grid::new(1.0, 16).unwrap();
        let m = build_mask(&g, (0.25, 0.5)).unwrap();
        let p = SystemParams::default();
        let z = vec![0.0; 17];
        assert_eq!(damping_power(&z, &z, &p, &m), 0.0);
        let mut gu = z.clone();
        gu[5] = -1.0;
        gu[7] = 1.0;
        let w = g.dx();
        assert!((damping_power(&gu, &z, &p, &m) - 2.0 * w).abs() < 1e-15);
    }

    #[test]
    fn operator_power_matches_force_inner_product() {
        let g = Grid::new(1.0, 50).unwrap();
        let p = SystemParams {
            b2: 1.7,
            ..SystemParams::default()
        };
        let u: Vec<f64> = g
            .xs()
            .iter()
            .map(|x| (7.0 * x).sin() * x * (1.0 - x))
            .collect();
        let v: Vec<f64> = g
            .xs()
            .iter()
            .map(|x| (3.0 * x).cos() * x * (1.0 - x))
            .collect();
        for cfg in [
            DampingConfig::projection(0.31, 0.67),
            DampingConfig::multiplicative(0.31, 0.67, 1.3, BumpProfile::Constant),
            DampingConfig::multiplicative(0.31, 0.67, 1.3, BumpProfile::SmoothBump),
            DampingConfig::projection(0.31, 0.67).with_target(DampingTarget::VOnly),
        ] {
            let op = DampingOperator::new(&cfg, &g).unwrap();
            let (fu, fv) = op.forces(&u, &v);
            let direct = p.b2 * g.dot(&u, &fu) + g.dot(&v, &fv);
            let power = op.power(&u, &v, &p);
            assert!((direct - power).abs() < 1e-13 * power.abs().max(1e-30));
            assert!(power > 0.0);
        }
    }

    #[test]
    fn none_operator_is_inert() {
        let g = Grid::new(1.0, 20).unwrap();
        let op = DampingOperator::new(&DampingConfig::none(), &g).unwrap();
        let u = vec![1.0; 21];
        let (fu, fv) = op.forces(&u, &u);
        assert!(fu.iter().chain(&fv).all(|&x| x == 0.0));
        assert_eq!(op.power(&u, &u, &SystemParams::default()), 0.0);
    }
}
