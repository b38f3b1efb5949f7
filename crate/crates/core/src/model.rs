//! Physical parameters, nonlinearity, grid, state and initial data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Smallest number of cells accepted by [`Grid::new`].
pub const MIN_CELLS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("1 - a3^2*b2 must be > 0 (got {value})")]
    CoercivityViolation { value: f64 },
    #[error("{name} must be > 0 (got {value})")]
    NonPositiveCoefficient { name: &'static str, value: f64 },
    #[error("{name} must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("power exponent must lie in [1, 4] (got {p})")]
    InvalidExponent { p: f64 },
    #[error("grid needs at least {MIN_CELLS} cells (got {cells})")]
    GridTooSmall { cells: usize },
    #[error("domain length must be positive and finite (got {length})")]
    InvalidLength { length: f64 },
    #[error("invalid initial condition: {0}")]
    InvalidProfile(String),
}

/// Coefficients of the coupled system. `b1` multiplies `v_t` in the second
/// equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub r: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            a1: 0.0,
            a2: 0.0,
            a3: 0.0,
            b1: 1.0,
            b2: 1.0,
            r: 0.0,
        }
    }
}

impl SystemParams {
    /// `1 - a3^2 b2`, the quantity that keeps the boundary dissipation form
    /// positive definite.
    pub fn coercivity(&self) -> f64 {
        1.0 - self.a3 * self.a3 * self.b2
    }

    /// Every violated constraint, in a fixed order.
    pub fn violations(&self) -> Vec<ModelError> {
        let mut out = Vec::new();
        for (name, value) in [
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("b1", self.b1),
            ("b2", self.b2),
            ("r", self.r),
        ] {
            if !value.is_finite() {
                out.push(ModelError::NonFinite { name, value });
            }
        }
        if !out.is_empty() {
            return out;
        }
        if self.b1 <= 0.0 {
            out.push(ModelError::NonPositiveCoefficient {
                name: "b1",
                value: self.b1,
            });
        }
        if self.b2 <= 0.0 {
            out.push(ModelError::NonPositiveCoefficient {
                name: "b2",
                value: self.b2,
            });
        }
        let c = self.coercivity();
        if c <= 0.0 {
            out.push(ModelError::CoercivityViolation { value: c });
        }
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

pub fn validate_params(p: &SystemParams) -> Result<(), ModelError> {
    p.validate()
}

/// The self-interaction `a(s)` in `a(u) u_x`.
///
/// * `Classic`: `a(s) = s`.
/// * `Power { p }`: `s^p` for odd integer `p`, `|s|^(p-1) s` for other
///   `p`, except `p = 4` which is the literal `s^4` (same as `CriticalU4`).
/// * `CriticalU4`: `a(s) = s^4`.
/// * `Off`: every nonlinear term is dropped, including the `a1`/`a2` couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Off,
    Classic,
    Power { p: f64 },
    CriticalU4,
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Nonlinearity::Power { p } if !(1.0..=4.0).contains(&p) => {
                Err(ModelError::InvalidExponent { p })
            }
            _ => Ok(()),
        }
    }

    pub fn is_off(&self) -> bool {
        matches!(self, Nonlinearity::Off)
    }

    /// Homogeneity degree of `a`, i.e. `a(λs) = λ^p a(s)` for `λ > 0`.
    pub fn degree(&self) -> f64 {
        match *self {
            Nonlinearity::Off | Nonlinearity::Classic => 1.0,
            Nonlinearity::Power { p } => p,
            Nonlinearity::CriticalU4 => 4.0,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::Off => 0.0,
            Nonlinearity::Classic => s,
            Nonlinearity::CriticalU4 => s.powi(4),
            Nonlinearity::Power { p } => power_law(p, s),
        }
    }

    /// `A(s) = ∫₀ˢ a(σ) dσ`. Every member of the family is homogeneous, so
    /// `A(s) = s a(s) / (p + 1)`.
    pub fn primitive(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Off => 0.0,
            _ => s * self.eval(s) / (self.degree() + 1.0),
        }
    }
}

fn power_law(p: f64, s: f64) -> f64 {
    if p == 4.0 {
        return s.powi(4);
    }
    if p.fract() == 0.0 {
        let k = p as i32;
        if k % 2 == 1 {
            s.powi(k)
        } else {
            s.abs().powi(k - 1) * s
        }
    } else {
        s.abs().powf(p - 1.0) * s
    }
}

pub fn a_eval(nl: &Nonlinearity, s: f64) -> f64 {
    nl.eval(s)
}

pub fn a_primitive(nl: &Nonlinearity, s: f64) -> f64 {
    nl.primitive(s)
}

/// Uniform mesh `x_i = i·dx`, `i = 0..=n`, on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    length: f64,
    cells: usize,
    dx: f64,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self, ModelError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(ModelError::InvalidLength { length });
        }
        if cells < MIN_CELLS {
            return Err(ModelError::GridTooSmall { cells });
        }
        Ok(Self {
            length,
            cells,
            dx: length / cells as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of cells `n`; there are `n + 1` nodes.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.cells {
            self.length
        } else {
            i as f64 * self.dx
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.x(i)).collect()
    }

    /// Composite trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.cells {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Composite trapezoid rule over all nodes.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.nodes());
        let n = self.cells;
        let inner: f64 = f[1..n].iter().sum();
        self.dx * (inner + 0.5 * (f[0] + f[n]))
    }

    /// Trapezoid inner product `∫ f g`.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), g.len());
        let n = self.cells;
        let inner: f64 = f[1..n].iter().zip(&g[1..n]).map(|(a, b)| a * b).sum();
        self.dx * (inner + 0.5 * (f[0] * g[0] + f[n] * g[n]))
    }
}

/// The field pair at one time level. Node values include both endpoints,
/// which are kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            u: vec![0.0; grid.nodes()],
            v: vec![0.0; grid.nodes()],
        }
    }

    pub fn enforce_dirichlet(&mut self) {
        for f in [&mut self.u, &mut self.v] {
            let last = f.len() - 1;
            f[0] = 0.0;
            f[last] = 0.0;
        }
    }

    pub fn satisfies_dirichlet(&self) -> bool {
        let n = self.u.len() - 1;
        self.u[0] == 0.0 && self.u[n] == 0.0 && self.v[0] == 0.0 && self.v[n] == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// `max(|u|, |v|)` over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn scale(&mut self, alpha: f64) {
        self.u
            .iter_mut()
            .chain(self.v.iter_mut())
            .for_each(|x| *x *= alpha);
    }
}

/// Polynomial window `x^left (L-x)^right`, normalised to unit maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub left: u32,
    pub right: u32,
}

impl Window {
    fn eval(&self, x: f64, length: f64) -> f64 {
        let raw = |x: f64| x.powi(self.left as i32) * (length - x).powi(self.right as i32);
        let total = self.left + self.right;
        if total == 0 {
            return 1.0;
        }
        let peak = raw(length * self.left as f64 / total as f64);
        raw(x) / peak
    }
}

/// Initial profile of a single field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    /// `Σ_k a_k sin(kπx/L)`, `k = 1, 2, …`, optionally times a window.
    SineModes {
        amplitudes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<Window>,
    },
    /// Gaussian bump times `x²(L-x)²` normalised to unit maximum, so that
    /// `u(0) = u(L) = u_x(L) = 0`.
    Gaussian {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    /// Sine modes with standard-normal amplitudes drawn from a seeded ChaCha
    /// stream, scaled by `amplitude`.
    RandomModes {
        seed: u64,
        modes: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<Window>,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Profile::Zero => Ok(()),
            Profile::SineModes { amplitudes, .. } => {
                if amplitudes.is_empty() {
                    Err(ModelError::InvalidProfile("empty mode list".into()))
                } else if amplitudes.iter().any(|a| !a.is_finite()) {
                    Err(ModelError::InvalidProfile("non-finite mode amplitude".into()))
                } else {
                    Ok(())
                }
            }
            Profile::Gaussian {
                center,
                width,
                amplitude,
            } => {
                if !(width.is_finite() && *width > 0.0) {
                    Err(ModelError::InvalidProfile(format!(
                        "gaussian width must be positive (got {width})"
                    )))
                } else if !center.is_finite() || !amplitude.is_finite() {
                    Err(ModelError::InvalidProfile(
                        "non-finite gaussian parameter".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            Profile::RandomModes {
                modes, amplitude, ..
            } => {
                if *modes == 0 {
                    Err(ModelError::InvalidProfile("empty mode list".into()))
                } else if !amplitude.is_finite() {
                    Err(ModelError::InvalidProfile("non-finite amplitude".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Samples the profile on the grid. Endpoint values are exactly zero.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>, ModelError> {
        self.validate()?;
        let length = grid.length();
        let xs = grid.xs();
        let mut f: Vec<f64> = match self {
            Profile::Zero => vec![0.0; xs.len()],
            Profile::SineModes { amplitudes, window } => {
                sine_sum(&xs, length, amplitudes, window.as_ref())
            }
            Profile::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let w = Window { left: 2, right: 2 };
                xs.iter()
                    .map(|&x| {
                        let z = (x - center) / width;
                        amplitude * (-0.5 * z * z).exp() * w.eval(x, length)
                    })
                    .collect()
            }
            Profile::RandomModes {
                seed,
                modes,
                amplitude,
                window,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let amps: Vec<f64> = (0..*modes)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        amplitude * z
                    })
                    .collect();
                sine_sum(&xs, length, &amps, window.as_ref())
            }
        };
        let n = f.len() - 1;
        f[0] = 0.0;
        f[n] = 0.0;
        Ok(f)
    }
}

fn sine_sum(xs: &[f64], length: f64, amps: &[f64], window: Option<&Window>) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let s: f64 = amps
                .iter()
                .enumerate()
                .map(|(k, a)| a * ((k + 1) as f64 * PI * x / length).sin())
                .sum();
            match window {
                Some(w) => s * w.eval(x, length),
                None => s,
            }
        })
        .collect()
}

/// Initial data for both fields, optionally rescaled to a target energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub u: Profile,
    pub v: Profile,
    /// Target `E(0) = ½∫(b2 u² + b1 v²)`. Ignored when both profiles vanish.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

impl InitialCondition {
    pub fn zero() -> Self {
        Self {
            u: Profile::Zero,
            v: Profile::Zero,
            energy: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.u.validate()?;
        self.v.validate()?;
        if let Some(e) = self.energy {
            if !(e.is_finite() && e >= 0.0) {
                return Err(ModelError::InvalidProfile(format!(
                    "target energy must be >= 0 (got {e})"
                )));
            }
        }
        Ok(())
    }

    /// Samples both fields and applies the energy normalisation.
    pub fn build(&self, grid: &Grid, params: &SystemParams) -> Result<State, ModelError> {
        self.validate()?;
        let mut state = initial_condition(self, grid)?;
        if let Some(target) = self.energy {
            let f: Vec<f64> = state
                .u
                .iter()
                .zip(&state.v)
                .map(|(u, v)| 0.5 * (params.b2 * u * u + params.b1 * v * v))
                .collect();
            let e = grid.integrate(&f);
            if e > 0.0 {
                state.scale((target / e).sqrt());
            }
        }
        Ok(state)
    }
}

/// Samples the raw profiles (no energy normalisation) at `t = 0`.
pub fn initial_condition(ic: &InitialCondition, grid: &Grid) -> Result<State, ModelError> {
    Ok(State {
        t: 0.0,
        u: ic.u.sample(grid)?,
        v: ic.v.sample(grid)?,
    })
}
