//! Finite-difference derivative operators and the coupled linear operator.
//!
//! Node vectors have length `n + 1` and include both endpoints. Rows for
//! nodes `0` and `n` of [`build_d1`] and [`build_d3`] are zero: the endpoint
//! values are pinned by the Dirichlet conditions and never evolve.
//!
//! The third-derivative closure consumes exactly the three boundary
//! conditions per field:
//!
//! * node 1 uses the inward-skewed stencil `(-3/2, 5, -6, 3, -1/2)/dx³` on
//!   nodes `0..=4`, second order and relying only on `f(0) = 0`;
//! * nodes `2..=n-2` use the centred stencil `(-1/2, 1, 0, -1, 1/2)/dx³`;
//! * node `n-1` eliminates the ghost value `f(n+1)` through a one-sided
//!   approximation of `f_x(L) = 0`, giving `(-1/3, 0, 3, -8/3)/dx³` on nodes
//!   `n-3..=n`.

use crate::banded::BandedOp;
use crate::model::{Grid, ModelError, State, SystemParams};

/// Weights of the skewed closure row at node 1 (nodes `0..=4`).
pub const D3_LEFT: [f64; 5] = [-1.5, 5.0, -6.0, 3.0, -0.5];
/// Weights of the centred interior row (offsets `-2..=2`).
pub const D3_CENTRAL: [f64; 5] = [-0.5, 1.0, 0.0, -1.0, 0.5];
/// Weights of the ghost-eliminated row at node `n-1` (nodes `n-3..=n`).
pub const D3_RIGHT: [f64; 4] = [-1.0 / 3.0, 0.0, 3.0, -8.0 / 3.0];

fn check(grid: &Grid) -> Result<(), ModelError> {
    if grid.cells() < crate::model::MIN_CELLS {
        return Err(ModelError::GridTooSmall {
            cells: grid.cells(),
        });
    }
    Ok(())
}

/// Central first difference on interior nodes.
pub fn build_d1(grid: &Grid) -> Result<BandedOp, ModelError> {
    check(grid)?;
    let n = grid.cells();
    let c = 0.5 / grid.dx();
    let mut d = BandedOp::zeros(n + 1, 1, 1);
    for i in 1..n {
        d.set(i, i - 1, -c);
        d.set(i, i + 1, c);
    }
    Ok(d)
}

/// Third difference with the boundary closures described in the module docs.
pub fn build_d3(grid: &Grid) -> Result<BandedOp, ModelError> {
    check(grid)?;
    let n = grid.cells();
    let c = grid.dx().powi(-3);
    let mut d = BandedOp::zeros(n + 1, 2, 3);
    for (k, w) in D3_LEFT.iter().enumerate() {
        d.set(1, k, w * c);
    }
    for i in 2..n - 1 {
        for (k, w) in D3_CENTRAL.iter().enumerate() {
            if *w != 0.0 {
                d.set(i, i + k - 2, w * c);
            }
        }
    }
    for (k, w) in D3_RIGHT.iter().enumerate() {
        if *w != 0.0 {
            d.set(n - 1, n - 3 + k, w * c);
        }
    }
    Ok(d)
}

/// Right-hand side of the linear part `dU/dt = A U`, stored as one banded
/// matrix over the interleaved interior unknowns `(u_1, v_1, u_2, v_2, …)`.
#[derive(Debug, Clone)]
pub struct LinearSystemOp {
    matrix: BandedOp,
    interior: usize,
}

/// Lower and upper bandwidth of the interleaved operator.
pub const LINEAR_KL: usize = 5;
pub const LINEAR_KU: usize = 7;

pub fn u_index(node: usize) -> usize {
    2 * (node - 1)
}

pub fn v_index(node: usize) -> usize {
    2 * (node - 1) + 1
}

impl LinearSystemOp {
    pub fn matrix(&self) -> &BandedOp {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    /// Number of interior nodes `n - 1`.
    pub fn interior_nodes(&self) -> usize {
        self.interior
    }

    /// Interleaves the interior values of `u` and `v`.
    pub fn pack(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for i in 1..=self.interior {
            out[u_index(i)] = u[i];
            out[v_index(i)] = v[i];
        }
        out
    }

    /// Inverse of [`pack`](Self::pack); endpoint values are set to zero.
    pub fn unpack(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; self.interior + 2];
        let mut v = vec![0.0; self.interior + 2];
        for i in 1..=self.interior {
            u[i] = x[u_index(i)];
            v[i] = x[v_index(i)];
        }
        (u, v)
    }

    /// `A U` returned as node vectors `(du/dt, dv/dt)`.
    pub fn apply(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.unpack(&self.matrix.matvec(&self.pack(u, v)))
    }
}

/// Assembles `u_t = -(D3 u + a3 D3 v)` and
/// `v_t = -(r/b1) D1 v - (b2 a3/b1) D3 u - (1/b1) D3 v`.
pub fn assemble_linear(params: &SystemParams, grid: &Grid) -> Result<LinearSystemOp, ModelError> {
    params.validate()?;
    let d1 = build_d1(grid)?;
    let d3 = build_d3(grid)?;
    let n = grid.cells();
    let m = n - 1;
    let mut a = BandedOp::zeros(2 * m, LINEAR_KL, LINEAR_KU);
    let inv_b1 = 1.0 / params.b1;
    for i in 1..n {
        for j in d3.row_span(i) {
            if j == 0 || j == n {
                continue;
            }
            let w = d3.get(i, j);
            if w == 0.0 {
                continue;
            }
            a.add(u_index(i), u_index(j), -w);
            if params.a3 != 0.0 {
                a.add(u_index(i), v_index(j), -params.a3 * w);
                a.add(v_index(i), u_index(j), -params.b2 * params.a3 * inv_b1 * w);
            }
            a.add(v_index(i), v_index(j), -inv_b1 * w);
        }
        if params.r != 0.0 {
            for j in d1.row_span(i) {
                if j == 0 || j == n {
                    continue;
                }
                let w = d1.get(i, j);
                if w != 0.0 {
                    a.add(v_index(i), v_index(j), -params.r * inv_b1 * w);
                }
            }
        }
    }
    Ok(LinearSystemOp {
        matrix: a,
        interior: m,
    })
}

/// One-sided approximations of `u_x(0)` and `v_x(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundarySlopes {
    pub ux0: f64,
    pub vx0: f64,
}

/// Second-order one-sided slope `(-3 f0 + 4 f1 - f2) / (2 dx)`.
pub fn left_slope(f: &[f64], dx: f64) -> f64 {
    (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
}

pub fn boundary_slopes(state: &State, grid: &Grid) -> BoundarySlopes {
    BoundarySlopes {
        ux0: left_slope(&state.u, grid.dx()),
        vx0: left_slope(&state.v, grid.dx()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn d1_examples() {
        let g = grid(32);
        let d1 = build_d1(&g).unwrap();
        let xs = g.xs();
        let lin = d1.matvec(&xs);
        let cst = d1.matvec(&vec![2.5; g.nodes()]);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let dsq = d1.matvec(&sq);
        for i in 1..32 {
            assert!((lin[i] - 1.0).abs() < 1e-12);
            assert!(cst[i].abs() < 1e-12);
            assert!((dsq[i] - 2.0 * xs[i]).abs() < 1e-12);
        }
        assert_eq!(lin[0], 0.0);
        assert_eq!(lin[32], 0.0);
    }

    #[test]
    fn d3_exact_on_compatible_quartic() {
        let g = Grid::new(2.0, 40).unwrap();
        let d3 = build_d3(&g).unwrap();
        let l = g.length();
        let f: Vec<f64> = g.xs().iter().map(|x| x * x * (l - x) * (l - x)).collect();
        let y = d3.matvec(&f);
        for (i, yi) in y.iter().enumerate().take(39).skip(2) {
            let x = g.x(i);
            assert!((yi - (24.0 * x - 12.0 * l)).abs() < 1e-8 * (1.0 + yi.abs()));
        }
        assert!(d3.matvec(&vec![0.0; 41]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn closure_weights_sum_to_zero() {
        assert!(D3_LEFT.iter().sum::<f64>().abs() < 1e-15);
        assert!(D3_CENTRAL.iter().sum::<f64>().abs() < 1e-15);
        assert!(D3_RIGHT.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn left_closure_is_exact_on_cubics() {
        let g = grid(16);
        let d3 = build_d3(&g).unwrap();
        let f: Vec<f64> = g.xs().iter().map(|x| x * (1.0 + x + x * x)).collect();
        let y = d3.matvec(&f);
        assert!((y[1] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn decoupled_assembly_is_block_diagonal() {
        let g = grid(20);
        let p = SystemParams {
            a1: 1.0,
            a2: 1.0,
            ..SystemParams::default()
        };
        let a = assemble_linear(&p, &g).unwrap();
        let m = a.matrix();
        for i in 0..a.dim() {
            for j in m.row_span(i) {
                if i % 2 != j % 2 {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn b1_scales_v_rows() {
        let g = grid(20);
        let p1 = SystemParams {
            a3: 0.4,
            r: 0.7,
            ..SystemParams::default()
        };
        let p2 = SystemParams { b1: 2.0, ..p1 };
        let a1 = assemble_linear(&p1, &g).unwrap();
        let a2 = assemble_linear(&p2, &g).unwrap();
        for i in 0..a1.dim() {
            let f = if i % 2 == 1 { 0.5 } else { 1.0 };
            for j in a1.matrix().row_span(i) {
                let expect = f * a1.matrix().get(i, j);
                assert!((a2.matrix().get(i, j) - expect).abs() <= 1e-12 * expect.abs());
            }
        }
    }

    #[test]
    fn invalid_params_propagate() {
        let p = SystemParams {
            a3: 2.0,
            ..SystemParams::default()
        };
        assert!(matches!(
            assemble_linear(&p, &grid(32)),
            Err(ModelError::CoercivityViolation { .. })
        ));
        assert!(build_d3(&Grid::new(1.0, 32).unwrap()).is_ok());
    }

    #[test]
    fn slopes_examples() {
        let g = grid(64);
        let mut s = State::zeros(&g);
        assert_eq!(boundary_slopes(&s, &g), BoundarySlopes::default());
        s.u = g.xs().iter().map(|x| x * (1.0 - x) * (1.0 - x)).collect();
        let b = boundary_slopes(&s, &g);
        assert!((b.ux0 - 1.0).abs() < 1e-3);
    }
}
