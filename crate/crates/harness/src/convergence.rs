//! Refinement studies: dissipation residual per level and self-convergence
//! of the final state.

use crate::config::RunConfig;
use crate::runner::{simulate, RunStatus};
use gglab_core::{Grid, State, SystemParams};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RefinementMode {
    /// Halve both `dx` and `dt` per level.
    #[default]
    SpaceTime,
    /// Halve `dt` only.
    Time,
}

/// An observed ratio or order; `Exact` when the quantity being reduced is
/// already zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Value(f64),
    Exact,
}

impl Order {
    pub fn value(self) -> Option<f64> {
        match self {
            Order::Value(v) => Some(v),
            Order::Exact => None,
        }
    }

    fn ratio(coarse: f64, fine: f64) -> Self {
        if coarse == 0.0 && fine == 0.0 {
            Order::Exact
        } else {
            Order::Value(coarse / fine)
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Order::Value(v) => s.serialize_f64(*v),
            Order::Exact => s.serialize_str("exact"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub n: usize,
    pub dt: f64,
    pub status: RunStatus,
    /// `max |residual| / E(0)`.
    pub max_residual: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub mode: RefinementMode,
    pub levels: Vec<LevelReport>,
    /// `residual[j] / residual[j+1]`.
    pub residual_ratios: Vec<Order>,
    /// Weighted L² distance between consecutive final states, on the
    /// coarser grid.
    pub state_differences: Vec<f64>,
    /// `log2(diff[j] / diff[j+1])`.
    pub observed_orders: Vec<Order>,
}

impl ConvergenceReport {
    pub fn all_ok(&self) -> bool {
        self.levels.iter().all(|l| l.status.is_ok())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConvergenceError {
    #[error("need at least 3 levels (got {0})")]
    TooFewLevels(usize),
    #[error("level {level} failed: {message}")]
    LevelFailed { level: usize, message: String },
}

/// Level `j` uses `dt / 2^j` (and `n · 2^j` cells in space-time mode), with
/// the energy floor and snapshots turned off.
pub fn level_config(base: &RunConfig, level: usize, mode: RefinementMode) -> RunConfig {
    let factor = 1usize << level;
    let mut cfg = base.clone();
    cfg.time.dt = base.time.dt / factor as f64;
    if mode == RefinementMode::SpaceTime {
        cfg.grid.n = base.grid.n * factor;
    }
    cfg.time.energy_floor = 0.0;
    cfg.outputs.snapshots = false;
    cfg
}

fn distance(coarse: &State, fine: &State, stride: usize, grid: &Grid, p: &SystemParams) -> f64 {
    let du: Vec<f64> = (0..coarse.u.len())
        .map(|i| coarse.u[i] - fine.u[i * stride])
        .collect();
    let dv: Vec<f64> = (0..coarse.v.len())
        .map(|i| coarse.v[i] - fine.v[i * stride])
        .collect();
    (p.b2 * grid.dot(&du, &du) + p.b1 * grid.dot(&dv, &dv)).sqrt()
}

pub fn run_convergence(
    base: &RunConfig,
    levels: usize,
    mode: RefinementMode,
) -> Result<ConvergenceReport, ConvergenceError> {
    if levels < 3 {
        return Err(ConvergenceError::TooFewLevels(levels));
    }
    let mut reports = Vec::with_capacity(levels);
    let mut finals: Vec<(State, Grid)> = Vec::with_capacity(levels);
    for j in 0..levels {
        let cfg = level_config(base, j, mode);
        let rep = simulate(&cfg);
        log::info!(
            "level {j}: n = {}, dt = {:e}, status {}",
            cfg.grid.n,
            cfg.time.dt,
            rep.status.as_str()
        );
        let (Some(state), Ok(grid)) = (rep.final_state.clone(), cfg.grid()) else {
            return Err(ConvergenceError::LevelFailed {
                level: j,
                message: rep.message.unwrap_or_else(|| rep.status.as_str().into()),
            });
        };
        finals.push((state, grid));
        reports.push(LevelReport {
            n: cfg.grid.n,
            dt: cfg.time.dt,
            status: rep.status,
            max_residual: rep.max_residual,
            wall_time_s: rep.wall_time_s,
        });
    }

    let residual_ratios = reports
        .windows(2)
        .map(|w| match (w[0].max_residual, w[1].max_residual) {
            (Some(a), Some(b)) => Order::ratio(a, b),
            _ => Order::Value(f64::NAN),
        })
        .collect();
    let stride = if mode == RefinementMode::SpaceTime {
        2
    } else {
        1
    };
    let state_differences: Vec<f64> = finals
        .windows(2)
        .map(|w| distance(&w[0].0, &w[1].0, stride, &w[0].1, &base.params))
        .collect();
    let observed_orders = state_differences
        .windows(2)
        .map(|d| match Order::ratio(d[0], d[1]) {
            Order::Value(r) => Order::Value(r.log2()),
            Order::Exact => Order::Exact,
        })
        .collect();

    Ok(ConvergenceReport {
        mode,
        levels: reports,
        residual_ratios,
        state_differences,
        observed_orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gglab_core::InitialCondition;

    #[test]
    fn zero_data_is_exact() {
        let mut cfg = crate::presets::run_preset("linear-check").unwrap();
        cfg.grid.n = 32;
        cfg.time.t_end = 0.02;
        cfg.ic = InitialCondition::zero();
        let rep = run_convergence(&cfg, 3, RefinementMode::SpaceTime).unwrap();
        assert_eq!(rep.residual_ratios, vec![Order::Exact; 2]);
        assert_eq!(rep.observed_orders, vec![Order::Exact]);
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"exact\""));
    }

    #[test]
    fn needs_three_levels() {
        let cfg = crate::presets::run_preset("linear-check").unwrap();
        assert!(matches!(
            run_convergence(&cfg, 2, RefinementMode::Time),
            Err(ConvergenceError::TooFewLevels(2))
        ));
    }
}
