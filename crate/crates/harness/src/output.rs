//! Result files.

use crate::config::RunConfig;
use crate::runner::RunReport;
use gglab_core::diagnostics::EnergyRecord;
use gglab_core::Grid;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub const ENERGY_HEADER: [&str; 7] = [
    "t",
    "E",
    "boundary_term",
    "damping_term",
    "dEdt_numeric",
    "residual",
    "h1_seminorm",
];

/// One line of `energy.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub boundary_term: f64,
    pub damping_term: f64,
    #[serde(rename = "dEdt_numeric")]
    pub de_dt: f64,
    pub residual: f64,
    pub h1_seminorm: f64,
}

impl From<&EnergyRecord> for EnergyRow {
    fn from(r: &EnergyRecord) -> Self {
        Self {
            t: r.t,
            energy: r.energy,
            boundary_term: r.boundary_term,
            damping_term: r.damping_term,
            de_dt: r.de_dt,
            residual: r.residual,
            h1_seminorm: r.h1_seminorm,
        }
    }
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub k: Option<f64>,
    pub r_squared: Option<f64>,
    pub window: [f64; 2],
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "quotient_T")]
    pub quotient_t: f64,
    pub quotient_value: Option<f64>,
}

impl FitFile {
    pub fn from_report(cfg: &RunConfig, report: &RunReport) -> Self {
        let window = report
            .fit
            .map(|f| [f.window.0, f.window.1])
            .unwrap_or_else(|| {
                let [lo, hi] = cfg.outputs.fit_window;
                [lo * cfg.time.t_end, hi * cfg.time.t_end]
            });
        Self {
            c: report.fit.map(|f| f.c),
            k: report.fit.map(|f| f.k),
            r_squared: report.fit.map(|f| f.r_squared),
            window,
            e0: report.e0,
            quotient_t: report.quotient_horizon,
            quotient_value: report.quotient,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct SummaryFile<'a> {
    status: &'static str,
    message: Option<&'a str>,
    steps: usize,
    stop_reason: Option<gglab_core::StopReason>,
    #[serde(rename = "E0")]
    e0: f64,
    final_energy: Option<f64>,
    fit: FitFile,
    fit_error: Option<&'a str>,
    max_residual_rel: Option<f64>,
    multiplier_ratio: Option<f64>,
    max_h1_seminorm: f64,
    cfl_warnings: usize,
    max_courant: f64,
    wall_time_s: f64,
    config: &'a RunConfig,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn write_energy_csv(path: &Path, records: &[EnergyRecord]) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if records.is_empty() {
        w.write_record(ENERGY_HEADER).map_err(csv_err)?;
    }
    for r in records {
        w.serialize(EnergyRow::from(r)).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyRow>, OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

fn write_snapshot(path: &Path, grid: &Grid, state: &gglab_core::State) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["x", "u", "v"]).map_err(csv_err)?;
    for (i, (u, v)) in state.u.iter().zip(&state.v).enumerate() {
        w.serialize((grid.x(i), u, v)).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_run(cfg: &RunConfig, report: &RunReport, dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_energy_csv(&dir.join("energy.csv"), &report.records)?;
    let fit = FitFile::from_report(cfg, report);
    write_json(&dir.join("fit.json"), &fit)?;
    if cfg.outputs.snapshots && !report.snapshots.is_empty() {
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
        if let Ok(grid) = cfg.grid() {
            let dt = cfg.time.dt;
            for s in &report.snapshots {
                let step = (s.t / dt).round() as usize;
                write_snapshot(&snap_dir.join(format!("step_{step:08}.csv")), &grid, s)?;
            }
        }
    }
    let summary = SummaryFile {
        status: report.status.as_str(),
        message: report.message.as_deref(),
        steps: report.steps,
        stop_reason: report.stop_reason,
        e0: report.e0,
        final_energy: report.records.last().map(|r| r.energy),
        fit,
        fit_error: report.fit_error.as_deref(),
        max_residual_rel: report.max_residual,
        multiplier_ratio: report.multiplier_ratio,
        max_h1_seminorm: report.max_h1_seminorm,
        cfl_warnings: report.cfl_warnings,
        max_courant: report.max_courant,
        wall_time_s: report.wall_time_s,
        config: cfg,
    };
    write_json(&dir.join("summary.json"), &summary)
}
