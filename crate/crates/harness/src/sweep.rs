//! Cartesian parameter sweeps over config field paths.

use crate::config::{ConfigError, Issue, RunConfig, ValidationErrors, SCHEMA_VERSION};
use crate::output::{self, OutputError};
use crate::runner::{self, RunReport, RunStatus};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted path into the run config, e.g. `damping.target`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub schema: u32,
    pub base: RunConfig,
    pub axes: Vec<Axis>,
    pub out: Option<PathBuf>,
}

/// On-disk form; `base` may be an inline config or `"preset:NAME"`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    #[serde(default = "schema_version")]
    schema: u32,
    base: Value,
    axes: Vec<Axis>,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl SweepConfig {
    pub fn new(base: RunConfig, axes: Vec<Axis>) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            base,
            axes,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let file: SweepFile = serde_json::from_str(text)?;
        let base = match &file.base {
            Value::String(s) => crate::config::load_config(s)?,
            other => RunConfig::from_json(&other.to_string())?,
        };
        let cfg = Self {
            schema: file.schema,
            base,
            axes: file.axes,
            out: file.out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Axis values of every cell, last axis varying fastest.
    pub fn cells(&self) -> Vec<Vec<Value>> {
        let mut cells = vec![Vec::new()];
        for axis in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push(v.clone());
                        c
                    })
                })
                .collect();
        }
        cells
    }

    /// Base config with the given axis values substituted.
    pub fn cell_config(&self, values: &[Value]) -> Result<RunConfig, ValidationErrors> {
        let mut doc = serde_json::to_value(&self.base).expect("config serializes");
        for (axis, v) in self.axes.iter().zip(values) {
            set_path(&mut doc, &axis.path, v.clone()).map_err(|m| single(&axis.path, m))?;
        }
        let cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| single("sweep", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the axes; individual cells are validated when they run.
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut issues = Vec::new();
        if self.schema != SCHEMA_VERSION {
            issues.push(Issue {
                path: "schema".into(),
                message: format!("unsupported version {}", self.schema),
            });
        }
        if let Err(e) = self.base.validate() {
            issues.extend(e.0.into_iter().map(|i| Issue {
                path: format!("base.{}", i.path),
                message: i.message,
            }));
        }
        let doc = serde_json::to_value(&self.base).expect("config serializes");
        for (k, axis) in self.axes.iter().enumerate() {
            let at = format!("axes[{k}]");
            if axis.values.is_empty() {
                issues.push(Issue {
                    path: at.clone(),
                    message: "no values".into(),
                });
            }
            if self.axes[..k].iter().any(|a| a.path == axis.path) {
                issues.push(Issue {
                    path: at.clone(),
                    message: format!("duplicate axis '{}'", axis.path),
                });
            }
            let mut probe = doc.clone();
            if let Err(m) = set_path(&mut probe, &axis.path, Value::Null) {
                issues.push(Issue {
                    path: at,
                    message: m,
                });
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(issues))
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| self.base.outputs.dir.clone())
    }
}

fn single(path: &str, message: String) -> ValidationErrors {
    ValidationErrors(vec![Issue {
        path: path.to_string(),
        message,
    }])
}

/// Sets a dotted path; only the final key may be new.
fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut keys = path.split('.').peekable();
    let mut node = doc;
    while let Some(key) = keys.next() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| format!("'{path}' does not name a config field"))?;
        if keys.peek().is_none() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj
            .get_mut(key)
            .ok_or_else(|| format!("'{path}' does not name a config field"))?;
    }
    Err("empty axis path".into())
}

/// Text used for an axis value in `sweep.csv`.
pub fn value_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Inverse of [`value_cell`].
pub fn parse_value_cell(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<Value>,
    pub k: Option<f64>,
    pub c: Option<f64>,
    pub r_squared: Option<f64>,
    pub max_residual: Option<f64>,
    pub quotient: Option<f64>,
    pub status: String,
}

impl SweepRow {
    fn from_report(values: Vec<Value>, r: &RunReport) -> Self {
        Self {
            values,
            k: r.fit.map(|f| f.k),
            c: r.fit.map(|f| f.c),
            r_squared: r.fit.map(|f| f.r_squared),
            max_residual: r.max_residual,
            quotient: r.quotient,
            status: r.status.as_str().to_string(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok.as_str()
    }
}

pub const METRIC_COLUMNS: [&str; 6] = ["k", "C", "r_squared", "max_residual", "quotient", "status"];

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub reports: Vec<RunReport>,
    pub dir: PathBuf,
}

impl SweepReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(SweepRow::is_ok)
    }

    /// True if any cell was rejected by validation and none failed at runtime.
    pub fn only_invalid_failures(&self) -> bool {
        !self.all_ok()
            && self
                .rows
                .iter()
                .all(|r| r.is_ok() || r.status == RunStatus::Invalid.as_str())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> Option<f64> {
    s.parse().ok()
}

pub fn write_sweep_csv(path: &Path, axes: &[Axis], rows: &[SweepRow]) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let header: Vec<&str> = axes
        .iter()
        .map(|a| a.path.as_str())
        .chain(METRIC_COLUMNS)
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut rec: Vec<String> = row.values.iter().map(value_cell).collect();
        rec.extend([
            opt(row.k),
            opt(row.c),
            opt(row.r_squared),
            opt(row.max_residual),
            opt(row.quotient),
            row.status.clone(),
        ]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_sweep_csv(path: &Path) -> Result<(Vec<String>, Vec<SweepRow>), OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    let n_axes = header.len().saturating_sub(METRIC_COLUMNS.len());
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let f: Vec<&str> = rec.iter().collect();
        let m = &f[n_axes..];
        rows.push(SweepRow {
            values: f[..n_axes].iter().map(|s| parse_value_cell(s)).collect(),
            k: parse_opt(m[0]),
            c: parse_opt(m[1]),
            r_squared: parse_opt(m[2]),
            max_residual: parse_opt(m[3]),
            quotient: parse_opt(m[4]),
            status: m[5].to_string(),
        });
    }
    Ok((header[..n_axes].to_vec(), rows))
}

/// Reloads `sweep.csv` and rebuilds the config of every row.
pub fn revalidate_table(
    sweep: &SweepConfig,
    path: &Path,
) -> Result<Vec<Result<RunConfig, ValidationErrors>>, OutputError> {
    let (axes, rows) = read_sweep_csv(path)?;
    let expected: Vec<&str> = sweep.axes.iter().map(|a| a.path.as_str()).collect();
    if axes != expected {
        return Ok(vec![Err(single(
            "sweep.csv",
            format!("axis columns {axes:?} do not match {expected:?}"),
        ))]);
    }
    Ok(rows.iter().map(|r| sweep.cell_config(&r.values)).collect())
}

/// Runs every cell on a pool of `jobs` threads, each into `dir/cell_NNNN`,
/// then writes `dir/sweep.csv`.
pub fn run_sweep(sweep: &SweepConfig, jobs: usize, dir: &Path) -> Result<SweepReport, OutputError> {
    let cells = sweep.cells();
    log::info!("sweep: {} cells on {} threads", cells.len(), jobs.max(1));
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<(SweepRow, RunReport), OutputError>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .enumerate()
            .map(|(i, values)| {
                let cell_dir = dir.join(format!("cell_{i:04}"));
                let report = match sweep.cell_config(values) {
                    Ok(mut cfg) => {
                        cfg.outputs.dir = cell_dir.clone();
                        let rep = runner::run_single(&cfg, &cell_dir)?;
                        output::write_json(&cell_dir.join("config.json"), &cfg)?;
                        rep
                    }
                    Err(e) => invalid_report(sweep, e),
                };
                log::info!("cell {i}: {}", report.status.as_str());
                Ok((SweepRow::from_report(values.clone(), &report), report))
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        let (row, rep) = r?;
        rows.push(row);
        reports.push(rep);
    }
    write_sweep_csv(&dir.join("sweep.csv"), &sweep.axes, &rows)?;
    Ok(SweepReport {
        rows,
        reports,
        dir: dir.to_path_buf(),
    })
}

fn invalid_report(sweep: &SweepConfig, err: ValidationErrors) -> RunReport {
    RunReport::failed(RunStatus::Invalid, err.to_string(), &sweep.base)
}
