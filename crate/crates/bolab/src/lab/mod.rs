//! Experiments that turn the laboratory's claims into tables, fits and
//! pass/fail verdicts.

mod decay;
mod dynamics;
mod ensemble;
mod sums;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::FourierField;

pub use decay::{check_gn_decay, check_oracle_triangle, GnDecayParams, TriangleParams};
pub use dynamics::{
    check_conservation, check_flow_convergence, check_liouville, recurrence_scan, ConservationParams,
    ConvergenceParams, LiouvilleParams, RecurrenceParams,
};
pub use ensemble::{
    check_density_convergence, check_invariance, check_sampler, DensityProbeParams, InvarianceParams, Observable,
    SamplerParams, ESS_UNRELIABLE,
};
pub use sums::{check_lemma_prod, lemma_sum, lemma_sum_brute_force, LemmaProdParams};

/// Rows of named numeric columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Header row plus one line per row.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Least-squares line `y = slope·x + intercept` through a table's columns,
/// after the stated logarithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub name: String,
    pub table: String,
    pub x: String,
    pub y: String,
    pub log_x: bool,
    pub log_y: bool,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl Fit {
    pub fn from_table(name: &str, table: &Table, x: &str, y: &str, log_x: bool, log_y: bool) -> Result<Self> {
        let missing = |c: &str| Error::InvalidArgument(format!("table {} has no column {c}", table.name));
        let xs = table.column(x).ok_or_else(|| missing(x))?;
        let ys = table.column(y).ok_or_else(|| missing(y))?;
        let tx = |v: f64| if log_x { v.ln() } else { v };
        let ty = |v: f64| if log_y { v.ln() } else { v };
        let (slope, intercept, r2) = least_squares(
            &xs.iter().map(|v| tx(*v)).collect::<Vec<_>>(),
            &ys.iter().map(|v| ty(*v)).collect::<Vec<_>>(),
        )?;
        Ok(Fit {
            name: name.into(),
            table: table.name.clone(),
            x: x.into(),
            y: y.into(),
            log_x,
            log_y,
            slope,
            intercept,
            r2,
        })
    }
}

/// `(slope, intercept, r²)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("a line fit needs at least two paired points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("line fit through non-finite values".into()));
    }
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("line fit with a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, my - slope * mx, r2))
}

/// Outcome of one check, tied to a numbered acceptance criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: u8,
    pub check: String,
    pub passed: bool,
    pub measured: f64,
    /// Upper bound, or lower bound for [`Verdict::at_least`].
    pub tolerance: f64,
    /// Lower end of a two-sided band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
}

impl Verdict {
    /// Passes when `lo <= measured <= hi`.
    pub fn within(criterion: u8, check: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Verdict {
            criterion,
            check: check.into(),
            passed: measured >= lo && measured <= hi,
            measured,
            tolerance: hi,
            lower: Some(lo),
        }
    }

    /// Passes when `measured <= tolerance`.
    pub fn at_most(criterion: u8, check: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Verdict {
            criterion,
            check: check.into(),
            passed: measured <= tolerance,
            measured,
            tolerance,
            lower: None,
        }
    }

    /// Passes when `measured >= tolerance`.
    pub fn at_least(criterion: u8, check: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Verdict {
            criterion,
            check: check.into(),
            passed: measured >= tolerance,
            measured,
            tolerance,
            lower: None,
        }
    }

    /// `measured` is the largest ratio of consecutive entries.
    pub fn strictly_decreasing(criterion: u8, check: impl Into<String>, values: &[f64]) -> Self {
        let mut worst: f64 = 0.0;
        for w in values.windows(2) {
            let r = if w[0] > 0.0 {
                w[1] / w[0]
            } else if w[1] > 0.0 {
                f64::MAX
            } else {
                1.0
            };
            worst = worst.max(r);
        }
        Verdict {
            criterion,
            check: check.into(),
            passed: values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[1] < w[0]),
            measured: worst,
            tolerance: 1.0,
            lower: None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} [{}] {}: measured {:.4e}, ", self.criterion, self.check, self.measured)?;
        match self.lower {
            Some(lo) => write!(f, "band [{lo:.4e}, {:.4e}]", self.tolerance),
            None => write!(f, "tolerance {:.4e}", self.tolerance),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment_id: String,
    pub params: serde_json::Value,
    pub tables: Vec<Table>,
    pub fits: Vec<Fit>,
    pub verdicts: Vec<Verdict>,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Seconds.
    pub runtime: f64,
}

impl Report {
    pub(crate) fn new(experiment_id: &str, params: &impl Serialize) -> Result<Self> {
        Ok(Report {
            experiment_id: experiment_id.into(),
            params: serde_json::to_value(params)?,
            tables: Vec::new(),
            fits: Vec::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
            runtime: 0.0,
        })
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn fit(&self, name: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Runs `body` on a fresh report and stamps the elapsed time.
pub(crate) fn timed(
    experiment_id: &str,
    params: &impl Serialize,
    body: impl FnOnce(&mut Report) -> Result<()>,
) -> Result<Report> {
    let start = std::time::Instant::now();
    let mut report = Report::new(experiment_id, params)?;
    body(&mut report)?;
    report.runtime = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Hex SHA-256 of the canonical JSON of `config`.
pub fn config_hash(config: &serde_json::Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `report.json`, one CSV per table and `plot.gp` into `dir`; every
/// file carries `hash`.
pub fn emit_report(report: &Report, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
    write_report(report, dir, hash, None)
}

/// [`emit_report`] with `config` stored in `report.json` and its
/// [`config_hash`] stamped on every file.
pub fn emit_report_with_config(report: &Report, dir: &Path, config: &serde_json::Value) -> Result<Vec<PathBuf>> {
    write_report(report, dir, &config_hash(config), Some(config))
}

fn write_report(report: &Report, dir: &Path, hash: &str, config: Option<&serde_json::Value>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    let mut json = serde_json::to_value(report)?;
    json["config_hash"] = serde_json::Value::String(hash.into());
    if let Some(c) = config {
        json["config"] = c.clone();
    }
    write("report.json".into(), serde_json::to_string_pretty(&json)? + "\n")?;
    for t in &report.tables {
        write(format!("{}.csv", t.name), format!("# config {hash}\n{}", t.to_csv()))?;
    }
    write("plot.gp".into(), gnuplot_script(report, hash))?;
    Ok(written)
}

fn gnuplot_script(report: &Report, hash: &str) -> String {
    let mut s = format!("# config {hash}\nset datafile separator ','\nset key autotitle columnhead\n");
    for t in &report.tables {
        if t.columns.len() < 2 || t.rows.is_empty() {
            continue;
        }
        let fits: Vec<&Fit> = report.fits.iter().filter(|f| f.table == t.name).collect();
        let log_x = fits.iter().any(|f| f.log_x);
        let log_y = fits.iter().any(|f| f.log_y);
        s.push_str(&format!("\nset title '{}: {}'\n", report.experiment_id, t.name));
        s.push_str(if log_x { "set logscale x\n" } else { "unset logscale x\n" });
        s.push_str(if log_y { "set logscale y\n" } else { "unset logscale y\n" });
        let mut parts: Vec<String> = (2..=t.columns.len())
            .map(|i| format!("'{}.csv' using 1:{i} with linespoints", t.name))
            .collect();
        for f in fits {
            let x = if f.log_x { "log(x)" } else { "x" };
            let line = format!("{} * {x} + {}", f.slope, f.intercept);
            let y = if f.log_y { format!("exp({line})") } else { line };
            parts.push(format!("{y} title 'fit {}' with lines", f.name));
        }
        s.push_str(&format!("plot {}\npause -1\n", parts.join(", ")));
    }
    s
}

/// `Σ a_n cos nx + Σ b_n sin nx`, `a = cos[n-1]`, `b = sin[n-1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPolynomial {
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigPolynomial {
    pub fn to_field(&self) -> FourierField {
        let b = self.cos.len().max(self.sin.len());
        let pos: Vec<num_complex::Complex64> = (0..b)
            .map(|i| {
                let a = self.cos.get(i).copied().unwrap_or(0.0);
                let s = self.sin.get(i).copied().unwrap_or(0.0);
                num_complex::Complex64::new(a / 2.0, -s / 2.0)
            })
            .collect();
        FourierField::real_from_positive(&pos)
    }
}
