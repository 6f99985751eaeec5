use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{timed, Fit, Report, Table, TrigPolynomial, Verdict};
use crate::claws;
use crate::error::{Error, Result};
use crate::flows::{
    coordinate_divergence, evolve_full, evolve_truncated, evolve_truncated_at, truncation_gap, FieldPart, FlowConfig,
};
use crate::measures::{sample_one, GaussianSpec};
use crate::spectral::FourierField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceParams {
    pub u0: TrigPolynomial,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    pub t: f64,
    /// The reference resolution is `reference.grid_bandwidth()`.
    pub reference: FlowConfig,
    #[serde(default = "default_s")]
    pub sobolev_s: f64,
    /// Largest admissible log-log slope of the `L²` error.
    #[serde(default = "default_slope_max")]
    pub slope_max: f64,
}

fn default_s() -> f64 {
    1.0
}
fn default_slope_max() -> f64 {
    -0.8
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            u0: TrigPolynomial {
                cos: vec![1.0],
                sin: vec![0.0, 0.5],
            },
            n_list: vec![8, 16, 32, 64],
            t: 0.1,
            reference: FlowConfig::new(128).with_grid_bandwidth(256),
            sobolev_s: default_s(),
            slope_max: default_slope_max(),
        }
    }
}

/// `‖Φ_t u0 − Φ_t^N u0‖` in `L²` and `H^s` against a certified
/// high-resolution reference.
pub fn check_flow_convergence(params: &ConvergenceParams) -> Result<Report> {
    if params.n_list.is_empty() || params.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("N list must be nonempty and ascending".into()));
    }
    let u0 = params.u0.to_field();
    timed("flow-convergence", params, |r| {
        let certified = evolve_full(&u0, &params.reference, params.t)?;
        if certified.saturated {
            r.warnings.push(format!(
                "reference resolution saturated: tail fraction {:.2e}",
                certified.tail_fraction
            ));
        }
        let gaps: Vec<_> = params
            .n_list
            .par_iter()
            .map(|&n| truncation_gap(&u0, n, &params.reference, params.t))
            .collect::<Result<_>>()?;
        let mut t = Table::new("errors", &["N", "l2_error", "hs_error", "richardson"]);
        for (n, g) in params.n_list.iter().zip(&gaps) {
            t.push(vec![
                *n as f64,
                g.gap.sobolev_norm(0.0, false),
                g.gap.sobolev_norm(params.sobolev_s, false),
                g.richardson,
            ]);
        }
        let l2 = t.column("l2_error").expect("column");
        let hs = t.column("hs_error").expect("column");
        if l2.iter().all(|e| *e == 0.0) {
            r.warnings.push("all errors vanish".into());
        } else {
            r.verdicts.push(Verdict::strictly_decreasing(7, "L2 error strictly decreasing", &l2));
            r.verdicts.push(Verdict::strictly_decreasing(7, "H^s error strictly decreasing", &hs));
            if l2.len() >= 2 && l2.iter().all(|e| *e > 0.0) {
                let f = Fit::from_table("l2", &t, "N", "l2_error", true, true)?;
                r.verdicts.push(Verdict::at_most(7, "L2 error log-log slope", f.slope, params.slope_max));
                r.fits.push(f);
                if hs.iter().all(|e| *e > 0.0) {
                    r.fits.push(Fit::from_table("hs", &t, "N", "hs_error", true, true)?);
                }
            }
        }
        let mut c = Table::new("reference", &["richardson", "tail_fraction"]);
        c.push(vec![certified.richardson, certified.tail_fraction]);
        r.tables.push(t);
        r.tables.push(c);
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConservationParams {
    pub u0: TrigPolynomial,
    pub k_max: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub cfg: FlowConfig,
    /// Points of the time grid after `t = 0`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_drift_max")]
    pub drift_max: f64,
    /// Coarse step of the dt-halving order study; `null` skips it.
    #[serde(default = "default_order_dt")]
    pub order_dt: Option<f64>,
    #[serde(default = "default_order_band")]
    pub order_band: f64,
}

fn default_samples() -> usize {
    10
}
fn default_drift_max() -> f64 {
    1e-6
}
fn default_order_band() -> f64 {
    0.5
}

fn default_order_dt() -> Option<f64> {
    Some(0.01)
}

impl Default for ConservationParams {
    fn default() -> Self {
        ConservationParams {
            u0: TrigPolynomial {
                cos: vec![0.1],
                sin: vec![0.0, 0.05],
            },
            k_max: 6,
            horizon: 1.0,
            cfg: FlowConfig::new(16).with_grid_bandwidth(32),
            samples: default_samples(),
            drift_max: default_drift_max(),
            order_dt: default_order_dt(),
            order_band: default_order_band(),
        }
    }
}

/// `E_{k/2}(c u)` through the symbolic evaluator, or the quadratic parts
/// when `c = 0`.
fn invariants(u: &FourierField, c: f64, k_max: usize) -> Result<Vec<f64>> {
    if c == 0.0 {
        return Ok((0..=k_max).map(|k| u.sobolev_norm_sq(k as f64 / 2.0, true)).collect());
    }
    let w = u.scale(c);
    (0..=k_max)
        .map(|k| Ok(claws::eval_expr(&*claws::energy(k)?, &w)?.re))
        .collect()
}

fn relative_drift(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
}

/// Relative drift of every energy along [`evolve_full`], plus the order of
/// the drift under dt-halving.
pub fn check_conservation(params: &ConservationParams) -> Result<Report> {
    if params.k_max > claws::K_MAX || params.samples == 0 {
        return Err(Error::InvalidArgument("conservation needs k_max <= K_MAX and samples >= 1".into()));
    }
    let cfg = params.cfg.clone().with_horizon(params.horizon);
    cfg.validate()?;
    let u0 = params.u0.to_field();
    let c = cfg.nonlinearity;
    timed("conservation", params, |r| {
        let e0 = invariants(&u0, c, params.k_max)?;
        let times: Vec<f64> = (1..=params.samples)
            .map(|i| params.horizon * i as f64 / params.samples as f64)
            .collect();
        let rows: Vec<Vec<f64>> = times
            .par_iter()
            .map(|&t| -> Result<Vec<f64>> {
                let sol = evolve_full(&u0, &cfg, t)?;
                let e = invariants(&sol.field, c, params.k_max)?;
                let mut row = vec![t, sol.richardson];
                row.extend(e0.iter().zip(&e).map(|(a, b)| relative_drift(*a, *b)));
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut cols = vec!["t".to_string(), "richardson".to_string()];
        cols.extend((0..=params.k_max).map(|k| format!("drift_E{k}")));
        let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut t = Table::new("drift", &col_refs);
        for row in rows {
            t.push(row);
        }
        let worst = t.rows.iter().flat_map(|row| row[2..].iter().cloned()).fold(0.0, f64::max);
        r.verdicts.push(Verdict::at_most(
            2,
            format!("max relative energy drift, k <= {}", params.k_max),
            worst,
            params.drift_max,
        ));
        r.tables.push(t);
        if let Some(h) = params.order_dt {
            let k = cfg.grid_bandwidth();
            let run = |dt: f64| -> Result<Vec<f64>> {
                let coarse = FlowConfig::new(k)
                    .with_dt(dt)
                    .with_horizon(params.horizon)
                    .with_nonlinearity(c)
                    .with_scheme(cfg.scheme)
                    .with_drift_tolerance(1.0);
                let u = evolve_truncated(&u0, &coarse, params.horizon)?;
                let e = invariants(&u, c, params.k_max)?;
                Ok(e0.iter().zip(&e).map(|(a, b)| relative_drift(*a, *b)).collect())
            };
            let (d1, d2) = (run(h)?, run(h / 2.0)?);
            let mut o = Table::new("order", &["k", "drift_dt", "drift_half_dt", "observed_order"]);
            for kk in 0..=params.k_max {
                let order = (d1[kk] / d2[kk]).log2();
                o.push(vec![kk as f64, d1[kk], d2[kk], order]);
                // below ~1e-13 the drift is round-off and has no order
                if d2[kk] > 1e-13 {
                    r.verdicts.push(Verdict::within(
                        2,
                        format!("E{kk} drift order under dt-halving"),
                        order,
                        4.0 - params.order_band,
                        4.0 + params.order_band,
                    ));
                } else {
                    r.warnings.push(format!("E{kk}: drift {:.1e} at round-off, order not measured", d2[kk]));
                }
            }
            r.tables.push(o);
        }
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceParams {
    pub u0: TrigPolynomial,
    #[serde(default)]
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub stride: f64,
    /// Its horizon is replaced by `T`.
    pub cfg: FlowConfig,
    /// Start of the running minimum.
    #[serde(default = "default_departure")]
    pub departure: f64,
}

fn default_departure() -> f64 {
    1.0
}

impl Default for RecurrenceParams {
    fn default() -> Self {
        RecurrenceParams {
            u0: TrigPolynomial {
                cos: vec![0.5],
                sin: vec![0.0, 0.25],
            },
            sigma: 0.0,
            horizon: 200.0,
            stride: 0.05,
            cfg: FlowConfig::new(8),
            departure: default_departure(),
        }
    }
}

/// `d(t) = ‖Φ_t^N u0 − u0‖_{H^σ}` on a time grid, its local minima and
/// its running minimum after the departure time.
pub fn recurrence_scan(params: &RecurrenceParams) -> Result<Report> {
    if !(params.stride > 0.0) || !(params.horizon > 0.0) {
        return Err(Error::InvalidArgument("recurrence needs positive T and stride".into()));
    }
    let cfg = params.cfg.clone().with_horizon(params.horizon);
    let u0 = params.u0.to_field();
    timed("recurrence", params, |r| {
        let steps = (params.horizon / params.stride).round().max(1.0) as usize;
        let mut times: Vec<f64> = (1..=steps).map(|i| (i as f64 * params.stride).min(params.horizon)).collect();
        if times.last() != Some(&params.horizon) {
            times.push(params.horizon);
        }
        let path = evolve_truncated_at(&u0, &cfg, &times)?;
        let c = cfg.nonlinearity;
        let low0 = u0.project_low(cfg.n);
        let inv0 = crate::flows::flow_invariants(&low0, c, 1)?;
        let mut series = Table::new("distance", &["t", "d"]);
        series.push(vec![0.0, 0.0]);
        let mut worst_drift: f64 = 0.0;
        for (t, u) in times.iter().zip(&path) {
            let d = (u - &u0).sobolev_norm(params.sigma, false);
            series.push(vec![*t, d]);
            let inv = crate::flows::flow_invariants(&u.project_low(cfg.n), c, 1)?;
            for (a, b) in inv0.iter().zip(&inv) {
                worst_drift = worst_drift.max(relative_drift(*a, *b));
            }
        }
        let mut minima = Table::new("local_minima", &["t", "d"]);
        for w in series.rows.windows(3) {
            if w[1][1] < w[0][1] && w[1][1] <= w[2][1] {
                minima.push(w[1].clone());
            }
        }
        let mut running = Table::new("running_minimum", &["t", "d_min"]);
        let mut best = f64::INFINITY;
        for row in series.rows.iter().filter(|row| row[0] > params.departure) {
            best = best.min(row[1]);
            running.push(vec![row[0], best]);
        }
        let d_min = running.column("d_min").expect("column");
        let monotone = d_min.windows(2).all(|w| w[1] <= w[0]);
        r.verdicts.push(Verdict::at_most(
            11,
            "conservation of E0 and E1/2 along the run",
            worst_drift,
            cfg.drift_tolerance,
        ));
        r.verdicts.push(Verdict::at_least(
            11,
            "running minimum nonincreasing",
            if monotone { 1.0 } else { 0.0 },
            1.0,
        ));
        if let Some(last) = d_min.last() {
            r.warnings.push(format!("final running minimum {last:.6e}"));
        }
        r.tables.push(series);
        r.tables.push(minima);
        r.tables.push(running);
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiouvilleParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Points are drawn from `μ_{k/2}` band-limited to `N`.
    #[serde(default = "default_point_k")]
    pub k: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_div_tol")]
    pub tolerance: f64,
}

fn default_point_k() -> usize {
    2
}
fn default_eps() -> f64 {
    1e-3
}
fn default_div_tol() -> f64 {
    1e-8
}

impl Default for LiouvilleParams {
    fn default() -> Self {
        LiouvilleParams {
            n: 16,
            trials: 10,
            seed: 5,
            k: default_point_k(),
            eps: default_eps(),
            tolerance: default_div_tol(),
        }
    }
}

/// Divergence of the truncated vector field in the real coordinates of
/// `E_N`, at the origin and at random points.
pub fn check_liouville(params: &LiouvilleParams) -> Result<Report> {
    if params.n == 0 || params.n > 64 {
        return Err(Error::InvalidArgument(format!("Liouville check needs 1 <= N <= 64, got {}", params.n)));
    }
    if !(params.eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let spec = GaussianSpec::new(params.k.max(1), params.n, params.seed);
    timed("liouville", params, |r| {
        let mut t = Table::new("divergence", &["trial", "full", "linear", "nonlinear"]);
        let mut points = vec![FourierField::zeros(params.n, true)];
        points.extend((0..params.trials as u64).map(|i| sample_one(&spec, i)));
        let (mut full, mut nl): (f64, f64) = (0.0, 0.0);
        for (i, v) in points.iter().enumerate() {
            let d: Vec<f64> = [FieldPart::Full, FieldPart::Linear, FieldPart::Nonlinear]
                .iter()
                .map(|p| coordinate_divergence(v, params.n, params.eps, *p))
                .collect();
            full = full.max(d[0].abs());
            nl = nl.max(d[2].abs());
            t.push(vec![i as f64, d[0], d[1], d[2]]);
        }
        r.verdicts.push(Verdict::at_most(8, "max |divergence| of the truncated field", full, params.tolerance));
        r.verdicts.push(Verdict::at_most(8, "max |divergence| of the nonlinear part", nl, params.tolerance));
        r.tables.push(t);
        Ok(())
    })
}
