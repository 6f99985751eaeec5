use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{timed, Fit, Report, Table, Verdict};
use crate::claws;
use crate::error::{Error, Result};
use crate::flows::{flow_energy_derivative_with, flow_energy_derivatives, flow_energy_time_difference, DerivativeRoute};
use crate::measures::{lq_norm_of, sample_mu, GaussianSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnDecayParams {
    pub k: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    pub count: usize,
    pub seed: u64,
    pub mode_cutoff: usize,
    /// Admissible log-log slope of `‖G_N‖` against `N`.
    #[serde(default = "default_slope_band")]
    pub slope_band: [f64; 2],
}

fn default_q() -> f64 {
    2.0
}
fn default_slope_band() -> [f64; 2] {
    [-1.3, -0.7]
}

impl Default for GnDecayParams {
    fn default() -> Self {
        GnDecayParams {
            k: 6,
            q: default_q(),
            n_list: vec![16, 32, 64, 128, 256],
            count: 2000,
            seed: 2024,
            mode_cutoff: 512,
            slope_band: default_slope_band(),
        }
    }
}

fn derivative_name(k: usize, j: usize) -> String {
    if j == k {
        "G".into()
    } else if j + 1 == k {
        "H".into()
    } else {
        format!("L{j}")
    }
}

/// `‖d/dt E_{j/2}(π_N Φ_t^N u)|₀‖_{L^q(μ_{k/2})}` for `j = 0..=k` along
/// the N list: `G_N` (`j = k`), `H_N` (`j = k - 1`) and `L_N^j`.
pub fn check_gn_decay(params: &GnDecayParams) -> Result<Report> {
    if params.k < 6 || params.k % 2 != 0 {
        return Err(Error::InvalidArgument(format!("k = 2(m+1) with m >= 2 required, got k = {}", params.k)));
    }
    if params.n_list.is_empty() || params.n_list.windows(2).any(|w| w[1] <= w[0]) || params.n_list[0] == 0 {
        return Err(Error::InvalidArgument("N list must be nonempty, positive and ascending".into()));
    }
    if !(params.q >= 1.0) || !params.q.is_finite() {
        return Err(Error::InvalidArgument(format!("q must lie in [1, inf), got {}", params.q)));
    }
    let spec = GaussianSpec::new(params.k, params.mode_cutoff, params.seed);
    timed("gn-decay", params, |r| {
        if params.n_list.iter().any(|&n| n < 8 || 2 * n > params.mode_cutoff) {
            r.warnings.push(format!(
                "N list leaves [8, mode_cutoff/2] = [8, {}]",
                params.mode_cutoff / 2
            ));
        }
        let samples = sample_mu(&spec, params.count)?;
        let k = params.k;
        let mut cols = vec!["N".to_string()];
        for j in (0..=k).rev() {
            let name = derivative_name(k, j);
            cols.push(name.clone());
            cols.push(format!("{name}_se"));
        }
        let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut t = Table::new("norms", &col_refs);
        let mut series = vec![Vec::new(); k + 1];
        for &n in &params.n_list {
            let d: Vec<Vec<f64>> = samples
                .par_iter()
                .map(|u| flow_energy_derivatives(u, n, k))
                .collect::<Result<_>>()?;
            let mut row = vec![n as f64];
            for j in (0..=k).rev() {
                let values: Vec<f64> = d.iter().map(|x| x[j]).collect();
                let e = lq_norm_of(&values, params.q);
                series[j].push(e.mean);
                row.push(e.mean);
                row.push(e.se);
            }
            t.push(row);
        }
        for j in (0..=k).rev() {
            let name = derivative_name(k, j);
            r.verdicts
                .push(Verdict::strictly_decreasing(6, format!("‖{name}_N‖ strictly decreasing"), &series[j]));
            if params.n_list.len() >= 2 && series[j].iter().all(|v| *v > 0.0) {
                r.fits.push(Fit::from_table(&name, &t, "N", &name, true, true)?);
            }
        }
        match r.fit("G") {
            Some(f) => {
                let [lo, hi] = params.slope_band;
                r.verdicts.push(Verdict::within(6, "G_N log-log slope", f.slope, lo, hi));
            }
            None => r.warnings.push("no G_N fit: fewer than two positive estimates".into()),
        }
        r.tables.push(t);
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleParams {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_rel")]
    pub relative_tolerance: f64,
    /// Half-width of the centred time difference.
    #[serde(default = "default_step")]
    pub fd_step: f64,
    /// Values below `zero_floor·(1 + |E_{j/2}(π_N u)|)` count as zero.
    #[serde(default = "default_floor")]
    pub zero_floor: f64,
}

fn default_rel() -> f64 {
    1e-5
}
fn default_step() -> f64 {
    1e-6
}
fn default_floor() -> f64 {
    1e-9
}

impl Default for TriangleParams {
    fn default() -> Self {
        TriangleParams {
            k: 6,
            n: 16,
            count: 20,
            seed: 7,
            relative_tolerance: default_rel(),
            fd_step: default_step(),
            zero_floor: default_floor(),
        }
    }
}

/// Relative disagreement, zero when both sit under `floor`.
fn disagreement(a: f64, b: f64, floor: f64) -> (f64, bool) {
    let m = a.abs().max(b.abs());
    if m <= floor {
        (0.0, true)
    } else {
        ((a - b).abs() / m, false)
    }
}

/// Chain rule, `∫ p*_N` and a centred time difference of
/// `E_{j/2}(π_N Φ_t^N u)` compared pairwise on samples of `μ_{k/2}`.
pub fn check_oracle_triangle(params: &TriangleParams) -> Result<Report> {
    if params.k > claws::K_MAX || params.n == 0 || params.count == 0 {
        return Err(Error::InvalidArgument("triangle needs k <= K_MAX, N >= 1, count >= 1".into()));
    }
    if !(params.fd_step > 0.0) {
        return Err(Error::InvalidArgument("fd_step must be positive".into()));
    }
    let spec = GaussianSpec::new(params.k.max(1), params.n, params.seed);
    timed("oracle-triangle", params, |r| {
        let samples = sample_mu(&spec, params.count)?;
        let h = params.fd_step;
        let k = params.k;
        let rows: Vec<Vec<Vec<f64>>> = samples
            .par_iter()
            .map(|u| -> Result<Vec<Vec<f64>>> {
                let v = u.project_low(params.n);
                let e = claws::energies(&v, k)?;
                let fd = flow_energy_time_difference(u, params.n, k, h)?;
                (0..=k)
                    .map(|j| {
                        let chain = flow_energy_derivative_with(u, params.n, j, DerivativeRoute::Gradient)?;
                        let star = flow_energy_derivative_with(u, params.n, j, DerivativeRoute::StarN)?;
                        Ok(vec![j as f64, e[j], chain, star, fd[j]])
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut t = Table::new(
            "triangle",
            &["sample", "j", "energy", "chain_rule", "star", "time_difference", "max_disagreement"],
        );
        let mut worst: f64 = 0.0;
        let mut floored = 0usize;
        for (i, per_j) in rows.iter().enumerate() {
            for row in per_j {
                let floor = params.zero_floor * (1.0 + row[1].abs());
                let mut m: f64 = 0.0;
                for (a, b) in [(row[2], row[3]), (row[2], row[4]), (row[3], row[4])] {
                    let (d, z) = disagreement(a, b, floor);
                    floored += z as usize;
                    m = m.max(d);
                }
                worst = worst.max(m);
                let mut full = vec![i as f64];
                full.extend_from_slice(row);
                full.push(m);
                t.push(full);
            }
        }
        if floored > 0 {
            r.warnings.push(format!("{floored} comparisons had both values at the round-off floor and count as zero"));
        }
        r.verdicts.push(Verdict::at_most(
            4,
            "chain rule, p*_N and time difference agree pairwise",
            worst,
            params.relative_tolerance,
        ));
        r.tables.push(t);
        Ok(())
    })
}
