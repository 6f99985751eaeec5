use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{timed, Fit, Report, Table, Verdict};
use crate::claws;
use crate::error::{Error, Result};
use crate::flows::{evolve_truncated_at, FlowConfig};
use crate::measures::{density_f, lq_norm_of, sample_mu, weighted_ensemble, weighted_mean, DensityOptions, GaussianSpec};
use crate::spectral::{pairwise_sum, FourierField};

/// A scalar functional of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Observable {
    /// `‖u‖_{H^σ}`.
    Sobolev { sigma: f64 },
    /// `|coeff(n)|²`.
    Mode { n: i64 },
    /// `E_{j/2}(u)`.
    Energy { j: usize },
}

impl Observable {
    /// `‖u‖_{H^σ}` for `σ ∈ {0,1,2}`, `|coeff(n)|²` for `n ∈ {1,2,4}` and
    /// `E_{j/2}` for `j <= k`.
    pub fn default_set(k: usize) -> Vec<Observable> {
        let mut v: Vec<Observable> = [0.0, 1.0, 2.0].iter().map(|s| Observable::Sobolev { sigma: *s }).collect();
        v.extend([1, 2, 4].iter().map(|n| Observable::Mode { n: *n }));
        v.extend((0..=k).map(|j| Observable::Energy { j }));
        v
    }

    fn eval(&self, u: &FourierField, energies: &[f64]) -> f64 {
        match self {
            Observable::Sobolev { sigma } => u.sobolev_norm(*sigma, false),
            Observable::Mode { n } => u.coeff(*n).norm_sqr(),
            Observable::Energy { j } => energies[*j],
        }
    }

    fn energy_index(&self) -> Option<usize> {
        match self {
            Observable::Energy { j } => Some(*j),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceParams {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub times: Vec<f64>,
    pub count: usize,
    pub seed: u64,
    /// Default `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_cutoff: Option<usize>,
    #[serde(default = "default_c")]
    pub nonlinearity: f64,
    /// Step of the truncated flow; samples of `μ_{k/2}` carry enough
    /// energy at `N = 32` that the automatic step drifts past tolerance.
    #[serde(default = "default_dt")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<Observable>>,
    #[serde(default = "default_z")]
    pub z_max: f64,
    #[serde(default = "default_ess_min")]
    pub ess_min: f64,
}

fn default_c() -> f64 {
    1.0
}
fn default_dt() -> Option<f64> {
    Some(2.5e-4)
}
fn default_z() -> f64 {
    3.0
}
fn default_ess_min() -> f64 {
    200.0
}

/// Below this the report is flagged unreliable.
pub const ESS_UNRELIABLE: f64 = 30.0;

impl Default for InvarianceParams {
    fn default() -> Self {
        InvarianceParams {
            k: 6,
            n: 32,
            r: 8.0,
            times: vec![0.25, 0.5],
            count: 4000,
            seed: 11,
            mode_cutoff: None,
            nonlinearity: default_c(),
            dt: default_dt(),
            observables: None,
            z_max: default_z(),
            ess_min: default_ess_min(),
        }
    }
}

/// Weighted means of observables along `Φ_t^N` with the weights frozen
/// at `t = 0`, each compared with its `t = 0` value.
pub fn check_invariance(params: &InvarianceParams) -> Result<Report> {
    let observables = params.observables.clone().unwrap_or_else(|| Observable::default_set(params.k));
    if let Some(j) = observables.iter().filter_map(Observable::energy_index).max() {
        if j > claws::K_MAX {
            return Err(Error::InvalidArgument(format!("energy observable index {j} above {}", claws::K_MAX)));
        }
    }
    let mut times = vec![0.0];
    times.extend(params.times.iter().cloned());
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must be positive and ascending".into()));
    }
    let horizon = *times.last().expect("nonempty");
    let mut cfg = FlowConfig::new(params.n)
        .with_nonlinearity(params.nonlinearity)
        .with_horizon(horizon.max(f64::MIN_POSITIVE));
    if let Some(dt) = params.dt {
        cfg = cfg.with_dt(dt);
    }
    let spec = GaussianSpec::new(params.k, params.mode_cutoff.unwrap_or(params.n), params.seed);
    let j_max = observables.iter().filter_map(Observable::energy_index).max();
    let recorded = InvarianceParams {
        observables: Some(observables.clone()),
        ..params.clone()
    };
    timed("invariance", &recorded, |r| {
        let ens = weighted_ensemble(&spec, params.n, params.r, params.count)?;
        if ens.ess < ESS_UNRELIABLE {
            r.warnings.push(format!("unreliable: ess {:.1} below {ESS_UNRELIABLE}", ens.ess));
        }
        if ens.clipped > 0 {
            r.warnings.push(format!("{} weights clipped at the exponent cap", ens.clipped));
        }
        // values[sample][time][observable]
        let values: Vec<Vec<Vec<f64>>> = ens
            .samples
            .par_iter()
            .map(|u| -> Result<Vec<Vec<f64>>> {
                let path = evolve_truncated_at(u, &cfg, &times)?;
                path.iter()
                    .map(|v| {
                        let e = match j_max {
                            Some(j) => claws::energies(v, j)?,
                            None => Vec::new(),
                        };
                        Ok(observables.iter().map(|o| o.eval(v, &e)).collect())
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut t = Table::new("observables", &["t", "observable", "mean", "se", "z", "paired_se"]);
        let mut worst: f64 = 0.0;
        for (oi, _) in observables.iter().enumerate() {
            let at = |ti: usize| -> Vec<f64> { values.iter().map(|s| s[ti][oi]).collect() };
            let base = at(0);
            let m0 = weighted_mean(&ens.weights, &base);
            for (ti, time) in times.iter().enumerate() {
                let now = at(ti);
                let m = weighted_mean(&ens.weights, &now);
                let diff: Vec<f64> = now.iter().zip(&base).map(|(a, b)| a - b).collect();
                let paired = weighted_mean(&ens.weights, &diff);
                let z = if m.mean == m0.mean {
                    0.0
                } else if m.se > 0.0 {
                    (m.mean - m0.mean) / m.se
                } else {
                    f64::MAX
                };
                if ti > 0 {
                    worst = worst.max(z.abs());
                }
                t.push(vec![*time, oi as f64, m.mean, m.se, z, paired.se]);
            }
        }
        let mut e = Table::new("ensemble", &["count", "ess", "clipped"]);
        e.push(vec![ens.len() as f64, ens.ess, ens.clipped as f64]);
        r.verdicts.push(Verdict::at_least(9, "effective sample size", ens.ess, params.ess_min));
        r.verdicts.push(Verdict::at_most(9, "max |z| of weighted means against t = 0", worst, params.z_max));
        r.tables.push(t);
        r.tables.push(e);
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerParams {
    pub k: usize,
    pub count: usize,
    pub seed: u64,
    /// The samples are band-limited to the largest entry.
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    pub modes: Vec<usize>,
    /// Exponents below `(k-1)/2` whose `Ḣ^s` means must settle.
    pub s_stable: Vec<f64>,
    #[serde(default = "default_z")]
    pub z_max: f64,
    #[serde(default = "default_r2")]
    pub r2_min: f64,
    /// Largest relative change of a settling mean between the last two N.
    #[serde(default = "default_settle")]
    pub stabilization_tol: f64,
}

fn default_r2() -> f64 {
    0.95
}
fn default_settle() -> f64 {
    0.01
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            k: 6,
            count: 100_000,
            seed: 3,
            n_list: (3..=8).map(|p| 1usize << p).collect(),
            modes: vec![1, 2, 4, 8, 16],
            s_stable: vec![0.0, 1.0, 2.0],
            z_max: default_z(),
            r2_min: default_r2(),
            stabilization_tol: default_settle(),
        }
    }
}

struct Moments {
    mean: f64,
    se: f64,
}

fn moments(values: &[f64]) -> Moments {
    let m = values.len() as f64;
    let mean = pairwise_sum(values) / m;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let sd = if values.len() > 1 { (pairwise_sum(&dev) / (m - 1.0)).sqrt() } else { 0.0 };
    Moments {
        mean,
        se: sd / m.sqrt(),
    }
}

/// Second moments of `μ_{k/2}` against their closed forms, plus the
/// `Ḣ^s` behaviour of band-limited samples in `N`.
pub fn check_sampler(params: &SamplerParams) -> Result<Report> {
    if params.n_list.is_empty() || params.n_list.windows(2).any(|w| w[1] <= w[0]) || params.n_list[0] == 0 {
        return Err(Error::InvalidArgument("N list must be nonempty, positive and ascending".into()));
    }
    let top = *params.n_list.last().expect("nonempty");
    if params.modes.iter().any(|&n| n == 0 || n > top) {
        return Err(Error::InvalidArgument(format!("checked modes must lie in 1..={top}")));
    }
    let spec = GaussianSpec::new(params.k, top, params.seed);
    let critical = (params.k as f64 - 1.0) / 2.0;
    if params.s_stable.iter().any(|s| *s >= critical) {
        return Err(Error::InvalidArgument(format!("settling exponents must lie below {critical}")));
    }
    let mut exponents = params.s_stable.clone();
    exponents.push(critical);
    timed("sampler", params, |r| {
        let samples = sample_mu(&spec, params.count)?;
        // per sample: |c_n|² for the checked modes, then ‖π_N u‖²_{Ḣ^s} by (s, N)
        let stats: Vec<Vec<f64>> = samples
            .par_iter()
            .map(|u| {
                let mut row: Vec<f64> = params.modes.iter().map(|n| u.coeff(*n as i64).norm_sqr()).collect();
                for s in &exponents {
                    let terms: Vec<f64> = (1..=top)
                        .map(|n| 2.0 * (n as f64).powf(2.0 * s) * u.coeff(n as i64).norm_sqr())
                        .collect();
                    for &n in &params.n_list {
                        row.push(pairwise_sum(&terms[..n]));
                    }
                }
                row
            })
            .collect();
        let column = |i: usize| -> Moments { moments(&stats.iter().map(|s| s[i]).collect::<Vec<_>>()) };

        let mut modes = Table::new("mode_variance", &["n", "mean", "se", "expected", "z"]);
        let mut worst_mode: f64 = 0.0;
        for (i, &n) in params.modes.iter().enumerate() {
            let m = column(i);
            let expected = spec.mode_variance(n);
            let z = (m.mean - expected) / m.se;
            worst_mode = worst_mode.max(z.abs());
            modes.push(vec![n as f64, m.mean, m.se, expected, z]);
        }
        r.verdicts.push(Verdict::at_most(10, "per-mode variance |z|", worst_mode, params.z_max));

        let offset = params.modes.len();
        let width = params.n_list.len();
        let mut sobolev = Table::new("sobolev_means", &["s", "N", "ln_N", "mean", "se", "alpha", "z"]);
        let mut worst_alpha: f64 = 0.0;
        for (si, s) in exponents.iter().enumerate() {
            let mut means = Vec::new();
            for (ni, &n) in params.n_list.iter().enumerate() {
                let m = column(offset + si * width + ni);
                let (a, z) = if si + 1 == exponents.len() {
                    let a = spec.alpha(n);
                    let z = (m.mean - a) / m.se;
                    worst_alpha = worst_alpha.max(z.abs());
                    (a, z)
                } else {
                    (0.0, 0.0)
                };
                means.push(m.mean);
                sobolev.push(vec![*s, n as f64, (n as f64).ln(), m.mean, m.se, a, z]);
            }
            if si + 1 < exponents.len() && means.len() >= 2 {
                let (prev, last) = (means[means.len() - 2], means[means.len() - 1]);
                r.verdicts.push(Verdict::at_most(
                    10,
                    format!("H^{s} mean settles in N"),
                    (last - prev).abs() / last.abs(),
                    params.stabilization_tol,
                ));
            }
        }
        r.verdicts.push(Verdict::at_most(10, "critical Sobolev mean vs alpha(N) |z|", worst_alpha, params.z_max));

        let mut growth = Table::new("critical_growth", &["N", "mean"]);
        for row in sobolev.rows.iter().filter(|row| row[0] == critical) {
            growth.push(vec![row[1], row[3]]);
        }
        if growth.rows.len() >= 2 {
            let f = Fit::from_table("ln_N", &growth, "N", "mean", true, false)?;
            r.verdicts.push(Verdict::at_least(10, "critical mean against ln N, r²", f.r2, params.r2_min));
            r.verdicts.push(Verdict::at_least(10, "critical mean against ln N, slope", f.slope, 0.0));
            r.fits.push(f);
        }
        r.tables.push(modes);
        r.tables.push(sobolev);
        r.tables.push(growth);
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityProbeParams {
    pub k: usize,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    pub count: usize,
    pub seed: u64,
}

impl Default for DensityProbeParams {
    fn default() -> Self {
        DensityProbeParams {
            k: 6,
            r: 8.0,
            n_list: vec![16, 32, 64],
            count: 2000,
            seed: 13,
        }
    }
}

/// `‖F_{2N} − F_N‖_{L^q(μ_{k/2})}`, `q ∈ {1,2}`, on common samples
/// band-limited to `2N`.
pub fn check_density_convergence(params: &DensityProbeParams) -> Result<Report> {
    if params.n_list.is_empty() || params.n_list.windows(2).any(|w| w[1] <= w[0]) || params.n_list[0] == 0 {
        return Err(Error::InvalidArgument("N list must be nonempty, positive and ascending".into()));
    }
    timed("density-convergence", params, |r| {
        let mut t = Table::new("differences", &["N", "l1", "l1_se", "l2", "l2_se"]);
        let mut clipped = 0usize;
        for &n in &params.n_list {
            let spec = GaussianSpec::new(params.k, 2 * n, params.seed);
            let c_prime = spec.alpha_constant();
            let samples = sample_mu(&spec, params.count)?;
            let pairs: Vec<(f64, bool)> = samples
                .par_iter()
                .map(|u| -> Result<(f64, bool)> {
                    let hi = density_f(u, params.k, 2 * n, params.r, c_prime, DensityOptions::default())?;
                    let lo = density_f(u, params.k, n, params.r, c_prime, DensityOptions::default())?;
                    Ok((hi.value - lo.value, hi.clipped || lo.clipped))
                })
                .collect::<Result<_>>()?;
            clipped += pairs.iter().filter(|p| p.1).count();
            let d: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let (l1, l2) = (lq_norm_of(&d, 1.0), lq_norm_of(&d, 2.0));
            t.push(vec![n as f64, l1.mean, l1.se, l2.mean, l2.se]);
        }
        if clipped > 0 {
            r.warnings.push(format!("{clipped} weights clipped at the exponent cap"));
        }
        r.verdicts.push(Verdict::strictly_decreasing(
            12,
            "L1 norm of F_2N - F_N decreasing",
            &t.column("l1").expect("column"),
        ));
        r.verdicts.push(Verdict::strictly_decreasing(
            12,
            "L2 norm of F_2N - F_N decreasing",
            &t.column("l2").expect("column"),
        ));
        r.tables.push(t);
        Ok(())
    })
}
