//! Gaussian measures `μ_{k/2}`, the weights `F_{k/2,N,R}`, and Monte Carlo
//! estimators over them.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::claws;
use crate::error::{Error, Result};
use crate::spectral::{pairwise_sum, FourierField};

/// Largest exponent fed to `exp` before the weight is clipped.
pub const EXP_CAP: f64 = 700.0;

/// Per-mode law of `coeff(n)`, `n > 0`: real and imaginary parts
/// independent `N(0, (scale/|n|^{k/2})²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceRule {
    pub scale: f64,
}

impl Default for VarianceRule {
    /// `scale = 1/2`: formal density `exp(-‖u‖²_{Ḣ^{k/2}})`.
    fn default() -> Self {
        VarianceRule { scale: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub k: usize,
    pub mode_cutoff: usize,
    pub seed: u64,
    #[serde(default)]
    pub variance_rule: VarianceRule,
}

impl GaussianSpec {
    pub fn new(k: usize, mode_cutoff: usize, seed: u64) -> Self {
        GaussianSpec {
            k,
            mode_cutoff,
            seed,
            variance_rule: VarianceRule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("regularity index k must be >= 1".into()));
        }
        if self.mode_cutoff < 1 {
            return Err(Error::InvalidArgument("mode_cutoff must be >= 1".into()));
        }
        if !(self.variance_rule.scale > 0.0) {
            return Err(Error::InvalidArgument("variance scale must be positive".into()));
        }
        Ok(())
    }

    /// Standard deviation of each real component of `coeff(n)`.
    pub fn component_sd(&self, n: usize) -> f64 {
        self.variance_rule.scale / (n as f64).powf(self.k as f64 / 2.0)
    }

    /// `E|coeff(n)|²`.
    pub fn mode_variance(&self, n: usize) -> f64 {
        2.0 * self.component_sd(n).powi(2)
    }

    /// `c'` with `E‖π_N u‖²_{Ḣ^{(k-1)/2}} = Σ_{n<=N} c'/n`.
    pub fn alpha_constant(&self) -> f64 {
        4.0 * self.variance_rule.scale * self.variance_rule.scale
    }

    pub fn alpha(&self, n: usize) -> f64 {
        alpha_with(n, self.alpha_constant())
    }
}

/// Sample `index` of the stream fixed by `spec.seed`.
pub fn sample_one(spec: &GaussianSpec, index: u64) -> FourierField {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let pos: Vec<Complex64> = (1..=spec.mode_cutoff)
        .map(|n| {
            let h: f64 = rng.sample(StandardNormal);
            let l: f64 = rng.sample(StandardNormal);
            Complex64::new(h, l) * spec.component_sd(n)
        })
        .collect();
    FourierField::real_from_positive(&pos)
}

/// `count` independent draws from `μ_{k/2}` restricted to modes
/// `<= mode_cutoff`.
pub fn sample_mu(spec: &GaussianSpec, count: usize) -> Result<Vec<FourierField>> {
    spec.validate()?;
    if count < 1 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    Ok((0..count as u64).into_par_iter().map(|i| sample_one(spec, i)).collect())
}

/// `α_N = Σ_{n=1}^N c'/n`.
pub fn alpha_with(n: usize, c_prime: f64) -> f64 {
    let terms: Vec<f64> = (1..=n).map(|m| c_prime / m as f64).collect();
    pairwise_sum(&terms)
}

/// `α_N` for the default variance rule (`c' = 1`).
pub fn alpha(n: usize) -> f64 {
    GaussianSpec::new(1, 1, 0).alpha(n)
}

fn smooth_zero(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// [`cutoff_chi`] as recorded in ensemble configs.
pub const CHI_DEFINITION: &str =
    "chi(x) = 1 for |x| <= 1, 0 for |x| >= 2, a/(a + b) otherwise with s = |x| - 1, a = exp(-1/(1-s)), b = exp(-1/s)";

/// `χ(x/R)` with `χ ≡ 1` on `[-1,1]`, `χ ≡ 0` off `(-2,2)`, and the
/// `exp(-1/t)` blend in between.
pub fn cutoff_chi(x: f64, r: f64) -> f64 {
    let y = (x / r).abs();
    if y <= 1.0 {
        return 1.0;
    }
    if y >= 2.0 {
        return 0.0;
    }
    let s = y - 1.0;
    let a = smooth_zero(1.0 - s);
    a / (a + smooth_zero(s))
}

/// Which factors of `F_{k/2,N,R}` are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityOptions {
    pub cutoffs: bool,
    pub remainder: bool,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            cutoffs: true,
            remainder: true,
        }
    }
}

impl DensityOptions {
    /// Every factor replaced by 1.
    pub fn diagnostic() -> Self {
        DensityOptions {
            cutoffs: false,
            remainder: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityValue {
    pub value: f64,
    /// `e^{-R_{k/2}}` overflowed and was capped at `e^{EXP_CAP}`.
    pub clipped: bool,
}

/// `F_{k/2,N,R}(u) = Π_{j<=k-2} χ_R(E_{j/2}(π_N u)) · χ_R(E_{(k-1)/2}(π_N u) − α_N) · e^{−R_{k/2}(π_N u)}`.
pub fn density_f(u: &FourierField, k: usize, n: usize, r: f64, c_prime: f64, opts: DensityOptions) -> Result<DensityValue> {
    if k < 1 {
        return Err(Error::InvalidArgument("density needs k >= 1".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff radius R must be positive, got {r}")));
    }
    if !opts.cutoffs && !opts.remainder {
        return Ok(DensityValue {
            value: 1.0,
            clipped: false,
        });
    }
    let v = u.project_low(n);
    let e = claws::energies(&v, k)?;
    let mut value = 1.0;
    if opts.cutoffs {
        for ej in &e[..k - 1] {
            value *= cutoff_chi(*ej, r);
        }
        value *= cutoff_chi(e[k - 1] - alpha_with(n, c_prime), r);
    }
    let mut clipped = false;
    if opts.remainder && value > 0.0 {
        let rem = e[k] - v.sobolev_norm_sq(k as f64 / 2.0, true);
        let mut exponent = -rem;
        if exponent > EXP_CAP {
            exponent = EXP_CAP;
            clipped = true;
        }
        value *= exponent.exp();
    }
    Ok(DensityValue { value, clipped })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub seed: u64,
    pub mode_cutoff: usize,
}

/// Samples of `μ_{k/2}` with self-normalised importance weights `F`.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble {
    pub samples: Vec<FourierField>,
    pub weights: Vec<f64>,
    pub params: EnsembleParams,
    pub ess: f64,
    pub clipped: usize,
}

/// Weighted mean with its delta-method standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl WeightedEnsemble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `Σ w_i O_i / Σ w_i` for values `O_i` aligned with the samples.
    pub fn weighted_mean(&self, values: &[f64]) -> Estimate {
        weighted_mean(&self.weights, values)
    }
}

pub fn weighted_mean(weights: &[f64], values: &[f64]) -> Estimate {
    assert_eq!(weights.len(), values.len(), "one value per sample");
    let total = pairwise_sum(weights);
    let wo: Vec<f64> = weights.iter().zip(values).map(|(w, o)| w * o).collect();
    let mean = pairwise_sum(&wo) / total;
    let dev: Vec<f64> = weights
        .iter()
        .zip(values)
        .map(|(w, o)| (w * (o - mean)).powi(2))
        .collect();
    Estimate {
        mean,
        se: pairwise_sum(&dev).sqrt() / total,
    }
}

/// `(Σw)²/Σw²`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s = pairwise_sum(weights);
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let s2 = pairwise_sum(&sq);
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

pub fn weighted_ensemble(spec: &GaussianSpec, n: usize, r: f64, count: usize) -> Result<WeightedEnsemble> {
    weighted_ensemble_with(spec, n, r, count, DensityOptions::default())
}

pub fn weighted_ensemble_with(
    spec: &GaussianSpec,
    n: usize,
    r: f64,
    count: usize,
    opts: DensityOptions,
) -> Result<WeightedEnsemble> {
    let samples = sample_mu(spec, count)?;
    let c_prime = spec.alpha_constant();
    let dens: Vec<DensityValue> = samples
        .par_iter()
        .map(|u| density_f(u, spec.k, n, r, c_prime, opts))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = dens.iter().map(|d| d.value).collect();
    if !(pairwise_sum(&weights) > 0.0) {
        return Err(Error::ZeroTotalWeight);
    }
    Ok(WeightedEnsemble {
        ess: effective_sample_size(&weights),
        clipped: dens.iter().filter(|d| d.clipped).count(),
        samples,
        weights,
        params: EnsembleParams {
            k: spec.k,
            n,
            r,
            seed: spec.seed,
            mode_cutoff: spec.mode_cutoff,
        },
    })
}

/// `((1/M) Σ |O(u_i)|^q)^{1/q}` over fresh samples, with its
/// delta-method standard error.
pub fn lq_norm_mc<F>(observable: F, spec: &GaussianSpec, q: f64, count: usize) -> Result<Estimate>
where
    F: Fn(&FourierField) -> Result<f64> + Sync,
{
    spec.validate()?;
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q must lie in [1, ∞), got {q}")));
    }
    if count < 1 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    let values: Vec<f64> = (0..count as u64)
        .into_par_iter()
        .map(|i| observable(&sample_one(spec, i)))
        .collect::<Result<_>>()?;
    Ok(lq_norm_of(&values, q))
}

/// The estimator of [`lq_norm_mc`] applied to precomputed values.
pub fn lq_norm_of(values: &[f64], q: f64) -> Estimate {
    let m = values.len() as f64;
    let pw: Vec<f64> = values.iter().map(|o| o.abs().powf(q)).collect();
    let mq = pairwise_sum(&pw) / m;
    let dev: Vec<f64> = pw.iter().map(|p| (p - mq).powi(2)).collect();
    let sd = if values.len() > 1 { (pairwise_sum(&dev) / (m - 1.0)).sqrt() } else { 0.0 };
    let mean = mq.powf(1.0 / q);
    let se = if mq > 0.0 { mq.powf(1.0 / q - 1.0) / q * sd / m.sqrt() } else { 0.0 };
    Estimate { mean, se }
}
