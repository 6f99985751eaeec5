//! Benjamin-Ono flows: the linear group `S(t)`, the truncated flow `Φ_t^N`,
//! a certified surrogate for `Φ_t`, and energy derivatives along `Φ_t^N`.

mod integrate;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::claws::{self, Expr, K_MAX};
use crate::error::{Error, Result};
use crate::spectral::{FourierField, OperatorWord};

use integrate::{advance, interaction_displacement, l2_sq, Dynamics, Galerkin, GapSystem};

/// Time-stepping scheme for the low modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Integrating-factor (Lawson) RK4.
    IfRk4,
    /// Cox-Matthews exponential time differencing RK4.
    EtdRk4,
}

/// Share of `L²` mass above `2K/3` that flags a saturated resolution.
pub const TAIL_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(rename = "N")]
    pub n: usize,
    /// Resolution of [`evolve_full`]; default `2N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_bandwidth: Option<usize>,
    /// Default `min(1e-3, 0.5/N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_drift")]
    pub drift_tolerance: f64,
    #[serde(default = "default_richardson")]
    pub richardson_tolerance: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    /// `c` in `∂_t u + H∂_x²u + c u∂_x u = 0`.
    #[serde(default = "default_nonlinearity")]
    pub nonlinearity: f64,
}

fn default_scheme() -> Scheme {
    Scheme::IfRk4
}
fn default_drift() -> f64 {
    1e-8
}
fn default_richardson() -> f64 {
    1e-8
}
fn default_horizon() -> f64 {
    1.0
}
fn default_nonlinearity() -> f64 {
    1.0
}

impl FlowConfig {
    pub fn new(n: usize) -> Self {
        FlowConfig {
            n,
            grid_bandwidth: None,
            dt: None,
            scheme: default_scheme(),
            drift_tolerance: default_drift(),
            richardson_tolerance: default_richardson(),
            horizon: default_horizon(),
            nonlinearity: default_nonlinearity(),
        }
    }

    pub fn with_horizon(mut self, t: f64) -> Self {
        self.horizon = t;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_grid_bandwidth(mut self, k: usize) -> Self {
        self.grid_bandwidth = Some(k);
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_nonlinearity(mut self, c: f64) -> Self {
        self.nonlinearity = c;
        self
    }

    pub fn with_drift_tolerance(mut self, tol: f64) -> Self {
        self.drift_tolerance = tol;
        self
    }

    pub fn grid_bandwidth(&self) -> usize {
        self.grid_bandwidth.unwrap_or(2 * self.n)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(self.n))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.grid_bandwidth() < 2 * self.n {
            return bad(format!("grid_bandwidth {} below 2N = {}", self.grid_bandwidth(), 2 * self.n));
        }
        if !(self.dt() > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt()));
        }
        if !(self.drift_tolerance > 0.0) || !(self.richardson_tolerance > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.horizon > 0.0) {
            return bad(format!("horizon T must be positive, got {}", self.horizon));
        }
        if !self.nonlinearity.is_finite() {
            return bad("nonlinearity must be finite".into());
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t.abs() <= self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside the horizon [-{h}, {h}]",
                h = self.horizon
            )));
        }
        Ok(())
    }
}

fn default_dt(n: usize) -> f64 {
    if n == 0 {
        1e-3
    } else {
        (0.5 / n as f64).min(1e-3)
    }
}

fn check_real(u: &FourierField) -> Result<()> {
    if !u.is_real() {
        return Err(Error::InvalidArgument("flows act on real zero-mean fields".into()));
    }
    Ok(())
}

/// `S(t)u`: multiplies `c_n` by `exp(-i n|n| t)`.
pub fn linear_propagate(u: &FourierField, t: f64) -> FourierField {
    u.multiplier(|n| Complex64::from_polar(1.0, -((n * n.abs()) as f64) * t))
}

/// `-H∂_x²v - c·π_N((π_N v)∂_x(π_N v))`, alias-free.
pub fn truncated_vector_field_with(v: &FourierField, n: usize, c: f64) -> FourierField {
    let lin = v.apply_word_unchecked(&OperatorWord::hdx(true, 2)).scale(-1.0);
    let low = v.project_low(n);
    let nl = low
        .multiply(&low.derivative(1))
        .real_part()
        .project_low(n)
        .scale(-c);
    let b = lin.bandwidth().max(nl.bandwidth());
    &lin.with_bandwidth(b) + &nl.with_bandwidth(b)
}

pub fn truncated_vector_field(v: &FourierField, n: usize) -> FourierField {
    truncated_vector_field_with(v, n, 1.0)
}

fn low_modes(u: &FourierField, n: usize) -> Vec<Complex64> {
    (1..=n as i64).map(|m| u.coeff(m)).collect()
}

fn assemble(low: &[Complex64], high: &FourierField) -> FourierField {
    let b = high.bandwidth().max(low.len());
    let mut pos: Vec<Complex64> = (1..=b as i64).map(|m| high.coeff(m)).collect();
    for (i, c) in low.iter().enumerate() {
        pos[i] = *c;
    }
    FourierField::real_from_positive(&pos)
}

/// `Φ_t^N u0`.
pub fn evolve_truncated(u0: &FourierField, cfg: &FlowConfig, t: f64) -> Result<FourierField> {
    Ok(evolve_truncated_at(u0, cfg, &[t])?.pop().expect("one time requested"))
}

/// `Φ_t^N u0` at each of `times`, which must be sorted; integration
/// continues from one sample time to the next.
pub fn evolve_truncated_at(u0: &FourierField, cfg: &FlowConfig, times: &[f64]) -> Result<Vec<FourierField>> {
    cfg.validate()?;
    check_real(u0)?;
    for t in times {
        cfg.check_time(*t)?;
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("sample times must be sorted".into()));
    }
    let sys = Galerkin::new(cfg.n, cfg.nonlinearity);
    let high = u0.project_high(cfg.n);
    let mut v = low_modes(u0, cfg.n);
    let reference = l2_sq(&v);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        advance(&sys, &mut v, now, t - now, cfg.dt(), cfg.scheme, reference, cfg.drift_tolerance)?;
        now = t;
        out.push(assemble(&v, &linear_propagate(&high, t)));
    }
    Ok(out)
}

/// Result of [`evolve_full`].
#[derive(Clone, Debug)]
pub struct FullSolution {
    pub field: FourierField,
    /// `‖u_dt − u_{dt/2}‖_{L²}/15`.
    pub richardson: f64,
    /// Relative drift of `E_{k/2}`, `k = 0..=4`, over the run.
    pub energy_drift: Vec<f64>,
    /// `L²` share of modes above `2K/3`.
    pub tail_fraction: f64,
    pub saturated: bool,
}

/// Conserved quantities of `∂_t u + H∂_x²u + c u∂_x u = 0`: `E_{k/2}(c u)`
/// for `c ≠ 0`, the quadratic parts otherwise.
pub fn flow_invariants(u: &FourierField, c: f64, k_max: usize) -> Result<Vec<f64>> {
    if c == 0.0 {
        return Ok((0..=k_max).map(|k| u.sobolev_norm_sq(k as f64 / 2.0, true)).collect());
    }
    claws::energies(&u.scale(c), k_max)
}

const DRIFT_K: usize = 4;

/// Pseudospectral surrogate for `Φ_t u0` at resolution `grid_bandwidth`,
/// certified by dt-halving and conservation.
pub fn evolve_full(u0: &FourierField, cfg: &FlowConfig, t: f64) -> Result<FullSolution> {
    cfg.validate()?;
    check_real(u0)?;
    cfg.check_time(t)?;
    let k = cfg.grid_bandwidth();
    if u0.effective_bandwidth() > k {
        return Err(Error::InvalidArgument(format!(
            "initial datum bandwidth {} exceeds the resolution {k}",
            u0.effective_bandwidth()
        )));
    }
    let sys = Galerkin::new(k, cfg.nonlinearity);
    let v0 = low_modes(u0, k);
    let reference = l2_sq(&v0);
    let dt = cfg.dt();
    let mut coarse = v0.clone();
    advance(&sys, &mut coarse, 0.0, t, dt, cfg.scheme, reference, cfg.drift_tolerance)?;
    let mut fine = v0;
    advance(&sys, &mut fine, 0.0, t, dt / 2.0, cfg.scheme, reference, cfg.drift_tolerance)?;
    let diff: Vec<Complex64> = coarse.iter().zip(&fine).map(|(a, b)| a - b).collect();
    let richardson = l2_sq(&diff).sqrt() / 15.0;
    if !(richardson <= cfg.richardson_tolerance) {
        return Err(Error::NonConvergence {
            estimate: richardson,
            tolerance: cfg.richardson_tolerance,
        });
    }
    let field = FourierField::real_from_positive(&fine);
    let before = flow_invariants(u0, cfg.nonlinearity, DRIFT_K)?;
    let after = flow_invariants(&field, cfg.nonlinearity, DRIFT_K)?;
    let energy_drift = before
        .iter()
        .zip(&after)
        .map(|(a, b)| (b - a).abs() / a.abs().max(f64::MIN_POSITIVE))
        .collect();
    let cut = 2 * k / 3;
    let total = l2_sq(&fine);
    let tail_fraction = if total > 0.0 { l2_sq(&fine[cut.min(k)..]) / total } else { 0.0 };
    Ok(FullSolution {
        field,
        richardson,
        energy_drift,
        tail_fraction,
        saturated: tail_fraction > TAIL_THRESHOLD,
    })
}

/// `Φ_t^N u0` together with `Φ_t^K u0 − Φ_t^N u0`, the latter integrated as
/// its own variable so that it keeps relative precision far below the
/// round-off level of the fields themselves.
#[derive(Clone, Debug)]
pub struct TruncationGap {
    pub truncated: FourierField,
    pub gap: FourierField,
    /// `‖gap_dt − gap_{dt/2}‖_{L²}/15`.
    pub richardson: f64,
}

/// The reference resolution `K` is `reference.grid_bandwidth()`; `u0` must
/// be band-limited to `N`.
pub fn truncation_gap(u0: &FourierField, n: usize, reference: &FlowConfig, t: f64) -> Result<TruncationGap> {
    reference.validate()?;
    check_real(u0)?;
    reference.check_time(t)?;
    let k = reference.grid_bandwidth();
    if n > k || u0.effective_bandwidth() > n {
        return Err(Error::InvalidArgument(format!(
            "truncation gap needs bandwidth(u0) = {} <= N = {n} <= K = {k}",
            u0.effective_bandwidth()
        )));
    }
    let sys = GapSystem {
        n,
        k,
        nonlinearity: reference.nonlinearity,
    };
    let mut x0 = low_modes(u0, n);
    x0.resize(n + k, Complex64::new(0.0, 0.0));
    let run = |dt: f64| -> Result<Vec<Complex64>> {
        let mut x = x0.clone();
        advance(&sys, &mut x, 0.0, t, dt, reference.scheme, 0.0, 0.0)?;
        Ok(x)
    };
    let coarse = run(reference.dt())?;
    let fine = run(reference.dt() / 2.0)?;
    let diff: Vec<Complex64> = coarse[n..].iter().zip(&fine[n..]).map(|(a, b)| a - b).collect();
    Ok(TruncationGap {
        truncated: FourierField::real_from_positive(&fine[..n]),
        gap: FourierField::real_from_positive(&fine[n..]),
        richardson: l2_sq(&diff).sqrt() / 15.0,
    })
}

/// How `d/dt E_{j/2}(π_N Φ_t^N u)|_{t=0}` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeRoute {
    /// Forward-mode numeric recursion.
    Jet,
    /// `⟨grad_integral(energy(j), v), π_{>N}(v∂_x v)⟩`.
    Gradient,
    /// `∫ star_N(energy(j))(v)`.
    StarN,
}

/// `π_{>N}(v ∂_x v)`, or `None` when it vanishes identically.
pub fn high_forcing(v: &FourierField, n: usize) -> Option<FourierField> {
    if 2 * v.effective_bandwidth() <= n {
        return None;
    }
    Some(v.multiply(&v.derivative(1)).real_part().project_high(n))
}

fn check_index(j: usize) -> Result<()> {
    if j > K_MAX {
        return Err(Error::InvalidArgument(format!("energy index {j} outside 0..={K_MAX}")));
    }
    Ok(())
}

/// `d/dt E_{j/2}(π_N Φ_t^N u)|_{t=0}`.
pub fn flow_energy_derivative(u: &FourierField, n: usize, j: usize) -> Result<f64> {
    flow_energy_derivative_with(u, n, j, DerivativeRoute::Jet)
}

pub fn flow_energy_derivative_with(u: &FourierField, n: usize, j: usize, route: DerivativeRoute) -> Result<f64> {
    check_index(j)?;
    check_real(u)?;
    let v = u.project_low(n);
    let Some(h) = high_forcing(&v, n) else {
        return Ok(0.0);
    };
    match route {
        DerivativeRoute::Jet => {
            let jet = claws::energies_with_derivative(&v, &h, j)?;
            Ok(jet.derivatives.expect("tangent requested")[j])
        }
        DerivativeRoute::Gradient => {
            let g = claws::grad_integral(&*claws::energy(j)?, &v)?;
            Ok(claws::pairing(&g, &h))
        }
        DerivativeRoute::StarN => Ok(claws::eval_expr(&*starred(j, n)?, &v)?.re),
    }
}

/// The derivatives for every `j = 0..=j_max` from one jet.
pub fn flow_energy_derivatives(u: &FourierField, n: usize, j_max: usize) -> Result<Vec<f64>> {
    check_index(j_max)?;
    check_real(u)?;
    let v = u.project_low(n);
    let Some(h) = high_forcing(&v, n) else {
        return Ok(vec![0.0; j_max + 1]);
    };
    let jet = claws::energies_with_derivative(&v, &h, j_max)?;
    Ok(jet.derivatives.expect("tangent requested"))
}

/// `[E_{j/2}(π_N Φ_h^N u) − E_{j/2}(π_N Φ_{-h}^N u)]/(2h)` for
/// `j = 0..=j_max`. The displacement from `u` and the energy increments are
/// both carried as their own variables, so the quotient keeps relative
/// precision for any `h`.
pub fn flow_energy_time_difference(u: &FourierField, n: usize, j_max: usize, h: f64) -> Result<Vec<f64>> {
    check_index(j_max)?;
    check_real(u)?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {h}")));
    }
    let sys = Galerkin::new(n, 1.0);
    let v0 = low_modes(u, n);
    const STEPS: usize = 4;
    let wp = interaction_displacement(&sys, &v0, h, STEPS);
    let wm = interaction_displacement(&sys, &v0, -h, STEPS);
    let rot = |i: usize, t: f64| (Galerkin::linear_symbol(i + 1) * t).exp();
    let mut a = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for i in 0..n {
        let m = ((i + 1) * (i + 1)) as f64;
        a.push(rot(i, -h) * (v0[i] + wm[i]));
        let spin = Complex64::new(0.0, -2.0 * (m * h).sin()) * v0[i];
        delta.push(spin + rot(i, h) * wp[i] - rot(i, -h) * wm[i]);
    }
    let a = FourierField::real_from_positive(&a);
    let delta = FourierField::real_from_positive(&delta);
    (0..=j_max)
        .map(|j| {
            // quadratic part Σ|n|^j |c_n|² is blind to S(t), so only the
            // interaction displacements enter it
            let q: Vec<f64> = (0..n)
                .map(|i| {
                    let dw = wp[i] - wm[i];
                    let d = 2.0 * (v0[i].conj() * dw).re + wp[i].norm_sqr() - wm[i].norm_sqr();
                    2.0 * ((i + 1) as f64).powi(j as i32) * d
                })
                .collect();
            let higher = claws::energy(j)?.filter(|node| node.degree() >= 3);
            let r = claws::eval_increment(&higher, &a, &delta)?;
            Ok((crate::spectral::pairwise_sum(&q) + r.re) / (2.0 * h))
        })
        .collect()
}

fn starred(j: usize, n: usize) -> Result<Arc<Expr>> {
    type Cache = Mutex<HashMap<(usize, usize), Arc<Expr>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(e) = cache.lock().expect("star cache").get(&(j, n)) {
        return Ok(e.clone());
    }
    let e = Arc::new(claws::star_n(&*claws::energy(j)?, n));
    cache.lock().expect("star cache").insert((j, n), e.clone());
    Ok(e)
}

/// Which part of the truncated vector field a divergence refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldPart {
    Full,
    Linear,
    Nonlinear,
}

/// `Σ_n ∂F_{a_n}/∂a_n + ∂F_{b_n}/∂b_n` for the truncated field on `E_N`,
/// in the coordinates `v = Σ a_n cos nx + b_n sin nx`, by centred
/// differences of step `eps`.
pub fn coordinate_divergence(v: &FourierField, n: usize, eps: f64, part: FieldPart) -> f64 {
    let c = match part {
        FieldPart::Linear => 0.0,
        _ => 1.0,
    };
    let sys = Galerkin::new(n, c);
    let base = low_modes(v, n);
    let eval = |x: &[Complex64]| {
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        match part {
            FieldPart::Nonlinear => sys.nonlinear(x, &mut out),
            _ => sys.rhs(x, &mut out),
        }
        out
    };
    let mut terms = Vec::with_capacity(2 * n);
    for m in 0..n {
        // c_m = (a_m - i b_m)/2, so F_a = 2 Re F_m and F_b = -2 Im F_m
        for (dir, coord) in [(Complex64::new(0.5, 0.0), 0), (Complex64::new(0.0, -0.5), 1)] {
            let mut p = base.clone();
            let mut q = base.clone();
            p[m] += dir * eps;
            q[m] -= dir * eps;
            let (fp, fq) = (eval(&p)[m], eval(&q)[m]);
            let d = if coord == 0 { 2.0 * (fp.re - fq.re) } else { -2.0 * (fp.im - fq.im) };
            terms.push(d / (2.0 * eps));
        }
    }
    crate::spectral::pairwise_sum(&terms)
}
