//! Galerkin ODE on the positive modes `1..=N` and its exponential
//! integrators.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{fft_len, Grid};

use super::Scheme;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `dv_n/dt = -i n² v_n - c·[π_N(v ∂_x v)]_n`, `1 <= n <= N`.
#[derive(Clone, Debug)]
pub(crate) struct Galerkin {
    modes: usize,
    nonlinearity: f64,
    grid: Grid,
}

impl Galerkin {
    pub(crate) fn new(modes: usize, nonlinearity: f64) -> Self {
        // a product of two bandwidth-N fields aliases onto |n| <= N only
        // when the grid has fewer than 3N + 1 points
        Galerkin {
            modes,
            nonlinearity,
            grid: Grid::new(fft_len(3 * modes + 1)),
        }
    }

    pub(crate) fn linear_symbol(n: usize) -> Complex64 {
        Complex64::new(0.0, -((n * n) as f64))
    }

    pub(crate) fn rhs(&self, v: &[Complex64], out: &mut [Complex64]) {
        self.nonlinear(v, out);
        for (i, o) in out.iter_mut().enumerate() {
            *o += Self::linear_symbol(i + 1) * v[i];
        }
    }
}

/// A diagonal linear part plus a nonlinearity, on a vector of modes.
pub(crate) trait Dynamics {
    fn len(&self) -> usize;
    fn linear(&self, i: usize) -> Complex64;
    fn nonlinear(&self, v: &[Complex64], out: &mut [Complex64]);
}

impl Dynamics for Galerkin {
    fn len(&self) -> usize {
        self.modes
    }

    fn linear(&self, i: usize) -> Complex64 {
        Self::linear_symbol(i + 1)
    }

    /// `-c·π_N(v ∂_x v) = -(c/2) ∂_x π_N(v²)`.
    fn nonlinear(&self, v: &[Complex64], out: &mut [Complex64]) {
        if self.nonlinearity == 0.0 || self.modes == 0 {
            out.iter_mut().for_each(|o| *o = ZERO);
            return;
        }
        let mut buf = vec![ZERO; self.grid.len()];
        for (i, c) in v.iter().enumerate() {
            let n = i as i64 + 1;
            buf[self.grid.slot(n)] = *c;
            buf[self.grid.slot(-n)] = c.conj();
        }
        self.grid.synthesize(&mut buf);
        for x in buf.iter_mut() {
            *x = Complex64::new(x.re * x.re, 0.0);
        }
        self.grid.analyze(&mut buf);
        let half_c = 0.5 * self.nonlinearity;
        for (i, o) in out.iter_mut().enumerate() {
            let n = (i + 1) as f64;
            *o = Complex64::new(0.0, -half_c * n) * buf[self.grid.slot(i as i64 + 1)];
        }
    }
}

/// `(ab)_m`, `1 <= m <= out.len()`, for real fields given by positive
/// modes, summed directly so every output carries relative precision.
pub(crate) fn direct_square_like(a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
    let get = |x: &[Complex64], n: i64| -> Complex64 {
        if n == 0 || n.unsigned_abs() as usize > x.len() {
            ZERO
        } else if n > 0 {
            x[n as usize - 1]
        } else {
            x[(-n) as usize - 1].conj()
        }
    };
    let (la, lb) = (a.len() as i64, b.len() as i64);
    for (idx, o) in out.iter_mut().enumerate() {
        let m = idx as i64 + 1;
        let lo = (m - lb).max(-la);
        let hi = (m + lb).min(la);
        let mut acc = ZERO;
        for i in lo..=hi {
            if i != 0 && i != m {
                acc += get(a, i) * get(b, m - i);
            }
        }
        *o = acc;
    }
}

/// The pair `(v, w)` with `v` on the Galerkin system at `N` and `v + w` on
/// the one at `K`, every product summed directly.
pub(crate) struct GapSystem {
    pub(crate) n: usize,
    pub(crate) k: usize,
    pub(crate) nonlinearity: f64,
}

impl Dynamics for GapSystem {
    fn len(&self) -> usize {
        self.n + self.k
    }

    fn linear(&self, i: usize) -> Complex64 {
        if i < self.n {
            Galerkin::linear_symbol(i + 1)
        } else {
            Galerkin::linear_symbol(i - self.n + 1)
        }
    }

    fn nonlinear(&self, x: &[Complex64], out: &mut [Complex64]) {
        let (v, w) = x.split_at(self.n);
        let half_c = 0.5 * self.nonlinearity;
        let mut vv = vec![ZERO; self.k];
        direct_square_like(v, v, &mut vv);
        let mut vw = vec![ZERO; self.k];
        direct_square_like(v, w, &mut vw);
        let mut ww = vec![ZERO; self.k];
        direct_square_like(w, w, &mut ww);
        for i in 0..self.n {
            out[i] = Complex64::new(0.0, -half_c * (i + 1) as f64) * vv[i];
        }
        for i in 0..self.k {
            let high = if i >= self.n { vv[i] } else { ZERO };
            let s = high + 2.0 * vw[i] + ww[i];
            out[self.n + i] = Complex64::new(0.0, -half_c * (i + 1) as f64) * s;
        }
    }
}

pub(crate) fn l2_sq(v: &[Complex64]) -> f64 {
    let parts: Vec<f64> = v.iter().map(|c| 2.0 * c.norm_sqr()).collect();
    crate::spectral::pairwise_sum(&parts)
}

/// One fixed step size, coefficients precomputed.
pub(crate) struct Stepper<'a, D: Dynamics> {
    sys: &'a D,
    h: f64,
    scheme: Scheme,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    // ETD-RK4 only
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

const CONTOUR_POINTS: usize = 32;

impl<'a, D: Dynamics> Stepper<'a, D> {
    pub(crate) fn new(sys: &'a D, h: f64, scheme: Scheme) -> Self {
        let lin: Vec<Complex64> = (0..sys.len()).map(|i| sys.linear(i)).collect();
        let e = lin.iter().map(|l| (l * h).exp()).collect();
        let e2 = lin.iter().map(|l| (l * h * 0.5).exp()).collect();
        let (mut q, mut f1, mut f2, mut f3) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        if scheme == Scheme::EtdRk4 {
            let roots: Vec<Complex64> = (1..=CONTOUR_POINTS)
                .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j as f64 - 0.5) / CONTOUR_POINTS as f64))
                .collect();
            for l in &lin {
                let (mut a, mut b, mut c, mut d) = (ZERO, ZERO, ZERO, ZERO);
                for r in &roots {
                    let z = l * h + r;
                    let ez = z.exp();
                    let z3 = z * z * z;
                    a += ((z * 0.5).exp() - 1.0) / z;
                    b += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                    c += (2.0 + z + ez * (z - 2.0)) / z3;
                    d += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
                }
                let w = h / CONTOUR_POINTS as f64;
                q.push(a * w);
                f1.push(b * w);
                f2.push(c * w);
                f3.push(d * w);
            }
        }
        Stepper {
            sys,
            h,
            scheme,
            e,
            e2,
            q,
            f1,
            f2,
            f3,
        }
    }

    pub(crate) fn step(&self, v: &mut [Complex64]) {
        match self.scheme {
            Scheme::IfRk4 => self.lawson(v),
            Scheme::EtdRk4 => self.etd(v),
        }
    }

    fn lawson(&self, v: &mut [Complex64]) {
        let m = v.len();
        let h = self.h;
        let mut k1 = vec![ZERO; m];
        let mut k2 = vec![ZERO; m];
        let mut k3 = vec![ZERO; m];
        let mut k4 = vec![ZERO; m];
        let mut tmp = vec![ZERO; m];
        self.sys.nonlinear(v, &mut k1);
        for i in 0..m {
            tmp[i] = self.e2[i] * (v[i] + 0.5 * h * k1[i]);
        }
        self.sys.nonlinear(&tmp, &mut k2);
        for i in 0..m {
            tmp[i] = self.e2[i] * v[i] + 0.5 * h * k2[i];
        }
        self.sys.nonlinear(&tmp, &mut k3);
        for i in 0..m {
            tmp[i] = self.e[i] * v[i] + h * self.e2[i] * k3[i];
        }
        self.sys.nonlinear(&tmp, &mut k4);
        for i in 0..m {
            v[i] = self.e[i] * v[i]
                + h / 6.0 * (self.e[i] * k1[i] + 2.0 * self.e2[i] * (k2[i] + k3[i]) + k4[i]);
        }
    }

    fn etd(&self, v: &mut [Complex64]) {
        let m = v.len();
        let mut nv = vec![ZERO; m];
        let mut na = vec![ZERO; m];
        let mut nb = vec![ZERO; m];
        let mut nc = vec![ZERO; m];
        let mut a = vec![ZERO; m];
        let mut b = vec![ZERO; m];
        let mut c = vec![ZERO; m];
        self.sys.nonlinear(v, &mut nv);
        for i in 0..m {
            a[i] = self.e2[i] * v[i] + self.q[i] * nv[i];
        }
        self.sys.nonlinear(&a, &mut na);
        for i in 0..m {
            b[i] = self.e2[i] * v[i] + self.q[i] * na[i];
        }
        self.sys.nonlinear(&b, &mut nb);
        for i in 0..m {
            c[i] = self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nv[i]);
        }
        self.sys.nonlinear(&c, &mut nc);
        for i in 0..m {
            v[i] = self.e[i] * v[i] + nv[i] * self.f1[i] + 2.0 * (na[i] + nb[i]) * self.f2[i] + nc[i] * self.f3[i];
        }
    }
}

/// Advances `v` by `t` from model time `t0`, checking relative `L²` drift
/// against `reference` after every step.
pub(crate) fn advance<D: Dynamics>(
    sys: &D,
    v: &mut [Complex64],
    t0: f64,
    t: f64,
    dt: f64,
    scheme: Scheme,
    reference: f64,
    tolerance: f64,
) -> Result<()> {
    if t == 0.0 || v.is_empty() {
        return Ok(());
    }
    let steps = (t.abs() / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let stepper = Stepper::new(sys, h, scheme);
    for s in 1..=steps {
        stepper.step(v);
        if reference > 0.0 {
            let drift = (l2_sq(v) - reference).abs() / reference;
            if !(drift <= tolerance) {
                return Err(Error::DriftExceeded {
                    time: t0 + h * s as f64,
                    drift,
                    tolerance,
                });
            }
        }
    }
    Ok(())
}

/// `w(t) = S(-t)v(t) - v0` for `v` on `sys`, integrated by classical RK4 in
/// the interaction picture so that its rounding error scales with `|w|`.
pub(crate) fn interaction_displacement(sys: &Galerkin, v0: &[Complex64], t: f64, steps: usize) -> Vec<Complex64> {
    let m = v0.len();
    let rot = |s: f64| -> Vec<Complex64> { (0..m).map(|i| (Galerkin::linear_symbol(i + 1) * s).exp()).collect() };
    let g = |s: f64, w: &[Complex64], out: &mut [Complex64]| {
        let (fwd, back) = (rot(s), rot(-s));
        let v: Vec<Complex64> = (0..m).map(|i| fwd[i] * (v0[i] + w[i])).collect();
        sys.nonlinear(&v, out);
        for i in 0..m {
            out[i] *= back[i];
        }
    };
    let h = t / steps.max(1) as f64;
    let mut w = vec![ZERO; m];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; m], vec![ZERO; m], vec![ZERO; m], vec![ZERO; m]);
    let mut tmp = vec![ZERO; m];
    for s in 0..steps.max(1) {
        let t0 = s as f64 * h;
        g(t0, &w, &mut k1);
        for i in 0..m {
            tmp[i] = w[i] + 0.5 * h * k1[i];
        }
        g(t0 + 0.5 * h, &tmp, &mut k2);
        for i in 0..m {
            tmp[i] = w[i] + 0.5 * h * k2[i];
        }
        g(t0 + 0.5 * h, &tmp, &mut k3);
        for i in 0..m {
            tmp[i] = w[i] + h * k3[i];
        }
        g(t0 + h, &tmp, &mut k4);
        for i in 0..m {
            w[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }
    w
}
