//! Zero-mean periodic functions on `[0, 2π)` held as Fourier coefficients
//! `u_n = (1/2π) ∫ u e^{-inx} dx`.
//!
//! Norms are plain coefficient sums, `‖u‖²_{Ḣ^s} = Σ_{n≠0} |n|^{2s} |u_n|²`,
//! without the `2π` Parseval factor. Integrals are Lebesgue integrals over
//! the period, so `∫ u dx = 2π u_0`.

mod fft;
mod word;

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fft::{fft_len, pairwise_sum, pairwise_sum_c, Grid};
pub use word::{Atom, OperatorWord, Projector, Unit};

/// Below this product size a direct convolution beats the transforms.
const DIRECT_PRODUCT_LIMIT: usize = 24;

/// Trigonometric polynomial `Σ_{|n|<=B} c_n e^{inx}`.
///
/// Real fields keep `c_{-n} = conj(c_n)` bit-exactly and `c_0 = 0`; complex
/// fields are unconstrained intermediates and may carry a mean.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    bandwidth: usize,
    real: bool,
    /// `coeffs[n + B]`
    coeffs: Vec<Complex64>,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl FourierField {
    pub fn zeros(bandwidth: usize, real: bool) -> Self {
        FourierField {
            bandwidth,
            real,
            coeffs: vec![zero(); 2 * bandwidth + 1],
        }
    }

    pub(crate) fn from_dense_unchecked(bandwidth: usize, real: bool, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), 2 * bandwidth + 1);
        FourierField {
            bandwidth,
            real,
            coeffs,
        }
    }

    /// Dense coefficients for `n = -B..=B`. Real fields are validated exactly.
    pub fn from_dense(bandwidth: usize, real: bool, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * bandwidth + 1 {
            return Err(Error::MalformedField(format!(
                "expected {} coefficients for bandwidth {bandwidth}, got {}",
                2 * bandwidth + 1,
                coeffs.len()
            )));
        }
        let f = FourierField {
            bandwidth,
            real,
            coeffs,
        };
        if real {
            f.check_real()?;
        }
        Ok(f)
    }

    fn check_real(&self) -> Result<()> {
        if self.coeff(0) != zero() {
            return Err(Error::MalformedField("real field with nonzero mean".into()));
        }
        for n in 1..=self.bandwidth as i64 {
            if self.coeff(-n) != self.coeff(n).conj() {
                return Err(Error::MalformedField(format!(
                    "real field not Hermitian at n = {n}"
                )));
            }
        }
        Ok(())
    }

    /// Real zero-mean field from its positive-frequency coefficients
    /// `c_1, ..., c_B`.
    pub fn real_from_positive(positive: &[Complex64]) -> Self {
        let b = positive.len();
        let mut f = FourierField::zeros(b, true);
        for (i, c) in positive.iter().enumerate() {
            let n = i as i64 + 1;
            f.set_hermitian(n, *c);
        }
        f
    }

    /// Complex field from a list of modes.
    pub fn complex_from_modes(modes: impl IntoIterator<Item = (i64, Complex64)>) -> Self {
        let modes: Vec<_> = modes.into_iter().collect();
        let b = modes.iter().map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0);
        let mut f = FourierField::zeros(b, false);
        for (n, c) in modes {
            f.coeffs[(n + b as i64) as usize] += c;
        }
        f
    }

    /// `cos(nx)`, `n >= 1`.
    pub fn cos(n: usize) -> Self {
        let mut f = FourierField::zeros(n, true);
        f.set_hermitian(n as i64, Complex64::new(0.5, 0.0));
        f
    }

    /// `sin(nx)`, `n >= 1`.
    pub fn sin(n: usize) -> Self {
        let mut f = FourierField::zeros(n, true);
        f.set_hermitian(n as i64, Complex64::new(0.0, -0.5));
        f
    }

    fn set_hermitian(&mut self, n: i64, c: Complex64) {
        let b = self.bandwidth as i64;
        self.coeffs[(b + n) as usize] = c;
        self.coeffs[(b - n) as usize] = c.conj();
    }

    /// Storage bound: `|n| > bandwidth` implies a zero coefficient.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Largest `|n|` carrying a nonzero coefficient.
    pub fn effective_bandwidth(&self) -> usize {
        (0..=self.bandwidth)
            .rev()
            .find(|&n| self.coeff(n as i64) != zero() || self.coeff(-(n as i64)) != zero())
            .unwrap_or(0)
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.bandwidth {
            zero()
        } else {
            self.coeffs[(n + self.bandwidth as i64) as usize]
        }
    }

    /// `(n, c_n)` for `n = -B..=B`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let b = self.bandwidth as i64;
        self.coeffs.iter().enumerate().map(move |(i, c)| (i as i64 - b, *c))
    }

    /// Positive-frequency coefficients `c_1..c_B`.
    pub fn positive(&self) -> Vec<Complex64> {
        (1..=self.bandwidth as i64).map(|n| self.coeff(n)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == zero())
    }

    /// Applies `f(n, c_n)` to every coefficient, preserving exact Hermitian
    /// symmetry when `f` commutes with conjugation (`f(-n, conj c) = conj f(n, c)`).
    fn map_modes(&self, real: bool, f: impl Fn(i64, Complex64) -> Complex64) -> FourierField {
        let b = self.bandwidth as i64;
        let mut out = FourierField::zeros(self.bandwidth, real);
        if real {
            for n in 1..=b {
                let c = f(n, self.coeff(n));
                out.set_hermitian(n, c);
            }
        } else {
            for n in -b..=b {
                out.coeffs[(n + b) as usize] = f(n, self.coeff(n));
            }
        }
        out
    }

    /// Multiplies `c_n` by `symbol(n)`. A real field stays real; the symbol
    /// must then satisfy `symbol(-n) = conj symbol(n)`.
    pub fn multiplier(&self, symbol: impl Fn(i64) -> Complex64) -> FourierField {
        self.map_modes(self.real, |n, c| symbol(n) * c)
    }

    /// Re-embeds with a different storage bandwidth (truncating if smaller).
    pub fn with_bandwidth(&self, bandwidth: usize) -> FourierField {
        let b = bandwidth as i64;
        let mut out = FourierField::zeros(bandwidth, self.real);
        for n in -b..=b {
            out.coeffs[(n + b) as usize] = self.coeff(n);
        }
        out
    }

    /// Drops to a real zero-mean field: removes the mean and symmetrises.
    pub fn real_part(&self) -> FourierField {
        let b = self.bandwidth as i64;
        let mut out = FourierField::zeros(self.bandwidth, true);
        for n in 1..=b {
            let c = (self.coeff(n) + self.coeff(-n).conj()) * 0.5;
            out.set_hermitian(n, c);
        }
        out
    }

    /// Forgets the real flag.
    pub fn into_complex(mut self) -> FourierField {
        self.real = false;
        self
    }

    pub fn scale(&self, s: f64) -> FourierField {
        self.map_modes(self.real, |_, c| c * s)
    }

    pub fn scale_complex(&self, s: Complex64) -> FourierField {
        self.map_modes(false, |_, c| c * s)
    }

    fn combine(&self, other: &FourierField, f: impl Fn(Complex64, Complex64) -> Complex64) -> FourierField {
        let b = self.bandwidth.max(other.bandwidth);
        let real = self.real && other.real;
        let bi = b as i64;
        let mut out = FourierField::zeros(b, real);
        for n in -bi..=bi {
            out.coeffs[(n + bi) as usize] = f(self.coeff(n), other.coeff(n));
        }
        if real {
            // keep the symmetry bit-exact
            for n in 1..=bi {
                let c = out.coeff(n);
                out.set_hermitian(n, c);
            }
        }
        out
    }

    /// Sample values on `m` equispaced points (`m >= 2B + 1`).
    pub fn to_grid(&self, m: usize) -> Vec<Complex64> {
        Grid::new(m).to_values(self)
    }

    pub fn l2_distance(&self, other: &FourierField) -> f64 {
        (self - other).sobolev_norm(0.0, false)
    }
}

impl Add for &FourierField {
    type Output = FourierField;
    fn add(self, rhs: &FourierField) -> FourierField {
        self.combine(rhs, |a, b| a + b)
    }
}

impl Sub for &FourierField {
    type Output = FourierField;
    fn sub(self, rhs: &FourierField) -> FourierField {
        self.combine(rhs, |a, b| a - b)
    }
}

impl Neg for &FourierField {
    type Output = FourierField;
    fn neg(self) -> FourierField {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &FourierField {
    type Output = FourierField;
    fn mul(self, rhs: f64) -> FourierField {
        self.scale(rhs)
    }
}

impl FourierField {
    /// Hilbert transform, symbol `-i sign(n)`.
    pub fn hilbert(&self) -> Result<FourierField> {
        self.apply_word(&OperatorWord::hilbert())
    }

    /// Coefficientwise multiplication by the symbol of `w`.
    ///
    /// Words with Hilbert or projector content but no derivative are
    /// rejected on fields with a nonzero mean, since the symbol at `n = 0`
    /// is not defined for them.
    pub fn apply_word(&self, w: &OperatorWord) -> Result<FourierField> {
        if w.zero_mode_ambiguous() && self.coeff(0) != zero() {
            return Err(Error::NonZeroMean(format!("{}", self.coeff(0))));
        }
        Ok(self.apply_word_unchecked(w))
    }

    /// As [`apply_word`](Self::apply_word) with the convention `sign 0 = 0`.
    pub fn apply_word_unchecked(&self, w: &OperatorWord) -> FourierField {
        // sign projectors, odd Hilbert powers with odd derivatives etc. all
        // map real fields to real fields except P_±
        let real = self.real && w.projection().is_none();
        let out_b = w.output_bandwidth(self.bandwidth);
        let f = self.map_modes(real, |n, c| c * w.symbol(n));
        if out_b < self.bandwidth {
            f.with_bandwidth(out_b)
        } else {
            f
        }
    }

    pub fn derivative(&self, order: u32) -> FourierField {
        self.apply_word_unchecked(&OperatorWord::dx(order))
    }

    /// `π_N`: keeps `|n| <= N`.
    pub fn project_low(&self, n: usize) -> FourierField {
        self.with_bandwidth(self.bandwidth.min(n))
    }

    /// `π_{>N} = 1 - π_N`.
    pub fn project_high(&self, n: usize) -> FourierField {
        self.map_modes(self.real, |k, c| if k.unsigned_abs() as usize > n { c } else { zero() })
    }

    /// Exact product; bandwidth of the result is the sum of bandwidths.
    pub fn multiply(&self, other: &FourierField) -> FourierField {
        let b = self.bandwidth + other.bandwidth;
        if self.bandwidth.min(other.bandwidth) <= DIRECT_PRODUCT_LIMIT
            || b <= 2 * DIRECT_PRODUCT_LIMIT
        {
            return self.convolve(other);
        }
        let grid = Grid::for_bandwidth(b);
        let mut a = grid.to_values(self);
        let c = grid.to_values(other);
        for (x, y) in a.iter_mut().zip(&c) {
            *x *= y;
        }
        grid.to_field(&a, b)
    }

    fn convolve(&self, other: &FourierField) -> FourierField {
        let b = self.bandwidth + other.bandwidth;
        let mut out = FourierField::zeros(b, false);
        let (sb, ob) = (self.bandwidth as i64, other.bandwidth as i64);
        for n in -sb..=sb {
            let a = self.coeff(n);
            if a == zero() {
                continue;
            }
            for m in -ob..=ob {
                out.coeffs[(n + m + b as i64) as usize] += a * other.coeff(m);
            }
        }
        out
    }

    /// `‖u‖_{Ḣ^s}` (homogeneous) or `‖u‖_{H^s}` with weight `(1+n²)^s`.
    pub fn sobolev_norm(&self, s: f64, homogeneous: bool) -> f64 {
        self.sobolev_norm_sq(s, homogeneous).sqrt()
    }

    pub fn sobolev_norm_sq(&self, s: f64, homogeneous: bool) -> f64 {
        let terms: Vec<f64> = self
            .modes()
            .filter(|(n, _)| !homogeneous || *n != 0)
            .map(|(n, c)| {
                let nf = n as f64;
                let w = if homogeneous {
                    nf.abs().powf(2.0 * s)
                } else {
                    (1.0 + nf * nf).powf(s)
                };
                w * c.norm_sqr()
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// `∫_0^{2π} u dx = 2π u_0`.
    pub fn integrate(&self) -> Complex64 {
        self.coeff(0) * (2.0 * PI)
    }
}

/// Wire format: nonzero modes only, `[n, re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldJson {
    pub bandwidth: usize,
    pub real: bool,
    pub coeffs: Vec<(i64, f64, f64)>,
}

impl From<&FourierField> for FieldJson {
    fn from(f: &FourierField) -> Self {
        FieldJson {
            bandwidth: f.bandwidth,
            real: f.real,
            coeffs: f
                .modes()
                .filter(|(_, c)| *c != zero())
                .map(|(n, c)| (n, c.re, c.im))
                .collect(),
        }
    }
}

impl TryFrom<FieldJson> for FourierField {
    type Error = Error;
    fn try_from(j: FieldJson) -> Result<Self> {
        let b = j.bandwidth as i64;
        let mut coeffs = vec![zero(); 2 * j.bandwidth + 1];
        for (n, re, im) in j.coeffs {
            if n.abs() > b {
                return Err(Error::MalformedField(format!(
                    "mode {n} outside bandwidth {b}"
                )));
            }
            coeffs[(n + b) as usize] = Complex64::new(re, im);
        }
        FourierField::from_dense(j.bandwidth, j.real, coeffs)
    }
}

impl FourierField {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&FieldJson::from(self)).expect("field serialisation")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: FieldJson = serde_json::from_str(s)?;
        FourierField::try_from(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &FourierField, b: &FourierField, tol: f64) -> bool {
        (a - b).sobolev_norm(0.0, false) <= tol
    }

    #[test]
    fn hilbert_of_cos_is_sin() {
        for n in 1..6 {
            let h = FourierField::cos(n).hilbert().unwrap();
            assert!(close(&h, &FourierField::sin(n), 1e-15));
            let h = FourierField::sin(n).hilbert().unwrap();
            assert!(close(&h, &-&FourierField::cos(n), 1e-15));
        }
    }

    #[test]
    fn hilbert_rejects_mean() {
        let f = FourierField::complex_from_modes([(0, Complex64::new(1.0, 0.0)), (1, Complex64::new(1.0, 0.0))]);
        assert!(matches!(f.hilbert(), Err(Error::NonZeroMean(_))));
        // a derivative in front makes the symbol at zero unambiguous
        let w = OperatorWord::from_atoms(&[Atom::Pminus, Atom::Dx(1)]).unwrap().1;
        assert!(f.apply_word(&w).is_ok());
    }

    #[test]
    fn pminus_projects_on_negative_frequencies() {
        let w = OperatorWord::projector(Projector::Minus);
        let pos = FourierField::complex_from_modes([(3, Complex64::new(1.0, 0.0))]);
        let neg = FourierField::complex_from_modes([(-3, Complex64::new(1.0, 0.0))]);
        assert!(pos.apply_word(&w).unwrap().is_zero());
        assert_eq!(neg.apply_word(&w).unwrap(), neg);
    }

    #[test]
    fn derivative_of_cos() {
        let d = FourierField::cos(3).derivative(1);
        assert!(close(&d, &(&FourierField::sin(3) * -3.0), 1e-15));
    }

    #[test]
    fn projections_split_identity() {
        let u = &FourierField::cos(1) + &FourierField::cos(3);
        assert!(close(&u.project_low(2), &FourierField::cos(1), 0.0));
        assert!(close(&u.project_high(2), &FourierField::cos(3), 0.0));
        assert_eq!(u.project_low(3), u);
        assert!(close(&(&u.project_low(2) + &u.project_high(2)), &u, 0.0));
    }

    #[test]
    fn cos_squared() {
        let c = FourierField::cos(1);
        let p = c.multiply(&c);
        assert_eq!(p.bandwidth(), 2);
        assert!((p.coeff(0) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((p.coeff(2) - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert!((c.multiply(&c).integrate().re - PI).abs() < 1e-14);
    }

    #[test]
    fn sobolev_norm_of_cos() {
        let c = FourierField::cos(1);
        for s in [0.0, 0.5, 1.0, 3.5] {
            assert!((c.sobolev_norm_sq(s, true) - 0.5).abs() < 1e-15);
        }
        let u = FourierField::cos(4);
        assert!(u.sobolev_norm(1.0, false) >= u.sobolev_norm(1.0, true));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let u = FourierField::real_from_positive(&[
            Complex64::new(0.1, -1.0 / 3.0),
            Complex64::new(std::f64::consts::E, 1e-300),
        ]);
        let back = FourierField::from_json(&u.to_json()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn json_rejects_non_hermitian_real() {
        let s = r#"{"bandwidth":1,"real":true,"coeffs":[[1,1.0,0.0]]}"#;
        assert!(FourierField::from_json(s).is_err());
    }
}
