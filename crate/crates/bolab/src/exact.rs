//! Exact complex-rational scalars and sparse trigonometric polynomials.
//!
//! Symbolic densities carry coefficients in `Q(i)`. Evaluating a density on
//! a trigonometric polynomial with rational coefficients is then exact, which
//! is how normalisations are fixed and how rewrite rules are checked.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::spectral::OperatorWord;

pub type Coeff = Complex<BigRational>;

pub fn int(n: i64) -> Coeff {
    Coeff::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
}

pub fn ratio(num: i64, den: i64) -> Coeff {
    Coeff::new(
        BigRational::new(BigInt::from(num), BigInt::from(den)),
        BigRational::zero(),
    )
}

pub fn real(r: BigRational) -> Coeff {
    Coeff::new(r, BigRational::zero())
}

/// `i^k`
pub fn i_pow(k: u32) -> Coeff {
    let one = BigRational::one();
    let zero = BigRational::zero();
    match k % 4 {
        0 => Coeff::new(one, zero),
        1 => Coeff::new(zero, one),
        2 => Coeff::new(-one, zero),
        _ => Coeff::new(zero, -one),
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn to_c64(c: &Coeff) -> Complex64 {
    Complex64::new(rational_to_f64(&c.re), rational_to_f64(&c.im))
}

/// `1/k!`
pub fn inv_factorial(k: u32) -> BigRational {
    let f: BigInt = (1..=k as i64).map(BigInt::from).product();
    BigRational::new(BigInt::one(), f)
}

/// Sparse trigonometric polynomial `Σ c_n e^{inx}` with exact coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExactPoly {
    pub coeffs: BTreeMap<i64, Coeff>,
}

impl ExactPoly {
    pub fn zero() -> Self {
        ExactPoly::default()
    }

    pub fn from_modes(modes: impl IntoIterator<Item = (i64, Coeff)>) -> Self {
        let mut p = ExactPoly::zero();
        for (n, c) in modes {
            p.add_mode(n, c);
        }
        p
    }

    /// `e^{inx} + e^{-inx}`
    pub fn two_cos(n: i64) -> Self {
        ExactPoly::from_modes([(n, int(1)), (-n, int(1))])
    }

    pub fn add_mode(&mut self, n: i64, c: Coeff) {
        let e = self.coeffs.entry(n).or_insert_with(Coeff::zero);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(&n);
        }
    }

    pub fn mean(&self) -> Coeff {
        self.coeffs.get(&0).cloned().unwrap_or_else(Coeff::zero)
    }

    pub fn scale(&self, c: &Coeff) -> ExactPoly {
        ExactPoly::from_modes(self.coeffs.iter().map(|(n, v)| (*n, v * c)))
    }

    pub fn add(&self, other: &ExactPoly) -> ExactPoly {
        let mut p = self.clone();
        for (n, c) in &other.coeffs {
            p.add_mode(*n, c.clone());
        }
        p
    }

    pub fn mul(&self, other: &ExactPoly) -> ExactPoly {
        let mut p = ExactPoly::zero();
        for (n, a) in &self.coeffs {
            for (m, b) in &other.coeffs {
                p.add_mode(n + m, a * b);
            }
        }
        p
    }

    /// Applies a word; `None` if its symbol is irrational.
    pub fn apply(&self, w: &OperatorWord) -> Option<ExactPoly> {
        let mut p = ExactPoly::zero();
        for (n, c) in &self.coeffs {
            p.add_mode(*n, c * w.symbol_exact(*n)?);
        }
        Some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_of_i() {
        assert_eq!(i_pow(1) * i_pow(1), int(-1));
        assert_eq!(i_pow(3), -i_pow(1));
        assert_eq!(inv_factorial(4), BigRational::new(1.into(), 24.into()));
    }

    #[test]
    fn cos_squared_has_mean_one_half_times_four() {
        let c = ExactPoly::two_cos(3);
        assert_eq!(c.mul(&c).mean(), int(2));
    }
}
