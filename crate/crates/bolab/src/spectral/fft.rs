//! Transform plumbing: cached plans, grid sizes, and the physical-space
//! evaluation grid used by every alias-free product.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::word::OperatorWord;
use super::FourierField;

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plans() -> &'static PlanCache {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    PLANS.get_or_init(|| Mutex::new(HashMap::new()))
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = plans().lock().expect("fft plan cache poisoned");
    cache
        .entry((len, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(len)
            } else {
                planner.plan_fft_inverse(len)
            }
        })
        .clone()
}

/// Smallest 5-smooth integer `>= min` (and `>= 1`).
pub fn fft_len(min: usize) -> usize {
    let target = min.max(1);
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < 2 * target {
        let mut p3 = p2;
        while p3 < 2 * target {
            let mut p5 = p3;
            while p5 < 2 * target {
                if p5 >= target && p5 < best {
                    best = p5;
                }
                p5 *= 5;
            }
            p3 *= 3;
        }
        p2 *= 2;
    }
    best
}

/// Equispaced collocation grid on `[0, 2π)` with `len` points.
///
/// Fields placed on a grid of `len >= 2B + 1` points, where `B` bounds the
/// bandwidth of every intermediate, are represented without aliasing:
/// pointwise products followed by [`Grid::to_field`] reproduce the exact
/// convolution of coefficient sequences.
#[derive(Clone)]
pub struct Grid {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("len", &self.len).finish()
    }
}

impl Grid {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "grid must have at least one point");
        Grid {
            len,
            forward: plan(len, true),
            inverse: plan(len, false),
        }
    }

    /// Grid able to hold products whose bandwidth is at most `bandwidth`.
    pub fn for_bandwidth(bandwidth: usize) -> Self {
        Grid::new(fft_len(2 * bandwidth + 1))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Largest |n| representable without aliasing.
    pub fn max_bandwidth(&self) -> usize {
        (self.len - 1) / 2
    }

    /// Storage index of wavenumber `n`.
    #[inline]
    pub fn slot(&self, n: i64) -> usize {
        n.rem_euclid(self.len as i64) as usize
    }

    /// Samples `u` at the grid points.
    pub fn to_values(&self, u: &FourierField) -> Vec<Complex64> {
        let b = u.bandwidth() as i64;
        assert!(
            2 * b < self.len as i64,
            "field bandwidth {b} aliases on a grid of {}",
            self.len
        );
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for n in -b..=b {
            buf[self.slot(n)] = u.coeff(n);
        }
        self.inverse.process(&mut buf);
        buf
    }

    /// Coefficients `c_n`, `|n| <= bandwidth`, of grid values, returned as a
    /// complex (non real-flagged) field.
    pub fn to_field(&self, values: &[Complex64], bandwidth: usize) -> FourierField {
        let coeffs = self.spectrum(values);
        self.field_from_spectrum(&coeffs, bandwidth)
    }

    /// Raw normalised spectrum (length `len`, index `n mod len`).
    pub fn spectrum(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    pub fn field_from_spectrum(&self, spectrum: &[Complex64], bandwidth: usize) -> FourierField {
        let b = bandwidth.min(self.max_bandwidth()) as i64;
        let coeffs = (-b..=b).map(|n| spectrum[self.slot(n)]).collect();
        FourierField::from_dense_unchecked(b as usize, false, coeffs)
    }

    /// Coefficients (indexed by [`Grid::slot`]) to grid values, in place.
    pub fn synthesize(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    /// Grid values to normalised coefficients, in place.
    pub fn analyze(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        let scale = 1.0 / self.len as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// Applies a Fourier multiplier to grid values in place.
    pub fn apply_word(&self, values: &mut [Complex64], word: &OperatorWord) {
        self.forward.process(values);
        let scale = 1.0 / self.len as f64;
        let half = self.len as i64 / 2;
        for (j, v) in values.iter_mut().enumerate() {
            let mut n = j as i64;
            if n > half {
                n -= self.len as i64;
            }
            // the Nyquist slot of an even grid never carries signal here
            if 2 * n.abs() >= self.len as i64 {
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
            *v *= word.symbol(n) * scale;
        }
        self.inverse.process(values);
    }

    /// `(1/len) Σ values`, i.e. the zero mode.
    pub fn mean(&self, values: &[Complex64]) -> Complex64 {
        pairwise_sum_c(values) / self.len as f64
    }
}

/// Fixed-shape pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn pairwise_sum_c(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum_c(a) + pairwise_sum_c(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_len_is_smooth_and_minimal() {
        assert_eq!(fft_len(1), 1);
        assert_eq!(fft_len(7), 8);
        assert_eq!(fft_len(129), 135);
        assert_eq!(fft_len(8193), 8640);
        for m in 1..500 {
            let l = fft_len(m);
            assert!(l >= m);
            let mut r = l;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            assert_eq!(r, 1);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
    }
}
