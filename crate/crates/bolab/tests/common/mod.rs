#![allow(dead_code)]

use bolab::claws::Expr;
use bolab::exact;
use bolab::spectral::{Atom, OperatorWord};
use bolab::FourierField;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Real zero-mean field with coefficients of size `amp / n^decay`.
pub fn random_field(seed: u64, bandwidth: usize, amp: f64, decay: f64) -> FourierField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<Complex64> = (1..=bandwidth)
        .map(|n| {
            let s = amp / (n as f64).powf(decay);
            Complex64::new(rng.random_range(-s..s), rng.random_range(-s..s))
        })
        .collect();
    FourierField::real_from_positive(&pos)
}

pub fn random_complex(seed: u64, bandwidth: usize) -> FourierField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(i64, Complex64)> = (-(bandwidth as i64)..=bandwidth as i64)
        .filter(|&n| n != 0)
        .map(|n| (n, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
        .collect();
    FourierField::complex_from_modes(modes)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Truncated power series in ε with `Expr` coefficients, index = power.
type Series = Vec<Expr>;

fn series_mul(a: &Series, b: &Series, order: usize) -> Series {
    let mut out = vec![Expr::zero(); order + 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if i + j <= order && !x.is_empty() && !y.is_empty() {
                out[i + j] = out[i + j].add(&x.mul(y));
            }
        }
    }
    out
}

/// `w_1..w_n` by composing `1 - e^{-W}` as a truncated series, one order at
/// a time.
pub fn brute_force_w(n: usize) -> Vec<Expr> {
    let drift = OperatorWord::from_atoms(&[Atom::Pminus, Atom::Dx(1)]).unwrap().1;
    let mut w: Series = vec![Expr::zero(), Expr::leaf()];
    for m in 2..=n {
        // W truncated below order m; w_m enters 1 - e^{-W} at order m only
        // linearly, through the k = 1 term
        let mut big_w = w.clone();
        big_w.resize(m + 1, Expr::zero());
        let neg_w: Series = big_w.iter().map(|e| e.scale(&exact::int(-1))).collect();
        // [1 - e^{-W}]_m = -Σ_{k>=1} [(-W)^k]_m / k!, without the w_m term
        let mut rest = Expr::zero();
        let mut power = neg_w.clone();
        let mut factorial = 1i64;
        for k in 1..=m {
            if k > 1 {
                power = series_mul(&power, &neg_w, m);
            }
            factorial *= k as i64;
            rest = rest.add(&power[m].scale(&exact::ratio(-1, factorial)));
        }
        // ε^m: -i P_- ∂ w_{m-1} + w_m + [rest]_m = 0
        let wm = w[m - 1]
            .apply(&drift, &exact::i_pow(1))
            .add(&rest.scale(&exact::int(-1)));
        w.push(wm);
    }
    w
}
