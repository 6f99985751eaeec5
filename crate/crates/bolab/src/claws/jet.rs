//! Numeric Matsuno recursion with a tangent direction: all energies and
//! their directional derivatives from one set of grid passes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exact;
use crate::spectral::{fft_len, Atom, FourierField, Grid, OperatorWord};

use super::energy::{normalization, K_MAX};
use super::matsuno::product_constant;

type Values = Vec<Complex64>;

/// `E_{j/2}(u)` for `j = 0..=k_max`, and optionally `dE_{j/2}(u)·h`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyJet {
    pub values: Vec<f64>,
    pub derivatives: Option<Vec<f64>>,
}

/// Grid length needed for exact energies up to `k_max`.
pub fn jet_grid_len(k_max: usize, bv: usize, bh: usize) -> usize {
    let n = k_max + 2;
    let b = (n * bv).max((n - 1) * bv + bh);
    fft_len(2 * b.max(1) + 1)
}

pub fn energies(u: &FourierField, k_max: usize) -> Result<Vec<f64>> {
    Ok(energy_jet(u, None, k_max)?.values)
}

pub fn energies_with_derivative(u: &FourierField, h: &FourierField, k_max: usize) -> Result<EnergyJet> {
    energy_jet(u, Some(h), k_max)
}

fn check_real(f: &FourierField, what: &str) -> Result<()> {
    if !f.is_real() {
        return Err(Error::InvalidArgument(format!("{what} must be a real field")));
    }
    Ok(())
}

pub fn energy_jet(u: &FourierField, h: Option<&FourierField>, k_max: usize) -> Result<EnergyJet> {
    if k_max > K_MAX {
        return Err(Error::InvalidArgument(format!("energy index {k_max} above {K_MAX}")));
    }
    check_real(u, "u")?;
    if let Some(h) = h {
        check_real(h, "direction")?;
    }
    let n = k_max + 2;
    let bv = u.effective_bandwidth();
    let bh = h.map_or(0, |h| h.effective_bandwidth());
    let grid = Grid::new(jet_grid_len(k_max, bv, bh));
    let half = |f: &FourierField| grid.to_values(&f.with_bandwidth(f.effective_bandwidth()).scale(0.5));
    let drift = OperatorWord::from_atoms(&[Atom::Pminus, Atom::Dx(1)])
        .expect("P_-∂ is nonzero")
        .1;
    let i = Complex64::new(0.0, 1.0);
    let consts: Vec<Complex64> = (0..=n)
        .map(|k| if k < 2 { Complex64::new(0.0, 0.0) } else { exact::to_c64(&product_constant(k)) })
        .collect();

    let tangent = h.is_some();
    let len = grid.len();
    // w[m] and its tangent; pow[k][m] = [w^k]_m likewise
    let mut w: Vec<(Values, Values)> = vec![(Vec::new(), Vec::new())];
    let dw1 = h.map_or_else(Vec::new, half);
    w.push((half(u), dw1));
    let mut pow: Vec<Vec<(Values, Values)>> = vec![Vec::new(), Vec::new()];
    for m in 2..=n {
        for k in 2..=m {
            if pow.len() <= k {
                pow.push(Vec::new());
            }
            let mut acc = vec![Complex64::new(0.0, 0.0); len];
            let mut dacc = if tangent { acc.clone() } else { Vec::new() };
            for j in 1..=(m + 1 - k) {
                let (a, da) = &w[j];
                let (b, db) = if k == 2 { &w[m - j] } else { &pow[k - 1][m - j] };
                for t in 0..len {
                    acc[t] += a[t] * b[t];
                }
                if tangent {
                    for t in 0..len {
                        dacc[t] += a[t] * db[t] + da[t] * b[t];
                    }
                }
            }
            while pow[k].len() < m {
                pow[k].push((Vec::new(), Vec::new()));
            }
            pow[k].push((acc, dacc));
        }
        let (prev, dprev) = &w[m - 1];
        let mut wm = prev.clone();
        grid.apply_word(&mut wm, &drift);
        let mut dwm = dprev.clone();
        if tangent {
            grid.apply_word(&mut dwm, &drift);
        }
        for t in 0..len {
            wm[t] *= i;
        }
        for t in 0..dwm.len() {
            dwm[t] *= i;
        }
        for (k, c) in consts.iter().enumerate().take(m + 1).skip(2) {
            let (p, dp) = &pow[k][m];
            for t in 0..len {
                wm[t] += c * p[t];
            }
            if tangent {
                for t in 0..len {
                    dwm[t] += c * dp[t];
                }
            }
        }
        w.push((wm, dwm));
    }

    let mut values = Vec::with_capacity(k_max + 1);
    let mut derivatives = Vec::with_capacity(k_max + 1);
    for j in 0..=k_max {
        let r = exact::rational_to_f64(&normalization(j)?);
        let (v, dv) = &w[j + 2];
        values.push(r * grid.mean(v).re);
        if tangent {
            derivatives.push(r * grid.mean(dv).re);
        }
    }
    Ok(EnergyJet {
        values,
        derivatives: tangent.then_some(derivatives),
    })
}

/// `E_{j/2}(a + d) − E_{j/2}(a)` for `j = 0..=k_max`, summed from the
/// Taylor coefficients of `ε ↦ E_{j/2}(a + εd)` so that no `E_{j/2}(a)`
/// ever cancels.
pub fn energy_increments(a: &FourierField, d: &FourierField, k_max: usize) -> Result<Vec<f64>> {
    if k_max > K_MAX {
        return Err(Error::InvalidArgument(format!("energy index {k_max} above {K_MAX}")));
    }
    check_real(a, "base point")?;
    check_real(d, "increment")?;
    let n = k_max + 2;
    // E_{j/2} has degree j + 2 <= n in u
    let deg = n;
    let b = a.effective_bandwidth().max(d.effective_bandwidth());
    let grid = Grid::new(jet_grid_len(k_max, b, b));
    let len = grid.len();
    let zero = Complex64::new(0.0, 0.0);
    let half = |f: &FourierField| grid.to_values(&f.with_bandwidth(f.effective_bandwidth()).scale(0.5));
    let drift = OperatorWord::from_atoms(&[Atom::Pminus, Atom::Dx(1)])
        .expect("P_-∂ is nonzero")
        .1;
    let i = Complex64::new(0.0, 1.0);
    let consts: Vec<Complex64> = (0..=n)
        .map(|k| if k < 2 { zero } else { exact::to_c64(&product_constant(k)) })
        .collect();
    // series[r][t]: coefficient of ε^r at grid point t
    type Series = Vec<Values>;
    let mul_add = |acc: &mut Series, x: &Series, y: &Series| {
        for p in 0..=deg {
            for q in 0..=(deg - p) {
                let (xp, yq) = (&x[p], &y[q]);
                let out = &mut acc[p + q];
                for t in 0..len {
                    out[t] += xp[t] * yq[t];
                }
            }
        }
    };
    let empty = || -> Series { vec![vec![zero; len]; deg + 1] };
    let mut w: Vec<Series> = vec![Vec::new()];
    let mut w1 = empty();
    w1[0] = half(a);
    w1[1] = half(d);
    w.push(w1);
    let mut pow: Vec<Vec<Series>> = vec![Vec::new(), Vec::new()];
    for m in 2..=n {
        for k in 2..=m {
            if pow.len() <= k {
                pow.push(Vec::new());
            }
            let mut acc = empty();
            for j in 1..=(m + 1 - k) {
                let rhs = if k == 2 { &w[m - j] } else { &pow[k - 1][m - j] };
                mul_add(&mut acc, &w[j], rhs);
            }
            while pow[k].len() < m {
                pow[k].push(Vec::new());
            }
            pow[k].push(acc);
        }
        let mut wm = w[m - 1].clone();
        for coeff in wm.iter_mut() {
            grid.apply_word(coeff, &drift);
            for x in coeff.iter_mut() {
                *x *= i;
            }
        }
        for (k, c) in consts.iter().enumerate().take(m + 1).skip(2) {
            for (r, coeff) in wm.iter_mut().enumerate() {
                let p = &pow[k][m][r];
                for t in 0..len {
                    coeff[t] += c * p[t];
                }
            }
        }
        w.push(wm);
    }
    (0..=k_max)
        .map(|j| {
            let r = exact::rational_to_f64(&normalization(j)?);
            let parts: Vec<f64> = w[j + 2][1..].iter().map(|c| grid.mean(c).re).collect();
            Ok(r * crate::spectral::pairwise_sum(&parts))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claws::energy::energy;
    use crate::claws::eval::eval_expr;

    fn field() -> FourierField {
        FourierField::real_from_positive(&[
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.1, 0.25),
            Complex64::new(0.05, 0.07),
            Complex64::new(0.02, -0.04),
        ])
    }

    #[test]
    fn agrees_with_symbolic_energies() {
        let u = field();
        let jet = energies(&u, 6).unwrap();
        for (k, v) in jet.iter().enumerate() {
            let s = eval_expr(&energy(k).unwrap(), &u).unwrap();
            assert!((s.re - v).abs() < 1e-12 * (1.0 + v.abs()), "k={k}: {} vs {v}", s.re);
        }
    }

    #[test]
    fn l2_energy() {
        let u = field();
        let e = energies(&u, 0).unwrap()[0];
        assert!((e - u.sobolev_norm_sq(0.0, true)).abs() < 1e-14);
    }

    #[test]
    fn tangent_matches_differences() {
        let u = field();
        let h = &FourierField::cos(3) + &FourierField::sin(6).scale(0.5);
        let jet = energies_with_derivative(&u, &h, 5).unwrap();
        let eps = 1e-5;
        let p = energies(&(&u + &h.scale(eps)), 5).unwrap();
        let m = energies(&(&u + &h.scale(-eps)), 5).unwrap();
        for (j, d) in jet.derivatives.unwrap().iter().enumerate() {
            let fd = (p[j] - m[j]) / (2.0 * eps);
            assert!((fd - d).abs() < 1e-6 * (1.0 + d.abs()), "j={j}: {fd} vs {d}");
        }
    }

    #[test]
    fn increments_match_differences() {
        let u = field();
        let d = &FourierField::cos(2).scale(0.3) + &FourierField::sin(5).scale(-0.2);
        let inc = energy_increments(&u, &d, 6).unwrap();
        let (e0, e1) = (energies(&u, 6).unwrap(), energies(&(&u + &d), 6).unwrap());
        for j in 0..=6 {
            assert!((inc[j] - (e1[j] - e0[j])).abs() < 1e-12 * (1.0 + e1[j].abs()), "j={j}");
        }
    }

    #[test]
    fn tiny_increments_keep_relative_precision() {
        let u = field();
        let d = FourierField::cos(3).scale(1e-9);
        let tangent = energies_with_derivative(&u, &FourierField::cos(3), 6).unwrap();
        let inc = energy_increments(&u, &d, 6).unwrap();
        for (j, g) in tangent.derivatives.unwrap().iter().enumerate() {
            let lin = 1e-9 * g;
            assert!((inc[j] - lin).abs() <= 1e-8 * lin.abs() + 1e-24, "j={j}: {} vs {lin}", inc[j]);
        }
    }
}
