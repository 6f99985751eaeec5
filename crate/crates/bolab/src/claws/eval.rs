//! Numeric evaluation of densities on a single alias-free grid.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exact::{self, Coeff};
use crate::spectral::{fft_len, FourierField, Grid};

use super::expr::{Expr, ExprNode};

/// Default bound on evaluation grid points.
pub const DEFAULT_GRID_CAP: usize = 1 << 20;

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Largest admissible evaluation grid.
    pub grid_cap: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            grid_cap: DEFAULT_GRID_CAP,
        }
    }
}

/// Grid values of every subtree, shared between terms; `None` marks a
/// subtree that vanishes identically.
struct Evaluator<'a> {
    grid: Grid,
    u: Rc<Vec<Complex64>>,
    u_bandwidth: usize,
    cache: HashMap<&'a ExprNode, (Option<Rc<Vec<Complex64>>>, usize)>,
}

impl<'a> Evaluator<'a> {
    fn new(e: &'a Expr, u: &FourierField, opts: EvalOptions) -> Result<Self> {
        let b = u.effective_bandwidth().max(1);
        let mut grid_len = 1;
        for (node, _) in e.terms() {
            let need = fft_len(2 * node.degree() * b + 1);
            if need > opts.grid_cap {
                return Err(Error::BandwidthCap {
                    term: node.to_string(),
                    required: need,
                    cap: opts.grid_cap,
                });
            }
            grid_len = grid_len.max(need);
        }
        let has_hilbert = e
            .terms()
            .any(|(n, _)| n.words().iter().any(|w| w.zero_mode_ambiguous()));
        if has_hilbert && !u.coeff(0).is_zero() {
            return Err(Error::NonZeroMean(u.coeff(0).to_string()));
        }
        let grid = Grid::new(grid_len);
        let values = grid.to_values(&u.with_bandwidth(b));
        Ok(Evaluator {
            grid,
            u: Rc::new(values),
            u_bandwidth: u.effective_bandwidth(),
            cache: HashMap::new(),
        })
    }

    fn values(&mut self, node: &'a ExprNode) -> (Option<Rc<Vec<Complex64>>>, usize) {
        if let Some(v) = self.cache.get(node) {
            return v.clone();
        }
        let v = match node {
            ExprNode::Leaf => (Some(self.u.clone()), self.u_bandwidth),
            ExprNode::Apply(w, child) => match self.values(child) {
                (Some(vals), b) if !w.annihilates(b) => {
                    let mut vals = (*vals).clone();
                    self.grid.apply_word(&mut vals, w);
                    (Some(Rc::new(vals)), w.output_bandwidth(b))
                }
                _ => (None, 0),
            },
            ExprNode::Product(cs) => {
                let mut acc: Option<Vec<Complex64>> = None;
                let mut bw = 0;
                for c in cs {
                    match self.values(c) {
                        (Some(other), b) => {
                            bw += b;
                            match acc.as_mut() {
                                None => acc = Some((*other).clone()),
                                Some(a) => {
                                    for (x, y) in a.iter_mut().zip(other.iter()) {
                                        *x *= y;
                                    }
                                }
                            }
                        }
                        (None, _) => {
                            acc = None;
                            bw = 0;
                            break;
                        }
                    }
                }
                (acc.map(Rc::new), bw)
            }
        };
        self.cache.insert(node, v.clone());
        v
    }
}

fn two_pi_factor(p: u32) -> f64 {
    (2.0 * PI).powi(-(p as i32))
}

/// `∫_0^{2π} e(u) dx`.
pub fn eval_expr(e: &Expr, u: &FourierField) -> Result<Complex64> {
    eval_expr_with(e, u, EvalOptions::default())
}

pub fn eval_expr_with(e: &Expr, u: &FourierField, opts: EvalOptions) -> Result<Complex64> {
    if e.is_empty() {
        return Ok(Complex64::zero());
    }
    let mut ev = Evaluator::new(e, u, opts)?;
    let mut parts: Vec<Complex64> = Vec::with_capacity(e.len());
    for (node, c) in e.terms() {
        if let (Some(vals), _) = ev.values(node) {
            parts.push(exact::to_c64(c) * ev.grid.mean(&vals));
        }
    }
    Ok(crate::spectral::pairwise_sum_c(&parts) * (2.0 * PI) * two_pi_factor(e.inv_two_pi()))
}

/// `∫ e(a + d) - e(a) dx`, telescoped over every product so that each
/// summand carries a factor of `d` and no value of `e` is subtracted.
pub fn eval_increment(e: &Expr, a: &FourierField, d: &FourierField) -> Result<Complex64> {
    if e.is_empty() {
        return Ok(Complex64::zero());
    }
    let b = a.effective_bandwidth().max(d.effective_bandwidth()).max(1);
    let mut grid_len = 1;
    for (node, _) in e.terms() {
        let need = fft_len(2 * node.degree() * b + 1);
        if need > DEFAULT_GRID_CAP {
            return Err(Error::BandwidthCap {
                term: node.to_string(),
                required: need,
                cap: DEFAULT_GRID_CAP,
            });
        }
        grid_len = grid_len.max(need);
    }
    let has_hilbert = e
        .terms()
        .any(|(n, _)| n.words().iter().any(|w| w.zero_mode_ambiguous()));
    if has_hilbert && !(a.coeff(0).is_zero() && d.coeff(0).is_zero()) {
        return Err(Error::NonZeroMean((a.coeff(0) + d.coeff(0)).to_string()));
    }
    let grid = Grid::new(grid_len);
    let leaf = Rc::new((grid.to_values(&a.with_bandwidth(b)), grid.to_values(&d.with_bandwidth(b))));
    let mut cache: HashMap<&ExprNode, Pair> = HashMap::new();
    let mut parts: Vec<Complex64> = Vec::with_capacity(e.len());
    for (node, c) in e.terms() {
        let v = increment_values(node, &grid, &leaf, &mut cache);
        parts.push(exact::to_c64(c) * grid.mean(&v.1));
    }
    Ok(crate::spectral::pairwise_sum_c(&parts) * (2.0 * PI) * two_pi_factor(e.inv_two_pi()))
}

type Pair = Rc<(Vec<Complex64>, Vec<Complex64>)>;

fn increment_values<'a>(node: &'a ExprNode, grid: &Grid, leaf: &Pair, cache: &mut HashMap<&'a ExprNode, Pair>) -> Pair {
    if let Some(v) = cache.get(node) {
        return v.clone();
    }
    let v = match node {
        ExprNode::Leaf => leaf.clone(),
        ExprNode::Apply(w, child) => {
            let c = increment_values(child, grid, leaf, cache);
            let (mut x, mut dx) = (c.0.clone(), c.1.clone());
            grid.apply_word(&mut x, w);
            grid.apply_word(&mut dx, w);
            Rc::new((x, dx))
        }
        ExprNode::Product(cs) => {
            let first = increment_values(&cs[0], grid, leaf, cache);
            let (mut p, mut dp) = (first.0.clone(), first.1.clone());
            for c in &cs[1..] {
                let f = increment_values(c, grid, leaf, cache);
                for i in 0..p.len() {
                    // (p + dp)(x + dx) - p x = dp (x + dx) + p dx
                    dp[i] = dp[i] * (f.0[i] + f.1[i]) + p[i] * f.1[i];
                    p[i] *= f.0[i];
                }
            }
            Rc::new((p, dp))
        }
    };
    cache.insert(node, v.clone());
    v
}

/// The density `e(u)` itself as a (complex) field.
pub fn eval_density(e: &Expr, u: &FourierField) -> Result<FourierField> {
    let b = u.effective_bandwidth().max(1);
    if e.is_empty() {
        return Ok(FourierField::zeros(0, false));
    }
    let mut ev = Evaluator::new(e, u, EvalOptions::default())?;
    let mut acc = vec![Complex64::zero(); ev.grid.len()];
    for (node, c) in e.terms() {
        let Some(vals) = ev.values(node).0 else {
            continue;
        };
        let cf = exact::to_c64(c);
        for (a, v) in acc.iter_mut().zip(vals.iter()) {
            *a += cf * v;
        }
    }
    let f = ev.grid.to_field(&acc, e.max_degree() * b);
    Ok(f.scale(two_pi_factor(e.inv_two_pi())))
}

/// Symbolic `L²` gradient: a density `g` with `dE(u)·h = ∫ g h dx` for
/// the functional `E(u) = ∫ e(u)`, up to an additive constant.
pub fn gradient_expr(e: &Expr) -> Result<Expr> {
    let mut out = Expr::zero().with_inv_two_pi(e.inv_two_pi());
    for (node, c) in e.terms() {
        grad_node(node, None, c.clone(), &mut out)?;
    }
    Ok(out)
}

fn grad_node(node: &ExprNode, adj: Option<ExprNode>, c: Coeff, out: &mut Expr) -> Result<()> {
    match node {
        ExprNode::Leaf => {
            // a linear functional has a constant gradient, invisible on
            // zero-mean directions
            if let Some(a) = adj {
                out.add_term(c, a);
            }
            Ok(())
        }
        ExprNode::Apply(w, child) => match adj {
            None => {
                let s = w
                    .symbol_exact(0)
                    .ok_or_else(|| Error::InvalidArgument(format!("irrational symbol in `{node}`")))?;
                if s.is_zero() {
                    return Ok(());
                }
                grad_node(child, None, c * s, out)
            }
            Some(a) => {
                let (u1, wt) = w.adjoint();
                match ExprNode::apply(&wt, a) {
                    Some((u2, n)) => grad_node(child, Some(n), c * u1.mul(u2).to_coeff(), out),
                    None => Ok(()),
                }
            }
        },
        ExprNode::Product(cs) => {
            for i in 0..cs.len() {
                let mut rest: Vec<ExprNode> = Vec::with_capacity(cs.len());
                if let Some(a) = &adj {
                    rest.push(a.clone());
                }
                rest.extend(cs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, n)| n.clone()));
                grad_node(&cs[i], Some(ExprNode::product(rest)), c.clone(), out)?;
            }
            Ok(())
        }
    }
}

/// The real zero-mean field `g` with `d/dε ∫e(u+εh)|₀ = 2π Σ ĝ(-n) ĥ(n)`
/// for every real zero-mean `h`.
pub fn grad_integral(e: &Expr, u: &FourierField) -> Result<FourierField> {
    if !e.is_real() {
        return Err(Error::ComplexDensity(format!(
            "expression with {} terms is not invariant under conjugation",
            e.len()
        )));
    }
    let g = gradient_expr(e)?;
    Ok(eval_density(&g, u)?.real_part())
}

/// `∫ g h dx` for real fields.
pub fn pairing(g: &FourierField, h: &FourierField) -> f64 {
    let b = g.bandwidth().min(h.bandwidth()) as i64;
    let terms: Vec<f64> = (-b..=b).map(|n| (g.coeff(-n) * h.coeff(n)).re).collect();
    2.0 * PI * crate::spectral::pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claws::energy::energy;
    use crate::spectral::OperatorWord;

    #[test]
    fn u_squared_on_cos() {
        let e = Expr::term(exact::int(1), ExprNode::product(vec![ExprNode::Leaf, ExprNode::Leaf]));
        let v = eval_expr(&e, &FourierField::cos(1)).unwrap();
        assert!((v.re - PI).abs() < 1e-14 && v.im.abs() < 1e-14);
    }

    #[test]
    fn cap_names_term() {
        let e = Expr::term(exact::int(1), ExprNode::product(vec![ExprNode::Leaf; 4]));
        let err = eval_expr_with(&e, &FourierField::cos(50), EvalOptions { grid_cap: 64 }).unwrap_err();
        match err {
            Error::BandwidthCap { term, .. } => assert_eq!(term, "u·u·u·u"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn increment_matches_difference() {
        let e = energy(4).unwrap();
        let a = &FourierField::cos(1) + &FourierField::sin(2).scale(0.4);
        let d = (&FourierField::cos(3).scale(0.2) + &FourierField::sin(1).scale(-0.1)).scale(1e-3);
        let inc = eval_increment(&e, &a, &d).unwrap();
        let diff = eval_expr(&e, &(&a + &d)).unwrap() - eval_expr(&e, &a).unwrap();
        assert!((inc - diff).norm() < 1e-10 * diff.norm(), "{inc} vs {diff}");
    }

    #[test]
    fn gradient_of_quadratic_part() {
        let k = 4;
        let q = energy(k).unwrap().homogeneous_part(2);
        let u = &FourierField::cos(2) + &FourierField::sin(3).scale(0.3);
        let g = grad_integral(&q, &u).unwrap();
        let expected = u
            .apply_word_unchecked(&OperatorWord::dx(4))
            .scale(2.0 / (2.0 * PI));
        assert!(g.l2_distance(&expected) < 1e-12, "{g:?}");
    }
}
