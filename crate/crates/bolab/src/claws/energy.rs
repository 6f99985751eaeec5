//! Conserved energies `E_{k/2}` of `∂_t u + H∂_x²u + u∂_x u = 0`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::{self, Coeff, ExactPoly};

use super::expr::{Expr, ExprNode};
use super::matsuno::{matsuno_w_truncated, DEFAULT_N_MAX};

/// Largest `k` with an available energy.
pub const K_MAX: usize = DEFAULT_N_MAX - 2;

/// `u` solves `∂_t u + H∂_x²u + u∂_x u = 0` iff `u/2` solves the equation
/// conserving every `∫ w_n`, `∂_t u + H∂_x²u + 2u∂_x u = 0`.
pub const MATSUNO_NONLINEARITY: f64 = 2.0;

/// Realified, rescaled `w_{k+2}(u/2)` truncated at `max_degree`, before
/// normalisation.
fn raw_energy(k: usize, max_degree: usize) -> Result<Expr> {
    if k > K_MAX {
        return Err(Error::InvalidArgument(format!("energy index {k} above {K_MAX}")));
    }
    let w = matsuno_w_truncated(k + 2, max_degree)?;
    Ok(w.scale_by_degree(&exact::ratio(1, 2)).real_part().drop_top_level_words())
}

/// The rational `r_k` with `E_{k/2} = (r_k/2π) ∫ Re w_{k+2}(u/2) dx`.
///
/// Fixed by requiring the quadratic part to integrate to
/// `Σ |n|^k |u_n|²`, tested on `u = 2cos(mx)` for several `m`.
pub fn normalization(k: usize) -> Result<BigRational> {
    type Cache = Mutex<HashMap<usize, BigRational>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("normalisation cache").get(&k) {
        return Ok(r.clone());
    }
    let q = raw_energy(k, 2)?.homogeneous_part(2);
    let mut ratio: Option<BigRational> = None;
    for m in 1..=(k as i64 + 3) {
        let c0 = q
            .exact_mean(&ExactPoly::two_cos(m))
            .ok_or_else(|| degenerate(k, "irrational symbol in quadratic part"))?;
        if !c0.im.is_zero() {
            return Err(degenerate(k, "quadratic part is not real"));
        }
        if c0.re.is_zero() {
            return Err(degenerate(k, &format!("quadratic part vanishes on cos({m}x)")));
        }
        let target = BigRational::from_integer(BigInt::from(2) * BigInt::from(m).pow(k as u32));
        let r = target / c0.re;
        match &ratio {
            None => ratio = Some(r),
            Some(prev) if *prev == r => {}
            Some(_) => return Err(degenerate(k, "quadratic symbol is not proportional to |n|^k")),
        }
    }
    let r = ratio.expect("at least one test mode");
    cache.lock().expect("normalisation cache").insert(k, r.clone());
    Ok(r)
}

fn degenerate(k: usize, reason: &str) -> Error {
    Error::DegenerateNormalization {
        k,
        reason: reason.into(),
    }
}

/// Density of `E_{k/2}`; its integral is the energy.
pub fn energy(k: usize) -> Result<Arc<Expr>> {
    energy_truncated(k, usize::MAX)
}

/// [`energy`] keeping only homogeneity `<= max_degree`.
pub fn energy_truncated(k: usize, max_degree: usize) -> Result<Arc<Expr>> {
    type Cache = Mutex<HashMap<(usize, usize), Arc<Expr>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let max_degree = max_degree.min(k + 2);
    if let Some(e) = cache.lock().expect("energy cache").get(&(k, max_degree)) {
        return Ok(e.clone());
    }
    let r = normalization(k)?;
    let e = Arc::new(raw_energy(k, max_degree)?.scale(&exact::real(r)).with_inv_two_pi(1));
    cache.lock().expect("energy cache").insert((k, max_degree), e.clone());
    Ok(e)
}

/// `p ↦ p̃`: drops every Hilbert transform; each sign projector leaves `1/2`.
pub fn erase_hilbert(e: &Expr) -> Expr {
    let mut out = Expr::zero().with_inv_two_pi(e.inv_two_pi());
    for (node, c) in e.terms() {
        let (f, n) = erase_node(node);
        out.add_term(c * f, n);
    }
    out
}

fn erase_node(node: &ExprNode) -> (Coeff, ExprNode) {
    match node {
        ExprNode::Leaf => (exact::int(1), ExprNode::Leaf),
        ExprNode::Apply(w, child) => {
            let (c1, inner) = erase_node(child);
            let (c2, word) = w.erase_hilbert();
            match ExprNode::apply(&word, inner) {
                Some((u, n)) => (c1 * c2 * u.to_coeff(), n),
                None => (Coeff::zero(), ExprNode::Leaf),
            }
        }
        ExprNode::Product(cs) => {
            let mut c = exact::int(1);
            let mut kids = Vec::with_capacity(cs.len());
            for ch in cs {
                let (ci, n) = erase_node(ch);
                c *= ci;
                kids.push(n);
            }
            (c, ExprNode::product(kids))
        }
    }
}

/// `(|p|, ‖p‖)`: largest and total derivative order over the factors.
///
/// Only defined on monomials whose derivatives all sit on single factors.
pub fn gradings(node: &ExprNode) -> Result<(u32, u32)> {
    let mut orders = Vec::new();
    leaf_orders(node, &mut orders)?;
    Ok((orders.iter().copied().max().unwrap_or(0), orders.iter().sum()))
}

pub(crate) fn leaf_orders(node: &ExprNode, out: &mut Vec<u32>) -> Result<()> {
    match node {
        ExprNode::Leaf => out.push(0),
        ExprNode::Apply(w, child) => match **child {
            ExprNode::Leaf => out.push(w.derivative_order()),
            _ => {
                if w.derivative_order() > 0 || w.has_cutoffs() {
                    return Err(Error::InvalidArgument(format!(
                        "`{node}` is not a monomial: derivative acts on a group of factors"
                    )));
                }
                leaf_orders(child, out)?;
            }
        },
        ExprNode::Product(cs) => {
            for c in cs {
                leaf_orders(c, out)?;
            }
        }
    }
    Ok(())
}

/// Largest absolute numerator/denominator bit size, a cheap sanity probe.
pub fn coefficient_bits(e: &Expr) -> u64 {
    e.terms()
        .map(|(_, c)| {
            [c.re.numer(), c.re.denom(), c.im.numer(), c.im.denom()]
                .iter()
                .map(|b| b.abs().bits())
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::OperatorWord;

    #[test]
    fn l2_normalisation() {
        assert_eq!(normalization(0).unwrap(), BigRational::from_integer(8.into()));
        let e0 = energy(0).unwrap();
        assert_eq!(e0.len(), 1);
        assert_eq!(e0.inv_two_pi(), 1);
        let (node, c) = e0.terms().next().unwrap();
        assert_eq!(*node, ExprNode::product(vec![ExprNode::Leaf, ExprNode::Leaf]));
        assert_eq!(*c, exact::int(1));
    }

    #[test]
    fn normalisations_exist() {
        for k in 0..=K_MAX {
            let r = normalization(k).unwrap();
            assert!(r.is_positive() || r.is_negative(), "k = {k}");
        }
    }

    #[test]
    fn energies_are_real() {
        for k in 0..=4 {
            assert!(energy(k).unwrap().is_real(), "k = {k}");
        }
    }

    #[test]
    fn erase_example() {
        let h = OperatorWord::hdx(true, 2);
        let p = ExprNode::product(vec![
            ExprNode::Leaf,
            ExprNode::leaf_word(h),
            ExprNode::leaf_word(OperatorWord::dx(3)),
        ]);
        let e = erase_hilbert(&Expr::term(exact::int(1), p));
        let expected = ExprNode::product(vec![
            ExprNode::Leaf,
            ExprNode::leaf_word(OperatorWord::dx(2)),
            ExprNode::leaf_word(OperatorWord::dx(3)),
        ]);
        assert_eq!(e.coeff_of(&expected), exact::int(1));
        assert_eq!(gradings(&expected).unwrap(), (3, 5));
    }

    #[test]
    fn grading_examples() {
        let uuu = ExprNode::product(vec![ExprNode::Leaf; 3]);
        assert_eq!(gradings(&uuu).unwrap(), (0, 0));
        let d = ExprNode::leaf_word(OperatorWord::dx(1));
        assert_eq!(gradings(&ExprNode::product(vec![d.clone(), d])).unwrap(), (1, 2));
        let grouped = ExprNode::apply(&OperatorWord::dx(1), uuu).unwrap().1;
        assert!(gradings(&grouped).is_err());
    }
}
