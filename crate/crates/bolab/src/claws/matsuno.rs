//! Coefficients `w_n` of the series solution of
//! `-ε i P_- w_x + (1 - e^{-w}) = ε u`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::exact::{self, Coeff};
use crate::spectral::{Atom, OperatorWord};

use super::expr::Expr;

/// Largest `n` accepted by [`matsuno_w`].
pub const DEFAULT_N_MAX: usize = 10;

/// `w_1..w_n` together with the power tables `[w^k]_m`, optionally keeping
/// only terms of homogeneity `<= max_degree`.
#[derive(Debug)]
struct Table {
    max_degree: usize,
    /// `w[n]`, index 0 unused
    w: Vec<Arc<Expr>>,
    /// `powers[k][m] = [ (Σ w_j ε^j)^k ]_{ε^m}`
    powers: Vec<Vec<Arc<Expr>>>,
}

impl Table {
    fn new(max_degree: usize) -> Self {
        Table {
            max_degree,
            w: vec![Arc::new(Expr::zero()), Arc::new(Expr::leaf())],
            powers: vec![Vec::new(), vec![Arc::new(Expr::zero()), Arc::new(Expr::leaf())]],
        }
    }

    fn extend_to(&mut self, n: usize) {
        let drift = OperatorWord::from_atoms(&[Atom::Pminus, Atom::Dx(1)])
            .expect("P_-∂ is nonzero")
            .1;
        while self.w.len() <= n {
            let m = self.w.len();
            // powers[k][m] for k >= 2 only need w_j with j < m
            for k in 2..=m {
                if self.powers.len() <= k {
                    self.powers.push(vec![Arc::new(Expr::zero()); k]);
                }
                let mut acc = Expr::zero();
                for j in 1..=(m + 1 - k) {
                    let prev = &self.powers[k - 1][m - j];
                    if prev.is_empty() {
                        continue;
                    }
                    acc = acc.add(&self.w[j].mul_truncated(prev, self.max_degree));
                }
                debug_assert_eq!(self.powers[k].len(), m);
                self.powers[k].push(Arc::new(acc));
            }
            let mut wm = self.w[m - 1].apply(&drift, &exact::i_pow(1));
            for k in 2..=m {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                let c = exact::real(exact::inv_factorial(k as u32) * BigRational::from_integer(sign.into()));
                wm = wm.add(&self.powers[k][m].scale(&c));
            }
            let wm = Arc::new(wm);
            self.powers[1].push(wm.clone());
            self.w.push(wm);
        }
    }
}

type Cache = Mutex<HashMap<usize, Table>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn lookup(n: usize, max_degree: usize) -> Arc<Expr> {
    let mut guard = cache().lock().expect("matsuno cache poisoned");
    let table = guard.entry(max_degree).or_insert_with(|| Table::new(max_degree));
    table.extend_to(n);
    table.w[n].clone()
}

/// `w_n`, exact, memoised. `1 <= n <= DEFAULT_N_MAX`.
pub fn matsuno_w(n: usize) -> Result<Arc<Expr>> {
    matsuno_w_with_limit(n, DEFAULT_N_MAX)
}

pub fn matsuno_w_with_limit(n: usize, n_max: usize) -> Result<Arc<Expr>> {
    check_index(n, n_max)?;
    Ok(lookup(n, usize::MAX))
}

/// Terms of `w_n` with homogeneity `<= max_degree`; much cheaper than the
/// full expression when only low-order parts are needed.
pub fn matsuno_w_truncated(n: usize, max_degree: usize) -> Result<Arc<Expr>> {
    check_index(n, usize::MAX)?;
    if max_degree >= n {
        return Ok(lookup(n, usize::MAX));
    }
    Ok(lookup(n, max_degree))
}

fn check_index(n: usize, n_max: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("matsuno_w needs n >= 1".into()));
    }
    if n > n_max {
        return Err(Error::InvalidArgument(format!("matsuno_w index {n} above the limit {n_max}")));
    }
    Ok(())
}

/// Coefficient of the recursion's `k`-fold product term.
pub fn product_constant(k: usize) -> Coeff {
    let sign = if k % 2 == 0 { 1 } else { -1 };
    exact::real(exact::inv_factorial(k as u32) * BigRational::from_integer(sign.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claws::expr::ExprNode;

    #[test]
    fn first_terms() {
        assert_eq!(*matsuno_w(1).unwrap(), Expr::leaf());
        let w2 = matsuno_w(2).unwrap();
        let drift = OperatorWord::from_atoms(&[Atom::Pminus, Atom::Dx(1)]).unwrap().1;
        let expected = Expr::leaf()
            .apply(&drift, &exact::i_pow(1))
            .add(&Expr::term(exact::ratio(1, 2), ExprNode::product(vec![ExprNode::Leaf, ExprNode::Leaf])));
        assert_eq!(*w2, expected);
    }

    #[test]
    fn rejects_zero_index() {
        assert!(matsuno_w(0).is_err());
        assert!(matsuno_w(DEFAULT_N_MAX + 1).is_err());
    }

    #[test]
    fn homogeneity_range() {
        for n in 1..=6 {
            let w = matsuno_w(n).unwrap();
            assert_eq!(w.degrees(), (1..=n).collect::<Vec<_>>(), "w_{n}");
        }
    }

    #[test]
    fn truncation_agrees_with_full() {
        for n in 1..=6 {
            let full = matsuno_w(n).unwrap();
            let t = matsuno_w_truncated(n, 3).unwrap();
            assert_eq!(*t, full.filter(|node| node.degree() <= 3));
        }
    }
}
