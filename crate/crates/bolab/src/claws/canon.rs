//! Normal forms of integrated densities.
//!
//! Every rewrite here preserves `∫ e(u) dx` for zero-mean `u`, not the
//! density itself.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::exact::{self, Coeff};
use crate::spectral::{Atom, OperatorWord, Projector, Unit};

use super::energy::leaf_orders;
use super::expr::{Expr, ExprNode};

/// One factor `H^e ∂^α u`.
type Factor = (u32, u8);
/// Sorted cubic monomial `∫ Π H^{e_i} ∂^{α_i} u`.
type Cubic = [Factor; 3];

/// `W u = Σ c_e H^e ∂^α u` on zero-mean `u`; `None` for cutoff or
/// smoothing words.
fn leaf_expansion(w: &OperatorWord) -> Option<Vec<(Coeff, u8)>> {
    if w.has_cutoffs() {
        return None;
    }
    let h = w.hilbert_power();
    let base = if (h / 2) % 2 == 0 { exact::int(1) } else { exact::int(-1) };
    let e0 = h % 2;
    let mut out: Vec<(Coeff, u8)> = match w.projection() {
        None => vec![(base, e0)],
        Some(p) => {
            let s = if p == Projector::Minus { -1 } else { 1 };
            let half = exact::ratio(1, 2);
            let ih = exact::i_pow(1) * exact::ratio(s, 2);
            vec![(&base * half, e0), (&base * ih, e0 + 1)]
        }
    };
    for (c, e) in &mut out {
        if *e == 2 {
            *c = -c.clone();
            *e = 0;
        }
    }
    Some(out)
}

fn leafish(node: &ExprNode) -> Option<OperatorWord> {
    match node {
        ExprNode::Leaf => Some(OperatorWord::identity()),
        ExprNode::Apply(w, c) if **c == ExprNode::Leaf => Some(w.clone()),
        _ => None,
    }
}

/// Rewrites a cubic term as `Σ c ∫ W_1u W_2u W_3u` by moving group
/// operators onto single factors through their transposes.
fn flatten_cubic(node: &ExprNode) -> Option<Vec<(Coeff, Vec<OperatorWord>)>> {
    match node {
        ExprNode::Leaf => None,
        ExprNode::Apply(w, child) => {
            let s = w.symbol_exact(0)?;
            if s.is_zero() {
                return Some(Vec::new());
            }
            let inner = flatten_cubic(child)?;
            Some(inner.into_iter().map(|(c, ws)| (c * &s, ws)).collect())
        }
        ExprNode::Product(cs) => {
            let words: Vec<Option<OperatorWord>> = cs.iter().map(leafish).collect();
            if words.iter().all(Option::is_some) {
                return (cs.len() == 3).then(|| vec![(exact::int(1), words.into_iter().flatten().collect())]);
            }
            if cs.len() != 2 {
                return None;
            }
            let (fi, gi) = if words[0].is_some() { (0, 1) } else { (1, 0) };
            let wf = words[fi].clone()?;
            let ExprNode::Apply(wg, inner) = &cs[gi] else {
                return None;
            };
            let (u1, wt) = wg.adjoint();
            let Some((u2, composed)) = wt.compose(&wf) else {
                return Some(Vec::new());
            };
            let moved = ExprNode::product(vec![(**inner).clone(), ExprNode::leaf_word(composed)]);
            let unit = u1.mul(u2).to_coeff();
            let rest = flatten_cubic(&moved)?;
            Some(rest.into_iter().map(|(c, ws)| (c * &unit, ws)).collect())
        }
    }
}

fn sorted(mut f: Cubic) -> Cubic {
    f.sort();
    f
}

/// Elimination priority; larger is eliminated first.
fn badness(m: &Cubic) -> (u32, i64, (u8, u8, u8), Cubic) {
    let [a, b, c] = *m;
    (c.0, -(b.0 as i64), (c.1, 1 - b.1, a.1), *m)
}

fn cubics_of_order(s: u32) -> BTreeSet<Cubic> {
    let mut out = BTreeSet::new();
    for a in 0..=s {
        for b in a..=s {
            if a + b > s {
                break;
            }
            let c = s - a - b;
            if c < b {
                continue;
            }
            for mask in 0..8u8 {
                out.insert(sorted([(a, mask & 1), (b, (mask >> 1) & 1), (c, (mask >> 2) & 1)]));
            }
        }
    }
    out
}

/// Integration-by-parts relations among cubic monomials of order `s`,
/// reduced to row echelon form with the worst columns as pivots.
struct Relations {
    pivots: Vec<(Cubic, BTreeMap<Cubic, BigRational>)>,
}

impl Relations {
    fn new(s: u32) -> Self {
        let mut rows: Vec<BTreeMap<Cubic, BigRational>> = Vec::new();
        if s >= 1 {
            for m in cubics_of_order(s - 1) {
                let mut row: BTreeMap<Cubic, BigRational> = BTreeMap::new();
                for i in 0..3 {
                    let mut f = m;
                    f[i].0 += 1;
                    *row.entry(sorted(f)).or_insert_with(BigRational::zero) += BigRational::one();
                }
                row.retain(|_, v| !v.is_zero());
                if !row.is_empty() {
                    rows.push(row);
                }
            }
        }
        let mut columns: Vec<Cubic> = cubics_of_order(s).into_iter().collect();
        columns.sort_by_key(|c| std::cmp::Reverse(badness(c)));
        let mut pivots: Vec<(Cubic, BTreeMap<Cubic, BigRational>)> = Vec::new();
        for col in columns {
            let Some(idx) = rows.iter().position(|r| r.contains_key(&col)) else {
                continue;
            };
            let mut row = rows.swap_remove(idx);
            let lead = row[&col].clone();
            for v in row.values_mut() {
                *v /= &lead;
            }
            for other in rows.iter_mut().chain(pivots.iter_mut().map(|(_, r)| r)) {
                if let Some(f) = other.get(&col).cloned() {
                    for (k, v) in &row {
                        let e = other.entry(*k).or_insert_with(BigRational::zero);
                        *e -= &f * v;
                    }
                    other.retain(|_, v| !v.is_zero());
                }
            }
            pivots.push((col, row));
        }
        Relations { pivots }
    }

    fn reduce(&self, v: &mut BTreeMap<Cubic, Coeff>) {
        for (col, row) in &self.pivots {
            let Some(f) = v.get(col).cloned() else { continue };
            for (k, r) in row {
                let e = v.entry(*k).or_insert_with(Coeff::zero);
                *e -= &f * exact::real(r.clone());
            }
            v.retain(|_, c| !c.is_zero());
        }
    }
}

fn cubic_node(m: &Cubic) -> ExprNode {
    ExprNode::product(
        m.iter()
            .map(|&(a, e)| ExprNode::leaf_word(OperatorWord::hdx(e == 1, a)))
            .collect(),
    )
}

/// Normal form of the cubic part modulo exact derivatives.
///
/// Cubic terms become combinations of `∫ H^{e_1}∂^{α_1}u · H^{e_2}∂^{α_2}u ·
/// H^{e_3}∂^{α_3}u`; among monomials related by integration by parts the
/// most balanced derivative distributions survive. Other terms, and cubic
/// terms carrying cutoff words, pass through unchanged.
pub fn canonicalize_cubic(e: &Expr) -> Expr {
    let mut out = Expr::zero().with_inv_two_pi(e.inv_two_pi());
    let mut by_order: BTreeMap<u32, BTreeMap<Cubic, Coeff>> = BTreeMap::new();
    for (node, c) in e.terms() {
        if node.degree() != 3 {
            out.add_term(c.clone(), node.clone());
            continue;
        }
        let Some(flat) = flatten_cubic(node) else {
            out.add_term(c.clone(), node.clone());
            continue;
        };
        let mut expanded: Vec<(Coeff, Cubic)> = Vec::new();
        let mut ok = true;
        for (c1, words) in flat {
            let mut parts: Vec<(Coeff, Vec<Factor>)> = vec![(c * c1, Vec::new())];
            for w in &words {
                let Some(exp) = leaf_expansion(w) else {
                    ok = false;
                    break;
                };
                let mut next = Vec::new();
                for (pc, fs) in &parts {
                    for (ec, e) in &exp {
                        let mut f = fs.clone();
                        f.push((w.derivative_order(), *e));
                        next.push((pc * ec, f));
                    }
                }
                parts = next;
            }
            if !ok {
                break;
            }
            for (pc, fs) in parts {
                expanded.push((pc, sorted([fs[0], fs[1], fs[2]])));
            }
        }
        if !ok {
            out.add_term(c.clone(), node.clone());
            continue;
        }
        for (pc, m) in expanded {
            let s: u32 = m.iter().map(|f| f.0).sum();
            let slot = by_order.entry(s).or_default().entry(m).or_insert_with(Coeff::zero);
            *slot += pc;
        }
    }
    for (s, mut v) in by_order {
        v.retain(|_, c| !c.is_zero());
        Relations::new(s).reduce(&mut v);
        for (m, c) in v {
            out.add_term(c, cubic_node(&m));
        }
    }
    out
}

fn hilbert_power(h: u8) -> OperatorWord {
    OperatorWord::from_atoms(&vec![Atom::Hil; h as usize])
        .expect("Hilbert powers are nonzero")
        .1
}

/// `H^h` applied to a monomial; on single factors `H² = -1`.
fn apply_hilbert(h: u8, node: ExprNode) -> (Coeff, ExprNode) {
    if h == 0 {
        return (exact::int(1), node);
    }
    if let Some(w) = leafish(&node) {
        let total = w.hilbert_power() + h;
        let sign = if (total / 2) % 2 == 0 { 1 } else { -1 };
        let word = OperatorWord::hdx(total % 2 == 1, w.derivative_order());
        return (exact::int(sign), ExprNode::leaf_word(word));
    }
    let (u, n) = ExprNode::apply(&hilbert_power(h), node).expect("H^h is invertible");
    (u.to_coeff(), n)
}

fn multinomial_splits(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in multinomial_splits(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn multinomial(total: u32, split: &[u32]) -> BigRational {
    let mut r = BigRational::one() / exact::inv_factorial(total);
    for s in split {
        r *= exact::inv_factorial(*s);
    }
    r
}

/// Expansion of `∂^extra node` into monomials: derivatives on single
/// factors, Hilbert transforms possibly on groups. `None` for cutoff words.
fn monomials(node: &ExprNode, extra: u32) -> Option<Vec<(Coeff, ExprNode)>> {
    match node {
        ExprNode::Leaf => Some(vec![(exact::int(1), ExprNode::leaf_word(OperatorWord::dx(extra)))]),
        ExprNode::Apply(w, child) => {
            if w.has_cutoffs() {
                return None;
            }
            let inner = monomials(child, extra + w.derivative_order())?;
            let h = w.hilbert_power();
            let hs: Vec<(Coeff, u8)> = match w.projection() {
                None => vec![(exact::int(1), h)],
                Some(p) => {
                    let s = if p == Projector::Minus { -1 } else { 1 };
                    vec![(exact::ratio(1, 2), h), (exact::i_pow(1) * exact::ratio(s, 2), h + 1)]
                }
            };
            let mut out = Vec::new();
            for (c, n) in inner {
                for (hc, hp) in &hs {
                    let (sc, m) = apply_hilbert(*hp, n.clone());
                    out.push((&c * hc * sc, m));
                }
            }
            Some(out)
        }
        ExprNode::Product(cs) => {
            let mut out = Vec::new();
            for split in multinomial_splits(extra, cs.len()) {
                let weight = exact::real(multinomial(extra, &split));
                let mut acc: Vec<(Coeff, Vec<ExprNode>)> = vec![(weight, Vec::new())];
                for (child, d) in cs.iter().zip(&split) {
                    let parts = monomials(child, *d)?;
                    let mut next = Vec::with_capacity(acc.len() * parts.len());
                    for (ac, an) in &acc {
                        for (pc, pn) in &parts {
                            let mut v = an.clone();
                            v.push(pn.clone());
                            next.push((ac * pc, v));
                        }
                    }
                    acc = next;
                }
                out.extend(acc.into_iter().map(|(c, v)| (c, ExprNode::product(v))));
            }
            Some(out)
        }
    }
}

/// Rewrites every term as a combination of monomials in which all
/// derivatives act on single factors and sign projectors are expanded as
/// `P_± = (1 ± iH)/2`. Terms with cutoff words pass through.
pub fn monomialize(e: &Expr) -> Expr {
    let mut out = Expr::zero().with_inv_two_pi(e.inv_two_pi());
    for (node, c) in e.terms() {
        match monomials(node, 0) {
            Some(parts) => {
                for (pc, n) in parts {
                    out.add_term(c * pc, n);
                }
            }
            None => out.add_term(c.clone(), node.clone()),
        }
    }
    out.drop_top_level_words()
}

/// Adds `delta` derivatives to the `idx`-th leaf (traversal order).
fn shift_leaf(node: &ExprNode, idx: &mut usize, delta: i32) -> ExprNode {
    match node {
        ExprNode::Leaf | ExprNode::Apply(_, _) if leafish(node).is_some() => {
            let w = leafish(node).unwrap();
            if *idx == 0 {
                *idx = usize::MAX;
                let order = (w.derivative_order() as i32 + delta) as u32;
                ExprNode::leaf_word(OperatorWord::hdx(w.hilbert_power() == 1, order))
            } else {
                *idx = idx.wrapping_sub(1);
                node.clone()
            }
        }
        ExprNode::Apply(w, child) => {
            let inner = shift_leaf(child, idx, delta);
            ExprNode::Apply(w.clone(), Box::new(inner))
        }
        ExprNode::Product(cs) => ExprNode::product(cs.iter().map(|c| shift_leaf(c, idx, delta)).collect()),
        ExprNode::Leaf => unreachable!(),
    }
}

fn orders(node: &ExprNode) -> Vec<u32> {
    let mut v = Vec::new();
    leaf_orders(node, &mut v).expect("monomial");
    v
}

/// Moves derivatives off the most differentiated factor by parts until no
/// factor carries two more derivatives than every other one. Applies to
/// terms of homogeneity `>= 4`; lower terms pass through.
pub fn balance_higher(e: &Expr) -> Expr {
    let mut out = Expr::zero().with_inv_two_pi(e.inv_two_pi());
    let mut work: BTreeMap<ExprNode, Coeff> = BTreeMap::new();
    let low = e.filter(|n| n.degree() < 4);
    for (n, c) in low.terms() {
        out.add_term(c.clone(), n.clone());
    }
    let high = monomialize(&e.filter(|n| n.degree() >= 4));
    for (n, c) in high.terms() {
        if n.words().iter().any(|w| w.has_cutoffs()) {
            out.add_term(c.clone(), n.clone());
        } else {
            work.insert(n.clone(), c.clone());
        }
    }
    while let Some((node, c)) = work.pop_first() {
        let ords = orders(&node);
        let (imax, &max) = ords
            .iter()
            .enumerate()
            .max_by_key(|(i, v)| (**v, std::cmp::Reverse(*i)))
            .expect("nonempty monomial");
        let second = ords
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != imax)
            .map(|(_, v)| *v)
            .max()
            .unwrap_or(0);
        if max < second + 2 {
            out.add_term(c, node);
            continue;
        }
        let mut idx = imax;
        let lowered = shift_leaf(&node, &mut idx, -1);
        // products re-sort, so locate the lowered leaf again
        let lowered_orders = orders(&lowered);
        let lowered_max_pos = lowered_orders
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == max - 1)
            .map(|(i, _)| i)
            .collect::<Vec<_>>();
        let skip = pick_skip(&lowered, &lowered_max_pos, &node);
        for l in 0..ords.len() {
            if l == skip {
                continue;
            }
            let mut j = l;
            let raised = shift_leaf(&lowered, &mut j, 1);
            let slot = work.entry(raised.clone()).or_insert_with(Coeff::zero);
            *slot -= &c;
            if slot.is_zero() {
                work.remove(&raised);
            }
        }
    }
    out
}

/// Position in `lowered` of the leaf that was lowered: the candidate whose
/// raise gives back `original`.
fn pick_skip(lowered: &ExprNode, candidates: &[usize], original: &ExprNode) -> usize {
    for &p in candidates {
        let mut j = p;
        if shift_leaf(lowered, &mut j, 1) == *original {
            return p;
        }
    }
    unreachable!("lowering is invertible")
}

/// [`canonicalize_cubic`] after [`balance_higher`].
pub fn canonicalize(e: &Expr) -> Expr {
    canonicalize_cubic(&balance_higher(e))
}

fn replace_leaf(node: &ExprNode, idx: &mut usize, with: &ExprNode) -> Option<(Unit, ExprNode)> {
    match node {
        ExprNode::Leaf => {
            if *idx == 0 {
                *idx = usize::MAX;
                Some((Unit::ONE, with.clone()))
            } else {
                *idx = idx.wrapping_sub(1);
                Some((Unit::ONE, ExprNode::Leaf))
            }
        }
        ExprNode::Apply(w, child) => {
            let (u1, inner) = replace_leaf(child, idx, with)?;
            let (u2, n) = ExprNode::apply(w, inner)?;
            Some((u1.mul(u2), n))
        }
        ExprNode::Product(cs) => {
            let mut unit = Unit::ONE;
            let mut kids = Vec::with_capacity(cs.len());
            for c in cs {
                let (u, n) = replace_leaf(c, idx, with)?;
                unit = unit.mul(u);
                kids.push(n);
            }
            Some((unit, ExprNode::product(kids)))
        }
    }
}

/// `p ↦ p*_N`: for every factor slot, the factor's `u` is replaced by
/// `π_{>N}(u ∂_x u)`, words kept; the substituted terms are summed.
pub fn star_n(e: &Expr, n: usize) -> Expr {
    let inner = ExprNode::product(vec![ExprNode::Leaf, ExprNode::leaf_word(OperatorWord::dx(1))]);
    let sub = ExprNode::apply(&OperatorWord::project_high(n as u64), inner)
        .expect("high projection is nonzero")
        .1;
    let mut out = Expr::zero().with_inv_two_pi(e.inv_two_pi());
    for (node, c) in e.terms() {
        for slot in 0..node.degree() {
            let mut idx = slot;
            if let Some((u, m)) = replace_leaf(node, &mut idx, &sub) {
                out.add_term(c * u.to_coeff(), m);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(a: u32) -> ExprNode {
        ExprNode::leaf_word(OperatorWord::dx(a))
    }

    #[test]
    fn transfers_top_derivative() {
        for n in 2..6 {
            let p = ExprNode::product(vec![ExprNode::Leaf, d(n - 1), d(n)]);
            let c = canonicalize_cubic(&Expr::term(exact::int(1), p));
            let expected = ExprNode::product(vec![d(1), d(n - 1), d(n - 1)]);
            assert_eq!(c.len(), 1, "{c}");
            assert_eq!(c.coeff_of(&expected), exact::ratio(-1, 2));
        }
    }

    #[test]
    fn idempotent() {
        let p = ExprNode::product(vec![ExprNode::Leaf, d(1), d(4)]);
        let once = canonicalize_cubic(&Expr::term(exact::int(3), p));
        assert_eq!(canonicalize_cubic(&once), once);
    }

    #[test]
    fn star_counts_slots() {
        let h = ExprNode::leaf_word(OperatorWord::hdx(true, 2));
        let p = ExprNode::product(vec![ExprNode::Leaf, h, d(3)]);
        assert_eq!(star_n(&Expr::term(exact::int(1), p), 8).len(), 3);
    }

    #[test]
    fn balancing_bounds_top_order() {
        let p = ExprNode::product(vec![ExprNode::Leaf, ExprNode::Leaf, d(1), d(5)]);
        let b = balance_higher(&Expr::term(exact::int(1), p));
        for (n, _) in b.terms() {
            let o = orders(n);
            let mut s = o.clone();
            s.sort();
            assert!(s[3] <= s[2] + 1, "{n}");
            assert_eq!(s.iter().sum::<u32>(), 6);
        }
    }
}
