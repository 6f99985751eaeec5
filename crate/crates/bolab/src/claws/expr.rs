//! Symbolic densities built from one field `u`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact::{self, Coeff, ExactPoly};
use crate::spectral::{Atom, OperatorWord, Unit};

/// Expression tree over the single symbol `u`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExprNode {
    Leaf,
    Apply(OperatorWord, Box<ExprNode>),
    /// Sorted, at least two children, none of them a product.
    Product(Vec<ExprNode>),
}

impl ExprNode {
    /// Number of `Leaf` occurrences.
    pub fn degree(&self) -> usize {
        match self {
            ExprNode::Leaf => 1,
            ExprNode::Apply(_, c) => c.degree(),
            ExprNode::Product(cs) => cs.iter().map(ExprNode::degree).sum(),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            ExprNode::Leaf => 0,
            ExprNode::Apply(..) => 1,
            ExprNode::Product(_) => 2,
        }
    }

    /// `W(child)` with nested words fused; `None` when the composition is
    /// the zero operator.
    pub fn apply(word: &OperatorWord, child: ExprNode) -> Option<(Unit, ExprNode)> {
        if word.is_identity() {
            return Some((Unit::ONE, child));
        }
        match child {
            ExprNode::Apply(inner, grandchild) => {
                let (unit, w) = word.compose(&inner)?;
                let (u2, node) = ExprNode::apply(&w, *grandchild)?;
                Some((unit.mul(u2), node))
            }
            other => Some((Unit::ONE, ExprNode::Apply(word.clone(), Box::new(other)))),
        }
    }

    /// Flattened, sorted product; singleton products collapse.
    pub fn product(children: Vec<ExprNode>) -> ExprNode {
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match c {
                ExprNode::Product(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        assert!(!flat.is_empty(), "empty product");
        if flat.len() == 1 {
            return flat.pop().unwrap();
        }
        flat.sort();
        ExprNode::Product(flat)
    }

    pub fn leaf_word(word: OperatorWord) -> ExprNode {
        match ExprNode::apply(&word, ExprNode::Leaf) {
            Some((u, n)) if u == Unit::ONE => n,
            _ => unreachable!("a single word on a leaf never reduces"),
        }
    }

    /// Complex conjugate density on real `u`.
    pub fn conj(&self) -> ExprNode {
        match self {
            ExprNode::Leaf => ExprNode::Leaf,
            ExprNode::Apply(w, c) => ExprNode::Apply(w.conj(), Box::new(c.conj())),
            ExprNode::Product(cs) => ExprNode::product(cs.iter().map(ExprNode::conj).collect()),
        }
    }

    /// Evaluates on an exact trigonometric polynomial; `None` if a symbol
    /// is irrational.
    pub fn eval_exact(&self, u: &ExactPoly) -> Option<ExactPoly> {
        match self {
            ExprNode::Leaf => Some(u.clone()),
            ExprNode::Apply(w, c) => c.eval_exact(u)?.apply(w),
            ExprNode::Product(cs) => {
                let mut acc = cs[0].eval_exact(u)?;
                for c in &cs[1..] {
                    acc = acc.mul(&c.eval_exact(u)?);
                }
                Some(acc)
            }
        }
    }

    /// Visits every word in the tree.
    pub fn words(&self) -> Vec<&OperatorWord> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words<'a>(&'a self, out: &mut Vec<&'a OperatorWord>) {
        match self {
            ExprNode::Leaf => {}
            ExprNode::Apply(w, c) => {
                out.push(w);
                c.collect_words(out);
            }
            ExprNode::Product(cs) => cs.iter().for_each(|c| c.collect_words(out)),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            ExprNode::Leaf => json!("u"),
            ExprNode::Apply(w, c) => json!({
                "apply": { "word": serde_json::to_value(w.atoms()).expect("atoms"), "child": c.to_json() }
            }),
            ExprNode::Product(cs) => json!({ "product": cs.iter().map(ExprNode::to_json).collect::<Vec<_>>() }),
        }
    }

    fn from_json(v: &Value) -> Result<(Coeff, ExprNode)> {
        let bad = || Error::InvalidArgument(format!("malformed expression node: {v}"));
        if v.as_str() == Some("u") {
            return Ok((Coeff::one(), ExprNode::Leaf));
        }
        let obj = v.as_object().ok_or_else(bad)?;
        if let Some(a) = obj.get("apply") {
            let atoms: Vec<Atom> = serde_json::from_value(a.get("word").ok_or_else(bad)?.clone())?;
            let (c, child) = ExprNode::from_json(a.get("child").ok_or_else(bad)?)?;
            let Some((u0, w)) = OperatorWord::from_atoms(&atoms) else {
                return Ok((Coeff::zero(), child));
            };
            return Ok(match ExprNode::apply(&w, child) {
                Some((u1, node)) => (c * u0.to_coeff() * u1.to_coeff(), node),
                None => (Coeff::zero(), ExprNode::Leaf),
            });
        }
        if let Some(p) = obj.get("product") {
            let items = p.as_array().ok_or_else(bad)?;
            if items.is_empty() {
                return Err(bad());
            }
            let mut c = Coeff::one();
            let mut children = Vec::new();
            for item in items {
                let (ci, n) = ExprNode::from_json(item)?;
                c *= ci;
                children.push(n);
            }
            return Ok((c, ExprNode::product(children)));
        }
        Err(bad())
    }

    fn latex(&self) -> String {
        match self {
            ExprNode::Leaf => "u".into(),
            ExprNode::Apply(w, c) => {
                let inner = c.latex();
                match **c {
                    ExprNode::Leaf => format!("{}{inner}", word_latex(w)),
                    _ => format!("{}\\left({inner}\\right)", word_latex(w)),
                }
            }
            ExprNode::Product(cs) => cs
                .iter()
                .map(|c| match c {
                    ExprNode::Apply(..) => format!("({})", c.latex()),
                    _ => c.latex(),
                })
                .collect::<Vec<_>>()
                .join(""),
        }
    }
}

fn word_latex(w: &OperatorWord) -> String {
    w.atoms()
        .iter()
        .map(|a| match a {
            Atom::Dx(1) => "\\partial_x ".to_string(),
            Atom::Dx(n) => format!("\\partial_x^{{{n}}} "),
            Atom::Hil => "H".to_string(),
            Atom::Pminus => "P_-".to_string(),
            Atom::Pplus => "P_+".to_string(),
            Atom::SmoothPow(s) => format!("D^{{{s}}}"),
            Atom::ProjLow(n) => format!("\\pi_{{{n}}}"),
            Atom::ProjHigh(n) => format!("\\pi_{{>{n}}}"),
        })
        .collect()
}

impl Ord for ExprNode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.rank().cmp(&other.rank()))
            .then_with(|| match (self, other) {
                (ExprNode::Apply(w1, c1), ExprNode::Apply(w2, c2)) => w1.cmp(w2).then_with(|| c1.cmp(c2)),
                (ExprNode::Product(a), ExprNode::Product(b)) => a.cmp(b),
                _ => Ordering::Equal,
            })
    }
}

impl PartialOrd for ExprNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprNode::Leaf => write!(f, "u"),
            ExprNode::Apply(w, c) => match **c {
                ExprNode::Leaf => write!(f, "{w}u"),
                _ => write!(f, "{w}[{c}]"),
            },
            ExprNode::Product(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "·")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

/// Sum of coefficient-weighted trees, `(2π)^{-inv_two_pi} Σ c_t node_t`.
///
/// Like terms are merged and zero coefficients dropped on insertion. The
/// overall power of `1/2π` lets normalisations stay exact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expr {
    terms: BTreeMap<ExprNode, Coeff>,
    inv_two_pi: u32,
}

impl Expr {
    pub fn zero() -> Self {
        Expr::default()
    }

    pub fn leaf() -> Self {
        Expr::term(Coeff::one(), ExprNode::Leaf)
    }

    pub fn term(c: Coeff, node: ExprNode) -> Self {
        let mut e = Expr::zero();
        e.add_term(c, node);
        e
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Coeff, ExprNode)>) -> Self {
        let mut e = Expr::zero();
        for (c, n) in terms {
            e.add_term(c, n);
        }
        e
    }

    pub fn add_term(&mut self, c: Coeff, node: ExprNode) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(node) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn inv_two_pi(&self) -> u32 {
        self.inv_two_pi
    }

    pub fn with_inv_two_pi(mut self, p: u32) -> Self {
        self.inv_two_pi = p;
        self
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExprNode, &Coeff)> {
        self.terms.iter()
    }

    pub fn coeff_of(&self, node: &ExprNode) -> Coeff {
        self.terms.get(node).cloned().unwrap_or_else(Coeff::zero)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(ExprNode::degree).max().unwrap_or(0)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.terms.keys().map(ExprNode::degree).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_empty() {
            return other.clone();
        }
        if !other.is_empty() {
            assert_eq!(self.inv_two_pi, other.inv_two_pi, "adding densities with different 2π powers");
        }
        let mut e = self.clone();
        for (n, c) in &other.terms {
            e.add_term(c.clone(), n.clone());
        }
        e
    }

    pub fn scale(&self, c: &Coeff) -> Expr {
        let mut e = Expr::zero().with_inv_two_pi(self.inv_two_pi);
        for (n, v) in &self.terms {
            e.add_term(v * c, n.clone());
        }
        e
    }

    /// Multiplies every term by `s^degree`.
    pub fn scale_by_degree(&self, s: &Coeff) -> Expr {
        let mut e = Expr::zero().with_inv_two_pi(self.inv_two_pi);
        for (n, v) in &self.terms {
            e.add_term(v * s.powu(n.degree() as u32), n.clone());
        }
        e
    }

    /// Distributive product; terms above `max_degree` are discarded.
    pub fn mul_truncated(&self, other: &Expr, max_degree: usize) -> Expr {
        let mut e = Expr::zero().with_inv_two_pi(self.inv_two_pi + other.inv_two_pi);
        for (a, ca) in &self.terms {
            let da = a.degree();
            for (b, cb) in &other.terms {
                if da + b.degree() > max_degree {
                    continue;
                }
                e.add_term(ca * cb, ExprNode::product(vec![a.clone(), b.clone()]));
            }
        }
        e
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        self.mul_truncated(other, usize::MAX)
    }

    /// `c · W(self)` termwise.
    pub fn apply(&self, word: &OperatorWord, c: &Coeff) -> Expr {
        let mut e = Expr::zero().with_inv_two_pi(self.inv_two_pi);
        for (n, v) in &self.terms {
            if let Some((u, node)) = ExprNode::apply(word, n.clone()) {
                e.add_term(v * c * u.to_coeff(), node);
            }
        }
        e
    }

    /// Terms of the given homogeneity.
    pub fn homogeneous_part(&self, order: usize) -> Expr {
        self.filter(|n| n.degree() == order)
    }

    pub fn filter(&self, keep: impl Fn(&ExprNode) -> bool) -> Expr {
        let mut e = Expr::zero().with_inv_two_pi(self.inv_two_pi);
        for (n, v) in &self.terms {
            if keep(n) {
                e.add_term(v.clone(), n.clone());
            }
        }
        e
    }

    /// Complex conjugate density on real fields.
    pub fn conj(&self) -> Expr {
        let mut e = Expr::zero().with_inv_two_pi(self.inv_two_pi);
        for (n, v) in &self.terms {
            e.add_term(v.conj(), n.conj());
        }
        e
    }

    /// `(e + conj e)/2`
    pub fn real_part(&self) -> Expr {
        self.add(&self.conj()).scale(&exact::ratio(1, 2))
    }

    /// True when the density is real on real fields, structurally.
    pub fn is_real(&self) -> bool {
        *self == self.conj()
    }

    /// Replaces top-level words by their symbol at zero, which leaves the
    /// integral unchanged.
    pub fn drop_top_level_words(&self) -> Expr {
        let mut e = Expr::zero().with_inv_two_pi(self.inv_two_pi);
        for (n, v) in &self.terms {
            let mut c = v.clone();
            let mut node = n.clone();
            while let ExprNode::Apply(w, child) = node {
                match w.symbol_exact(0) {
                    Some(s) => c *= s,
                    None => {
                        node = ExprNode::Apply(w, child);
                        break;
                    }
                }
                node = *child;
            }
            e.add_term(c, node);
        }
        e
    }

    /// Exact `(2π)^{inv_two_pi}`-free mean of the density on `u`:
    /// `(1/2π) Σ c_t ∫ node_t`. `None` if some symbol is irrational.
    pub fn exact_mean(&self, u: &ExactPoly) -> Option<Coeff> {
        let mut acc = Coeff::zero();
        for (n, c) in &self.terms {
            acc += c * n.eval_exact(u)?.mean();
        }
        Some(acc)
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(n, c)| json!({ "coeff": coeff_json(c), "node": n.to_json() }))
            .collect();
        json!({ "terms": terms, "inv_two_pi": self.inv_two_pi })
    }

    pub fn from_json(v: &Value) -> Result<Expr> {
        let bad = |m: &str| Error::InvalidArgument(format!("malformed expression: {m}"));
        let obj = v.as_object().ok_or_else(|| bad("not an object"))?;
        for k in obj.keys() {
            if k != "terms" && k != "inv_two_pi" {
                return Err(bad(&format!("unknown key `{k}`")));
            }
        }
        let p = match obj.get("inv_two_pi") {
            Some(p) => p.as_u64().ok_or_else(|| bad("inv_two_pi"))? as u32,
            None => 0,
        };
        let mut e = Expr::zero().with_inv_two_pi(p);
        for t in obj.get("terms").and_then(Value::as_array).ok_or_else(|| bad("terms"))? {
            let c = coeff_from_json(t.get("coeff").ok_or_else(|| bad("coeff"))?)?;
            let (c2, node) = ExprNode::from_json(t.get("node").ok_or_else(|| bad("node"))?)?;
            e.add_term(c * c2, node);
        }
        Ok(e)
    }

    pub fn to_latex(&self) -> String {
        if self.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        if self.inv_two_pi > 0 {
            out.push_str(&format!("\\frac{{1}}{{(2\\pi)^{{{}}}}}\\Big(", self.inv_two_pi));
        }
        for (i, (n, c)) in self.terms.iter().enumerate() {
            let (sign, body) = coeff_latex(c);
            if i == 0 {
                if sign == '-' {
                    out.push('-');
                }
            } else {
                out.push_str(if sign == '-' { " - " } else { " + " });
            }
            out.push_str(&body);
            out.push_str(&n.latex());
        }
        if self.inv_two_pi > 0 {
            out.push_str("\\Big)");
        }
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "0");
        }
        if self.inv_two_pi > 0 {
            write!(f, "(2π)^-{} [", self.inv_two_pi)?;
        }
        for (i, (n, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}) {n}", coeff_text(c))?;
        }
        if self.inv_two_pi > 0 {
            write!(f, "]")?;
        }
        Ok(())
    }
}

fn big_json(b: &BigInt) -> Value {
    match i64::try_from(b) {
        Ok(v) => json!(v),
        Err(_) => json!(b.to_string()),
    }
}

fn big_from_json(v: &Value) -> Result<BigInt> {
    let bad = || Error::InvalidArgument(format!("malformed integer {v}"));
    if let Some(i) = v.as_i64() {
        return Ok(BigInt::from(i));
    }
    v.as_str().ok_or_else(bad)?.parse().map_err(|_| bad())
}

fn coeff_json(c: &Coeff) -> Value {
    json!([big_json(c.re.numer()), big_json(c.re.denom()), big_json(c.im.numer()), big_json(c.im.denom())])
}

fn coeff_from_json(v: &Value) -> Result<Coeff> {
    let a = v
        .as_array()
        .filter(|a| a.len() == 4)
        .ok_or_else(|| Error::InvalidArgument(format!("coefficient must be [re_num, re_den, im_num, im_den], got {v}")))?;
    let parts: Vec<BigInt> = a.iter().map(big_from_json).collect::<Result<_>>()?;
    if parts[1].is_zero() || parts[3].is_zero() {
        return Err(Error::InvalidArgument("zero denominator".into()));
    }
    Ok(Coeff::new(
        BigRational::new(parts[0].clone(), parts[1].clone()),
        BigRational::new(parts[2].clone(), parts[3].clone()),
    ))
}

fn rat_text(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub(crate) fn coeff_text(c: &Coeff) -> String {
    match (c.re.is_zero(), c.im.is_zero()) {
        (_, true) => rat_text(&c.re),
        (true, false) => format!("{}i", rat_text(&c.im)),
        _ => format!("{}{}{}i", rat_text(&c.re), if c.im.is_negative() { "" } else { "+" }, rat_text(&c.im)),
    }
}

fn rat_latex(r: &BigRational) -> String {
    let r = r.abs();
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", r.numer(), r.denom())
    }
}

fn coeff_latex(c: &Coeff) -> (char, String) {
    match (c.re.is_zero(), c.im.is_zero()) {
        (_, true) => {
            let sign = if c.re.is_negative() { '-' } else { '+' };
            let body = if c.re.abs().is_one() { String::new() } else { rat_latex(&c.re) };
            (sign, body)
        }
        (true, false) => {
            let sign = if c.im.is_negative() { '-' } else { '+' };
            let body = if c.im.abs().is_one() { "i".into() } else { format!("{}i", rat_latex(&c.im)) };
            (sign, body)
        }
        _ => ('+', format!("\\left({}\\right)", coeff_text(c))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Projector;

    fn pm_dx() -> OperatorWord {
        OperatorWord::from_atoms(&[Atom::Pminus, Atom::Dx(1)]).unwrap().1
    }

    #[test]
    fn products_flatten_and_sort() {
        let a = ExprNode::leaf_word(OperatorWord::dx(2));
        let p = ExprNode::product(vec![a.clone(), ExprNode::product(vec![ExprNode::Leaf, a.clone()])]);
        let q = ExprNode::product(vec![a.clone(), a.clone(), ExprNode::Leaf]);
        assert_eq!(p, q);
        assert_eq!(p.degree(), 3);
        assert_eq!(ExprNode::product(vec![a.clone()]), a);
    }

    #[test]
    fn nested_words_fuse() {
        let (u, n) = ExprNode::apply(&pm_dx(), ExprNode::leaf_word(pm_dx())).unwrap();
        assert_eq!(u, Unit::ONE);
        let w = OperatorWord::from_atoms(&[Atom::Pminus, Atom::Dx(2)]).unwrap().1;
        assert_eq!(n, ExprNode::leaf_word(w));
        let plus = OperatorWord::projector(Projector::Plus);
        assert!(ExprNode::apply(&plus, ExprNode::leaf_word(pm_dx())).is_none());
    }

    #[test]
    fn like_terms_merge() {
        let mut e = Expr::leaf();
        e.add_term(exact::int(-1), ExprNode::Leaf);
        assert!(e.is_empty());
    }

    #[test]
    fn json_round_trip() {
        let u = Expr::leaf();
        let e = u.apply(&pm_dx(), &exact::i_pow(1)).add(&u.mul(&u).scale(&exact::ratio(1, 2)));
        let back = Expr::from_json(&e.to_json()).unwrap();
        assert_eq!(back, e);
        assert!(e.to_latex().contains("P_-"));
    }

    #[test]
    fn conj_swaps_projectors() {
        let e = Expr::leaf().apply(&pm_dx(), &exact::i_pow(1));
        let c = e.conj();
        let (n, _) = c.terms().next().unwrap();
        assert_eq!(n.words()[0].projection(), Some(Projector::Plus));
        assert!(e.real_part().is_real());
    }
}
