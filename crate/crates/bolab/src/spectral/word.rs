//! Diagonal Fourier multipliers.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{self, Coeff};

/// One factor of an operator word.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    /// `∂_x^α`
    Dx(u32),
    /// Hilbert transform, symbol `-i sign(n)`.
    Hil,
    /// `P_- = (1 - iH)/2`
    Pminus,
    /// `P_+ = (1 + iH)/2`
    Pplus,
    /// `D^s`, `D = (1 - ∂_x²)^{1/2}`
    SmoothPow(f64),
    /// Keep `|n| <= N`.
    ProjLow(u64),
    /// Keep `|n| > N`.
    ProjHigh(u64),
}

/// A power of `i`, the only scalars produced by composing words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Unit(pub u8);

impl Unit {
    pub const ONE: Unit = Unit(0);
    pub const I: Unit = Unit(1);
    pub const MINUS_ONE: Unit = Unit(2);
    pub const MINUS_I: Unit = Unit(3);

    pub fn mul(self, other: Unit) -> Unit {
        Unit((self.0 + other.0) % 4)
    }

    pub fn to_coeff(self) -> Coeff {
        exact::i_pow(self.0 as u32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Projector {
    Minus,
    Plus,
}

/// Normalised composition of [`Atom`]s.
///
/// All atoms act diagonally in Fourier space, so a word is determined by
/// its derivative order, its Hilbert power, an optional frequency-sign
/// projector, the total smoothing exponent, and optional low/high cutoffs.
/// Composition reduces `H² = -1`, `H P_∓ = ±i P_∓` whenever the word already
/// annihilates the zero mode (otherwise those identities fail at `n = 0`).
#[derive(Clone, Debug, Default)]
pub struct OperatorWord {
    dx: u32,
    hil: u8,
    proj: Option<Projector>,
    smooth: f64,
    low: Option<u64>,
    high: Option<u64>,
}

impl PartialEq for OperatorWord {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OperatorWord {}

impl PartialOrd for OperatorWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OperatorWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dx
            .cmp(&other.dx)
            .then(self.hil.cmp(&other.hil))
            .then(self.proj.cmp(&other.proj))
            .then(self.smooth.total_cmp(&other.smooth))
            .then(self.low.cmp(&other.low))
            .then(self.high.cmp(&other.high))
    }
}

impl std::hash::Hash for OperatorWord {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.dx.hash(state);
        self.hil.hash(state);
        self.proj.hash(state);
        self.smooth.to_bits().hash(state);
        self.low.hash(state);
        self.high.hash(state);
    }
}

fn sign(n: i64) -> i64 {
    n.signum()
}

impl OperatorWord {
    pub fn identity() -> Self {
        OperatorWord::default()
    }

    pub fn dx(order: u32) -> Self {
        OperatorWord {
            dx: order,
            ..Default::default()
        }
    }

    pub fn hilbert() -> Self {
        OperatorWord {
            hil: 1,
            ..Default::default()
        }
    }

    /// Builds `H^e ∂_x^α`.
    pub fn hdx(hil: bool, order: u32) -> Self {
        OperatorWord {
            dx: order,
            hil: hil as u8,
            ..Default::default()
        }
    }

    pub fn projector(p: Projector) -> Self {
        OperatorWord {
            proj: Some(p),
            ..Default::default()
        }
    }

    pub fn project_high(n: u64) -> Self {
        OperatorWord {
            high: Some(n),
            ..Default::default()
        }
    }

    pub fn project_low(n: u64) -> Self {
        OperatorWord {
            low: Some(n),
            ..Default::default()
        }
    }

    pub fn smooth_pow(s: f64) -> Self {
        OperatorWord {
            smooth: s,
            ..Default::default()
        }
    }

    /// Composes the atoms left to right; `None` is the zero operator.
    pub fn from_atoms(atoms: &[Atom]) -> Option<(Unit, OperatorWord)> {
        let mut acc = (Unit::ONE, OperatorWord::identity());
        for atom in atoms {
            let w = match *atom {
                Atom::Dx(a) => OperatorWord::dx(a),
                Atom::Hil => OperatorWord::hilbert(),
                Atom::Pminus => OperatorWord::projector(Projector::Minus),
                Atom::Pplus => OperatorWord::projector(Projector::Plus),
                Atom::SmoothPow(s) => OperatorWord::smooth_pow(s),
                Atom::ProjLow(n) => OperatorWord::project_low(n),
                Atom::ProjHigh(n) => OperatorWord::project_high(n),
            };
            let (u, next) = acc.1.compose(&w)?;
            acc = (acc.0.mul(u), next);
        }
        Some(acc)
    }

    /// Canonical atom list (outermost first).
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        if let Some(n) = self.high {
            out.push(Atom::ProjHigh(n));
        }
        if let Some(n) = self.low {
            out.push(Atom::ProjLow(n));
        }
        match self.proj {
            Some(Projector::Minus) => out.push(Atom::Pminus),
            Some(Projector::Plus) => out.push(Atom::Pplus),
            None => {}
        }
        for _ in 0..self.hil {
            out.push(Atom::Hil);
        }
        if self.smooth != 0.0 {
            out.push(Atom::SmoothPow(self.smooth));
        }
        if self.dx > 0 {
            out.push(Atom::Dx(self.dx));
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.dx == 0
            && self.hil == 0
            && self.proj.is_none()
            && self.smooth == 0.0
            && self.low.is_none()
            && self.high.is_none()
    }

    pub fn derivative_order(&self) -> u32 {
        self.dx
    }

    pub fn hilbert_power(&self) -> u8 {
        self.hil
    }

    pub fn projection(&self) -> Option<Projector> {
        self.proj
    }

    /// True when the word has Hilbert or sign-projector content.
    pub fn has_hilbert_content(&self) -> bool {
        self.hil > 0 || self.proj.is_some()
    }

    pub fn has_cutoffs(&self) -> bool {
        self.low.is_some() || self.high.is_some() || self.smooth != 0.0
    }

    /// The symbol vanishes at `n = 0`.
    pub fn kills_zero_mode(&self) -> bool {
        self.dx >= 1 || self.high.is_some()
    }

    /// Symbol at zero is fixed by convention only (`sign 0 = 0`).
    pub fn zero_mode_ambiguous(&self) -> bool {
        self.has_hilbert_content() && !self.kills_zero_mode()
    }

    /// Upper bound on the output bandwidth given an input bandwidth.
    pub fn output_bandwidth(&self, input: usize) -> usize {
        match self.low {
            Some(n) => input.min(n as usize),
            None => input,
        }
    }

    /// Every input of bandwidth `<= input` is mapped to zero.
    pub fn annihilates(&self, input: usize) -> bool {
        self.high.is_some_and(|n| input as u64 <= n) || (input == 0 && self.kills_zero_mode())
    }

    pub fn compose(&self, other: &OperatorWord) -> Option<(Unit, OperatorWord)> {
        let proj = match (self.proj, other.proj) {
            (None, p) | (p, None) => p,
            (Some(a), Some(b)) if a == b => Some(a),
            _ => return None,
        };
        let low = match (self.low, other.low) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let high = match (self.high, other.high) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        if let (Some(l), Some(h)) = (low, high) {
            if l <= h {
                return None;
            }
        }
        let mut w = OperatorWord {
            dx: self.dx + other.dx,
            hil: self.hil + other.hil,
            proj,
            smooth: self.smooth + other.smooth,
            low,
            high,
        };
        let unit = w.reduce_hilbert();
        Some((unit, w))
    }

    fn reduce_hilbert(&mut self) -> Unit {
        let mut unit = Unit::ONE;
        if self.kills_zero_mode() {
            while self.hil >= 2 {
                self.hil -= 2;
                unit = unit.mul(Unit::MINUS_ONE);
            }
            if self.hil == 1 {
                match self.proj {
                    Some(Projector::Minus) => {
                        self.hil = 0;
                        unit = unit.mul(Unit::I);
                    }
                    Some(Projector::Plus) => {
                        self.hil = 0;
                        unit = unit.mul(Unit::MINUS_I);
                    }
                    None => {}
                }
            }
        } else {
            // H³ = -H holds at every n
            while self.hil >= 3 {
                self.hil -= 2;
                unit = unit.mul(Unit::MINUS_ONE);
            }
        }
        unit
    }

    /// Complex conjugate operator: `conj(W f) = conj(W) conj(f)`.
    pub fn conj(&self) -> OperatorWord {
        let mut w = self.clone();
        w.proj = self.proj.map(|p| match p {
            Projector::Minus => Projector::Plus,
            Projector::Plus => Projector::Minus,
        });
        w
    }

    /// Transpose for the bilinear pairing `∫ f g dx`: symbol `n ↦ σ(-n)`.
    pub fn adjoint(&self) -> (Unit, OperatorWord) {
        let mut w = self.conj();
        let mut unit = Unit::ONE;
        if self.dx % 2 == 1 {
            unit = unit.mul(Unit::MINUS_ONE);
        }
        if self.hil % 2 == 1 {
            unit = unit.mul(Unit::MINUS_ONE);
        }
        w.dx = self.dx;
        (unit, w)
    }

    /// Removes Hilbert and sign-projector content; each projector leaves a
    /// factor `1/2`.
    pub fn erase_hilbert(&self) -> (Coeff, OperatorWord) {
        let mut w = self.clone();
        w.hil = 0;
        let c = if w.proj.take().is_some() {
            exact::ratio(1, 2)
        } else {
            Coeff::one()
        };
        (c, w)
    }

    /// Numeric symbol at wavenumber `n` (with `sign 0 = 0`).
    pub fn symbol(&self, n: i64) -> Complex64 {
        if let Some(l) = self.low {
            if n.unsigned_abs() > l {
                return Complex64::new(0.0, 0.0);
            }
        }
        if let Some(h) = self.high {
            if n.unsigned_abs() <= h {
                return Complex64::new(0.0, 0.0);
            }
        }
        let s = sign(n);
        let mut z = match self.proj {
            Some(Projector::Minus) => Complex64::new((1 - s) as f64 / 2.0, 0.0),
            Some(Projector::Plus) => Complex64::new((1 + s) as f64 / 2.0, 0.0),
            None => Complex64::new(1.0, 0.0),
        };
        if self.dx > 0 {
            z *= Complex64::new(0.0, n as f64).powu(self.dx);
        }
        if self.hil > 0 {
            z *= Complex64::new(0.0, -s as f64).powu(self.hil as u32);
        }
        if self.smooth != 0.0 {
            z *= (1.0 + (n as f64) * (n as f64)).powf(self.smooth / 2.0);
        }
        z
    }

    /// Exact symbol; `None` when the word carries an irrational smoothing
    /// factor.
    pub fn symbol_exact(&self, n: i64) -> Option<Coeff> {
        if self.smooth != 0.0 {
            return None;
        }
        if let Some(l) = self.low {
            if n.unsigned_abs() > l {
                return Some(Coeff::zero());
            }
        }
        if let Some(h) = self.high {
            if n.unsigned_abs() <= h {
                return Some(Coeff::zero());
            }
        }
        let s = sign(n);
        let mut z = match self.proj {
            Some(Projector::Minus) => exact::ratio(1 - s, 2),
            Some(Projector::Plus) => exact::ratio(1 + s, 2),
            None => Coeff::one(),
        };
        if self.dx > 0 {
            z *= exact::i_pow(self.dx) * exact::int(n).powu(self.dx);
        }
        if self.hil > 0 {
            z *= (exact::i_pow(3) * exact::int(s)).powu(self.hil as u32);
        }
        Some(z)
    }
}

impl fmt::Display for OperatorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atoms = self.atoms();
        if atoms.is_empty() {
            return write!(f, "I");
        }
        let parts: Vec<String> = atoms
            .iter()
            .map(|a| match a {
                Atom::Dx(1) => "∂".to_string(),
                Atom::Dx(n) => format!("∂^{n}"),
                Atom::Hil => "H".to_string(),
                Atom::Pminus => "P-".to_string(),
                Atom::Pplus => "P+".to_string(),
                Atom::SmoothPow(s) => format!("D^{s}"),
                Atom::ProjLow(n) => format!("π≤{n}"),
                Atom::ProjHigh(n) => format!("π>{n}"),
            })
            .collect();
        write!(f, "{}", parts.join(""))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn composition_matches_symbol_product() {
        let atoms = [
            vec![Atom::Hil, Atom::Hil, Atom::Dx(1)],
            vec![Atom::Pminus, Atom::Hil, Atom::Dx(2)],
            vec![Atom::Pplus, Atom::Hil, Atom::Dx(1)],
            vec![Atom::Hil, Atom::Hil, Atom::Hil],
            vec![Atom::Pminus, Atom::Pminus, Atom::Dx(3), Atom::Hil],
            vec![Atom::ProjLow(5), Atom::ProjHigh(2), Atom::Dx(1)],
            vec![Atom::SmoothPow(1.5), Atom::Hil],
        ];
        for list in atoms {
            let (unit, w) = OperatorWord::from_atoms(&list).unwrap();
            let u = exact::to_c64(&unit.to_coeff());
            for n in -7i64..=7 {
                let direct: Complex64 = list
                    .iter()
                    .map(|a| {
                        let (_, single) = OperatorWord::from_atoms(&[*a]).unwrap();
                        single.symbol(n)
                    })
                    .product();
                assert!(close(u * w.symbol(n), direct), "{list:?} at {n}");
            }
        }
    }

    #[test]
    fn opposite_projectors_annihilate() {
        assert!(OperatorWord::from_atoms(&[Atom::Pminus, Atom::Pplus]).is_none());
        assert!(OperatorWord::from_atoms(&[Atom::ProjLow(3), Atom::ProjHigh(3)]).is_none());
    }

    #[test]
    fn adjoint_is_reflected_symbol() {
        let (_, w) = OperatorWord::from_atoms(&[Atom::Pminus, Atom::Dx(3)]).unwrap();
        let (u, a) = w.adjoint();
        let u = exact::to_c64(&u.to_coeff());
        for n in -5i64..=5 {
            assert!(close(u * a.symbol(n), w.symbol(-n)));
        }
    }

    #[test]
    fn exact_symbol_agrees_with_float() {
        let (_, w) = OperatorWord::from_atoms(&[Atom::Pplus, Atom::Hil, Atom::Dx(2)]).unwrap();
        for n in -6i64..=6 {
            let e = exact::to_c64(&w.symbol_exact(n).unwrap());
            assert!(close(e, w.symbol(n)));
        }
    }
}
