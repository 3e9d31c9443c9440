//! n-qubit Pauli strings with phase tracking.
//!
//! A [`PauliString`] is a tensor product of single-qubit Pauli factors,
//! one per qubit, with factor 0 the leftmost tensor slot. Products of
//! Pauli strings close under multiplication up to a power of `i`, so a
//! product is returned as a [`PhasedPauli`]: an unsigned string plus a
//! phase exponent `k` with the overall operator `i^k * string`.
//!
//! Two facts from this module carry the rest of the crate:
//!
//! * single-qubit products obey `s_a s_b = i^k s_c` with `k` and `c`
//!   given by a fixed table (`X*Y = i Z` and cyclic, same-letter
//!   products give the identity), and multi-qubit products apply the
//!   table factor-wise while summing phase exponents mod 4;
//! * `tr(s_a s_b)` vanishes unless the product is the identity string,
//!   in which case `|tr|^2 = 4^n`. Entanglement-fidelity sums reduce to
//!   weight lookups through exactly this rule.
//!
//! Text form: one character per qubit from `IXYZ`, e.g. `"XIZ"`. The
//! phase is never part of the text form; it only arises from products.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Single-qubit Pauli operator. The discriminant doubles as the
/// conventional index (0 = I, 1 = X, 2 = Y, 3 = Z) used in weight
/// tables and in lexicographic comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I = 0,
    X = 1,
    Y = 2,
    Z = 3,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// Conventional index 0..=3.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Pauli> {
        Pauli::ALL.get(index).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// Single-qubit product: `self * other = i^k * result`.
    ///
    /// Same letters cancel to the identity with no phase; distinct
    /// non-identity letters produce the third letter with phase `+i`
    /// in cyclic order (X->Y->Z) and `-i` against it.
    pub fn multiply(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, b) => (0, b),
            (a, I) => (0, a),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    /// Dense 2x2 matrix in the computational basis.
    pub fn to_dense(self) -> DMatrix<Complex64> {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let entries = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        DMatrix::from_row_slice(2, 2, &entries)
    }
}

/// Tensor product of single-qubit Paulis, one per qubit (at least one).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    factors: Vec<Pauli>,
}

impl PauliString {
    pub fn new(factors: Vec<Pauli>) -> Result<PauliString> {
        if factors.is_empty() {
            return Err(Error::EmptyString);
        }
        Ok(PauliString { factors })
    }

    /// The identity string `I...I` on `n` qubits.
    pub fn identity(n: usize) -> Result<PauliString> {
        PauliString::new(vec![Pauli::I; n])
    }

    /// `n` copies of the same factor, e.g. `repeat(X, 3) = "XXX"`.
    pub fn repeat(factor: Pauli, n: usize) -> Result<PauliString> {
        PauliString::new(vec![factor; n])
    }

    /// All `4^len` strings of the given length in lexicographic order.
    /// Exponential in `len`; callers are expected to keep it small.
    pub fn enumerate(len: usize) -> Result<Vec<PauliString>> {
        if len == 0 {
            return Err(Error::EmptyString);
        }
        let mut out = Vec::with_capacity(4usize.pow(len as u32));
        let mut factors = vec![Pauli::I; len];
        loop {
            out.push(PauliString::new(factors.clone())?);
            // Increment the rightmost factor, carrying leftward.
            let mut position = len;
            loop {
                if position == 0 {
                    return Ok(out);
                }
                position -= 1;
                let next = factors[position].index() + 1;
                if let Some(f) = Pauli::from_index(next) {
                    factors[position] = f;
                    break;
                }
                factors[position] = Pauli::I;
            }
        }
    }

    /// Number of qubits.
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty strings
    }

    pub fn factors(&self) -> &[Pauli] {
        &self.factors
    }

    pub fn factor(&self, qubit: usize) -> Pauli {
        self.factors[qubit]
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|&f| f == Pauli::I)
    }

    /// The substring on the given qubit positions, in the given order.
    pub fn restrict(&self, qubits: &[usize]) -> Result<PauliString> {
        let factors = qubits
            .iter()
            .map(|&q| {
                self.factors.get(q).copied().ok_or(Error::InvalidParameter {
                    name: "qubit",
                    value: q as f64,
                    expected: "an index below the string length",
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(factors)
    }

    /// Factor-wise product `self * other` with the accumulated phase.
    pub fn multiply(&self, other: &PauliString) -> Result<PhasedPauli> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let mut phase = 0u8;
        let mut factors = Vec::with_capacity(self.len());
        for (&a, &b) in self.factors.iter().zip(&other.factors) {
            let (k, c) = a.multiply(b);
            phase = (phase + k) % 4;
            factors.push(c);
        }
        Ok(PhasedPauli {
            string: PauliString { factors },
            phase,
        })
    }

    /// `|tr(self * other)|^2`: `4^n` when the strings are equal
    /// (their product is the identity), zero otherwise.
    pub fn trace_product_squared(&self, other: &PauliString) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        if self == other {
            Ok(4f64.powi(self.len() as i32))
        } else {
            Ok(0.0)
        }
    }

    /// Dense `2^n x 2^n` matrix; refuses strings beyond `cap` qubits.
    pub fn to_dense(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.len() > cap {
            return Err(Error::ResourceCap {
                what: "dense Pauli matrix",
                n: self.len(),
                cap,
            });
        }
        let mut m = self.factors[0].to_dense();
        for factor in &self.factors[1..] {
            m = m.kronecker(&factor.to_dense());
        }
        Ok(m)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for factor in &self.factors {
            write!(f, "{}", factor.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<PauliString> {
        if s.is_empty() {
            return Err(Error::ParsePauli {
                text: s.to_string(),
                reason: "string is empty",
            });
        }
        let factors = s
            .chars()
            .map(|c| {
                Pauli::from_symbol(c).ok_or(Error::ParsePauli {
                    text: s.to_string(),
                    reason: "only characters I, X, Y, Z are allowed",
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(factors)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(D::Error::custom)
    }
}

/// A Pauli string together with a phase exponent: the operator
/// `i^phase * string`, with `phase` in `0..4`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    string: PauliString,
    phase: u8,
}

impl PhasedPauli {
    pub fn new(string: PauliString, phase: u8) -> PhasedPauli {
        PhasedPauli {
            string,
            phase: phase % 4,
        }
    }

    /// Phase-free embedding of a plain string.
    pub fn from_string(string: PauliString) -> PhasedPauli {
        PhasedPauli { string, phase: 0 }
    }

    pub fn string(&self) -> &PauliString {
        &self.string
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    /// The scalar `i^phase`.
    pub fn phase_factor(&self) -> Complex64 {
        match self.phase {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn len(&self) -> usize {
        self.string.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Group product: strings multiply factor-wise, phases add mod 4.
    pub fn multiply(&self, other: &PhasedPauli) -> Result<PhasedPauli> {
        let product = self.string.multiply(&other.string)?;
        Ok(PhasedPauli {
            string: product.string,
            phase: (product.phase + self.phase + other.phase) % 4,
        })
    }

    /// Dense matrix `i^phase * string`, capped like [`PauliString::to_dense`].
    pub fn to_dense(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        Ok(self.string.to_dense(cap)? * self.phase_factor())
    }
}

impl fmt::Display for PhasedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{}{}", prefix, self.string)
    }
}
