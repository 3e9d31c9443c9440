//! Pauli noise models as sparse weight tables.
//!
//! A [`NoiseModel`] assigns a probability to each n-qubit Pauli error
//! string; only nonzero entries are stored. The constructors cover the
//! depolarizing family studied throughout the crate:
//!
//! * [`NoiseModel::depolarizing`] — one qubit, identity with weight
//!   `1 - p` and each of X, Y, Z with weight `p / 3`;
//! * [`NoiseModel::uncorrelated`] — n independent copies (product
//!   weights, support up to `4^n`);
//! * [`NoiseModel::fully_correlated`] — the same single-qubit error on
//!   every qubit (at most four strings, any n);
//! * [`NoiseModel::convex_mixture`] — `(1 - mu) * uncorrelated +
//!   mu * fully_correlated`, the two-parameter family whose corrected
//!   fidelity the `feedback` module treats in closed form.
//!
//! Arbitrary tables enter through [`NoiseModel::from_table`] or the
//! serde impls (JSON shape `{"n": 2, "weights": {"II": 0.49, ...}}`);
//! both validate shape and normalization and never renormalize
//! silently.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

/// Largest qubit count for which product-model supports (`4^n` strings)
/// are enumerated; 4^8 = 65536 keeps verification sweeps fast.
pub const ENUMERATION_CAP: usize = 8;

/// Input tables may deviate from exact normalization by this much.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Parameters of the depolarizing mixture family: single-qubit error
/// probability `p`, correlation weight `mu` between the independent and
/// the fully correlated component, and the qubit count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolarizingParams {
    pub probability: f64,
    pub correlation: f64,
    pub qubits: usize,
}

impl DepolarizingParams {
    pub fn new(probability: f64, correlation: f64, qubits: usize) -> Result<DepolarizingParams> {
        check_unit_interval("p", probability)?;
        check_unit_interval("mu", correlation)?;
        if qubits == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                expected: "at least one qubit",
            });
        }
        Ok(DepolarizingParams {
            probability,
            correlation,
            qubits,
        })
    }
}

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter {
            name,
            value,
            expected: "a value in [0, 1]",
        });
    }
    Ok(())
}

/// Single-qubit depolarizing weights indexed by [`Pauli::index`]:
/// `[1 - p, p/3, p/3, p/3]`.
pub fn depolarizing_weights(p: f64) -> Result<[f64; 4]> {
    check_unit_interval("p", p)?;
    Ok([1.0 - p, p / 3.0, p / 3.0, p / 3.0])
}

/// Probability distribution over n-qubit Pauli error strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseTable", into = "NoiseTable")]
pub struct NoiseModel {
    n: usize,
    weights: BTreeMap<PauliString, f64>,
}

/// Serde-facing shape of a noise model.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct NoiseTable {
    n: usize,
    weights: BTreeMap<PauliString, f64>,
}

impl TryFrom<NoiseTable> for NoiseModel {
    type Error = Error;

    fn try_from(table: NoiseTable) -> Result<NoiseModel> {
        NoiseModel::from_table(table.n, table.weights)
    }
}

impl From<NoiseModel> for NoiseTable {
    fn from(model: NoiseModel) -> NoiseTable {
        NoiseTable {
            n: model.n,
            weights: model.weights,
        }
    }
}

impl NoiseModel {
    /// Builds a model from explicit `(string, weight)` entries. Every
    /// key must have length `n`, weights must be finite and
    /// nonnegative, keys must be unique, and the weights must sum to 1
    /// within [`NORMALIZATION_TOLERANCE`]. Zero entries are dropped;
    /// nothing is rescaled.
    pub fn from_table<I>(n: usize, entries: I) -> Result<NoiseModel>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                expected: "at least one qubit",
            });
        }
        let mut weights = BTreeMap::new();
        let mut sum = 0.0;
        for (key, weight) in entries {
            if key.len() != n {
                return Err(Error::LengthMismatch {
                    left: key.len(),
                    right: n,
                });
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidTable(format!(
                    "weight {weight} for {key} is not a finite nonnegative number"
                )));
            }
            sum += weight;
            if weights.insert(key.clone(), weight).is_some() {
                return Err(Error::DuplicateKey {
                    key: key.to_string(),
                });
            }
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized {
                sum,
                tolerance: NORMALIZATION_TOLERANCE,
            });
        }
        weights.retain(|_, w| *w != 0.0);
        Ok(NoiseModel { n, weights })
    }

    /// Already-validated entries from the parametric constructors.
    fn from_valid_entries(n: usize, entries: impl IntoIterator<Item = (PauliString, f64)>) -> NoiseModel {
        let mut weights = BTreeMap::new();
        for (key, weight) in entries {
            debug_assert_eq!(key.len(), n);
            debug_assert!(weight >= 0.0);
            if weight != 0.0 {
                weights.insert(key, weight);
            }
        }
        NoiseModel { n, weights }
    }

    /// Single-qubit depolarizing channel with error probability `p`.
    pub fn depolarizing(p: f64) -> Result<NoiseModel> {
        let w = depolarizing_weights(p)?;
        Ok(NoiseModel::from_valid_entries(
            1,
            Pauli::ALL
                .iter()
                .map(|&f| (PauliString::new(vec![f]).unwrap(), w[f.index()])),
        ))
    }

    /// Independent depolarizing noise on each of `n` qubits: the weight
    /// of a string is the product of its per-qubit weights. Support is
    /// `4^n`, so `n` is capped at [`ENUMERATION_CAP`].
    pub fn uncorrelated(p: f64, n: usize) -> Result<NoiseModel> {
        let params = DepolarizingParams::new(p, 0.0, n)?;
        if n > ENUMERATION_CAP {
            return Err(Error::ResourceCap {
                what: "product-model enumeration",
                n,
                cap: ENUMERATION_CAP,
            });
        }
        let w = depolarizing_weights(params.probability)?;
        Ok(NoiseModel::from_valid_entries(n, product_entries(n, &w)))
    }

    /// The same depolarizing error hitting every qubit at once: weight
    /// `1 - p` on the identity string and `p / 3` on each of `X...X`,
    /// `Y...Y`, `Z...Z`. Support stays at four strings for any `n`.
    pub fn fully_correlated(p: f64, n: usize) -> Result<NoiseModel> {
        DepolarizingParams::new(p, 0.0, n)?;
        let w = depolarizing_weights(p)?;
        Ok(NoiseModel::from_valid_entries(
            n,
            Pauli::ALL
                .iter()
                .map(|&f| (PauliString::repeat(f, n).unwrap(), w[f.index()])),
        ))
    }

    /// Convex mixture `(1 - mu) * uncorrelated + mu * fully_correlated`
    /// at the same error probability. `mu = 1` avoids the product
    /// enumeration entirely and therefore works at any `n`.
    pub fn convex_mixture(params: &DepolarizingParams) -> Result<NoiseModel> {
        let DepolarizingParams {
            probability: p,
            correlation: mu,
            qubits: n,
        } = *params;
        DepolarizingParams::new(p, mu, n)?;
        if mu == 1.0 {
            return NoiseModel::fully_correlated(p, n);
        }
        let mut combined: BTreeMap<PauliString, f64> = NoiseModel::uncorrelated(p, n)?
            .weights
            .into_iter()
            .map(|(key, w)| (key, (1.0 - mu) * w))
            .collect();
        for (key, w) in NoiseModel::fully_correlated(p, n)?.weights {
            *combined.entry(key).or_insert(0.0) += mu * w;
        }
        Ok(NoiseModel::from_valid_entries(n, combined))
    }

    /// Qubit count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight of a string; zero for anything outside the support.
    pub fn weight(&self, key: &PauliString) -> f64 {
        self.weights.get(key).copied().unwrap_or(0.0)
    }

    /// Nonzero entries in lexicographic key order.
    pub fn support(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.weights.iter().map(|(key, &w)| (key, w))
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Distribution of one qubit's factor, indexed by [`Pauli::index`].
    pub fn marginal(&self, qubit: usize) -> Result<[f64; 4]> {
        if qubit >= self.n {
            return Err(Error::InvalidParameter {
                name: "qubit",
                value: qubit as f64,
                expected: "an index below the qubit count",
            });
        }
        let mut out = [0.0; 4];
        for (key, w) in self.support() {
            out[key.factor(qubit).index()] += w;
        }
        Ok(out)
    }
}

/// All `4^n` strings with product weights, counting in base 4 so the
/// output is already in lexicographic order.
fn product_entries(n: usize, single: &[f64; 4]) -> Vec<(PauliString, f64)> {
    let total = 4usize.pow(n as u32);
    let mut entries = Vec::with_capacity(total);
    for code in 0..total {
        let mut factors = Vec::with_capacity(n);
        let mut weight = 1.0;
        for qubit in 0..n {
            let digit = (code >> (2 * (n - 1 - qubit))) & 0b11;
            let factor = Pauli::from_index(digit).unwrap();
            factors.push(factor);
            weight *= single[digit];
        }
        entries.push((PauliString::new(factors).unwrap(), weight));
    }
    entries
}
