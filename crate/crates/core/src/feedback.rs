//! Measurement feedback and corrected-channel fidelity.
//!
//! Measuring part of the environment after a Pauli noise process
//! reveals which error letters hit the measured qubits. Conditioned on
//! that record, the observer applies a recovery operator; the quality
//! of the whole scheme is the entanglement fidelity of the corrected
//! channel. Because both errors and corrections are Pauli strings, the
//! trace rule collapses the fidelity into a weight sum: a correction
//! string cancels exactly the error equal to it, so
//!
//! ```text
//! F  =  sum over outcomes a, corrections c of  q(a, c) * w(c)
//! ```
//!
//! with `w(c)` the model weight of `c` when `c` restricted to the
//! measured qubits equals `a`, and zero otherwise. [`corrected_fidelity`]
//! evaluates that sum for any strategy; [`optimize_recovery`] maximizes
//! it per outcome (the objective is linear in the per-outcome
//! distributions, so a vertex — one deterministic correction per
//! outcome — is optimal, and the maximizer is the most probable error
//! compatible with the record).
//!
//! For the depolarizing mixture family with the first qubit measured,
//! the optimum takes one of three shapes depending on where `(p, mu)`
//! falls — identity-like corrections on the unmeasured qubits (region
//! A), repeating the observed letter everywhere (region B), or
//! all-non-identity corrections (region C). [`classify_region`] computes
//! the thresholds, [`theoretical_fidelity`] the matching closed forms,
//! and [`optimize_mixture`] re-derives the optimum from candidate
//! weights without enumerating the `4^n` support, which is what makes
//! qubit counts beyond the enumeration cap tractable.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::noise::{DepolarizingParams, NoiseModel};
use crate::pauli::{Pauli, PauliString};

/// How close `mu` must be to a threshold to count as sitting on it.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Per-outcome correction weights must sum to 1 within this.
pub const STRATEGY_TOLERANCE: f64 = 1e-12;

// ===================================================================
// Measurement partitions and selected outputs
// ===================================================================

/// Split of the `n` environment qubits into a measured subset and the
/// rest. Indices are 0-based; the depolarizing mixture scenario
/// measures qubit 0 ([`MeasurementPartition::first_qubit`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementPartition {
    n: usize,
    measured: Vec<usize>, // sorted, unique, nonempty
}

impl MeasurementPartition {
    pub fn new(n: usize, mut measured: Vec<usize>) -> Result<MeasurementPartition> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                expected: "at least one qubit",
            });
        }
        if measured.is_empty() {
            return Err(Error::InvalidParameter {
                name: "measured",
                value: 0.0,
                expected: "at least one measured qubit",
            });
        }
        measured.sort_unstable();
        for pair in measured.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::InvalidParameter {
                    name: "measured",
                    value: pair[0] as f64,
                    expected: "distinct qubit indices",
                });
            }
        }
        if *measured.last().unwrap() >= n {
            return Err(Error::InvalidParameter {
                name: "measured",
                value: *measured.last().unwrap() as f64,
                expected: "indices below the qubit count",
            });
        }
        Ok(MeasurementPartition { n, measured })
    }

    /// Only qubit 0 measured — the partial-access scenario.
    pub fn first_qubit(n: usize) -> Result<MeasurementPartition> {
        MeasurementPartition::new(n, vec![0])
    }

    /// Every qubit measured — full access to the environment.
    pub fn full(n: usize) -> Result<MeasurementPartition> {
        MeasurementPartition::new(n, (0..n).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn unmeasured(&self) -> Vec<usize> {
        (0..self.n).filter(|q| !self.measured.contains(q)).collect()
    }

    pub fn measured_count(&self) -> usize {
        self.measured.len()
    }

    pub fn is_full(&self) -> bool {
        self.measured.len() == self.n
    }

    /// The measurement record produced by an error string: its factors
    /// on the measured qubits.
    pub fn outcome_of(&self, error: &PauliString) -> Result<PauliString> {
        if error.len() != self.n {
            return Err(Error::LengthMismatch {
                left: error.len(),
                right: self.n,
            });
        }
        error.restrict(&self.measured)
    }

    /// Full string with `record` on the measured qubits and
    /// `completion` on the unmeasured ones (each in index order).
    pub fn compose(&self, record: &PauliString, completion: &[Pauli]) -> Result<PauliString> {
        if record.len() != self.measured.len() {
            return Err(Error::LengthMismatch {
                left: record.len(),
                right: self.measured.len(),
            });
        }
        let unmeasured = self.unmeasured();
        if completion.len() != unmeasured.len() {
            return Err(Error::LengthMismatch {
                left: completion.len(),
                right: unmeasured.len(),
            });
        }
        let mut factors = vec![Pauli::I; self.n];
        for (slot, &qubit) in self.measured.iter().enumerate() {
            factors[qubit] = record.factor(slot);
        }
        for (slot, &qubit) in unmeasured.iter().enumerate() {
            factors[qubit] = completion[slot];
        }
        PauliString::new(factors)
    }
}

/// The sub-ensemble of error strings compatible with one measurement
/// record: the branch of the channel selected by that outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedOutput {
    outcome: PauliString,
    components: BTreeMap<PauliString, f64>,
}

impl SelectedOutput {
    pub fn outcome(&self) -> &PauliString {
        &self.outcome
    }

    /// Full error strings in this branch with their model weights.
    pub fn components(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.components.iter().map(|(key, &w)| (key, w))
    }

    pub fn component_weight(&self, key: &PauliString) -> f64 {
        self.components.get(key).copied().unwrap_or(0.0)
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Probability of observing this outcome: the branch weight.
    pub fn probability(&self) -> f64 {
        self.components.values().sum()
    }
}

/// The branch of `model` selected by one measurement record.
pub fn select(
    model: &NoiseModel,
    partition: &MeasurementPartition,
    outcome: &PauliString,
) -> Result<SelectedOutput> {
    if partition.n() != model.n() {
        return Err(Error::LengthMismatch {
            left: partition.n(),
            right: model.n(),
        });
    }
    if outcome.len() != partition.measured_count() {
        return Err(Error::LengthMismatch {
            left: outcome.len(),
            right: partition.measured_count(),
        });
    }
    let mut components = BTreeMap::new();
    for (key, w) in model.support() {
        if &partition.outcome_of(key)? == outcome {
            components.insert(key.clone(), w);
        }
    }
    Ok(SelectedOutput {
        outcome: outcome.clone(),
        components,
    })
}

/// All branches with nonzero probability, in lexicographic outcome
/// order. Their components partition the model's support exactly.
pub fn select_all(
    model: &NoiseModel,
    partition: &MeasurementPartition,
) -> Result<Vec<SelectedOutput>> {
    if partition.n() != model.n() {
        return Err(Error::LengthMismatch {
            left: partition.n(),
            right: model.n(),
        });
    }
    let mut branches: BTreeMap<PauliString, BTreeMap<PauliString, f64>> = BTreeMap::new();
    for (key, w) in model.support() {
        let outcome = partition.outcome_of(key)?;
        branches.entry(outcome).or_default().insert(key.clone(), w);
    }
    Ok(branches
        .into_iter()
        .map(|(outcome, components)| SelectedOutput {
            outcome,
            components,
        })
        .collect())
}

/// Probability of one measurement record under the model.
pub fn outcome_probability(
    model: &NoiseModel,
    partition: &MeasurementPartition,
    outcome: &PauliString,
) -> Result<f64> {
    Ok(select(model, partition, outcome)?.probability())
}

// ===================================================================
// Recovery strategies
// ===================================================================

/// A feedback rule: for each measurement record, a probability
/// distribution over Pauli correction strings (full length `n`).
/// Deterministic rules put weight 1 on a single correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStrategy", into = "RawStrategy")]
pub struct RecoveryStrategy {
    n: usize,
    outcomes: BTreeMap<PauliString, BTreeMap<PauliString, f64>>,
}

/// JSON shape: `{"outcomes": {"<record>": {"<correction>": q, ...}}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawStrategy {
    outcomes: BTreeMap<PauliString, BTreeMap<PauliString, f64>>,
}

impl TryFrom<RawStrategy> for RecoveryStrategy {
    type Error = Error;

    fn try_from(raw: RawStrategy) -> Result<RecoveryStrategy> {
        let n = raw
            .outcomes
            .values()
            .flat_map(|corrections| corrections.keys())
            .map(|c| c.len())
            .next()
            .ok_or_else(|| Error::StrategyMismatch("no corrections given".into()))?;
        RecoveryStrategy::new(n, raw.outcomes)
    }
}

impl From<RecoveryStrategy> for RawStrategy {
    fn from(strategy: RecoveryStrategy) -> RawStrategy {
        RawStrategy {
            outcomes: strategy.outcomes,
        }
    }
}

impl RecoveryStrategy {
    pub fn new(
        n: usize,
        outcomes: BTreeMap<PauliString, BTreeMap<PauliString, f64>>,
    ) -> Result<RecoveryStrategy> {
        if outcomes.is_empty() {
            return Err(Error::StrategyMismatch("no outcomes given".into()));
        }
        let record_len = outcomes.keys().next().unwrap().len();
        if record_len > n {
            return Err(Error::StrategyMismatch(format!(
                "records have {record_len} letters but the strategy acts on {n} qubits"
            )));
        }
        let mut cleaned = BTreeMap::new();
        for (record, corrections) in outcomes {
            if record.len() != record_len {
                return Err(Error::StrategyMismatch(format!(
                    "record {record} has {} letters, expected {record_len}",
                    record.len()
                )));
            }
            let mut sum = 0.0;
            let mut kept = BTreeMap::new();
            for (correction, q) in corrections {
                if correction.len() != n {
                    return Err(Error::StrategyMismatch(format!(
                        "correction {correction} has {} letters, expected {n}",
                        correction.len()
                    )));
                }
                if !q.is_finite() || q < 0.0 {
                    return Err(Error::StrategyMismatch(format!(
                        "weight {q} for correction {correction} is not a finite \
                         nonnegative number"
                    )));
                }
                sum += q;
                if q != 0.0 {
                    kept.insert(correction, q);
                }
            }
            if (sum - 1.0).abs() > STRATEGY_TOLERANCE {
                return Err(Error::NotNormalized {
                    sum,
                    tolerance: STRATEGY_TOLERANCE,
                });
            }
            cleaned.insert(record, kept);
        }
        Ok(RecoveryStrategy {
            n,
            outcomes: cleaned,
        })
    }

    /// One fixed correction per record.
    pub fn deterministic<I>(n: usize, assignments: I) -> Result<RecoveryStrategy>
    where
        I: IntoIterator<Item = (PauliString, PauliString)>,
    {
        let outcomes = assignments
            .into_iter()
            .map(|(record, correction)| (record, BTreeMap::from([(correction, 1.0)])))
            .collect();
        RecoveryStrategy::new(n, outcomes)
    }

    /// Region-A optimum for the first-qubit scenario: undo the observed
    /// letter on the measured qubit, leave the rest alone.
    pub fn region_a(n: usize) -> Result<RecoveryStrategy> {
        RecoveryStrategy::deterministic(
            n,
            Pauli::ALL.map(|a| {
                let mut factors = vec![Pauli::I; n];
                factors[0] = a;
                (
                    PauliString::new(vec![a]).unwrap(),
                    PauliString::new(factors).unwrap(),
                )
            }),
        )
    }

    /// Region-B optimum: assume the observed letter hit every qubit.
    pub fn region_b(n: usize) -> Result<RecoveryStrategy> {
        RecoveryStrategy::deterministic(
            n,
            Pauli::ALL.map(|a| {
                (
                    PauliString::new(vec![a]).unwrap(),
                    PauliString::repeat(a, n).unwrap(),
                )
            }),
        )
    }

    /// Region-C optimum: like region B for non-identity records; for
    /// the identity record bet on a non-identity string (X on every
    /// unmeasured qubit, the lexicographically smallest choice among
    /// the equally good ones).
    pub fn region_c(n: usize) -> Result<RecoveryStrategy> {
        RecoveryStrategy::deterministic(
            n,
            Pauli::ALL.map(|a| {
                let correction = if a == Pauli::I {
                    let mut factors = vec![Pauli::X; n];
                    factors[0] = Pauli::I;
                    PauliString::new(factors).unwrap()
                } else {
                    PauliString::repeat(a, n).unwrap()
                };
                (PauliString::new(vec![a]).unwrap(), correction)
            }),
        )
    }

    /// Qubit count the corrections act on.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Letters per measurement record.
    pub fn record_len(&self) -> usize {
        self.outcomes.keys().next().unwrap().len()
    }

    pub fn outcomes(
        &self,
    ) -> impl Iterator<Item = (&PauliString, &BTreeMap<PauliString, f64>)> {
        self.outcomes.iter()
    }

    pub fn corrections_for(&self, record: &PauliString) -> Option<&BTreeMap<PauliString, f64>> {
        self.outcomes.get(record)
    }

    /// True when every correction agrees with its record on the
    /// measured qubits — the shape optimal strategies always take.
    pub fn is_record_consistent(&self, partition: &MeasurementPartition) -> Result<bool> {
        for (record, corrections) in &self.outcomes {
            for correction in corrections.keys() {
                if &partition.outcome_of(correction)? != record {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

// ===================================================================
// Corrected-channel fidelity
// ===================================================================

/// Result of a fidelity computation: the total, its split across
/// measurement records, the applied strategy, and — when the model is
/// a depolarizing mixture — the region classification.
#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub total: f64,
    pub per_outcome: BTreeMap<PauliString, f64>,
    pub region: Option<RegionLabel>,
    pub thresholds: Option<RegionThresholds>,
    pub strategy_used: RecoveryStrategy,
    /// Set when some correction disagrees with its record on a
    /// measured qubit; such corrections can never cancel an error in
    /// their branch and contribute nothing.
    pub off_outcome_corrections: bool,
}

/// Entanglement fidelity of the corrected channel under `strategy`.
///
/// A correction cancels precisely the error string equal to it, so each
/// branch contributes `sum_c q(record, c) * weight(c)` over corrections
/// `c` lying in that branch. The strategy must cover every record with
/// nonzero probability.
pub fn corrected_fidelity(
    model: &NoiseModel,
    partition: &MeasurementPartition,
    strategy: &RecoveryStrategy,
) -> Result<FidelityReport> {
    if strategy.n() != model.n() {
        return Err(Error::LengthMismatch {
            left: strategy.n(),
            right: model.n(),
        });
    }
    if strategy.record_len() != partition.measured_count() {
        return Err(Error::LengthMismatch {
            left: strategy.record_len(),
            right: partition.measured_count(),
        });
    }
    let mut per_outcome = BTreeMap::new();
    let mut off_outcome = false;
    for branch in select_all(model, partition)? {
        let corrections = strategy.corrections_for(branch.outcome()).ok_or_else(|| {
            Error::StrategyMismatch(format!(
                "no corrections for record {} (probability {})",
                branch.outcome(),
                branch.probability()
            ))
        })?;
        let mut contribution = 0.0;
        for (correction, &q) in corrections {
            if &partition.outcome_of(correction)? == branch.outcome() {
                contribution += q * branch.component_weight(correction);
            } else {
                off_outcome = true;
            }
        }
        per_outcome.insert(branch.outcome().clone(), contribution);
    }
    Ok(FidelityReport {
        total: per_outcome.values().sum(),
        per_outcome,
        region: None,
        thresholds: None,
        strategy_used: strategy.clone(),
        off_outcome_corrections: off_outcome,
    })
}

/// Best achievable corrected fidelity and a strategy attaining it.
///
/// The fidelity is linear in each record's correction distribution, so
/// some deterministic strategy is optimal, and the best correction for
/// a record is the heaviest error string in its branch (ties broken
/// toward the lexicographically smallest string). Records with zero
/// probability are omitted from the returned strategy.
pub fn optimize_recovery(
    model: &NoiseModel,
    partition: &MeasurementPartition,
) -> Result<FidelityReport> {
    let mut per_outcome = BTreeMap::new();
    let mut assignments = Vec::new();
    for branch in select_all(model, partition)? {
        let mut best: Option<(&PauliString, f64)> = None;
        for (key, w) in branch.components() {
            // BTreeMap iterates in ascending key order, so replacing
            // only on a strictly larger weight keeps the smallest key
            // among ties.
            if best.is_none_or(|(_, best_w)| w > best_w) {
                best = Some((key, w));
            }
        }
        let (correction, weight) = best.expect("branches from select_all are nonempty");
        per_outcome.insert(branch.outcome().clone(), weight);
        assignments.push((branch.outcome().clone(), correction.clone()));
    }
    let strategy = RecoveryStrategy::deterministic(model.n(), assignments)?;
    Ok(FidelityReport {
        total: per_outcome.values().sum(),
        per_outcome,
        region: None,
        thresholds: None,
        strategy_used: strategy,
        off_outcome_corrections: false,
    })
}

// ===================================================================
// Regions, thresholds, and closed forms for the mixture family
// ===================================================================

/// Which strategy shape is optimal for a depolarizing mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    A,
    B,
    C,
    /// Within [`BOUNDARY_TOLERANCE`] of a threshold, where the two
    /// adjacent closed forms agree.
    Boundary(BoundaryEdge),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryEdge {
    AB,
    BC,
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            RegionLabel::A => "A",
            RegionLabel::B => "B",
            RegionLabel::C => "C",
            RegionLabel::Boundary(BoundaryEdge::AB) => "AB",
            RegionLabel::Boundary(BoundaryEdge::BC) => "BC",
        };
        f.write_str(text)
    }
}

impl Serialize for RegionLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// Correlation thresholds at fixed `(p, n)`. A threshold is `None`
/// where its region does not exist: `mu_ab` needs `p <= 3/4`, `mu_bc`
/// needs `p >= 3/4` (at `p = 3/4` both are zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionThresholds {
    pub mu_ab: Option<f64>,
    pub mu_bc: Option<f64>,
}

/// Thresholds in `mu` between the optimal-strategy regions.
///
/// With `x = (1-p)^(n-1) - (p/3)^(n-1)`, the A/B crossing sits at
/// `x / (x + 1)` and the B/C crossing at `-x / (1 - x)`; both reduce to
/// the two-qubit thresholds `(3-4p)/(6-4p)` and `(4p-3)/(4p)` at n = 2.
pub fn region_thresholds(p: f64, n: usize) -> Result<RegionThresholds> {
    DepolarizingParams::new(p, 0.0, n)?;
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            expected: "at least two qubits (one unmeasured)",
        });
    }
    let x = (1.0 - p).powi(n as i32 - 1) - (p / 3.0).powi(n as i32 - 1);
    // `+ 0.0` turns a signed zero into plain 0 at p = 3/4.
    let mu_ab = (x >= 0.0).then(|| x / (x + 1.0) + 0.0);
    let mu_bc = (x <= 0.0).then(|| -x / (1.0 - x) + 0.0);
    Ok(RegionThresholds { mu_ab, mu_bc })
}

/// Locates `(p, mu)` among the three optimal-strategy regions.
/// Points within [`BOUNDARY_TOLERANCE`] of a threshold are labelled
/// [`RegionLabel::Boundary`]; closed forms evaluate the B side there.
pub fn classify_region(params: &DepolarizingParams) -> Result<(RegionLabel, RegionThresholds)> {
    let thresholds = region_thresholds(params.probability, params.qubits)?;
    let mu = params.correlation;
    DepolarizingParams::new(params.probability, mu, params.qubits)?;
    let label = if matches!(thresholds.mu_ab, Some(t) if (mu - t).abs() <= BOUNDARY_TOLERANCE) {
        RegionLabel::Boundary(BoundaryEdge::AB)
    } else if matches!(thresholds.mu_bc, Some(t) if (mu - t).abs() <= BOUNDARY_TOLERANCE) {
        RegionLabel::Boundary(BoundaryEdge::BC)
    } else if matches!(thresholds.mu_ab, Some(t) if mu < t) {
        RegionLabel::A
    } else if matches!(thresholds.mu_bc, Some(t) if mu < t) {
        RegionLabel::C
    } else {
        RegionLabel::B
    };
    Ok((label, thresholds))
}

/// Optimal corrected fidelity of the depolarizing mixture in closed
/// form: classifies the region, then evaluates the matching formula.
///
/// * region A: `(1-mu) (1-p)^(n-1) + mu (1-p)`
/// * region B: `(1-mu) ((1-p)^n + 3 (p/3)^n) + mu`
/// * region C: `(1-mu) (p/3)^(n-1) + mu p`
pub fn theoretical_fidelity(params: &DepolarizingParams) -> Result<f64> {
    let (label, _) = classify_region(params)?;
    let p = params.probability;
    let mu = params.correlation;
    let n = params.qubits as i32;
    Ok(match label {
        RegionLabel::A => (1.0 - mu) * (1.0 - p).powi(n - 1) + mu * (1.0 - p),
        RegionLabel::B | RegionLabel::Boundary(_) => {
            (1.0 - mu) * ((1.0 - p).powi(n) + 3.0 * (p / 3.0).powi(n)) + mu
        }
        RegionLabel::C => (1.0 - mu) * (p / 3.0).powi(n - 1) + mu * p,
    })
}

/// Large-`n` limit of the optimal corrected fidelity at fixed `(p, mu)`,
/// taken along the region the parameters fall in at the given `n`:
/// `mu` in region B, `mu (1-p)` in region A, `mu p` in region C. The
/// noiseless channel (`p = 0`) keeps fidelity 1 at every size.
pub fn asymptotic_fidelity(params: &DepolarizingParams) -> Result<f64> {
    let (label, _) = classify_region(params)?;
    if params.probability == 0.0 {
        return Ok(1.0);
    }
    let mu = params.correlation;
    Ok(match label {
        RegionLabel::A => mu * (1.0 - params.probability),
        RegionLabel::B | RegionLabel::Boundary(_) => mu,
        RegionLabel::C => mu * params.probability,
    })
}

/// Optimal recovery for the depolarizing mixture with the first qubit
/// measured, computed from closed-form candidate weights instead of
/// the enumerated support, so any qubit count is fine.
///
/// The heaviest error in a branch is one of two candidates: the string
/// completing the record with identity letters (weight proportional to
/// `(1-p)^(n-1)`, plus the correlated mass when the record is the
/// identity) or an all-non-identity completion (weight proportional to
/// `(p/3)^(n-1)`, plus the correlated mass when it repeats the observed
/// letter). Every mixed completion interpolates between those endpoint
/// products and never wins.
pub fn optimize_mixture(params: &DepolarizingParams) -> Result<FidelityReport> {
    let DepolarizingParams {
        probability: p,
        correlation: mu,
        qubits: n,
    } = *params;
    let (label, thresholds) = classify_region(params)?;
    let identity_base = (1.0 - mu) * (1.0 - p).powi(n as i32 - 1);
    let repeat_base = (1.0 - mu) * (p / 3.0).powi(n as i32 - 1);
    let mut per_outcome = BTreeMap::new();
    let mut assignments = Vec::new();
    for a in Pauli::ALL {
        let record_weight = if a == Pauli::I { 1.0 - p } else { p / 3.0 };
        if record_weight == 0.0 {
            continue; // this record never occurs
        }
        // Candidates in lexicographic correction order, so keeping the
        // first on ties matches optimize_recovery's tie-breaking. The
        // correlated mass boosts the identity string for the identity
        // record and the repeated string for letter records.
        let (first, first_value, second, second_value) = if a == Pauli::I {
            let mut latin = vec![Pauli::X; n];
            latin[0] = Pauli::I;
            (
                PauliString::identity(n)?,
                record_weight * (identity_base + mu),
                PauliString::new(latin)?,
                record_weight * repeat_base,
            )
        } else {
            let mut identity_completion = vec![Pauli::I; n];
            identity_completion[0] = a;
            (
                PauliString::new(identity_completion)?,
                record_weight * identity_base,
                PauliString::repeat(a, n)?,
                record_weight * (repeat_base + mu),
            )
        };
        let (correction, value) = if second_value > first_value {
            (second, second_value)
        } else {
            (first, first_value)
        };
        per_outcome.insert(PauliString::new(vec![a])?, value);
        assignments.push((PauliString::new(vec![a])?, correction));
    }
    let strategy = RecoveryStrategy::deterministic(n, assignments)?;
    Ok(FidelityReport {
        total: per_outcome.values().sum(),
        per_outcome,
        region: Some(label),
        thresholds: Some(thresholds),
        strategy_used: strategy,
        off_outcome_corrections: false,
    })
}
