//! Independent dense-matrix verification of the fast combinatorial path.
//!
//! Everything in this module recomputes fidelities the expensive way:
//! Kraus operators are rendered as literal complex matrices, channels are
//! applied to an explicitly materialized maximally entangled state, and
//! entanglement fidelity is evaluated along two routes that share no code
//! with [`crate::feedback`] —
//!
//! 1. the *trace route*: `Σ_k |tr K_k|² / d²`, summing diagonals of the
//!    rendered operators, and
//! 2. the *overlap route*: `⟨Ψ| (Φ⊗I)(|Ψ⟩⟨Ψ|) |Ψ⟩`, pushing the doubled
//!    state through the channel matrix by matrix.
//!
//! Every public evaluation computes both and refuses to answer if they
//! drift apart by more than [`CONSISTENCY_TOLERANCE`]; the trace value is
//! returned. Density matrices are validated (Hermitian, unit trace,
//! positive semidefinite) each time one is built, so a buggy channel
//! application cannot slip through as a plausible number.
//!
//! Dimensions are kept honest rather than large: states live on the
//! doubled register (dimension `4^n`), so matrices are materialized only
//! up to [`STATE_CAP`] qubits. Between [`STATE_CAP`] and [`MAX_DENSE_CAP`]
//! qubits the overlap route switches to a structured application that
//! treats each operator as a signed basis permutation instead of a full
//! matrix — the two implementations are cross-checked against each other
//! in the small regime where both run.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feedback::{
    select_all, FidelityReport, MeasurementPartition, RecoveryStrategy, SelectedOutput,
};
use crate::noise::NoiseModel;
use crate::pauli::{PauliString, PhasedPauli};

/// Default qubit cap for dense verification.
pub const DEFAULT_DENSE_CAP: usize = 4;

/// Hard ceiling for any dense verification, reachable only through the
/// structured (permutation-based) overlap route.
pub const MAX_DENSE_CAP: usize = 6;

/// Largest qubit count for which doubled-register matrices (`4^n × 4^n`)
/// are materialized and eigen-checked.
pub const STATE_CAP: usize = 4;

/// Largest brute-force search size: 4^{n-1} completions per outcome.
pub const BRUTE_FORCE_CAP: usize = 3;

/// Allowed deviation of `Σ amplitude²` from 1 for a complete Kraus family.
pub const KRAUS_TOLERANCE: f64 = 1e-10;

/// Maximum disagreement tolerated between the two fidelity routes.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-10;

/// Maximum deviation of `t†t` from a scalar matrix in [`check_operator`].
pub const CORRECTABLE_TOLERANCE: f64 = 1e-10;

const HERMITICITY_TOLERANCE: f64 = 1e-12;
const TRACE_TOLERANCE: f64 = 1e-12;
const EIGENVALUE_FLOOR: f64 = -1e-10;

/// Qubit counts up to which channel application uses literal Kronecker
/// products and full matrix multiplies; above, the signed-permutation
/// route takes over (the two are cross-checked in tests).
const LITERAL_APPLY_CAP: usize = 3;

/// A family of weighted Pauli operators `amplitude · i^phase · σ`.
///
/// A *complete* family resolves the identity; because every operator here
/// is proportional to a unitary, completeness reduces to
/// `Σ amplitude² = 1`. Sub-normalized families (the operators belonging
/// to a single measurement record) are representable too — only
/// [`Oracle::entanglement_fidelity`] insists on completeness.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    n: usize,
    operators: Vec<(f64, PhasedPauli)>,
}

impl KrausSet {
    /// Builds a complete family; `Σ amplitude²` must be 1 within
    /// [`KRAUS_TOLERANCE`].
    pub fn new(n: usize, operators: Vec<(f64, PhasedPauli)>) -> Result<KrausSet> {
        let set = KrausSet::sub_normalized(n, operators)?;
        let sum = set.total_weight();
        if (sum - 1.0).abs() > KRAUS_TOLERANCE {
            return Err(Error::IncompleteKraus { sum });
        }
        Ok(set)
    }

    /// Builds a family whose squared amplitudes may sum to less than 1
    /// (a single record's share of a channel).
    pub fn sub_normalized(n: usize, operators: Vec<(f64, PhasedPauli)>) -> Result<KrausSet> {
        if n == 0 {
            return Err(Error::EmptyString);
        }
        if operators.is_empty() {
            return Err(Error::InvalidTable("empty Kraus family".into()));
        }
        for (amplitude, op) in &operators {
            if !amplitude.is_finite() || *amplitude < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "amplitude",
                    value: *amplitude,
                    expected: "a finite value >= 0",
                });
            }
            if op.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: op.len(),
                });
            }
        }
        let set = KrausSet { n, operators };
        if set.total_weight() > 1.0 + KRAUS_TOLERANCE {
            return Err(Error::IncompleteKraus {
                sum: set.total_weight(),
            });
        }
        Ok(set)
    }

    /// The identity channel: a single unit-amplitude identity operator.
    pub fn identity(n: usize) -> Result<KrausSet> {
        let op = PhasedPauli::from_string(PauliString::identity(n)?);
        KrausSet::new(n, vec![(1.0, op)])
    }

    /// The uncorrected channel of a noise model: one operator `√w · σ_c`
    /// per supported error string.
    pub fn from_model(model: &NoiseModel) -> Result<KrausSet> {
        let operators = model
            .support()
            .map(|(string, weight)| (weight.sqrt(), PhasedPauli::from_string(string.clone())))
            .collect();
        KrausSet::new(model.n(), operators)
    }

    /// The (sub-normalized) operators of a single measurement record.
    pub fn from_branch(branch: &SelectedOutput, n: usize) -> Result<KrausSet> {
        let operators = branch
            .components()
            .map(|(string, weight)| (weight.sqrt(), PhasedPauli::from_string(string.clone())))
            .collect();
        KrausSet::sub_normalized(n, operators)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn operators(&self) -> &[(f64, PhasedPauli)] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// `Σ amplitude²`; 1 for a complete family.
    pub fn total_weight(&self) -> f64 {
        self.operators.iter().map(|(a, _)| a * a).sum()
    }
}

/// A density matrix on the doubled register (system ⊗ reference), of
/// dimension `4^n × 4^n`, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    n: usize,
    matrix: DMatrix<Complex64>,
}

impl DenseState {
    /// Validates Hermiticity, unit trace, and positive semidefiniteness
    /// before accepting the matrix.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<DenseState> {
        let dim = matrix.nrows();
        if dim == 0 || matrix.ncols() != dim {
            return Err(Error::InvalidState(format!(
                "expected a square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut n = 0;
        let mut size = 1;
        while size < dim {
            size *= 4;
            n += 1;
        }
        if size != dim || n == 0 {
            return Err(Error::InvalidState(format!(
                "dimension {dim} is not 4^n for any n >= 1"
            )));
        }

        let mut hermiticity = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let delta = (matrix[(i, j)] - matrix[(j, i)].conj()).norm();
                hermiticity = hermiticity.max(delta);
            }
        }
        if hermiticity > HERMITICITY_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "not Hermitian: max |m - m†| entry is {hermiticity:.3e}"
            )));
        }

        let trace: Complex64 = (0..dim).map(|i| matrix[(i, i)]).sum();
        if (trace.re - 1.0).abs() > TRACE_TOLERANCE || trace.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "trace is {} + {}i, expected 1",
                trace.re, trace.im
            )));
        }

        // Positive semidefiniteness within the eigenvalue floor: the
        // floor-shifted matrix is positive definite iff every eigenvalue
        // exceeds the floor, and Cholesky pivots decide definiteness
        // without an iterative eigensolver (which breaks down on the
        // highly degenerate spectra these states routinely have).
        if !cholesky_positive_definite(&matrix, -EIGENVALUE_FLOOR) {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite: an eigenvalue lies below {EIGENVALUE_FLOOR:.0e}"
            )));
        }

        Ok(DenseState { n, matrix })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the doubled register, `4^n`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// `tr(ρ²)`; 1 exactly for pure states.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|entry| entry.norm_sqr()).sum()
    }

    /// `⟨v|ρ|v⟩` for a unit vector on the doubled register.
    pub fn expectation(&self, vector: &DVector<Complex64>) -> Result<f64> {
        if vector.len() != self.dim() {
            return Err(Error::LengthMismatch {
                left: self.dim(),
                right: vector.len(),
            });
        }
        let image = &self.matrix * vector;
        let value = vector.dotc(&image);
        if value.im.abs() > CONSISTENCY_TOLERANCE {
            return Err(Error::ConsistencyFault(format!(
                "expectation of a Hermitian matrix came out complex: {value}"
            )));
        }
        Ok(value.re)
    }

    /// Partial trace over the reference half: the reduced system state,
    /// of dimension `2^n × 2^n`.
    pub fn reduced_system(&self) -> DMatrix<Complex64> {
        let d = 1usize << self.n;
        let mut reduced = DMatrix::zeros(d, d);
        for row in 0..d {
            for col in 0..d {
                let mut sum = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    sum += self.matrix[(row * d + k, col * d + k)];
                }
                reduced[(row, col)] = sum;
            }
        }
        reduced
    }
}

/// Verdict of the scalar test `t†t = c·I` for one operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectableVerdict {
    /// Best-fit scalar `c = tr(t†t)/d`.
    pub scale: f64,
    /// Largest entry of `|t†t - c·I|`.
    pub deviation: f64,
    /// Whether the deviation is within [`CORRECTABLE_TOLERANCE`].
    pub passes: bool,
}

/// Tests whether `t†t` is a scalar multiple of the identity, reporting
/// the scalar and the worst deviation. Accepts any square matrix, not
/// just Pauli operators.
pub fn check_operator(operator: &DMatrix<Complex64>) -> CorrectableVerdict {
    let dim = operator.nrows();
    let gram = operator.adjoint() * operator;
    let trace: Complex64 = (0..dim).map(|i| gram[(i, i)]).sum();
    let scale = trace.re / dim as f64;
    let mut deviation = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j {
                Complex64::new(scale, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            deviation = deviation.max((gram[(i, j)] - target).norm());
        }
    }
    CorrectableVerdict {
        scale,
        deviation,
        passes: deviation <= CORRECTABLE_TOLERANCE,
    }
}

/// Kraus family of the feedback-corrected channel: for record α with
/// correction γ (probability q) acting on error c (weight w), the
/// operator is `√(q·w) · γ·c`. Completeness holds by construction when
/// the strategy covers every observed record.
pub fn corrected_kraus(
    branches: &[SelectedOutput],
    strategy: &RecoveryStrategy,
) -> Result<KrausSet> {
    let n = strategy.n();
    let mut operators = Vec::new();
    for branch in branches {
        if branch.component_count() == 0 {
            continue;
        }
        let corrections = strategy.corrections_for(branch.outcome()).ok_or_else(|| {
            Error::StrategyMismatch(format!(
                "no corrections provided for observed record \"{}\"",
                branch.outcome()
            ))
        })?;
        for (error, weight) in branch.components() {
            for (correction, &q) in corrections {
                let amplitude = (q * weight).sqrt();
                if amplitude == 0.0 {
                    continue;
                }
                operators.push((amplitude, correction.multiply(error)?));
            }
        }
    }
    KrausSet::new(n, operators)
}

/// Applies one phased Pauli operator to a computational basis state of
/// the system half: returns the image index and accumulated phase.
/// Factor 0 is the most significant bit, matching the dense rendering.
fn apply_to_basis(op: &PhasedPauli, n: usize, basis: usize) -> (usize, Complex64) {
    use crate::pauli::Pauli;
    let mut index = basis;
    let mut phase = op.phase_factor();
    for (k, factor) in op.string().factors().iter().enumerate() {
        let bit = 1usize << (n - 1 - k);
        match factor {
            Pauli::I => {}
            Pauli::X => index ^= bit,
            Pauli::Y => {
                // Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩.
                phase *= if basis & bit == 0 {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                };
                index ^= bit;
            }
            Pauli::Z => {
                if basis & bit != 0 {
                    phase = -phase;
                }
            }
        }
    }
    (index, phase)
}

/// Dense-verification engine, parameterized by its qubit cap.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    dense_cap: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

impl Oracle {
    /// `dense_cap` may reach [`MAX_DENSE_CAP`]; beyond [`STATE_CAP`] only
    /// the structured routes run.
    pub fn new(dense_cap: usize) -> Result<Oracle> {
        if dense_cap == 0 || dense_cap > MAX_DENSE_CAP {
            return Err(Error::InvalidParameter {
                name: "dense_cap",
                value: dense_cap as f64,
                expected: "between 1 and 6",
            });
        }
        Ok(Oracle { dense_cap })
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    fn require(&self, what: &'static str, n: usize, cap: usize) -> Result<()> {
        if n > cap {
            return Err(Error::ResourceCap { what, n, cap });
        }
        Ok(())
    }

    /// `|Ψ⟩⟨Ψ|` for `|Ψ⟩ = d^{-1/2} Σ_i |i⟩|i⟩` with `d = 2^n`: every
    /// doubled-index pair `(ii, jj)` holds `1/d`.
    pub fn max_entangled(&self, n: usize) -> Result<DenseState> {
        self.require("dense state", n, self.dense_cap.min(STATE_CAP))?;
        if n == 0 {
            return Err(Error::EmptyString);
        }
        let d = 1usize << n;
        let mut matrix = DMatrix::zeros(d * d, d * d);
        let weight = Complex64::new(1.0 / d as f64, 0.0);
        for i in 0..d {
            for j in 0..d {
                matrix[(i * d + i, j * d + j)] = weight;
            }
        }
        DenseState::new(matrix)
    }

    /// The corresponding unit vector, for overlap computations.
    pub fn max_entangled_vector(&self, n: usize) -> Result<DVector<Complex64>> {
        self.require("dense state", n, self.dense_cap.min(STATE_CAP))?;
        if n == 0 {
            return Err(Error::EmptyString);
        }
        let d = 1usize << n;
        let mut vector = DVector::zeros(d * d);
        let weight = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        for i in 0..d {
            vector[i * d + i] = weight;
        }
        Ok(vector)
    }

    /// `Σ_k (K_k⊗I) ρ (K_k⊗I)†` on the doubled register. The output is
    /// re-validated, so trace or Hermiticity drift is caught here.
    pub fn apply_channel(&self, kraus: &KrausSet, state: &DenseState) -> Result<DenseState> {
        let n = kraus.n();
        if n != state.n() {
            return Err(Error::LengthMismatch {
                left: n,
                right: state.n(),
            });
        }
        self.require("dense state", n, self.dense_cap.min(STATE_CAP))?;
        let sum = kraus.total_weight();
        if (sum - 1.0).abs() > KRAUS_TOLERANCE {
            return Err(Error::IncompleteKraus { sum });
        }

        let dim = state.dim();
        let mut accumulated: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
        for (amplitude, op) in kraus.operators() {
            if n <= LITERAL_APPLY_CAP {
                let dense = op.to_dense(self.dense_cap)?;
                let extended = dense.kronecker(&DMatrix::identity(1 << n, 1 << n))
                    * Complex64::new(*amplitude, 0.0);
                accumulated += &extended * state.matrix() * extended.adjoint();
            } else {
                conjugate_structured(
                    op,
                    n,
                    amplitude * amplitude,
                    state.matrix(),
                    &mut accumulated,
                );
            }
        }
        DenseState::new(accumulated)
    }

    /// Entanglement fidelity of a complete Kraus family, computed along
    /// both routes; they must agree within [`CONSISTENCY_TOLERANCE`].
    pub fn entanglement_fidelity(&self, kraus: &KrausSet) -> Result<f64> {
        Ok(self.entanglement_fidelity_forms(kraus)?.0)
    }

    /// Both route values `(trace form, overlap form)`, behind the same
    /// completeness and consistency gates as
    /// [`Oracle::entanglement_fidelity`].
    pub fn entanglement_fidelity_forms(&self, kraus: &KrausSet) -> Result<(f64, f64)> {
        let n = kraus.n();
        self.require("dense fidelity", n, self.dense_cap)?;
        let sum = kraus.total_weight();
        if (sum - 1.0).abs() > KRAUS_TOLERANCE {
            return Err(Error::IncompleteKraus { sum });
        }

        let traced = self.trace_route(kraus)?;
        let overlap = if n <= STATE_CAP {
            let input = self.max_entangled(n)?;
            let output = self.apply_channel(kraus, &input)?;
            output.expectation(&self.max_entangled_vector(n)?)?
        } else {
            structured_overlap(kraus)
        };

        if (traced - overlap).abs() > CONSISTENCY_TOLERANCE {
            return Err(Error::ConsistencyFault(format!(
                "fidelity routes disagree: trace form {traced}, overlap form {overlap}"
            )));
        }
        Ok((traced, overlap))
    }

    /// Trace route: `Σ_k amplitude_k² · |tr K_k|² / d²`, with each trace
    /// read off the rendered matrix.
    fn trace_route(&self, kraus: &KrausSet) -> Result<f64> {
        let d = 1usize << kraus.n();
        let denominator = (d * d) as f64;
        let mut total = 0.0;
        for (amplitude, op) in kraus.operators() {
            let dense = op.to_dense(self.dense_cap)?;
            let trace: Complex64 = (0..d).map(|i| dense[(i, i)]).sum();
            total += amplitude * amplitude * trace.norm_sqr() / denominator;
        }
        Ok(total)
    }

    /// Scalar test `t†t = c·I` for every operator in the family.
    pub fn check_correctable(&self, kraus: &KrausSet) -> Result<Vec<CorrectableVerdict>> {
        self.require("dense correctability check", kraus.n(), self.dense_cap)?;
        let mut verdicts = Vec::with_capacity(kraus.len());
        for (amplitude, op) in kraus.operators() {
            let dense = op.to_dense(self.dense_cap)? * Complex64::new(*amplitude, 0.0);
            verdicts.push(check_operator(&dense));
        }
        Ok(verdicts)
    }

    /// Exhaustive search over record-consistent deterministic strategies,
    /// each candidate scored by dense branch evaluation. The per-record
    /// maxima assemble the optimum (the objective is linear in the
    /// strategy); the assembled strategy is then re-evaluated through
    /// [`Oracle::entanglement_fidelity`] as a final cross-check.
    pub fn brute_force_optimize(
        &self,
        model: &NoiseModel,
        partition: &MeasurementPartition,
    ) -> Result<FidelityReport> {
        let n = model.n();
        self.require("brute-force search", n, BRUTE_FORCE_CAP.min(self.dense_cap))?;
        if partition.n() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: partition.n(),
            });
        }

        let d2 = (1usize << n).pow(2) as f64;
        let completions: Vec<Vec<crate::pauli::Pauli>> = if partition.is_full() {
            vec![Vec::new()]
        } else {
            PauliString::enumerate(n - partition.measured_count())?
                .into_iter()
                .map(|s| s.factors().to_vec())
                .collect()
        };

        let branches = select_all(model, partition)?;
        let mut assignments = Vec::new();
        let mut per_outcome = BTreeMap::new();
        for branch in &branches {
            let mut best: Option<(PauliString, f64)> = None;
            // Ascending scan with a strictly-greater update keeps the
            // lexicographically smallest maximizer, mirroring the fast path.
            for completion in &completions {
                let candidate = partition.compose(branch.outcome(), completion)?;
                let mut value = 0.0;
                for (error, weight) in branch.components() {
                    let product = candidate.multiply(error)?;
                    let dense = product.to_dense(self.dense_cap)?;
                    let trace: Complex64 = (0..dense.nrows()).map(|i| dense[(i, i)]).sum();
                    value += weight * trace.norm_sqr() / d2;
                }
                if best.as_ref().is_none_or(|(_, top)| value > *top) {
                    best = Some((candidate, value));
                }
            }
            let (correction, value) = best.expect("at least one completion exists");
            per_outcome.insert(branch.outcome().clone(), value);
            assignments.push((branch.outcome().clone(), correction));
        }

        let strategy = RecoveryStrategy::deterministic(n, assignments)?;
        let total = self.entanglement_fidelity(&corrected_kraus(&branches, &strategy)?)?;
        let branch_sum: f64 = per_outcome.values().sum();
        if (total - branch_sum).abs() > CONSISTENCY_TOLERANCE {
            return Err(Error::ConsistencyFault(format!(
                "branch-wise optimum {branch_sum} disagrees with full-channel fidelity {total}"
            )));
        }
        Ok(FidelityReport {
            total,
            per_outcome,
            region: None,
            thresholds: None,
            strategy_used: strategy,
            off_outcome_corrections: false,
        })
    }
}

/// Hermitian Cholesky factorization of `matrix + shift·I`, keeping only
/// the pivots: succeeds iff every eigenvalue exceeds `-shift`. (nalgebra's
/// complex Cholesky cannot serve here — complex square roots always
/// exist, so it never rejects an indefinite Hermitian matrix.)
fn cholesky_positive_definite(matrix: &DMatrix<Complex64>, shift: f64) -> bool {
    let dim = matrix.nrows();
    let mut lower = DMatrix::<Complex64>::zeros(dim, dim);
    for j in 0..dim {
        let mut pivot = matrix[(j, j)].re + shift;
        for k in 0..j {
            pivot -= lower[(j, k)].norm_sqr();
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return false;
        }
        let root = pivot.sqrt();
        lower[(j, j)] = Complex64::new(root, 0.0);
        for i in (j + 1)..dim {
            let mut entry = matrix[(i, j)];
            for k in 0..j {
                entry -= lower[(i, k)] * lower[(j, k)].conj();
            }
            lower[(i, j)] = entry / root;
        }
    }
    true
}

/// Adds `scale · (σ⊗I) ρ (σ⊗I)†` to `accumulated` by signed index
/// permutation — no matrix products.
fn conjugate_structured(
    op: &PhasedPauli,
    n: usize,
    scale: f64,
    state: &DMatrix<Complex64>,
    accumulated: &mut DMatrix<Complex64>,
) {
    let d = 1usize << n;
    // Precompute the action on each system basis state.
    let images: Vec<(usize, Complex64)> = (0..d).map(|s| apply_to_basis(op, n, s)).collect();
    let scale = Complex64::new(scale, 0.0);
    for s in 0..d {
        let (s_image, s_phase) = images[s];
        for t in 0..d {
            let row = s * d + t;
            let row_image = s_image * d + t;
            for s2 in 0..d {
                let (s2_image, s2_phase) = images[s2];
                let factor = scale * s_phase * s2_phase.conj();
                for t2 in 0..d {
                    accumulated[(row_image, s2_image * d + t2)] +=
                        factor * state[(row, s2 * d + t2)];
                }
            }
        }
    }
}

/// Overlap route without materializing the doubled state:
/// `⟨Ψ|(σ⊗I)|Ψ⟩ = (1/d) Σ_s phase(s)·[σ maps |s⟩ to itself]`.
fn structured_overlap(kraus: &KrausSet) -> f64 {
    let n = kraus.n();
    let d = 1usize << n;
    let mut total = 0.0;
    for (amplitude, op) in kraus.operators() {
        let mut overlap = Complex64::new(0.0, 0.0);
        for s in 0..d {
            let (image, phase) = apply_to_basis(op, n, s);
            if image == s {
                overlap += phase;
            }
        }
        total += amplitude * amplitude * (overlap / d as f64).norm_sqr();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{corrected_fidelity, optimize_recovery};
    use crate::noise::DepolarizingParams;
    use crate::pauli::Pauli;
    use approx::assert_abs_diff_eq;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ps(text: &str) -> PauliString {
        text.parse().unwrap()
    }

    fn mixture(p: f64, mu: f64, n: usize) -> NoiseModel {
        NoiseModel::convex_mixture(&DepolarizingParams::new(p, mu, n).unwrap()).unwrap()
    }

    fn random_table(rng: &mut ChaCha8Rng, n: usize) -> NoiseModel {
        let all = PauliString::enumerate(n).unwrap();
        let size = rng.gen_range(2..=all.len().min(10));
        let keys: Vec<_> = all.choose_multiple(rng, size).cloned().collect();
        let raw: Vec<f64> = (0..size).map(|_| -rng.gen::<f64>().ln()).collect();
        let total: f64 = raw.iter().sum();
        NoiseModel::from_table(n, keys.into_iter().zip(raw.into_iter().map(|w| w / total)))
            .unwrap()
    }

    fn random_mixed_state(rng: &mut ChaCha8Rng, n: usize) -> DenseState {
        let dim = 1usize << (2 * n);
        let factor = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut gram = &factor * factor.adjoint();
        let trace: Complex64 = (0..dim).map(|i| gram[(i, i)]).sum();
        gram /= trace;
        // Symmetrize away the last-ulp Hermiticity error of the product.
        let hermitian = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
        DenseState::new(hermitian).unwrap()
    }

    #[test]
    fn bell_state_has_corner_entries() {
        let oracle = Oracle::default();
        let state = oracle.max_entangled(1).unwrap();
        let half = Complex64::new(0.5, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i == 0 || i == 3) && (j == 0 || j == 3) {
                    half
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert_eq!(state.matrix()[(i, j)], expected);
            }
        }
        assert_abs_diff_eq!(state.purity(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn reduced_half_is_maximally_mixed() {
        let oracle = Oracle::default();
        for n in [1, 2, 3] {
            let state = oracle.max_entangled(n).unwrap();
            let reduced = state.reduced_system();
            let d = 1usize << n;
            for i in 0..d {
                for j in 0..d {
                    let expected = if i == j { 1.0 / d as f64 } else { 0.0 };
                    assert_abs_diff_eq!(reduced[(i, j)].re, expected, epsilon = 1e-14);
                    assert_abs_diff_eq!(reduced[(i, j)].im, 0.0, epsilon = 1e-14);
                }
            }
            let vector = oracle.max_entangled_vector(n).unwrap();
            assert_abs_diff_eq!(state.expectation(&vector).unwrap(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn caps_are_enforced() {
        let narrow = Oracle::new(2).unwrap();
        assert!(matches!(
            narrow.max_entangled(3),
            Err(Error::ResourceCap { .. })
        ));
        let default = Oracle::default();
        assert!(matches!(
            default.max_entangled(5),
            Err(Error::ResourceCap { .. })
        ));
        // A wide cap still refuses to materialize the doubled register.
        let wide = Oracle::new(6).unwrap();
        assert!(matches!(
            wide.max_entangled(5),
            Err(Error::ResourceCap { .. })
        ));
        assert!(Oracle::new(0).is_err());
        assert!(Oracle::new(7).is_err());
    }

    #[test]
    fn state_validation_rejects_bad_matrices() {
        let mut matrix = DMatrix::identity(4, 4) * Complex64::new(0.25, 0.0);
        matrix[(0, 1)] = Complex64::new(0.0, 0.4);
        assert!(matches!(
            DenseState::new(matrix),
            Err(Error::InvalidState(_))
        ));

        let matrix = DMatrix::identity(4, 4) * Complex64::new(0.3, 0.0);
        assert!(matches!(
            DenseState::new(matrix),
            Err(Error::InvalidState(_))
        ));

        // Hermitian, trace 1, but indefinite.
        let mut matrix = DMatrix::zeros(4, 4);
        matrix[(0, 0)] = Complex64::new(1.5, 0.0);
        matrix[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(matches!(
            DenseState::new(matrix),
            Err(Error::InvalidState(_))
        ));

        assert!(DenseState::new(DMatrix::identity(8, 8)).is_err()); // not 4^n
    }

    #[test]
    fn identity_channel_has_unit_fidelity() {
        let oracle = Oracle::new(6).unwrap();
        for n in [1, 2, 4, 5, 6] {
            let kraus = KrausSet::identity(n).unwrap();
            assert_eq!(oracle.entanglement_fidelity(&kraus).unwrap(), 1.0);
        }
    }

    #[test]
    fn uncorrected_depolarizing_fidelity_is_one_minus_p() {
        let oracle = Oracle::default();
        for p in [0.0, 0.15, 0.4, 0.9] {
            let kraus = KrausSet::from_model(&NoiseModel::depolarizing(p).unwrap()).unwrap();
            assert_abs_diff_eq!(
                oracle.entanglement_fidelity(&kraus).unwrap(),
                1.0 - p,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn corrected_mixture_matches_the_fast_path() {
        let oracle = Oracle::default();
        let partition = MeasurementPartition::first_qubit(2).unwrap();
        let model = mixture(0.4, 0.9, 2);
        let branches = select_all(&model, &partition).unwrap();
        let strategy = RecoveryStrategy::region_b(2).unwrap();
        let kraus = corrected_kraus(&branches, &strategy).unwrap();
        let dense = oracle.entanglement_fidelity(&kraus).unwrap();
        assert_abs_diff_eq!(dense, 0.9413333333333334, epsilon = 1e-10);
        let fast = corrected_fidelity(&model, &partition, &strategy).unwrap();
        assert_abs_diff_eq!(dense, fast.total, epsilon = 1e-10);
    }

    #[test]
    fn perfectly_correlated_corrections_collapse_to_identity() {
        let partition = MeasurementPartition::first_qubit(3).unwrap();
        let model = mixture(0.7, 1.0, 3);
        let branches = select_all(&model, &partition).unwrap();
        let strategy = RecoveryStrategy::region_b(3).unwrap();
        let kraus = corrected_kraus(&branches, &strategy).unwrap();
        assert!(kraus.operators().iter().all(|(_, op)| op.string().is_identity()));
        let oracle = Oracle::default();
        assert_abs_diff_eq!(
            oracle.entanglement_fidelity(&kraus).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn identity_strategy_on_identity_channel_is_a_single_identity() {
        let model = NoiseModel::from_table(2, [(ps("II"), 1.0)]).unwrap();
        let partition = MeasurementPartition::first_qubit(2).unwrap();
        let branches = select_all(&model, &partition).unwrap();
        let strategy = RecoveryStrategy::deterministic(2, [(ps("I"), ps("II"))]).unwrap();
        let kraus = corrected_kraus(&branches, &strategy).unwrap();
        assert_eq!(kraus.len(), 1);
        assert_eq!(kraus.operators()[0].0, 1.0);
        assert!(kraus.operators()[0].1.string().is_identity());
    }

    #[test]
    fn region_a_correction_reaches_the_closed_form() {
        let oracle = Oracle::default();
        let partition = MeasurementPartition::first_qubit(2).unwrap();
        let model = mixture(0.4, 0.0, 2);
        let branches = select_all(&model, &partition).unwrap();
        let strategy = RecoveryStrategy::region_a(2).unwrap();
        let kraus = corrected_kraus(&branches, &strategy).unwrap();
        assert_eq!(kraus.len(), 16);
        assert_abs_diff_eq!(
            oracle.entanglement_fidelity(&kraus).unwrap(),
            0.6,
            epsilon = 1e-10
        );
    }

    #[test]
    fn incomplete_families_are_rejected() {
        let op = PhasedPauli::from_string(ps("XX"));
        assert!(matches!(
            KrausSet::new(2, vec![(0.5, op.clone())]),
            Err(Error::IncompleteKraus { .. })
        ));
        let sub = KrausSet::sub_normalized(2, vec![(0.5, op)]).unwrap();
        assert_abs_diff_eq!(sub.total_weight(), 0.25, epsilon = 1e-15);
        let oracle = Oracle::default();
        assert!(matches!(
            oracle.entanglement_fidelity(&sub),
            Err(Error::IncompleteKraus { .. })
        ));
    }

    #[test]
    fn single_record_family_members_each_pass_the_scalar_test() {
        // Identity record of the two-qubit product channel: weights
        // p_0 · p_β over the unmeasured qubit.
        let model = NoiseModel::uncorrelated(0.3, 2).unwrap();
        let partition = MeasurementPartition::first_qubit(2).unwrap();
        let branch = crate::feedback::select(&model, &partition, &ps("I")).unwrap();
        let family = KrausSet::from_branch(&branch, 2).unwrap();
        assert_eq!(family.len(), 4);
        assert_abs_diff_eq!(family.total_weight(), 0.7, epsilon = 1e-12);

        let oracle = Oracle::default();
        let verdicts = oracle.check_correctable(&family).unwrap();
        let expected = [0.7 * 0.7, 0.7 * 0.1, 0.7 * 0.1, 0.7 * 0.1];
        for (verdict, want) in verdicts.iter().zip(expected) {
            assert!(verdict.passes);
            assert_abs_diff_eq!(verdict.scale, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn depolarizing_kraus_pass_with_their_probabilities() {
        let oracle = Oracle::default();
        let kraus = KrausSet::from_model(&NoiseModel::depolarizing(0.4).unwrap()).unwrap();
        let verdicts = oracle.check_correctable(&kraus).unwrap();
        let expected = [0.6, 0.4 / 3.0, 0.4 / 3.0, 0.4 / 3.0];
        for (verdict, want) in verdicts.iter().zip(expected) {
            assert!(verdict.passes);
            assert_abs_diff_eq!(verdict.scale, want, epsilon = 1e-14);
            assert!(verdict.deviation <= 1e-14);
        }
    }

    #[test]
    fn non_unitary_mixtures_fail_the_scalar_test() {
        // (I + Z)/√2: its Gram matrix is I + Z, not a scalar.
        let identity = Pauli::I.to_dense();
        let z = Pauli::Z.to_dense();
        let op = (identity + z) / Complex64::new(2.0f64.sqrt(), 0.0);
        let verdict = check_operator(&op);
        assert!(!verdict.passes);
        assert_abs_diff_eq!(verdict.scale, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(verdict.deviation, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn brute_force_reproduces_the_region_examples() {
        let oracle = Oracle::default();
        let partition = MeasurementPartition::first_qubit(2).unwrap();

        let report = oracle
            .brute_force_optimize(&mixture(0.4, 0.2, 2), &partition)
            .unwrap();
        assert_abs_diff_eq!(report.total, 0.6, epsilon = 1e-10);
        assert_eq!(report.strategy_used, RecoveryStrategy::region_a(2).unwrap());

        let report = oracle
            .brute_force_optimize(&mixture(0.9, 0.05, 2), &partition)
            .unwrap();
        assert_abs_diff_eq!(report.total, 0.33, epsilon = 1e-10);
        assert_eq!(report.strategy_used, RecoveryStrategy::region_c(2).unwrap());
    }

    #[test]
    fn brute_force_with_full_access_recovers_everything() {
        let oracle = Oracle::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 3] {
            let partition = MeasurementPartition::full(n).unwrap();
            let model = random_table(&mut rng, n);
            let report = oracle.brute_force_optimize(&model, &partition).unwrap();
            assert_abs_diff_eq!(report.total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn brute_force_agrees_with_the_fast_optimizer() {
        let oracle = Oracle::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let n = rng.gen_range(1..=3);
            let partition = MeasurementPartition::first_qubit(n).unwrap();
            let model = random_table(&mut rng, n);
            let brute = oracle.brute_force_optimize(&model, &partition).unwrap();
            let fast = optimize_recovery(&model, &partition).unwrap();
            assert!((brute.total - fast.total).abs() <= 1e-10);
            assert_eq!(brute.strategy_used, fast.strategy_used);
        }
    }

    #[test]
    fn brute_force_respects_its_cap() {
        let oracle = Oracle::default();
        let partition = MeasurementPartition::first_qubit(4).unwrap();
        assert!(matches!(
            oracle.brute_force_optimize(&mixture(0.4, 0.5, 4), &partition),
            Err(Error::ResourceCap { .. })
        ));
    }

    #[test]
    fn structured_application_matches_literal_kronecker_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for n in [1, 2, 3] {
            let d = 1usize << n;
            let state = random_mixed_state(&mut rng, n);
            for _ in 0..8 {
                let factors: Vec<Pauli> = (0..n)
                    .map(|_| *Pauli::ALL.choose(&mut rng).unwrap())
                    .collect();
                let op = PhasedPauli::new(PauliString::new(factors).unwrap(), rng.gen_range(0..4));

                let dense = op.to_dense(MAX_DENSE_CAP).unwrap();
                let extended = dense.kronecker(&DMatrix::identity(d, d));
                let literal = &extended * state.matrix() * extended.adjoint();

                let mut structured = DMatrix::zeros(d * d, d * d);
                conjugate_structured(&op, n, 1.0, state.matrix(), &mut structured);

                let worst = (&literal - &structured)
                    .iter()
                    .map(|e| e.norm())
                    .fold(0.0f64, f64::max);
                assert!(worst < 1e-13, "n={n} op={op}: deviation {worst}");

                // Basis action agrees with the rendered column.
                let s = rng.gen_range(0..d);
                let (image, phase) = apply_to_basis(&op, n, s);
                for row in 0..d {
                    let expected = if row == image {
                        phase
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    assert!((dense[(row, s)] - expected).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn structured_overlap_extends_the_oracle_to_wide_registers() {
        let oracle = Oracle::new(6).unwrap();
        for n in [5, 6] {
            let partition = MeasurementPartition::first_qubit(n).unwrap();
            let model = mixture(0.4, 0.9, n);
            let strategy = RecoveryStrategy::region_b(n).unwrap();
            let branches = select_all(&model, &partition).unwrap();
            let kraus = corrected_kraus(&branches, &strategy).unwrap();
            let dense = oracle.entanglement_fidelity(&kraus).unwrap();
            let fast = corrected_fidelity(&model, &partition, &strategy).unwrap();
            assert!((dense - fast.total).abs() <= 1e-10, "n={n}");
        }
    }

    #[test]
    fn random_strategies_agree_with_the_fast_path() {
        let oracle = Oracle::default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..15 {
            let n = rng.gen_range(1..=3);
            let partition = MeasurementPartition::first_qubit(n).unwrap();
            let model = random_table(&mut rng, n);
            // Deterministic record-consistent strategy with random completions.
            let completions = PauliString::enumerate(n.saturating_sub(1).max(1))
                .unwrap()
                .iter()
                .map(|s| s.factors().to_vec())
                .collect::<Vec<_>>();
            let assignments: Vec<(PauliString, PauliString)> = PauliString::enumerate(1)
                .unwrap()
                .into_iter()
                .map(|record| {
                    let correction = if n == 1 {
                        record.clone()
                    } else {
                        partition
                            .compose(&record, completions.choose(&mut rng).unwrap())
                            .unwrap()
                    };
                    (record, correction)
                })
                .collect();
            let strategy = RecoveryStrategy::deterministic(n, assignments).unwrap();
            let branches = select_all(&model, &partition).unwrap();
            let dense = oracle
                .entanglement_fidelity(&corrected_kraus(&branches, &strategy).unwrap())
                .unwrap();
            let fast = corrected_fidelity(&model, &partition, &strategy).unwrap();
            assert!((dense - fast.total).abs() <= 1e-10);
        }
    }

    #[test]
    fn fidelity_is_invariant_under_local_basis_changes() {
        // Entanglement fidelity of a Pauli channel does not depend on
        // which maximally entangled state is used: rotate the system half
        // by a Hadamard and recompute the overlap from scratch.
        let oracle = Oracle::default();
        let n = 1;
        let d = 1usize << n;
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
            ],
        ) / Complex64::new(2.0f64.sqrt(), 0.0);
        let rotated = h.kronecker(&DMatrix::identity(d, d)) * oracle.max_entangled_vector(n).unwrap();
        let state = DenseState::new(&rotated * rotated.adjoint()).unwrap();

        let kraus = KrausSet::from_model(&NoiseModel::depolarizing(0.35).unwrap()).unwrap();
        let output = oracle.apply_channel(&kraus, &state).unwrap();
        let overlap = output.expectation(&rotated).unwrap();
        assert_abs_diff_eq!(
            overlap,
            oracle.entanglement_fidelity(&kraus).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn channel_application_keeps_states_valid() {
        // DenseState::new re-validates trace and Hermiticity, so survival
        // of this call is the assertion; check purity drops too.
        let oracle = Oracle::default();
        let input = oracle.max_entangled(2).unwrap();
        let kraus = KrausSet::from_model(&mixture(0.4, 0.3, 2)).unwrap();
        let output = oracle.apply_channel(&kraus, &input).unwrap();
        assert!(output.purity() < 1.0 - 1e-6);
        let vector = oracle.max_entangled_vector(2).unwrap();
        let overlap = output.expectation(&vector).unwrap();
        assert!(overlap > 0.0 && overlap < 1.0);
    }
}
