//! Correlated Pauli noise under partial environment measurement.
//!
//! This crate models n-qubit channels whose Kraus operators are Pauli
//! strings drawn from a weight table, the classical side information an
//! observer gains by measuring part of the environment, and the
//! feedback corrections that side information enables. Its central
//! quantity is the entanglement fidelity of the corrected channel,
//! which the crate computes three independent ways:
//!
//! * closed-form weight sums ([`feedback::corrected_fidelity`]) that
//!   exploit the Pauli trace rule,
//! * region formulas and thresholds for the depolarizing mixture
//!   family ([`feedback::theoretical_fidelity`]), and
//! * a dense-matrix oracle ([`oracle`]) that builds the actual Kraus
//!   matrices and the maximally entangled reference state.
//!
//! Cross-checking these paths against each other is a first-class use
//! case (see [`sweep::verify_suite`] and the `verify` CLI subcommand).
//!
//! Convention used throughout: the measured environment qubit of the
//! depolarizing mixture family is qubit 0, the first character of a
//! string's text form.

pub mod error;
pub mod feedback;
pub mod noise;
pub mod oracle;
pub mod pauli;
pub mod sweep;

pub use error::{Error, Result};
pub use feedback::{
    asymptotic_fidelity, classify_region, corrected_fidelity, optimize_mixture, optimize_recovery,
    outcome_probability, region_thresholds, select, select_all, theoretical_fidelity, BoundaryEdge,
    FidelityReport, MeasurementPartition, RecoveryStrategy, RegionLabel, RegionThresholds,
    SelectedOutput,
};
pub use noise::{DepolarizingParams, NoiseModel};
pub use oracle::{
    check_operator, corrected_kraus, CorrectableVerdict, DenseState, KrausSet, Oracle,
};
pub use pauli::{Pauli, PauliString, PhasedPauli};
pub use sweep::{
    linspace, map_grid, map_grid_seq, random_model, random_strategy, region_rows, sweep_rows,
    verify_suite, RegionRow, SweepRow, VerifyReport,
};
