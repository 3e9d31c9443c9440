//! Grid evaluation and the randomized verification suite.
//!
//! Figure-style outputs are plain row collections: the caller hands a
//! parameter grid to [`region_rows`] or [`sweep_rows`] and gets one row
//! per grid point, in grid order. Points are independent, so the maps
//! run data-parallel when the `parallel` feature is enabled (the default)
//! and fall back to a plain sequential loop otherwise; either way the
//! output order is the input order, so emitted files are byte-identical.
//!
//! [`verify_suite`] is the programmatic cross-check driver: seeded random
//! models and strategies pushed through every independent evaluation
//! route (closed form, enumerated optimizer, brute-force search, dense
//! matrices), reporting the worst absolute disagreement.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::feedback::{
    classify_region, corrected_fidelity, optimize_mixture, optimize_recovery, region_thresholds,
    select_all, theoretical_fidelity, MeasurementPartition, RecoveryStrategy, RegionLabel,
};
use crate::noise::{DepolarizingParams, NoiseModel};
use crate::oracle::{corrected_kraus, Oracle, BRUTE_FORCE_CAP};
use crate::pauli::{Pauli, PauliString};

/// Maximum disagreement tolerated between evaluation routes in
/// [`verify_suite`].
pub const VERIFY_TOLERANCE: f64 = 1e-10;

/// `steps` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..steps)
            .map(|i| {
                if i == steps - 1 {
                    end
                } else {
                    start + (end - start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect(),
    }
}

/// Applies `f` to every grid point, preserving input order in the output.
/// Runs on the rayon thread pool when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_grid<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Applies `f` to every grid point, preserving input order in the output.
/// Sequential build: the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn map_grid<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sequential twin of [`map_grid`], available regardless of features —
/// the benchmark baseline.
pub fn map_grid_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// One point of the region-threshold map: where the optimal strategy
/// changes as the correlation grows, for a given error weight and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionRow {
    pub n: usize,
    pub p: f64,
    pub mu_ab: Option<f64>,
    pub mu_bc: Option<f64>,
}

/// Threshold rows over the cartesian grid `n_values × linspace(0,1,p_steps)`,
/// ordered by `n` first, then by `p`.
pub fn region_rows(n_values: &[usize], p_steps: usize) -> Result<Vec<RegionRow>> {
    if n_values.is_empty() || p_steps < 2 {
        return Err(Error::InvalidParameter {
            name: "grid",
            value: p_steps as f64,
            expected: "at least one n and two p steps",
        });
    }
    for &n in n_values {
        // Surface bad qubit counts before spawning the grid.
        region_thresholds(0.0, n)?;
    }
    let mut points = Vec::with_capacity(n_values.len() * p_steps);
    for &n in n_values {
        for p in linspace(0.0, 1.0, p_steps) {
            points.push((n, p));
        }
    }
    let rows = map_grid(&points, |&(n, p)| {
        let thresholds = region_thresholds(p, n).expect("validated above");
        RegionRow {
            n,
            p,
            mu_ab: thresholds.mu_ab,
            mu_bc: thresholds.mu_bc,
        }
    });
    Ok(rows)
}

/// One point of a fidelity-versus-size sweep at fixed error weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub mu: f64,
    pub f_theoretical: f64,
    pub f_optimized: f64,
    /// Dense-matrix cross-check, populated only for `n` within the
    /// oracle's cap.
    pub f_oracle: Option<f64>,
    pub region: RegionLabel,
}

/// Fidelity rows for `n = 2..=n_max` at each given correlation, ordered
/// by correlation first (one curve at a time), then by `n`.
pub fn sweep_rows(p: f64, mu_values: &[f64], n_max: usize, oracle: &Oracle) -> Result<Vec<SweepRow>> {
    if mu_values.is_empty() || n_max < 2 {
        return Err(Error::InvalidParameter {
            name: "grid",
            value: n_max as f64,
            expected: "at least one mu and n_max >= 2",
        });
    }
    let mut points = Vec::new();
    for &mu in mu_values {
        for n in 2..=n_max {
            // Validate eagerly so the grid closure cannot fail.
            DepolarizingParams::new(p, mu, n)?;
            points.push((mu, n));
        }
    }
    let rows = map_grid(&points, |&(mu, n)| -> Result<SweepRow> {
        let params = DepolarizingParams::new(p, mu, n).expect("validated above");
        let report = optimize_mixture(&params)?;
        let f_oracle = if n <= oracle.dense_cap() {
            let model = NoiseModel::convex_mixture(&params)?;
            let branches = select_all(&model, &MeasurementPartition::first_qubit(n)?)?;
            let kraus = corrected_kraus(&branches, &report.strategy_used)?;
            Some(oracle.entanglement_fidelity(&kraus)?)
        } else {
            None
        };
        Ok(SweepRow {
            n,
            mu,
            f_theoretical: theoretical_fidelity(&params)?,
            f_optimized: report.total,
            f_oracle,
            region: report.region.expect("optimize_mixture always classifies"),
        })
    });
    rows.into_iter().collect()
}

/// Outcome of a [`verify_suite`] run.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// Worst absolute disagreement observed across all comparisons.
    pub max_abs_diff: f64,
    /// Human-readable description of every comparison beyond tolerance.
    pub failures: Vec<String>,
    /// Total number of comparisons performed.
    pub checks: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A random noise model: 2–10 distinct error strings with normalized
/// exponential weights.
pub fn random_model<R: Rng>(rng: &mut R, n: usize) -> Result<NoiseModel> {
    let all = PauliString::enumerate(n)?;
    let size = rng.gen_range(2..=all.len().min(10));
    let keys: Vec<_> = all.choose_multiple(rng, size).cloned().collect();
    let raw: Vec<f64> = (0..size).map(|_| -rng.gen::<f64>().ln()).collect();
    let total: f64 = raw.iter().sum();
    NoiseModel::from_table(n, keys.into_iter().zip(raw.into_iter().map(|w| w / total)))
}

/// A random strategy covering every record, with up to three weighted
/// corrections per record; occasionally includes a correction that
/// disagrees with its record (contributing zero fidelity).
pub fn random_strategy<R: Rng>(
    rng: &mut R,
    partition: &MeasurementPartition,
) -> Result<RecoveryStrategy> {
    let n = partition.n();
    let completions: Vec<Vec<Pauli>> = if partition.is_full() {
        vec![Vec::new()]
    } else {
        PauliString::enumerate(n - partition.measured_count())?
            .iter()
            .map(|s| s.factors().to_vec())
            .collect()
    };
    let strings = PauliString::enumerate(n)?;
    let mut outcomes = BTreeMap::new();
    for record in PauliString::enumerate(partition.measured_count())? {
        let mut corrections: BTreeMap<PauliString, f64> = BTreeMap::new();
        for _ in 0..rng.gen_range(1..=3) {
            let completion = completions.choose(rng).expect("nonempty");
            let correction = partition.compose(&record, completion)?;
            *corrections.entry(correction).or_insert(0.0) += -rng.gen::<f64>().ln();
        }
        if rng.gen_bool(0.2) {
            let stray = strings.choose(rng).expect("nonempty").clone();
            *corrections.entry(stray).or_insert(0.0) += -rng.gen::<f64>().ln();
        }
        let total: f64 = corrections.values().sum();
        for q in corrections.values_mut() {
            *q /= total;
        }
        outcomes.insert(record, corrections);
    }
    RecoveryStrategy::new(n, outcomes)
}

/// Seeded cross-validation: every trial pushes a random mixture model and
/// a random weight table through all independent evaluation routes and
/// compares the answers pairwise. Brute-force comparisons run when `n`
/// is within [`BRUTE_FORCE_CAP`]; region-formula comparisons when
/// `n >= 2`. All randomness derives from `seed`, so reports reproduce
/// exactly.
pub fn verify_suite(seed: u64, trials: usize, n: usize, oracle: &Oracle) -> Result<VerifyReport> {
    if n == 0 || n > oracle.dense_cap() {
        return Err(Error::ResourceCap {
            what: "verification suite",
            n,
            cap: oracle.dense_cap(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let partition = MeasurementPartition::first_qubit(n)?;
    let mut report = VerifyReport {
        max_abs_diff: 0.0,
        failures: Vec::new(),
        checks: 0,
    };

    let record = |report: &mut VerifyReport, trial: usize, label: &str, a: f64, b: f64| {
        let diff = (a - b).abs();
        report.checks += 1;
        report.max_abs_diff = report.max_abs_diff.max(diff);
        if diff > VERIFY_TOLERANCE {
            report
                .failures
                .push(format!("trial {trial}: {label}: {a} vs {b} (diff {diff:.3e})"));
        }
    };

    for trial in 0..trials {
        let p = rng.gen::<f64>();
        let mu = rng.gen::<f64>();
        let params = DepolarizingParams::new(p, mu, n)?;
        let model = NoiseModel::convex_mixture(&params)?;
        let enumerated = optimize_recovery(&model, &partition)?;

        if n >= 2 {
            let closed = optimize_mixture(&params)?;
            record(
                &mut report,
                trial,
                "closed-form optimizer vs enumerated optimizer",
                closed.total,
                enumerated.total,
            );
            record(
                &mut report,
                trial,
                "region formula vs enumerated optimizer",
                theoretical_fidelity(&params)?,
                enumerated.total,
            );
            let (label, _) = classify_region(&params)?;
            report.checks += 1;
            if closed.region != Some(label) {
                report.failures.push(format!(
                    "trial {trial}: optimizer region {:?} disagrees with classifier {:?}",
                    closed.region, label
                ));
            }
        }

        let branches = select_all(&model, &partition)?;
        let kraus = corrected_kraus(&branches, &enumerated.strategy_used)?;
        record(
            &mut report,
            trial,
            "dense fidelity vs enumerated optimum (mixture model)",
            oracle.entanglement_fidelity(&kraus)?,
            enumerated.total,
        );

        if n <= BRUTE_FORCE_CAP {
            let brute = oracle.brute_force_optimize(&model, &partition)?;
            record(
                &mut report,
                trial,
                "brute-force optimum vs enumerated optimum (mixture model)",
                brute.total,
                enumerated.total,
            );
            report.checks += 1;
            if brute.strategy_used != enumerated.strategy_used {
                report.failures.push(format!(
                    "trial {trial}: brute-force strategy differs from enumerated strategy"
                ));
            }
        }

        // Random-table leg: arbitrary distributions and strategies.
        let table = random_model(&mut rng, n)?;
        let strategy = random_strategy(&mut rng, &partition)?;
        let fast = corrected_fidelity(&table, &partition, &strategy)?;
        let table_branches = select_all(&table, &partition)?;
        let table_kraus = corrected_kraus(&table_branches, &strategy)?;
        record(
            &mut report,
            trial,
            "dense fidelity vs record-weight sum (random model, random strategy)",
            oracle.entanglement_fidelity(&table_kraus)?,
            fast.total,
        );

        if n <= BRUTE_FORCE_CAP {
            let brute = oracle.brute_force_optimize(&table, &partition)?;
            let enumerated = optimize_recovery(&table, &partition)?;
            record(
                &mut report,
                trial,
                "brute-force optimum vs enumerated optimum (random model)",
                brute.total,
                enumerated.total,
            );
        }
    }

    Ok(report)
}
