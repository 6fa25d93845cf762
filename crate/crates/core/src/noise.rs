//! Shot-noise Monte-Carlo simulation and sensitivity sweeps.
//!
//! A photon budget `N_T` buys `floor(N_T / N)` complete N-photon
//! coincidence events for the quantum measurement, or `N_T` single-photon
//! detections for the classical one. Sweeping the budget and averaging
//! retrieval errors over trials produces the `1/sqrt(N_T)` sensitivity
//! curves, compared against the minimal classical bound `(m-1)/sqrt(N_T)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::QuantumState;
use crate::optics::{MultiphotonTransform, PhaseVector, UnitaryMatrix, apply_phase_object};
use crate::retrieval::{
    classical_far_intensities, classical_gs, cluster_solutions, phase_error, quantum_gs_with,
    run_classical_batch, GsOptions, MeasuredDistribution, DEFAULT_CLUSTER_TOLERANCE,
};
use crate::statekit::{matched_classical_field, validate_state};

/// One line of the sensitivity table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_total: u64,
    pub q_mean_err: f64,
    pub q_std_err: f64,
    /// Mean classical error over the runs that retrieved the correct
    /// phases; NaN when no run did.
    pub cl_mean_err_correct: f64,
    pub cl_success_frac: f64,
    /// The minimal classical bound `(m-1)/sqrt(N_T)`.
    pub cl_min_bound: f64,
}

/// Aggregated Monte-Carlo sensitivity results.
#[derive(Clone, Debug, Serialize)]
pub struct SensitivitySweep {
    pub photon_budgets: Vec<u64>,
    pub trials_per_budget: usize,
    pub rows: Vec<SweepRow>,
}

/// Knobs of [`run_sensitivity_sweep`].
#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub gs: GsOptions,
    /// Noiseless classical restarts used to chart the solution set before
    /// the noisy trials run.
    pub calibration_runs: usize,
    pub cluster_tolerance: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            gs: GsOptions::default(),
            calibration_runs: 400,
            cluster_tolerance: DEFAULT_CLUSTER_TOLERANCE,
        }
    }
}

/// Draw `floor(total_photons / photon_number)` independent N-photon
/// detection events and return the empirical outcome frequencies with
/// counts attached.
pub fn sample_quantum_distribution<R: Rng + ?Sized>(
    true_probs: &MeasuredDistribution,
    total_photons: u64,
    photon_number: u32,
    rng: &mut R,
) -> Result<MeasuredDistribution> {
    if photon_number == 0 {
        return Err(Error::EmptyBasis);
    }
    if total_photons < photon_number as u64 {
        return Err(Error::BudgetTooSmall { budget: total_photons, event: photon_number as u64 });
    }
    let events = total_photons / photon_number as u64;
    let counts = draw_categorical(true_probs.probabilities(), events, rng);
    MeasuredDistribution::from_counts(true_probs.basis().clone(), counts)
}

/// Draw `total_photons` single-photon detections from the categorical
/// distribution proportional to `true_intensities`; the returned empirical
/// intensities are normalized so their sum matches the input sum.
pub fn sample_classical_intensities<R: Rng + ?Sized>(
    true_intensities: &[f64],
    total_photons: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if total_photons == 0 {
        return Err(Error::BudgetTooSmall { budget: 0, event: 1 });
    }
    if true_intensities.is_empty()
        || true_intensities.iter().any(|&v| v < 0.0 || !v.is_finite())
        || true_intensities.iter().all(|&v| v == 0.0)
    {
        return Err(Error::DegenerateInput("intensities must be nonnegative and not all zero".into()));
    }
    let total: f64 = true_intensities.iter().sum();
    let counts = draw_categorical(true_intensities, total_photons, rng);
    Ok(counts
        .iter()
        .map(|&c| c as f64 / total_photons as f64 * total)
        .collect())
}

/// Sequential categorical draws with a counting accumulator.
fn draw_categorical<R: Rng + ?Sized>(weights: &[f64], draws: u64, rng: &mut R) -> Vec<u64> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let total = acc;
    let mut counts = vec![0u64; weights.len()];
    for _ in 0..draws {
        let x = rng.random_range(0.0..total);
        let idx = cumulative.partition_point(|&c| c <= x).min(weights.len() - 1);
        counts[idx] += 1;
    }
    counts
}

/// The minimal phase error achievable with classical light for a given
/// photon budget: `(m - 1) / sqrt(N_T)`.
pub fn classical_minimum_bound(m: usize, total_photons: u64) -> f64 {
    debug_assert!(m >= 2, "bound needs at least two modes");
    debug_assert!(total_photons >= 1);
    (m as f64 - 1.0) / (total_photons as f64).sqrt()
}

/// Least-squares coefficient `c` of the one-parameter model
/// `error = c / sqrt(N_T)`.
pub fn fit_inverse_sqrt(points: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, e)| n.is_finite() && e.is_finite() && *n > 0.0 && *e > 0.0)
        .copied()
        .collect();
    if usable.len() < 2 {
        return Err(Error::DegenerateInput("need at least two positive points to fit".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (n, e) in usable {
        let u = n.sqrt().recip();
        num += u * e;
        den += u * u;
    }
    Ok(num / den)
}

/// Slope of `log(error)` against `log(N_T)`; `-0.5` for shot-noise
/// limited behavior.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, e)| n.is_finite() && e.is_finite() && *n > 0.0 && *e > 0.0)
        .map(|&(n, e)| (n.ln(), e.ln()))
        .collect();
    if usable.len() < 2 {
        return Err(Error::DegenerateInput("need at least two positive points to fit".into()));
    }
    let count = usable.len() as f64;
    let mean_x: f64 = usable.iter().map(|(x, _)| x).sum::<f64>() / count;
    let mean_y: f64 = usable.iter().map(|(_, y)| y).sum::<f64>() / count;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in usable {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    if var == 0.0 {
        return Err(Error::DegenerateInput("all budgets identical".into()));
    }
    Ok(cov / var)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed stream for nested trial structures.
fn mix_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ p))
}

struct TrialOutcome {
    q_err: f64,
    cl_err: f64,
    cl_correct: bool,
}

/// Monte-Carlo sensitivity sweep over photon budgets.
///
/// Per budget and trial, both retrievals run on freshly sampled shot-noise
/// data: the quantum loop on an empirical N-photon outcome distribution,
/// the classical loop on empirical far-field intensities of the matched
/// coherent field. Classical errors are averaged over correct runs only,
/// where correctness is nearest-solution classification against the
/// noiseless cluster chart (a fixed threshold would misclassify at small
/// budgets).
pub fn run_sensitivity_sweep(
    state: &QuantumState,
    theta_obj: &PhaseVector,
    unitary: &UnitaryMatrix,
    budgets: &[u64],
    trials: usize,
    options: &SweepOptions,
    master_seed: u64,
) -> Result<SensitivitySweep> {
    if budgets.is_empty() || trials == 0 {
        return Err(Error::DegenerateInput("need at least one budget and one trial".into()));
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::DegenerateInput("budgets must be strictly ascending".into()));
    }
    let report = validate_state(state);
    let extractor = report.extractor.ok_or_else(|| {
        Error::InvalidState(report.failure_reason.unwrap_or_else(|| "state failed validation".into()))
    })?;

    let m = state.basis().mode_count();
    let photon_number = state.basis().photon_count();
    let transform = MultiphotonTransform::new(state.basis().clone(), unitary)?;

    // Exact forward models.
    let propagated = apply_phase_object(state, theta_obj)?;
    let exact_quantum = MeasuredDistribution::from_output_state(&transform.forward(&propagated)?);
    let field = matched_classical_field(state);
    let magnitudes = field.magnitudes();
    let exact_far = classical_far_intensities(&magnitudes, theta_obj, unitary)?;

    // Chart the noiseless classical solution set once.
    let calibration = run_classical_batch(
        &magnitudes,
        unitary,
        &exact_far,
        &options.gs,
        options.calibration_runs,
        mix_seed(master_seed, &[0]),
        Some(theta_obj),
    )?;
    let clusters = cluster_solutions(&calibration, options.cluster_tolerance, Some(theta_obj))?;
    let wrong_representatives: Vec<PhaseVector> = clusters
        .into_iter()
        .filter(|c| c.is_correct == Some(false))
        .map(|c| c.representative)
        .collect();

    let mut rows = Vec::with_capacity(budgets.len());
    for (budget_index, &n_total) in budgets.iter().enumerate() {
        let outcomes: Vec<TrialOutcome> = (0..trials)
            .into_par_iter()
            .map(|trial| -> Result<TrialOutcome> {
                let b = budget_index as u64;
                let t = trial as u64;

                let mut sample_rng =
                    ChaCha8Rng::seed_from_u64(mix_seed(master_seed, &[1, b, t]));
                let noisy_q =
                    sample_quantum_distribution(&exact_quantum, n_total, photon_number, &mut sample_rng)?;
                let q_options = options.gs.with_seed(mix_seed(master_seed, &[2, b, t]));
                let q_result =
                    quantum_gs_with(&transform, state, &noisy_q, &extractor, &q_options, None)?;
                let q_err = phase_error(&q_result.retrieved_theta, theta_obj)?;

                let mut cl_rng = ChaCha8Rng::seed_from_u64(mix_seed(master_seed, &[3, b, t]));
                let noisy_i = sample_classical_intensities(&exact_far, n_total, &mut cl_rng)?;
                let cl_options = options.gs.with_seed(mix_seed(master_seed, &[4, b, t]));
                let cl_result = classical_gs(&magnitudes, unitary, &noisy_i, &cl_options, None)?;
                let cl_err = phase_error(&cl_result.retrieved_theta, theta_obj)?;
                // Correct = converged to a solution of the noisy data AND
                // closer to the truth than to every wrong solution branch.
                // Stagnated runs sit far from the whole chart and would
                // otherwise be attributed to whichever branch is least far.
                let cl_correct = cl_result.converged
                    && wrong_representatives.iter().try_fold(true, |acc, rep| {
                        Ok::<bool, Error>(acc && cl_err < phase_error(&cl_result.retrieved_theta, rep)?)
                    })?;

                Ok(TrialOutcome { q_err, cl_err, cl_correct })
            })
            .collect::<Result<Vec<_>>>()?;

        let q_errors: Vec<f64> = outcomes.iter().map(|o| o.q_err).collect();
        let q_mean = mean(&q_errors);
        let q_std_err = standard_error(&q_errors, q_mean);
        let correct_errors: Vec<f64> =
            outcomes.iter().filter(|o| o.cl_correct).map(|o| o.cl_err).collect();
        let cl_success_frac = correct_errors.len() as f64 / trials as f64;
        let cl_mean_err_correct =
            if correct_errors.is_empty() { f64::NAN } else { mean(&correct_errors) };

        rows.push(SweepRow {
            n_total,
            q_mean_err: q_mean,
            q_std_err,
            cl_mean_err_correct,
            cl_success_frac,
            cl_min_bound: classical_minimum_bound(m, n_total),
        });
    }

    Ok(SensitivitySweep {
        photon_budgets: budgets.to_vec(),
        trials_per_budget: trials,
        rows,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn standard_error(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let var: f64 =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64;
    (var / values.len() as f64).sqrt()
}
