//! Subcommand implementations.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use qpr_core::noise::{fit_inverse_sqrt, log_log_slope, run_sensitivity_sweep, SweepOptions};
use qpr_core::optics::{apply_phase_object, MultiphotonTransform, PhaseVector, UnitaryMatrix};
use qpr_core::retrieval::{
    classical_far_intensities, cluster_solutions, run_classical_batch, run_quantum_batch,
    GsOptions, GsResult, MeasuredDistribution, CORRECT_PHASE_THRESHOLD,
    DEFAULT_CLUSTER_TOLERANCE,
};
use qpr_core::statekit::{generalized_state, matched_classical_field, validate_state};
use qpr_core::QuantumState;

use crate::config::ExperimentConfig;
use crate::output::{
    assign_clusters, write_json, write_runs_csv, write_sweep_csv, ClusterReport,
};

pub fn check_state(config: &ExperimentConfig) -> Result<bool> {
    let state = config.build_state()?;
    let report = validate_state(&state);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    print!("{text}");
    Ok(report.is_valid())
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn emit_batch_artifacts(
    out: &Path,
    algorithm: &str,
    results: &[GsResult],
    master_seed: u64,
    truth: &PhaseVector,
) -> Result<()> {
    let clusters = if results.is_empty() {
        Vec::new()
    } else {
        cluster_solutions(results, DEFAULT_CLUSTER_TOLERANCE, Some(truth))?
    };
    let ids = assign_clusters(results, &clusters, DEFAULT_CLUSTER_TOLERANCE)?;
    write_runs_csv(&out.join(format!("{algorithm}_runs.csv")), results, master_seed, &ids, truth)?;
    let report = ClusterReport::build(algorithm, results, &clusters, truth)?;
    write_json(&out.join(format!("{algorithm}_clusters.json")), &report)?;
    println!(
        "{algorithm}: {} runs, {} converged, success fraction {}",
        report.total_runs, report.converged_runs, report.success_fraction
    );
    Ok(())
}

pub fn retrieve(config: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let state = config.build_state()?;
    let truth = config.theta_obj()?;
    let unitary = UnitaryMatrix::dft(config.modes)?;
    let options = config.gs.to_options();
    write_json(&out.join("effective_config.json"), config)?;

    if config.algorithm.runs_quantum() {
        let report = validate_state(&state);
        let extractor = report.extractor.ok_or_else(|| {
            anyhow::anyhow!(
                "state fails the uniqueness checks: {}",
                report.failure_reason.unwrap_or_else(|| "unknown".into())
            )
        })?;
        let transform = MultiphotonTransform::new(state.basis().clone(), &unitary)?;
        let propagated = apply_phase_object(&state, &truth)?;
        let measured = MeasuredDistribution::from_output_state(&transform.forward(&propagated)?);
        let results = run_quantum_batch(
            &transform,
            &state,
            &measured,
            &extractor,
            &options,
            config.runs,
            config.seed,
            Some(&truth),
        )?;
        emit_batch_artifacts(out, "quantum", &results, config.seed, &truth)?;
    }

    if config.algorithm.runs_classical() {
        let magnitudes = matched_classical_field(&state).magnitudes();
        let intensities = classical_far_intensities(&magnitudes, &truth, &unitary)?;
        let results = run_classical_batch(
            &magnitudes,
            &unitary,
            &intensities,
            &options,
            config.runs,
            config.seed,
            Some(&truth),
        )?;
        emit_batch_artifacts(out, "classical", &results, config.seed, &truth)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary {
    photon_budgets: Vec<u64>,
    trials_per_budget: usize,
    quantum_fit_coefficient: Option<f64>,
    classical_fit_coefficient: Option<f64>,
    quantum_loglog_slope: Option<f64>,
    classical_loglog_slope: Option<f64>,
}

pub fn sweep_noise(config: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let noise = config
        .noise
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("sweep-noise requires a noise block in the config"))?;
    let state = config.build_state()?;
    let truth = config.theta_obj()?;
    let unitary = UnitaryMatrix::dft(config.modes)?;
    write_json(&out.join("effective_config.json"), config)?;

    let options = SweepOptions { gs: config.gs.to_options(), ..Default::default() };
    let sweep = run_sensitivity_sweep(
        &state,
        &truth,
        &unitary,
        &noise.budgets,
        noise.trials,
        &options,
        config.seed,
    )?;
    write_sweep_csv(&out.join("sweep.csv"), &sweep)?;

    let quantum_points: Vec<(f64, f64)> =
        sweep.rows.iter().map(|r| (r.n_total as f64, r.q_mean_err)).collect();
    let classical_points: Vec<(f64, f64)> =
        sweep.rows.iter().map(|r| (r.n_total as f64, r.cl_mean_err_correct)).collect();
    let summary = SweepSummary {
        photon_budgets: sweep.photon_budgets.clone(),
        trials_per_budget: sweep.trials_per_budget,
        quantum_fit_coefficient: fit_inverse_sqrt(&quantum_points).ok(),
        classical_fit_coefficient: fit_inverse_sqrt(&classical_points).ok(),
        quantum_loglog_slope: log_log_slope(&quantum_points).ok(),
        classical_loglog_slope: log_log_slope(&classical_points).ok(),
    };
    write_json(&out.join("sweep_summary.json"), &summary)?;
    for row in &sweep.rows {
        println!(
            "N_T {}: quantum {} classical-correct {} bound {}",
            row.n_total, row.q_mean_err, row.cl_mean_err_correct, row.cl_min_bound
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct AlgorithmSummary {
    runs: usize,
    converged_runs: usize,
    correct_runs: usize,
    success_fraction: f64,
}

fn summarize(results: &[GsResult]) -> AlgorithmSummary {
    let converged = results.iter().filter(|r| r.converged).count();
    let correct = results
        .iter()
        .filter(|r| r.final_phase_error().map(|e| e < CORRECT_PHASE_THRESHOLD) == Some(true))
        .count();
    AlgorithmSummary {
        runs: results.len(),
        converged_runs: converged,
        correct_runs: correct,
        success_fraction: if results.is_empty() { 0.0 } else { correct as f64 / results.len() as f64 },
    }
}

#[derive(Serialize)]
struct GeneralizeSummary {
    modes: usize,
    runs: usize,
    seed: u64,
    theta_obj: Vec<f64>,
    quantum: AlgorithmSummary,
    classical: AlgorithmSummary,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generalize(modes: usize, runs: usize, seed: u64, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let state: QuantumState = generalized_state(modes)?;
    let unitary = UnitaryMatrix::dft(modes)?;
    let report = validate_state(&state);
    let extractor = report.extractor.ok_or_else(|| {
        anyhow::anyhow!(
            "generalized state failed validation: {}",
            report.failure_reason.unwrap_or_else(|| "unknown".into())
        )
    })?;

    // Random gauge-fixed object phases, drawn from the command seed.
    let truth = PhaseVector::random_from_seed(modes, splitmix64(seed))?;

    let transform = MultiphotonTransform::new(state.basis().clone(), &unitary)?;
    let propagated = apply_phase_object(&state, &truth)?;
    let measured = MeasuredDistribution::from_output_state(&transform.forward(&propagated)?);
    let options = GsOptions::default();
    let quantum = run_quantum_batch(
        &transform,
        &state,
        &measured,
        &extractor,
        &options,
        runs,
        seed,
        Some(&truth),
    )?;

    let magnitudes = matched_classical_field(&state).magnitudes();
    let intensities = classical_far_intensities(&magnitudes, &truth, &unitary)?;
    let classical =
        run_classical_batch(&magnitudes, &unitary, &intensities, &options, runs, seed, Some(&truth))?;

    let summary = GeneralizeSummary {
        modes,
        runs,
        seed,
        theta_obj: truth.thetas().to_vec(),
        quantum: summarize(&quantum),
        classical: summarize(&classical),
    };
    write_json(&out.join("generalize_summary.json"), &summary)?;
    println!(
        "m = {modes}: quantum success {}, classical success {}",
        summary.quantum.success_fraction, summary.classical.success_fraction
    );
    Ok(())
}
