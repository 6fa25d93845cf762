//! CSV and JSON artifact writers. All floats use the shortest
//! round-trip representation so identical inputs produce identical bytes.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use qpr_core::noise::SensitivitySweep;
use qpr_core::optics::PhaseVector;
use qpr_core::retrieval::{
    classify_ambiguity, phase_error, GsResult, SolutionCluster, CORRECT_PHASE_THRESHOLD,
};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
pub struct ClusterEntry {
    pub representative: Vec<f64>,
    pub count: usize,
    pub is_correct: bool,
    pub ambiguity: String,
}

#[derive(Serialize)]
pub struct ClusterReport {
    pub algorithm: String,
    pub total_runs: usize,
    pub converged_runs: usize,
    pub correct_runs: usize,
    pub success_fraction: f64,
    pub clusters: Vec<ClusterEntry>,
}

impl ClusterReport {
    pub fn build(
        algorithm: &str,
        results: &[GsResult],
        clusters: &[SolutionCluster],
        truth: &PhaseVector,
    ) -> Result<Self> {
        let converged_runs = results.iter().filter(|r| r.converged).count();
        let correct_runs = results
            .iter()
            .filter(|r| r.final_phase_error().map(|e| e < CORRECT_PHASE_THRESHOLD) == Some(true))
            .count();
        let entries = clusters
            .iter()
            .map(|c| {
                Ok(ClusterEntry {
                    representative: c.representative.thetas().to_vec(),
                    count: c.count,
                    is_correct: c.is_correct.unwrap_or(false),
                    ambiguity: classify_ambiguity(&c.representative, truth, CORRECT_PHASE_THRESHOLD)?
                        .to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            algorithm: algorithm.to_string(),
            total_runs: results.len(),
            converged_runs,
            correct_runs,
            success_fraction: if results.is_empty() {
                0.0
            } else {
                correct_runs as f64 / results.len() as f64
            },
            clusters: entries,
        })
    }
}

/// Index of the first cluster (count-descending order) within `tolerance`
/// of each converged run; -1 for unassigned runs.
pub fn assign_clusters(
    results: &[GsResult],
    clusters: &[SolutionCluster],
    tolerance: f64,
) -> Result<Vec<i64>> {
    results
        .iter()
        .map(|r| {
            if !r.converged {
                return Ok(-1);
            }
            for (i, c) in clusters.iter().enumerate() {
                if phase_error(&r.retrieved_theta, &c.representative)? < tolerance {
                    return Ok(i as i64);
                }
            }
            Ok(-1)
        })
        .collect()
}

pub fn write_runs_csv(
    path: &Path,
    results: &[GsResult],
    master_seed: u64,
    cluster_ids: &[i64],
    truth: &PhaseVector,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record([
        "run_id",
        "seed",
        "converged",
        "iterations",
        "final_fourier_error",
        "final_phase_error",
        "cluster_id",
        "ambiguity_class",
    ])?;
    for (i, result) in results.iter().enumerate() {
        let ambiguity =
            classify_ambiguity(&result.retrieved_theta, truth, CORRECT_PHASE_THRESHOLD)?;
        writer.write_record([
            i.to_string(),
            (master_seed ^ i as u64).to_string(),
            result.converged.to_string(),
            result.iterations.to_string(),
            format!("{}", result.final_fourier_error()),
            format!("{}", result.final_phase_error().unwrap_or(f64::NAN)),
            cluster_ids[i].to_string(),
            ambiguity.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, sweep: &SensitivitySweep) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record([
        "n_total",
        "q_mean_err",
        "q_std_err",
        "cl_mean_err_correct",
        "cl_success_frac",
        "cl_min_bound",
    ])?;
    for row in &sweep.rows {
        writer.write_record([
            row.n_total.to_string(),
            format!("{}", row.q_mean_err),
            format!("{}", row.q_std_err),
            format!("{}", row.cl_mean_err_correct),
            format!("{}", row.cl_success_frac),
            format!("{}", row.cl_min_bound),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
