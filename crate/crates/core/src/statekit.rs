//! Ready-made input states and executable uniqueness checks.
//!
//! Retrieval is unique only if the input state (a) has a mean-occupation
//! profile with no translation or reflection symmetry across the mode
//! axis, and (b) supports a designated m-config subset whose gauge-reduced
//! occupation matrix is unimodular, so configuration phases invert exactly
//! to mode phases. [`validate_state`] checks both and hands back the
//! extractor when they hold.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockConfig, QuantumState};
use crate::retrieval::{ClassicalField, PhaseExtractor};

/// Mean-occupation profiles closer than this are treated as symmetric.
const SYMMETRY_TOL: f64 = 1e-9;

/// Cap on the number of candidate subsets scanned for an extractor.
const SUBSET_SEARCH_LIMIT: usize = 200_000;

/// Outcome of the uniqueness checks for an input state.
#[derive(Clone, Debug, Serialize)]
pub struct StateReport {
    pub translation_symmetric: bool,
    pub reflection_symmetric: bool,
    /// Present iff both symmetry flags are false and a unimodular subset
    /// exists.
    pub extractor: Option<PhaseExtractor>,
    pub failure_reason: Option<String>,
}

impl StateReport {
    pub fn is_valid(&self) -> bool {
        self.extractor.is_some()
    }
}

/// The six-mode, two-photon input state used throughout the numerical
/// experiments: equal amplitudes `1/sqrt(6)` on six of the 21
/// configurations, chosen so both uniqueness conditions hold.
pub fn psi6() -> QuantumState {
    generalized_state(6).expect("the six-mode pattern satisfies both uniqueness conditions")
}

/// The m-mode generalization of the two-photon pattern: `m` equal-amplitude
/// terms `(2,0,...)`, `(1,1,0,...)`, then a second photon walking through
/// modes 3..m-1 alongside mode 1, closing with `(0,1,0,...,0,1)`.
///
/// Construction fails loudly if the pattern does not pass
/// [`validate_state`] for the requested `m`.
pub fn generalized_state(m: usize) -> Result<QuantumState> {
    if m < 6 {
        return Err(Error::InvalidState(format!(
            "the generalized pattern needs at least 6 modes, got {m}"
        )));
    }
    let basis = Arc::new(FockBasis::enumerate(m, 2)?);
    let mut terms: Vec<(FockConfig, Complex64)> = Vec::with_capacity(m);
    let mut occ = vec![0u32; m];
    occ[0] = 2;
    terms.push((FockConfig::new(occ), Complex64::ONE));
    for x in 1..m - 1 {
        let mut occ = vec![0u32; m];
        occ[0] = 1;
        occ[x] = 1;
        terms.push((FockConfig::new(occ), Complex64::ONE));
    }
    let mut closing = vec![0u32; m];
    closing[1] = 1;
    closing[m - 1] = 1;
    terms.push((FockConfig::new(closing), Complex64::ONE));

    let state = QuantumState::from_terms(basis, &terms)?;
    let report = validate_state(&state);
    if !report.is_valid() {
        return Err(Error::InvalidState(format!(
            "generalized pattern fails uniqueness checks for m={m}: {}",
            report.failure_reason.unwrap_or_else(|| "unknown".into())
        )));
    }
    Ok(state)
}

/// Run both uniqueness checks on a normalized state.
pub fn validate_state(state: &QuantumState) -> StateReport {
    let profile = state.mean_occupation();
    let translation_symmetric = has_translation_symmetry(&profile);
    let reflection_symmetric = has_reflection_symmetry(&profile);
    if translation_symmetric || reflection_symmetric {
        let mut reasons = Vec::new();
        if translation_symmetric {
            reasons.push("mean occupations are invariant under a cyclic shift");
        }
        if reflection_symmetric {
            reasons.push("mean occupations are invariant under a mirror reflection");
        }
        return StateReport {
            translation_symmetric,
            reflection_symmetric,
            extractor: None,
            failure_reason: Some(reasons.join("; ")),
        };
    }
    match find_extractor(state) {
        Ok(extractor) => StateReport {
            translation_symmetric,
            reflection_symmetric,
            extractor: Some(extractor),
            failure_reason: None,
        },
        Err(reason) => StateReport {
            translation_symmetric,
            reflection_symmetric,
            extractor: None,
            failure_reason: Some(reason),
        },
    }
}

fn profiles_match(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < SYMMETRY_TOL)
}

fn has_translation_symmetry(profile: &[f64]) -> bool {
    let m = profile.len();
    (1..m).any(|s| {
        let shifted: Vec<f64> = (0..m).map(|x| profile[(x + s) % m]).collect();
        profiles_match(profile, &shifted)
    })
}

/// Any mirror axis counts: reversal composed with every cyclic shift.
fn has_reflection_symmetry(profile: &[f64]) -> bool {
    let m = profile.len();
    (0..m).any(|s| {
        let mirrored: Vec<f64> = (0..m).map(|x| profile[(m - x + s) % m]).collect();
        profiles_match(profile, &mirrored)
    })
}

/// Deterministic scan over support-config subsets in canonical order,
/// accepting the first whose gauge-reduced matrix is unimodular.
fn find_extractor(state: &QuantumState) -> std::result::Result<PhaseExtractor, String> {
    let basis = state.basis();
    let m = basis.mode_count();
    let support = state.support();
    if support.len() < m {
        return Err(format!(
            "support has {} configs but at least {m} nonzero amplitudes are required",
            support.len()
        ));
    }
    let mut scanned = 0usize;
    let mut selector: Vec<usize> = (0..m).collect();
    loop {
        scanned += 1;
        if scanned > SUBSET_SEARCH_LIMIT {
            return Err(format!("no unimodular subset found within {SUBSET_SEARCH_LIMIT} candidates"));
        }
        let subset: Vec<usize> = selector.iter().map(|&i| support[i]).collect();
        if let Ok(extractor) = PhaseExtractor::from_subset(basis, subset) {
            return Ok(extractor);
        }
        if !advance_combination(&mut selector, support.len()) {
            return Err("no support subset has a unimodular gauge-reduced matrix".into());
        }
    }
}

/// Next m-combination of `0..n` in lexicographic order; `false` when done.
fn advance_combination(selector: &mut [usize], n: usize) -> bool {
    let m = selector.len();
    let mut i = m;
    while i > 0 {
        i -= 1;
        if selector[i] < n - (m - i) {
            selector[i] += 1;
            for j in i + 1..m {
                selector[j] = selector[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The coherent field whose intensity profile matches the state's mean
/// occupations: `E_x = sqrt(m <n_x>)`, so the total intensity equals
/// `m N` (for the six-mode state, `{sqrt 6, sqrt 2, 1, 1, 1, 1}`).
pub fn matched_classical_field(state: &QuantumState) -> ClassicalField {
    let m = state.basis().mode_count() as f64;
    let amplitudes: Vec<Complex64> = state
        .mean_occupation()
        .iter()
        .map(|&occ| Complex64::new((m * occ).sqrt(), 0.0))
        .collect();
    ClassicalField::new(amplitudes).expect("a normalized state has nonzero mean occupation")
}
