//! The N-photon, m-mode Fock space: configuration enumeration, indexing,
//! and normalized state vectors.
//!
//! A basis over `m` modes at fixed total photon number `N` holds
//! `D = C(N+m-1, N)` occupation configurations, listed in descending
//! lexicographic order so that serialized results are reproducible.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Hard ceiling on the basis dimension D; guards against runaway
/// enumeration far beyond desk scale.
pub const MAX_BASIS_DIM: u128 = 1_000_000;

/// Tolerance on `sum |alpha_k|^2 - 1` accepted by [`QuantumState::new`].
pub const STATE_NORM_TOL: f64 = 1e-12;

/// Photon occupation numbers of a single Fock configuration, one entry
/// per mode.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FockConfig(Vec<u32>);

impl FockConfig {
    pub fn new(occupations: Vec<u32>) -> Self {
        Self(occupations)
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn mode_count(&self) -> usize {
        self.0.len()
    }

    /// Total photon number carried by this configuration.
    pub fn total_photons(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl fmt::Debug for FockConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{:?}>", self.0)
    }
}

impl From<Vec<u32>> for FockConfig {
    fn from(occupations: Vec<u32>) -> Self {
        Self(occupations)
    }
}

/// Ordered enumeration of all configurations of `N` photons in `m` modes.
#[derive(Debug)]
pub struct FockBasis {
    m: usize,
    n: u32,
    configs: Vec<FockConfig>,
    index: HashMap<FockConfig, usize>,
}

impl FockBasis {
    /// Enumerate all weak compositions of `n` photons into `m` modes, in
    /// descending lexicographic order on the occupation vector.
    pub fn enumerate(m: usize, n: u32) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::EmptyBasis);
        }
        let dim = Self::dimension(m, n)?;
        let mut configs = Vec::with_capacity(dim);
        let mut prefix = Vec::with_capacity(m);
        fill_descending(&mut prefix, n, m, &mut configs);
        debug_assert_eq!(configs.len(), dim);
        let index = configs
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Ok(Self { m, n, configs, index })
    }

    /// The basis dimension `D = C(n+m-1, n)`, with overflow-checked
    /// arithmetic and the [`MAX_BASIS_DIM`] guard applied.
    pub fn dimension(m: usize, n: u32) -> Result<usize> {
        if m == 0 || n == 0 {
            return Err(Error::EmptyBasis);
        }
        let dim = binomial(n as u128 + m as u128 - 1, n as u128).ok_or(Error::BasisTooLarge {
            dim: u128::MAX,
            limit: MAX_BASIS_DIM,
        })?;
        if dim > MAX_BASIS_DIM {
            return Err(Error::BasisTooLarge { dim, limit: MAX_BASIS_DIM });
        }
        Ok(dim as usize)
    }

    pub fn mode_count(&self) -> usize {
        self.m
    }

    pub fn photon_count(&self) -> u32 {
        self.n
    }

    /// Number of configurations `D`.
    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[FockConfig] {
        &self.configs
    }

    pub fn config(&self, index: usize) -> &FockConfig {
        &self.configs[index]
    }

    /// Position of `config` in the canonical ordering; inverse of
    /// positional lookup.
    pub fn index_of(&self, config: &FockConfig) -> Result<usize> {
        if config.mode_count() != self.m || config.total_photons() != self.n {
            return Err(Error::ConfigNotInBasis(config.occupations().to_vec()));
        }
        // Every well-formed config is a weak composition, so it is present.
        Ok(self.index[config])
    }

    /// Two bases are interchangeable iff they share mode and photon counts;
    /// the enumeration is then identical.
    pub fn same_space(&self, other: &FockBasis) -> bool {
        self.m == other.m && self.n == other.n
    }
}

fn fill_descending(prefix: &mut Vec<u32>, remaining: u32, modes_left: usize, out: &mut Vec<FockConfig>) {
    if modes_left == 1 {
        prefix.push(remaining);
        out.push(FockConfig::new(prefix.clone()));
        prefix.pop();
        return;
    }
    for v in (0..=remaining).rev() {
        prefix.push(v);
        fill_descending(prefix, remaining - v, modes_left - 1, out);
        prefix.pop();
    }
}

/// C(n, k) in u128, `None` on overflow.
fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// A pure N-photon state: complex amplitudes over a shared [`FockBasis`],
/// normalized to unit total probability.
#[derive(Clone, Debug)]
pub struct QuantumState {
    basis: Arc<FockBasis>,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// Wrap an amplitude vector, enforcing length and normalization
    /// (within [`STATE_NORM_TOL`]).
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: amplitudes.len() });
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::NotNormalized((norm_sqr - 1.0).abs()));
        }
        Ok(Self { basis, amplitudes })
    }

    /// Build from sparse `(config, amplitude)` terms and rescale to unit
    /// norm. Terms on the same config accumulate.
    pub fn from_terms(basis: Arc<FockBasis>, terms: &[(FockConfig, Complex64)]) -> Result<Self> {
        let mut amplitudes = vec![Complex64::ZERO; basis.dim()];
        for (config, amp) in terms {
            let idx = basis.index_of(config)?;
            amplitudes[idx] += amp;
        }
        Self::normalized(basis, amplitudes)
    }

    /// Build from `[re, im]` pairs in canonical basis order, rescaling to
    /// unit norm; the format used by serialized states and configs.
    pub fn from_amplitude_pairs(m: usize, n: u32, pairs: &[[f64; 2]]) -> Result<Self> {
        let basis = Arc::new(FockBasis::enumerate(m, n)?);
        let amplitudes = pairs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        Self::normalized(basis, amplitudes)
    }

    /// Rescale an arbitrary nonzero amplitude vector to unit norm.
    pub fn normalized(basis: Arc<FockBasis>, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: amplitudes.len() });
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sqr <= 0.0 || !norm_sqr.is_finite() {
            return Err(Error::NotNormalized(1.0));
        }
        let scale = norm_sqr.sqrt().recip();
        for a in &mut amplitudes {
            *a *= scale;
        }
        Ok(Self { basis, amplitudes })
    }

    /// Internal constructor for transform outputs; skips the norm check so
    /// that unitarity tests observe the amplitudes exactly as computed.
    pub(crate) fn from_raw(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), basis.dim());
        Self { basis, amplitudes }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Detection probabilities `|alpha_k|^2` in basis order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Per-mode average photon number `<n_x> = sum_k |alpha_k|^2 n_x^(k)`;
    /// the entries sum to the total photon number.
    pub fn mean_occupation(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.basis.mode_count()];
        for (config, amp) in self.basis.configs().iter().zip(&self.amplitudes) {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (acc, &occ) in mean.iter_mut().zip(config.occupations()) {
                *acc += p * occ as f64;
            }
        }
        mean
    }

    /// Indices of configurations with exactly nonzero amplitude.
    pub fn support(&self) -> Vec<usize> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    m: usize,
    #[serde(rename = "N")]
    n: u32,
    amplitudes: Vec<[f64; 2]>,
}

impl Serialize for QuantumState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson {
            m: self.basis.mode_count(),
            n: self.basis.photon_count(),
            amplitudes: self.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuantumState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = StateJson::deserialize(deserializer)?;
        let basis = FockBasis::enumerate(raw.m, raw.n).map_err(D::Error::custom)?;
        let amplitudes = raw.amplitudes.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        QuantumState::new(Arc::new(basis), amplitudes).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(m: usize, n: u32) -> Arc<FockBasis> {
        Arc::new(FockBasis::enumerate(m, n).unwrap())
    }

    /// Independent enumeration: filter the full product space.
    fn brute_force_compositions(m: usize, n: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        for _ in 0..m {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=n).map(move |v| {
                        let mut next = prefix.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        out.retain(|c| c.iter().sum::<u32>() == n);
        out
    }

    fn factorial(n: u128) -> u128 {
        (1..=n).product()
    }

    #[test]
    fn basis_m6_n2_has_21_configs() {
        assert_eq!(basis(6, 2).dim(), 21);
    }

    #[test]
    fn single_mode_holds_all_photons() {
        let b = basis(1, 5);
        assert_eq!(b.dim(), 1);
        assert_eq!(b.config(0).occupations(), &[5]);
    }

    #[test]
    fn m3_n2_canonical_order() {
        let b = basis(3, 2);
        let expected: Vec<Vec<u32>> = vec![
            vec![2, 0, 0],
            vec![1, 1, 0],
            vec![1, 0, 1],
            vec![0, 2, 0],
            vec![0, 1, 1],
            vec![0, 0, 2],
        ];
        let got: Vec<Vec<u32>> =
            b.configs().iter().map(|c| c.occupations().to_vec()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn dimension_matches_binomial_for_small_spaces() {
        for m in 1..=8usize {
            for n in 1..=4u32 {
                let b = basis(m, n);
                let expected = factorial((n as u128) + (m as u128) - 1)
                    / (factorial(n as u128) * factorial(m as u128 - 1));
                assert_eq!(b.dim() as u128, expected, "m={m} n={n}");
                // And against a fully independent enumeration.
                assert_eq!(b.dim(), brute_force_compositions(m, n).len());
            }
        }
    }

    #[test]
    fn empty_basis_rejected() {
        assert!(matches!(FockBasis::enumerate(0, 2), Err(Error::EmptyBasis)));
        assert!(matches!(FockBasis::enumerate(3, 0), Err(Error::EmptyBasis)));
    }

    #[test]
    fn dimension_guard_rejects_huge_spaces() {
        assert!(matches!(
            FockBasis::dimension(100, 30),
            Err(Error::BasisTooLarge { .. })
        ));
    }

    #[test]
    fn index_of_first_config_is_zero() {
        let b = basis(6, 2);
        assert_eq!(b.index_of(&FockConfig::new(vec![2, 0, 0, 0, 0, 0])).unwrap(), 0);
    }

    #[test]
    fn index_of_roundtrips_on_every_config() {
        for (m, n) in [(6usize, 2u32), (4, 3), (8, 4)] {
            let b = basis(m, n);
            for i in 0..b.dim() {
                assert_eq!(b.index_of(b.config(i)).unwrap(), i);
            }
        }
    }

    #[test]
    fn index_of_rejects_wrong_photon_number() {
        let b = basis(6, 2);
        let too_many = FockConfig::new(vec![2, 1, 0, 0, 0, 0]);
        assert!(matches!(b.index_of(&too_many), Err(Error::ConfigNotInBasis(_))));
        let too_few = FockConfig::new(vec![1, 0, 0, 0, 0, 0]);
        assert!(b.index_of(&too_few).is_err());
    }

    #[test]
    fn single_config_state_mean_occupation() {
        let b = basis(4, 2);
        let state = QuantumState::from_terms(
            b.clone(),
            &[(FockConfig::new(vec![2, 0, 0, 0]), Complex64::ONE)],
        )
        .unwrap();
        assert_eq!(state.mean_occupation(), vec![2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_normalized_amplitudes_rejected() {
        let b = basis(3, 2);
        let amps = vec![Complex64::new(0.5, 0.0); 6];
        assert!(matches!(
            QuantumState::new(b, amps),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn state_json_roundtrip() {
        let b = basis(3, 2);
        let state = QuantumState::from_terms(
            b,
            &[
                (FockConfig::new(vec![1, 1, 0]), Complex64::new(1.0, 0.0)),
                (FockConfig::new(vec![0, 1, 1]), Complex64::new(0.0, 1.0)),
            ],
        )
        .unwrap();
        let json = serde_json::to_string(&state).unwrap();
        assert!(json.contains("\"m\":3"));
        assert!(json.contains("\"N\":2"));
        let back: QuantumState = serde_json::from_str(&json).unwrap();
        assert_eq!(back.amplitudes(), state.amplitudes());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mean_occupation_sums_to_photon_number(
                seed_values in proptest::collection::vec(-1.0f64..1.0, 12),
            ) {
                let b = basis(3, 2);
                let amps: Vec<Complex64> = seed_values
                    .chunks(2)
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect();
                prop_assume!(amps.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-6);
                let state = QuantumState::normalized(b, amps).unwrap();
                let mean = state.mean_occupation();
                prop_assert!(mean.iter().all(|&v| v >= 0.0));
                let total: f64 = mean.iter().sum();
                prop_assert!((total - 2.0).abs() < 1e-12);
            }
        }
    }
}
