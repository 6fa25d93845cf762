//! Phase-object and multiport optics.
//!
//! A phase object multiplies each configuration amplitude by
//! `exp(i theta . n)`; a general linear-optical multiport acts on the
//! N-photon space through matrix permanents of row/column-repeated
//! submatrices of its m x m mode unitary. The DFT multiport models
//! far-field diffraction.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockConfig, QuantumState};

/// Elementwise tolerance on `U U^dagger - I` accepted as unitary.
pub const UNITARY_TOL: f64 = 1e-12;

/// Reduce an angle to `[0, 2pi)`.
pub fn wrap_to_tau(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Per-mode phases in radians, pinned to the gauge `theta_1 = 0` and
/// reduced to `[0, 2pi)`.
///
/// A uniform shift of all mode phases only changes the global phase of an
/// N-photon state, so retrieved phases are always reported in this gauge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhaseVector {
    thetas: Vec<f64>,
}

impl PhaseVector {
    /// Accept a vector already in gauge (`thetas[0] == 0`), wrapping the
    /// remaining entries to `[0, 2pi)`.
    pub fn try_new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::EmptyBasis);
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite);
        }
        if thetas[0] != 0.0 {
            return Err(Error::GaugeViolation(thetas[0]));
        }
        let mut wrapped: Vec<f64> = thetas.iter().map(|&t| wrap_to_tau(t)).collect();
        wrapped[0] = 0.0;
        Ok(Self { thetas: wrapped })
    }

    /// Re-gauge an arbitrary phase vector: subtract the first entry from
    /// every mode, then wrap to `[0, 2pi)`.
    pub fn gauged(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyBasis);
        }
        if raw.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite);
        }
        let first = raw[0];
        let mut thetas: Vec<f64> = raw.iter().map(|&t| wrap_to_tau(t - first)).collect();
        thetas[0] = 0.0;
        Ok(Self { thetas })
    }

    pub fn zeros(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyBasis);
        }
        Ok(Self { thetas: vec![0.0; m] })
    }

    /// Random initialization: `theta_1 = 0`, the rest i.i.d. uniform on
    /// `[0, 2pi)`.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyBasis);
        }
        let mut thetas = vec![0.0];
        for _ in 1..m {
            thetas.push(rng.random_range(0.0..TAU));
        }
        Ok(Self { thetas })
    }

    /// As [`PhaseVector::random`] but drawing from a fresh seeded
    /// generator.
    pub fn random_from_seed(m: usize, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Self::random(m, &mut rng)
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn mode_count(&self) -> usize {
        self.thetas.len()
    }

    /// The object translated by `shift` modes (cyclically), re-gauged.
    pub fn cyclic_shift(&self, shift: usize) -> PhaseVector {
        let m = self.thetas.len();
        let raw: Vec<f64> = (0..m).map(|x| self.thetas[(x + m - shift % m) % m]).collect();
        PhaseVector::gauged(&raw).expect("shift of a finite vector is finite")
    }

    /// The mirror object: mode order reversed and phases negated
    /// (conjugate image), re-gauged.
    pub fn reflected(&self) -> PhaseVector {
        let raw: Vec<f64> = self.thetas.iter().rev().map(|&t| -t).collect();
        PhaseVector::gauged(&raw).expect("reflection of a finite vector is finite")
    }
}

impl TryFrom<Vec<f64>> for PhaseVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::try_new(v)
    }
}

impl From<PhaseVector> for Vec<f64> {
    fn from(p: PhaseVector) -> Self {
        p.thetas
    }
}

/// Dense m x m complex matrix, validated unitary on construction.
#[derive(Clone, Debug)]
pub struct UnitaryMatrix {
    m: usize,
    entries: Vec<Complex64>,
}

impl UnitaryMatrix {
    /// Wrap row-major entries, rejecting matrices whose `U U^dagger`
    /// deviates from the identity by more than [`UNITARY_TOL`].
    pub fn try_new(m: usize, entries: Vec<Complex64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyBasis);
        }
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch { expected: m * m, got: entries.len() });
        }
        let u = Self { m, entries };
        let defect = u.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(u)
    }

    /// The discrete Fourier transform multiport:
    /// `U[x][y] = exp(i 2 pi x y / m) / sqrt(m)` (zero-based indices).
    pub fn dft(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyBasis);
        }
        let scale = (m as f64).sqrt().recip();
        let mut entries = Vec::with_capacity(m * m);
        for x in 0..m {
            for y in 0..m {
                // Reduce the phase index mod m before multiplying to keep
                // entries exactly conjugate-symmetric at large m.
                let idx = (x * y) % m;
                let angle = TAU * idx as f64 / m as f64;
                entries.push(Complex64::cis(angle) * scale);
            }
        }
        Ok(Self { m, entries })
    }

    pub fn identity(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyBasis);
        }
        let mut entries = vec![Complex64::ZERO; m * m];
        for x in 0..m {
            entries[x * m + x] = Complex64::ONE;
        }
        Ok(Self { m, entries })
    }

    /// Haar-like random unitary via complex Gaussians and repeated
    /// Gram-Schmidt; intended for tests.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyBasis);
        }
        let mut rows: Vec<Vec<Complex64>> = (0..m)
            .map(|_| (0..m).map(|_| gaussian(rng)).collect())
            .collect();
        // Two orthogonalization passes keep the defect near machine epsilon.
        for _ in 0..2 {
            for i in 0..m {
                for j in 0..i {
                    let proj: Complex64 = rows[i]
                        .iter()
                        .zip(&rows[j])
                        .map(|(a, b)| a * b.conj())
                        .sum();
                    for y in 0..m {
                        let bj = rows[j][y];
                        rows[i][y] -= proj * bj;
                    }
                }
                let norm: f64 = rows[i].iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                for v in &mut rows[i] {
                    *v /= norm;
                }
            }
        }
        Self::try_new(m, rows.concat())
    }

    pub fn mode_count(&self) -> usize {
        self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.m + col]
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> UnitaryMatrix {
        let mut entries = Vec::with_capacity(self.m * self.m);
        for x in 0..self.m {
            for y in 0..self.m {
                entries.push(self.entry(y, x).conj());
            }
        }
        Self { m: self.m, entries }
    }

    /// Apply to a classical m-component field.
    pub fn apply(&self, field: &[Complex64]) -> Result<Vec<Complex64>> {
        if field.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: field.len() });
        }
        Ok((0..self.m)
            .map(|x| {
                (0..self.m)
                    .map(|y| self.entry(x, y) * field[y])
                    .sum()
            })
            .collect())
    }

    /// Max-norm of `U U^dagger - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.m {
            for y in 0..self.m {
                let dot: Complex64 = (0..self.m)
                    .map(|k| self.entry(x, k) * self.entry(y, k).conj())
                    .sum();
                let target = if x == y { Complex64::ONE } else { Complex64::ZERO };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }
}

// Serialized form: a flat row-major list of [re, im] pairs; the mode
// count is the square root of the length.
impl Serialize for UnitaryMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.entries.iter().map(|a| [a.re, a.im]))
    }
}

impl<'de> Deserialize<'de> for UnitaryMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        let m = (pairs.len() as f64).sqrt().round() as usize;
        if m * m != pairs.len() {
            return Err(D::Error::custom(format!(
                "{} entries do not form a square matrix",
                pairs.len()
            )));
        }
        let entries = pairs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        UnitaryMatrix::try_new(m, entries).map_err(D::Error::custom)
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    // Box-Muller; u1 in (0, 1] avoids ln(0).
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    Complex64::from_polar(r, TAU * u2)
}

/// Imprint the phase object: amplitude `k` picks up
/// `exp(i sum_x theta_x n_x^(k))`. Magnitudes are untouched.
pub fn apply_phase_object(state: &QuantumState, theta: &PhaseVector) -> Result<QuantumState> {
    apply_mode_phases(state, theta.thetas())
}

/// As [`apply_phase_object`] but for raw (not gauge-fixed) phases.
pub fn apply_mode_phases(state: &QuantumState, thetas: &[f64]) -> Result<QuantumState> {
    let basis = state.basis();
    if thetas.len() != basis.mode_count() {
        return Err(Error::DimensionMismatch { expected: basis.mode_count(), got: thetas.len() });
    }
    let amplitudes = basis
        .configs()
        .iter()
        .zip(state.amplitudes())
        .map(|(config, &alpha)| {
            let phase: f64 = config
                .occupations()
                .iter()
                .zip(thetas)
                .map(|(&n, &t)| n as f64 * t)
                .sum();
            alpha * Complex64::cis(phase)
        })
        .collect();
    Ok(QuantumState::from_raw(basis.clone(), amplitudes))
}

/// Exact matrix permanent by Ryser's formula with Gray-code column-sum
/// updates, `O(2^n n)`.
pub fn permanent(matrix: &[Vec<Complex64>]) -> Result<Complex64> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|row| row.len() != n) {
        return Err(Error::NotSquare);
    }
    if n > 30 {
        return Err(Error::PermanentTooLarge(n));
    }
    if n == 1 {
        return Ok(matrix[0][0]);
    }
    let mut row_sums = vec![Complex64::ZERO; n];
    let mut total = Complex64::ZERO;
    let mut gray: u64 = 0;
    for sub in 1u64..(1u64 << n) {
        let next = sub ^ (sub >> 1);
        let flipped = gray ^ next;
        let j = flipped.trailing_zeros() as usize;
        if next & flipped != 0 {
            for (sum, row) in row_sums.iter_mut().zip(matrix) {
                *sum += row[j];
            }
        } else {
            for (sum, row) in row_sums.iter_mut().zip(matrix) {
                *sum -= row[j];
            }
        }
        gray = next;
        let product: Complex64 = row_sums.iter().product();
        // Ryser sign (-1)^(n - |S|).
        if (n as u32 - next.count_ones()) % 2 == 0 {
            total += product;
        } else {
            total -= product;
        }
    }
    Ok(total)
}

/// The N x N submatrix `V` of `U` for a transition `config_in -> config_out`:
/// row `x` of `U` repeated `n_x` (input) times, then column `y` of the
/// result repeated `n_y` (output) times.
pub fn build_submatrix(
    u: &UnitaryMatrix,
    config_in: &FockConfig,
    config_out: &FockConfig,
) -> Result<Vec<Vec<Complex64>>> {
    if config_in.mode_count() != u.mode_count() || config_out.mode_count() != u.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: u.mode_count(),
            got: config_in.mode_count().max(config_out.mode_count()),
        });
    }
    if config_in.total_photons() != config_out.total_photons() {
        return Err(Error::PhotonNumberMismatch);
    }
    let rows = repeated_indices(config_in);
    let cols = repeated_indices(config_out);
    Ok(rows
        .iter()
        .map(|&x| cols.iter().map(|&y| u.entry(x, y)).collect())
        .collect())
}

fn repeated_indices(config: &FockConfig) -> Vec<usize> {
    let mut ids = Vec::with_capacity(config.total_photons() as usize);
    for (x, &occ) in config.occupations().iter().enumerate() {
        for _ in 0..occ {
            ids.push(x);
        }
    }
    ids
}

fn sqrt_factorial_product(config: &FockConfig) -> f64 {
    config
        .occupations()
        .iter()
        .map(|&n| (1..=n as u64).product::<u64>() as f64)
        .product::<f64>()
        .sqrt()
}

/// The N-photon lift of a mode unitary over a fixed basis, cached as a
/// dense D x D matrix pair (forward and inverse).
///
/// Building the pair costs `O(D^2 2^N N)` permanents once; every
/// subsequent transform is a D x D matrix-vector product, which is what
/// the iterative retrieval loop needs.
#[derive(Clone, Debug)]
pub struct MultiphotonTransform {
    basis: Arc<FockBasis>,
    forward: Vec<Complex64>,
    inverse: Vec<Complex64>,
}

impl MultiphotonTransform {
    pub fn new(basis: Arc<FockBasis>, u: &UnitaryMatrix) -> Result<Self> {
        if u.mode_count() != basis.mode_count() {
            return Err(Error::DimensionMismatch {
                expected: basis.mode_count(),
                got: u.mode_count(),
            });
        }
        let forward = lift(&basis, u)?;
        let inverse = lift(&basis, &u.dagger())?;
        Ok(Self { basis, forward, inverse })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn forward_amplitudes(&self, amplitudes: &[Complex64]) -> Result<Vec<Complex64>> {
        self.matvec(&self.forward, amplitudes)
    }

    pub fn inverse_amplitudes(&self, amplitudes: &[Complex64]) -> Result<Vec<Complex64>> {
        self.matvec(&self.inverse, amplitudes)
    }

    pub fn forward(&self, state: &QuantumState) -> Result<QuantumState> {
        self.check_state(state)?;
        let amps = self.forward_amplitudes(state.amplitudes())?;
        Ok(QuantumState::from_raw(self.basis.clone(), amps))
    }

    pub fn inverse(&self, state: &QuantumState) -> Result<QuantumState> {
        self.check_state(state)?;
        let amps = self.inverse_amplitudes(state.amplitudes())?;
        Ok(QuantumState::from_raw(self.basis.clone(), amps))
    }

    fn check_state(&self, state: &QuantumState) -> Result<()> {
        if !state.basis().same_space(&self.basis) {
            return Err(Error::DimensionMismatch {
                expected: self.basis.dim(),
                got: state.basis().dim(),
            });
        }
        Ok(())
    }

    fn matvec(&self, columns: &[Complex64], amplitudes: &[Complex64]) -> Result<Vec<Complex64>> {
        let d = self.basis.dim();
        if amplitudes.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: amplitudes.len() });
        }
        let mut out = vec![Complex64::ZERO; d];
        for (k, &alpha) in amplitudes.iter().enumerate() {
            // The sum over input configs skips exactly-zero amplitudes.
            if alpha == Complex64::ZERO {
                continue;
            }
            let column = &columns[k * d..(k + 1) * d];
            for (acc, &w) in out.iter_mut().zip(column) {
                *acc += w * alpha;
            }
        }
        Ok(out)
    }
}

/// Column-major lift: entry `(t, k)` is
/// `Per(V_{k,t}) / sqrt(prod n^(k)! prod n^(t)!)`.
fn lift(basis: &FockBasis, u: &UnitaryMatrix) -> Result<Vec<Complex64>> {
    let d = basis.dim();
    let norms: Vec<f64> = basis.configs().iter().map(sqrt_factorial_product).collect();
    let mut w = vec![Complex64::ZERO; d * d];
    for k in 0..d {
        for t in 0..d {
            let v = build_submatrix(u, basis.config(k), basis.config(t))?;
            w[k * d + t] = permanent(&v)? / (norms[k] * norms[t]);
        }
    }
    Ok(w)
}

/// Transform an N-photon state through a linear multiport (Fock-space
/// amplitudes via permanents).
pub fn multiphoton_transform(state: &QuantumState, u: &UnitaryMatrix) -> Result<QuantumState> {
    MultiphotonTransform::new(state.basis().clone(), u)?.forward(state)
}

/// Transform by `U^dagger`; undoes [`multiphoton_transform`].
pub fn inverse_transform(state: &QuantumState, u: &UnitaryMatrix) -> Result<QuantumState> {
    multiphoton_transform(state, &u.dagger())
}

/// Reference transform computed by expanding the transformed
/// creation-operator polynomial and collecting monomial coefficients.
///
/// Exponential in photon number and mode count; this is the independent
/// oracle the permanent path is checked against, not a production path.
pub fn brute_force_transform(state: &QuantumState, u: &UnitaryMatrix) -> Result<QuantumState> {
    let basis = state.basis();
    let m = basis.mode_count();
    if u.mode_count() != m {
        return Err(Error::DimensionMismatch { expected: m, got: u.mode_count() });
    }
    let mut out = vec![Complex64::ZERO; basis.dim()];
    for (k, &alpha) in state.amplitudes().iter().enumerate() {
        if alpha == Complex64::ZERO {
            continue;
        }
        let config = basis.config(k);
        // prod_x (sum_y U[x][y] a_y^dag)^(n_x), expanded term by term.
        let mut poly: HashMap<Vec<u32>, Complex64> = HashMap::new();
        poly.insert(vec![0; m], Complex64::ONE);
        for (x, &occ) in config.occupations().iter().enumerate() {
            for _ in 0..occ {
                let mut next: HashMap<Vec<u32>, Complex64> = HashMap::new();
                for (exponents, coeff) in &poly {
                    for y in 0..m {
                        let factor = u.entry(x, y);
                        if factor == Complex64::ZERO {
                            continue;
                        }
                        let mut e = exponents.clone();
                        e[y] += 1;
                        *next.entry(e).or_insert(Complex64::ZERO) += coeff * factor;
                    }
                }
                poly = next;
            }
        }
        let in_norm = sqrt_factorial_product(config);
        for (exponents, coeff) in poly {
            let out_config = FockConfig::new(exponents);
            let out_norm = sqrt_factorial_product(&out_config);
            let t = basis.index_of(&out_config)?;
            out[t] += alpha / in_norm * coeff * out_norm;
        }
    }
    Ok(QuantumState::from_raw(basis.clone(), out))
}
