//! Quantum-enhanced phase retrieval of one-dimensional multi-phase objects.
//!
//! The library propagates N-photon Fock states through an unknown phase
//! object and a discrete-Fourier multiport, then retrieves the object
//! phases from output photon-correlation statistics with a generalized
//! Gerchberg-Saxton iteration. A classical-light counterpart, input-state
//! uniqueness validators, and Monte-Carlo shot-noise sensitivity sweeps
//! mirror the retrieval pipeline end to end.
//!
//! Modules:
//! - [`fock`]: configuration enumeration and state vectors;
//! - [`optics`]: phase objects, multiports, permanent-based transforms;
//! - [`retrieval`]: the quantum and classical GS iterations and metrics;
//! - [`statekit`]: ready-made input states and uniqueness checks;
//! - [`noise`]: shot-noise sampling and sensitivity sweeps.

pub mod error;
pub mod fock;
mod intmat;
pub mod noise;
pub mod optics;
pub mod retrieval;
pub mod statekit;

pub use error::{Error, Result};
pub use fock::{FockBasis, FockConfig, QuantumState};
pub use noise::{SensitivitySweep, SweepOptions, SweepRow};
pub use optics::{MultiphotonTransform, PhaseVector, UnitaryMatrix};
pub use retrieval::{
    AmbiguityClass, ClassicalField, GsOptions, GsResult, MeasuredDistribution, PhaseExtractor,
    SolutionCluster,
};
pub use statekit::StateReport;
