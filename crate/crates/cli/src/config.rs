//! Experiment configuration: a single JSON file per experiment.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qpr_core::optics::PhaseVector;
use qpr_core::retrieval::{DEFAULT_FOURIER_TOLERANCE, DEFAULT_MAX_ITERATIONS};
use qpr_core::statekit::{generalized_state, psi6};
use qpr_core::{GsOptions, QuantumState};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Mode count m.
    pub modes: usize,
    /// Photon number N.
    pub photons: u32,
    /// Input state: "psi6", "generalized", or explicit amplitudes.
    pub state: StateSpec,
    /// Object phases in the theta_1 = 0 gauge; required by `retrieve` and
    /// `sweep-noise`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_obj: Option<Vec<f64>>,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gs: GsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

fn default_runs() -> usize {
    1000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    /// A named builder: "psi6" or "generalized".
    Named(String),
    /// Explicit complex amplitudes in canonical basis order as
    /// `[re, im]` pairs; normalized on load.
    Explicit { amplitudes: Vec<[f64; 2]> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Quantum,
    Classical,
    #[default]
    Both,
}

impl Algorithm {
    pub fn runs_quantum(self) -> bool {
        matches!(self, Algorithm::Quantum | Algorithm::Both)
    }

    pub fn runs_classical(self) -> bool {
        matches!(self, Algorithm::Classical | Algorithm::Both)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GsConfig {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_fourier_tolerance")]
    pub fourier_tolerance: f64,
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

fn default_fourier_tolerance() -> f64 {
    DEFAULT_FOURIER_TOLERANCE
}

impl Default for GsConfig {
    fn default() -> Self {
        Self {
            max_iterations: default_max_iterations(),
            fourier_tolerance: default_fourier_tolerance(),
        }
    }
}

impl GsConfig {
    pub fn to_options(&self) -> GsOptions {
        GsOptions {
            max_iterations: self.max_iterations,
            fourier_tolerance: self.fourier_tolerance,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Total-photon budgets, strictly ascending.
    pub budgets: Vec<u64>,
    pub trials: usize,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 || self.photons == 0 {
            bail!("modes and photons must both be at least 1");
        }
        if let Some(theta) = &self.theta_obj {
            if theta.len() != self.modes {
                bail!("theta_obj has {} entries for {} modes", theta.len(), self.modes);
            }
            if theta[0] != 0.0 {
                bail!("theta_obj[0] must be 0 (gauge convention), got {}", theta[0]);
            }
            if theta.iter().any(|t| !t.is_finite()) {
                bail!("theta_obj entries must be finite");
            }
        }
        if let StateSpec::Named(name) = &self.state {
            if name != "psi6" && name != "generalized" {
                bail!("unknown state builder {name:?}; expected \"psi6\", \"generalized\", or explicit amplitudes");
            }
        }
        if let Some(noise) = &self.noise {
            if noise.budgets.is_empty() || noise.trials == 0 {
                bail!("noise block needs at least one budget and one trial");
            }
            if noise.budgets.windows(2).any(|w| w[0] >= w[1]) {
                bail!("noise budgets must be strictly ascending");
            }
        }
        Ok(())
    }

    /// Instantiate the input state this config describes.
    pub fn build_state(&self) -> Result<QuantumState> {
        match &self.state {
            StateSpec::Named(name) if name == "psi6" => {
                if self.modes != 6 || self.photons != 2 {
                    bail!("the psi6 builder requires modes = 6 and photons = 2");
                }
                Ok(psi6())
            }
            StateSpec::Named(name) if name == "generalized" => {
                if self.photons != 2 {
                    bail!("the generalized builder requires photons = 2");
                }
                Ok(generalized_state(self.modes)?)
            }
            StateSpec::Named(name) => bail!("unknown state builder {name:?}"),
            StateSpec::Explicit { amplitudes } => {
                Ok(QuantumState::from_amplitude_pairs(self.modes, self.photons, amplitudes)?)
            }
        }
    }

    pub fn theta_obj(&self) -> Result<PhaseVector> {
        let theta = self
            .theta_obj
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("this command requires theta_obj in the config"))?;
        Ok(PhaseVector::try_new(theta.clone())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let json = r#"{"modes": 6, "photons": 2, "state": "psi6"}"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        config.validate().unwrap();
        assert_eq!(config.runs, 1000);
        assert_eq!(config.gs.max_iterations, DEFAULT_MAX_ITERATIONS);
        assert!(config.build_state().is_ok());
    }

    #[test]
    fn explicit_state_round_trips() {
        let json = r#"{
            "modes": 2, "photons": 2,
            "state": {"amplitudes": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]},
            "seed": 3
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        let state = config.build_state().unwrap();
        assert_eq!(state.amplitudes()[0].re, 1.0);
        let emitted = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&emitted).unwrap();
        assert_eq!(back.modes, 2);
        assert!(matches!(back.state, StateSpec::Explicit { .. }));
    }

    #[test]
    fn gauge_violation_rejected() {
        let json = r#"{"modes": 6, "photons": 2, "state": "psi6", "theta_obj": [0.1, 0, 0, 0, 0, 0]}"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn unordered_budgets_rejected() {
        let json = r#"{"modes": 6, "photons": 2, "state": "psi6",
                       "noise": {"budgets": [1000, 1000], "trials": 5}}"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert!(config.validate().is_err());
    }
}
