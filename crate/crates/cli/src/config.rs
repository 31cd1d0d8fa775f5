//! Run configuration: a JSON document with serde defaults; command-line
//! flags override individual fields.

use lsfm_core::phantom::DatasetParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    pub dataset: DatasetParams,
    pub camera_gain: f64,
    /// Illumination heights per side.
    pub m1: usize,
    /// Detector pixels for measurement sweeps.
    pub m2: usize,
    /// Sigma profile sampling (None: the phantom's height cells).
    pub sigma_samples: Option<usize>,
    /// Depths for the sigma / assemble commands.
    pub s_list: Vec<f64>,
    /// Support radii probed by the conditioning sweep.
    pub radii: Vec<f64>,
    /// Depths probed by the conditioning sweep.
    pub depths: Vec<f64>,
    /// Depth reconstructed by the reconstruct command.
    pub reconstruct_s: f64,
    pub omega: f64,
    pub sweeps: usize,
    pub nonneg: bool,
    /// Photon scale override (None: the dataset's).
    pub photon_scale: Option<f64>,
    pub support_dilation: usize,
    /// Stability suite: support radius and observation times.
    pub stab_r: f64,
    pub stab_times: Vec<f64>,
    pub stab_family: usize,
    /// Diffusion scale for the energy-identity experiment.
    pub stab_energy_c: f64,
    /// Diffusion scale for the curve-ratio experiments.
    pub stab_curve_c: f64,
    pub delta_list: Vec<f64>,
    pub t_prime_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out_dir: "out".into(),
            dataset: DatasetParams::defaults(1),
            camera_gain: 1.0,
            m1: 64,
            m2: 40,
            sigma_samples: None,
            s_list: vec![0.88],
            radii: (0..6).map(|k| 0.55 + 0.05 * k as f64).collect(),
            depths: (0..5).map(|k| 0.66 + 0.075 * k as f64).collect(),
            reconstruct_s: 0.969,
            omega: 1.0,
            sweeps: 500,
            nonneg: true,
            photon_scale: None,
            support_dilation: 0,
            stab_r: 1.0,
            stab_times: vec![0.1, 0.5, 1.0],
            stab_family: 100,
            stab_energy_c: 1.0,
            stab_curve_c: 0.1,
            delta_list: vec![0.05, 0.1, 0.2],
            t_prime_count: 8,
        }
    }
}

impl RunConfig {
    pub fn load(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{path}: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.m1 == 0 {
            return Err(CliError::Config("m1: must be positive".into()));
        }
        if self.s_list.is_empty() {
            return Err(CliError::Config("s_list: must not be empty".into()));
        }
        if self.radii.is_empty() || self.depths.is_empty() {
            return Err(CliError::Config("radii/depths: must not be empty".into()));
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(CliError::Config(format!(
                "omega: {} outside (0, 2)",
                self.omega
            )));
        }
        Ok(())
    }

    /// Canonical serialization used for the config hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Parse a `lo:hi:count` sweep specification.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("sweep '{spec}': expected lo:hi:count")));
    }
    let lo: f64 =
        parts[0].parse().map_err(|e| CliError::Config(format!("sweep '{spec}': {e}")))?;
    let hi: f64 =
        parts[1].parse().map_err(|e| CliError::Config(format!("sweep '{spec}': {e}")))?;
    let n: usize =
        parts[2].parse().map_err(|e| CliError::Config(format!("sweep '{spec}': {e}")))?;
    if n < 1 || (n > 1 && !(hi > lo)) {
        return Err(CliError::Config(format!("sweep '{spec}': empty range")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.canonical_json(), c.canonical_json());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let res: Result<RunConfig, _> = serde_json::from_str(r#"{"not_a_field": 1}"#);
        assert!(res.is_err());
        assert!(format!("{}", res.unwrap_err()).contains("not_a_field"));
    }

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_sweep("2.5:9:1").unwrap(), vec![2.5]);
        assert!(parse_sweep("1:0:5").is_err());
        assert!(parse_sweep("1:2").is_err());
    }
}
