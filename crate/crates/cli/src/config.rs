//! Experiment configuration file: one JSON object per subcommand plus the
//! shared system block.

use serde::{Deserialize, Serialize};

use aoi_core::{DiscreteDist, StoppingPolicy, SystemParams, TransmissionModel};

use crate::CliError;

pub const DEFAULT_LAMBDA_GRID: &[f64] = &[0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
pub const DEFAULT_VAR_T_GRID: &[f64] = &[0.0, 1.0, 10.0, 50.0, 100.0, 200.0];
pub const DEFAULT_THETA_GRID: &[f64] = &[1.0, 5.0, 10.0, 20.0, 30.0, 50.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve_peak: Option<SolvePeakSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_sweep: Option<VarianceSweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_sweep: Option<AvgSweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub lambda: f64,
    pub sensing: SensingSpec,
    pub transmission: TransmissionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSpec {
    /// `[value, probability]` pairs.
    pub atoms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionSpec {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolvePeakSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceSweepSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    VarT,
    Theta,
}

impl SweepAxis {
    pub fn column(&self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::VarT => "var_t",
            SweepAxis::Theta => "theta",
        }
    }

    pub fn default_grid(&self) -> &'static [f64] {
        match self {
            SweepAxis::Lambda => DEFAULT_LAMBDA_GRID,
            SweepAxis::VarT => DEFAULT_VAR_T_GRID,
            SweepAxis::Theta => DEFAULT_THETA_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvgSweepSpec {
    pub axis: SweepAxis,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// Largest forced wait explored by the optimizer (integers from 0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_wait: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    pub policy: PolicySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    NoThreshold,
    AgeThreshold { w_th: f64 },
    Hybrid { n_w: f64, w_th: f64 },
    Pod { n_w: f64, w_pod: f64 },
}

impl PolicySpec {
    pub fn to_policy(&self) -> StoppingPolicy {
        match *self {
            PolicySpec::NoThreshold => StoppingPolicy::NoThresholdZeroWait,
            PolicySpec::AgeThreshold { w_th } => StoppingPolicy::AgeThreshold { threshold: w_th },
            PolicySpec::Hybrid { n_w, w_th } => StoppingPolicy::Hybrid {
                wait: n_w,
                threshold: w_th,
            },
            PolicySpec::Pod { n_w, w_pod } => StoppingPolicy::Pod {
                wait: n_w,
                outage_threshold: w_pod,
            },
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            PolicySpec::NoThreshold => "no-threshold".to_string(),
            PolicySpec::AgeThreshold { w_th } => format!("age-threshold(w_th={w_th})"),
            PolicySpec::Hybrid { n_w, w_th } => format!("hybrid(n_w={n_w};w_th={w_th})"),
            PolicySpec::Pod { n_w, w_pod } => format!("pod(n_w={n_w};w_pod={w_pod})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub policy: PolicySpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_departures: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_batches: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discard_first_cycles: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    pub policies: Vec<PolicySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_departures: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }
}

impl SystemSpec {
    pub fn to_params(&self) -> Result<SystemParams, CliError> {
        let sensing = DiscreteDist::new(self.sensing.atoms.clone())
            .map_err(|e| CliError::Config(format!("system.sensing: {e}")))?;
        let transmission = TransmissionModel::new(self.transmission.mean, self.transmission.variance)
            .map_err(|e| CliError::Config(format!("system.transmission: {e}")))?;
        SystemParams::new(self.lambda, sensing, transmission)
            .map_err(|e| CliError::Config(format!("system: {e}")))
    }

    /// Same sensing and transmission model at a different energy rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<SystemParams, CliError> {
        let mut spec = self.clone();
        spec.lambda = lambda;
        spec.to_params()
    }

    pub fn with_var_t(&self, var_t: f64) -> Result<SystemParams, CliError> {
        let mut spec = self.clone();
        spec.transmission.variance = var_t;
        spec.to_params()
    }

    /// The fixed-mean variance parameterization of the sensing time:
    /// `m1 = 1`, `m2 = 10 + theta`, `p2 = 4 / (9 + theta)` keeps `E[C] = 5`.
    pub fn with_theta(&self, theta: f64) -> Result<SystemParams, CliError> {
        if theta.is_nan() || theta <= 0.0 {
            return Err(CliError::Config(format!(
                "theta grid values must be positive, got {theta}"
            )));
        }
        let p2 = 4.0 / (9.0 + theta);
        let mut spec = self.clone();
        spec.sensing.atoms = vec![(1.0, 1.0 - p2), (10.0 + theta, p2)];
        spec.to_params()
    }
}
