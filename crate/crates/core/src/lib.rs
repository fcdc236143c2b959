//! Analytics and simulation for timely status updating by an intermittently
//! powered node.
//!
//! The node alternates non-preemptive sensing and transmission operations,
//! each powered by a single energy recharge arriving as a Poisson process.
//! After every sensing operation the node observes the candidate packet's
//! age and either transmits it or discards it and senses again. This crate
//! provides:
//!
//! - [`dist`]: sensing/transmission time distributions and the closed-form
//!   density of the candidate age `A = C + I` (a mixture of shifted
//!   exponentials), with exact truncated moments.
//! - [`peak`]: the peak-age-optimal acceptance threshold, found as the
//!   fixed point of the stopping cost, and peak-age evaluation for
//!   arbitrary thresholds.
//! - [`avg`]: average-age evaluation for renewal stopping rules
//!   (no-threshold, age-threshold, hybrid waiting, power-outage
//!   discarding), plus numerical optimization of the rule parameters.
//! - [`sim`]: a renewal-cycle Monte Carlo simulator with batch-means
//!   confidence intervals, used as the independent check on every
//!   analytical quantity.

use std::fmt;

pub mod avg;
pub mod dist;
mod numeric;
pub mod peak;
pub mod sim;

pub use avg::{
    average_aoi, k_criterion, optimize_policy, policy_moments, x_star, PolicyFamily,
    PolicyMoments, SearchSpec, StoppingPolicy,
};
pub use dist::{AgeMixtureDensity, DiscreteDist, SystemParams, TransmissionModel};
pub use peak::{peak_aoi, solve_threshold, PeakSolution};
pub use sim::{simulate, validate, CycleRecord, Estimate, SimConfig, SimEstimate, ValidationReport};

/// Errors surfaced by constructors, solvers and the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A distribution literal violated its invariants (empty support,
    /// non-positive probabilities, weights not summing to one, ...).
    InvalidDistribution(String),
    /// A scalar parameter was out of range (rate, tolerance, variance, ...).
    InvalidParameter(String),
    /// A threshold at or below the support start conditions on a
    /// zero-probability event.
    ThresholdBelowSupport { threshold: f64, support_start: f64 },
    /// The policy search space contained no candidate.
    EmptySearchSpace,
    /// A simulated cycle exceeded the attempt safety cap, indicating a
    /// stopping rule that never accepts.
    AttemptCapExceeded { cap: u64 },
    /// Simulation configuration violated its invariants.
    InvalidSimConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDistribution(msg) => write!(f, "invalid distribution: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::ThresholdBelowSupport {
                threshold,
                support_start,
            } => write!(
                f,
                "threshold {threshold} does not exceed the support start {support_start}"
            ),
            Error::EmptySearchSpace => write!(f, "empty policy search space"),
            Error::AttemptCapExceeded { cap } => {
                write!(f, "cycle exceeded {cap} sensing attempts without accepting")
            }
            Error::InvalidSimConfig(msg) => write!(f, "invalid simulation config: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
