//! Average age evaluation and stopping-rule optimization.
//!
//! Any renewal stopping rule enters the average-age expression only through
//! the pair `(E[n], E[C_n + I_n])`: the mean number of sensing attempts per
//! delivery and the mean age of the accepted candidate. This module computes
//! those moments in closed form for the supported rule families, evaluates
//! the average-age expression, and numerically optimizes the rule parameters.
//!
//! The average-age expression treats the attempt count as if it were
//! deterministic (it uses the squared mean where a dependent stopping time
//! would need second-moment corrections). It is exact for rules with a
//! deterministic attempt count and an approximation otherwise; the simulator
//! quantifies the gap.

use crate::dist::SystemParams;
use crate::numeric::golden_section_min;
use crate::Error;

/// A renewal stopping rule: which candidate packet gets transmitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingPolicy {
    /// Accept the first candidate unconditionally.
    NoThresholdZeroWait,
    /// Accept the first candidate whose age `A = C + I` falls below the
    /// threshold.
    AgeThreshold { threshold: f64 },
    /// Discard the first `wait` candidates unconditionally, then apply the
    /// age threshold. Non-integer `wait` is realized per cycle as a
    /// floor/ceil randomization with the given mean.
    Hybrid { wait: f64, threshold: f64 },
    /// Discard the first `wait` candidates, then accept the first candidate
    /// whose power-outage duration `I` falls below the threshold.
    Pod { wait: f64, outage_threshold: f64 },
}

impl StoppingPolicy {
    /// Checks the policy against the parameter set: thresholds must exceed
    /// the relevant support edge and waits must be nonnegative.
    pub fn validate(&self, params: &SystemParams) -> Result<(), Error> {
        let m_star = params.sensing().min_value();
        let check_wait = |wait: f64| {
            if !wait.is_finite() || wait < 0.0 {
                Err(Error::InvalidParameter(format!(
                    "wait {wait} must be finite and nonnegative"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            StoppingPolicy::NoThresholdZeroWait => Ok(()),
            StoppingPolicy::AgeThreshold { threshold } => {
                if threshold > m_star {
                    Ok(())
                } else {
                    Err(Error::ThresholdBelowSupport {
                        threshold,
                        support_start: m_star,
                    })
                }
            }
            StoppingPolicy::Hybrid { wait, threshold } => {
                check_wait(wait)?;
                if threshold > m_star {
                    Ok(())
                } else {
                    Err(Error::ThresholdBelowSupport {
                        threshold,
                        support_start: m_star,
                    })
                }
            }
            StoppingPolicy::Pod {
                wait,
                outage_threshold,
            } => {
                check_wait(wait)?;
                if outage_threshold > 0.0 {
                    Ok(())
                } else {
                    Err(Error::ThresholdBelowSupport {
                        threshold: outage_threshold,
                        support_start: 0.0,
                    })
                }
            }
        }
    }

    /// True when the attempt count is the same on every cycle, which makes
    /// the average-age expression exact.
    pub fn deterministic_attempts(&self) -> bool {
        match *self {
            StoppingPolicy::NoThresholdZeroWait => true,
            StoppingPolicy::AgeThreshold { threshold } => threshold.is_infinite(),
            StoppingPolicy::Hybrid { wait, threshold } => {
                threshold.is_infinite() && wait.fract() == 0.0
            }
            StoppingPolicy::Pod {
                wait,
                outage_threshold,
            } => outage_threshold.is_infinite() && wait.fract() == 0.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StoppingPolicy::NoThresholdZeroWait => "no-threshold",
            StoppingPolicy::AgeThreshold { .. } => "age-threshold",
            StoppingPolicy::Hybrid { .. } => "hybrid",
            StoppingPolicy::Pod { .. } => "pod",
        }
    }
}

/// The two functionals of a stopping rule that the average-age expression
/// consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyMoments {
    /// `E[n]`, mean sensing attempts per delivery.
    pub mean_attempts: f64,
    /// `E[C_n + I_n]`, mean age of the accepted candidate.
    pub mean_final_age: f64,
}

/// Closed-form `(E[n], E[C_n + I_n])` for a stopping rule.
pub fn policy_moments(
    params: &SystemParams,
    policy: &StoppingPolicy,
) -> Result<PolicyMoments, Error> {
    policy.validate(params)?;
    let dens = params.age_density();
    let lambda = params.lambda();
    match *policy {
        StoppingPolicy::NoThresholdZeroWait => Ok(PolicyMoments {
            mean_attempts: 1.0,
            mean_final_age: dens.mean(),
        }),
        StoppingPolicy::AgeThreshold { threshold } => Ok(PolicyMoments {
            mean_attempts: 1.0 / dens.cdf(threshold),
            mean_final_age: dens.conditional_mean_below(threshold)?,
        }),
        StoppingPolicy::Hybrid { wait, threshold } => Ok(PolicyMoments {
            mean_attempts: wait + 1.0 / dens.cdf(threshold),
            mean_final_age: dens.conditional_mean_below(threshold)?,
        }),
        StoppingPolicy::Pod {
            wait,
            outage_threshold,
        } => {
            let mean_c = params.sensing().mean();
            if outage_threshold.is_infinite() {
                return Ok(PolicyMoments {
                    mean_attempts: wait + 1.0,
                    mean_final_age: mean_c + 1.0 / lambda,
                });
            }
            let acceptance = -f64::exp_m1(-lambda * outage_threshold); // 1 - exp(-lambda w)
            let truncated_outage = 1.0 / lambda
                - outage_threshold * (-lambda * outage_threshold).exp() / acceptance;
            Ok(PolicyMoments {
                mean_attempts: wait + 1.0 / acceptance,
                mean_final_age: mean_c + truncated_outage,
            })
        }
    }
}

/// The average-age expression for a rule summarized by `moments`:
///
/// ```text
/// [1/l^2 + Var(T) + n (Var(C) + 1/l^2)]
/// ------------------------------------- + 1/(2l) + (3/2) E[T]
///   2 [1/l + E[T] + n (E[C] + 1/l)]
///                                       + (n/2)(E[C] + 1/l) + E[C_n + I_n]
/// ```
pub fn average_aoi(params: &SystemParams, moments: &PolicyMoments) -> f64 {
    let inv_rate = 1.0 / params.lambda();
    let mean_c = params.sensing().mean();
    let var_c = params.sensing().variance();
    let mean_t = params.transmission().mean();
    let var_t = params.transmission().variance();
    let n = moments.mean_attempts;

    let numerator = inv_rate * inv_rate + var_t + n * (var_c + inv_rate * inv_rate);
    let denominator = 2.0 * (inv_rate + mean_t + n * (mean_c + inv_rate));
    numerator / denominator
        + 0.5 * inv_rate
        + 1.5 * mean_t
        + 0.5 * n * (mean_c + inv_rate)
        + moments.mean_final_age
}

/// Convexity criterion for the attempt-count term of the average age:
///
/// `K = (Var(T) + 1/l^2)(E[C] + 1/l) - (Var(C) + 1/l^2)(E[T] + 1/l)`
///
/// Negative `K` makes that term concave increasing (waiting never helps it);
/// positive `K` makes its fractional part convex decreasing, so an initial
/// waiting phase can pay off.
pub fn k_criterion(params: &SystemParams) -> f64 {
    let inv_rate = 1.0 / params.lambda();
    let mean_c = params.sensing().mean();
    let var_c = params.sensing().variance();
    let mean_t = params.transmission().mean();
    let var_t = params.transmission().variance();
    (var_t + inv_rate * inv_rate) * (mean_c + inv_rate)
        - (var_c + inv_rate * inv_rate) * (mean_t + inv_rate)
}

/// Minimizer of the attempt-count term when the accepted-age term is
/// ignored: `max(sqrt(K / (E[C] + 1/l)) - 1/l - E[T], 0)`. Strictly positive
/// output signals that an initial waiting phase is worthwhile regardless of
/// what is observed.
pub fn x_star(params: &SystemParams) -> f64 {
    let k = k_criterion(params);
    if k <= 0.0 {
        return 0.0;
    }
    let inv_rate = 1.0 / params.lambda();
    let mean_c = params.sensing().mean();
    let mean_t = params.transmission().mean();
    ((k / (mean_c + inv_rate)).sqrt() - inv_rate - mean_t).max(0.0)
}

/// Which parametric rule family to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyFamily {
    Hybrid,
    Pod,
}

/// Search space for [`optimize_policy`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    /// Candidate wait values. Defaults to the integers 0..=20.
    pub waits: Vec<f64>,
    /// Threshold bracket. `None` selects the family default:
    /// `[m* + 1e-6, m* + 50 E[A]]` for hybrid, `[1e-6/l, 50/l]` for POD.
    pub bracket: Option<(f64, f64)>,
    /// Points in the coarse unimodality scan that precedes golden-section.
    pub scan_points: usize,
    /// Golden-section interval width at which the search stops.
    pub tol: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            waits: (0..=20).map(f64::from).collect(),
            bracket: None,
            scan_points: 256,
            tol: 1e-9,
        }
    }
}

/// Minimizes the average age over a rule family: for each wait value, a
/// coarse scan locates the basin and golden-section refines the threshold
/// (over the whole bracket when the scan looks unimodal, otherwise around
/// the scan argmin). The infinite-threshold corner is always a candidate,
/// so the result never exceeds the no-threshold zero-wait value.
///
/// Ties are broken lexicographically on `(wait, threshold)`.
pub fn optimize_policy(
    params: &SystemParams,
    family: PolicyFamily,
    spec: &SearchSpec,
) -> Result<(StoppingPolicy, f64), Error> {
    if spec.waits.is_empty() || spec.scan_points < 2 {
        return Err(Error::EmptySearchSpace);
    }
    if spec.tol.is_nan() || spec.tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "search tolerance {} must be positive",
            spec.tol
        )));
    }
    let dens = params.age_density();
    let (lo, hi) = match spec.bracket {
        Some((lo, hi)) => (lo, hi),
        None => match family {
            PolicyFamily::Hybrid => {
                let m_star = dens.support_start();
                (m_star + 1e-6, m_star + 50.0 * dens.mean())
            }
            PolicyFamily::Pod => (1e-6 / params.lambda(), 50.0 / params.lambda()),
        },
    };
    let floor = match family {
        PolicyFamily::Hybrid => dens.support_start(),
        PolicyFamily::Pod => 0.0,
    };
    if lo.is_nan() || hi.is_nan() || lo <= floor || hi <= lo {
        return Err(Error::EmptySearchSpace);
    }

    let make_policy = |wait: f64, threshold: f64| match family {
        PolicyFamily::Hybrid => StoppingPolicy::Hybrid { wait, threshold },
        PolicyFamily::Pod => StoppingPolicy::Pod {
            wait,
            outage_threshold: threshold,
        },
    };

    let mut best: Option<(f64, f64, f64)> = None; // (value, wait, threshold)
    let mut consider = |value: f64, wait: f64, threshold: f64| {
        let better = match best {
            None => true,
            Some((bv, bw, bt)) => {
                value < bv || (value == bv && (wait, threshold) < (bw, bt))
            }
        };
        if better {
            best = Some((value, wait, threshold));
        }
    };

    for &wait in &spec.waits {
        if wait.is_nan() || wait < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "wait {wait} must be nonnegative"
            )));
        }
        let objective = |threshold: f64| -> f64 {
            let moments = policy_moments(params, &make_policy(wait, threshold))
                .expect("threshold inside bracket is above the support");
            average_aoi(params, &moments)
        };

        // Coarse scan locates every candidate basin; the profile is usually
        // unimodal but can carry several near-tied local minima (and flat
        // stretches where the density's exponential terms underflow).
        let n = spec.scan_points;
        let mut values = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            values.push((x, objective(x)));
        }
        let mut basins: Vec<usize> = Vec::new();
        for i in 0..=n {
            let left_ok = i == 0 || values[i].1 <= values[i - 1].1;
            let right_ok = i == n || values[i].1 <= values[i + 1].1;
            if left_ok && right_ok {
                // One representative per flat run.
                if basins.last().is_none_or(|&p| i > p + 1) {
                    basins.push(i);
                }
            }
        }
        if basins.len() == 1 {
            let (x_min, f_min) = golden_section_min(objective, lo, hi, spec.tol);
            consider(f_min, wait, x_min);
        } else {
            for &i in &basins {
                let glo = values[i.saturating_sub(1)].0;
                let ghi = values[(i + 1).min(n)].0;
                let (x_min, f_min) = golden_section_min(objective, glo, ghi, spec.tol);
                consider(f_min, wait, x_min);
            }
        }
        // The scan minimum itself is a candidate as well.
        let argmin = values
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        consider(argmin.1, wait, argmin.0);

        // Infinite-threshold corner: accept-everything after the wait.
        let corner = policy_moments(params, &make_policy(wait, f64::INFINITY))?;
        consider(average_aoi(params, &corner), wait, f64::INFINITY);
    }

    let (value, wait, threshold) = best.expect("waits is nonempty");
    Ok((make_policy(wait, threshold), value))
}
