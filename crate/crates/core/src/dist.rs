//! Sensing and transmission time distributions, and the closed-form density
//! of the candidate packet age `A = C + I`.
//!
//! Sensing times `C` live on a finite set of atoms, so convolving with the
//! exponential outage time `I ~ Exp(lambda)` gives a mixture of shifted
//! exponentials. Every truncated moment the solvers need then has an exact
//! closed form; no quadrature appears anywhere in the hot path.

use rand::Rng;

use crate::Error;

/// Weights must sum to one within this slack.
const PROB_SUM_TOL: f64 = 1e-12;

/// A finite discrete distribution over nonnegative times.
///
/// Atoms are kept sorted by value; probabilities are strictly positive and
/// sum to one within `1e-12`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    atoms: Vec<(f64, f64)>, // (value, probability), values strictly increasing
}

impl DiscreteDist {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self, Error> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for &(value, prob) in &atoms {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom value {value} must be finite and nonnegative"
                )));
            }
            if !prob.is_finite() || prob <= 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom probability {prob} must be finite and positive"
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution("duplicate atom values".into()));
        }
        let total: f64 = atoms.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms })
    }

    /// Point mass at `value`.
    pub fn constant(value: f64) -> Result<Self, Error> {
        Self::new(vec![(value, 1.0)])
    }

    pub fn two_point(v1: f64, p1: f64, v2: f64, p2: f64) -> Result<Self, Error> {
        Self::new(vec![(v1, p1), (v2, p2)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Smallest support point.
    pub fn min_value(&self) -> f64 {
        self.atoms[0].0
    }

    /// First moment, exact over the atoms.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * v).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * v * v).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        // Clamp: a point mass can round to a tiny negative.
        (self.second_moment() - mean * mean).max(0.0)
    }

    /// Inverse-CDF draw over the atoms.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        for &(value, prob) in &self.atoms {
            cumulative += prob;
            if u < cumulative {
                return value;
            }
        }
        self.atoms[self.atoms.len() - 1].0
    }
}

/// Transmission time model. Only the mean and variance of `T` enter any
/// analytical expression, so the sampler realizes exactly those two moments
/// with a zero-anchored two-point distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionModel {
    mean: f64,
    variance: f64,
    sampler: DiscreteDist,
}

impl TransmissionModel {
    pub fn new(mean: f64, variance: f64) -> Result<Self, Error> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "transmission mean {mean} must be finite and nonnegative"
            )));
        }
        if !variance.is_finite() || variance < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "transmission variance {variance} must be finite and nonnegative"
            )));
        }
        let sampler = if variance == 0.0 {
            DiscreteDist::constant(mean)?
        } else if mean == 0.0 {
            return Err(Error::InvalidParameter(
                "zero-mean transmission time cannot have positive variance".into(),
            ));
        } else {
            // Atoms {0, b} with b = (sigma^2 + mu^2)/mu and p = mu^2/(sigma^2 + mu^2)
            // reproduce (mu, sigma^2) exactly.
            let raw_second = variance + mean * mean;
            let high = raw_second / mean;
            let p_high = mean * mean / raw_second;
            DiscreteDist::two_point(0.0, 1.0 - p_high, high, p_high)?
        };
        Ok(Self {
            mean,
            variance,
            sampler,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn second_moment(&self) -> f64 {
        self.variance + self.mean * self.mean
    }

    pub fn sampler_atoms(&self) -> &DiscreteDist {
        &self.sampler
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler.sample(rng)
    }
}

/// Full system parameterization: energy arrival rate, sensing time
/// distribution and transmission time model.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    lambda: f64,
    sensing: DiscreteDist,
    transmission: TransmissionModel,
}

impl SystemParams {
    pub fn new(
        lambda: f64,
        sensing: DiscreteDist,
        transmission: TransmissionModel,
    ) -> Result<Self, Error> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "energy arrival rate {lambda} must be finite and positive"
            )));
        }
        Ok(Self {
            lambda,
            sensing,
            transmission,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sensing(&self) -> &DiscreteDist {
        &self.sensing
    }

    pub fn transmission(&self) -> &TransmissionModel {
        &self.transmission
    }

    /// Density of the candidate age `A = C + I`.
    pub fn age_density(&self) -> AgeMixtureDensity {
        AgeMixtureDensity::from_params(self)
    }

    /// Mean candidate age `E[A] = E[C] + 1/lambda`.
    pub fn mean_age(&self) -> f64 {
        self.sensing.mean() + 1.0 / self.lambda
    }

    pub fn sample_sensing<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sensing.sample(rng)
    }

    /// Outage duration until the next energy arrival, via inverse-CDF so the
    /// draw is reproducible across platforms.
    pub fn sample_outage<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random(); // in [0, 1)
        -f64::ln_1p(-u) / self.lambda
    }

    pub fn sample_transmission<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.transmission.sample(rng)
    }
}

/// Density of `A = C + I` as a mixture of shifted exponentials:
/// `f_A(x) = sum_j w_j * lambda * exp(-lambda (x - m_j))` for `x >= m_j`.
///
/// The CDF and partial first moment have closed forms, evaluated here term
/// by term with the step guard `x >= m_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeMixtureDensity {
    rate: f64,
    components: Vec<(f64, f64)>, // (weight, shift), shifts strictly increasing
    support_start: f64,
}

impl AgeMixtureDensity {
    /// One component per sensing atom: weight = atom probability,
    /// shift = atom value.
    pub fn from_params(params: &SystemParams) -> Self {
        let components: Vec<(f64, f64)> = params
            .sensing
            .atoms()
            .iter()
            .map(|&(value, prob)| (prob, value))
            .collect();
        let support_start = components[0].1;
        Self {
            rate: params.lambda,
            components,
            support_start,
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    /// Left edge of the support, `m* = inf{x : f_A(x) > 0}`.
    pub fn support_start(&self) -> f64 {
        self.support_start
    }

    /// `E[A] = sum_j w_j (m_j + 1/lambda)`.
    pub fn mean(&self) -> f64 {
        let inv_rate = 1.0 / self.rate;
        self.components
            .iter()
            .map(|&(w, m)| w * (m + inv_rate))
            .sum()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        let mut density = 0.0;
        for &(w, m) in &self.components {
            if x >= m {
                density += w * self.rate * (-self.rate * (x - m)).exp();
            }
        }
        density
    }

    /// `Pr(A < x)`, exact: `sum_{m_j <= x} w_j (1 - exp(-lambda (x - m_j)))`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        let mut total = 0.0;
        for &(w, m) in &self.components {
            if x >= m {
                total += w * (1.0 - (-self.rate * (x - m)).exp());
            }
        }
        total.clamp(0.0, 1.0)
    }

    /// Truncated first moment `int_0^x alpha f_A(alpha) d(alpha)`, exact:
    /// `sum_{m_j <= x} w_j (m_j + 1/lambda - (x + 1/lambda) exp(-lambda (x - m_j)))`.
    pub fn partial_expectation(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return self.mean();
        }
        let inv_rate = 1.0 / self.rate;
        let mut total = 0.0;
        for &(w, m) in &self.components {
            if x >= m {
                total += w * (m + inv_rate - (x + inv_rate) * (-self.rate * (x - m)).exp());
            }
        }
        total.max(0.0)
    }

    /// `E[A | A < x]`. Errors when `x <= m*` (the conditioning event has
    /// probability zero).
    pub fn conditional_mean_below(&self, x: f64) -> Result<f64, Error> {
        if x.is_nan() || x <= self.support_start {
            return Err(Error::ThresholdBelowSupport {
                threshold: x,
                support_start: self.support_start,
            });
        }
        if x == f64::INFINITY {
            return Ok(self.mean());
        }
        Ok(self.partial_expectation(x) / self.cdf(x))
    }
}
