use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interarrival or service-time process, parameters in minutes.
///
/// Gaussian variates are truncated at zero by rejection, while [`mean`]
/// keeps reporting `mu`: the predictors work with the untruncated parameter.
///
/// [`mean`]: ServiceDistribution::mean
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ServiceDistribution {
    Exponential { mean: f64 },
    Uniform { a: f64, b: f64 },
    Gaussian { mu: f64, sigma: f64 },
    /// Zero-variance process. Used for analytical cross-checks.
    Deterministic { value: f64 },
}

impl ServiceDistribution {
    pub fn exponential(mean: f64) -> Self {
        ServiceDistribution::Exponential { mean }
    }

    pub fn uniform(a: f64, b: f64) -> Self {
        ServiceDistribution::Uniform { a, b }
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Self {
        ServiceDistribution::Gaussian { mu, sigma }
    }

    pub fn deterministic(value: f64) -> Self {
        ServiceDistribution::Deterministic { value }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ServiceDistribution::Exponential { mean } => mean.is_finite() && mean > 0.0,
            ServiceDistribution::Uniform { a, b } => {
                a.is_finite() && b.is_finite() && 0.0 <= a && a < b
            }
            ServiceDistribution::Gaussian { mu, sigma } => {
                mu.is_finite() && sigma.is_finite() && mu > 0.0 && sigma > 0.0
            }
            ServiceDistribution::Deterministic { value } => value.is_finite() && value > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid distribution parameters: {self}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ServiceDistribution::Exponential { mean } => mean,
            ServiceDistribution::Uniform { a, b } => 0.5 * (a + b),
            ServiceDistribution::Gaussian { mu, .. } => mu,
            ServiceDistribution::Deterministic { value } => value,
        }
    }

    /// Variance of the untruncated process.
    pub fn variance(&self) -> f64 {
        match *self {
            ServiceDistribution::Exponential { mean } => mean * mean,
            ServiceDistribution::Uniform { a, b } => (b - a) * (b - a) / 12.0,
            ServiceDistribution::Gaussian { sigma, .. } => sigma * sigma,
            ServiceDistribution::Deterministic { .. } => 0.0,
        }
    }

    /// Draws one strictly positive variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ServiceDistribution::Exponential { mean } => {
                let exp = Exp::new(1.0 / mean).expect("validated exponential mean");
                loop {
                    let x: f64 = exp.sample(rng);
                    if x > 0.0 {
                        return x;
                    }
                }
            }
            ServiceDistribution::Uniform { a, b } => loop {
                let x = rng.gen_range(a..=b);
                if x > 0.0 {
                    return x;
                }
            },
            ServiceDistribution::Gaussian { mu, sigma } => {
                let normal = Normal::new(mu, sigma).expect("validated gaussian");
                loop {
                    let x: f64 = normal.sample(rng);
                    if x > 0.0 {
                        return x;
                    }
                }
            }
            ServiceDistribution::Deterministic { value } => value,
        }
    }
}

impl fmt::Display for ServiceDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ServiceDistribution::Exponential { mean } => write!(f, "Exp({mean})"),
            ServiceDistribution::Uniform { a, b } => write!(f, "U({a}, {b})"),
            ServiceDistribution::Gaussian { mu, sigma } => write!(f, "N({mu}, {sigma}^2)"),
            ServiceDistribution::Deterministic { value } => write!(f, "D({value})"),
        }
    }
}
