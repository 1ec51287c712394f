use crate::error::{Error, Result};
use crate::sim::ServiceDistribution;

/// Median, upper quartile and extreme quantile used by the band estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandAnchors {
    pub median: f64,
    pub upper_quartile: f64,
    pub extreme: f64,
}

pub fn band_anchors(dist: &ServiceDistribution) -> Result<BandAnchors> {
    match *dist {
        ServiceDistribution::Uniform { a, b } => Ok(BandAnchors {
            median: 0.5 * (a + b),
            upper_quartile: 0.25 * (a + 3.0 * b),
            extreme: b,
        }),
        ServiceDistribution::Gaussian { mu, sigma } => Ok(BandAnchors {
            median: mu,
            upper_quartile: mu + 0.675 * sigma,
            extreme: mu + 3.0 * sigma,
        }),
        ServiceDistribution::Deterministic { value } => Ok(BandAnchors {
            median: value,
            upper_quartile: value,
            extreme: value,
        }),
        ServiceDistribution::Exponential { .. } => Err(Error::UnsupportedDistribution("exponential")),
    }
}

/// Expected remaining service time after `elapsed` minutes, by quantile band.
///
/// The value steps up when `elapsed` crosses the upper quartile and is zero
/// past the extreme quantile.
pub fn remaining_service_time(dist: &ServiceDistribution, elapsed: f64) -> Result<f64> {
    let q = band_anchors(dist)?;
    let x = elapsed.max(0.0);
    let w = if x < q.median {
        q.median - x
    } else if x < q.upper_quartile {
        q.upper_quartile - x
    } else if x <= q.extreme {
        0.5 * (q.extreme - x)
    } else {
        0.0
    };
    Ok(w)
}

/// `E[X - x | X > x]` by Simpson integration of the conditional density.
///
/// Gaussian times are taken untruncated; past a bounded support the result is 0.
pub fn remaining_service_time_exact(dist: &ServiceDistribution, elapsed: f64) -> f64 {
    let x = elapsed.max(0.0);
    match *dist {
        ServiceDistribution::Exponential { mean } => mean,
        ServiceDistribution::Deterministic { value } => (value - x).max(0.0),
        ServiceDistribution::Uniform { a, b } => {
            if x >= b {
                return 0.0;
            }
            let lo = x.max(a);
            let density = |_: f64| 1.0;
            conditional_mean_excess(density, lo, b, x)
        }
        ServiceDistribution::Gaussian { mu, sigma } => {
            let density = |v: f64| {
                let z = (v - mu) / sigma;
                (-0.5 * z * z).exp()
            };
            let hi = mu.max(x) + 12.0 * sigma;
            conditional_mean_excess(density, x, hi, x)
        }
    }
}

fn conditional_mean_excess(density: impl Fn(f64) -> f64, lo: f64, hi: f64, x: f64) -> f64 {
    const STEPS: usize = 4000;
    let h = (hi - lo) / STEPS as f64;
    let mut mass = 0.0;
    let mut first_moment = 0.0;
    for i in 0..=STEPS {
        let v = lo + i as f64 * h;
        let weight = if i == 0 || i == STEPS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f = density(v);
        mass += weight * f;
        first_moment += weight * f * (v - x);
    }
    if mass > 0.0 {
        first_moment / mass
    } else {
        0.0
    }
}
