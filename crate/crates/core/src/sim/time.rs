use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// Minutes in one simulated day.
pub const DAY_MINUTES: f64 = 1440.0;

/// Simulation clock value in minutes since the start of day 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(minutes: f64) -> Self {
        debug_assert!(minutes.is_finite(), "non-finite sim time {minutes}");
        SimTime(minutes)
    }

    pub fn from_days(days: f64) -> Self {
        SimTime::new(days * DAY_MINUTES)
    }

    pub fn minutes(self) -> f64 {
        self.0
    }

    /// Zero-based index of the day containing this instant.
    pub fn day(self) -> u64 {
        (self.0 / DAY_MINUTES).floor().max(0.0) as u64
    }

    pub fn day_start(self) -> SimTime {
        SimTime(self.day() as f64 * DAY_MINUTES)
    }

    /// Minutes elapsed since midnight of the current day.
    pub fn time_of_day(self) -> f64 {
        self.0 - self.day_start().0
    }
}

impl Eq for SimTime {}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: f64) -> SimTime {
        SimTime::new(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = f64;

    fn sub(self, rhs: SimTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn day_arithmetic() {
        let t = SimTime::new(2.0 * DAY_MINUTES + 30.5);
        assert_eq!(t.day(), 2);
        assert_eq!(t.day_start(), SimTime::from_days(2.0));
        assert!((t.time_of_day() - 30.5).abs() < 1e-12);
        assert_eq!(t - SimTime::from_days(2.0), 30.5);
    }

    #[test]
    fn ordering_is_total() {
        let mut v = vec![SimTime::new(3.0), SimTime::ZERO, SimTime::new(1.5)];
        v.sort();
        assert_eq!(v, vec![SimTime::ZERO, SimTime::new(1.5), SimTime::new(3.0)]);
    }
}
