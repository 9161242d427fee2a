//! Simulation time as integer microseconds.
//!
//! Integer time keeps the event queue totally ordered without float
//! comparison edge cases and formats identically on every platform.

use core::fmt;
use core::ops::{Add, Sub};

/// A simulation instant, microseconds since scenario start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> SimTime {
        SimTime(us)
    }

    /// Nearest-microsecond conversion; negative or non-finite inputs clamp
    /// to zero.
    pub fn from_secs_f64(secs: f64) -> SimTime {
        if !secs.is_finite() || secs <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime(libm::round(secs * 1e6) as u64)
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub const fn plus_micros(self, us: u64) -> SimTime {
        SimTime(self.0 + us)
    }

    pub fn plus_secs_f64(self, secs: f64) -> SimTime {
        self + SimTime::from_secs_f64(secs)
    }

    pub const fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_and_display() {
        let t = SimTime::from_secs_f64(12.345678);
        assert_eq!(t.micros(), 12_345_678);
        assert_eq!(std::format!("{t}"), "12.345678");
        assert_eq!(SimTime::from_secs_f64(-1.0), SimTime::ZERO);
        assert_eq!(std::format!("{}", SimTime::ZERO), "0.000000");
    }

    #[test]
    fn ordering_is_total() {
        let a = SimTime::from_micros(5);
        let b = SimTime::from_micros(6);
        assert!(a < b);
        assert_eq!(a + SimTime::from_micros(1), b);
        assert_eq!(b.saturating_sub(a), SimTime::from_micros(1));
    }
}
