//! Simulated time.
//!
//! Instants are kept as integer microseconds so that sums of configured
//! latencies (e.g. `102.2 + 68.0`) compare exactly against deadlines.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// A point on the simulated (or real, relative-to-start) clock.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Instant(u64);

/// A non-negative span of simulated time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span(u64);

impl Instant {
    pub const ZERO: Instant = Instant(0);
    pub const NEVER: Instant = Instant(u64::MAX);

    pub fn from_us(us: u64) -> Self {
        Instant(us)
    }

    /// Rounds to the nearest microsecond; negative input saturates at zero.
    pub fn from_ms(ms: f64) -> Self {
        Instant(ms_to_us(ms))
    }

    pub fn as_us(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_since(self, earlier: Instant) -> Span {
        Span(self.0.saturating_sub(earlier.0))
    }
}

impl Span {
    pub const ZERO: Span = Span(0);
    pub const INFINITE: Span = Span(u64::MAX);

    pub fn from_us(us: u64) -> Self {
        Span(us)
    }

    pub fn from_ms(ms: f64) -> Self {
        Span(ms_to_us(ms))
    }

    pub fn as_us(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

fn ms_to_us(ms: f64) -> u64 {
    if ms.is_nan() || ms <= 0.0 {
        0
    } else if ms.is_infinite() || ms * 1000.0 >= u64::MAX as f64 {
        u64::MAX
    } else {
        (ms * 1000.0).round() as u64
    }
}

impl Add<Span> for Instant {
    type Output = Instant;

    fn add(self, rhs: Span) -> Instant {
        Instant(self.0.saturating_add(rhs.0))
    }
}

impl Add for Span {
    type Output = Span;

    fn add(self, rhs: Span) -> Span {
        Span(self.0.saturating_add(rhs.0))
    }
}

impl Sub for Instant {
    type Output = Span;

    fn sub(self, rhs: Instant) -> Span {
        self.saturating_since(rhs)
    }
}

impl fmt::Display for Instant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.as_ms())
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}ms", self.as_ms())
    }
}
