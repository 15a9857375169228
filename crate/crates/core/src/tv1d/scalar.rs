use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Number type the event-driven engine runs on.
///
/// `f64` is the production path. `BigRational` gives an exact oracle for small
/// integer-valued inputs, where event times and subgradients are rationals.
pub trait FlowScalar: Num + Signed + Clone + PartialOrd + Debug {
    fn from_count(n: usize) -> Self;

    /// Whether two candidate merge times belong to the same event.
    fn same_event(a: &Self, b: &Self, reference: &Self) -> bool;

    /// Whether two subgradient values agree, relative to `scale`.
    fn agrees(a: &Self, b: &Self, scale: &Self) -> bool;

    fn to_f64(&self) -> f64;
}

/// Relative tolerance for grouping simultaneous merges in floating point.
pub const EVENT_TIE_RTOL: f64 = 1e-12;

impl FlowScalar for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }

    fn same_event(a: &Self, b: &Self, reference: &Self) -> bool {
        (a - b).abs() <= EVENT_TIE_RTOL * reference.abs().max(f64::MIN_POSITIVE)
    }

    fn agrees(a: &Self, b: &Self, scale: &Self) -> bool {
        (a - b).abs() <= 1e-9 * scale.abs().max(1.0)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl FlowScalar for BigRational {
    fn from_count(n: usize) -> Self {
        BigRational::from_usize(n).expect("usize fits a rational")
    }

    fn same_event(a: &Self, b: &Self, _reference: &Self) -> bool {
        a == b
    }

    fn agrees(a: &Self, b: &Self, _scale: &Self) -> bool {
        a == b
    }

    fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}
