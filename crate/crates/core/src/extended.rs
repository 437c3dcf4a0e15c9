//! Extended real numbers with explicit infinities.

use std::cmp::Ordering;
use std::fmt;

/// A real number or one of the two infinities.
///
/// Infinities are kept out of floating-point arithmetic; callers match on the
/// variant or use the comparison helpers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn is_pos_infinity(self) -> bool {
        matches!(self, Extended::PosInfinity)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Positive part `max(x, 0)`.
    pub fn positive_part(self) -> Extended {
        match self {
            Extended::NegInfinity => Extended::Finite(0.0),
            Extended::Finite(v) => Extended::Finite(v.max(0.0)),
            Extended::PosInfinity => Extended::PosInfinity,
        }
    }

    /// `self <= bound` for a finite bound.
    pub fn le(self, bound: f64) -> bool {
        match self {
            Extended::NegInfinity => true,
            Extended::Finite(v) => v <= bound,
            Extended::PosInfinity => false,
        }
    }

    /// Sum with the convention that any `+inf` term dominates.
    ///
    /// Returns `None` for the undefined `+inf + -inf`.
    pub fn checked_add(self, other: Extended) -> Option<Extended> {
        use Extended::*;
        match (self, other) {
            (PosInfinity, NegInfinity) | (NegInfinity, PosInfinity) => None,
            (PosInfinity, _) | (_, PosInfinity) => Some(PosInfinity),
            (NegInfinity, _) | (_, NegInfinity) => Some(NegInfinity),
            (Finite(a), Finite(b)) => Some(Finite(a + b)),
        }
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        Extended::Finite(v)
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use Extended::*;
        match (self, other) {
            (NegInfinity, NegInfinity) | (PosInfinity, PosInfinity) => Some(Ordering::Equal),
            (NegInfinity, _) | (_, PosInfinity) => Some(Ordering::Less),
            (_, NegInfinity) | (PosInfinity, _) => Some(Ordering::Greater),
            (Finite(a), Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInfinity => write!(f, "-inf"),
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInfinity => write!(f, "+inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_against_sentinels() {
        assert!(Extended::NegInfinity < Extended::Finite(-1e300));
        assert!(Extended::Finite(1e300) < Extended::PosInfinity);
        assert!(Extended::PosInfinity > Extended::NegInfinity);
        assert!(!Extended::PosInfinity.le(1e300));
        assert!(Extended::NegInfinity.le(-1e300));
    }

    #[test]
    fn positive_part_and_sums() {
        assert_eq!(
            Extended::Finite(-2.0).positive_part(),
            Extended::Finite(0.0)
        );
        assert_eq!(Extended::NegInfinity.positive_part(), Extended::Finite(0.0));
        assert_eq!(
            Extended::Finite(1.0).checked_add(Extended::PosInfinity),
            Some(Extended::PosInfinity)
        );
        assert_eq!(
            Extended::PosInfinity.checked_add(Extended::NegInfinity),
            None
        );
        assert_eq!(
            Extended::Finite(1.0).checked_add(2.0.into()),
            Some(Extended::Finite(3.0))
        );
    }
}
