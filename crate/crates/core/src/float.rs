use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type used throughout the crate.
pub trait Float:
    num_traits::Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` constant. Never fails for finite inputs.
    fn cst(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    /// Tolerance on row sums of a stochastic matrix.
    ///
    /// `1e-9` in `f64`; widened to a few ulps of 1 for narrower types.
    fn stochastic_tolerance() -> Self {
        let floor = Self::cst(1e-9);
        let ulps = Self::epsilon() * Self::cst(64.0);
        if ulps > floor {
            ulps
        } else {
            floor
        }
    }
}

impl Float for f32 {}
impl Float for f64 {}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn parse_float<F: Float>(s: &str) -> Option<F> {
    F::from_str(s.trim()).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[0.5, 0.5, 0.1]), 0);
        assert_eq!(argmax(&[0.2, 0.9, 0.1]), 1);
        assert_eq!(argmax(&[1.0f32]), 0);
    }

    #[test]
    fn tolerance_by_width() {
        assert_eq!(f64::stochastic_tolerance(), 1e-9);
        assert!(f32::stochastic_tolerance() > 1e-6);
    }
}
