use crate::{Error, Result};

/// Outcome of comparing two points in the componentwise partial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Dominance {
    Dominates,
    DominatedBy,
    Equal,
    Incomparable,
}

impl Dominance {
    /// `true` unless the points are incomparable.
    pub fn comparable(self) -> bool {
        self != Dominance::Incomparable
    }
}

/// Compares `x` and `y` coordinate by coordinate.
pub fn dominates(x: &[f64], y: &[f64]) -> Result<Dominance> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    Ok(dominance_unchecked(x, y))
}

#[inline]
pub(crate) fn dominance_unchecked(x: &[f64], y: &[f64]) -> Dominance {
    let ge = x.iter().zip(y).all(|(a, b)| a >= b);
    let le = x.iter().zip(y).all(|(a, b)| a <= b);
    match (ge, le) {
        (true, true) => Dominance::Equal,
        (true, false) => Dominance::Dominates,
        (false, true) => Dominance::DominatedBy,
        (false, false) => Dominance::Incomparable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_cases() {
        assert_eq!(dominates(&[1.0, 2.0], &[0.0, 2.0]), Ok(Dominance::Dominates));
        assert_eq!(dominates(&[0.0, 2.0], &[1.0, 2.0]), Ok(Dominance::DominatedBy));
        assert_eq!(dominates(&[1.0, 0.0], &[0.0, 1.0]), Ok(Dominance::Incomparable));
        assert_eq!(dominates(&[0.3, 0.7], &[0.3, 0.7]), Ok(Dominance::Equal));
        assert!(dominates(&[1.0], &[1.0, 2.0]).is_err());
    }
}
