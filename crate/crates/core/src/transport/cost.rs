use alloc::vec::Vec;

use crate::measure::DiscreteMeasure;
use crate::{Error, Result};

/// Ground cost `c(x, y)` between source and target points.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum CostFunction {
    /// `‖x − y‖²`.
    SquaredEuclidean,
    /// `‖x − y‖^p` with `0 < p < 1`.
    ConcavePower { p: f64 },
    /// `−⟨x, y⟩`: minimizing it maximizes the bilinear surplus `y'ε`.
    Bilinear,
    /// Explicit `rows × cols` table, row-major.
    Custom { rows: usize, cols: usize, table: Vec<f64> },
}

impl CostFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            CostFunction::ConcavePower { p } if !(*p > 0.0 && *p < 1.0) => {
                Err(crate::error::invalid("concave power exponent must lie in (0,1)"))
            }
            CostFunction::Custom { rows, cols, table } if table.len() != rows * cols => {
                Err(Error::DimensionMismatch { expected: rows * cols, found: table.len() })
            }
            CostFunction::Custom { table, .. } if table.iter().any(|v| !v.is_finite()) => {
                Err(Error::NonFinite("custom cost entry".into()))
            }
            _ => Ok(()),
        }
    }

    /// Cost between two points; `None` for table costs.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        match self {
            CostFunction::SquaredEuclidean => Some(sq_dist(x, y)),
            CostFunction::ConcavePower { p } => Some(libm::pow(libm::sqrt(sq_dist(x, y)), *p)),
            CostFunction::Bilinear => Some(-x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()),
            CostFunction::Custom { .. } => None,
        }
    }

    /// Full `n × m` cost matrix for the two supports.
    pub fn matrix(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Vec<f64>> {
        self.validate()?;
        if let CostFunction::Custom { rows, cols, table } = self {
            if *rows != mu.len() || *cols != nu.len() {
                return Err(Error::DimensionMismatch { expected: rows * cols, found: mu.len() * nu.len() });
            }
            return Ok(table.clone());
        }
        if mu.dim() != nu.dim() {
            return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
        }
        let mut c = Vec::with_capacity(mu.len() * nu.len());
        for x in mu.points() {
            for y in nu.points() {
                c.push(self.eval(x, y).unwrap_or(0.0));
            }
        }
        Ok(c)
    }

    pub fn is_concave_power(&self) -> bool {
        matches!(self, CostFunction::ConcavePower { .. })
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    libm::sqrt(sq_dist(x, y))
}

/// Median of the entries (used to scale entropic regularization).
pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_values() {
        let c = CostFunction::ConcavePower { p: 0.5 };
        assert!((c.eval(&[0.0], &[9.0]).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(CostFunction::SquaredEuclidean.eval(&[0.0, 0.0], &[1.0, 2.0]), Some(5.0));
        assert_eq!(CostFunction::Bilinear.eval(&[1.0, 2.0], &[3.0, 4.0]), Some(-11.0));
        assert!(CostFunction::ConcavePower { p: 1.5 }.validate().is_err());
        assert!(CostFunction::Custom { rows: 2, cols: 2, table: alloc::vec![0.0; 3] }.validate().is_err());
    }
}
