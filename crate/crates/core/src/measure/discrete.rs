use alloc::vec::Vec;

use super::cdf::GriddedCdf;
use crate::{Error, Result};

/// Weights must sum to one within this tolerance.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Finitely supported probability measure on distinct points of `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySamples);
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: weights.len() });
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::UnsupportedDimension(0));
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(alloc::format!("support point {p:?}")));
            }
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(crate::error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if libm::fabs(total - 1.0) > WEIGHT_TOL {
            return Err(Error::NotNormalized(total));
        }
        let m = Self { points, weights };
        if m.has_duplicates() {
            return Err(crate::error::invalid("support points must be distinct"));
        }
        Ok(m)
    }

    /// Equal weights `1/n`.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, alloc::vec![1.0 / n.max(1) as f64; n])
    }

    /// Rescales nonnegative `weights` to sum to one.
    pub fn normalized(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NotNormalized(total));
        }
        Self::new(points, weights.iter().map(|w| w / total).collect())
    }

    /// Grid-node proxy of a gridded law: every node carries the mass of the
    /// cell around it (see [`GriddedCdf::node_masses`]); nodes without mass
    /// are dropped and the rest renormalized.
    pub fn from_gridded(cdf: &GriddedCdf) -> Result<Self> {
        let masses = cdf.node_masses();
        let grid = cdf.grid();
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for (f, &m) in masses.iter().enumerate() {
            if m > 0.0 {
                pts.push(grid.node(f));
                w.push(m);
            }
        }
        Self::normalized(pts, w)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// `true` if all weights agree to within `1e-12` relative.
    pub fn is_equal_weight(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|w| libm::fabs(w - w0) <= 1e-12 * w0)
    }

    /// Componentwise bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = alloc::vec![f64::INFINITY; d];
        let mut hi = alloc::vec![f64::NEG_INFINITY; d];
        for p in &self.points {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Total weight of the points `≤ x` componentwise.
    pub fn cdf(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| p.iter().zip(x).all(|(a, b)| a <= b))
            .map(|(_, w)| w)
            .sum()
    }

    fn has_duplicates(&self) -> bool {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&self.points[a], &self.points[b]));
        order.windows(2).any(|w| self.points[w[0]] == self.points[w[1]])
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            core::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    core::cmp::Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validation() {
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]),
            Err(Error::NotNormalized(_))
        ));
        assert!(DiscreteMeasure::uniform(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0]], vec![-1.0]).is_err());
        assert_eq!(DiscreteMeasure::uniform(vec![]), Err(Error::EmptySamples));
    }

    #[test]
    fn discrete_cdf() {
        let m = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((m.cdf(&[0.5, 0.5]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.cdf(&[1.0, 1.0]) - 1.0).abs() < 1e-15);
    }
}
