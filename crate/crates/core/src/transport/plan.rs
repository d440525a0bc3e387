use alloc::vec;
use alloc::vec::Vec;

use crate::measure::DiscreteMeasure;

/// Nonnegative coupling matrix, stored densely or as a list of entries.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "storage", rename_all = "snake_case"))]
pub enum Coupling {
    Dense { rows: usize, cols: usize, data: Vec<f64> },
    Sparse { rows: usize, cols: usize, entries: Vec<(usize, usize, f64)> },
}

impl Coupling {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Coupling::Dense { rows, cols, .. } | Coupling::Sparse { rows, cols, .. } => (*rows, *cols),
        }
    }

    /// Calls `f(i, j, mass)` for every stored entry with positive mass.
    pub fn for_each<F: FnMut(usize, usize, f64)>(&self, mut f: F) {
        match self {
            Coupling::Dense { cols, data, .. } => {
                for (k, &v) in data.iter().enumerate() {
                    if v > 0.0 {
                        f(k / cols, k % cols, v);
                    }
                }
            }
            Coupling::Sparse { entries, .. } => {
                for &(i, j, v) in entries {
                    if v > 0.0 {
                        f(i, j, v);
                    }
                }
            }
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.shape().0];
        self.for_each(|i, _, v| r[i] += v);
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.shape().1];
        self.for_each(|_, j, v| c[j] += v);
        c
    }

    /// Dense copy, for small problems and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let (n, m) = self.shape();
        let mut d = vec![0.0; n * m];
        self.for_each(|i, j, v| d[i * m + j] += v);
        d
    }
}

/// A coupling between two discrete measures and its total cost
/// `Σ πᵢⱼ c(xᵢ, yⱼ)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TransportPlan {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    pub coupling: Coupling,
    pub total_cost: f64,
    /// Entropic regularization used, `None` for exact plans.
    pub epsilon: Option<f64>,
    /// Dual potentials `(f, g)` when the solver provides them.
    pub potentials: Option<(Vec<f64>, Vec<f64>)>,
}

impl TransportPlan {
    /// Largest absolute deviation of row / column sums from the marginal
    /// weights.
    pub fn marginal_residual(&self) -> f64 {
        let r = self.coupling.row_sums();
        let c = self.coupling.col_sums();
        let dr = r.iter().zip(self.source.weights()).map(|(a, b)| libm::fabs(a - b));
        let dc = c.iter().zip(self.target.weights()).map(|(a, b)| libm::fabs(a - b));
        dr.chain(dc).fold(0.0, f64::max)
    }
}
