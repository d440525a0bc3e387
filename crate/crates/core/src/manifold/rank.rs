use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg;
use crate::{Error, Result};

/// Relative singular-value threshold for the numerical rank.
pub const RANK_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RankReport {
    /// Row `j`, column `k`: `∂ u_k / ∂ z_j` at `(x, z̄)`.
    pub jacobian: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub required: usize,
    pub pass: bool,
}

/// Numerical Jacobian of `z ↦ h⁻¹(x, z)` at `z̄` by central differences and
/// its rank; passes when the rank equals `d_x`.
pub fn rank_condition_continuous_z<F>(h_inv: F, x: &[f64], zbar: &[f64], d_x: usize) -> Result<RankReport>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    let dz = zbar.len();
    let mut jac = vec![vec![0.0; d_x]; dz];
    let mut z = zbar.to_vec();
    for j in 0..dz {
        let h = 1e-5 * libm::fabs(zbar[j]).max(1.0);
        z[j] = zbar[j] + h;
        let up = h_inv(x, &z);
        z[j] = zbar[j] - h;
        let down = h_inv(x, &z);
        z[j] = zbar[j];
        if up.len() != d_x || down.len() != d_x {
            return Err(Error::DimensionMismatch { expected: d_x, found: up.len() });
        }
        for k in 0..d_x {
            let g = (up[k] - down[k]) / (2.0 * h);
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("d u_{k} / d z_{j}")));
            }
            jac[j][k] = g;
        }
    }
    let flat: Vec<f64> = jac.iter().flat_map(|r| r.iter().copied()).collect();
    let singular_values = linalg::singular_values(&flat, dz, d_x);
    let rank = linalg::rank(&flat, dz, d_x, RANK_REL_TOL);
    Ok(RankReport { jacobian: jac, singular_values, rank, required: d_x, pass: rank == d_x })
}
