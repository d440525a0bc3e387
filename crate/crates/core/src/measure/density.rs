use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::linalg;
use crate::quadrature::GaussLegendre;
use crate::special::{ln_gamma, norm_cdf, norm_pdf, norm_quantile, student_t_cdf, student_t_pdf, student_t_quantile};
use crate::{error::invalid, Error, Result};

/// Parametric family of an [`AnalyticDensity`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum DensityFamily {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    StudentT { dof: f64, location: Vec<f64>, scale: Vec<Vec<f64>> },
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
}

/// A density with closed-form pdf: Gaussian, multivariate Student-t or a
/// uniform box. Matrices are validated (symmetric positive definite) and
/// factorised once on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticDensity {
    family: DensityFamily,
    dim: usize,
    location: Vec<f64>,
    matrix: Vec<f64>,
    chol: Vec<f64>,
    ln_norm: f64,
}

fn flatten(m: &[Vec<f64>], d: usize) -> Result<Vec<f64>> {
    if m.len() != d || m.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: m.len() });
    }
    Ok(m.iter().flat_map(|r| r.iter().copied()).collect())
}

impl AnalyticDensity {
    pub fn new(family: DensityFamily) -> Result<Self> {
        match &family {
            DensityFamily::Gaussian { mean, cov } => {
                let d = mean.len();
                check_dim(d)?;
                let matrix = flatten(cov, d)?;
                let chol = linalg::cholesky(&matrix, d)?;
                let ln_norm = -0.5 * d as f64 * libm::log(2.0 * PI) - 0.5 * linalg::ln_det_from_cholesky(&chol, d);
                Ok(Self { location: mean.clone(), family, dim: d, matrix, chol, ln_norm })
            }
            DensityFamily::StudentT { dof, location, scale } => {
                let d = location.len();
                check_dim(d)?;
                if !(*dof > 0.0) || !dof.is_finite() {
                    return Err(invalid("Student-t degrees of freedom must be positive"));
                }
                let matrix = flatten(scale, d)?;
                let chol = linalg::cholesky(&matrix, d)?;
                let v = *dof;
                let ln_norm = ln_gamma(0.5 * (v + d as f64))
                    - ln_gamma(0.5 * v)
                    - 0.5 * d as f64 * libm::log(v * PI)
                    - 0.5 * linalg::ln_det_from_cholesky(&chol, d);
                Ok(Self { location: location.clone(), family, dim: d, matrix, chol, ln_norm })
            }
            DensityFamily::Uniform { lower, upper } => {
                let d = lower.len();
                check_dim(d)?;
                if upper.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: upper.len() });
                }
                let mut vol = 1.0;
                for (l, u) in lower.iter().zip(upper) {
                    if !(l < u) {
                        return Err(invalid("uniform box needs lower < upper"));
                    }
                    vol *= u - l;
                }
                Ok(Self {
                    location: lower.clone(),
                    family,
                    dim: d,
                    matrix: Vec::new(),
                    chol: Vec::new(),
                    ln_norm: -libm::log(vol),
                })
            }
        }
    }

    pub fn gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(DensityFamily::Gaussian { mean, cov })
    }

    /// Centred multivariate Student-t with scale matrix `scale`.
    pub fn student_t(dof: f64, scale: Vec<Vec<f64>>) -> Result<Self> {
        let d = scale.len();
        Self::new(DensityFamily::StudentT { dof, location: vec![0.0; d], scale })
    }

    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(DensityFamily::Uniform { lower, upper })
    }

    pub fn family(&self) -> &DensityFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match &self.family {
            DensityFamily::Gaussian { .. } => {
                let q = self.mahalanobis(x);
                libm::exp(self.ln_norm - 0.5 * q)
            }
            DensityFamily::StudentT { dof, .. } => {
                let q = self.mahalanobis(x);
                libm::exp(self.ln_norm - 0.5 * (dof + self.dim as f64) * libm::log1p(q / dof))
            }
            DensityFamily::Uniform { lower, upper } => {
                let inside = x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| v >= l && v <= u);
                if inside {
                    libm::exp(self.ln_norm)
                } else {
                    0.0
                }
            }
        }
    }

    fn mahalanobis(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.location).map(|(a, b)| a - b).collect();
        linalg::mahalanobis_sq(&self.chol, self.dim, &diff)
    }

    /// Univariate marginal distribution function of coordinate `k`.
    pub fn marginal_cdf(&self, k: usize, x: f64) -> f64 {
        match &self.family {
            DensityFamily::Gaussian { .. } => {
                let s = libm::sqrt(self.matrix[k * self.dim + k]);
                norm_cdf((x - self.location[k]) / s)
            }
            DensityFamily::StudentT { dof, .. } => {
                let s = libm::sqrt(self.matrix[k * self.dim + k]);
                student_t_cdf((x - self.location[k]) / s, *dof)
            }
            DensityFamily::Uniform { lower, upper } => ((x - lower[k]) / (upper[k] - lower[k])).clamp(0.0, 1.0),
        }
    }

    pub fn marginal_pdf(&self, k: usize, x: f64) -> f64 {
        match &self.family {
            DensityFamily::Gaussian { .. } => {
                let s = libm::sqrt(self.matrix[k * self.dim + k]);
                norm_pdf((x - self.location[k]) / s) / s
            }
            DensityFamily::StudentT { dof, .. } => {
                let s = libm::sqrt(self.matrix[k * self.dim + k]);
                student_t_pdf((x - self.location[k]) / s, *dof) / s
            }
            DensityFamily::Uniform { lower, upper } => {
                if x >= lower[k] && x <= upper[k] {
                    1.0 / (upper[k] - lower[k])
                } else {
                    0.0
                }
            }
        }
    }

    pub fn marginal_quantile(&self, k: usize, p: f64) -> f64 {
        match &self.family {
            DensityFamily::Gaussian { .. } => {
                self.location[k] + libm::sqrt(self.matrix[k * self.dim + k]) * norm_quantile(p)
            }
            DensityFamily::StudentT { dof, .. } => {
                self.location[k] + libm::sqrt(self.matrix[k * self.dim + k]) * student_t_quantile(p, *dof)
            }
            DensityFamily::Uniform { lower, upper } => lower[k] + p * (upper[k] - lower[k]),
        }
    }

    /// Distribution function of the second coordinate given the first, for
    /// bivariate Gaussian and Student-t laws.
    pub(crate) fn conditional_cdf_2(&self, x2: f64, s: f64) -> f64 {
        let (s11, s21, s22) = (self.matrix[0], self.matrix[2], self.matrix[3]);
        let beta = s21 / s11;
        let resid = s22 - s21 * s21 / s11;
        let loc = self.location[1] + beta * (s - self.location[0]);
        match &self.family {
            DensityFamily::Gaussian { .. } => norm_cdf((x2 - loc) / libm::sqrt(resid)),
            DensityFamily::StudentT { dof, .. } => {
                let ds = s - self.location[0];
                let sc = libm::sqrt((dof + ds * ds / s11) / (dof + 1.0) * resid);
                student_t_cdf((x2 - loc) / sc, dof + 1.0)
            }
            DensityFamily::Uniform { .. } => unreachable!("uniform CDFs are products"),
        }
    }

    /// Length scale on which the conditional law of `x₂ | x₁ = s` moves with
    /// `s`; used to size quadrature panels.
    pub(crate) fn conditional_scale_2(&self) -> f64 {
        let (s11, s21, s22) = (self.matrix[0], self.matrix[2], self.matrix[3]);
        let resid = libm::sqrt(s22 - s21 * s21 / s11);
        let beta = libm::fabs(s21 / s11);
        let mut w = libm::sqrt(s11);
        if beta > 0.0 {
            w = w.min(resid / beta);
        }
        if let DensityFamily::StudentT { dof, .. } = &self.family {
            w *= libm::sqrt(dof / (dof + 1.0)).min(1.0);
        }
        w
    }

    /// `∫_{-∞}^{q(p1)} f₁(s) g(s) ds` computed in probability space
    /// `u = F₁(s)` on panels that halve towards `u = 0`, where the quantile
    /// map is singular. The neglected piece `[0, 2⁻⁶⁰ p1]` is below 1e-18.
    pub(crate) fn graded_u_integral<G: FnMut(f64) -> f64>(&self, p1: f64, mut g: G) -> f64 {
        if !(p1 > 0.0) {
            return 0.0;
        }
        let gl = GaussLegendre::new(12);
        let mut total = 0.0;
        let mut hi = p1;
        for _ in 0..60 {
            let lo = 0.5 * hi;
            total += gl.integrate(lo, hi, 1, |u| g(self.marginal_quantile(0, u)));
            hi = lo;
        }
        total
    }

    /// Exact distribution function for `d ≤ 2` (closed form in 1-D, one
    /// Gauss–Legendre integral over the first coordinate in 2-D) and for all
    /// uniform boxes. Returns `None` for Gaussian / Student-t laws with `d = 3`.
    pub fn cdf(&self, x: &[f64]) -> Option<f64> {
        if let DensityFamily::Uniform { lower, upper } = &self.family {
            let mut p = 1.0;
            for k in 0..self.dim {
                p *= ((x[k] - lower[k]) / (upper[k] - lower[k])).clamp(0.0, 1.0);
            }
            return Some(p);
        }
        match self.dim {
            1 => Some(self.marginal_cdf(0, x[0])),
            2 => {
                let p1 = self.marginal_cdf(0, x[0]);
                let v = self.graded_u_integral(p1, |s| self.conditional_cdf_2(x[1], s));
                Some(v.clamp(0.0, 1.0))
            }
            _ => None,
        }
    }

    /// Draws one point.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim;
        match &self.family {
            DensityFamily::Uniform { lower, upper } => {
                (0..d).map(|k| lower[k] + rng.random::<f64>() * (upper[k] - lower[k])).collect()
            }
            _ => {
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let mut y = vec![0.0; d];
                for i in 0..d {
                    y[i] = (0..=i).map(|k| self.chol[i * d + k] * z[k]).sum();
                }
                let scale = match &self.family {
                    DensityFamily::StudentT { dof, .. } => {
                        let w: f64 = ChiSquared::new(*dof).expect("dof validated").sample(rng);
                        libm::sqrt(dof / w)
                    }
                    _ => 1.0,
                };
                y.iter().zip(&self.location).map(|(v, m)| m + scale * v).collect()
            }
        }
    }

    /// Covariance (Gaussian) or scale (Student-t) matrix, row-major.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn location(&self) -> &[f64] {
        &self.location
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > super::MAX_DIM {
        Err(Error::UnsupportedDimension(d))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bivariate_normal_orthant;

    fn fig5_gaussian() -> AnalyticDensity {
        AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.8], vec![0.8, 4.0]]).unwrap()
    }

    #[test]
    fn gaussian_orthant() {
        let g = fig5_gaussian();
        let v = g.cdf(&[0.0, 0.0]).unwrap();
        assert!((v - bivariate_normal_orthant(0.4)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn student_t_pdf_matches_bivariate_formula() {
        let t = AnalyticDensity::student_t(2.0, vec![vec![2.0, 0.8], vec![0.8, 0.5]]).unwrap();
        // (vπ)⁻¹ |Σ|^{-1/2} Γ(v/2+1)/Γ(v/2) (1 + xᵀΣ⁻¹x / v)^{-v/2-1}
        let det: f64 = 2.0 * 0.5 - 0.64;
        let x = [0.7, -0.3];
        let q = (0.5 * x[0] * x[0] - 2.0 * 0.8 * x[0] * x[1] + 2.0 * x[1] * x[1]) / det;
        let expect = 1.0 / (2.0 * PI) / libm::sqrt(det) * 1.0 * libm::pow(1.0 + q / 2.0, -2.0);
        assert!((t.pdf(&x) - expect).abs() < 1e-14);
    }

    #[test]
    fn student_t_cdf_is_symmetric_at_origin() {
        // Centrally symmetric laws: F(0,0) = P(X ≤ 0) = P(X ≥ 0), and the
        // orthant probability of an elliptical law with correlation ρ equals
        // the Gaussian one.
        let t = AnalyticDensity::student_t(2.0, vec![vec![2.0, 0.8], vec![0.8, 0.5]]).unwrap();
        let rho = 0.8 / libm::sqrt(2.0 * 0.5);
        let v = t.cdf(&[0.0, 0.0]).unwrap();
        assert!((v - bivariate_normal_orthant(rho)).abs() < 1e-7, "{v}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(AnalyticDensity::gaussian(vec![0.0; 2], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(AnalyticDensity::student_t(0.0, vec![vec![1.0]]).is_err());
        assert!(AnalyticDensity::uniform(vec![1.0], vec![0.0]).is_err());
    }
}
