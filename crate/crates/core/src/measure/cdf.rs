use alloc::vec;
use alloc::vec::Vec;

use super::density::{AnalyticDensity, DensityFamily};
use super::grid::{Grid, MAX_DIM};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Tolerance used by the structural checks on tabulated CDF values.
pub const VALUE_TOL: f64 = 1e-12;

/// A multivariate distribution function tabulated on a rectangular grid and
/// interpolated multilinearly between nodes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GriddedCdf {
    grid: Grid,
    values: Vec<f64>,
    /// Probability mass of the law that lies outside the grid box.
    tail_mass: f64,
    /// Fraction of samples clamped into the box (sample-built CDFs only).
    clipped_fraction: f64,
}

/// Result of [`GriddedCdf::eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfValue {
    pub value: f64,
    /// `true` when the query point was outside the grid box and was clamped.
    pub clamped: bool,
}

/// How [`build_cdf_from_density`] integrates the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CdfMethod {
    /// Closed form in 1-D and for uniform boxes, one-dimensional
    /// Gauss–Legendre integration against the conditional law in 2-D,
    /// tensor trapezoid in 3-D.
    #[default]
    Auto,
    /// Cumulative tensor trapezoid over the grid box (the law is truncated
    /// to the box; the missing mass is recorded as tail mass).
    Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCdfOptions {
    /// The grid box must hold at least this much probability.
    pub min_coverage: f64,
    pub method: CdfMethod,
}

impl Default for DensityCdfOptions {
    fn default() -> Self {
        Self { min_coverage: 1.0 - 1e-4, method: CdfMethod::Auto }
    }
}

impl GriddedCdf {
    /// Wraps tabulated values, checking range and axis monotonicity.
    pub fn from_values(grid: Grid, values: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        let cdf = Self { grid, values, tail_mass, clipped_fraction: 0.0 };
        if let Some(v) = cdf.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("CDF value {v}")));
        }
        if cdf.values.iter().any(|&v| !(-VALUE_TOL..=1.0 + VALUE_TOL).contains(&v)) {
            return Err(crate::error::invalid("CDF values must lie in [0,1]"));
        }
        if !cdf.monotonicity_violations(VALUE_TOL).is_empty() {
            return Err(crate::error::invalid("CDF values are not monotone along every axis"));
        }
        Ok(cdf)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn clipped_fraction(&self) -> f64 {
        self.clipped_fraction
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    #[inline]
    pub fn value_at_node(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    /// Multilinear interpolation; points outside the box are clamped and
    /// flagged.
    pub fn eval(&self, x: &[f64]) -> CdfValue {
        let d = self.dim();
        let mut base = [0usize; MAX_DIM];
        let mut t = [0.0; MAX_DIM];
        let mut clamped = false;
        for k in 0..d {
            let (i, tk, c) = self.grid.axis(k).locate(x[k]);
            base[k] = i;
            t[k] = tk;
            clamped |= c;
        }
        CdfValue { value: self.interpolate(&base[..d], &t[..d]), clamped }
    }

    /// Shorthand for `eval(x).value`.
    #[inline]
    pub fn at(&self, x: &[f64]) -> f64 {
        self.eval(x).value
    }

    fn interpolate(&self, base: &[usize], t: &[f64]) -> f64 {
        let d = base.len();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { t[k] } else { 1.0 - t[k] };
                flat = flat * self.grid.axis(k).nodes + base[k] + bit;
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }

    /// Min and max of the corner values of the cell containing `x`.
    pub fn cell_bounds(&self, x: &[f64]) -> (f64, f64) {
        let d = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut base = [0usize; MAX_DIM];
        for k in 0..d {
            base[k] = self.grid.axis(k).locate(x[k]).0;
        }
        for corner in 0..(1usize << d) {
            let mut flat = 0;
            for k in 0..d {
                flat = flat * self.grid.axis(k).nodes + base[k] + ((corner >> k) & 1);
            }
            lo = lo.min(self.values[flat]);
            hi = hi.max(self.values[flat]);
        }
        (lo, hi)
    }

    /// Central finite-difference gradient of the interpolated CDF with a
    /// one-cell step (one-sided at the box faces).
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d];
        let mut probe = x.to_vec();
        for k in 0..d {
            let a = self.grid.axis(k);
            let h = a.step();
            let lo = (x[k] - h).max(a.lower);
            let hi = (x[k] + h).min(a.upper);
            probe[k] = hi;
            let fp = self.at(&probe);
            probe[k] = lo;
            let fm = self.at(&probe);
            probe[k] = x[k];
            g[k] = if hi > lo { (fp - fm) / (hi - lo) } else { 0.0 };
        }
        g
    }

    /// Probability of the half-open rectangle `(a, b]` by inclusion–exclusion
    /// over the `2^d` corners, clamped to `[0, 1]`.
    pub fn rectangle_probability(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let d = self.dim();
        if a.len() != d || b.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: a.len().min(b.len()) });
        }
        if a.iter().zip(b).any(|(x, y)| x > y) {
            return Err(crate::error::invalid("rectangle lower corner must be ≤ upper corner"));
        }
        Ok(self.rectangle_probability_unchecked(a, b).clamp(0.0, 1.0))
    }

    /// Inclusion–exclusion without clamping; infinite corner coordinates are
    /// honoured (`-∞` contributes `0`, `+∞` the box face).
    pub fn rectangle_probability_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.dim();
        let mut corner_pt = [0.0; MAX_DIM];
        let mut acc = 0.0;
        'corners: for corner in 0..(1usize << d) {
            let mut lower_count = 0;
            for k in 0..d {
                if (corner >> k) & 1 == 1 {
                    corner_pt[k] = b[k];
                } else {
                    if a[k] == f64::NEG_INFINITY {
                        continue 'corners;
                    }
                    corner_pt[k] = a[k];
                    lower_count += 1;
                }
            }
            let sign = if lower_count % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * self.at(&corner_pt[..d]);
        }
        acc
    }

    /// Every grid edge along which the tabulated values decrease by more
    /// than `tol`, as `(flat index of the lower node, axis)`.
    pub fn monotonicity_violations(&self, tol: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.dim() {
            let stride = self.grid.stride(k);
            let n = self.grid.axis(k).nodes;
            for f in 0..self.values.len() {
                let i = (f / stride) % n;
                if i + 1 < n && self.values[f + stride] < self.values[f] - tol {
                    out.push((f, k));
                }
            }
        }
        out
    }

    /// Strict-increase scan: every grid cell (by lower-corner flat index)
    /// whose values do not increase along some axis, restricted to cells
    /// whose corners lie inside the band `δ < F < 1 − δ`.
    pub fn flat_cells(&self, delta: f64, tol: f64) -> Vec<(usize, usize)> {
        let d = self.dim();
        let mut out = Vec::new();
        for f in 0..self.values.len() {
            let idx = self.grid.multi_index(f);
            if (0..d).any(|k| idx[k] + 1 >= self.grid.axis(k).nodes) {
                continue;
            }
            let v = self.values[f];
            if !(v > delta && v < 1.0 - delta) {
                continue;
            }
            for k in 0..d {
                let w = self.values[f + self.grid.stride(k)];
                if w < 1.0 - delta && w - v <= tol {
                    out.push((f, k));
                }
            }
        }
        out
    }

    /// FNV-1a hash of the grid and the value bits; identifies the table in
    /// level sets and reports.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for a in self.grid.axes() {
            eat(a.lower.to_bits());
            eat(a.upper.to_bits());
            eat(a.nodes as u64);
        }
        for v in &self.values {
            eat(v.to_bits());
        }
        h
    }

    /// Value at the all-lower corner.
    pub fn lower_corner_value(&self) -> f64 {
        self.values[0]
    }

    /// Value at the all-upper corner.
    pub fn upper_corner_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Probability mass attached to each node: the mass of the cell that
    /// extends half a step to either side of the node (the outermost cells
    /// extend to the box faces, and everything below the lower faces is
    /// folded into the first layer). Sums to the upper-corner value.
    pub fn node_masses(&self) -> Vec<f64> {
        let d = self.dim();
        // Upper boundary of the cell around node i on each axis.
        let bounds: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let a = self.grid.axis(k);
                (0..a.nodes).map(|i| if i + 1 == a.nodes { a.upper } else { a.coord(i) + 0.5 * a.step() }).collect()
            })
            .collect();
        // CDF at the upper cell boundaries, then finite differences.
        let mut cum = vec![0.0; self.grid.len()];
        let mut pt = [0.0; MAX_DIM];
        for (f, c) in cum.iter_mut().enumerate() {
            let idx = self.grid.multi_index(f);
            for k in 0..d {
                pt[k] = bounds[k][idx[k]];
            }
            *c = self.at(&pt[..d]);
        }
        for k in 0..d {
            let stride = self.grid.stride(k);
            let n = self.grid.axis(k).nodes;
            for f in (0..cum.len()).rev() {
                if !(f / stride).is_multiple_of(n) {
                    cum[f] -= cum[f - stride];
                }
            }
        }
        cum.iter().map(|&m| m.max(0.0)).collect()
    }
}

/// Empirical CDF of `samples` tabulated on `grid`. Samples outside the box
/// are clamped into it; the clamped fraction is recorded.
pub fn build_cdf_from_samples(samples: &[Vec<f64>], grid: &Grid) -> Result<GriddedCdf> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let d = grid.dim();
    let mut counts = vec![0.0; grid.len()];
    let mut clipped = 0usize;
    let mut idx = [0usize; MAX_DIM];
    for s in samples {
        if s.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: s.len() });
        }
        if !grid.contains(s) {
            clipped += 1;
        }
        for k in 0..d {
            idx[k] = grid.axis(k).ceil_index(s[k]);
        }
        counts[grid.flat_index(&idx[..d])] += 1.0;
    }
    cumulate(grid, &mut counts);
    let n = samples.len() as f64;
    for c in counts.iter_mut() {
        *c = (*c / n).min(1.0);
    }
    let frac = clipped as f64 / n;
    Ok(GriddedCdf { grid: grid.clone(), values: counts, tail_mass: frac, clipped_fraction: frac })
}

/// In-place cumulative sums along every axis.
fn cumulate(grid: &Grid, v: &mut [f64]) {
    for k in 0..grid.dim() {
        let stride = grid.stride(k);
        let n = grid.axis(k).nodes;
        for f in 0..v.len() {
            if !(f / stride).is_multiple_of(n) {
                v[f] += v[f - stride];
            }
        }
    }
}

/// Running maximum along every axis and clamping into `[0,1]`; removes
/// round-off non-monotonicity without disturbing exact tables.
fn monotone_fix(grid: &Grid, v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
    for k in 0..grid.dim() {
        let stride = grid.stride(k);
        let n = grid.axis(k).nodes;
        for f in 0..v.len() {
            if !(f / stride).is_multiple_of(n) && v[f] < v[f - stride] {
                v[f] = v[f - stride];
            }
        }
    }
}

/// Tabulates the distribution function of an analytic density on `grid`
/// with the default options (box must hold `1 − 10⁻⁴` of the mass).
pub fn build_cdf_from_density(density: &AnalyticDensity, grid: &Grid) -> Result<GriddedCdf> {
    build_cdf_from_density_with(density, grid, DensityCdfOptions::default())
}

pub fn build_cdf_from_density_with(
    density: &AnalyticDensity,
    grid: &Grid,
    opts: DensityCdfOptions,
) -> Result<GriddedCdf> {
    let d = grid.dim();
    if density.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: density.dim() });
    }
    let uniform = matches!(density.family(), DensityFamily::Uniform { .. });
    let exact = uniform || (opts.method == CdfMethod::Auto && d <= 2);
    let (mut values, box_mass) = if exact {
        let values = if uniform || d == 1 {
            (0..grid.len()).map(|f| density.cdf(&grid.node(f)).unwrap_or(0.0)).collect()
        } else {
            conditional_table(density, grid)
        };
        let probe = GriddedCdf { grid: grid.clone(), values, tail_mass: 0.0, clipped_fraction: 0.0 };
        // Inclusion–exclusion over the box corners gives the mass of the box;
        // the lower faces carry no mass for these laws.
        let mass = probe.rectangle_probability_unchecked(&grid.lower_corner(), &grid.upper_corner());
        (probe.values, mass)
    } else {
        tensor_table(density, grid)
    };
    if box_mass < opts.min_coverage {
        return Err(Error::InsufficientCoverage { mass: box_mass, required: opts.min_coverage });
    }
    monotone_fix(grid, &mut values);
    let tail = (1.0 - box_mass).max(0.0);
    Ok(GriddedCdf { grid: grid.clone(), values, tail_mass: tail, clipped_fraction: 0.0 })
}

/// Cumulative tensor trapezoid of the pdf; returns (values, box mass).
fn tensor_table(density: &AnalyticDensity, grid: &Grid) -> (Vec<f64>, f64) {
    let mut v: Vec<f64> = (0..grid.len()).map(|f| density.pdf(&grid.node(f))).collect();
    for k in 0..grid.dim() {
        let stride = grid.stride(k);
        let a = grid.axis(k);
        let h = a.step();
        // Trapezoid cumulative integral along axis k, processed per line so
        // that each line uses its own pre-integration values.
        let n = a.nodes;
        for start in 0..v.len() {
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            let mut prev = v[start];
            v[start] = 0.0;
            for i in 1..n {
                let f = start + i * stride;
                let cur = v[f];
                v[f] = v[f - stride] + 0.5 * h * (prev + cur);
                prev = cur;
            }
        }
    }
    let mass = v[v.len() - 1];
    (v, mass)
}

/// 2-D Gaussian / Student-t table: `F(x₁,x₂) = ∫_{-∞}^{x₁} f₁(s) C(x₂|s) ds`
/// accumulated cell by cell along the first axis.
fn conditional_table(density: &AnalyticDensity, grid: &Grid) -> Vec<f64> {
    let a1 = *grid.axis(0);
    let a2 = *grid.axis(1);
    let n2 = a2.nodes;
    let x2: Vec<f64> = (0..n2).map(|j| a2.coord(j)).collect();
    let mut values = vec![0.0; grid.len()];

    // Left tail (-∞, a1.lower] in probability space of the first coordinate.
    let p0 = density.marginal_cdf(0, a1.lower);
    let mut row: Vec<f64> =
        x2.iter().map(|&y| density.graded_u_integral(p0, |s| density.conditional_cdf_2(y, s))).collect();
    values[..n2].copy_from_slice(&row);

    let gl = GaussLegendre::new(8);
    let scale = density.conditional_scale_2();
    let panels = (libm::ceil(4.0 * a1.step() / scale) as usize).clamp(1, 64);
    for i in 1..a1.nodes {
        let lo = a1.coord(i - 1);
        let hi = a1.coord(i);
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                let s = mid + 0.5 * h * x;
                let wt = 0.5 * h * w * density.marginal_pdf(0, s);
                for (r, &y) in row.iter_mut().zip(&x2) {
                    *r += wt * density.conditional_cdf_2(y, s);
                }
            }
        }
        values[i * n2..(i + 1) * n2].copy_from_slice(&row);
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::grid::Axis;
    use crate::special::bivariate_normal_orthant;

    fn unit_square(n: usize) -> Grid {
        Grid::uniform(2, 0.0, 1.0, n).unwrap()
    }

    #[test]
    fn point_mass_sample() {
        let g = unit_square(11);
        let cdf = build_cdf_from_samples(&[vec![0.3, 0.7]], &g).unwrap();
        for f in 0..g.len() {
            let x = g.node(f);
            let expect = if x[0] >= 0.3 - 1e-12 && x[1] >= 0.7 - 1e-12 { 1.0 } else { 0.0 };
            assert_eq!(cdf.value_at_node(f), expect, "node {x:?}");
        }
    }

    #[test]
    fn empty_samples_rejected() {
        assert_eq!(build_cdf_from_samples(&[], &unit_square(3)), Err(Error::EmptySamples));
    }

    #[test]
    fn uniform_density_and_rectangles() {
        let u = AnalyticDensity::uniform(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let cdf = build_cdf_from_density(&u, &unit_square(11)).unwrap();
        assert!((cdf.at(&[0.5, 0.5]) - 0.25).abs() < 1e-15);
        assert!(cdf.at(&[0.0, 0.0]) <= cdf.tail_mass() + 1e-15);
        let r = cdf.rectangle_probability(&[0.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
        assert_eq!(cdf.rectangle_probability(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), 0.0);
        assert!(cdf.rectangle_probability(&[0.5, 0.0], &[0.4, 1.0]).is_err());
    }

    #[test]
    fn gaussian_orthant_on_grid() {
        let g = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.8], vec![0.8, 4.0]]).unwrap();
        let grid = Grid::new(vec![Axis::new(-5.0, 5.0, 101), Axis::new(-10.0, 10.0, 101)]).unwrap();
        let cdf = build_cdf_from_density(&g, &grid).unwrap();
        assert!((cdf.at(&[0.0, 0.0]) - bivariate_normal_orthant(0.4)).abs() < 5e-3);
        assert!(cdf.at(&[-5.0, -10.0]) <= cdf.tail_mass() + 1e-12);
        assert!(cdf.upper_corner_value() >= 1.0 - cdf.tail_mass() - 1e-12);
    }

    #[test]
    fn tensor_trapezoid_agrees_with_exact() {
        let g = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.8], vec![0.8, 4.0]]).unwrap();
        let grid = Grid::new(vec![Axis::new(-6.0, 6.0, 241), Axis::new(-12.0, 12.0, 241)]).unwrap();
        let opts = DensityCdfOptions { method: CdfMethod::Tensor, ..Default::default() };
        let t = build_cdf_from_density_with(&g, &grid, opts).unwrap();
        assert!((t.at(&[0.0, 0.0]) - bivariate_normal_orthant(0.4)).abs() < 5e-3);
    }

    #[test]
    fn insufficient_coverage_is_rejected() {
        let g = AnalyticDensity::gaussian(vec![0.0], vec![vec![1.0]]).unwrap();
        let grid = Grid::uniform(1, -1.0, 1.0, 50).unwrap();
        assert!(matches!(build_cdf_from_density(&g, &grid), Err(Error::InsufficientCoverage { .. })));
    }

    #[test]
    fn node_masses_sum_to_upper_corner() {
        let g = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let grid = Grid::uniform(2, -6.0, 6.0, 40).unwrap();
        let cdf = build_cdf_from_density(&g, &grid).unwrap();
        let m: f64 = cdf.node_masses().iter().sum();
        assert!((m - cdf.upper_corner_value()).abs() < 1e-12);
    }
}
