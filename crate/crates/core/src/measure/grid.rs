use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// Default cap on the total number of grid nodes.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// One axis of a rectangular grid: `nodes` equispaced points on `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, nodes: usize) -> Self {
        Self { lower, upper, nodes }
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.nodes - 1) as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.upper
        } else {
            self.lower + i as f64 * self.step()
        }
    }

    /// Cell index `i ∈ [0, nodes-2]` and local coordinate `t ∈ [0,1]` of `x`,
    /// plus whether `x` had to be clamped into the axis range.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64, bool) {
        let clamped = !(x >= self.lower && x <= self.upper);
        let xc = if x.is_nan() { self.lower } else { x.clamp(self.lower, self.upper) };
        let s = (xc - self.lower) / self.step();
        let mut i = libm::floor(s) as isize;
        i = i.clamp(0, self.nodes as isize - 2);
        let t = (s - i as f64).clamp(0.0, 1.0);
        (i as usize, t, clamped)
    }

    /// Smallest node index whose coordinate is `≥ x` (clamped to the axis).
    pub fn ceil_index(&self, x: f64) -> usize {
        if x <= self.lower {
            return 0;
        }
        if x >= self.upper {
            return self.nodes - 1;
        }
        let mut i = libm::ceil((x - self.lower) / self.step()) as usize;
        i = i.min(self.nodes - 1);
        while i > 0 && x <= self.coord(i - 1) {
            i -= 1;
        }
        while x > self.coord(i) && i + 1 < self.nodes {
            i += 1;
        }
        i
    }
}

/// Rectangular tensor grid in dimension 1, 2 or 3. Flat node indices are
/// row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        Self::with_cap(axes, DEFAULT_NODE_CAP)
    }

    pub fn with_cap(axes: Vec<Axis>, cap: usize) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension(axes.len()));
        }
        let mut total: usize = 1;
        for (k, a) in axes.iter().enumerate() {
            if !(a.lower.is_finite() && a.upper.is_finite()) || !(a.lower < a.upper) {
                return Err(Error::DegenerateGrid(format!(
                    "axis {k}: lower {} must be below upper {}",
                    a.lower, a.upper
                )));
            }
            if a.nodes < 2 {
                return Err(Error::DegenerateGrid(format!("axis {k}: needs at least 2 nodes")));
            }
            total = total.saturating_mul(a.nodes);
        }
        if total > cap {
            return Err(Error::GridTooLarge { nodes: total, cap });
        }
        Ok(Self { axes })
    }

    /// The same axis `[lower, upper]` with `n` nodes in every dimension.
    pub fn uniform(dim: usize, lower: f64, upper: f64, n: usize) -> Result<Self> {
        Self::new((0..dim).map(|_| Axis::new(lower, upper, n)).collect())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    #[inline]
    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn stride(&self, k: usize) -> usize {
        self.axes[k + 1..].iter().map(|a| a.nodes).product()
    }

    #[inline]
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (k, a) in self.axes.iter().enumerate() {
            f = f * a.nodes + idx[k];
        }
        f
    }

    #[inline]
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].nodes;
            idx[k] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Coordinates of node `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let idx = self.multi_index(flat);
        (0..self.dim()).map(|k| self.axes[k].coord(idx[k])).collect()
    }

    pub fn lower_corner(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.lower).collect()
    }

    pub fn upper_corner(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.upper).collect()
    }

    /// Smallest cell width over all axes.
    pub fn min_step(&self) -> f64 {
        self.axes.iter().map(Axis::step).fold(f64::INFINITY, f64::min)
    }

    /// Largest cell width over all axes.
    pub fn max_step(&self) -> f64 {
        self.axes.iter().map(Axis::step).fold(0.0, f64::max)
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        libm::sqrt(self.axes.iter().map(|a| (a.upper - a.lower) * (a.upper - a.lower)).sum())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.axes.iter().zip(x).all(|(a, &v)| v >= a.lower && v <= a.upper)
    }

    /// Clamps `x` into the grid box.
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        self.axes.iter().zip(x).map(|(a, &v)| v.clamp(a.lower, a.upper)).collect()
    }

    /// Flat indices of the grid neighbours of `flat` (8-neighbourhood in 2-D,
    /// 26 in 3-D, 2 in 1-D).
    pub fn neighbours(&self, flat: usize) -> Vec<usize> {
        let d = self.dim();
        let idx = self.multi_index(flat);
        let mut out = Vec::with_capacity(26);
        let combos = 3usize.pow(d as u32);
        for c in 0..combos {
            let mut cc = c;
            let mut nb = [0usize; MAX_DIM];
            let mut ok = true;
            let mut centre = true;
            for k in 0..d {
                let off = (cc % 3) as isize - 1;
                cc /= 3;
                if off != 0 {
                    centre = false;
                }
                let v = idx[k] as isize + off;
                if v < 0 || v >= self.axes[k].nodes as isize {
                    ok = false;
                    break;
                }
                nb[k] = v as usize;
            }
            if ok && !centre {
                out.push(self.flat_index(&nb[..d]));
            }
        }
        out
    }

    /// Converts a Euclidean distance into units of the largest cell width.
    pub fn in_cells(&self, distance: f64) -> f64 {
        distance / self.max_step()
    }
}
