use alloc::vec;
use alloc::vec::Vec;

use super::cost::{dist, CostFunction};
use super::entropic::{solve_entropic, solve_entropic_grid, GridTransport};
use super::exact::{solve_exact, solve_monotone_1d, EXACT_SIZE_CAP};
use super::plan::TransportPlan;
use crate::measure::{DiscreteMeasure, Grid, GriddedCdf, MAX_DIM};
use crate::{Error, Result};

/// How a map was produced; [`invert_map`] re-solves the reversed problem
/// with the same method.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum MapOrigin {
    Exact,
    Entropic { epsilon: f64 },
    GridEntropic { epsilon: f64 },
    Rearrangement,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
enum Lookup {
    /// Sources are the nodes of `grid`; `index[flat]` is the source row of
    /// a node or `usize::MAX` for nodes that are not sources.
    Grid {
        grid: Grid,
        index: Vec<usize>,
    },
    /// 1-D sources sorted by coordinate (`order[k]` is the k-th smallest).
    Sorted {
        order: Vec<usize>,
    },
    Scattered,
}

/// A map sampled at source points: `images[i] = T(sources[i])`. Off-sample
/// points are evaluated by interpolation between nearby sources.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TransportMap {
    pub sources: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    /// Dual potential at each source, when available.
    pub potentials: Option<Vec<f64>>,
    /// Largest conditional entropy of a plan row (0 for deterministic rows).
    pub max_row_entropy: f64,
    pub origin: MapOrigin,
    /// Number of flat target-CDF segments resolved by the midpoint rule.
    pub quantile_ties: usize,
    #[cfg_attr(feature = "serde", serde(skip))]
    lookup: Lookup,
}

impl TransportMap {
    fn build(sources: Vec<Vec<f64>>, images: Vec<Vec<f64>>, origin: MapOrigin) -> Self {
        let lookup = if sources.first().is_some_and(|s| s.len() == 1) {
            let mut order: Vec<usize> = (0..sources.len()).collect();
            order.sort_by(|&a, &b| sources[a][0].total_cmp(&sources[b][0]));
            Lookup::Sorted { order }
        } else {
            Lookup::Scattered
        };
        Self { sources, images, potentials: None, max_row_entropy: 0.0, origin, quantile_ties: 0, lookup }
    }

    /// Map sampled at arbitrary points.
    pub fn from_samples(sources: Vec<Vec<f64>>, images: Vec<Vec<f64>>) -> Result<Self> {
        if sources.len() != images.len() || sources.is_empty() {
            return Err(Error::DimensionMismatch { expected: sources.len(), found: images.len() });
        }
        Ok(Self::build(sources, images, MapOrigin::Closed))
    }

    /// Closed-form map `f` sampled at `points`.
    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64>>(points: Vec<Vec<f64>>, f: F) -> Self {
        let images = points.iter().map(|p| f(p)).collect();
        Self::build(points, images, MapOrigin::Closed)
    }

    /// Map defined on every node of `grid` (row `i` is node `i`).
    pub fn on_grid(grid: &Grid, images: Vec<Vec<f64>>, origin: MapOrigin) -> Result<Self> {
        if images.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: images.len() });
        }
        let sources = (0..grid.len()).map(|f| grid.node(f)).collect();
        let mut m = Self::build(sources, images, origin);
        m.lookup = Lookup::Grid { grid: grid.clone(), index: (0..grid.len()).collect() };
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sources[0].len()
    }

    /// The grid the sources live on, if any.
    pub fn grid(&self) -> Option<&Grid> {
        match &self.lookup {
            Lookup::Grid { grid, .. } => Some(grid),
            _ => None,
        }
    }

    /// Typical source spacing: the largest cell width of the source grid, or
    /// the median nearest-neighbour gap for sorted 1-D sources.
    pub fn cell_size(&self) -> f64 {
        match &self.lookup {
            Lookup::Grid { grid, .. } => grid.max_step(),
            Lookup::Sorted { order } => {
                let mut gaps: Vec<f64> =
                    order.windows(2).map(|w| self.sources[w[1]][0] - self.sources[w[0]][0]).collect();
                super::cost::median(&mut gaps)
            }
            Lookup::Scattered => {
                let n = self.len().min(500);
                let mut gaps: Vec<f64> = (0..n)
                    .map(|i| {
                        (0..self.len())
                            .filter(|&j| j != i)
                            .map(|j| dist(&self.sources[i], &self.sources[j]))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                super::cost::median(&mut gaps)
            }
        }
    }

    /// `T(x)`. Sorted 1-D maps interpolate linearly (constant beyond the end
    /// points); grid maps use inverse-distance weights over the sources at
    /// the corners of the cell containing `x`; scattered maps use the four
    /// nearest sources.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.lookup {
            Lookup::Sorted { order } => {
                let v = x[0];
                let key = |k: usize| self.sources[order[k]][0];
                let n = order.len();
                if v <= key(0) {
                    return self.images[order[0]].clone();
                }
                if v >= key(n - 1) {
                    return self.images[order[n - 1]].clone();
                }
                let hi = order.partition_point(|&i| self.sources[i][0] < v);
                let lo = hi - 1;
                let (x0, x1) = (key(lo), key(hi));
                let t = if x1 > x0 { (v - x0) / (x1 - x0) } else { 0.0 };
                let (a, b) = (&self.images[order[lo]], &self.images[order[hi]]);
                a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
            }
            Lookup::Grid { grid, index } => {
                let d = grid.dim();
                let mut base = [0usize; MAX_DIM];
                for k in 0..d {
                    base[k] = grid.axis(k).locate(x[k]).0;
                }
                let mut cands: Vec<usize> = Vec::with_capacity(1 << d);
                for corner in 0..(1usize << d) {
                    let mut f = 0;
                    for k in 0..d {
                        f = f * grid.axis(k).nodes + base[k] + ((corner >> k) & 1);
                    }
                    if index[f] != usize::MAX {
                        cands.push(index[f]);
                    }
                }
                if cands.is_empty() {
                    cands = self.nearest(x, 4);
                }
                self.idw(x, &cands)
            }
            Lookup::Scattered => {
                let c = self.nearest(x, 4);
                self.idw(x, &c)
            }
        }
    }

    fn nearest(&self, x: &[f64], k: usize) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self.sources.iter().enumerate().map(|(i, s)| (dist(s, x), i)).collect();
        let k = k.min(d.len());
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        d[..k].iter().map(|p| p.1).collect()
    }

    fn idw(&self, x: &[f64], cands: &[usize]) -> Vec<f64> {
        let d = self.images[cands[0]].len();
        let mut acc = vec![0.0; d];
        let mut wsum = 0.0;
        for &c in cands {
            let r = dist(&self.sources[c], x);
            if r < 1e-14 {
                return self.images[c].clone();
            }
            let w = 1.0 / r;
            wsum += w;
            for k in 0..d {
                acc[k] += w * self.images[c][k];
            }
        }
        acc.iter().map(|a| a / wsum).collect()
    }
}

/// Barycentric projection of a plan: the image of source `i` is the
/// coupling-weighted mean of the target points in row `i`.
pub fn extract_map(plan: &TransportPlan) -> Result<TransportMap> {
    let (n, _) = plan.coupling.shape();
    let d = plan.target.dim();
    let mut num = vec![vec![0.0; d]; n];
    let mut mass = vec![0.0; n];
    plan.coupling.for_each(|i, j, v| {
        mass[i] += v;
        for k in 0..d {
            num[i][k] += v * plan.target.point(j)[k];
        }
    });
    if let Some(i) = mass.iter().position(|m| !(*m > 0.0)) {
        return Err(Error::ZeroMassRow(i));
    }
    let mut entropy = vec![0.0; n];
    plan.coupling.for_each(|i, _, v| {
        let p = v / mass[i];
        if p > 0.0 {
            entropy[i] -= p * libm::log(p);
        }
    });
    let images = num.iter().zip(&mass).map(|(s, m)| s.iter().map(|v| v / m).collect()).collect();
    let origin = match plan.epsilon {
        Some(e) => MapOrigin::Entropic { epsilon: e },
        None => MapOrigin::Exact,
    };
    let mut map = TransportMap::build(plan.source.points().to_vec(), images, origin);
    map.max_row_entropy = entropy.iter().copied().fold(0.0, f64::max);
    map.potentials = plan.potentials.as_ref().map(|(f, _)| f.clone());
    Ok(map)
}

/// Out-of-sample image of an entropic plan with squared-Euclidean cost:
/// `T(x) = Σ_j b_j e^{(g_j − |x − y_j|²)/ε} y_j / Σ_j b_j e^{(g_j − |x − y_j|²)/ε}`.
/// At a source point this is the barycentric image of its row.
pub fn entropic_map_at(plan: &TransportPlan, x: &[f64]) -> Result<Vec<f64>> {
    let (eps, g) = match (plan.epsilon, &plan.potentials) {
        (Some(e), Some((_, g))) => (e, g),
        _ => return Err(crate::error::invalid("entropic plan with potentials required")),
    };
    let nu = &plan.target;
    if x.len() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: nu.dim(), found: x.len() });
    }
    let logits: Vec<f64> = (0..nu.len())
        .map(|j| {
            let y = nu.point(j);
            let c: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (g[j] - c) / eps + libm::log(nu.weights()[j])
        })
        .collect();
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = vec![0.0; nu.dim()];
    let mut total = 0.0;
    for (j, l) in logits.iter().enumerate() {
        let w = libm::exp(l - mx);
        total += w;
        for (a, v) in acc.iter_mut().zip(nu.point(j)) {
            *a += w * v;
        }
    }
    Ok(acc.into_iter().map(|a| a / total).collect())
}

/// Map of a grid solution, defined on every source node.
pub fn grid_transport_map(sol: &GridTransport) -> Result<TransportMap> {
    let mut m =
        TransportMap::on_grid(&sol.source_grid, sol.images.clone(), MapOrigin::GridEntropic { epsilon: sol.epsilon })?;
    m.potentials = Some(sol.f.clone());
    Ok(m)
}

/// Inverse map of a grid solution from the same dual potentials, defined on
/// every target node.
pub fn grid_transport_inverse_map(sol: &GridTransport) -> Result<TransportMap> {
    let mut m = TransportMap::on_grid(
        &sol.target_grid,
        sol.inverse_images.clone(),
        MapOrigin::GridEntropic { epsilon: sol.epsilon },
    )?;
    m.potentials = Some(sol.g.clone());
    Ok(m)
}

/// Quantile of a 1-D gridded CDF at level `p`: linear inversion within the
/// cell where the CDF crosses `p`; if the CDF equals `p` on a whole run of
/// nodes the midpoint of the run is returned and `true` is reported.
pub fn gridded_quantile(cdf: &GriddedCdf, p: f64) -> (f64, bool) {
    let a = cdf.grid().axis(0);
    let v = cdf.values();
    let n = v.len();
    if p <= v[0] {
        return (a.lower, false);
    }
    if p >= v[n - 1] {
        return (a.upper, false);
    }
    // First node with F ≥ p.
    let hi = v.partition_point(|&x| x < p);
    if v[hi] == p {
        let end = hi + v[hi..].partition_point(|&x| x <= p) - 1;
        if end > hi {
            return (0.5 * (a.coord(hi) + a.coord(end)), true);
        }
        return (a.coord(hi), false);
    }
    let lo = hi - 1;
    let t = (p - v[lo]) / (v[hi] - v[lo]);
    (a.coord(lo) + t * (a.coord(hi) - a.coord(lo)), false)
}

/// `T = F_tgt⁻¹ ∘ F_src` at the source grid nodes.
pub fn monotone_rearrangement_1d(src: &GriddedCdf, tgt: &GriddedCdf) -> Result<TransportMap> {
    if src.dim() != 1 || tgt.dim() != 1 {
        return Err(Error::UnsupportedDimension(src.dim().max(tgt.dim())));
    }
    let mut ties = 0;
    let images: Vec<Vec<f64>> = src
        .values()
        .iter()
        .map(|&p| {
            let (q, tie) = gridded_quantile(tgt, p);
            ties += tie as usize;
            vec![q]
        })
        .collect();
    let mut m = TransportMap::on_grid(src.grid(), images, MapOrigin::Rearrangement)?;
    m.quantile_ties = ties;
    Ok(m)
}

/// Fraction of source mass required to satisfy the inverse-consistency
/// tolerance.
pub const INVERSE_MASS_FRACTION: f64 = 0.95;

/// Inverse of `map` (which pushes `mu` to `nu`), obtained by solving the
/// reversed problem `nu → mu` with the method that produced `map`.
/// `tolerance` bounds `‖T⁻¹(T(x)) − x‖` on 95% of the source mass; `None`
/// means two source cells.
pub fn invert_map(
    map: &TransportMap,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tolerance: Option<f64>,
) -> Result<TransportMap> {
    let cost = CostFunction::SquaredEuclidean;
    let inverse = match (map.origin, map.grid()) {
        (MapOrigin::GridEntropic { .. } | MapOrigin::Rearrangement, Some(_))
            if nu_grid(nu).is_some() && mu.dim() > 1 =>
        {
            let (tg, tm) = nu_grid(nu).expect("checked");
            let (sg, sm) = nu_grid(mu).ok_or(Error::GridsDiffer)?;
            let eps = match map.origin {
                MapOrigin::GridEntropic { epsilon } => epsilon,
                _ => tg.max_step() * tg.max_step(),
            };
            grid_transport_map(&solve_entropic_grid(&tg, &tm, &sg, &sm, eps)?)?
        }
        _ if mu.dim() == 1 => extract_map(&solve_monotone_1d(nu, mu, &cost)?)?,
        (MapOrigin::Entropic { epsilon }, _) | (MapOrigin::GridEntropic { epsilon }, _) => {
            extract_map(&solve_entropic(nu, mu, &cost, epsilon)?)?
        }
        _ if mu.len() + nu.len() <= EXACT_SIZE_CAP => extract_map(&solve_exact(nu, mu, &cost)?)?,
        _ => {
            let med = super::entropic::median_pairwise_cost(nu, mu, &cost)?;
            extract_map(&solve_entropic(nu, mu, &cost, 0.01 * med)?)?
        }
    };
    let tol = tolerance.unwrap_or(2.0 * map.cell_size());
    let residual = composition_residual(map, &inverse, mu, INVERSE_MASS_FRACTION);
    if residual > tol {
        return Err(Error::NonInvertible { residual, tolerance: tol });
    }
    Ok(inverse)
}

/// The `fraction`-quantile (under `mu`) of `‖inv(fwd(x)) − x‖`.
pub fn composition_residual(fwd: &TransportMap, inv: &TransportMap, mu: &DiscreteMeasure, fraction: f64) -> f64 {
    let mut d: Vec<(f64, f64)> =
        mu.points().iter().zip(mu.weights()).map(|(x, w)| (dist(&inv.apply(&fwd.apply(x)), x), *w)).collect();
    weighted_quantile(&mut d, fraction)
}

/// Weighted quantile of `(value, weight)` pairs.
pub(crate) fn weighted_quantile(v: &mut [(f64, f64)], q: f64) -> f64 {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = v.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(x, w) in v.iter() {
        acc += w;
        if acc >= q * total - 1e-12 {
            return x;
        }
    }
    v.last().map_or(0.0, |p| p.0)
}

/// Recovers `(grid, node masses)` for a measure whose support is a full
/// tensor grid (as produced by `DiscreteMeasure::from_gridded` on a law
/// with positive mass everywhere).
fn nu_grid(m: &DiscreteMeasure) -> Option<(Grid, Vec<f64>)> {
    let d = m.dim();
    if d > MAX_DIM {
        return None;
    }
    let mut axes = Vec::with_capacity(d);
    let mut sizes = Vec::with_capacity(d);
    for k in 0..d {
        let mut c: Vec<f64> = m.points().iter().map(|p| p[k]).collect();
        c.sort_by(|a, b| a.total_cmp(b));
        c.dedup();
        if c.len() < 2 {
            return None;
        }
        sizes.push(c.len());
        axes.push(crate::measure::Axis::new(c[0], c[c.len() - 1], c.len()));
    }
    if sizes.iter().product::<usize>() != m.len() {
        return None;
    }
    let grid = Grid::new(axes).ok()?;
    let mut mass = vec![0.0; grid.len()];
    let mut idx = [0usize; MAX_DIM];
    for (p, w) in m.points().iter().zip(m.weights()) {
        for k in 0..d {
            let a = grid.axis(k);
            let t = (p[k] - a.lower) / a.step();
            let i = libm::round(t);
            if libm::fabs(t - i) > 1e-6 {
                return None;
            }
            idx[k] = i as usize;
        }
        mass[grid.flat_index(&idx[..d])] = *w;
    }
    Some((grid, mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_cdf_from_density, AnalyticDensity};
    use crate::quasi::rng;
    use crate::special::{norm_cdf, norm_quantile};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gauss_cdf(mean: f64, sd: f64, lo: f64, hi: f64, n: usize) -> GriddedCdf {
        let g = AnalyticDensity::gaussian(vec![mean], vec![vec![sd * sd]]).unwrap();
        build_cdf_from_density(&g, &Grid::uniform(1, lo, hi, n).unwrap()).unwrap()
    }

    #[test]
    fn rearrangement_identity_and_affine() {
        let a = gauss_cdf(0.0, 1.0, -8.0, 8.0, 1601);
        let id = monotone_rearrangement_1d(&a, &a).unwrap();
        for (s, t) in id.sources.iter().zip(&id.images) {
            if a.at(s) > 1e-6 && a.at(s) < 1.0 - 1e-6 {
                assert!((s[0] - t[0]).abs() < 1e-8, "{s:?} {t:?}");
            }
        }
        let b = gauss_cdf(1.0, 2.0, -15.0, 17.0, 3201);
        let t = monotone_rearrangement_1d(&a, &b).unwrap();
        assert!((t.apply(&[0.0])[0] - 1.0).abs() < 1e-3);
        assert!((t.apply(&[1.0])[0] - 3.0).abs() < 1e-3);
        let c = gauss_cdf(0.5, 1.5, -12.0, 13.0, 2501);
        let t = monotone_rearrangement_1d(&a, &c).unwrap();
        for x in [-3.0, -1.0, 0.0, 0.7, 2.5] {
            assert!((t.apply(&[x])[0] - (0.5 + 1.5 * x)).abs() < 1e-3, "x={x}");
        }
    }

    #[test]
    fn flat_segments_use_midpoint() {
        let grid = Grid::uniform(1, 0.0, 4.0, 5).unwrap();
        let cdf = GriddedCdf::from_values(grid, vec![0.0, 0.5, 0.5, 0.5, 1.0], 0.0).unwrap();
        assert_eq!(gridded_quantile(&cdf, 0.5), (2.0, true));
        assert_eq!(gridded_quantile(&cdf, 0.25), (0.5, false));
    }

    #[test]
    fn diagonal_plan_gives_identity() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let plan = solve_exact(&mu, &mu, &CostFunction::SquaredEuclidean).unwrap();
        let m = extract_map(&plan).unwrap();
        assert_eq!(m.images, mu.points().to_vec());
        assert_eq!(m.max_row_entropy, 0.0);
    }

    fn quantile_points(n: usize, mean: f64, sd: f64) -> DiscreteMeasure {
        DiscreteMeasure::uniform((0..n).map(|i| vec![mean + sd * norm_quantile((i as f64 + 0.5) / n as f64)]).collect())
            .unwrap()
    }

    #[test]
    fn sampled_gaussian_map_is_affine() {
        let mut r = rng(11, 0);
        let draw = |r: &mut rand_chacha::ChaCha8Rng, m: f64, s: f64| -> Vec<Vec<f64>> {
            (0..500).map(|_| vec![m + s * Distribution::<f64>::sample(&StandardNormal, r)]).collect::<Vec<_>>()
        };
        let mu = DiscreteMeasure::uniform(draw(&mut r, 0.0, 1.0)).unwrap();
        let nu = DiscreteMeasure::uniform(draw(&mut r, 1.0, 2.0)).unwrap();
        let plan = solve_exact(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap();
        let map = extract_map(&plan).unwrap();
        let lo = norm_quantile(0.05);
        let mut checked = 0;
        for (s, t) in map.sources.iter().zip(&map.images) {
            if s[0].abs() <= -lo {
                checked += 1;
                // Sampling noise of the empirical quantiles dominates; the
                // tolerance reflects n = 500.
                assert!((t[0] - (1.0 + 2.0 * s[0])).abs() < 0.5, "{s:?} {t:?}");
            }
        }
        assert!(checked > 400);
        let _ = r.random::<f64>();
    }

    #[test]
    fn entropic_extension_agrees_with_row_barycentres() {
        let mu = quantile_points(40, 0.0, 1.0);
        let nu = quantile_points(30, 1.0, 2.0);
        let plan = crate::transport::solve_entropic(&mu, &nu, &CostFunction::SquaredEuclidean, 0.05).unwrap();
        let map = extract_map(&plan).unwrap();
        for (s, t) in map.sources.iter().zip(&map.images) {
            assert!((entropic_map_at(&plan, s).unwrap()[0] - t[0]).abs() < 1e-8);
        }
        // off-sample images interpolate monotonically
        let a = entropic_map_at(&plan, &[0.05]).unwrap()[0];
        let b = entropic_map_at(&plan, &[0.15]).unwrap()[0];
        assert!(a < b);
        let exact = solve_exact(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap();
        assert!(entropic_map_at(&exact, &[0.0]).is_err());
    }

    #[test]
    fn quantile_discretization_map_is_affine() {
        let mu = quantile_points(500, 0.0, 1.0);
        let nu = quantile_points(500, 1.0, 2.0);
        let map = extract_map(&solve_exact(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap()).unwrap();
        for (s, t) in map.sources.iter().zip(&map.images) {
            let u = norm_cdf(s[0]);
            if (0.05..=0.95).contains(&u) {
                assert!((t[0] - (1.0 + 2.0 * s[0])).abs() < 0.05);
            }
        }
    }

    #[test]
    fn affine_inverse() {
        let mu = quantile_points(400, 0.0, 1.0);
        let nu = quantile_points(400, 1.0, 2.0);
        let fwd = TransportMap::from_fn(mu.points().to_vec(), |x| vec![1.0 + 2.0 * x[0]]);
        let inv = invert_map(&fwd, &mu, &nu, Some(0.05)).unwrap();
        for y in [-2.0, 0.0, 1.0, 2.5, 4.0] {
            assert!((inv.apply(&[y])[0] - (y - 1.0) / 2.0).abs() < 1e-3, "y={y}");
        }
        let id = TransportMap::from_fn(mu.points().to_vec(), |x| x.to_vec());
        let inv = invert_map(&id, &mu, &mu, None).unwrap();
        for x in mu.points() {
            assert!((inv.apply(x)[0] - x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn images_stay_in_target_hull() {
        let mut r = rng(2, 2);
        let pts = |r: &mut rand_chacha::ChaCha8Rng, n| -> Vec<Vec<f64>> {
            (0..n).map(|_| vec![r.random::<f64>(), r.random::<f64>() * 2.0]).collect()
        };
        let mu = DiscreteMeasure::uniform(pts(&mut r, 40)).unwrap();
        let nu = DiscreteMeasure::uniform(pts(&mut r, 30)).unwrap();
        let plan = solve_entropic(&mu, &nu, &CostFunction::SquaredEuclidean, 0.05).unwrap();
        let m = extract_map(&plan).unwrap();
        let (lo, hi) = nu.bounding_box();
        for t in &m.images {
            for k in 0..2 {
                assert!(t[k] >= lo[k] - 1e-12 && t[k] <= hi[k] + 1e-12);
            }
        }
    }
}
