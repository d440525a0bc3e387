use alloc::vec;
use alloc::vec::Vec;

use super::cost::{median, CostFunction};
use super::plan::{Coupling, TransportPlan};
use crate::measure::{DiscreteMeasure, Grid, MAX_DIM};
use crate::{Error, Result};

/// Largest `n · m` for the dense solver (the cost matrix is materialized).
pub const DENSE_ENTRIES_CAP: usize = 25_000_000;

/// Marginal residual (L1 over the column marginal) accepted at the final
/// regularization level.
pub const MARGINAL_TOL: f64 = 1e-6;

/// Ratio between successive regularization levels of the annealing ladder.
const LADDER_RATIO: f64 = 0.5;

/// Sinkhorn iteration caps per intermediate / final ladder stage.
const STAGE_ITERS: usize = 2_000;
const FINAL_ITERS: usize = 20_000;

/// Intermediate stages only need a rough fixed point.
const STAGE_TOL: f64 = 1e-3;

/// Entropic regularization levels from `median_cost` (factor 1.0) down to
/// `target`, halving at each step; the last entry is `target` itself.
pub fn epsilon_ladder(median_cost: f64, target: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut e = median_cost;
    while e > target {
        out.push(e);
        e *= LADDER_RATIO;
    }
    out.push(target);
    out
}

/// Median of the pairwise costs between the two supports (over all pairs
/// when there are at most 10⁶, otherwise over a fixed strided subsample).
pub fn median_pairwise_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostFunction) -> Result<f64> {
    let (n, m) = (mu.len(), nu.len());
    let mut vals = Vec::new();
    if n * m <= 1_000_000 {
        vals = cost.matrix(mu, nu)?;
    } else {
        let step = (n * m) / 1_000_000 + 1;
        let mut k = 0;
        while k < n * m {
            let (i, j) = (k / m, k % m);
            vals.push(cost.eval(mu.point(i), nu.point(j)).unwrap_or(0.0));
            k += step;
        }
    }
    Ok(median(&mut vals))
}

/// Log-domain Sinkhorn between two point clouds, annealed along
/// [`epsilon_ladder`] down to `epsilon` (absolute units of the cost).
pub fn solve_entropic(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    epsilon: f64,
) -> Result<TransportPlan> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(crate::error::invalid("epsilon must be positive"));
    }
    if cost.is_concave_power() {
        return Err(crate::error::invalid("concave-power costs are handled by the exact solver only"));
    }
    let (n, m) = (mu.len(), nu.len());
    if n * m > DENSE_ENTRIES_CAP {
        return Err(Error::SizeCapExceeded { size: n * m, cap: DENSE_ENTRIES_CAP });
    }
    let c = cost.matrix(mu, nu)?;
    let mut sorted = c.clone();
    let med = median(&mut sorted).max(f64::MIN_POSITIVE);
    let la: Vec<f64> = mu.weights().iter().map(|w| libm::log(*w)).collect();
    let lb: Vec<f64> = nu.weights().iter().map(|w| libm::log(*w)).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let ladder = epsilon_ladder(med, epsilon);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for (s, &eps) in ladder.iter().enumerate() {
        let last = s + 1 == ladder.len();
        let (cap, tol) = if last { (FINAL_ITERS, MARGINAL_TOL) } else { (STAGE_ITERS, STAGE_TOL) };
        let (it, res) = dense_sinkhorn(&c, n, m, &la, &lb, eps, &mut f, &mut g, cap, tol);
        iterations += it;
        residual = res;
        if last && res > tol {
            return Err(Error::NotConverged { iterations, residual });
        }
    }
    let mut data = vec![0.0; n * m];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let v = libm::exp((f[i] + g[j] - c[i * m + j]) / epsilon + la[i] + lb[j]);
            data[i * m + j] = v;
            total += v * c[i * m + j];
        }
    }
    let _ = residual;
    Ok(TransportPlan {
        source: mu.clone(),
        target: nu.clone(),
        coupling: Coupling::Dense { rows: n, cols: m, data },
        total_cost: total,
        epsilon: Some(epsilon),
        potentials: Some((f, g)),
    })
}

/// Scalings beyond `e^ABSORB` are folded back into the potentials.
const ABSORB: f64 = 40.0;

/// Sinkhorn on the kernel `K_ij = e^{(f_i + g_j − c_ij)/ε}` with the current
/// potentials absorbed, so an iteration is two matrix-vector products. The
/// scalings are folded into `(f, g)` whenever they grow large. Falls back to
/// the log-domain iteration if the kernel under- or overflows.
#[allow(clippy::too_many_arguments)]
fn dense_sinkhorn(
    c: &[f64],
    n: usize,
    m: usize,
    la: &[f64],
    lb: &[f64],
    eps: f64,
    f: &mut [f64],
    g: &mut [f64],
    cap: usize,
    tol: f64,
) -> (usize, f64) {
    let mut buf = vec![0.0; n.max(m)];
    update_rows(c, n, m, lb, eps, g, f, &mut buf);
    let a: Vec<f64> = la.iter().map(|v| libm::exp(*v)).collect();
    let b: Vec<f64> = lb.iter().map(|v| libm::exp(*v)).collect();
    let mut k = vec![0.0; n * m];
    let absorb_kernel = |k: &mut [f64], f: &[f64], g: &[f64]| {
        for i in 0..n {
            for j in 0..m {
                k[i * m + j] = libm::exp((f[i] + g[j] - c[i * m + j]) / eps);
            }
        }
    };
    absorb_kernel(&mut k, f, g);
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    let mut col = vec![0.0; m];
    let mut residual = f64::INFINITY;
    let mut it = 0;
    while it < cap {
        col.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let w = a[i] * u[i];
            let row = &k[i * m..(i + 1) * m];
            for j in 0..m {
                col[j] += w * row[j];
            }
        }
        residual = (0..m).map(|j| b[j] * libm::fabs(v[j] * col[j] - 1.0)).sum();
        if !residual.is_finite() || col.iter().any(|x| !(*x > 0.0)) {
            return log_sinkhorn(c, n, m, la, lb, eps, f, g, cap - it, tol);
        }
        if residual <= tol {
            break;
        }
        for j in 0..m {
            v[j] = 1.0 / col[j];
        }
        for i in 0..n {
            let row = &k[i * m..(i + 1) * m];
            let s: f64 = row.iter().zip(&v).zip(&b).map(|((kk, vv), bb)| kk * vv * bb).sum();
            if !(s > 0.0) || !s.is_finite() {
                return log_sinkhorn(c, n, m, la, lb, eps, f, g, cap - it, tol);
            }
            u[i] = 1.0 / s;
        }
        it += 1;
        let big = u.iter().chain(&v).any(|x| libm::fabs(libm::log(*x)) > ABSORB);
        if big {
            for i in 0..n {
                f[i] += eps * libm::log(u[i]);
                u[i] = 1.0;
            }
            for j in 0..m {
                g[j] += eps * libm::log(v[j]);
                v[j] = 1.0;
            }
            absorb_kernel(&mut k, f, g);
        }
    }
    for i in 0..n {
        f[i] += eps * libm::log(u[i]);
    }
    for j in 0..m {
        g[j] += eps * libm::log(v[j]);
    }
    (it, residual)
}

/// Alternating soft-min updates; the row marginals are exact after each
/// `f` update and the returned residual is the L1 column error.
#[allow(clippy::too_many_arguments)]
fn log_sinkhorn(
    c: &[f64],
    n: usize,
    m: usize,
    la: &[f64],
    lb: &[f64],
    eps: f64,
    f: &mut [f64],
    g: &mut [f64],
    cap: usize,
    tol: f64,
) -> (usize, f64) {
    let mut buf = vec![0.0; n.max(m)];
    let mut g_new = vec![0.0; m];
    let mut residual = f64::INFINITY;
    // Initial f for the current g.
    update_rows(c, n, m, lb, eps, g, f, &mut buf);
    for it in 0..cap {
        for j in 0..m {
            for i in 0..n {
                buf[i] = (f[i] - c[i * m + j]) / eps + la[i];
            }
            g_new[j] = -eps * lse(&buf[..n]);
        }
        residual = g
            .iter()
            .zip(&g_new)
            .zip(lb)
            .map(|((go, gn), l)| libm::exp(*l) * libm::fabs(libm::exp((go - gn) / eps) - 1.0))
            .sum();
        if residual <= tol {
            return (it, residual);
        }
        g.copy_from_slice(&g_new);
        update_rows(c, n, m, lb, eps, g, f, &mut buf);
    }
    (cap, residual)
}

#[allow(clippy::too_many_arguments)]
fn update_rows(c: &[f64], n: usize, m: usize, lb: &[f64], eps: f64, g: &[f64], f: &mut [f64], buf: &mut [f64]) {
    for i in 0..n {
        for j in 0..m {
            buf[j] = (g[j] - c[i * m + j]) / eps + lb[j];
        }
        f[i] = -eps * lse(&buf[..m]);
    }
}

fn lse(v: &[f64]) -> f64 {
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + libm::log(v.iter().map(|x| libm::exp(x - mx)).sum::<f64>())
}

/// Entropic squared-Euclidean transport between two measures supported on
/// the nodes of tensor grids, with the coupling kept implicit.
#[derive(Debug, Clone)]
pub struct GridTransport {
    pub source_grid: Grid,
    pub target_grid: Grid,
    pub source_mass: Vec<f64>,
    pub target_mass: Vec<f64>,
    /// Dual potentials on the source / target nodes.
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub epsilon: f64,
    /// Barycentric image of every source node.
    pub images: Vec<Vec<f64>>,
    /// Barycentric pre-image of every target node, from the same plan.
    pub inverse_images: Vec<Vec<f64>>,
    pub total_cost: f64,
    /// L1 column-marginal error (rows are exact).
    pub residual: f64,
    pub iterations: usize,
}

/// Log-domain Sinkhorn for grid-supported measures with squared-Euclidean
/// cost. The Gibbs kernel factorizes over axes, so each soft-min costs
/// `O(N · Σ n_k)` instead of `O(N²)`; windows around the running arg-max
/// keep it near `O(N)` once the potentials settle.
pub fn solve_entropic_grid(
    source_grid: &Grid,
    source_mass: &[f64],
    target_grid: &Grid,
    target_mass: &[f64],
    epsilon: f64,
) -> Result<GridTransport> {
    if source_grid.dim() != target_grid.dim() {
        return Err(Error::DimensionMismatch { expected: source_grid.dim(), found: target_grid.dim() });
    }
    if source_mass.len() != source_grid.len() || target_mass.len() != target_grid.len() {
        return Err(Error::DimensionMismatch { expected: source_grid.len(), found: source_mass.len() });
    }
    if !(epsilon > 0.0) {
        return Err(crate::error::invalid("epsilon must be positive"));
    }
    for m in [source_mass, target_mass] {
        let s: f64 = m.iter().sum();
        if m.iter().any(|w| !(*w >= 0.0)) || libm::fabs(s - 1.0) > 1e-9 {
            return Err(Error::NotNormalized(s));
        }
    }
    let d = source_grid.dim();
    let sx: Vec<Vec<f64>> = axis_coords(source_grid);
    let ty: Vec<Vec<f64>> = axis_coords(target_grid);
    let la: Vec<f64> = source_mass.iter().map(|w| libm::log(*w)).collect();
    let lb: Vec<f64> = target_mass.iter().map(|w| libm::log(*w)).collect();

    let med = grid_median_sq_dist(source_grid, target_grid);
    let ladder = epsilon_ladder(med, epsilon);
    let mut to_src = SeparableLse::new(&ty, &sx);
    let mut to_tgt = SeparableLse::new(&sx, &ty);
    let mut f = vec![0.0; source_grid.len()];
    let mut g = vec![0.0; target_grid.len()];
    let mut h_t = vec![0.0; target_grid.len()];
    let mut h_s = vec![0.0; source_grid.len()];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    for (s, &eps) in ladder.iter().enumerate() {
        let last = s + 1 == ladder.len();
        let (cap, tol) = if last { (FINAL_ITERS, MARGINAL_TOL) } else { (STAGE_ITERS, STAGE_TOL) };
        to_src.set_epsilon(eps);
        to_tgt.set_epsilon(eps);
        let mut full = true;
        // f for the current g.
        for (h, (gj, l)) in h_t.iter_mut().zip(g.iter().zip(&lb)) {
            *h = gj / eps + l;
        }
        let fs = to_src.reduce(&h_t, full);
        for (fi, v) in f.iter_mut().zip(&fs) {
            *fi = -eps * v;
        }
        let mut it = 0;
        loop {
            full = it < 3 || it % 50 == 0;
            for (h, (fi, l)) in h_s.iter_mut().zip(f.iter().zip(&la)) {
                *h = fi / eps + l;
            }
            let gs = to_tgt.reduce(&h_s, full);
            residual = 0.0;
            for j in 0..g.len() {
                if target_mass[j] > 0.0 {
                    let gn = -eps * gs[j];
                    residual += target_mass[j] * libm::fabs(libm::exp((g[j] - gn) / eps) - 1.0);
                }
            }
            it += 1;
            // (f, g) has exact rows and column error `residual`.
            if residual <= tol || it >= cap {
                break;
            }
            for (gj, v) in g.iter_mut().zip(&gs) {
                *gj = -eps * v;
            }
            for (h, (gj, l)) in h_t.iter_mut().zip(g.iter().zip(&lb)) {
                *h = gj / eps + l;
            }
            let fs = to_src.reduce(&h_t, full);
            for (fi, v) in f.iter_mut().zip(&fs) {
                *fi = -eps * v;
            }
        }
        iterations += it;
        if last && residual > tol {
            return Err(Error::NotConverged { iterations, residual });
        }
    }

    // Barycentric images: E[y_k | x_i] = Σ_j exp((f_i + g_j − c_ij)/ε) b_j y_jk.
    let eps = epsilon;
    let mut images = vec![vec![0.0; d]; source_grid.len()];
    for k in 0..d {
        let lo = ty[k][0] - 1.0;
        for (jf, h) in h_t.iter_mut().enumerate() {
            let idx = target_grid.multi_index(jf);
            *h = g[jf] / eps + lb[jf] + libm::log(ty[k][idx[k]] - lo);
        }
        let r = to_src.reduce(&h_t, true);
        for (i, img) in images.iter_mut().enumerate() {
            img[k] = libm::exp(f[i] / eps + r[i]) + lo;
        }
    }
    let s_lo: Vec<f64> = sx.iter().map(|c| c[0] - 1.0).collect();
    let mut inverse_images = vec![vec![0.0; d]; target_grid.len()];
    for k in 0..d {
        for (i, h) in h_s.iter_mut().enumerate() {
            let idx = source_grid.multi_index(i);
            *h = f[i] / eps + la[i] + libm::log(sx[k][idx[k]] - s_lo[k]);
        }
        let r = to_tgt.reduce(&h_s, true);
        for (j, img) in inverse_images.iter_mut().enumerate() {
            img[k] = libm::exp(g[j] / eps + r[j]) + s_lo[k];
        }
    }
    // Cost = Σ a|x|² − 2 Σ a⟨x, T(x)⟩ + Σ b|y|² (columns exact to the residual).
    let mut total = 0.0;
    for i in 0..source_grid.len() {
        let x = source_grid.node(i);
        let t = &images[i];
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let xt: f64 = x.iter().zip(t).map(|(a, b)| a * b).sum();
        total += source_mass[i] * (xx - 2.0 * xt);
    }
    for j in 0..target_grid.len() {
        let y = target_grid.node(j);
        total += target_mass[j] * y.iter().map(|v| v * v).sum::<f64>();
    }

    Ok(GridTransport {
        source_grid: source_grid.clone(),
        target_grid: target_grid.clone(),
        source_mass: source_mass.to_vec(),
        target_mass: target_mass.to_vec(),
        f,
        g,
        epsilon,
        images,
        inverse_images,
        total_cost: total,
        residual,
        iterations,
    })
}

fn axis_coords(grid: &Grid) -> Vec<Vec<f64>> {
    grid.axes().iter().map(|a| (0..a.nodes).map(|i| a.coord(i)).collect()).collect()
}

/// Median squared distance between source and target nodes, from the
/// per-axis distributions of squared coordinate gaps on a fixed subsample.
fn grid_median_sq_dist(src: &Grid, tgt: &Grid) -> f64 {
    let ns = src.len();
    let nt = tgt.len();
    let total = ns * nt;
    let step = total / 200_000 + 1;
    let mut vals = Vec::with_capacity(total / step + 1);
    let mut k = 0;
    while k < total {
        let (i, j) = (k / nt, k % nt);
        let (a, b) = (src.multi_index(i), tgt.multi_index(j));
        let mut s = 0.0;
        for ax in 0..src.dim() {
            let dx = src.axis(ax).coord(a[ax]) - tgt.axis(ax).coord(b[ax]);
            s += dx * dx;
        }
        vals.push(s);
        // An odd stride avoids aliasing with the row length.
        k += step | 1;
    }
    median(&mut vals).max(f64::MIN_POSITIVE)
}

/// Soft-min over a tensor grid with separable squared-distance cost:
/// `out(i) = log Σ_j exp(h(j) − ‖x_i − y_j‖²/ε)`, one axis at a time.
struct SeparableLse {
    /// Per axis: input coordinates, output coordinates.
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    /// Per axis: cost table `out × in` divided by ε.
    tables: Vec<Vec<f64>>,
    /// Per axis step: arg-max hint for every output entry of that step.
    hints: Vec<Vec<u32>>,
}

/// Terms more than this far below the running maximum (in log units) are
/// dropped by the windowed reduction.
const WINDOW_CUT: f64 = 40.0;

impl SeparableLse {
    fn new(inputs: &[Vec<f64>], outputs: &[Vec<f64>]) -> Self {
        let d = inputs.len();
        let mut hints = Vec::with_capacity(d);
        for k in 0..d {
            let size: usize = (0..d).map(|a| if a <= k { outputs[a].len() } else { inputs[a].len() }).product();
            hints.push(vec![0u32; size]);
        }
        Self { inputs: inputs.to_vec(), outputs: outputs.to_vec(), tables: vec![Vec::new(); d], hints }
    }

    fn set_epsilon(&mut self, eps: f64) {
        for k in 0..self.inputs.len() {
            let (xin, xout) = (&self.inputs[k], &self.outputs[k]);
            let mut t = Vec::with_capacity(xin.len() * xout.len());
            for &o in xout {
                for &v in xin {
                    t.push((o - v) * (o - v) / eps);
                }
            }
            self.tables[k] = t;
        }
    }

    fn reduce(&mut self, h: &[f64], full: bool) -> Vec<f64> {
        let d = self.inputs.len();
        let mut cur = h.to_vec();
        let mut shape = [0usize; MAX_DIM];
        for k in 0..d {
            shape[k] = self.inputs[k].len();
        }
        for k in 0..d {
            let n_in = self.inputs[k].len();
            let n_out = self.outputs[k].len();
            let outer: usize = shape[..k].iter().product();
            let inner: usize = shape[k + 1..d].iter().product();
            let mut next = vec![0.0; outer * n_out * inner];
            let table = &self.tables[k];
            let hints = &mut self.hints[k];
            for o in 0..outer {
                let base_in = o * n_in * inner;
                for i in 0..n_out {
                    let row = &table[i * n_in..(i + 1) * n_in];
                    let base_out = (o * n_out + i) * inner;
                    for r in 0..inner {
                        let val = |j: usize| cur[base_in + j * inner + r] - row[j];
                        let slot = base_out + r;
                        let (v, arg) =
                            if full { lse_full(n_in, val) } else { lse_window(n_in, hints[slot] as usize, val) };
                        hints[slot] = arg as u32;
                        next[slot] = v;
                    }
                }
            }
            cur = next;
            shape[k] = n_out;
        }
        cur
    }
}

#[inline]
fn lse_full<F: Fn(usize) -> f64>(n: usize, val: F) -> (f64, usize) {
    let mut mx = f64::NEG_INFINITY;
    let mut arg = 0;
    for j in 0..n {
        let v = val(j);
        if v > mx {
            mx = v;
            arg = j;
        }
    }
    if mx == f64::NEG_INFINITY {
        return (mx, 0);
    }
    let mut s = 0.0;
    for j in 0..n {
        s += libm::exp(val(j) - mx);
    }
    (mx + libm::log(s), arg)
}

/// Soft-max of a sequence that is unimodal up to small perturbations: climb
/// from `hint` to the local maximum, then sum outwards until the terms fall
/// [`WINDOW_CUT`] below it.
#[inline]
fn lse_window<F: Fn(usize) -> f64>(n: usize, hint: usize, val: F) -> (f64, usize) {
    let mut j = hint.min(n - 1);
    let mut v = val(j);
    loop {
        if j + 1 < n {
            let w = val(j + 1);
            if w > v {
                j += 1;
                v = w;
                continue;
            }
        }
        if j > 0 {
            let w = val(j - 1);
            if w > v {
                j -= 1;
                v = w;
                continue;
            }
        }
        break;
    }
    if v == f64::NEG_INFINITY {
        return lse_full(n, val);
    }
    let mut s = 1.0;
    let mut r = j + 1;
    while r < n {
        let w = val(r) - v;
        if w < -WINDOW_CUT && w.is_finite() {
            break;
        }
        s += libm::exp(w);
        r += 1;
    }
    let mut l = j;
    while l > 0 {
        l -= 1;
        let w = val(l) - v;
        if w < -WINDOW_CUT && w.is_finite() {
            break;
        }
        s += libm::exp(w);
    }
    (v + libm::log(s), j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::exact::solve_exact;

    fn three() -> (DiscreteMeasure, DiscreteMeasure) {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        (mu, nu)
    }

    #[test]
    fn ladder_shape() {
        let l = epsilon_ladder(2.0, 0.02);
        assert_eq!(l[0], 2.0);
        assert_eq!(*l.last().unwrap(), 0.02);
        assert!(l.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(epsilon_ladder(1.0, 5.0), vec![5.0]);
    }

    #[test]
    fn three_point_annealing() {
        let (mu, nu) = three();
        let cost = CostFunction::SquaredEuclidean;
        let med = median_pairwise_cost(&mu, &nu, &cost).unwrap();
        assert_eq!(med, 2.0);
        let exact = solve_exact(&mu, &nu, &cost).unwrap().total_cost;
        let mut prev = f64::INFINITY;
        for s in [1.0, 0.1, 0.01] {
            let plan = solve_entropic(&mu, &nu, &cost, s * med).unwrap();
            assert!(plan.marginal_residual() <= 1e-6);
            assert!(plan.total_cost <= prev + 1e-12);
            prev = plan.total_cost;
        }
        assert!((prev - exact).abs() <= 0.02 * exact);
    }

    #[test]
    fn identical_measures_concentrate_on_diagonal() {
        let pts: Vec<Vec<f64>> = (0..6).flat_map(|i| (0..6).map(move |j| vec![i as f64, j as f64 * 1.3])).collect();
        let mu = DiscreteMeasure::uniform(pts).unwrap();
        let cost = CostFunction::SquaredEuclidean;
        let med = median_pairwise_cost(&mu, &mu, &cost).unwrap();
        let plan = solve_entropic(&mu, &mu, &cost, 0.01 * med).unwrap();
        let d = plan.coupling.to_dense();
        let n = mu.len();
        for i in 0..n {
            let diag = d[i * n + i];
            assert!(diag > 0.5 * mu.weights()[i], "row {i}");
        }
    }

    #[test]
    fn concave_cost_is_rejected() {
        let (mu, nu) = three();
        assert!(solve_entropic(&mu, &nu, &CostFunction::ConcavePower { p: 0.5 }, 0.1).is_err());
    }

    #[test]
    fn grid_solver_matches_dense() {
        let grid =
            Grid::new(vec![crate::measure::Axis::new(-1.0, 1.0, 7), crate::measure::Axis::new(0.0, 2.0, 6)]).unwrap();
        let tgt =
            Grid::new(vec![crate::measure::Axis::new(-0.5, 1.5, 5), crate::measure::Axis::new(-1.0, 1.0, 8)]).unwrap();
        let wa: Vec<f64> = (0..grid.len()).map(|i| 1.0 + (i % 5) as f64).collect();
        let wb: Vec<f64> = (0..tgt.len()).map(|i| 2.0 + (i % 3) as f64).collect();
        let sa: f64 = wa.iter().sum();
        let sb: f64 = wb.iter().sum();
        let wa: Vec<f64> = wa.iter().map(|w| w / sa).collect();
        let wb: Vec<f64> = wb.iter().map(|w| w / sb).collect();
        let eps = 0.05;
        let gt = solve_entropic_grid(&grid, &wa, &tgt, &wb, eps).unwrap();
        let mu = DiscreteMeasure::new((0..grid.len()).map(|i| grid.node(i)).collect(), wa).unwrap();
        let nu = DiscreteMeasure::new((0..tgt.len()).map(|i| tgt.node(i)).collect(), wb).unwrap();
        let plan = solve_entropic(&mu, &nu, &CostFunction::SquaredEuclidean, eps).unwrap();
        assert!((gt.total_cost - plan.total_cost).abs() < 1e-5);
        let d = plan.coupling.to_dense();
        let m = nu.len();
        for i in 0..mu.len() {
            for k in 0..2 {
                let bary: f64 = (0..m).map(|j| d[i * m + j] * nu.point(j)[k]).sum::<f64>() / mu.weights()[i];
                assert!((bary - gt.images[i][k]).abs() < 1e-5, "node {i} axis {k}");
            }
        }
        // Column barycentres of the same plan; columns hold to the residual.
        for j in 0..m {
            let col: f64 = (0..mu.len()).map(|i| d[i * m + j]).sum();
            for k in 0..2 {
                let bary: f64 = (0..mu.len()).map(|i| d[i * m + j] * mu.point(i)[k]).sum::<f64>() / col;
                assert!((bary - gt.inverse_images[j][k]).abs() < 1e-5, "target {j} axis {k}");
            }
        }
    }
}
