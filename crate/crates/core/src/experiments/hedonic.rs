use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg;
use crate::manifold::{assumption_report, AssumptionReport};
use crate::measure::{
    build_cdf_from_density_with, AnalyticDensity, Axis, DensityCdfOptions, DensityFamily, DiscreteMeasure, Grid,
};
use crate::quasi;
use crate::special::norm_quantile;
use crate::transport::{entropic_map_at, median_pairwise_cost, solve_entropic, CostFunction};
use crate::{Error, Result};

use super::triangular::{Dataset, FirstStage, Latent};

/// Smallest conditioning bin accepted.
pub const MIN_BIN: usize = 50;

/// Tolerance on the relative RMS gradient error.
pub const HEDONIC_RMS_TOL: f64 = 0.05;

/// Consumer surplus `ξ(x, ε, y)`. Only the bilinear form is automated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Surplus {
    /// `ξ(x, ε, y) = yᵀε`.
    #[default]
    Bilinear,
}

/// Quadratic utility `Ū(x, y) = −½ yᵀQy + yᵀBx + c`, linear price
/// `p(y) = πᵀy`, markets `Z ∈ {0, 1}` and `X = h(Z, η)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct HedonicModelSpec {
    /// Dimension of `Y` and `ε`.
    pub d: usize,
    /// Dimension of `X` and `η`.
    pub k: usize,
    pub surplus: Surplus,
    pub q: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub utility_constant: f64,
    pub price: Vec<f64>,
    pub first: FirstStage,
    pub eta_law: DensityFamily,
    /// Must be Gaussian: it is discretised by quasi-random quantiles.
    pub eps_law: DensityFamily,
    /// Probability of market 1.
    pub market_share: f64,
}

impl HedonicModelSpec {
    /// `d = k = 2` linear-quadratic design with `η ~ t₅` and `ε ~ N(0, I)`.
    pub fn default_2d() -> Self {
        Self {
            d: 2,
            k: 2,
            surplus: Surplus::Bilinear,
            q: vec![vec![1.5, 0.3], vec![0.3, 1.0]],
            b: vec![vec![0.5, 0.2], vec![-0.1, 0.4]],
            utility_constant: 0.0,
            price: vec![0.2, -0.1],
            first: FirstStage { zbar: 0.0, kappa: vec![0.5, -0.4], beta: vec![0.3, -0.2] },
            eta_law: DensityFamily::StudentT {
                dof: 5.0,
                location: vec![0.0, 0.0],
                scale: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
            },
            eps_law: DensityFamily::Gaussian { mean: vec![0.0, 0.0], cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
            market_share: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d, k) = (self.d, self.k);
        if d == 0 || d > 3 {
            return Err(Error::UnsupportedDimension(d));
        }
        if k == 0 || k > 2 {
            return Err(Error::UnsupportedDimension(k));
        }
        if self.q.len() != d || self.q.iter().any(|r| r.len() != d) {
            return Err(spec_err("Q must be d × d"));
        }
        let q = self.q_flat();
        for i in 0..d {
            for j in 0..i {
                if libm::fabs(q[i * d + j] - q[j * d + i]) > 1e-12 {
                    return Err(spec_err("Q must be symmetric"));
                }
            }
        }
        // Q positive definite makes V(x, ·) = p − Ū strictly convex.
        linalg::cholesky(&q, d).map_err(|_| spec_err("Q must be positive definite"))?;
        if self.b.len() != d || self.b.iter().any(|r| r.len() != k) {
            return Err(spec_err("B must be d × k"));
        }
        if self.price.len() != d {
            return Err(spec_err("price gradient must have length d"));
        }
        if self.first.kappa.len() != k || self.first.beta.len() != k {
            return Err(spec_err("κ and β must have length k"));
        }
        if !(self.market_share > 0.0 && self.market_share < 1.0) {
            return Err(spec_err("market share must lie in (0, 1)"));
        }
        if AnalyticDensity::new(self.eta_law.clone())?.dim() != k {
            return Err(spec_err("η must have dimension k"));
        }
        match &self.eps_law {
            DensityFamily::Gaussian { mean, .. } if mean.len() == d => {}
            _ => return Err(spec_err("ε must be Gaussian of dimension d")),
        }
        AnalyticDensity::new(self.eps_law.clone())?;
        if !self.utility_constant.is_finite() {
            return Err(spec_err("utility constant must be finite"));
        }
        Ok(())
    }

    fn q_flat(&self) -> Vec<f64> {
        self.q.iter().flat_map(|r| r.iter().copied()).collect()
    }

    fn bx(&self, x: &[f64]) -> Vec<f64> {
        self.b.iter().map(|r| r.iter().zip(x).map(|(a, v)| a * v).sum()).collect()
    }

    pub fn utility(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.d;
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += y[i] * self.q[i][j] * y[j];
            }
        }
        let lin: f64 = y.iter().zip(self.bx(x)).map(|(a, b)| a * b).sum();
        -0.5 * quad + lin + self.utility_constant
    }

    /// `∇_y Ū(x, y) = −Qy + Bx`.
    pub fn utility_gradient(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let bx = self.bx(x);
        (0..self.d).map(|i| bx[i] - self.q[i].iter().zip(y).map(|(a, v)| a * v).sum::<f64>()).collect()
    }

    pub fn price_of(&self, y: &[f64]) -> f64 {
        self.price.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    /// Optimal quality `y = Q⁻¹(ε + Bx − π)` of a consumer of type `(x, ε)`.
    pub fn demand(&self, x: &[f64], e: &[f64]) -> Result<Vec<f64>> {
        let bx = self.bx(x);
        let r: Vec<f64> = (0..self.d).map(|i| e[i] + bx[i] - self.price[i]).collect();
        spd_solve(&self.q_flat(), self.d, &r)
    }

    /// `m⁻¹(x, y) = ∇p(y) − ∇_y Ū(x, y)`.
    pub fn inverse_demand(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let g = self.utility_gradient(x, y);
        self.price.iter().zip(g).map(|(p, u)| p - u).collect()
    }

    pub fn market_x_law(&self, market: f64) -> Result<AnalyticDensity> {
        let tri = super::triangular::TriangularModelSpec {
            d: self.k,
            k: self.k,
            second: super::triangular::SecondStage {
                a: (0..self.k).map(|i| (0..self.k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
                g: super::triangular::ShiftTerm::Zero,
            },
            first: self.first.clone(),
            u_law: self.eta_law.clone(),
            eps_law: self.eta_law.clone(),
            instrument: super::triangular::InstrumentDesign::Discrete {
                values: vec![0.0, 1.0],
                weights: vec![0.5, 0.5],
            },
        };
        tri.conditional_x_law(market)
    }
}

fn spec_err(msg: impl Into<alloc::string::String>) -> Error {
    Error::InvalidSpec(msg.into())
}

fn spd_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let l = linalg::cholesky(a, n)?;
    let w = linalg::forward_substitute(&l, n, b);
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| l[j * n + i] * x[j]).sum();
        x[i] = (w[i] - s) / l[i * n + i];
    }
    Ok(x)
}

/// Draws `n` consumers. `z` holds the market label, the latent columns hold
/// `(η, ε)`. The utility constant never enters.
pub fn simulate_hedonic(spec: &HedonicModelSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let eta = AnalyticDensity::new(spec.eta_law.clone())?;
    let eps = AnalyticDensity::new(spec.eps_law.clone())?;
    let mut data = Dataset {
        y: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        latent: Some(Latent { u: Vec::with_capacity(n), eps: Vec::with_capacity(n) }),
        seed: Some(seed),
    };
    let latent = data.latent.as_mut().expect("just set");
    for r in 0..n {
        let mut rng = quasi::rng(seed, r as u64);
        let z = if rand::Rng::random::<f64>(&mut rng) < spec.market_share { 1.0 } else { 0.0 };
        let u = eta.sample(&mut rng);
        let e = eps.sample(&mut rng);
        let x = spec.first.eval(z, &u);
        data.y.push(spec.demand(&x, &e)?);
        data.x.push(x);
        data.z.push(z);
        latent.u.push(u);
        latent.eps.push(e);
    }
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HedonicOptions {
    pub seed: u64,
    /// Observations per conditioning bin.
    pub bin_target: usize,
    /// Size of the quasi-random discretisation of `P_ε`.
    pub eps_points: usize,
    /// Entropic regularisation as a fraction of the median squared cost.
    pub epsilon_fraction: f64,
    /// Condition on the market as well as on `X`. Off by default: with `ε`
    /// independent of `(X, Z)` the market carries no information about
    /// `F_{Y|X}`, and splitting halves every bin.
    pub split_markets: bool,
    /// Box and resolution for the market CDF checks.
    pub x_half_width: f64,
    pub x_resolution: usize,
    pub min_coverage: f64,
    /// Central fraction of each axis (of the evaluation grid, of the bin
    /// means and of each bin's `Y` sample) that is scored.
    pub central: f64,
}

impl Default for HedonicOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            bin_target: 4000,
            eps_points: 1024,
            epsilon_fraction: 0.02,
            split_markets: false,
            x_half_width: 6.0,
            x_resolution: 64,
            min_coverage: 0.9,
            central: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GradientSample {
    pub market: Option<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub recovered: Vec<f64>,
    pub truth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HedonicRecovery {
    pub n: usize,
    pub bins: usize,
    pub scored_bins: usize,
    pub smallest_bin: usize,
    pub samples: Vec<GradientSample>,
    pub rms_error: f64,
    pub rms_truth: f64,
    pub relative_rms: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub assumptions: AssumptionReport,
}

/// Market CDFs of `X` and their assumption report; errors when it fails.
pub fn hedonic_assumptions(spec: &HedonicModelSpec, opts: &HedonicOptions) -> Result<AssumptionReport> {
    spec.validate()?;
    let axis = Axis::new(-opts.x_half_width, opts.x_half_width, opts.x_resolution);
    let grid = Grid::new(vec![axis; spec.k])?;
    let copts = DensityCdfOptions { min_coverage: opts.min_coverage, ..Default::default() };
    let f0 = build_cdf_from_density_with(&spec.market_x_law(0.0)?, &grid, copts)?;
    let f1 = build_cdf_from_density_with(&spec.market_x_law(1.0)?, &grid, copts)?;
    let report = assumption_report(&f0, &f1, (spec.d, spec.k, 1))?;
    if !report.pass {
        return Err(Error::AssumptionFailure(report.failures().join(", ")));
    }
    Ok(report)
}

/// Quasi-random quantile points of the Gaussian `ε` law.
fn eps_support(spec: &HedonicModelSpec, m: usize) -> Result<DiscreteMeasure> {
    let (mean, cov) = match &spec.eps_law {
        DensityFamily::Gaussian { mean, cov } => (mean, cov),
        _ => return Err(spec_err("ε must be Gaussian")),
    };
    let d = spec.d;
    let flat: Vec<f64> = cov.iter().flat_map(|r| r.iter().copied()).collect();
    let l = linalg::cholesky(&flat, d)?;
    let pts = (0..m)
        .map(|i| {
            // skip the origin of the sequence, centre each point in its stratum
            let h = quasi::halton(i + 1, d);
            let g: Vec<f64> = h.iter().map(|u| norm_quantile(*u)).collect();
            (0..d).map(|r| mean[r] + (0..=r).map(|c| l[r * d + c] * g[c]).sum::<f64>()).collect()
        })
        .collect();
    DiscreteMeasure::uniform(pts)
}

/// Equal-count bins: sorted on `x₁` into strips, each strip sorted on `x₂`.
fn equal_count_bins(x: &[Vec<f64>], idx: Vec<usize>, target: usize) -> Vec<Vec<usize>> {
    let n = idx.len();
    let nb = (n / target).max(1);
    let k = x.first().map_or(1, |p| p.len());
    let mut idx = idx;
    idx.sort_by(|&a, &b| x[a][0].total_cmp(&x[b][0]).then(a.cmp(&b)));
    let chunk = |v: &[usize], parts: usize| -> Vec<Vec<usize>> {
        (0..parts).map(|p| v[p * v.len() / parts..(p + 1) * v.len() / parts].to_vec()).collect()
    };
    if k == 1 {
        return chunk(&idx, nb);
    }
    let strips = libm::round(libm::sqrt(nb as f64)).max(1.0) as usize;
    let per_strip = (nb / strips).max(1);
    let mut out = Vec::new();
    for mut s in chunk(&idx, strips) {
        s.sort_by(|&a, &b| x[a][1].total_cmp(&x[b][1]).then(a.cmp(&b)));
        out.extend(chunk(&s, per_strip));
    }
    out
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = libm::floor(pos) as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

fn central_box(points: &[&[f64]], central: f64) -> (Vec<f64>, Vec<f64>) {
    let d = points[0].len();
    let tail = 0.5 * (1.0 - central);
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for j in 0..d {
        let mut v: Vec<f64> = points.iter().map(|p| p[j]).collect();
        v.sort_by(f64::total_cmp);
        lo[j] = quantile(&v, tail);
        hi[j] = quantile(&v, 1.0 - tail);
    }
    (lo, hi)
}

fn inside(p: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    p.iter().zip(lo).zip(hi).all(|((v, a), b)| v >= a && v <= b)
}

/// Recovers `∇_y Ū(x, y) = ∇p(y) − m⁻¹(x, y)` from a simulated sample of `n`
/// consumers. Within each equal-count `X` bin (and market, with
/// `split_markets`), `m⁻¹(x̄, ·)` is the entropic barycentric map from the
/// bin's `Y` sample to the discretised `P_ε`, evaluated out of sample at the
/// nodes of `grid`. Scored are the bins whose mean lies in the central box of
/// all `X`, and the nodes in the central box of both `grid` and the bin's `Y`.
pub fn hedonic_recover_utility(
    spec: &HedonicModelSpec,
    n: usize,
    grid: &Grid,
    opts: &HedonicOptions,
) -> Result<HedonicRecovery> {
    let assumptions = hedonic_assumptions(spec, opts)?;
    if grid.dim() != spec.d {
        return Err(Error::DimensionMismatch { expected: spec.d, found: grid.dim() });
    }
    let data = simulate_hedonic(spec, n, opts.seed)?;
    recover_from_data(spec, &data, grid, opts, assumptions)
}

/// The estimation step of [`hedonic_recover_utility`] on a given sample.
pub fn recover_from_data(
    spec: &HedonicModelSpec,
    data: &Dataset,
    grid: &Grid,
    opts: &HedonicOptions,
    assumptions: AssumptionReport,
) -> Result<HedonicRecovery> {
    if data.is_empty() {
        return Err(Error::EmptySamples);
    }
    let target = eps_support(spec, opts.eps_points)?;
    let groups: Vec<(Option<f64>, Vec<usize>)> = if opts.split_markets {
        [0.0, 1.0].iter().map(|&m| (Some(m), (0..data.len()).filter(|&i| data.z[i] == m).collect())).collect()
    } else {
        vec![(None, (0..data.len()).collect())]
    };

    let all_x: Vec<&[f64]> = data.x.iter().map(|v| v.as_slice()).collect();
    let (xlo, xhi) = central_box(&all_x, opts.central);
    let glo = grid.lower_corner();
    let ghi = grid.upper_corner();
    let tail = 0.5 * (1.0 - opts.central);
    let (gclo, gchi): (Vec<f64>, Vec<f64>) = (0..spec.d)
        .map(|j| {
            let w = ghi[j] - glo[j];
            (glo[j] + tail * w, ghi[j] - tail * w)
        })
        .unzip();

    let mut samples = Vec::new();
    let mut bins = 0;
    let mut scored_bins = 0;
    let mut smallest_bin = usize::MAX;
    for (market, idx) in groups {
        for bin in equal_count_bins(&data.x, idx, opts.bin_target) {
            bins += 1;
            smallest_bin = smallest_bin.min(bin.len());
            if bin.len() < MIN_BIN {
                return Err(Error::SparseBin { count: bin.len(), required: MIN_BIN });
            }
            let k = spec.k;
            let mut xbar = vec![0.0; k];
            for &i in &bin {
                for j in 0..k {
                    xbar[j] += data.x[i][j];
                }
            }
            xbar.iter_mut().for_each(|v| *v /= bin.len() as f64);
            if !inside(&xbar, &xlo, &xhi) {
                continue;
            }
            let ys: Vec<&[f64]> = bin.iter().map(|&i| data.y[i].as_slice()).collect();
            let (ylo, yhi) = central_box(&ys, opts.central);
            let nodes: Vec<Vec<f64>> = (0..grid.len())
                .map(|f| grid.node(f))
                .filter(|p| inside(p, &ylo, &yhi) && inside(p, &gclo, &gchi))
                .collect();
            if nodes.is_empty() {
                continue;
            }
            scored_bins += 1;
            let source = DiscreteMeasure::uniform(ys.iter().map(|y| y.to_vec()).collect())?;
            let cost = CostFunction::SquaredEuclidean;
            let med = median_pairwise_cost(&source, &target, &cost)?;
            let plan = solve_entropic(&source, &target, &cost, opts.epsilon_fraction * med)?;
            for y in nodes {
                let t = entropic_map_at(&plan, &y)?;
                let recovered: Vec<f64> = spec.price.iter().zip(&t).map(|(p, v)| p - v).collect();
                let truth = spec.utility_gradient(&xbar, &y);
                samples.push(GradientSample { market, x: xbar.clone(), y, recovered, truth });
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no grid node falls inside the central region of any of {bins} bins"
        )));
    }
    let m = samples.len() as f64;
    let sq = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let rms_error = libm::sqrt(samples.iter().map(|s| sq(&s.recovered, &s.truth)).sum::<f64>() / m);
    let rms_truth = libm::sqrt(samples.iter().map(|s| s.truth.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / m);
    let relative_rms = rms_error / rms_truth;
    Ok(HedonicRecovery {
        n: data.len(),
        bins,
        scored_bins,
        smallest_bin,
        samples,
        rms_error,
        rms_truth,
        relative_rms,
        tolerance: HEDONIC_RMS_TOL,
        pass: relative_rms <= HEDONIC_RMS_TOL,
        assumptions,
    })
}
