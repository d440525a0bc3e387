use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::dynamics::{brenier_maps, iterate_orbit, DEFAULT_MAX_STEPS, DEFAULT_ORBIT_TOL};
use crate::linalg;
use crate::manifold::{assumption_report, AssumptionReport, SUPPORT_FLOOR};
use crate::measure::{
    build_cdf_from_density_with, AnalyticDensity, Axis, DensityCdfOptions, DensityFamily, Grid, GriddedCdf,
};
use crate::quasi;
use crate::{Error, Result};

/// Variation of `q` across `x` below which it counts as constant.
pub const Q_VARIATION_TOL: f64 = 1e-3;

/// Tolerance for `h(z̄, u) = u`.
pub const IDENTITY_TOL: f64 = 1e-12;

/// x-dependent part `g` of the second stage `m(x, e) = A e + g(x)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ShiftTerm {
    Zero,
    /// `g_i(x) = a·sin x_j` for even `i`, `a·cos x_j` for odd `i`, with
    /// `j = i mod k`.
    SinCos {
        amplitude: f64,
    },
    /// `g(x) = B x`, `B` is `d × k`.
    Linear {
        b: Vec<Vec<f64>>,
    },
}

impl ShiftTerm {
    fn eval(&self, x: &[f64], d: usize) -> Vec<f64> {
        match self {
            ShiftTerm::Zero => vec![0.0; d],
            ShiftTerm::SinCos { amplitude } => (0..d)
                .map(|i| {
                    let xj = x[i % x.len()];
                    amplitude * if i % 2 == 0 { libm::sin(xj) } else { libm::cos(xj) }
                })
                .collect(),
            ShiftTerm::Linear { b } => b.iter().map(|row| row.iter().zip(x).map(|(a, v)| a * v).sum()).collect(),
        }
    }
}

/// `m(x, e) = A e + g(x)` with `A` symmetric positive definite, so that
/// `e ↦ m(x, e)` is the gradient of the convex potential `½ eᵀAe + g(x)·e`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SecondStage {
    pub a: Vec<Vec<f64>>,
    pub g: ShiftTerm,
}

/// `h(z, u)_j = (1 + κ_j (z − z̄)) u_j + β_j (z − z̄)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FirstStage {
    pub zbar: f64,
    pub kappa: Vec<f64>,
    pub beta: Vec<f64>,
}

impl FirstStage {
    pub fn eval(&self, z: f64, u: &[f64]) -> Vec<f64> {
        let dz = z - self.zbar;
        u.iter().enumerate().map(|(j, v)| (1.0 + self.kappa[j] * dz) * v + self.beta[j] * dz).collect()
    }

    fn scale(&self, z: f64) -> Vec<f64> {
        self.kappa.iter().map(|k| 1.0 + k * (z - self.zbar)).collect()
    }
}

/// Law of the instrument.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum InstrumentDesign {
    Discrete { values: Vec<f64>, weights: Vec<f64> },
    Uniform { lower: f64, upper: f64 },
}

impl InstrumentDesign {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InstrumentDesign::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                let mut r = rng.random::<f64>() * total;
                for (v, w) in values.iter().zip(weights) {
                    if r < *w {
                        return *v;
                    }
                    r -= w;
                }
                *values.last().expect("validated")
            }
            InstrumentDesign::Uniform { lower, upper } => lower + rng.random::<f64>() * (upper - lower),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TriangularModelSpec {
    /// Dimension of `Y` and `ε`.
    pub d: usize,
    /// Dimension of `X` and `U`.
    pub k: usize,
    pub second: SecondStage,
    pub first: FirstStage,
    pub u_law: DensityFamily,
    pub eps_law: DensityFamily,
    pub instrument: InstrumentDesign,
}

impl TriangularModelSpec {
    /// `d = k = 2`, `g(x) = (sin x₁, cos x₂)/2`, `A = I`, `U ~ t₅(0, [[1, .5], [.5, 1]])`,
    /// `ε ~ N(0, I)`, `Z ∈ {0, 1}` with equal weights, `κ = (0.5, −0.4)`, `β = (0.3, −0.2)`.
    pub fn default_2d() -> Self {
        Self {
            d: 2,
            k: 2,
            second: SecondStage { a: vec![vec![1.0, 0.0], vec![0.0, 1.0]], g: ShiftTerm::SinCos { amplitude: 0.5 } },
            first: FirstStage { zbar: 0.0, kappa: vec![0.5, -0.4], beta: vec![0.3, -0.2] },
            u_law: DensityFamily::StudentT {
                dof: 5.0,
                location: vec![0.0, 0.0],
                scale: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
            },
            eps_law: DensityFamily::Gaussian { mean: vec![0.0, 0.0], cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
            instrument: InstrumentDesign::Discrete { values: vec![0.0, 1.0], weights: vec![0.5, 0.5] },
        }
    }

    /// Same design with the location shift `X = Z + U` (`κ = 0`, `β = 1`).
    pub fn shift_2d() -> Self {
        let mut s = Self::default_2d();
        s.first = FirstStage { zbar: 0.0, kappa: vec![0.0, 0.0], beta: vec![1.0, 1.0] };
        s
    }

    pub fn validate(&self) -> Result<()> {
        let (d, k) = (self.d, self.k);
        if d == 0 || d > 3 {
            return Err(Error::UnsupportedDimension(d));
        }
        if k == 0 || k > 3 {
            return Err(Error::UnsupportedDimension(k));
        }
        let u = AnalyticDensity::new(self.u_law.clone())?;
        let e = AnalyticDensity::new(self.eps_law.clone())?;
        if u.dim() != k {
            return Err(spec_err(format!("U has dimension {}, X has {k}", u.dim())));
        }
        if e.dim() != d {
            return Err(spec_err(format!("ε has dimension {}, Y has {d}", e.dim())));
        }
        if self.second.a.len() != d || self.second.a.iter().any(|r| r.len() != d) {
            return Err(spec_err("A must be d × d"));
        }
        let a = self.a_flat();
        for i in 0..d {
            for j in 0..i {
                if libm::fabs(a[i * d + j] - a[j * d + i]) > 1e-12 {
                    return Err(spec_err("A must be symmetric"));
                }
            }
        }
        linalg::cholesky(&a, d).map_err(|_| spec_err("A must be positive definite"))?;
        if let ShiftTerm::Linear { b } = &self.second.g {
            if b.len() != d || b.iter().any(|r| r.len() != k) {
                return Err(spec_err("B must be d × k"));
            }
        }
        if self.first.kappa.len() != k || self.first.beta.len() != k {
            return Err(spec_err("κ and β must have length k"));
        }
        match &self.instrument {
            InstrumentDesign::Discrete { values, weights } => {
                if values.len() < 2 || values.len() != weights.len() {
                    return Err(spec_err("discrete instrument needs ≥ 2 values with weights"));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(spec_err("instrument weights must be positive"));
                }
            }
            InstrumentDesign::Uniform { lower, upper } => {
                if !(lower < upper) {
                    return Err(spec_err("instrument range needs lower < upper"));
                }
            }
        }
        let mut probe = vec![0.0; k];
        for i in 0..64 {
            let h = quasi::halton(i, k);
            for j in 0..k {
                probe[j] = -10.0 + 20.0 * h[j];
            }
            let x = self.first.eval(self.first.zbar, &probe);
            if x.iter().zip(&probe).any(|(a, b)| libm::fabs(a - b) > IDENTITY_TOL) {
                return Err(spec_err("h(z̄, ·) is not the identity"));
            }
        }
        Ok(())
    }

    fn a_flat(&self) -> Vec<f64> {
        self.second.a.iter().flat_map(|r| r.iter().copied()).collect()
    }

    pub fn h(&self, z: f64, u: &[f64]) -> Vec<f64> {
        self.first.eval(z, u)
    }

    pub fn m(&self, x: &[f64], e: &[f64]) -> Vec<f64> {
        let g = self.second.g.eval(x, self.d);
        self.second.a.iter().zip(g).map(|(row, gi)| row.iter().zip(e).map(|(a, v)| a * v).sum::<f64>() + gi).collect()
    }

    /// `e` with `m(x, e) = y`.
    pub fn m_inv(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let d = self.d;
        let l = linalg::cholesky(&self.a_flat(), d).map_err(|_| Error::InversionFailed(format!("{x:?}")))?;
        let g = self.second.g.eval(x, d);
        let r: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - b).collect();
        let w = linalg::forward_substitute(&l, d, &r);
        // back substitution with Lᵀ
        let mut e = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|j| l[j * d + i] * e[j]).sum();
            e[i] = (w[i] - s) / l[i * d + i];
        }
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::InversionFailed(format!("{x:?}")));
        }
        Ok(e)
    }

    /// Law of `X` given `Z = z`: the affine image of the `U` law.
    pub fn conditional_x_law(&self, z: f64) -> Result<AnalyticDensity> {
        let s = self.first.scale(z);
        if s.iter().any(|v| !(*v > 0.0)) {
            return Err(spec_err(format!("h(z, ·) is not increasing at z = {z}")));
        }
        let shift: Vec<f64> = self.first.beta.iter().map(|b| b * (z - self.first.zbar)).collect();
        let scaled = |m: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..self.k).map(|i| (0..self.k).map(|j| s[i] * s[j] * m[i][j]).collect()).collect()
        };
        let moved = |loc: &[f64]| -> Vec<f64> { (0..self.k).map(|j| s[j] * loc[j] + shift[j]).collect() };
        let fam = match &self.u_law {
            DensityFamily::Gaussian { mean, cov } => DensityFamily::Gaussian { mean: moved(mean), cov: scaled(cov) },
            DensityFamily::StudentT { dof, location, scale } => {
                DensityFamily::StudentT { dof: *dof, location: moved(location), scale: scaled(scale) }
            }
            DensityFamily::Uniform { lower, upper } => {
                DensityFamily::Uniform { lower: moved(lower), upper: moved(upper) }
            }
        };
        AnalyticDensity::new(fam)
    }

    /// The two instrument values compared by the identification checks.
    pub fn instrument_pair(&self) -> Result<(f64, f64)> {
        match &self.instrument {
            InstrumentDesign::Discrete { values, .. } => Ok((values[0], values[1])),
            InstrumentDesign::Uniform { lower, upper } => Ok((*lower, *upper)),
        }
    }
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Latent {
    pub u: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Dataset {
    pub y: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub latent: Option<Latent>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Draws `n` records. Record `r` uses the stream `(seed, r)` only, so any
/// prefix of the output is reproducible on its own.
pub fn simulate_triangular(spec: &TriangularModelSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let u_law = AnalyticDensity::new(spec.u_law.clone())?;
    let e_law = AnalyticDensity::new(spec.eps_law.clone())?;
    let mut out = Dataset {
        y: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        latent: Some(Latent { u: Vec::with_capacity(n), eps: Vec::with_capacity(n) }),
        seed: Some(seed),
    };
    let latent = out.latent.as_mut().expect("just set");
    for r in 0..n {
        let mut rng = quasi::rng(seed, r as u64);
        let z = spec.instrument.draw(&mut rng);
        let u = u_law.sample(&mut rng);
        let e = e_law.sample(&mut rng);
        let x = spec.h(z, &u);
        out.y.push(spec.m(&x, &e));
        out.x.push(x);
        out.z.push(z);
        latent.u.push(u);
        latent.eps.push(e);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct IndependenceAudit {
    /// `(label, corr(Z, ·))` for every latent component.
    pub correlations: Vec<(String, f64)>,
    pub bound: f64,
    pub pass: bool,
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / libm::sqrt(saa * sbb)
}

/// Sample correlation between `Z` and each latent component, against `3/√n`.
pub fn independence_audit(data: &Dataset) -> Result<IndependenceAudit> {
    let latent = data.latent.as_ref().ok_or_else(|| spec_err("dataset has no latent columns"))?;
    if data.is_empty() {
        return Err(Error::EmptySamples);
    }
    let bound = 3.0 / libm::sqrt(data.len() as f64);
    let mut correlations = Vec::new();
    for (name, cols) in [("u", &latent.u), ("eps", &latent.eps)] {
        for j in 0..cols[0].len() {
            let c: Vec<f64> = cols.iter().map(|r| r[j]).collect();
            correlations.push((format!("{name}{}", j + 1), correlation(&data.z, &c)));
        }
    }
    let pass = correlations.iter().all(|(_, c)| libm::fabs(*c) <= bound);
    Ok(IndependenceAudit { correlations, bound, pass })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BinCheck {
    pub centre: Vec<f64>,
    pub count: usize,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PushforwardAudit {
    pub half_width: f64,
    pub bins: Vec<BinCheck>,
    pub pass: bool,
}

/// Number of `ε` draws pushed through `m(x, ·)` per bin.
const PUSH_DRAWS: usize = 20_000;

/// For each centre, compares lower-orthant probabilities of `Y` over the
/// records with `X` in the cube of half-width `half_width` against the
/// pushforward of fresh `ε` draws through `m(centre, ·)`. The orthant corners
/// are the products of the per-axis quartiles of the pushforward. The
/// tolerance is three binomial standard errors plus the largest change of
/// `g` across the cube.
pub fn pushforward_audit(
    spec: &TriangularModelSpec,
    data: &Dataset,
    centres: &[Vec<f64>],
    half_width: f64,
    seed: u64,
) -> Result<PushforwardAudit> {
    spec.validate()?;
    let e_law = AnalyticDensity::new(spec.eps_law.clone())?;
    let d = spec.d;
    let mut bins = Vec::new();
    for (b, c) in centres.iter().enumerate() {
        if c.len() != spec.k {
            return Err(Error::DimensionMismatch { expected: spec.k, found: c.len() });
        }
        let ys: Vec<&Vec<f64>> = data
            .x
            .iter()
            .zip(&data.y)
            .filter(|(x, _)| x.iter().zip(c).all(|(a, b)| libm::fabs(a - b) <= half_width))
            .map(|(_, y)| y)
            .collect();
        if ys.len() < 50 {
            return Err(Error::SparseBin { count: ys.len(), required: 50 });
        }
        let mut rng = quasi::rng(seed, b as u64);
        let pushed: Vec<Vec<f64>> = (0..PUSH_DRAWS).map(|_| spec.m(c, &e_law.sample(&mut rng))).collect();
        let quartiles: Vec<[f64; 3]> = (0..d)
            .map(|i| {
                let mut v: Vec<f64> = pushed.iter().map(|p| p[i]).collect();
                v.sort_by(f64::total_cmp);
                [0.25, 0.5, 0.75].map(|q| v[(q * (v.len() - 1) as f64) as usize])
            })
            .collect();
        let mut max_discrepancy: f64 = 0.0;
        let corners = 3usize.pow(d as u32);
        for code in 0..corners {
            let mut c0 = code;
            let corner: Vec<f64> = (0..d)
                .map(|i| {
                    let q = quartiles[i][c0 % 3];
                    c0 /= 3;
                    q
                })
                .collect();
            let below = |y: &[f64]| y.iter().zip(&corner).all(|(a, b)| a <= b);
            let p_emp = ys.iter().filter(|y| below(y)).count() as f64 / ys.len() as f64;
            let p_push = pushed.iter().filter(|y| below(y)).count() as f64 / PUSH_DRAWS as f64;
            max_discrepancy = max_discrepancy.max(libm::fabs(p_emp - p_push));
        }
        let lip = match &spec.second.g {
            ShiftTerm::Zero => 0.0,
            ShiftTerm::SinCos { amplitude } => libm::fabs(*amplitude),
            ShiftTerm::Linear { b } => {
                b.iter().map(|r| r.iter().map(|v| libm::fabs(*v)).sum::<f64>()).fold(0.0, f64::max)
            }
        };
        // A shift of size s moves an orthant probability by at most about
        // s times the largest marginal density; 0.4 bounds it for unit-scale ε.
        let tolerance = 3.0 * libm::sqrt(0.25 / ys.len() as f64)
            + 3.0 * libm::sqrt(0.25 / PUSH_DRAWS as f64)
            + 0.4 * lip * half_width * libm::sqrt(spec.k as f64);
        bins.push(BinCheck {
            centre: c.clone(),
            count: ys.len(),
            max_discrepancy,
            tolerance,
            pass: max_discrepancy <= tolerance,
        });
    }
    let pass = bins.iter().all(|b| b.pass);
    Ok(PushforwardAudit { half_width, bins, pass })
}

/// Grid and orbit settings for [`verify_q_constancy`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct QConstancyOptions {
    pub resolution: usize,
    /// The conditional CDFs are tabulated on `[-half_width, half_width]^k`.
    pub half_width: f64,
    pub min_coverage: f64,
    pub test_points: usize,
    pub max_steps: usize,
    pub orbit_tol: f64,
}

impl Default for QConstancyOptions {
    fn default() -> Self {
        Self {
            resolution: 64,
            half_width: 6.0,
            min_coverage: 0.9,
            test_points: 8,
            max_steps: DEFAULT_MAX_STEPS,
            orbit_tol: DEFAULT_ORBIT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QDiagnosis {
    /// `q` is the identity along every orbit.
    Identity,
    /// `q` does not depend on `x` but is not the identity.
    XIndependent,
    /// `q` varies with `x`: `alt_m` is not observationally equivalent to `m`.
    NotIdentifiedEquivalent,
}

impl QDiagnosis {
    pub fn as_str(self) -> &'static str {
        match self {
            QDiagnosis::Identity => "identity",
            QDiagnosis::XIndependent => "x_independent",
            QDiagnosis::NotIdentifiedEquivalent => "not_identified_equivalent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OrbitQ {
    pub start: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    pub status: &'static str,
    /// Largest distance between `q(x, e)` at two iterates of this orbit.
    pub variation: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct QConstancyReport {
    pub instrument: (f64, f64),
    pub orbits: Vec<OrbitQ>,
    pub test_points: Vec<Vec<f64>>,
    /// Maximum over orbits of the variation of `q` across `x`.
    pub variation: f64,
    /// Largest `|q(x, e) − e|` over every evaluated pair.
    pub identity_deviation: f64,
    pub tolerance: f64,
    pub diagnosis: QDiagnosis,
}

impl QConstancyReport {
    /// `true` unless `alt_m` was found to differ from `m` by an x-dependent map.
    pub fn pass(&self) -> bool {
        self.diagnosis != QDiagnosis::NotIdentifiedEquivalent
    }
}

/// The two conditional CDFs `F_{X|Z=z}`, `F_{X|Z=z'}` of a spec on the box
/// of `opts`.
pub fn conditional_cdfs(spec: &TriangularModelSpec, opts: &QConstancyOptions) -> Result<(GriddedCdf, GriddedCdf)> {
    spec.validate()?;
    if spec.k > 2 {
        return Err(Error::UnsupportedDimension(spec.k));
    }
    let (z, zp) = spec.instrument_pair()?;
    let axis = Axis::new(-opts.half_width, opts.half_width, opts.resolution);
    let grid = Grid::new(vec![axis; spec.k])?;
    let copts = DensityCdfOptions { min_coverage: opts.min_coverage, ..Default::default() };
    let fz = build_cdf_from_density_with(&spec.conditional_x_law(z)?, &grid, copts)?;
    let fzp = build_cdf_from_density_with(&spec.conditional_x_law(zp)?, &grid, copts)?;
    Ok((fz, fzp))
}

/// Identification checks on the spec's own conditional laws; errors with
/// [`Error::AssumptionFailure`] when they fail.
pub fn triangular_assumptions(
    spec: &TriangularModelSpec,
    opts: &QConstancyOptions,
) -> Result<(GriddedCdf, GriddedCdf, AssumptionReport)> {
    let (fz, fzp) = conditional_cdfs(spec, opts)?;
    let report = assumption_report(&fz, &fzp, (spec.d, spec.k, 1))?;
    if !report.pass {
        return Err(Error::AssumptionFailure(report.failures().join(", ")));
    }
    Ok((fz, fzp, report))
}

/// Evaluates `q(x, e) = m⁻¹(x, alt_m(x, e))` along `T`/`T⁻¹` orbits started
/// from the first `orbit_batch` dataset points inside the common support,
/// at test points `e` taken from the latent `ε` column (fresh draws when the
/// dataset has none).
pub fn verify_q_constancy<F>(
    spec: &TriangularModelSpec,
    alt_m: F,
    data: &Dataset,
    orbit_batch: usize,
    opts: &QConstancyOptions,
) -> Result<QConstancyReport>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    let (fz, fzp, _) = triangular_assumptions(spec, opts)?;
    let (t, t_inv) = brenier_maps(&fz, &fzp, None)?;

    let test_points: Vec<Vec<f64>> = match &data.latent {
        Some(l) => l.eps.iter().take(opts.test_points).cloned().collect(),
        None => {
            let e_law = AnalyticDensity::new(spec.eps_law.clone())?;
            let mut rng = quasi::rng(data.seed.unwrap_or(0), u64::MAX);
            (0..opts.test_points).map(|_| e_law.sample(&mut rng)).collect()
        }
    };
    if test_points.is_empty() {
        return Err(Error::EmptySamples);
    }

    let grid = fz.grid();
    let starts: Vec<&Vec<f64>> = data
        .x
        .iter()
        .filter(|x| grid.contains(x) && fz.at(x) > SUPPORT_FLOOR && fzp.at(x) > SUPPORT_FLOOR)
        .take(orbit_batch)
        .collect();
    if starts.is_empty() {
        return Err(Error::OutsideSupport);
    }

    let q = |x: &[f64], e: &[f64]| -> Result<Vec<f64>> {
        let y = alt_m(x, e);
        if y.len() != spec.d || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InversionFailed(format!("alt_m at {x:?}")));
        }
        spec.m_inv(x, &y)
    };

    let mut orbits = Vec::new();
    let mut identity_deviation: f64 = 0.0;
    for x0 in starts {
        let trace = iterate_orbit(&t, &t_inv, &fz, &fzp, x0, opts.max_steps, opts.orbit_tol)?;
        let mut variation: f64 = 0.0;
        for e in &test_points {
            let qs: Vec<Vec<f64>> = trace.iterates.iter().map(|x| q(x, e)).collect::<Result<_>>()?;
            for qv in &qs {
                identity_deviation = identity_deviation.max(dist(qv, e));
            }
            for i in 0..qs.len() {
                for j in i + 1..qs.len() {
                    variation = variation.max(dist(&qs[i], &qs[j]));
                }
            }
        }
        orbits.push(OrbitQ {
            start: x0.clone(),
            iterates: trace.iterates.clone(),
            status: trace.status.as_str(),
            variation,
        });
    }
    let variation = orbits.iter().map(|o| o.variation).fold(0.0, f64::max);
    let diagnosis = if variation > Q_VARIATION_TOL {
        QDiagnosis::NotIdentifiedEquivalent
    } else if identity_deviation > Q_VARIATION_TOL {
        QDiagnosis::XIndependent
    } else {
        QDiagnosis::Identity
    };
    Ok(QConstancyReport {
        instrument: spec.instrument_pair()?,
        orbits,
        test_points,
        variation,
        identity_deviation,
        tolerance: Q_VARIATION_TOL,
        diagnosis,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Named `alt_m` fixtures, each a map family built from the spec's own `m`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Distortion {
    /// `alt_m = m`.
    None,
    /// `alt_m(x, e) = m(x, c·e + s)`, an x-independent reparametrisation.
    Fixed { scale: f64, shift: Vec<f64> },
    /// `alt_m(x, e) = m(x, e + c·x₁·(1, 0, …))`.
    XDependent { strength: f64 },
}

impl Distortion {
    pub fn apply(&self, spec: &TriangularModelSpec, x: &[f64], e: &[f64]) -> Vec<f64> {
        match self {
            Distortion::None => spec.m(x, e),
            Distortion::Fixed { scale, shift } => {
                let e2: Vec<f64> =
                    e.iter().enumerate().map(|(i, v)| scale * v + shift.get(i).unwrap_or(&0.0)).collect();
                spec.m(x, &e2)
            }
            Distortion::XDependent { strength } => {
                let mut e2 = e.to_vec();
                e2[0] += strength * x[0];
                spec.m(x, &e2)
            }
        }
    }
}
