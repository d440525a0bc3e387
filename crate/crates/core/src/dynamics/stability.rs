use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::distance;
use crate::measure::DiscreteMeasure;
use crate::quasi;
use crate::transport::{
    extract_map, median_pairwise_cost, solve_entropic, solve_exact, solve_monotone_1d, CostFunction, TransportMap,
    EXACT_SIZE_CAP,
};
use crate::{error::invalid, Result};

/// Deviation threshold as a fraction of the support diameter.
pub const DEVIATION_FRACTION: f64 = 0.05;

/// Largest deviation mass allowed at the last rung.
pub const FINAL_MASS_TOL: f64 = 0.05;

/// A ladder of perturbations of the base pair, each rung closer to it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Perturbation {
    /// Empirical measures of `n` draws from each base law; `n` increasing.
    SampleSizes(Vec<usize>),
    /// Target `(1 − δ)·ν + δ·δ_atom`; `δ` decreasing.
    Mixture { weights: Vec<f64>, atom: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StabilityRung {
    /// `n` or `δ`.
    pub parameter: f64,
    /// Base source mass of `{x : ‖T_r(x) − T(x)‖ ≥ c}`.
    pub deviation_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StabilityReport {
    pub diameter: f64,
    /// `c = 0.05 · diameter`.
    pub threshold: f64,
    pub rungs: Vec<StabilityRung>,
    pub nonincreasing: bool,
    pub final_mass: f64,
    pub pass: bool,
}

/// Optimal map for a discrete pair: sorted coupling in 1-D, the
/// transportation simplex when small, otherwise annealed Sinkhorn at 1% of
/// the median cost.
fn fit_map(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportMap> {
    let cost = CostFunction::SquaredEuclidean;
    let plan = if mu.dim() == 1 {
        solve_monotone_1d(mu, nu, &cost)?
    } else if mu.len() + nu.len() <= EXACT_SIZE_CAP {
        solve_exact(mu, nu, &cost)?
    } else {
        let med = median_pairwise_cost(mu, nu, &cost)?;
        solve_entropic(mu, nu, &cost, 0.01 * med)?
    };
    extract_map(&plan)
}

/// `n` weighted draws from `m`.
fn draw<R: Rng>(m: &DiscreteMeasure, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
    let mut cum = Vec::with_capacity(m.len());
    let mut acc = 0.0;
    for w in m.weights() {
        acc += w;
        cum.push(acc);
    }
    let mut counts = alloc::collections::BTreeMap::new();
    for _ in 0..n {
        let u = rng.random::<f64>() * acc;
        let i = cum.partition_point(|&c| c <= u).min(m.len() - 1);
        *counts.entry(i).or_insert(0usize) += 1;
    }
    let pts = counts.keys().map(|&i| m.point(i).to_vec()).collect();
    let w = counts.values().map(|&c| c as f64).collect();
    DiscreteMeasure::normalized(pts, w)
}

fn diameter(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let (a_lo, a_hi) = mu.bounding_box();
    let (b_lo, b_hi) = nu.bounding_box();
    let sq: f64 = (0..mu.dim())
        .map(|k| {
            let w = a_hi[k].max(b_hi[k]) - a_lo[k].min(b_lo[k]);
            w * w
        })
        .sum();
    libm::sqrt(sq)
}

/// Solves the base pair and every rung of `ladder`, and measures how much
/// base source mass the rung's map sends at least `c` away from the base
/// map's image. Passes when that mass never increases along the ladder and
/// ends at most 0.05.
pub fn check_stability_in_measure(
    base_mu: &DiscreteMeasure,
    base_nu: &DiscreteMeasure,
    ladder: &Perturbation,
    seed: u64,
) -> Result<StabilityReport> {
    if base_mu.dim() != base_nu.dim() {
        return Err(crate::Error::DimensionMismatch { expected: base_mu.dim(), found: base_nu.dim() });
    }
    let base = fit_map(base_mu, base_nu)?;
    let base_images: Vec<Vec<f64>> = base_mu.points().iter().map(|x| base.apply(x)).collect();
    let diam = diameter(base_mu, base_nu);
    let c = DEVIATION_FRACTION * diam;
    let deviation = |map: &TransportMap| -> f64 {
        base_mu
            .points()
            .iter()
            .zip(base_mu.weights())
            .zip(&base_images)
            .filter(|((x, _), y)| distance(&map.apply(x), y) >= c)
            .map(|((_, w), _)| w)
            .sum()
    };

    let mut rungs = Vec::new();
    match ladder {
        Perturbation::SampleSizes(sizes) => {
            if sizes.windows(2).any(|w| w[1] < w[0]) || sizes.contains(&0) {
                return Err(invalid("sample sizes must be positive and increasing"));
            }
            for (r, &n) in sizes.iter().enumerate() {
                let mut rng = quasi::rng(seed, r as u64);
                let mu = draw(base_mu, n, &mut rng)?;
                let nu = draw(base_nu, n, &mut rng)?;
                let map = fit_map(&mu, &nu)?;
                rungs.push(StabilityRung { parameter: n as f64, deviation_mass: deviation(&map) });
            }
        }
        Perturbation::Mixture { weights, atom } => {
            if weights.windows(2).any(|w| w[1] > w[0]) || weights.iter().any(|d| !(0.0..1.0).contains(d)) {
                return Err(invalid("mixture weights must lie in [0, 1) and decrease"));
            }
            if atom.len() != base_nu.dim() {
                return Err(invalid(format!("atom has dimension {}", atom.len())));
            }
            for &delta in weights {
                let mut pts = base_nu.points().to_vec();
                let mut w: Vec<f64> = base_nu.weights().iter().map(|v| (1.0 - delta) * v).collect();
                if delta > 0.0 {
                    match pts.iter().position(|p| p == atom) {
                        Some(i) => w[i] += delta,
                        None => {
                            pts.push(atom.clone());
                            w.push(delta);
                        }
                    }
                }
                let nu = DiscreteMeasure::normalized(pts, w)?;
                let map = fit_map(base_mu, &nu)?;
                rungs.push(StabilityRung { parameter: delta, deviation_mass: deviation(&map) });
            }
        }
    }
    let nonincreasing = rungs.windows(2).all(|w| w[1].deviation_mass <= w[0].deviation_mass + 1e-12);
    let final_mass = rungs.last().map_or(0.0, |r| r.deviation_mass);
    Ok(StabilityReport {
        diameter: diam,
        threshold: c,
        rungs,
        nonincreasing,
        final_mass,
        pass: nonincreasing && final_mass <= FINAL_MASS_TOL,
    })
}
