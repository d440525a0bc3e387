use alloc::vec::Vec;

use rand::Rng;

use super::cost::sq_dist;
use super::map::TransportMap;
use crate::measure::{DiscreteMeasure, GriddedCdf};
use crate::quasi;

/// Default discrepancy tolerance of the rectangle test.
pub const MEASURE_PRESERVING_TOL: f64 = 0.01;

/// Default number of quasi-random rectangles.
pub const DEFAULT_RECTANGLES: usize = 200;

/// Seed of the random tuples / pairs drawn by the property checks.
const CHECK_SEED: u64 = 0x7472_692d_6964;

/// Half-open rectangle `(lower, upper]`; infinite bounds allowed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rectangle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RectangleDiscrepancy {
    pub rectangle: Rectangle,
    pub pushforward: f64,
    pub target: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MeasurePreservingReport {
    pub rectangles: Vec<RectangleDiscrepancy>,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `n` rectangles with quasi-random corners spanning the box of `cdf`.
pub fn default_rectangles(cdf: &GriddedCdf, n: usize) -> Vec<Rectangle> {
    let lo = cdf.grid().lower_corner();
    let hi = cdf.grid().upper_corner();
    let d = lo.len();
    (0..n)
        .map(|i| {
            let u = quasi::halton(i, 2 * d);
            let mut a = Vec::with_capacity(d);
            let mut b = Vec::with_capacity(d);
            for k in 0..d {
                let p = lo[k] + u[k] * (hi[k] - lo[k]);
                let q = lo[k] + u[d + k] * (hi[k] - lo[k]);
                a.push(p.min(q));
                b.push(p.max(q));
            }
            Rectangle { lower: a, upper: b }
        })
        .collect()
}

/// Rectangle criterion for `T_# mu = nu`: compares the pushforward mass of
/// each `(a, b]` with its probability under `nu_cdf`. An empty rectangle
/// list selects [`DEFAULT_RECTANGLES`] quasi-random ones.
pub fn check_measure_preserving(
    map: &TransportMap,
    mu: &DiscreteMeasure,
    nu_cdf: &GriddedCdf,
    rectangles: &[Rectangle],
    tolerance: Option<f64>,
) -> MeasurePreservingReport {
    let defaults;
    let rects = if rectangles.is_empty() {
        defaults = default_rectangles(nu_cdf, DEFAULT_RECTANGLES);
        &defaults[..]
    } else {
        rectangles
    };
    let images: Vec<Vec<f64>> = mu.points().iter().map(|x| map.apply(x)).collect();
    let mut out = Vec::with_capacity(rects.len());
    let mut worst: f64 = 0.0;
    for r in rects {
        let push: f64 = images
            .iter()
            .zip(mu.weights())
            .filter(|(y, _)| y.iter().zip(&r.lower).zip(&r.upper).all(|((v, a), b)| *v > *a && *v <= *b))
            .map(|(_, w)| w)
            .sum();
        let target = nu_cdf.rectangle_probability_unchecked(&r.lower, &r.upper).clamp(0.0, 1.0);
        let disc = libm::fabs(push - target);
        worst = worst.max(disc);
        out.push(RectangleDiscrepancy { rectangle: r.clone(), pushforward: push, target, discrepancy: disc });
    }
    let tol = tolerance.unwrap_or(MEASURE_PRESERVING_TOL);
    MeasurePreservingReport { rectangles: out, max_discrepancy: worst, tolerance: tol, pass: worst <= tol }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CyclicalMonotonicityReport {
    pub tuple_length: usize,
    pub trials: usize,
    /// Largest `Σ‖xᵢ − Txᵢ‖² − Σ‖xᵢ − Tx_{i−1}‖²` (positive = violation).
    pub worst_violation: f64,
    /// Source indices of the worst tuple.
    pub worst_tuple: Vec<usize>,
    pub pass: bool,
}

/// Cyclical monotonicity of the graph of `T` on random `m`-tuples of
/// distinct sources (all pairs when `m = 2` and they are few enough).
/// `tol` is the accepted violation.
pub fn check_cyclical_monotonicity(
    map: &TransportMap,
    m: usize,
    trials: usize,
    tol: f64,
) -> CyclicalMonotonicityReport {
    let m = m.max(2);
    let n = map.len();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_tuple = Vec::new();
    let mut eval = |t: &[usize]| {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (k, &i) in t.iter().enumerate() {
            let prev = t[(k + t.len() - 1) % t.len()];
            lhs += sq_dist(&map.sources[i], &map.images[i]);
            rhs += sq_dist(&map.sources[i], &map.images[prev]);
        }
        let v = lhs - rhs;
        if v > worst {
            worst = v;
            worst_tuple = t.to_vec();
        }
    };
    let mut count = 0;
    if n < m {
        return CyclicalMonotonicityReport {
            tuple_length: m,
            trials: 0,
            worst_violation: 0.0,
            worst_tuple,
            pass: true,
        };
    }
    if m == 2 && n * (n - 1) / 2 <= trials {
        for i in 0..n {
            for j in i + 1..n {
                eval(&[i, j]);
                count += 1;
            }
        }
    } else {
        let mut rng = quasi::rng(CHECK_SEED, m as u64);
        let mut t = Vec::with_capacity(m);
        for _ in 0..trials {
            t.clear();
            while t.len() < m {
                let i = rng.random_range(0..n);
                if !t.contains(&i) {
                    t.push(i);
                }
            }
            eval(&t);
            count += 1;
        }
    }
    let worst_violation = worst.max(0.0);
    CyclicalMonotonicityReport {
        tuple_length: m,
        trials: count,
        worst_violation,
        worst_tuple,
        pass: worst_violation <= tol,
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BrenierReport {
    pub trials: usize,
    /// Smallest `⟨T(x) − T(z), x − z⟩` over the sampled pairs.
    pub monotone_margin: f64,
    /// Smallest `⟨x_t − z_t, x − z⟩ / ‖x − z‖` along the displacement
    /// interpolation `x_t = (1 − t)x + tT(x)`, `t ∈ {0, 0.1, …, 0.9}`;
    /// negative means the two paths have passed through each other.
    pub crossing_margin: f64,
    pub tolerance: f64,
    pub monotone_pass: bool,
    pub no_crossing_pass: bool,
}

impl BrenierReport {
    pub fn pass(&self) -> bool {
        self.monotone_pass && self.no_crossing_pass
    }
}

/// Monotone-operator and no-crossing properties on random source pairs
/// (all pairs when there are at most `trials` of them). Margins below
/// `tolerance` (e.g. `−1e-6`) fail.
pub fn check_brenier_properties(map: &TransportMap, trials: usize, tolerance: f64) -> BrenierReport {
    let n = map.len();
    let mut mono = f64::INFINITY;
    let mut cross = f64::INFINITY;
    let mut count = 0;
    let mut eval = |i: usize, j: usize| {
        let (x, z) = (&map.sources[i], &map.sources[j]);
        let (tx, tz) = (&map.images[i], &map.images[j]);
        let dx: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        let norm = libm::sqrt(dx.iter().map(|v| v * v).sum());
        if norm == 0.0 {
            return;
        }
        let dt: f64 = tx.iter().zip(tz).zip(&dx).map(|((a, b), d)| (a - b) * d).sum();
        mono = mono.min(dt);
        for s in 0..10 {
            let t = s as f64 / 10.0;
            cross = cross.min((1.0 - t) * norm + t * dt / norm);
        }
    };
    if n >= 2 && n * (n - 1) / 2 <= trials {
        for i in 0..n {
            for j in i + 1..n {
                eval(i, j);
                count += 1;
            }
        }
    } else if n >= 2 {
        let mut rng = quasi::rng(CHECK_SEED, 1000);
        for _ in 0..trials {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                eval(i, j);
                count += 1;
            }
        }
    }
    if count == 0 {
        mono = 0.0;
        cross = 0.0;
    }
    BrenierReport {
        trials: count,
        monotone_margin: mono,
        crossing_margin: cross,
        tolerance,
        monotone_pass: mono >= tolerance,
        no_crossing_pass: cross >= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_cdf_from_density, AnalyticDensity, Grid};
    use crate::special::norm_quantile;
    use crate::transport::{extract_map, solve_exact, CostFunction};
    use alloc::vec;

    fn std_normal_points(n: usize) -> DiscreteMeasure {
        DiscreteMeasure::uniform((0..n).map(|i| vec![norm_quantile((i as f64 + 0.5) / n as f64)]).collect()).unwrap()
    }

    fn n14() -> GriddedCdf {
        let g = AnalyticDensity::gaussian(vec![1.0], vec![vec![4.0]]).unwrap();
        build_cdf_from_density(&g, &Grid::uniform(1, -9.0, 11.0, 4001).unwrap()).unwrap()
    }

    #[test]
    fn affine_map_preserves_and_shift_does_not() {
        let mu = std_normal_points(10_000);
        let nu = n14();
        let affine = TransportMap::from_fn(mu.points().to_vec(), |x| vec![1.0 + 2.0 * x[0]]);
        let r = check_measure_preserving(&affine, &mu, &nu, &[], None);
        assert!(r.pass, "max {}", r.max_discrepancy);
        let shift = TransportMap::from_fn(mu.points().to_vec(), |x| vec![x[0] + 1.0]);
        let rect = Rectangle { lower: vec![f64::NEG_INFINITY], upper: vec![3.0] };
        let r = check_measure_preserving(&shift, &mu, &nu, &[rect], None);
        assert!(!r.pass);
        let d = &r.rectangles[0];
        assert!((d.pushforward - 0.977).abs() < 1e-3);
        assert!((d.target - 0.841).abs() < 1e-3);
        assert!((d.discrepancy - (0.97725 - 0.84134)).abs() < 1e-3);
    }

    #[test]
    fn crossing_pair_violation() {
        let m = TransportMap::from_samples(vec![vec![0.0], vec![1.0]], vec![vec![2.0], vec![0.0]]).unwrap();
        let r = check_cyclical_monotonicity(&m, 2, 10, 1e-6);
        assert!(!r.pass);
        assert!((r.worst_violation - 4.0).abs() < 1e-12);
        let b = check_brenier_properties(&m, 10, -1e-6);
        assert!(!b.no_crossing_pass && !b.monotone_pass);
    }

    #[test]
    fn identity_and_reflection() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.3 - 2.0]).collect();
        let id = TransportMap::from_fn(pts.clone(), |x| x.to_vec());
        assert!(check_cyclical_monotonicity(&id, 3, 200, 1e-9).pass);
        assert!(check_brenier_properties(&id, 500, -1e-6).pass());
        let refl = TransportMap::from_fn(pts, |x| vec![-x[0]]);
        let r = check_brenier_properties(&refl, 500, -1e-6);
        assert!(!r.monotone_pass);
    }

    #[test]
    fn optimal_three_point_map_passes() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let m = extract_map(&solve_exact(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap()).unwrap();
        for len in 2..=3 {
            assert!(check_cyclical_monotonicity(&m, len, 100, 1e-9).pass);
        }
        assert!(check_brenier_properties(&m, 100, -1e-6).pass());
    }
}
