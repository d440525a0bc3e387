use super::*;
use crate::experiments::example_pair;
use crate::measure::{build_cdf_from_density, AnalyticDensity, Axis};
use crate::special::norm_cdf;
use alloc::vec;
use proptest::prelude::*;

fn tabulate(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> GriddedCdf {
    let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
    GriddedCdf::from_values(grid.clone(), values, 0.0).unwrap()
}

fn upper_lower(ms: &[IntersectionManifold]) -> (&IntersectionManifold, &IntersectionManifold) {
    let (a, b) = (&ms[0], &ms[1]);
    if a.centroid()[1] > b.centroid()[1] {
        (a, b)
    } else {
        (b, a)
    }
}

#[test]
fn example_pair_two_components_upper_qualifies() {
    let (fz, fzp) = example_pair(128).unwrap();
    let ms = intersection_set(&fz, &fzp).unwrap();
    assert_eq!(ms.len(), 2);
    let (upper, lower) = upper_lower(&ms);
    for m in [upper, lower] {
        for (p, v) in m.points.iter().zip(&m.common_value) {
            assert!((fz.at(p) - fzp.at(p)).abs() <= CONTOUR_TOL);
            assert!(*v > BAND_DELTA && *v < 1.0 - BAND_DELTA);
        }
    }
    assert_eq!(upper.count(NodeClass::Tangent), 0);
    let grid = fz.grid();
    let dom_up = check_domination_coverage(upper, grid, &fz);
    assert!(dom_up.pass);
    assert!(check_side_condition(upper, &fz, &fzp).pass);
    let dom_low = check_domination_coverage(lower, grid, &fz);
    assert!(!dom_low.pass);
    assert!(!dom_low.uncovered.is_empty());

    let report = assumption_report(&fz, &fzp, (2, 2, 1)).unwrap();
    assert!(report.pass, "{:?}", report.failures());
    let q = report.qualifying_manifold().unwrap();
    assert!(report.verdicts[q].centroid[1] > 2.0);
    assert_eq!(report.verdicts.iter().filter(|v| v.pass).count(), 1);
}

#[test]
fn example_pair_interior_node_is_transversal() {
    let (fz, fzp) = example_pair(128).unwrap();
    let ms = intersection_set(&fz, &fzp).unwrap();
    let (upper, _) = upper_lower(&ms);
    // The point nearest (2, 2.2), well inside the box.
    let p = upper
        .points
        .iter()
        .min_by(|a, b| {
            let da = (a[0] - 2.0).powi(2) + (a[1] - 2.2).powi(2);
            let db = (b[0] - 2.0).powi(2) + (b[1] - 2.2).powi(2);
            da.total_cmp(&db)
        })
        .unwrap();
    assert_eq!(check_transversality(&fz, &fzp, p), Ok(NodeClass::Transversal));
    assert!(line_angle(&fz.gradient(p), &fzp.gradient(p)) > 0.5);
}

#[test]
fn example_pair_refinement_keeps_transversal_verdicts() {
    let (a, ap) = example_pair(128).unwrap();
    let (b, bp) = example_pair(256).unwrap();
    let coarse = intersection_set(&a, &ap).unwrap();
    let fine = intersection_set(&b, &bp).unwrap();
    assert_eq!(coarse.len(), fine.len());
    let fine_pts: Vec<(&Vec<f64>, NodeClass)> =
        fine.iter().flat_map(|m| m.points.iter().zip(m.classification.iter().copied())).collect();
    for m in &coarse {
        for (p, c) in m.points.iter().zip(&m.classification) {
            if *c != NodeClass::Transversal {
                continue;
            }
            let (_, fc) = fine_pts
                .iter()
                .min_by(|x, y| {
                    crate::transport::cost::sq_dist(x.0, p).total_cmp(&crate::transport::cost::sq_dist(y.0, p))
                })
                .unwrap();
            assert_eq!(*fc, NodeClass::Transversal, "at {p:?}");
        }
    }
    let ra = assumption_report(&a, &ap, (2, 2, 1)).unwrap();
    let rb = assumption_report(&b, &bp, (2, 2, 1)).unwrap();
    assert!(ra.pass && rb.pass);
}

#[test]
fn identical_cdfs_coincide_everywhere() {
    let g = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
    let grid = Grid::uniform(2, -5.0, 5.0, 31).unwrap();
    let f = build_cdf_from_density(&g, &grid).unwrap();
    let ms = intersection_set(&f, &f).unwrap();
    assert_eq!(ms.len(), 1);
    let band = f.values().iter().filter(|&&v| v > BAND_DELTA && v < 1.0 - BAND_DELTA).count();
    assert_eq!(ms[0].len(), band);
    assert!(ms[0].classification.iter().all(|&c| c == NodeClass::Coincide));
    assert_eq!(check_transversality(&f, &f, &[0.1, 0.2]), Ok(NodeClass::Coincide));
}

#[test]
fn one_dimensional_crossing_at_minus_one() {
    // Oracle: bisection on the closed-form difference of the two CDFs.
    let diff = |x: f64| norm_cdf(x) - norm_cdf((x - 0.5) / 1.5);
    let (mut lo, mut hi) = (-3.0, -0.2);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (diff(mid) > 0.0) == (diff(lo) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo + 1.0).abs() < 1e-12);
    assert!((norm_cdf(lo) - 0.158_655_253_931_457).abs() < 1e-12);

    let grid = Grid::uniform(1, -8.0, 9.0, 1701).unwrap();
    let a = build_cdf_from_density(&AnalyticDensity::gaussian(vec![0.0], vec![vec![1.0]]).unwrap(), &grid).unwrap();
    let b = build_cdf_from_density(&AnalyticDensity::gaussian(vec![0.5], vec![vec![2.25]]).unwrap(), &grid).unwrap();
    let ms = intersection_set(&a, &b).unwrap();
    assert_eq!(ms.len(), 1);
    assert_eq!(ms[0].len(), 1);
    assert!((ms[0].points[0][0] - lo).abs() < 1e-4);
    assert!((ms[0].common_value[0] - 0.158_655).abs() < 1e-4);
    assert_eq!(ms[0].classification[0], NodeClass::Transversal);
    assert!(check_side_condition(&ms[0], &a, &b).pass);
}

#[test]
fn touching_product_cdfs_are_tangent() {
    // Φ(x₁)Φ(x₂) against Φ(x₁/2)Φ(x₂/2): both level curves at 1/4 pass
    // through the origin with gradients along (1, 1).
    let grid = Grid::uniform(2, -4.0, 4.0, 81).unwrap();
    let a = tabulate(&grid, |x| norm_cdf(x[0]) * norm_cdf(x[1]));
    let b = tabulate(&grid, |x| norm_cdf(x[0] / 2.0) * norm_cdf(x[1] / 2.0));
    let ga = a.gradient(&[0.0, 0.0]);
    let gb = b.gradient(&[0.0, 0.0]);
    // Analytic gradients are φ(0)/2·(1, 1) and φ(0)/4·(1, 1).
    assert!(line_angle(&ga, &gb) < 1e-6);
    assert!((ga[0] - 0.5 * crate::special::norm_pdf(0.0)).abs() < 1e-3);
    assert_eq!(check_transversality(&a, &b, &[0.0, 0.0]), Ok(NodeClass::Tangent));
    // Further along the intersection the curves do cross.
    let ms = intersection_set(&a, &b).unwrap();
    assert!(ms.iter().any(|m| m.count(NodeClass::Transversal) > 0));
}

#[test]
fn off_manifold_point_is_rejected() {
    let (fz, fzp) = example_pair(64).unwrap();
    assert!(matches!(check_transversality(&fz, &fzp, &[-3.0, -3.0]), Err(Error::NotOnIntersection(_))));
    let other = example_pair(65).unwrap().0;
    assert_eq!(intersection_set(&fz, &other), Err(Error::GridsDiffer));
}

fn unit_uniform(grid: &Grid) -> GriddedCdf {
    tabulate(grid, |x| x[0].clamp(0.0, 1.0) * x[1].clamp(0.0, 1.0))
}

#[test]
fn opposite_corner_arcs_each_fail_coverage() {
    let grid = Grid::uniform(2, -0.25, 1.25, 31).unwrap();
    let f = unit_uniform(&grid);
    let arc = |c: [f64; 2]| {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![c[0] + 0.05 * i as f64, c[1] - 0.05 * i as f64]).collect();
        IntersectionManifold::from_parts(pts, vec![vec![0, 1, 2, 3, 4]], &f, &f)
    };
    let top_left = arc([0.1, 0.9]);
    let bottom_right = arc([0.7, 0.3]);
    for m in [&top_left, &bottom_right] {
        let r = check_domination_coverage(m, &grid, &f);
        assert!(!r.pass);
        assert!(r.uncovered_count > 0);
    }
    // Together they would cover the node that defeats the top-left arc.
    let x = [0.6, 0.05];
    let top_left_misses = top_left.points.iter().all(|m| !crate::measure::dominates(m, &x).unwrap().comparable());
    let bottom_right_hits = bottom_right.points.iter().any(|m| crate::measure::dominates(m, &x).unwrap().comparable());
    assert!(top_left_misses && bottom_right_hits);
}

#[test]
fn manifold_between_zero_sets_breaks_side_condition() {
    // F_z = x₁x₂ and F_z' = x₁²√x₂ on the unit square meet along x₂ = x₁²,
    // which separates the two arms of the L-shaped zero set of F_z.
    let grid = Grid::uniform(2, -0.5, 1.5, 41).unwrap();
    let fz = unit_uniform(&grid);
    let fzp = tabulate(&grid, |x| {
        let (a, b) = (x[0].clamp(0.0, 1.0), x[1].clamp(0.0, 1.0));
        a * a * libm::sqrt(b)
    });
    let ms = intersection_set(&fz, &fzp).unwrap();
    assert_eq!(ms.len(), 1);
    for p in &ms[0].points {
        assert!((p[1] - p[0] * p[0]).abs() < 0.02, "{p:?}");
    }
    let r = check_side_condition(&ms[0], &fz, &fzp);
    assert!(!r.pass);
    let w = r.witness.unwrap();
    let (cdf, low) = match w.side {
        Side::ZLow => (&fz, true),
        Side::ZHigh => (&fz, false),
        Side::ZPrimeLow => (&fzp, true),
        Side::ZPrimeHigh => (&fzp, false),
    };
    for x in [&w.x1, &w.x2] {
        let v = cdf.at(x);
        assert!(if low { v <= BAND_DELTA } else { v >= 1.0 - BAND_DELTA });
    }
    // The witnesses sit on opposite sides of the curve x₂ = x₁².
    let side = |x: &[f64]| x[1] - x[0].max(0.0).powi(2);
    assert!(side(&w.x1) * side(&w.x2) < 0.0 || w.x1[0] < 0.0 || w.x2[0] < 0.0);
}

#[test]
fn epigraph_convexity_scan() {
    let g = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
    let grid = Grid::new(vec![Axis::new(-5.0, 5.0, 61), Axis::new(-7.0, 7.0, 61)]).unwrap();
    let f = build_cdf_from_density(&g, &grid).unwrap();
    let r = check_epigraph_convexity(&f, &[0.2, 0.5, 0.8]).unwrap();
    assert!(r.iter().all(|l| l.pass && l.violations == 0));

    // Two tight bumps at (−2, 2) and (2, −2): {F ≥ 0.45} is an L-shaped
    // union of two orthants, {F ≥ 0.75} a single orthant.
    let sq = Grid::uniform(2, -4.0, 4.0, 81).unwrap();
    let s = 0.3;
    let mix = tabulate(&sq, |x| {
        0.5 * norm_cdf((x[0] + 2.0) / s) * norm_cdf((x[1] - 2.0) / s)
            + 0.5 * norm_cdf((x[0] - 2.0) / s) * norm_cdf((x[1] + 2.0) / s)
    });
    let r = check_epigraph_convexity(&mix, &[0.45, 0.75]).unwrap();
    assert!(!r[0].pass && r[0].violations > 0 && r[0].worst_depth_cells > 1.0);
    assert!(r[1].pass);

    let top = check_epigraph_convexity(&f, &[1.0 - 2e-3]).unwrap();
    assert!(top[0].pass);
    assert_eq!(check_epigraph_convexity(&f, &[1.0]), Err(Error::LevelOutOfRange(1.0)));
}

#[test]
fn identical_pair_fails_relevance_only_verdict() {
    let g = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
    let grid = Grid::uniform(2, -5.0, 5.0, 31).unwrap();
    let f = build_cdf_from_density(&g, &grid).unwrap();
    let r = assumption_report(&f, &f, (2, 2, 1)).unwrap();
    assert!(!r.pass);
    assert!(!r.relevance.pass);
    assert_eq!(r.relevance.max_abs_difference, 0.0);
    assert!(r.failures().contains(&"relevance"));
    let bad_dims = assumption_report(&f, &f, (2, 3, 1)).unwrap();
    assert!(!bad_dims.dimensions.pass);
}

fn gaussian_pair(s11: f64, s22: f64, rho: f64, shift: f64) -> (GriddedCdf, GriddedCdf) {
    let grid = Grid::uniform(2, -7.0, 7.0, 29).unwrap();
    let a = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
    let c = rho * (s11 * s22).sqrt();
    let b = AnalyticDensity::gaussian(vec![shift, -shift], vec![vec![s11, c], vec![c, s22]]).unwrap();
    (build_cdf_from_density(&a, &grid).unwrap(), build_cdf_from_density(&b, &grid).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn intersection_is_symmetric(
        s11 in 0.5f64..2.0, s22 in 0.5f64..2.0, rho in -0.6f64..0.6, shift in -0.5f64..0.5,
    ) {
        let (a, b) = gaussian_pair(s11, s22, rho, shift);
        let key = |ms: Vec<IntersectionManifold>| {
            let mut pts: Vec<Vec<u64>> = ms
                .into_iter()
                .flat_map(|m| m.points)
                .map(|p| p.iter().map(|v| v.to_bits()).collect())
                .collect();
            pts.sort();
            pts
        };
        prop_assert_eq!(key(intersection_set(&a, &b).unwrap()), key(intersection_set(&b, &a).unwrap()));
    }

    #[test]
    fn manifold_nodes_lie_on_the_intersection(
        s11 in 0.5f64..2.0, s22 in 0.5f64..2.0, rho in -0.6f64..0.6, shift in -0.5f64..0.5,
    ) {
        let (a, b) = gaussian_pair(s11, s22, rho, shift);
        for m in intersection_set(&a, &b).unwrap() {
            for p in &m.points {
                prop_assert!((a.at(p) - b.at(p)).abs() <= CONTOUR_TOL);
                let v = a.at(p);
                prop_assert!(v > BAND_DELTA && v < 1.0 - BAND_DELTA);
            }
        }
    }
}
