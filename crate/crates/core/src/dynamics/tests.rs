use super::*;
use crate::manifold::intersection_set;
use crate::measure::{build_cdf_from_density, AnalyticDensity, Axis, DiscreteMeasure, Grid};
use alloc::vec;
use proptest::prelude::*;

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

fn gaussian_1d(mean: f64, var: f64, grid: &Grid) -> GriddedCdf {
    build_cdf_from_density(&AnalyticDensity::gaussian(vec![mean], vec![vec![var]]).unwrap(), grid).unwrap()
}

/// `N(0, 1)` and `N(0.5, 1.5²)` on `[-8, 8]`; the rearrangement is
/// `x ↦ 0.5 + 1.5x` with fixed point `-1`.
fn pair_1d(nodes: usize) -> (GriddedCdf, GriddedCdf) {
    let grid = Grid::new(vec![Axis::new(-8.0, 8.0, nodes)]).unwrap();
    (gaussian_1d(0.0, 1.0, &grid), gaussian_1d(0.5, 2.25, &grid))
}

#[test]
fn one_dimensional_orbit_contracts_to_minus_one() {
    let (fz, fzp) = pair_1d(4001);
    let (t, ti) = brenier_maps(&fz, &fzp, None).unwrap();
    assert!((t.apply(&[0.0])[0] - 0.5).abs() < 1e-4);
    let orbit = iterate_orbit(&t, &ti, &fz, &fzp, &[0.0], DEFAULT_MAX_STEPS, 1e-5).unwrap();
    assert_eq!(orbit.status, OrbitStatus::ConvergedToManifold);
    assert!(orbit.steps() <= 30);
    assert!(orbit.directions.iter().all(|d| *d == Direction::Inverse));
    // x_{n+1} = (x_n − 0.5) / 1.5
    let mut x = 0.0;
    for it in orbit.iterates.iter().take(5) {
        assert!((it[0] - x).abs() < 1e-3, "{} vs {x}", it[0]);
        x = (x - 0.5) / 1.5;
    }
    assert!((orbit.iterates[3][0] + 0.7037).abs() < 1e-3);
    assert!((orbit.last()[0] + 1.0).abs() < 1e-3);
    let gaps = orbit.gaps();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-6));
}

#[test]
fn start_on_the_crossing_is_a_fixed_point() {
    let (fz, fzp) = pair_1d(4001);
    let (t, ti) = brenier_maps(&fz, &fzp, None).unwrap();
    let orbit = iterate_orbit(&t, &ti, &fz, &fzp, &[-1.0], DEFAULT_MAX_STEPS, 1e-5).unwrap();
    assert_eq!(orbit.status, OrbitStatus::FixedPoint);
    assert_eq!(orbit.steps(), 0);
}

#[test]
fn start_outside_support_is_rejected() {
    let (fz, fzp) = pair_1d(801);
    let (t, ti) = brenier_maps(&fz, &fzp, None).unwrap();
    for x0 in [[9.0], [-8.0]] {
        let r = iterate_orbit(&t, &ti, &fz, &fzp, &x0, 10, 1e-4);
        assert_eq!(r, Err(Error::OutsideSupport));
    }
}

#[test]
fn one_dimensional_lemmas_hold() {
    let (fz, fzp) = pair_1d(4001);
    let (t, _) = brenier_maps(&fz, &fzp, None).unwrap();
    let ms = intersection_set(&fz, &fzp).unwrap();
    assert_eq!(ms.len(), 1);
    let fixed = check_fixed_set(&t, &ms[0], DEFAULT_FIXED_SET_CELLS);
    assert!(fixed.pass, "{fixed:?}");
    assert!(fixed.max_cells < 0.1);

    // F_z(0) = 0.5 > F_z'(0) = Φ(−1/3); T(0) = 0.5.
    let order = check_order_preservation(&t, &fz, &fzp, &[vec![0.0], vec![2.0], vec![-3.0]]);
    assert_eq!(order.checked, 2);
    assert_eq!(order.skipped, vec![2]);
    assert!(order.pass);
    let at_zero = phi(0.5) - phi(0.0);
    assert!((at_zero - 0.191462).abs() < 1e-6);
    let sweep = check_order_preservation(&t, &fz, &fzp, &order_preservation_starts(&fz, &fzp));
    assert!(sweep.pass && sweep.checked > 1000);

    // α = 0.5 and the median of N(0.5, ·) is 0.5, where T(0) lands.
    let p = check_metric_projection(&t, &fz, &fzp, &[0.0]).unwrap();
    assert!(!p.trivial);
    assert!((p.projection[0] - 0.5).abs() < 1e-4);
    assert!(p.distance_cells < 0.1);
    // Inside the epigraph the projection is the point itself.
    let q = check_metric_projection(&t, &fz, &fzp, &[-2.0]).unwrap();
    assert!(q.trivial);
    assert_eq!(q.projection, vec![-2.0]);
}

#[test]
fn closed_form_map_fixes_the_crossing() {
    let (fz, fzp) = pair_1d(2001);
    let pts: Vec<Vec<f64>> = (0..2001).map(|i| vec![-8.0 + 0.008 * i as f64]).collect();
    let t = TransportMap::from_fn(pts, |x| vec![0.5 + 1.5 * x[0]]);
    let ms = intersection_set(&fz, &fzp).unwrap();
    assert!((ms[0].points[0][0] + 1.0).abs() < 1e-4);
    let r = check_fixed_set(&t, &ms[0], 2.0);
    assert!(r.pass && r.max_cells < 0.05);
}

/// `N(0, I)` and `N(0, diag(4, 1/4))` on a 2-D grid.
fn diagonal_pair(n: usize) -> (GriddedCdf, GriddedCdf) {
    let grid = Grid::new(vec![Axis::new(-8.0, 8.0, n), Axis::new(-8.0, 8.0, n)]).unwrap();
    let a = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let b = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![4.0, 0.0], vec![0.0, 0.25]]).unwrap();
    (build_cdf_from_density(&a, &grid).unwrap(), build_cdf_from_density(&b, &grid).unwrap())
}

#[test]
fn linear_brenier_map_moves_the_crossing_curve() {
    // The Brenier map between these laws is x ↦ (2x₁, x₂/2). It fixes only
    // the origin, while Φ(x₁)Φ(x₂) = Φ(x₁/2)Φ(2x₂) on a whole curve.
    let (fz, fzp) = diagonal_pair(81);
    let ms = intersection_set(&fz, &fzp).unwrap();
    assert!(!ms.is_empty());
    let pts: Vec<Vec<f64>> = (0..fz.grid().len()).map(|i| fz.grid().node(i)).collect();
    let t = TransportMap::on_grid(
        fz.grid(),
        pts.iter().map(|x| vec![2.0 * x[0], 0.5 * x[1]]).collect(),
        crate::transport::MapOrigin::Closed,
    )
    .unwrap();
    let cell = fz.grid().max_step();
    let m = ms.iter().max_by_key(|m| m.len()).unwrap();
    let r = check_fixed_set(&t, m, DEFAULT_FIXED_SET_CELLS);
    // Off-node points go through inverse-distance weights, exact only at nodes.
    for (p, d) in m.points.iter().zip(&r.displacements) {
        let exact = libm::sqrt(p[0] * p[0] + 0.25 * p[1] * p[1]) / cell;
        assert!((d - exact).abs() < 1.0, "{p:?}");
    }
    assert!(!r.pass);
    assert!(r.max_cells > 10.0);
}

#[test]
fn linear_brenier_map_breaks_order_preservation() {
    // T = diag(2, 1/2) gives F_z'(Tx) = F_z(x). At x₀ = (2.9, 1.5),
    // F_z(x₀) > F_z'(x₀) but F_z(Tx₀) = Φ(5.8)Φ(0.75) < F_z(x₀).
    let (fz, fzp) = diagonal_pair(161);
    let grid = fz.grid();
    let images = (0..grid.len()).map(|i| {
        let x = grid.node(i);
        vec![2.0 * x[0], 0.5 * x[1]]
    });
    let t = TransportMap::on_grid(grid, images.collect(), crate::transport::MapOrigin::Closed).unwrap();
    let x0 = vec![2.9, 1.5];
    let (a, b) = (phi(2.9) * phi(1.5), phi(1.45) * phi(3.0));
    assert!(a > b);
    let oracle = phi(5.8) * phi(0.75) - a;
    assert!((oracle + 0.158079).abs() < 1e-5);
    let r = check_order_preservation(&t, &fz, &fzp, &[x0]);
    assert_eq!(r.checked, 1);
    assert!(!r.pass);
    assert!((r.violations[0].margin - oracle).abs() < 2e-3, "{}", r.violations[0].margin);
}

#[test]
fn grid_sinkhorn_map_matches_the_linear_map() {
    let (fz, fzp) = diagonal_pair(49);
    let (t, ti) = brenier_maps(&fz, &fzp, None).unwrap();
    let cell = fz.grid().max_step();
    // Grid nodes whose linear images are nodes as well.
    for x in [[-1.0, 2.0 / 3.0], [1.0, -4.0 / 3.0], [1.0 / 3.0, 2.0], [0.0, 0.0]] {
        let y = t.apply(&x);
        let err = libm::hypot(y[0] - 2.0 * x[0], y[1] - 0.5 * x[1]);
        assert!(err < 0.5 * cell, "{x:?} -> {y:?}");
        let back = ti.apply(&[2.0 * x[0], 0.5 * x[1]]);
        // The inverse spreads the narrow axis, where ε = h² blurs more.
        assert!(libm::hypot(back[0] - x[0], back[1] - x[1]) < cell, "{x:?} <- {back:?}");
    }
}

#[test]
fn two_dimensional_orbits_stay_in_support() {
    let (fz, fzp) = diagonal_pair(49);
    let (t, ti) = brenier_maps(&fz, &fzp, None).unwrap();
    let starts = crate::quasi::halton_in_box(20, &[-2.0, -2.0], &[2.0, 2.0]);
    for x0 in &starts {
        let o = iterate_orbit(&t, &ti, &fz, &fzp, x0, DEFAULT_MAX_STEPS, DEFAULT_ORBIT_TOL).unwrap();
        assert!(o.iterates.iter().all(|x| fz.grid().contains(x)));
        assert_eq!(o.iterates.len(), o.values.len());
        assert_eq!(o.iterates.len(), o.directions.len() + 1);
    }
}

#[test]
fn stability_along_sample_sizes() {
    let (fz, fzp) = pair_1d(801);
    let mu = DiscreteMeasure::from_gridded(&fz).unwrap();
    let nu = DiscreteMeasure::from_gridded(&fzp).unwrap();
    let r = check_stability_in_measure(&mu, &nu, &Perturbation::SampleSizes(vec![100, 1000, 10000]), 7).unwrap();
    assert!((r.threshold - 0.8).abs() < 1e-9);
    assert!(r.pass, "{r:?}");
    assert!(r.rungs[2].deviation_mass <= r.rungs[0].deviation_mass);
}

#[test]
fn stability_along_mixture_weights() {
    let (fz, fzp) = pair_1d(801);
    let mu = DiscreteMeasure::from_gridded(&fz).unwrap();
    let nu = DiscreteMeasure::from_gridded(&fzp).unwrap();
    let ladder = Perturbation::Mixture { weights: vec![0.2, 0.05, 0.01, 0.0], atom: vec![5.0] };
    let r = check_stability_in_measure(&mu, &nu, &ladder, 0).unwrap();
    assert!(r.pass, "{r:?}");
    let m: Vec<f64> = r.rungs.iter().map(|g| g.deviation_mass).collect();
    assert!(m[0] > m[1] && m[1] > m[2], "{m:?}");
    assert!(m[0] >= 0.15);
    assert_eq!(m[3], 0.0);
    let bad = Perturbation::Mixture { weights: vec![0.01, 0.2], atom: vec![5.0] };
    assert!(check_stability_in_measure(&mu, &nu, &bad, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn direction_is_the_contracting_one(
        s in prop_oneof![0.4f64..0.8, 1.25f64..2.5],
        b in -0.5f64..0.5,
        side in prop::bool::ANY,
    ) {
        let grid = Grid::new(vec![Axis::new(-12.0, 12.0, 2401)]).unwrap();
        let fz = gaussian_1d(0.0, 1.0, &grid);
        let fzp = gaussian_1d(b, s * s, &grid);
        let star = b / (1.0 - s);
        prop_assume!(star.abs() < 1.5);
        let pts: Vec<Vec<f64>> = (0..2401).map(|i| vec![-12.0 + 0.01 * i as f64]).collect();
        let t = TransportMap::from_fn(pts.clone(), |x| vec![b + s * x[0]]);
        let ti = TransportMap::from_fn(pts, |x| vec![(x[0] - b) / s]);
        let x0 = star + if side { 0.2 } else { -0.2 };
        let o = iterate_orbit(&t, &ti, &fz, &fzp, &[x0], 50, 1e-6).unwrap();
        prop_assert!(o.steps() >= 1);
        let expect = if s > 1.0 { Direction::Inverse } else { Direction::Forward };
        prop_assert_eq!(o.directions[0], expect);
    }

    #[test]
    fn orbit_gap_never_increases(
        s in prop_oneof![0.5f64..0.8, 1.25f64..2.0],
        b in -0.5f64..0.5,
        x0 in -2.0f64..2.0,
    ) {
        let grid = Grid::new(vec![Axis::new(-12.0, 12.0, 2401)]).unwrap();
        let fz = gaussian_1d(0.0, 1.0, &grid);
        let fzp = gaussian_1d(b, s * s, &grid);
        let (t, ti) = brenier_maps(&fz, &fzp, None).unwrap();
        let o = iterate_orbit(&t, &ti, &fz, &fzp, &[x0], DEFAULT_MAX_STEPS, 1e-6).unwrap();
        let g = o.gaps();
        for (n, w) in g.windows(2).enumerate() {
            if !o.strikes.contains(&n) {
                prop_assert!(w[1] <= w[0] + 1e-6);
            }
        }
        prop_assert_eq!(o.status == OrbitStatus::Diverged, o.strikes.len() == DIVERGENCE_STRIKES);
        prop_assert!(o.iterates.iter().all(|x| grid.contains(x)));
    }
}
