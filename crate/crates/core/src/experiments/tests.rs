use super::*;
use crate::measure::{AnalyticDensity, Grid};
use alloc::vec;
use alloc::vec::Vec;
use proptest::prelude::*;

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

#[test]
fn simulation_is_reproducible_and_prefix_stable() {
    let spec = TriangularModelSpec::default_2d();
    let a = simulate_triangular(&spec, 300, 42).unwrap();
    let b = simulate_triangular(&spec, 300, 42).unwrap();
    let c = simulate_triangular(&spec, 100, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 300);
    assert_eq!(&a.x[..100], &c.x[..]);
    let latent = a.latent.as_ref().unwrap();
    for i in 0..a.len() {
        assert_eq!(a.x[i], spec.h(a.z[i], &latent.u[i]));
        assert_eq!(a.y[i], spec.m(&a.x[i], &latent.eps[i]));
    }
    assert_ne!(simulate_triangular(&spec, 300, 43).unwrap(), a);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = TriangularModelSpec::default_2d();
    s.d = 3;
    assert!(matches!(s.validate(), Err(crate::Error::InvalidSpec(_))));
    let mut s = TriangularModelSpec::default_2d();
    s.second.a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
    assert!(s.validate().is_err());
    let mut s = TriangularModelSpec::default_2d();
    s.first.kappa = vec![0.5];
    assert!(s.validate().is_err());
    assert!(simulate_triangular(&s, 10, 0).is_err());
    let mut s = TriangularModelSpec::default_2d();
    s.instrument = InstrumentDesign::Discrete { values: vec![0.0], weights: vec![1.0] };
    assert!(s.validate().is_err());
}

#[test]
fn identity_first_stage_reproduces_u() {
    let spec = TriangularModelSpec::default_2d();
    let data = simulate_triangular(&spec, 10_000, 3).unwrap();
    let u = AnalyticDensity::new(spec.u_law.clone()).unwrap();
    let xs: Vec<&Vec<f64>> =
        data.x.iter().zip(&data.z).filter(|(_, z)| **z == spec.first.zbar).map(|(x, _)| x).collect();
    assert!(xs.len() > 4500);
    let mut ks: f64 = 0.0;
    for p in xs.iter().take(800) {
        let emp = xs.iter().filter(|q| q[0] <= p[0] && q[1] <= p[1]).count() as f64 / xs.len() as f64;
        ks = ks.max((emp - u.cdf(p).unwrap()).abs());
    }
    assert!(ks < 0.02, "{ks}");
}

#[test]
fn latent_columns_are_independent_of_the_instrument() {
    let spec = TriangularModelSpec::default_2d();
    for seed in 0..5 {
        let data = simulate_triangular(&spec, 4000, seed).unwrap();
        let audit = independence_audit(&data).unwrap();
        assert_eq!(audit.correlations.len(), 4);
        assert!(audit.pass, "seed {seed}: {:?}", audit.correlations);
    }
    let mut data = simulate_triangular(&spec, 4000, 0).unwrap();
    // Z copied into ε₁ is caught.
    for (e, z) in data.latent.as_mut().unwrap().eps.iter_mut().zip(&data.z) {
        e[0] += z;
    }
    assert!(!independence_audit(&data).unwrap().pass);
    data.latent = None;
    assert!(independence_audit(&data).is_err());
}

#[test]
fn pushforward_matches_the_closed_form() {
    let spec = TriangularModelSpec::default_2d();
    let data = simulate_triangular(&spec, 100_000, 5).unwrap();
    let centres = vec![vec![0.0, 0.0], vec![0.8, 0.4], vec![-0.6, -0.5]];
    let audit = pushforward_audit(&spec, &data, &centres, 0.15, 9).unwrap();
    assert!(audit.pass, "{audit:?}");
    // With A = I and ε ~ N(0, I), P(Y ≤ c | X = x) = Φ(c₁ − g₁(x)) Φ(c₂ − g₂(x)).
    for c in &centres {
        let rows: Vec<usize> =
            (0..data.len()).filter(|&i| data.x[i].iter().zip(c).all(|(a, b)| (a - b).abs() <= 0.15)).collect();
        let corner = [0.3 * c[0], 0.2 - c[1]];
        let emp = rows.iter().filter(|&&i| data.y[i][0] <= corner[0] && data.y[i][1] <= corner[1]).count() as f64
            / rows.len() as f64;
        let exact: f64 = rows
            .iter()
            .map(|&i| {
                let x = &data.x[i];
                phi(corner[0] - 0.5 * x[0].sin()) * phi(corner[1] - 0.5 * x[1].cos())
            })
            .sum::<f64>()
            / rows.len() as f64;
        let se = (0.25 / rows.len() as f64).sqrt();
        assert!((emp - exact).abs() < 4.0 * se, "{c:?}: {emp} vs {exact}");
    }
    // A second stage that ignores x is detected.
    let mut wrong = spec.clone();
    wrong.second.g = ShiftTerm::Linear { b: vec![vec![1.5, 0.0], vec![0.0, 1.5]] };
    let off = pushforward_audit(&wrong, &data, &centres, 0.15, 9).unwrap();
    assert!(!off.pass);
}

#[test]
fn q_constancy_separates_the_fixtures() {
    let spec = TriangularModelSpec::default_2d();
    let data = simulate_triangular(&spec, 500, 7).unwrap();
    let opts = QConstancyOptions::default();
    let same = verify_q_constancy(&spec, |x, e| spec.m(x, e), &data, 12, &opts).unwrap();
    assert!(same.variation <= 1e-12 && same.identity_deviation <= 1e-12);
    assert_eq!(same.diagnosis, QDiagnosis::Identity);

    let fixed = Distortion::Fixed { scale: 1.5, shift: vec![0.2, -0.1] };
    let r = verify_q_constancy(&spec, |x, e| fixed.apply(&spec, x, e), &data, 12, &opts).unwrap();
    assert!(r.variation <= Q_VARIATION_TOL);
    assert_eq!(r.diagnosis, QDiagnosis::XIndependent);
    // q(x, e) = 1.5 e + (0.2, −0.1) for every x
    let e = &r.test_points[0];
    let expect = ((0.5 * e[0] + 0.2).powi(2) + (0.5 * e[1] - 0.1).powi(2)).sqrt();
    assert!(r.identity_deviation >= expect - 1e-12);

    let bent = Distortion::XDependent { strength: 0.3 };
    let r = verify_q_constancy(&spec, |x, e| bent.apply(&spec, x, e), &data, 12, &opts).unwrap();
    assert!(r.variation > 0.1, "{}", r.variation);
    assert_eq!(r.diagnosis, QDiagnosis::NotIdentifiedEquivalent);
    assert!(!r.pass());
    // q(x, e) − q(x', e) = 0.3 (x₁ − x₁') e₁ along each orbit
    for o in &r.orbits {
        let lo = o.iterates.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = o.iterates.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!((o.variation - 0.3 * (hi - lo)).abs() < 1e-12);
    }
}

#[test]
fn shifted_first_stage_has_no_intersection() {
    let spec = TriangularModelSpec::shift_2d();
    let data = simulate_triangular(&spec, 200, 1).unwrap();
    let r = verify_q_constancy(&spec, |x, e| spec.m(x, e), &data, 5, &QConstancyOptions::default());
    match r {
        Err(crate::Error::AssumptionFailure(why)) => assert!(why.contains("no_intersection"), "{why}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn linear_counterexample_verdicts() {
    let r0 = linear_counterexample(0.0).unwrap();
    assert!(!r0.pass && !r0.relevance.pass);
    let r = linear_counterexample(0.1).unwrap();
    assert!(!r.pass && !r.common_support.pass);
    assert!(r.relevance.pass);
    for beta in [0.5, 1.0, -0.5] {
        let r = linear_counterexample(beta).unwrap();
        assert!(!r.pass, "β = {beta}");
        assert!(!r.common_support.pass);
    }
    assert!(linear_counterexample(f64::NAN).is_err());
}

#[test]
fn figure_resolution_bounds() {
    assert!(reproduce_cdf_intersection_figure(32).is_err());
    assert!(reproduce_cdf_intersection_figure(513).is_err());
}

#[test]
fn figure_reproduction_and_refinement() {
    let coarse = reproduce_cdf_intersection_figure(128).unwrap();
    assert_eq!(coarse.manifolds().len(), 2);
    assert!(coarse.matches_example());
    let l = coarse.lower.unwrap();
    assert!(!coarse.report.verdicts[l].part3);
    let u = coarse.upper.unwrap();
    assert!(coarse.manifolds()[u].centroid()[1] > 0.0);
    assert_eq!(coarse.contours_z.len(), FIGURE_LEVELS.len());
    for (lz, lzp) in coarse.contours_z.iter().zip(&coarse.contours_zprime) {
        for p in &lz.points {
            assert!((coarse.fz.at(p) - lz.level).abs() < 1e-6);
        }
        for p in &lzp.points {
            assert!((coarse.fzp.at(p) - lzp.level).abs() < 1e-6);
        }
    }
    assert_eq!(reproduce_cdf_intersection_figure(128).unwrap(), coarse);
    let fine = reproduce_cdf_intersection_figure(256).unwrap();
    let r = compare_refinement(&coarse, &fine);
    assert_eq!(r.fine_components, 2);
    assert!(r.pass, "{:?}", r.drift_cells);
}

#[test]
fn hedonic_closed_forms() {
    let spec = HedonicModelSpec::default_2d();
    spec.validate().unwrap();
    let x = [0.4, -1.1];
    let y = [0.7, 0.2];
    // central differences of Ū
    let h = 1e-6;
    let g = spec.utility_gradient(&x, &y);
    for i in 0..2 {
        let mut a = y;
        let mut b = y;
        a[i] += h;
        b[i] -= h;
        let fd = (spec.utility(&x, &a) - spec.utility(&x, &b)) / (2.0 * h);
        assert!((fd - g[i]).abs() < 1e-6);
    }
    let e = spec.inverse_demand(&x, &y);
    let back = spec.demand(&x, &e).unwrap();
    assert!((back[0] - y[0]).abs() < 1e-12 && (back[1] - y[1]).abs() < 1e-12);
    let mut bad = spec.clone();
    bad.q = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
    assert!(bad.validate().is_err());
    let mut bad = spec.clone();
    bad.eps_law = spec.eta_law.clone();
    assert!(bad.validate().is_err());
}

fn quick_opts() -> HedonicOptions {
    HedonicOptions { bin_target: 2500, eps_points: 256, epsilon_fraction: 0.03, ..Default::default() }
}

#[test]
fn hedonic_constant_is_not_identified() {
    let spec = HedonicModelSpec::default_2d();
    let grid = Grid::uniform(2, -3.0, 3.0, 13).unwrap();
    let opts = quick_opts();
    let a = hedonic_recover_utility(&spec, 10_000, &grid, &opts).unwrap();
    let mut shifted = spec.clone();
    shifted.utility_constant = 7.0;
    assert_eq!(simulate_hedonic(&spec, 500, 0).unwrap(), simulate_hedonic(&shifted, 500, 0).unwrap());
    let b = hedonic_recover_utility(&shifted, 10_000, &grid, &opts).unwrap();
    assert!(!a.samples.is_empty());
    for (s, t) in a.samples.iter().zip(&b.samples) {
        assert_eq!(s.recovered, t.recovered);
        assert_eq!(s.y, t.y);
    }
    assert_eq!(a.relative_rms.to_bits(), b.relative_rms.to_bits());
    // coarse accuracy at this sample size
    assert!(a.relative_rms < 0.12, "{}", a.relative_rms);
}

#[test]
fn hedonic_error_paths() {
    let spec = HedonicModelSpec::default_2d();
    let grid = Grid::uniform(2, -3.0, 3.0, 13).unwrap();
    let r = hedonic_recover_utility(&spec, 40, &grid, &quick_opts());
    assert!(matches!(r, Err(crate::Error::SparseBin { count: 40, required: 50 })));
    let mut same = spec.clone();
    same.first.kappa = vec![0.0, 0.0];
    same.first.beta = vec![0.0, 0.0];
    let r = hedonic_recover_utility(&same, 1000, &grid, &quick_opts());
    match r {
        Err(crate::Error::AssumptionFailure(why)) => assert!(why.contains("relevance")),
        other => panic!("{other:?}"),
    }
    let g1 = Grid::uniform(1, -3.0, 3.0, 13).unwrap();
    assert!(hedonic_recover_utility(&spec, 1000, &g1, &quick_opts()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn second_stage_inverts(
        e in prop::collection::vec(-4.0f64..4.0, 2),
        x in prop::collection::vec(-4.0f64..4.0, 2),
        off in -0.9f64..0.9,
    ) {
        let mut spec = TriangularModelSpec::default_2d();
        spec.second.a = vec![vec![1.0, off], vec![off, 1.0]];
        let y = spec.m(&x, &e);
        let back = spec.m_inv(&x, &y).unwrap();
        prop_assert!((back[0] - e[0]).abs() < 1e-9 && (back[1] - e[1]).abs() < 1e-9);
    }

    #[test]
    fn first_stage_is_identity_at_zbar(u in prop::collection::vec(-50.0f64..50.0, 2), zbar in -3.0f64..3.0) {
        let mut spec = TriangularModelSpec::default_2d();
        spec.first.zbar = zbar;
        prop_assert_eq!(spec.h(zbar, &u), u);
    }

    #[test]
    fn demand_inverts(
        e in prop::collection::vec(-4.0f64..4.0, 2),
        x in prop::collection::vec(-4.0f64..4.0, 2),
        c in -1e3f64..1e3,
    ) {
        let mut spec = HedonicModelSpec::default_2d();
        spec.utility_constant = c;
        let y = spec.demand(&x, &e).unwrap();
        let back = spec.inverse_demand(&x, &y);
        prop_assert!((back[0] - e[0]).abs() < 1e-9 && (back[1] - e[1]).abs() < 1e-9);
    }

    #[test]
    fn dataset_prefixes_agree(seed in 0u64..1000, n in 1usize..60) {
        let spec = TriangularModelSpec::default_2d();
        let a = simulate_triangular(&spec, n, seed).unwrap();
        let b = simulate_triangular(&spec, 60, seed).unwrap();
        prop_assert_eq!(&a.y[..], &b.y[..n]);
        prop_assert_eq!(&a.z[..], &b.z[..n]);
    }
}
