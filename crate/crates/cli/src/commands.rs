use serde::Serialize;
use serde_json::json;
use tri_ident_core::dynamics::{brenier_maps, iterate_orbit, orbit_starts, OrbitStatus, OrbitTrace};
use tri_ident_core::experiments::{
    hedonic_recover_utility, independence_audit, linear_counterexample, reproduce_cdf_intersection_figure,
    simulate_triangular, verify_q_constancy, Distortion, HedonicModelSpec, TriangularModelSpec, FIGURE_LEVELS,
};
use tri_ident_core::manifold::assumption_report;
use tri_ident_core::measure::{
    build_cdf_from_density_with, build_cdf_from_samples, level_set, DensityCdfOptions, DiscreteMeasure, Grid,
    GriddedCdf, IsoLevelSet,
};
use tri_ident_core::transport::{
    check_brenier_properties, check_cyclical_monotonicity, extract_map, solve_entropic, solve_exact, CostFunction,
};
use tri_ident_core::Error;

use crate::config::{PointSet, RunConfig, SolverSpec};
use crate::error::CliError;
use crate::output::{
    cdf_rows, contour_rows, contour_svg, coordinate_header, fmt17, manifold_rows, read_points, OutDir,
};

/// Verdict and short summary of a finished command; the full report has
/// already been written.
pub struct Outcome {
    pub pass: bool,
    pub summary: serde_json::Value,
    pub report: serde_json::Value,
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Config(format!("cannot serialise report: {e}")))
}

/// Pass/fail fraction of orbits that must reach the manifold.
pub const ORBIT_SUCCESS_FRACTION: f64 = 0.95;

const DEFAULT_ORBIT_STARTS: usize = 20;
const DEFAULT_Q_SAMPLE: usize = 2000;
const DEFAULT_ORBIT_BATCH: usize = 20;
const DEFAULT_HEDONIC_N: usize = 100_000;
pub const DEFAULT_FIGURE_RESOLUTION: usize = 128;
const CHECK_TRIALS: usize = 2000;

fn pair_from_config(cfg: &RunConfig) -> Result<(GriddedCdf, GriddedCdf), CliError> {
    let grid = cfg.grid()?.ok_or_else(|| CliError::Config("missing grid".into()))?;
    if let Some(d) = &cfg.densities {
        let mut opts = DensityCdfOptions::default();
        if let Some(c) = cfg.min_coverage {
            opts.min_coverage = c;
        }
        let fz = build_cdf_from_density_with(&d.z.density()?, &grid, opts)?;
        let fzp = build_cdf_from_density_with(&d.zprime.density()?, &grid, opts)?;
        return Ok((fz, fzp));
    }
    let s = cfg.samples.as_ref().ok_or_else(|| CliError::Config("missing densities or samples".into()))?;
    let fz = build_cdf_from_samples(&read_points(&s.z)?, &grid)?;
    let fzp = build_cdf_from_samples(&read_points(&s.zprime)?, &grid)?;
    Ok((fz, fzp))
}

fn contour_families(fz: &GriddedCdf, fzp: &GriddedCdf) -> Result<(Vec<IsoLevelSet>, Vec<IsoLevelSet>), CliError> {
    let a = FIGURE_LEVELS.iter().map(|&l| level_set(fz, l)).collect::<Result<Vec<_>, _>>()?;
    let b = FIGURE_LEVELS.iter().map(|&l| level_set(fzp, l)).collect::<Result<Vec<_>, _>>()?;
    Ok((a, b))
}

fn write_pair_files(
    out: &mut OutDir,
    fz: &GriddedCdf,
    fzp: &GriddedCdf,
    manifolds: &[tri_ident_core::manifold::IntersectionManifold],
    svg_name: &str,
) -> Result<(), CliError> {
    let (h, r) = cdf_rows(fz, fzp);
    out.csv("cdfs.csv", &h, &r)?;
    let (h, r) = manifold_rows(manifolds, fz, fzp);
    out.csv("manifolds.csv", &h, &r)?;
    if fz.dim() >= 2 {
        let (zs, zps) = contour_families(fz, fzp)?;
        let (h, r) = contour_rows(&[("F_z", &zs), ("F_zprime", &zps)], fz.dim());
        out.csv("contours.csv", &h, &r)?;
        if let Some(svg) = contour_svg(fz, &zs, &zps, manifolds) {
            out.text(svg_name, &svg)?;
        }
    }
    Ok(())
}

pub fn check_assumptions(cfg: &RunConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let (fz, fzp) = pair_from_config(cfg)?;
    let k = fz.dim();
    let dims = cfg.dims.map(|d| (d.d, d.k, d.m)).unwrap_or((k, k, 1));
    let report = assumption_report(&fz, &fzp, dims)?;
    write_pair_files(out, &fz, &fzp, &report.manifolds, "contours.svg")?;
    Ok(Outcome {
        pass: report.pass,
        summary: json!({
            "pass": report.pass,
            "failures": report.failures(),
            "components": report.manifolds.len(),
            "qualifying_component": report.qualifying_manifold(),
        }),
        report: to_value(&report)?,
    })
}

fn measure(set: &PointSet, what: &str) -> Result<DiscreteMeasure, CliError> {
    let points = match (&set.points, &set.path) {
        (Some(p), None) => p.clone(),
        (None, Some(path)) => read_points(path)?,
        _ => return Err(CliError::Config(format!("`{what}` needs exactly one of `points` or `path`"))),
    };
    Ok(match &set.weights {
        Some(w) => DiscreteMeasure::normalized(points, w.clone())?,
        None => DiscreteMeasure::uniform(points)?,
    })
}

#[derive(Serialize)]
struct TransportReport {
    solver: SolverSpec,
    cost: CostFunction,
    total_cost: f64,
    marginal_residual: f64,
    marginal_tol: f64,
    cyclical_monotonicity: Option<tri_ident_core::transport::CyclicalMonotonicityReport>,
    brenier: Option<tri_ident_core::transport::BrenierReport>,
}

pub fn solve_transport(cfg: &RunConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let mu = measure(cfg.source.as_ref().expect("required"), "source")?;
    let nu = measure(cfg.target.as_ref().expect("required"), "target")?;
    let cost = cfg.cost.clone().unwrap_or(CostFunction::SquaredEuclidean);
    let solver = cfg.solver.unwrap_or(SolverSpec::Exact);
    let plan = match solver {
        SolverSpec::Exact => solve_exact(&mu, &nu, &cost)?,
        SolverSpec::Entropic { epsilon } => solve_entropic(&mu, &nu, &cost, epsilon)?,
    };
    let tol = &cfg.tolerances;
    let marginal_residual = plan.marginal_residual();
    let (cm, br) = if cost == CostFunction::SquaredEuclidean {
        let map = extract_map(&plan)?;
        let d = map.dim();
        let (h, rows): (Vec<String>, Vec<Vec<String>>) = {
            let mut h = coordinate_header(&["index"], d, &[]);
            h.extend((1..=d).map(|i| format!("t{i}")));
            let rows = map
                .sources
                .iter()
                .zip(&map.images)
                .enumerate()
                .map(|(i, (s, t))| {
                    let mut r = vec![i.to_string()];
                    r.extend(s.iter().chain(t).map(|v| fmt17(*v)));
                    r
                })
                .collect();
            (h, rows)
        };
        out.csv("map.csv", &h, &rows)?;
        (
            Some(check_cyclical_monotonicity(&map, 3, CHECK_TRIALS, tol.cyclical_tol)),
            Some(check_brenier_properties(&map, CHECK_TRIALS, tol.brenier_tol)),
        )
    } else {
        (None, None)
    };
    let mut rows = Vec::new();
    plan.coupling.for_each(|i, j, v| {
        if v > 0.0 {
            rows.push(vec![i.to_string(), j.to_string(), fmt17(v)]);
        }
    });
    out.csv("plan.csv", &["source".into(), "target".into(), "mass".into()], &rows)?;
    let pass = marginal_residual <= tol.marginal_tol
        && cm.as_ref().is_none_or(|r| r.pass)
        && br.as_ref().is_none_or(|r| r.pass());
    let report = TransportReport {
        solver,
        cost,
        total_cost: plan.total_cost,
        marginal_residual,
        marginal_tol: tol.marginal_tol,
        cyclical_monotonicity: cm,
        brenier: br,
    };
    Ok(Outcome {
        pass,
        summary: json!({ "total_cost": report.total_cost, "marginal_residual": marginal_residual }),
        report: to_value(&report)?,
    })
}

#[derive(Serialize)]
struct IterateReport {
    starts: usize,
    reached: usize,
    fraction: f64,
    required_fraction: f64,
    orbit_tol: f64,
    max_steps: usize,
    orbits: Vec<OrbitTrace>,
}

fn reached(o: &OrbitTrace, tol: f64) -> bool {
    o.status == OrbitStatus::ConvergedToManifold || (o.status == OrbitStatus::FixedPoint && o.final_gap() < tol)
}

pub fn iterate(cfg: &RunConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let (fz, fzp) = pair_from_config(cfg)?;
    let tol = &cfg.tolerances;
    let starts = match &cfg.starts {
        Some(s) => s.clone(),
        None => orbit_starts(&fz, &fzp, cfg.n_starts.unwrap_or(DEFAULT_ORBIT_STARTS)),
    };
    if starts.is_empty() {
        return Err(CliError::Core(Error::OutsideSupport));
    }
    let (t, ti) = brenier_maps(&fz, &fzp, None)?;
    let orbits = starts
        .iter()
        .map(|x0| iterate_orbit(&t, &ti, &fz, &fzp, x0, tol.max_steps, tol.orbit_tol))
        .collect::<Result<Vec<_>, _>>()?;
    let d = fz.dim();
    let mut rows = Vec::new();
    for (o, trace) in orbits.iter().enumerate() {
        for (n, (x, v)) in trace.iterates.iter().zip(&trace.values).enumerate() {
            let mut r = vec![o.to_string(), n.to_string()];
            r.extend(x.iter().map(|c| fmt17(*c)));
            r.push(fmt17(v.0));
            r.push(fmt17(v.1));
            let dir = trace.directions.get(n).map_or("", |d| match d {
                tri_ident_core::dynamics::Direction::Forward => "forward",
                tri_ident_core::dynamics::Direction::Inverse => "inverse",
            });
            r.push(dir.to_string());
            rows.push(r);
        }
    }
    out.csv("orbits.csv", &coordinate_header(&["orbit_id", "step"], d, &["F_z", "F_zprime", "direction"]), &rows)?;
    let hit = orbits.iter().filter(|o| reached(o, tol.orbit_tol)).count();
    let fraction = hit as f64 / orbits.len() as f64;
    let report = IterateReport {
        starts: orbits.len(),
        reached: hit,
        fraction,
        required_fraction: ORBIT_SUCCESS_FRACTION,
        orbit_tol: tol.orbit_tol,
        max_steps: tol.max_steps,
        orbits,
    };
    Ok(Outcome {
        pass: fraction >= ORBIT_SUCCESS_FRACTION,
        summary: json!({ "starts": report.starts, "reached": hit, "fraction": fraction }),
        report: to_value(&report)?,
    })
}

pub fn verify_identification(cfg: &RunConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let spec = cfg.model.clone().unwrap_or_else(TriangularModelSpec::default_2d);
    let distortion = cfg.distortion.clone().unwrap_or(Distortion::None);
    let seed = cfg.seed.unwrap_or(0);
    let data = simulate_triangular(&spec, cfg.n.unwrap_or(DEFAULT_Q_SAMPLE), seed)?;
    let audit = independence_audit(&data)?;
    let opts = cfg.q_options.unwrap_or_default();
    let batch = cfg.orbit_batch.unwrap_or(DEFAULT_ORBIT_BATCH);
    match verify_q_constancy(&spec, |x, e| distortion.apply(&spec, x, e), &data, batch, &opts) {
        Ok(r) => {
            let mut rows = Vec::new();
            for (o, orbit) in r.orbits.iter().enumerate() {
                for (n, x) in orbit.iterates.iter().enumerate() {
                    let mut row = vec![o.to_string(), n.to_string()];
                    row.extend(x.iter().map(|c| fmt17(*c)));
                    row.push(fmt17(orbit.variation));
                    rows.push(row);
                }
            }
            out.csv("orbits.csv", &coordinate_header(&["orbit_id", "step"], spec.k, &["orbit_variation"]), &rows)?;
            let pass = r.pass() && audit.pass;
            Ok(Outcome {
                pass,
                summary: json!({
                    "diagnosis": r.diagnosis.as_str(),
                    "variation": r.variation,
                    "identity_deviation": r.identity_deviation,
                    "independence_audit": audit.pass,
                }),
                report: json!({ "q_constancy": to_value(&r)?, "independence_audit": to_value(&audit)? }),
            })
        }
        Err(Error::AssumptionFailure(why)) => Ok(Outcome {
            pass: false,
            summary: json!({ "diagnosis": "non_identifiable", "failures": why }),
            report: json!({
                "diagnosis": "non_identifiable",
                "failures": why,
                "independence_audit": to_value(&audit)?,
            }),
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn hedonic(cfg: &RunConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let spec = cfg.hedonic.clone().unwrap_or_else(HedonicModelSpec::default_2d);
    let mut opts = cfg.hedonic_options.unwrap_or_default();
    if let Some(s) = cfg.seed {
        opts.seed = s;
    }
    let grid = match cfg.grid()? {
        Some(g) => g,
        None => Grid::uniform(spec.d, -3.0, 3.0, 25)?,
    };
    let n = cfg.n.unwrap_or(DEFAULT_HEDONIC_N);
    match hedonic_recover_utility(&spec, n, &grid, &opts) {
        Ok(r) => {
            let mut h = vec!["market".to_string()];
            h.extend((1..=spec.k).map(|i| format!("x{i}")));
            h.extend((1..=spec.d).map(|i| format!("y{i}")));
            h.extend((1..=spec.d).map(|i| format!("grad{i}")));
            h.extend((1..=spec.d).map(|i| format!("true_grad{i}")));
            let rows: Vec<Vec<String>> = r
                .samples
                .iter()
                .map(|s| {
                    let mut row = vec![s.market.map_or("pooled".to_string(), fmt17)];
                    row.extend(s.x.iter().chain(&s.y).chain(&s.recovered).chain(&s.truth).map(|v| fmt17(*v)));
                    row
                })
                .collect();
            out.csv("gradient.csv", &h, &rows)?;
            Ok(Outcome {
                pass: r.pass,
                summary: json!({
                    "relative_rms": r.relative_rms,
                    "tolerance": r.tolerance,
                    "bins": r.bins,
                    "scored_bins": r.scored_bins,
                }),
                report: to_value(&r)?,
            })
        }
        Err(Error::AssumptionFailure(why)) => Ok(Outcome {
            pass: false,
            summary: json!({ "diagnosis": "non_identifiable", "failures": why }),
            report: json!({ "diagnosis": "non_identifiable", "failures": why }),
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn reproduce_figure(cfg: &RunConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let res = cfg.resolution.unwrap_or(DEFAULT_FIGURE_RESOLUTION);
    let fig = reproduce_cdf_intersection_figure(res)?;
    let (h, r) = cdf_rows(&fig.fz, &fig.fzp);
    out.csv("cdfs.csv", &h, &r)?;
    let (h, r) = contour_rows(&[("F_z", &fig.contours_z), ("F_zprime", &fig.contours_zprime)], 2);
    out.csv("contours.csv", &h, &r)?;
    let (h, r) = manifold_rows(fig.manifolds(), &fig.fz, &fig.fzp);
    out.csv("manifolds.csv", &h, &r)?;
    if let Some(svg) = contour_svg(&fig.fz, &fig.contours_z, &fig.contours_zprime, fig.manifolds()) {
        out.text("figure.svg", &svg)?;
    }
    let pass = fig.matches_example();
    Ok(Outcome {
        pass,
        summary: json!({
            "resolution": res,
            "components": fig.manifolds().len(),
            "upper_component": fig.upper,
            "lower_component": fig.lower,
            "upper_passes": fig.upper.map(|u| fig.report.verdicts[u].pass),
            "lower_fails_part3": fig.lower.map(|l| !fig.report.verdicts[l].part3),
        }),
        report: to_value(&fig.report)?,
    })
}

pub fn counterexample(cfg: &RunConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let beta = cfg.beta.ok_or_else(|| CliError::Config("`counterexample` needs --beta".into()))?;
    let report = linear_counterexample(beta)?;
    let (fz, fzp) = counterexample_pair(beta)?;
    let (h, r) = manifold_rows(&report.manifolds, &fz, &fzp);
    out.csv("manifolds.csv", &h, &r)?;
    Ok(Outcome {
        pass: report.pass,
        summary: json!({ "beta": beta, "pass": report.pass, "failures": report.failures() }),
        report: to_value(&report)?,
    })
}

/// The two CDFs of the counterexample, rebuilt for the CSV columns.
fn counterexample_pair(beta: f64) -> Result<(GriddedCdf, GriddedCdf), CliError> {
    use tri_ident_core::experiments::COUNTEREXAMPLE_RESOLUTION;
    use tri_ident_core::measure::{build_cdf_from_density, AnalyticDensity, Axis};
    let lo = beta.min(0.0) - 0.25;
    let hi = 1.0 + beta.max(0.0) + 0.25;
    let axis = Axis::new(lo, hi, COUNTEREXAMPLE_RESOLUTION);
    let grid = Grid::new(vec![axis, axis])?;
    let u0 = AnalyticDensity::uniform(vec![0.0, 0.0], vec![1.0, 1.0])?;
    let u1 = AnalyticDensity::uniform(vec![beta, beta], vec![1.0 + beta, 1.0 + beta])?;
    Ok((build_cdf_from_density(&u0, &grid)?, build_cdf_from_density(&u1, &grid)?))
}
