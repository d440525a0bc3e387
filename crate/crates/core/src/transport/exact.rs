use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::cost::CostFunction;
use super::plan::{Coupling, TransportPlan};
use crate::measure::DiscreteMeasure;
use crate::{Error, Result};

/// Largest combined support size accepted by [`solve_exact`].
pub const EXACT_SIZE_CAP: usize = 2000;

/// Largest `n` accepted by [`brute_force_oracle`].
pub const ORACLE_SIZE_CAP: usize = 8;

/// Optimal coupling by the transportation simplex method on the bipartite
/// source/target network.
pub fn solve_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostFunction) -> Result<TransportPlan> {
    let (n, m) = (mu.len(), nu.len());
    if n + m > EXACT_SIZE_CAP {
        return Err(Error::SizeCapExceeded { size: n + m, cap: EXACT_SIZE_CAP });
    }
    let c = cost.matrix(mu, nu)?;
    let flows = transportation_simplex(mu.weights(), nu.weights(), &c)?;
    let total_cost = flows.iter().map(|&(i, j, v)| v * c[i * m + j]).sum();
    Ok(TransportPlan {
        source: mu.clone(),
        target: nu.clone(),
        coupling: Coupling::Sparse { rows: n, cols: m, entries: flows },
        total_cost,
        epsilon: None,
        potentials: None,
    })
}

/// Exact optimal cost of an equal-weight problem by enumerating all `n!`
/// assignments.
pub fn brute_force_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostFunction) -> Result<f64> {
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: nu.len() });
    }
    if n > ORACLE_SIZE_CAP {
        return Err(Error::SizeCapExceeded { size: n, cap: ORACLE_SIZE_CAP });
    }
    if !mu.is_equal_weight() || !nu.is_equal_weight() {
        return Err(crate::error::invalid("brute-force oracle needs equal weights"));
    }
    let c = cost.matrix(mu, nu)?;
    // Heap's algorithm.
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum::<f64>();
    let mut best = eval(&perm);
    let mut counters = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            best = best.min(eval(&perm));
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(best / n as f64)
}

/// Exact 1-D coupling for costs convex in `x − y`: the north-west corner
/// rule on sorted supports (the quantile coupling). No size cap.
pub fn solve_monotone_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostFunction) -> Result<TransportPlan> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::UnsupportedDimension(mu.dim().max(nu.dim())));
    }
    if cost.is_concave_power() || matches!(cost, CostFunction::Custom { .. }) {
        return Err(crate::error::invalid("the monotone coupling is optimal only for convex costs"));
    }
    let sort = |m: &DiscreteMeasure| {
        let mut o: Vec<usize> = (0..m.len()).collect();
        o.sort_by(|&a, &b| m.point(a)[0].total_cmp(&m.point(b)[0]));
        o
    };
    let (oi, oj) = (sort(mu), sort(nu));
    let (a, b) = (mu.weights(), nu.weights());
    let mut entries = Vec::with_capacity(mu.len() + nu.len());
    let (mut p, mut q) = (0, 0);
    let (mut ra, mut rb) = (a[oi[0]], b[oj[0]]);
    let mut total = 0.0;
    loop {
        let last_p = p + 1 == oi.len();
        let last_q = q + 1 == oj.len();
        // At the end of either side the rest goes to its last point, so
        // rounding cannot leave a row or column empty.
        let t = if last_q {
            ra
        } else if last_p {
            rb
        } else {
            ra.min(rb)
        };
        let (i, j) = (oi[p], oj[q]);
        if t > 0.0 {
            entries.push((i, j, t));
            total += t * cost.eval(mu.point(i), nu.point(j)).unwrap_or(0.0);
        }
        ra -= t;
        rb -= t;
        if last_p && last_q {
            break;
        }
        if (ra <= rb && !last_p) || last_q {
            p += 1;
            ra += a[oi[p]];
        } else {
            q += 1;
            rb += b[oj[q]];
        }
    }
    Ok(TransportPlan {
        source: mu.clone(),
        target: nu.clone(),
        coupling: Coupling::Sparse { rows: mu.len(), cols: nu.len(), entries },
        total_cost: total,
        epsilon: None,
        potentials: None,
    })
}

/// Basic arc of the spanning tree.
#[derive(Debug, Clone, Copy)]
struct Arc {
    i: usize,
    j: usize,
    flow: f64,
}

/// Transportation simplex with block pricing. Returns the positive entries
/// of an optimal basic solution.
fn transportation_simplex(a: &[f64], b: &[f64], c: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let (n, m) = (a.len(), b.len());
    let nodes = n + m;
    let scale = c.iter().fold(1.0f64, |s, v| s.max(libm::fabs(*v)));
    let tol = 1e-11 * scale;

    // North-west corner start: exactly n + m − 1 basic arcs.
    let mut arcs: Vec<Arc> = Vec::with_capacity(nodes - 1);
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0], b[0]);
    while arcs.len() < nodes - 1 {
        let t = ra.min(rb).max(0.0);
        arcs.push(Arc { i, j, flow: t });
        ra -= t;
        rb -= t;
        if arcs.len() == nodes - 1 {
            break;
        }
        if i + 1 == n {
            j += 1;
            rb += b[j];
        } else if j + 1 == m || ra < rb {
            i += 1;
            ra += a[i];
        } else {
            j += 1;
            rb += b[j];
        }
    }

    // Tree adjacency: node id < n is source i, otherwise sink (id − n).
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, arc) in arcs.iter().enumerate() {
        adj[arc.i].push(k);
        adj[n + arc.j].push(k);
    }
    let other = |arc: &Arc, node: usize| if node < n { n + arc.j } else { arc.i };

    let mut pot = vec![0.0; nodes];
    let mut parent_arc = vec![usize::MAX; nodes];
    let mut order: Vec<usize> = Vec::with_capacity(nodes);
    let mut queue = VecDeque::new();
    let compute_potentials = |arcs: &[Arc],
                              adj: &[Vec<usize>],
                              pot: &mut [f64],
                              parent_arc: &mut [usize],
                              order: &mut Vec<usize>,
                              queue: &mut VecDeque<usize>| {
        parent_arc.iter_mut().for_each(|p| *p = usize::MAX);
        order.clear();
        pot[0] = 0.0;
        queue.push_back(0);
        let mut seen = vec![false; nodes];
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &k in &adj[u] {
                let arc = &arcs[k];
                let w = other(arc, u);
                if !seen[w] {
                    seen[w] = true;
                    parent_arc[w] = k;
                    let cij = c[arc.i * m + arc.j];
                    // u_i + v_j = c_ij on basic arcs.
                    pot[w] = cij - pot[u];
                    queue.push_back(w);
                }
            }
        }
    };
    compute_potentials(&arcs, &adj, &mut pot, &mut parent_arc, &mut order, &mut queue);

    let total = n * m;
    let block = (libm::sqrt(total as f64) as usize).max(64).min(total);
    let mut cursor = 0usize;
    let mut bland = false;
    let mut stall = 0usize;
    let max_pivots = 50 * total + 10_000;
    let mut depth = vec![0usize; nodes];

    for _pivot in 0..max_pivots {
        // Pricing.
        let mut enter = usize::MAX;
        let mut best = -tol;
        if bland {
            for k in 0..total {
                let (p, q) = (k / m, k % m);
                if c[k] - pot[p] - pot[n + q] < -tol {
                    enter = k;
                    break;
                }
            }
        } else {
            let mut scanned = 0;
            while scanned < total {
                let end = (scanned + block).min(total);
                for _ in scanned..end {
                    let k = cursor;
                    cursor += 1;
                    if cursor == total {
                        cursor = 0;
                    }
                    let (p, q) = (k / m, k % m);
                    let r = c[k] - pot[p] - pot[n + q];
                    if r < best {
                        best = r;
                        enter = k;
                    }
                }
                scanned = end;
                if enter != usize::MAX {
                    break;
                }
            }
        }
        if enter == usize::MAX {
            let out = arcs.iter().filter(|a| a.flow > 0.0).map(|a| (a.i, a.j, a.flow)).collect();
            return Ok(out);
        }
        let (p, q) = (enter / m, enter % m);

        // Depths from the BFS order for the tree-path walk.
        for &u in &order {
            depth[u] = if parent_arc[u] == usize::MAX { 0 } else { depth[other(&arcs[parent_arc[u]], u)] + 1 };
        }
        // Cycle: the tree path from sink q to source p plus the entering arc.
        // Arcs on the sink side alternate −,+,… starting at q; on the source
        // side +,−,… ending at p.
        let mut left: Vec<usize> = Vec::new(); // arcs walked up from q
        let mut right: Vec<usize> = Vec::new(); // arcs walked up from p
        let (mut x, mut y) = (n + q, p);
        while x != y {
            if depth[x] >= depth[y] {
                let k = parent_arc[x];
                left.push(k);
                x = other(&arcs[k], x);
            } else {
                let k = parent_arc[y];
                right.push(k);
                y = other(&arcs[k], y);
            }
        }
        // Path q → apex → p; position along it fixes the sign.
        let mut path: Vec<usize> = left;
        path.extend(right.iter().rev());
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let f = arcs[k].flow;
                if f < theta || (bland && f == theta && k < leave) {
                    theta = f;
                    leave = k;
                }
            }
        }
        let theta = theta.max(0.0);
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                arcs[k].flow -= theta;
            } else {
                arcs[k].flow += theta;
            }
        }
        if theta <= 0.0 {
            stall += 1;
            if stall > 20 * nodes {
                bland = true;
            }
        } else {
            stall = 0;
        }

        // Replace the leaving arc by the entering one.
        let old = arcs[leave];
        adj[old.i].retain(|&k| k != leave);
        adj[n + old.j].retain(|&k| k != leave);
        arcs[leave] = Arc { i: p, j: q, flow: theta };
        adj[p].push(leave);
        adj[n + q].push(leave);
        for arc in arcs.iter_mut() {
            if arc.flow < 0.0 {
                arc.flow = 0.0;
            }
        }
        compute_potentials(&arcs, &adj, &mut pot, &mut parent_arc, &mut order, &mut queue);
    }
    Err(Error::NotConverged { iterations: max_pivots, residual: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasi::rng;
    use rand::Rng;

    fn three() -> (DiscreteMeasure, DiscreteMeasure) {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        (mu, nu)
    }

    #[test]
    fn three_point_instance() {
        let (mu, nu) = three();
        let plan = solve_exact(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap();
        assert!((plan.total_cost - 4.0 / 3.0).abs() < 1e-12);
        let d = plan.coupling.to_dense();
        let third = 1.0 / 3.0;
        assert!((d[2] - third).abs() < 1e-12); // (0,0) → (1,1)
        assert!((d[3] - third).abs() < 1e-12); // (1,0) → (2,0)
        assert!((d[7] - third).abs() < 1e-12); // (0,1) → (0,2)
        assert!(plan.marginal_residual() < 1e-10);
        let oracle = brute_force_oracle(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap();
        assert!((oracle - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let (mu, _) = three();
        let plan = solve_exact(&mu, &mu, &CostFunction::SquaredEuclidean).unwrap();
        assert!(plan.total_cost.abs() < 1e-15);
        let d = plan.coupling.to_dense();
        for i in 0..3 {
            assert!((d[i * 3 + i] - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(brute_force_oracle(&mu, &mu, &CostFunction::SquaredEuclidean).unwrap(), 0.0);
    }

    #[test]
    fn single_points() {
        let mu = DiscreteMeasure::uniform(vec![vec![1.0, 2.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![4.0, -2.0]]).unwrap();
        let plan = solve_exact(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap();
        assert!((plan.total_cost - 25.0).abs() < 1e-12);
    }

    #[test]
    fn concave_two_point_prefers_crossing() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![10.0], vec![11.0]]).unwrap();
        let cost = CostFunction::ConcavePower { p: 0.5 };
        let straight = 2.0 * libm::sqrt(10.0);
        let crossed = libm::sqrt(11.0) + 3.0;
        let expect = straight.min(crossed) / 2.0;
        assert!((brute_force_oracle(&mu, &nu, &cost).unwrap() - expect).abs() < 1e-12);
        assert!((solve_exact(&mu, &nu, &cost).unwrap().total_cost - expect).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_bad_input() {
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]).unwrap();
        assert!(brute_force_oracle(&mu, &mu, &CostFunction::SquaredEuclidean).is_err());
        let pts: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let big = DiscreteMeasure::uniform(pts).unwrap();
        assert!(matches!(
            brute_force_oracle(&big, &big, &CostFunction::SquaredEuclidean),
            Err(Error::SizeCapExceeded { .. })
        ));
    }

    #[test]
    fn unequal_weights_marginals() {
        let mut r = rng(3, 0);
        for n in [5usize, 17, 40] {
            let pts = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
                (0..n).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect()
            };
            let wa: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 0.1).collect();
            let wb: Vec<f64> = (0..n + 3).map(|_| r.random::<f64>() + 0.1).collect();
            let mu = DiscreteMeasure::normalized(pts(&mut r), wa).unwrap();
            let mut pb = pts(&mut r);
            pb.extend((0..3).map(|_| vec![r.random::<f64>(), r.random::<f64>()]));
            let nu = DiscreteMeasure::normalized(pb, wb).unwrap();
            let plan = solve_exact(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap();
            assert!(plan.marginal_residual() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn monotone_1d_matches_simplex() {
        let mut r = rng(5, 1);
        let pa: Vec<Vec<f64>> = (0..30).map(|_| vec![r.random::<f64>() * 4.0]).collect();
        let pb: Vec<Vec<f64>> = (0..23).map(|_| vec![r.random::<f64>() * 4.0 - 1.0]).collect();
        let wa: Vec<f64> = (0..30).map(|_| r.random::<f64>() + 0.2).collect();
        let wb: Vec<f64> = (0..23).map(|_| r.random::<f64>() + 0.2).collect();
        let mu = DiscreteMeasure::normalized(pa, wa).unwrap();
        let nu = DiscreteMeasure::normalized(pb, wb).unwrap();
        let a = solve_monotone_1d(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap();
        let b = solve_exact(&mu, &nu, &CostFunction::SquaredEuclidean).unwrap();
        assert!((a.total_cost - b.total_cost).abs() < 1e-10);
        assert!(a.marginal_residual() < 1e-12);
    }
}
