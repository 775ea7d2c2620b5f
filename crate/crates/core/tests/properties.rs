//! Property tests for the geometry, profit, solver, region and obstacle
//! contracts.

use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use screenfb::field::ScalarField;
use screenfb::geometry::{Grid, Polygon};
use screenfb::obstacle::{laplacian_5pt, solve_obstacle, ObstacleInstance};
use screenfb::regions::{hessian_field, segment_regions, Region};
use screenfb::solver::{discrete_profit, profit_gradient, solve_on_grid, ConvexityCone, SolverConfig};

/// Convex polygon with vertices on an ellipse at sorted random angles.
fn convex_polygon() -> impl Strategy<Value = (Vec<[f64; 2]>, f64)> {
    (
        prop::collection::vec(0.0..1.0f64, 3..12),
        0.5..2.0f64,
        0.5..2.0f64,
        -1.0..1.0f64,
        -1.0..1.0f64,
        1e-3..0.2f64,
    )
        .prop_filter_map("vertices too close", |(raw, a, b, cx, cy, thr)| {
            let n = raw.len();
            // jittered angles keep consecutive vertices apart
            let mut ang: Vec<f64> = raw
                .iter()
                .enumerate()
                .map(|(k, r)| 2.0 * PI * (k as f64 + 0.8 * r) / n as f64)
                .collect();
            ang.sort_by(f64::total_cmp);
            let v: Vec<[f64; 2]> = ang.iter().map(|t| [cx + a * t.cos(), cy + b * t.sin()]).collect();
            let ok = (0..n).all(|k| {
                let p = v[k];
                let q = v[(k + 1) % n];
                (p[0] - q[0]).hypot(p[1] - q[1]) > 1e-2
            });
            ok.then_some((v, thr))
        })
}

fn exterior_angle(v: &[[f64; 2]], k: usize) -> f64 {
    let n = v.len();
    let (p, c, q) = (v[(k + n - 1) % n], v[k], v[(k + 1) % n]);
    let a1 = (c[1] - p[1]).atan2(c[0] - p[0]);
    let a2 = (q[1] - c[1]).atan2(q[0] - c[0]);
    (a2 - a1).rem_euclid(2.0 * PI)
}

fn random_square_field(nodes: usize, vals: &[f64]) -> ScalarField {
    let g = Arc::new(Grid::square_nodes(1.0, nodes).unwrap());
    let mut it = vals.iter().cycle();
    ScalarField::from_fn(g, |_| *it.next().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mask_rows_and_columns_are_contiguous((v, thr) in convex_polygon(), h in 0.02..0.2f64) {
        let poly = Polygon::with_threshold(v, thr).unwrap();
        let g = Grid::build(&poly, h).unwrap();
        for j in 0..g.ny {
            let runs = (0..g.nx).filter(|&i| g.inside(i, j) && (i == 0 || !g.inside(i - 1, j))).count();
            prop_assert!(runs <= 1, "row {j} has {runs} runs");
        }
        for i in 0..g.nx {
            let runs = (0..g.ny).filter(|&j| g.inside(i, j) && (j == 0 || !g.inside(i, j - 1))).count();
            prop_assert!(runs <= 1, "column {i} has {runs} runs");
        }
    }

    #[test]
    fn chart_length_and_corners((v, thr) in convex_polygon(), h in 0.02..0.2f64) {
        let perimeter: f64 = (0..v.len())
            .map(|k| {
                let (p, q) = (v[k], v[(k + 1) % v.len()]);
                (q[0] - p[0]).hypot(q[1] - p[1])
            })
            .sum();
        let corners = (0..v.len()).filter(|&k| exterior_angle(&v, k) > thr).count();
        let poly = Polygon::with_threshold(v, thr).unwrap();
        let g = Grid::build(&poly, h).unwrap();
        let chart = g.boundary_chart().unwrap();
        prop_assert!((chart.total_length / perimeter - 1.0).abs() <= 1e-10);
        prop_assert_eq!(chart.corner_count(), corners);
    }

    #[test]
    fn profit_gradient_matches_central_differences(
        nodes in 3usize..12,
        vals in prop::collection::vec(-1.0..1.0f64, 16),
        dir in prop::collection::vec(-1.0..1.0f64, 13),
    ) {
        let u = random_square_field(nodes, &vals);
        let mut it = dir.iter().cycle();
        let phi = ScalarField::from_fn(u.grid.clone(), |_| *it.next().unwrap());
        let grad = profit_gradient(&u);
        let exact: f64 = u.grid.inside_indices().map(|k| grad.values[k] * phi.values[k]).sum();
        let eps = 1e-5;
        let shifted = |s: f64| {
            let mut w = u.clone();
            for k in w.grid.inside_indices() {
                w.values[k] += s * phi.values[k];
            }
            discrete_profit(&w)
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let scale = exact.abs().max(1e-3);
        prop_assert!((fd - exact).abs() <= 1e-6 * scale, "fd {fd} vs {exact}");
    }

    #[test]
    fn profit_is_concave(
        nodes in 3usize..12,
        a in prop::collection::vec(-2.0..2.0f64, 17),
        b in prop::collection::vec(-2.0..2.0f64, 19),
    ) {
        let u1 = random_square_field(nodes, &a);
        let u2 = random_square_field(nodes, &b);
        let mid = ScalarField::from_fn(u1.grid.clone(), |_| 0.0);
        let mid = ScalarField::from_values(
            mid.grid.clone(),
            (0..mid.grid.len()).map(|k| 0.5 * (u1.values[k] + u2.values[k])).collect(),
        );
        let lhs = discrete_profit(&mid);
        let rhs = 0.5 * (discrete_profit(&u1) + discrete_profit(&u2));
        prop_assert!(lhs >= rhs - 1e-12, "{lhs} < {rhs}");
    }

    #[test]
    fn region_labels_partition_and_exclusion_grows_with_tolerance(
        c in 0.2..1.5f64,
        shift in 1.0..1.8f64,
        t1 in 1e-4..1e-2f64,
        t2 in 1e-4..1e-2f64,
    ) {
        let g = Arc::new(Grid::square_nodes(1.0, 33).unwrap());
        let u = ScalarField::from_fn(g.clone(), |p| c * ((p[0] + p[1] - 2.0 * shift).max(0.0)).powi(2));
        let hess = hessian_field(&u);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = segment_regions(&u, &hess, lo, 1.0 / 32.0);
        let b = segment_regions(&u, &hess, hi, 1.0 / 32.0);
        for k in 0..g.len() {
            prop_assert_eq!(a.labels[k] == Region::Outside, !g.inside_idx(k));
            if a.labels[k] == Region::Exclusion {
                prop_assert_eq!(b.labels[k], Region::Exclusion);
            }
        }
        prop_assert!(a.count(Region::Exclusion) <= b.count(Region::Exclusion));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solver_output_is_feasible_and_ascending(nodes in 3usize..10, sixteen in any::<bool>(), seed in any::<u64>()) {
        let grid = Arc::new(Grid::square_nodes(1.0, nodes).unwrap());
        let cone = if sixteen { ConvexityCone::sixteen() } else { ConvexityCone::eight() };
        let cfg = SolverConfig { seed: Some(seed), ..SolverConfig::default() };
        let (u, rep) = solve_on_grid(grid, &cone, &cfg).unwrap();
        prop_assert!(u.min_inside() >= -1e-10);
        prop_assert!(cone.min_row(&u) >= -cfg.feas_tol);
        prop_assert!(rep.objective_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn obstacle_complementarity(
        f0 in 0.5..2.0f64,
        fx in -0.4..0.4f64,
        gx in -1.0..1.0f64,
        gy in -1.0..1.0f64,
        gc in 0.0..0.5f64,
    ) {
        let g = Arc::new(Grid::build(&Polygon::rectangle(-1.0, -1.0, 1.0, 1.0).unwrap(), 1.0 / 16.0).unwrap());
        let inst = ObstacleInstance::new(
            g.clone(),
            |p| f0 + fx * p[0],
            |p| (gc + 0.5 * (gx * p[0] + gy * p[1])).max(0.0).powi(2),
        );
        let sol = solve_obstacle(&inst).unwrap();
        for k in g.inside_indices() {
            prop_assert!(sol.v.values[k] >= 0.0);
            if let Some(lap) = laplacian_5pt(&sol.v, k) {
                let r = sol.v.values[k].min(inst.f[k] - lap);
                prop_assert!(r.abs() <= inst.ob_tol + 1e-10, "node {k}: {r:e}");
            }
        }
    }
}
