//! Browser bindings: solve the square monopolist problem, solve the radial
//! obstacle problem and classify model blow-ups. Results are JSON strings.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use screenfb::field::ScalarField;
use screenfb::freeboundary::{
    classify_point, density_profile, fit_blowup, unit_ball_grid, BlowupMode, ClassifyThresholds, PointClass,
};
use screenfb::geometry::{Grid, Polygon};
use screenfb::obstacle::{circle_deviation, radial_profile, solve_obstacle, ObstacleInstance};
use screenfb::regions::{default_tolerances, hessian_field, region_diagnostics, segment_regions, Region};
use screenfb::solver::{solve_monopolist, ConvexityCone, SolverConfig};

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

fn nodal(f: &ScalarField) -> Vec<Option<f64>> {
    (0..f.grid.len())
        .map(|k| f.grid.inside_idx(k).then_some(f.values[k]))
        .collect()
}

#[derive(Serialize)]
struct SquareSolution {
    nx: usize,
    ny: usize,
    u: Vec<Option<f64>>,
    /// 0 exclusion, 1 bunching, 2 customization, 3 boundary node, 4 outside.
    labels: Vec<u8>,
    objective: f64,
    iterations: usize,
    areas: [f64; 3],
    min_boundary_distortion: Option<f64>,
}

/// Maximizes profit on `(1, 2)²` with `n` cells per side and an 8- or
/// 16-direction convexity cone, then labels the three regions.
#[wasm_bindgen]
pub fn solve_square(n: u32, directions: u32) -> Result<String, JsError> {
    if !(4..=64).contains(&n) {
        return Err(JsError::new("n must be between 4 and 64"));
    }
    let cone = match directions {
        8 => ConvexityCone::eight(),
        16 => ConvexityCone::sixteen(),
        _ => return Err(JsError::new("directions must be 8 or 16")),
    };
    let h = 1.0 / n as f64;
    let poly = Polygon::square(1.0);
    let (u, rep) = solve_monopolist(&poly, h, &cone, &SolverConfig::default()).map_err(|e| JsError::new(&e.to_string()))?;
    let (u_tol, lambda_tol) = default_tolerances(h);
    let labels = segment_regions(&u, &hessian_field(&u), u_tol, lambda_tol);
    let chart = u.grid.boundary_chart().map_err(|e| JsError::new(&e.to_string()))?;
    let diag = region_diagnostics(&u, &labels, &chart);
    to_json(&SquareSolution {
        nx: u.grid.nx,
        ny: u.grid.ny,
        u: nodal(&u),
        labels: labels.labels.iter().map(|r| r.code()).collect(),
        objective: rep.objective_trace.last().copied().unwrap_or(0.0),
        iterations: rep.iterations,
        areas: [
            labels.area(Region::Exclusion),
            labels.area(Region::Bunching),
            labels.area(Region::Customization),
        ],
        min_boundary_distortion: diag.min_boundary_distortion,
    })
}

#[derive(Serialize)]
struct RadialSolution {
    nx: usize,
    ny: usize,
    v: Vec<Option<f64>>,
    max_error: f64,
    contact_radius_error: f64,
    sweeps: usize,
}

/// Solves `Δv = χ{v>0}` on the unit disk with the closed-form radial data
/// for contact radius `a` and `n` cells per unit length.
#[wasm_bindgen]
pub fn radial_obstacle(a: f64, n: u32) -> Result<String, JsError> {
    if !(a > 0.05 && a < 0.9) {
        return Err(JsError::new("contact radius must lie in (0.05, 0.9)"));
    }
    if !(8..=128).contains(&n) {
        return Err(JsError::new("n must be between 8 and 128"));
    }
    let inst = ObstacleInstance::radial(a, 1.0, 1.0 / n as f64).map_err(|e| JsError::new(&e.to_string()))?;
    let sol = solve_obstacle(&inst).map_err(|e| JsError::new(&e.to_string()))?;
    let g = &sol.v.grid;
    let max_error = g
        .inside_indices()
        .map(|k| {
            let p = g.point_of(k);
            (sol.v.values[k] - radial_profile(a, p[0].hypot(p[1]))).abs()
        })
        .fold(0.0, f64::max);
    to_json(&RadialSolution {
        nx: g.nx,
        ny: g.ny,
        v: nodal(&sol.v),
        max_error,
        contact_radius_error: circle_deviation(&sol.partition.free_boundary, a),
        sweeps: sol.iterations,
    })
}

#[derive(Serialize)]
struct Classification {
    density_radii: Vec<f64>,
    density: Vec<f64>,
    class: &'static str,
    mode: &'static str,
    tau: [f64; 2],
    q: [[f64; 2]; 2],
    residual: f64,
}

/// Classifies the origin for a model gap: `kind` 0 is the half-plane
/// `½(x·τ)₊²`, 1 the degenerate `½(x·τ)²`, 2 the quadratic `½ xᵀQx` with
/// `Q = R(θ) diag(s, 1 − s) R(θ)ᵀ`; `angle` in degrees.
#[wasm_bindgen]
pub fn classify_model(kind: u32, angle: f64, split: f64) -> Result<String, JsError> {
    let th = angle * PI / 180.0;
    let tau = [th.cos(), th.sin()];
    let s = split.clamp(0.0, 1.0);
    let model = move |p: [f64; 2]| -> f64 {
        let x = p[0] * tau[0] + p[1] * tau[1];
        let y = -p[0] * tau[1] + p[1] * tau[0];
        match kind {
            0 => 0.5 * x.max(0.0).powi(2),
            1 => 0.5 * x * x,
            _ => 0.5 * (s * x * x + (1.0 - s) * y * y),
        }
    };
    let h = 1.0 / 64.0;
    let grid = Grid::build(&Polygon::rectangle(-1.0, -1.0, 1.0, 1.0).map_err(|e| JsError::new(&e.to_string()))?, h)
        .map_err(|e| JsError::new(&e.to_string()))?;
    let contact: Vec<bool> = (0..grid.len()).map(|k| model(grid.point_of(k)) <= 0.0).collect();
    let radii: Vec<f64> = (0..=6).map(|k| 32.0 * h * 0.5f64.powf(0.5 * k as f64)).collect();
    let prof = density_profile(&grid, &contact, [0.0, 0.0], &radii).map_err(|e| JsError::new(&e.to_string()))?;
    let class = match classify_point(&prof, &ClassifyThresholds::for_spacing(h)) {
        PointClass::Regular => "regular",
        PointClass::Singular => "singular",
        PointClass::Undetermined => "undetermined",
    };
    let vr = ScalarField::from_fn(Arc::new(unit_ball_grid()), model);
    let fit = fit_blowup(&vr, 1.0).map_err(|e| JsError::new(&e.to_string()))?;
    to_json(&Classification {
        density_radii: prof.radii,
        density: prof.ratios,
        class,
        mode: match fit.mode {
            BlowupMode::Regular => "regular",
            BlowupMode::Singular => "singular",
        },
        tau: fit.tau,
        q: fit.q,
        residual: fit.residual,
    })
}
