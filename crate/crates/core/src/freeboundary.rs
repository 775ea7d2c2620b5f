//! Free-boundary analysis: density profiles, blow-up fits, Reifenberg
//! flatness and bookkeeping of singular candidates.
//!
//! A free-boundary point is regular when the contact set has density ½ in
//! shrinking balls and singular when the density tends to 0; blow-ups are
//! `(f/2)(x·τ)₊²` and `(f/2) xᵀQx` with `Q ⪰ 0`, `tr Q = 1` respectively.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ScalarField;
use crate::geometry::{add, cross, dist, dot, scale, sub, Grid, Point};
use crate::numeric::{golden_min, median, pairwise_sum, sym_eigen2};
use crate::obstacle::{u1_laplacian_formula, FanWindow, GapSolution};
use crate::rays::RayFan;

#[derive(Debug, Error)]
pub enum FreeBoundaryError {
    #[error("ball of radius {radius} about ({}, {}) leaves the window", .center[0], .center[1])]
    BallExitsWindow { center: Point, radius: f64 },
    #[error("radius {r} is below the minimum {min}")]
    RadiusTooSmall { r: f64, min: f64 },
    #[error("radii must be positive and strictly decreasing")]
    InvalidRadii,
    #[error("no blow-up model fits (regular residual {regular:.3}, singular residual {singular:.3})")]
    NoModelFits { regular: f64, singular: f64 },
    #[error("blow-up fit is not singular")]
    NotSingular,
    #[error("only {got} free-boundary points within {radius} of ({}, {})", .center[0], .center[1])]
    InsufficientPoints { center: Point, radius: f64, got: usize },
}

/// Contact-set density `ρ_k = |Λ ∩ B_{r_k}| / |B_{r_k}|` for decreasing radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub center: Point,
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
}

/// Geometric radii `32h, 16√2 h, …, 4h`.
pub fn default_radii(h: f64) -> Vec<f64> {
    (0..=6).map(|k| 32.0 * h * 0.5f64.powf(0.5 * k as f64)).collect()
}

/// Each node owns its dual cell `[x − h/2, x + h/2]²`; cells cut by the
/// sphere are resolved by 4×4 subcell sampling. Every node whose cell meets
/// the ball must lie inside the grid mask.
pub fn density_profile(
    grid: &Grid,
    contact: &[bool],
    x0: Point,
    radii: &[f64],
) -> Result<DensityProfile, FreeBoundaryError> {
    let h = grid.h;
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FreeBoundaryError::InvalidRadii);
    }
    let smallest = radii[radii.len() - 1];
    if smallest < 4.0 * h * (1.0 - 1e-12) {
        return Err(FreeBoundaryError::RadiusTooSmall { r: smallest, min: 4.0 * h });
    }
    let mut ratios = Vec::with_capacity(radii.len());
    for &r in radii {
        let fi = (x0[0] - grid.origin[0]) / h;
        let fj = (x0[1] - grid.origin[1]) / h;
        let reach = r / h + 1.0;
        let (i0, i1) = ((fi - reach).floor() as isize, (fi + reach).ceil() as isize);
        let (j0, j1) = ((fj - reach).floor() as isize, (fj + reach).ceil() as isize);
        let mut hit = Vec::new();
        let mut total = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                let p = [grid.origin[0] + i as f64 * h, grid.origin[1] + j as f64 * h];
                let w = cell_fraction(p, h, x0, r);
                if w == 0.0 {
                    continue;
                }
                if !grid.inside_at(i, j) {
                    return Err(FreeBoundaryError::BallExitsWindow { center: x0, radius: r });
                }
                total.push(w);
                if contact[grid.index(i as usize, j as usize)] {
                    hit.push(w);
                }
            }
        }
        let t = pairwise_sum(&total);
        ratios.push(if t > 0.0 { (pairwise_sum(&hit) / t).clamp(0.0, 1.0) } else { 0.0 });
    }
    Ok(DensityProfile {
        center: x0,
        radii: radii.to_vec(),
        ratios,
    })
}

/// Fraction of the square cell centered at `p` inside `B_r(c)`.
fn cell_fraction(p: Point, h: f64, c: Point, r: f64) -> f64 {
    let dx = (p[0] - c[0]).abs();
    let dy = (p[1] - c[1]).abs();
    let far = (dx + 0.5 * h).hypot(dy + 0.5 * h);
    if far <= r {
        return 1.0;
    }
    let near = (dx - 0.5 * h).max(0.0).hypot((dy - 0.5 * h).max(0.0));
    if near >= r {
        return 0.0;
    }
    let mut n = 0;
    for a in 0..4 {
        for b in 0..4 {
            let q = [
                p[0] - 0.5 * h + (a as f64 + 0.5) * h / 4.0,
                p[1] - 0.5 * h + (b as f64 + 0.5) * h / 4.0,
            ];
            if dist(q, c) <= r {
                n += 1;
            }
        }
    }
    n as f64 / 16.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    Regular,
    Singular,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyThresholds {
    pub reg_band: f64,
    pub sing_band: f64,
    /// Radii below this are unreliable and ignored.
    pub min_reliable_radius: f64,
    /// Monotonicity slack `slack·h/r` absorbing the one-cell width of a
    /// lattice contact set.
    pub monotone_slack: f64,
    pub h: f64,
}

impl ClassifyThresholds {
    pub fn for_spacing(h: f64) -> Self {
        Self {
            reg_band: 0.15,
            sing_band: 0.15,
            min_reliable_radius: 8.0 * h,
            monotone_slack: 1.0,
            h,
        }
    }
}

/// Regular when both smallest reliable ratios are within `reg_band` of ½;
/// singular when both are at most `sing_band` and the ratios do not grow
/// (beyond lattice slack) over the three smallest reliable radii.
pub fn classify_point(profile: &DensityProfile, th: &ClassifyThresholds) -> PointClass {
    let reliable: Vec<(f64, f64)> = profile
        .radii
        .iter()
        .zip(&profile.ratios)
        .filter(|(r, _)| **r >= th.min_reliable_radius * (1.0 - 1e-12))
        .map(|(r, p)| (*r, *p))
        .collect();
    if profile.radii.len() < 4 || reliable.len() < 3 {
        return PointClass::Undetermined;
    }
    let n = reliable.len();
    let last_two = &reliable[n - 2..];
    if last_two.iter().all(|(_, p)| (p - 0.5).abs() <= th.reg_band) {
        return PointClass::Regular;
    }
    let small = last_two.iter().all(|(_, p)| *p <= th.sing_band);
    let tail = &reliable[n - 3..];
    let monotone = tail
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + th.monotone_slack * th.h / w[1].0);
    if small && monotone {
        PointClass::Singular
    } else {
        PointClass::Undetermined
    }
}

/// Points per side of the canonical blow-up grid on `[−1, 1]²`.
pub const BLOWUP_NODES: usize = 65;

/// `v_r(y) = v(x₀ + r y)/r²` on the unit ball of the canonical grid.
pub fn rescale_blowup(v: &ScalarField, x0: Point, r: f64) -> Result<ScalarField, FreeBoundaryError> {
    let g = &v.grid;
    if r < 8.0 * g.h * (1.0 - 1e-12) {
        return Err(FreeBoundaryError::RadiusTooSmall { r, min: 8.0 * g.h });
    }
    let ball = unit_ball_grid();
    let mut values = vec![f64::NAN; ball.len()];
    for k in ball.inside_indices() {
        let x = add(x0, scale(ball.point_of(k), r));
        let loc = g.locate_unchecked(x);
        let inside = loc
            .weights
            .iter()
            .zip(loc.nodes(g))
            .all(|(w, n)| *w == 0.0 || g.inside_idx(n));
        let fx = (x[0] - g.origin[0]) / g.h;
        let fy = (x[1] - g.origin[1]) / g.h;
        let in_box = fx >= 0.0 && fy >= 0.0 && fx <= (g.nx - 1) as f64 && fy <= (g.ny - 1) as f64;
        if !inside || !in_box {
            return Err(FreeBoundaryError::BallExitsWindow { center: x0, radius: r });
        }
        values[k] = v.interpolate(x) / (r * r);
    }
    Ok(ScalarField::from_values(Arc::new(ball), values))
}

/// The `BLOWUP_NODES²` lattice on `[−1, 1]²` masked to the closed unit ball,
/// on which blow-ups are sampled and fitted.
pub fn unit_ball_grid() -> Grid {
    let n = BLOWUP_NODES;
    let h = 2.0 / (n - 1) as f64;
    let inside = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let p = [-1.0 + i as f64 * h, -1.0 + j as f64 * h];
            p[0].hypot(p[1]) <= 1.0 + 1e-12
        })
        .collect();
    Grid::from_mask([-1.0, -1.0], h, n, n, inside).expect("canonical ball grid is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlowupMode {
    Regular,
    Singular,
}

/// Best blow-up model; `q = R(θ) diag(s, 1 − s) R(θ)ᵀ` with `s ∈ [0, 1]`, so
/// symmetry, positive semi-definiteness and unit trace hold by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub mode: BlowupMode,
    pub tau: Point,
    pub q: [[f64; 2]; 2],
    pub scale: f64,
    pub residual: f64,
    pub regular_residual: f64,
    pub singular_residual: f64,
}

fn q_matrix(theta: f64, s: f64) -> [[f64; 2]; 2] {
    let (sn, cs) = theta.sin_cos();
    let a = s * cs * cs + (1.0 - s) * sn * sn;
    let c = s * sn * sn + (1.0 - s) * cs * cs;
    let b = (2.0 * s - 1.0) * sn * cs;
    [[a, b], [b, c]]
}

/// Sweeps `steps` angles over `[0, period)` and refines the best by golden
/// section over one step on either side.
fn angle_search(steps: usize, period: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let d = period / steps as f64;
    let (mut best, mut fbest) = (0.0, f64::INFINITY);
    for k in 0..steps {
        let a = k as f64 * d;
        let fa = f(a);
        if fa < fbest {
            best = a;
            fbest = fa;
        }
    }
    let (a, fa) = golden_min(best - d, best + d, 1e-12, &f);
    if fa < fbest {
        (a.rem_euclid(period), fa)
    } else {
        (best, fbest)
    }
}

/// Least-squares fits of both model families to a unit-ball field; the
/// residual is the relative L² misfit over the ball nodes.
pub fn fit_blowup(vr: &ScalarField, f_at_x0: f64) -> Result<BlowupFit, FreeBoundaryError> {
    let pts: Vec<(Point, f64)> = vr
        .grid
        .inside_indices()
        .map(|k| (vr.grid.point_of(k), vr.values[k]))
        .collect();
    let norm2 = pairwise_sum(&pts.iter().map(|(_, y)| y * y).collect::<Vec<_>>());
    let half_f = 0.5 * f_at_x0;
    if !(norm2 > 0.0) || !(half_f > 0.0) {
        return Err(FreeBoundaryError::NoModelFits {
            regular: f64::INFINITY,
            singular: f64::INFINITY,
        });
    }
    let misfit = |model: &dyn Fn(Point) -> f64| -> f64 {
        let r: Vec<f64> = pts.iter().map(|(p, y)| (y - model(*p)).powi(2)).collect();
        (pairwise_sum(&r) / norm2).sqrt()
    };

    let regular = |phi: f64| {
        let tau = [phi.cos(), phi.sin()];
        misfit(&|p| half_f * dot(p, tau).max(0.0).powi(2))
    };
    let (phi, reg_res) = angle_search(720, 2.0 * PI, regular);

    // for fixed θ the model is affine in s: closed-form clamped least squares
    let best_s = |theta: f64| -> f64 {
        let e1 = [theta.cos(), theta.sin()];
        let e2 = [-e1[1], e1[0]];
        let (mut num, mut den) = (Vec::with_capacity(pts.len()), Vec::with_capacity(pts.len()));
        for (p, y) in &pts {
            let a = half_f * dot(*p, e1).powi(2);
            let b = half_f * dot(*p, e2).powi(2);
            num.push((y - b) * (a - b));
            den.push((a - b) * (a - b));
        }
        let d = pairwise_sum(&den);
        if d > 0.0 { (pairwise_sum(&num) / d).clamp(0.0, 1.0) } else { 0.5 }
    };
    let singular = |theta: f64| {
        let q = q_matrix(theta, best_s(theta));
        misfit(&|p| half_f * (q[0][0] * p[0] * p[0] + 2.0 * q[0][1] * p[0] * p[1] + q[1][1] * p[1] * p[1]))
    };
    let (theta, sing_res) = angle_search(360, PI, singular);
    let q = q_matrix(theta, best_s(theta));

    if reg_res > 0.5 && sing_res > 0.5 {
        return Err(FreeBoundaryError::NoModelFits {
            regular: reg_res,
            singular: sing_res,
        });
    }
    let mode = if reg_res <= sing_res { BlowupMode::Regular } else { BlowupMode::Singular };
    Ok(BlowupFit {
        mode,
        tau: [phi.cos(), phi.sin()],
        q,
        scale: f_at_x0,
        residual: reg_res.min(sing_res),
        regular_residual: reg_res,
        singular_residual: sing_res,
    })
}

/// Angle in `[0, π/2]` between the null eigenvector of `Q` and the ray
/// direction `ξ`.
pub fn singular_axis_check(fit: &BlowupFit, xi: Point) -> Result<f64, FreeBoundaryError> {
    if fit.mode != BlowupMode::Singular {
        return Err(FreeBoundaryError::NotSingular);
    }
    let (_, _, q_min, _) = sym_eigen2(fit.q[0][0], fit.q[0][1], fit.q[1][1]);
    let c = dot(q_min, xi).abs().min(1.0);
    Ok(c.acos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessProfile {
    pub radii: Vec<f64>,
    pub theta: Vec<f64>,
}

/// `sup_s min_p |x + s e − p|` over `s ∈ [−r, r]` for points given as
/// `(s_p, d_p²)` along and across `e`, via the lower envelope of the
/// parabolas `(s − s_p)² + d_p²`.
fn segment_to_points(mut pts: Vec<(f64, f64)>, r: f64) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|b, a| a.0 == b.0);
    let n = pts.len();
    let key = |q: usize| pts[q].1 + pts[q].0 * pts[q].0;
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut k = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = (key(q) - key(p)) / (2.0 * (pts[q].0 - pts[p].0));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let eval = |seg: usize, s: f64| {
        let p = pts[v[seg]];
        (s - p.0).powi(2) + p.1
    };
    let seg_of = |s: f64| (0..=k).rev().find(|&a| z[a] <= s).unwrap_or(0);
    let mut best = eval(seg_of(-r), -r).max(eval(seg_of(r), r));
    for a in 1..=k {
        if z[a] > -r && z[a] < r {
            best = best.max(eval(a, z[a]));
        }
    }
    best.sqrt()
}

/// Symmetric Hausdorff distance between points (relative to the center) and
/// the diametral segment of direction `phi`; the segment-to-points term is
/// padded by half the sample spacing.
fn hausdorff_to_diameter(rel: &[Point], r: f64, phi: f64, pad: f64) -> f64 {
    let e = [phi.cos(), phi.sin()];
    let mut across: f64 = 0.0;
    let mut proj = Vec::with_capacity(rel.len());
    for q in rel {
        let d = cross(e, *q);
        across = across.max(d.abs());
        proj.push((dot(*q, e), d * d));
    }
    let along = (segment_to_points(proj, r) - pad).max(0.0);
    across.max(along)
}

fn sample_spacing(pts: &[Point]) -> f64 {
    let nn: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(a, p)| {
            pts.iter()
                .enumerate()
                .filter(|(b, _)| *b != a)
                .map(|(_, q)| dist(*p, *q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    median(&nn).unwrap_or(0.0)
}

/// `ϑ(r) = r⁻¹ sup_{x∈K} min_lines d_H(F ∩ B_r(x), diameter of B_r(x))`.
pub fn flatness_modulus(points: &[Point], centers: &[Point], radii: &[f64]) -> Result<FlatnessProfile, FreeBoundaryError> {
    let mut theta = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut worst: f64 = 0.0;
        for &c in centers {
            let rel: Vec<Point> = points
                .iter()
                .map(|p| sub(*p, c))
                .filter(|q| q[0].hypot(q[1]) <= r)
                .collect();
            if rel.len() < 10 {
                return Err(FreeBoundaryError::InsufficientPoints {
                    center: c,
                    radius: r,
                    got: rel.len(),
                });
            }
            let pad = 0.5 * sample_spacing(&rel);
            let (_, d) = angle_search(360, PI, |phi| hausdorff_to_diameter(&rel, r, phi, pad));
            worst = worst.max(d / r);
        }
        theta.push(worst);
    }
    Ok(FlatnessProfile {
        radii: radii.to_vec(),
        theta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundaryRecord {
    pub point: Point,
    pub class: PointClass,
    pub density: Option<DensityProfile>,
    pub blowup: Option<BlowupFit>,
    pub flatness: Option<FlatnessProfile>,
    /// Chart coordinates and ray direction at the point.
    pub r: Option<f64>,
    pub t: Option<f64>,
    pub xi: Option<Point>,
    pub f_at_point: Option<f64>,
    pub thresholds: ClassifyThresholds,
    /// Why optional parts are missing.
    pub notes: Vec<String>,
}

/// Free-boundary points merged so that no two are closer than `min_gap`,
/// in their original order.
pub fn thin_points(points: &[Point], min_gap: f64) -> Vec<Point> {
    let mut kept: Vec<Point> = Vec::new();
    for p in points {
        if kept.iter().all(|q| dist(*p, *q) >= min_gap) {
            kept.push(*p);
        }
    }
    kept
}

/// One record per thinned free-boundary point of a gap on a fan window:
/// density, class and blow-up at radius `8h` with `f = 3 − Δu₁`.
pub fn analyze_free_boundary(gap: &GapSolution, window: &FanWindow) -> Vec<FreeBoundaryRecord> {
    let g = &*gap.v.grid;
    let h = g.h;
    let th = ClassifyThresholds::for_spacing(h);
    let contact: Vec<bool> = (0..g.len())
        .map(|k| g.inside_idx(k) && gap.v.values[k] <= gap.contact_tol)
        .collect();
    let fb = &gap.partition.free_boundary;
    let centers = thin_points(fb, 0.5 * h);
    centers
        .par_iter()
        .map(|&x0| {
            let mut notes = Vec::new();
            let all_radii = default_radii(h);
            // largest usable prefix of decreasing radii that keeps the ball inside
            let mut density = None;
            for start in 0..all_radii.len() {
                match density_profile(g, &contact, x0, &all_radii[start..]) {
                    Ok(p) => {
                        density = Some(p);
                        break;
                    }
                    Err(FreeBoundaryError::BallExitsWindow { .. }) => continue,
                    Err(e) => {
                        notes.push(e.to_string());
                        break;
                    }
                }
            }
            let class = match &density {
                Some(p) => classify_point(p, &th),
                None => {
                    notes.push("no ball of radius ≥ 4h fits in the window".into());
                    PointClass::Undetermined
                }
            };
            let chart = window.chart.invert(x0, window.r_hi + 2.0 * h);
            let (r, t) = match chart {
                Some((r, t)) => (Some(r), Some(t)),
                None => {
                    notes.push("point is outside the fan chart".into());
                    (None, None)
                }
            };
            let f_at_point = match (r, t) {
                (Some(r), Some(t)) => match u1_laplacian_formula(&window.chart, r, t) {
                    Ok(l) => Some(3.0 - l),
                    Err(e) => {
                        notes.push(e.to_string());
                        None
                    }
                },
                _ => None,
            };
            let blowup = match f_at_point {
                Some(f) if f > 0.0 => match rescale_blowup(&gap.v, x0, 8.0 * h).and_then(|vr| fit_blowup(&vr, f)) {
                    Ok(b) => Some(b),
                    Err(e) => {
                        notes.push(format!("blow-up: {e}"));
                        None
                    }
                },
                Some(f) => {
                    notes.push(format!("f(x₀) = {f:.3e} is not positive"));
                    None
                }
                None => None,
            };
            FreeBoundaryRecord {
                point: x0,
                class,
                density,
                blowup,
                flatness: None,
                r,
                t,
                xi: t.map(|t| window.chart.xi(t)),
                f_at_point,
                thresholds: th,
                notes,
            }
        })
        .collect()
}

/// Flatness profile of every record, centered at its own point, against the
/// full free-boundary point list.
pub fn attach_flatness(records: &mut [FreeBoundaryRecord], points: &[Point], radii: &[f64]) {
    records.par_iter_mut().for_each(|rec| match flatness_modulus(points, &[rec.point], radii) {
        Ok(p) => rec.flatness = Some(p),
        Err(e) => rec.notes.push(format!("flatness: {e}")),
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularCandidate {
    pub point: Point,
    pub t: Option<f64>,
    /// Whether `R` has a discrete local maximum within two samples of `t`.
    pub at_local_max_of_length: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IsolationReport {
    pub candidates: Vec<SingularCandidate>,
    /// `(a, b, distance)` for every candidate pair.
    pub pairwise: Vec<(usize, usize, f64)>,
    pub min_separation: Option<f64>,
}

/// Lists singular records with their pairwise distances and checks each
/// against the fan's traced leaf lengths.
pub fn singular_isolation_report(records: &[FreeBoundaryRecord], fan: Option<&RayFan>) -> IsolationReport {
    let lengths: Vec<f64> = fan.map(|f| f.samples.iter().map(|s| s.leaf.length).collect()).unwrap_or_default();
    let ts: Vec<f64> = fan.map(|f| f.t()).unwrap_or_default();
    let local_max = |t: f64| -> bool {
        if ts.len() < 3 {
            return false;
        }
        let k = ts
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let lo = k.saturating_sub(2).max(1);
        let hi = (k + 2).min(ts.len() - 2);
        (lo..=hi).any(|j| lengths[j] >= lengths[j - 1] && lengths[j] >= lengths[j + 1])
    };
    let candidates: Vec<SingularCandidate> = records
        .iter()
        .filter(|r| r.class == PointClass::Singular)
        .map(|r| SingularCandidate {
            point: r.point,
            t: r.t,
            at_local_max_of_length: r.t.is_some_and(local_max),
        })
        .collect();
    let mut pairwise = Vec::new();
    for a in 0..candidates.len() {
        for b in a + 1..candidates.len() {
            pairwise.push((a, b, dist(candidates[a].point, candidates[b].point)));
        }
    }
    let min_separation = pairwise.iter().map(|p| p.2).reduce(f64::min);
    IsolationReport {
        candidates,
        pairwise,
        min_separation,
    }
}
