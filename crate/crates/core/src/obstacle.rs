//! Obstacle reduction on a fan window and a reference obstacle solver.
//!
//! On a tame fan the affine-on-leaves extension `u₁(x(r,t)) = b(t) + r m(t)`
//! is subtracted from the solution; the gap `v = u − u₁` solves an obstacle
//! problem `Δv = f·χ{v>0}` with `f = 3 − Δu₁`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ScalarField;
use crate::geometry::{add, cross, dist, dot, scale, sub, Grid, Point};
use crate::numeric::quantile;
use crate::rays::{ChartPoint, RayFan};
use crate::regions::{Region, RegionLabelField};

#[derive(Debug, Error)]
pub enum ObstacleError {
    #[error("node ({}, {}) is outside the fan chart window", .0[0], .0[1])]
    OutsideWindow(Point),
    #[error("fan is degenerate at t = {t}: |ξ̇| = {xi_dot:e}")]
    DegenerateFan { t: f64, xi_dot: f64 },
    #[error("obstacle iteration cap reached after {iterations} sweeps (residual {residual:e})")]
    MaxItersExceeded { iterations: usize, residual: f64 },
    #[error("invalid obstacle instance: {0}")]
    InvalidInstance(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("fan window is empty")]
    EmptyWindow,
    #[error("no window radius avoids the exclusion region and the boundary")]
    WindowCollapsed,
}

/// Cubic Lagrange interpolation through the four samples nearest to `t`.
fn cubic_at(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    let n = ts.len();
    if n == 1 {
        return ys[0];
    }
    let k = match ts.binary_search_by(|a| a.total_cmp(&t)) {
        Ok(k) => return ys[k],
        Err(k) => k.clamp(1, n - 1) - 1,
    };
    let lo = k.saturating_sub(1).min(n.saturating_sub(4));
    let hi = (lo + 4).min(n);
    let mut s = 0.0;
    for a in lo..hi {
        let mut w = 1.0;
        for b in lo..hi {
            if a != b {
                w *= (t - ts[b]) / (ts[a] - ts[b]);
            }
        }
        s += w * ys[a];
    }
    s
}

/// Piecewise-cubic interpolation of a fan's raw leaf data in `t`.
#[derive(Debug, Clone)]
pub struct FanChart {
    t: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    theta: Vec<f64>,
    b: Vec<f64>,
    m: Vec<f64>,
    length: Vec<f64>,
    smooth: Vec<ChartPoint>,
}

impl FanChart {
    pub fn new(fan: &RayFan) -> Self {
        let mut theta: Vec<f64> = Vec::with_capacity(fan.len());
        for s in &fan.samples {
            let d = s.leaf.direction;
            let mut a = d[1].atan2(d[0]);
            if let Some(&p) = theta.last() {
                a = p + (a - p + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
            }
            theta.push(a);
        }
        Self {
            t: fan.t(),
            gx: fan.samples.iter().map(|s| s.leaf.foot[0]).collect(),
            gy: fan.samples.iter().map(|s| s.leaf.foot[1]).collect(),
            theta,
            b: fan.samples.iter().map(|s| s.leaf.b).collect(),
            m: fan.samples.iter().map(|s| s.leaf.m).collect(),
            length: fan.samples.iter().map(|s| s.leaf.length).collect(),
            smooth: fan.chart_points(),
        }
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn gamma(&self, t: f64) -> Point {
        [cubic_at(&self.t, &self.gx, t), cubic_at(&self.t, &self.gy, t)]
    }

    pub fn xi(&self, t: f64) -> Point {
        let a = cubic_at(&self.t, &self.theta, t);
        [a.cos(), a.sin()]
    }

    pub fn affine(&self, t: f64) -> (f64, f64) {
        (cubic_at(&self.t, &self.b, t), cubic_at(&self.t, &self.m, t))
    }

    pub fn length(&self, t: f64) -> f64 {
        cubic_at(&self.t, &self.length, t)
    }

    pub fn point(&self, r: f64, t: f64) -> Point {
        add(self.gamma(t), scale(self.xi(t), r))
    }

    /// Smoothed chart data linearly interpolated to `t`.
    pub fn smoothed(&self, t: f64) -> ChartPoint {
        let n = self.t.len();
        let k = match self.t.binary_search_by(|a| a.total_cmp(&t)) {
            Ok(k) => return self.smooth[k],
            Err(k) => k.clamp(1, n - 1) - 1,
        };
        let (a, b) = (&self.smooth[k], &self.smooth[(k + 1).min(n - 1)]);
        let w = if b.t > a.t { ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0) } else { 0.0 };
        let lerp = |x: f64, y: f64| x + w * (y - x);
        let lerp2 = |x: Point, y: Point| [lerp(x[0], y[0]), lerp(x[1], y[1])];
        ChartPoint {
            t,
            gamma: lerp2(a.gamma, b.gamma),
            gamma_dot: lerp2(a.gamma_dot, b.gamma_dot),
            xi: lerp2(a.xi, b.xi),
            xi_dot: lerp2(a.xi_dot, b.xi_dot),
            b: lerp(a.b, b.b),
            m: lerp(a.m, b.m),
            length: lerp(a.length, b.length),
        }
    }

    /// `(r, t)` with `x = γ(t) + r ξ(t)` and `t` inside the sampled range,
    /// choosing the root with `0 ≤ r ≤ r_max` when several exist.
    pub fn invert(&self, x: Point, r_max: f64) -> Option<(f64, f64)> {
        let f = |t: f64| cross(self.xi(t), sub(x, self.gamma(t)));
        let n = self.t.len();
        let fk: Vec<f64> = (0..n)
            .map(|k| {
                let a = self.theta[k];
                cross([a.cos(), a.sin()], sub(x, [self.gx[k], self.gy[k]]))
            })
            .collect();
        for k in 0..n - 1 {
            if fk[k] == 0.0 || fk[k] * fk[k + 1] < 0.0 || (k + 1 == n - 1 && fk[k + 1] == 0.0) {
                let (mut a, mut b, mut fa) = (self.t[k], self.t[k + 1], fk[k]);
                if fa == 0.0 {
                    b = a;
                } else if fk[k + 1] == 0.0 {
                    a = b;
                }
                for _ in 0..100 {
                    if b - a <= 1e-15 * (1.0 + b.abs()) {
                        break;
                    }
                    let c = 0.5 * (a + b);
                    let fc = f(c);
                    if fa * fc <= 0.0 {
                        b = c;
                    } else {
                        a = c;
                        fa = fc;
                    }
                }
                let t = 0.5 * (a + b);
                let r = dot(sub(x, self.gamma(t)), self.xi(t));
                if r >= -1e-12 && r <= r_max {
                    return Some((r, t));
                }
            }
        }
        None
    }
}

/// Window `U = {x(r,t) : t₀ < t < t₁, r_lo < r < r_hi}` as a narrowed grid
/// with per-node chart coordinates.
#[derive(Debug, Clone)]
pub struct FanWindow {
    pub grid: Arc<Grid>,
    pub chart: FanChart,
    pub r_lo: f64,
    pub r_hi: f64,
    /// Chart coordinates per lattice node (NaN outside the window).
    pub r: Vec<f64>,
    pub t: Vec<f64>,
}

impl FanWindow {
    pub fn build(fan: &RayFan, grid: &Grid, r_lo: f64, r_hi: f64) -> Result<Self, ObstacleError> {
        let chart = FanChart::new(fan);
        let (t0, t1) = chart.t_range();
        let coords: Vec<Option<(f64, f64)>> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                if !grid.inside_idx(k) {
                    return None;
                }
                chart
                    .invert(grid.point_of(k), r_hi)
                    .filter(|&(r, t)| r > r_lo && r < r_hi && t > t0 && t < t1)
            })
            .collect();
        if coords.iter().all(Option::is_none) {
            return Err(ObstacleError::EmptyWindow);
        }
        let sub = grid.restrict(|k| coords[k].is_some());
        Ok(Self {
            grid: Arc::new(sub),
            chart,
            r_lo,
            r_hi,
            r: coords.iter().map(|c| c.map_or(f64::NAN, |c| c.0)).collect(),
            t: coords.iter().map(|c| c.map_or(f64::NAN, |c| c.1)).collect(),
        })
    }

    /// `r ∈ (r₀, R̄_max)` with `R̄_max = R_max + max(4h, 0.1 R_max)`, halving the
    /// excess over `R_max` until the window avoids the exclusion region and
    /// stays at least `h` inside the domain.
    pub fn auto(fan: &RayFan, labels: &RegionLabelField) -> Result<Self, ObstacleError> {
        let grid = &*labels.grid;
        let h = grid.h;
        let mut excess = (4.0 * h).max(0.1 * fan.r_max);
        while excess >= 0.25 * h {
            let w = Self::build(fan, grid, fan.r0, fan.r_max + excess)?;
            let poly = grid.polygon();
            let ok = w.grid.inside_indices().all(|k| {
                let lab = labels.labels[k];
                lab != Region::Exclusion && lab != Region::Boundary && -poly.signed_distance(grid.point_of(k)) >= h
            });
            if ok {
                return Ok(w);
            }
            excess *= 0.5;
        }
        Err(ObstacleError::WindowCollapsed)
    }

    pub fn node_count(&self) -> usize {
        self.grid.inside_count()
    }
}

/// Affine-on-leaves extension `u₁ = b(t) + r m(t)` on the window nodes.
pub fn minimal_convex_extension(window: &FanWindow) -> Result<ScalarField, ObstacleError> {
    let g = &window.grid;
    let mut values = vec![f64::NAN; g.len()];
    for k in g.inside_indices() {
        let (r, t) = (window.r[k], window.t[k]);
        if !r.is_finite() {
            return Err(ObstacleError::OutsideWindow(g.point_of(k)));
        }
        let (b, m) = window.chart.affine(t);
        values[k] = b + r * m;
    }
    Ok(ScalarField::from_values(g.clone(), values))
}

/// `Δu₁` at chart point `(r, t)` from `3 − Δu₁ = (3r − 2R)/(r + ξ×γ̇/|ξ̇|)`
/// using the fan's smoothed derivatives.
pub fn u1_laplacian_formula(chart: &FanChart, r: f64, t: f64) -> Result<f64, ObstacleError> {
    let cp = chart.smoothed(t);
    let c = cp.xi_dot[0].hypot(cp.xi_dot[1]);
    if !(c >= 1e-10) {
        return Err(ObstacleError::DegenerateFan { t, xi_dot: c });
    }
    let a = cross(cp.xi, cp.gamma_dot);
    let big_r = chart.length(t);
    Ok(3.0 - (3.0 * r - 2.0 * big_r) / (r + a / c))
}

/// Five-point Laplacian where all four neighbors are inside the mask.
pub fn laplacian_5pt(v: &ScalarField, k: usize) -> Option<f64> {
    let g = &v.grid;
    let (i, j) = g.ij(k);
    let (ii, jj) = (i as isize, j as isize);
    if !g.inside(i, j) {
        return None;
    }
    let mut s = -4.0 * v.values[k];
    for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
        if !g.inside_at(ii + di, jj + dj) {
            return None;
        }
        s += v.values[g.index((ii + di) as usize, (jj + dj) as usize)];
    }
    Some(s / (g.h * g.h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianComparison {
    pub samples: usize,
    pub median_relative_deviation: f64,
    pub p90_relative_deviation: f64,
}

/// Formula vs. five-point Laplacian of the rasterized `u₁` over the window.
pub fn compare_u1_laplacian(window: &FanWindow, u1: &ScalarField) -> Result<LaplacianComparison, ObstacleError> {
    let mut dev = Vec::new();
    for k in window.grid.inside_indices() {
        if let Some(d) = laplacian_5pt(u1, k) {
            let f = u1_laplacian_formula(&window.chart, window.r[k], window.t[k])?;
            dev.push((f - d).abs() / f.abs().max(1e-300));
        }
    }
    if dev.is_empty() {
        return Err(ObstacleError::EmptyWindow);
    }
    Ok(LaplacianComparison {
        samples: dev.len(),
        median_relative_deviation: quantile(&dev, 0.5).unwrap_or(f64::NAN),
        p90_relative_deviation: quantile(&dev, 0.9).unwrap_or(f64::NAN),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// Minimum of `u − u₁` before clipping.
    pub raw_min_v: f64,
    pub min_v: f64,
    pub max_abs_v_bunching: f64,
    pub bunching_nodes: usize,
    pub min_laplacian_noncontact: f64,
    pub c0_est: f64,
    pub c0_samples: usize,
    pub v_nonnegative: bool,
    pub contact_on_bunching: bool,
    pub positive_laplacian: bool,
    pub reduction_failed: bool,
}

/// Contact set `Λ = {v ≤ tol}`, noncontact set and subcell free-boundary
/// points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPartition {
    pub contact: Vec<usize>,
    pub noncontact: Vec<usize>,
    pub free_boundary: Vec<Point>,
}

#[derive(Debug, Clone)]
pub struct GapSolution {
    pub v: ScalarField,
    pub partition: ContactPartition,
    pub contact_tol: f64,
    pub report: Option<ReductionReport>,
    pub iterations: usize,
    pub residual: f64,
}

/// Partitions by `contact_tol`; free-boundary points sit on lattice edges
/// joining a contact node `a` to a noncontact node `b`, where `√v` (linear
/// across a nondegenerate free boundary) extrapolates to zero from `b` and
/// the next node beyond it, clamped to the segment from `a − h·e` to `b`.
pub fn contact_partition(v: &ScalarField, contact_tol: f64) -> ContactPartition {
    let g = &*v.grid;
    let mut contact = Vec::new();
    let mut noncontact = Vec::new();
    for k in g.inside_indices() {
        if v.values[k] <= contact_tol {
            contact.push(k);
        } else {
            noncontact.push(k);
        }
    }
    let is_free = |i: isize, j: isize| g.inside_at(i, j) && v.values[g.index(i as usize, j as usize)] > contact_tol;
    let sq = |i: isize, j: isize| v.values[g.index(i as usize, j as usize)].max(0.0).sqrt();
    let mut free_boundary = Vec::new();
    for &k in &contact {
        let (i, j) = g.ij(k);
        let (i, j) = (i as isize, j as isize);
        for (di, dj) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
            let (bi, bj) = (i + di, j + dj);
            if !is_free(bi, bj) {
                continue;
            }
            let pa = g.point(i as usize, j as usize);
            let e = [di as f64, dj as f64];
            let sb = sq(bi, bj);
            let s = if is_free(bi + di, bj + dj) {
                // distance from b back to the zero of √v
                let slope = (sq(bi + di, bj + dj) - sb) / g.h;
                if slope > 0.0 { sb / slope } else { f64::INFINITY }
            } else {
                let sa = sq(i, j);
                if sb > sa { g.h * sb / (sb - sa) } else { f64::INFINITY }
            };
            let back = s.clamp(0.0, 2.0 * g.h);
            free_boundary.push(add(pa, scale(e, g.h - back)));
        }
    }
    ContactPartition {
        contact,
        noncontact,
        free_boundary,
    }
}

/// Gap `v = u − u₁` on the window (clipped at −1e−9) with the numerical
/// reduction bullets: `v ≥ 0`, `|v| ≤ 10h²` on bunching nodes, and
/// `c₀_est > 0`, the 5th percentile of `Δv` on the noncontact set eroded by
/// `2h`.
pub fn build_gap(u: &ScalarField, labels: &RegionLabelField, window: &FanWindow) -> Result<GapSolution, ObstacleError> {
    if u.grid.nx != window.grid.nx || u.grid.ny != window.grid.ny || u.grid.h != window.grid.h {
        return Err(ObstacleError::GridMismatch);
    }
    let u1 = minimal_convex_extension(window)?;
    let g = window.grid.clone();
    let h = g.h;
    let contact_tol = h * h;
    let mut raw_min_v = f64::INFINITY;
    let mut values = vec![f64::NAN; g.len()];
    for k in g.inside_indices() {
        let d = u.values[k] - u1.values[k];
        raw_min_v = raw_min_v.min(d);
        values[k] = d.max(-1e-9);
    }
    let v = ScalarField::from_values(g.clone(), values);
    let partition = contact_partition(&v, contact_tol);
    let min_v = v.min_inside();

    let mut max_abs_v_bunching: f64 = 0.0;
    let mut bunching_nodes = 0;
    for k in g.inside_indices() {
        if labels.labels[k] == Region::Bunching {
            bunching_nodes += 1;
            max_abs_v_bunching = max_abs_v_bunching.max((u.values[k] - u1.values[k]).abs());
        }
    }

    // distance to the contact set (lattice search within 2h)
    let reach = 2;
    let far_from_contact = |k: usize| {
        let (i, j) = g.ij(k);
        for dj in -reach..=reach {
            for di in -reach..=reach {
                if ((di * di + dj * dj) as f64) > (reach * reach) as f64 {
                    continue;
                }
                let (a, b) = (i as isize + di, j as isize + dj);
                if !g.inside_at(a, b) || v.values[g.index(a as usize, b as usize)] <= contact_tol {
                    return false;
                }
            }
        }
        true
    };
    let mut lap_all = Vec::new();
    let mut lap_eroded = Vec::new();
    for &k in &partition.noncontact {
        if let Some(l) = laplacian_5pt(&v, k) {
            lap_all.push(l);
            if far_from_contact(k) {
                lap_eroded.push(l);
            }
        }
    }
    let min_laplacian_noncontact = lap_all.iter().copied().fold(f64::INFINITY, f64::min);
    let c0_est = quantile(&lap_eroded, 0.05).unwrap_or(f64::NAN);
    let v_nonnegative = min_v >= -1e-9;
    let contact_on_bunching = max_abs_v_bunching <= 10.0 * h * h;
    let positive_laplacian = c0_est > 0.0;
    let report = ReductionReport {
        raw_min_v,
        min_v,
        max_abs_v_bunching,
        bunching_nodes,
        min_laplacian_noncontact,
        c0_est,
        c0_samples: lap_eroded.len(),
        v_nonnegative,
        contact_on_bunching,
        positive_laplacian,
        reduction_failed: !(v_nonnegative && contact_on_bunching && positive_laplacian),
    };
    Ok(GapSolution {
        v,
        partition,
        contact_tol,
        report: Some(report),
        iterations: 0,
        residual: 0.0,
    })
}

/// `Δv = f·χ{v>0}` on the interior of a masked lattice with Dirichlet data on
/// the mask's edge nodes (inside nodes missing a neighbor).
#[derive(Debug, Clone)]
pub struct ObstacleInstance {
    pub grid: Arc<Grid>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub contact_tol: f64,
    pub omega: f64,
    pub ob_tol: f64,
    pub max_sweeps: usize,
}

impl ObstacleInstance {
    pub fn new(grid: Arc<Grid>, f: impl Fn(Point) -> f64, g: impl Fn(Point) -> f64) -> Self {
        let fv = (0..grid.len())
            .map(|k| if grid.inside_idx(k) { f(grid.point_of(k)) } else { f64::NAN })
            .collect::<Vec<_>>();
        let gv = (0..grid.len())
            .map(|k| if grid.inside_idx(k) { g(grid.point_of(k)) } else { f64::NAN })
            .collect();
        let fmax = fv.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
        let h = grid.h;
        Self {
            grid,
            f: fv,
            g: gv,
            contact_tol: h * h,
            omega: 1.8,
            ob_tol: 1e-8 * fmax,
            max_sweeps: 200_000,
        }
    }

    /// Unit disk (a 256-gon) with `f` constant and the radial closed form
    /// with contact radius `a` as boundary data.
    pub fn radial(a: f64, f: f64, h: f64) -> Result<Self, ObstacleError> {
        let poly = crate::geometry::Polygon::regular(256, [0.0, 0.0], 1.0)
            .map_err(|e| ObstacleError::InvalidInstance(e.to_string()))?;
        let grid = Arc::new(Grid::build(&poly, h).map_err(|e| ObstacleError::InvalidInstance(e.to_string()))?);
        Ok(Self::new(grid, |_| f, |p| f * radial_profile(a, p[0].hypot(p[1]))))
    }

    fn is_interior(&self, k: usize) -> bool {
        let (i, j) = self.grid.ij(k);
        let (i, j) = (i as isize, j as isize);
        self.grid.inside_idx(k)
            && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .all(|(di, dj)| self.grid.inside_at(i + di, j + dj))
    }
}

/// `(ρ² − a²)/4 − (a²/2) ln(ρ/a)` for `ρ ≥ a`, zero inside: the radial
/// solution with `f ≡ 1` and contact disk of radius `a`.
pub fn radial_profile(a: f64, rho: f64) -> f64 {
    if rho <= a {
        0.0
    } else {
        (rho * rho - a * a) / 4.0 - 0.5 * a * a * (rho / a).ln()
    }
}

/// Projected SOR with red–black ordering on the complementarity system
/// `v ≥ 0, Δ_h v ≤ f, v (f − Δ_h v) = 0`.
pub fn solve_obstacle(inst: &ObstacleInstance) -> Result<GapSolution, ObstacleError> {
    let g = &*inst.grid;
    let interior: Vec<usize> = g.inside_indices().filter(|&k| inst.is_interior(k)).collect();
    if interior.is_empty() {
        return Err(ObstacleError::InvalidInstance("no interior nodes".into()));
    }
    if let Some(&k) = interior.iter().find(|&&k| !(inst.f[k] > 0.0)) {
        return Err(ObstacleError::InvalidInstance(format!("f ≤ 0 at node {k}")));
    }
    let ring_neg = g
        .inside_indices()
        .filter(|&k| !inst.is_interior(k))
        .any(|k| !(inst.g[k] >= 0.0));
    if ring_neg {
        return Err(ObstacleError::InvalidInstance("boundary data must be nonnegative".into()));
    }
    let mut v: Vec<f64> = (0..g.len())
        .map(|k| if g.inside_idx(k) { inst.g[k] } else { 0.0 })
        .collect();
    for &k in &interior {
        v[k] = 0.0;
    }
    let nx = g.nx;
    let h2 = g.h * g.h;
    let (red, black): (Vec<usize>, Vec<usize>) = interior.iter().partition(|&&k| {
        let (i, j) = g.ij(k);
        (i + j) % 2 == 0
    });
    let nbr = |v: &[f64], k: usize| v[k - 1] + v[k + 1] + v[k - nx] + v[k + nx];
    let residual = |v: &[f64]| {
        interior
            .par_iter()
            .map(|&k| {
                let lap = (nbr(v, k) - 4.0 * v[k]) / h2;
                v[k].min(inst.f[k] - lap).abs()
            })
            .reduce(|| 0.0, f64::max)
    };
    let omega = inst.omega;
    let mut sweeps = 0;
    let mut res = f64::INFINITY;
    while sweeps < inst.max_sweeps {
        for color in [&red, &black] {
            let upd: Vec<f64> = color
                .par_iter()
                .map(|&k| {
                    let gs = 0.25 * (nbr(&v, k) - h2 * inst.f[k]);
                    (v[k] + omega * (gs - v[k])).max(0.0)
                })
                .collect();
            for (&k, val) in color.iter().zip(upd) {
                v[k] = val;
            }
        }
        sweeps += 1;
        if sweeps % 25 == 0 {
            res = residual(&v);
            if res <= inst.ob_tol {
                break;
            }
        }
    }
    if res > inst.ob_tol {
        res = residual(&v);
        if res > inst.ob_tol {
            return Err(ObstacleError::MaxItersExceeded {
                iterations: sweeps,
                residual: res,
            });
        }
    }
    let field = ScalarField::from_values(inst.grid.clone(), v);
    let partition = contact_partition(&field, inst.contact_tol);
    Ok(GapSolution {
        v: field,
        partition,
        contact_tol: inst.contact_tol,
        report: None,
        iterations: sweeps,
        residual: res,
    })
}

/// One member of a measure-stability family.
#[derive(Debug, Clone)]
pub struct StabilityInput {
    pub id: String,
    pub v: ScalarField,
    pub f: Vec<f64>,
    pub contact_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub id1: String,
    pub id2: String,
    pub sym_diff_area: f64,
    /// `‖f₁ − f₂‖_∞ + √‖v₁ − v₂‖_∞`.
    pub rhs_no_c: f64,
    pub fitted_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
    /// Smallest constant making the bound hold over the whole family.
    pub c_fit: f64,
}

impl StabilityTable {
    pub fn to_table(&self) -> String {
        let mut s = String::from("id1,id2,sym_diff_area,rhs_no_C,fitted_C\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:e},{:e},{:e}\n",
                r.id1, r.id2, r.sym_diff_area, r.rhs_no_c, r.fitted_c
            ));
        }
        s
    }
}

/// `|Λ(v₁) Δ Λ(v₂)|` against `‖f₁ − f₂‖_∞ + √‖v₁ − v₂‖_∞` for each pair.
pub fn measure_stability_experiment(pairs: &[(StabilityInput, StabilityInput)]) -> Result<StabilityTable, ObstacleError> {
    let mut rows = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        if *a.v.grid != *b.v.grid {
            return Err(ObstacleError::GridMismatch);
        }
        let g = &*a.v.grid;
        let mut diff = 0usize;
        let mut df: f64 = 0.0;
        let mut dv: f64 = 0.0;
        for k in g.inside_indices() {
            let ca = a.v.values[k] <= a.contact_tol;
            let cb = b.v.values[k] <= b.contact_tol;
            if ca != cb {
                diff += 1;
            }
            df = df.max((a.f[k] - b.f[k]).abs());
            dv = dv.max((a.v.values[k] - b.v.values[k]).abs());
        }
        let area = diff as f64 * g.h * g.h;
        let rhs = df + dv.sqrt();
        let fitted_c = if area == 0.0 { 0.0 } else { area / rhs };
        rows.push(StabilityRow {
            id1: a.id.clone(),
            id2: b.id.clone(),
            sym_diff_area: area,
            rhs_no_c: rhs,
            fitted_c,
        });
    }
    let c_fit = rows.iter().map(|r| r.fitted_c).fold(0.0, f64::max);
    Ok(StabilityTable { rows, c_fit })
}

/// Largest distance from free-boundary points to the circle `|x| = a`.
pub fn circle_deviation(points: &[Point], a: f64) -> f64 {
    points
        .iter()
        .map(|p| (dist(*p, [0.0, 0.0]) - a).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::rays::{synth_fan, FanGenerator};

    fn radial_error(h: f64) -> (f64, f64, GapSolution) {
        let a = 0.5;
        let inst = ObstacleInstance::radial(a, 1.0, h).unwrap();
        let sol = solve_obstacle(&inst).unwrap();
        let g = &sol.v.grid;
        let err = g
            .inside_indices()
            .map(|k| {
                let p = g.point_of(k);
                (sol.v.values[k] - radial_profile(a, p[0].hypot(p[1]))).abs()
            })
            .fold(0.0, f64::max);
        let fb = circle_deviation(&sol.partition.free_boundary, a);
        (err, fb, sol)
    }

    #[test]
    fn radial_instance_converges() {
        let (e1, _, _) = radial_error(1.0 / 32.0);
        let (e2, fb2, sol) = radial_error(1.0 / 64.0);
        assert!(e2 < 1e-2, "{e2}");
        assert!(fb2 <= 2.0 / 64.0, "{fb2}");
        // the three-level order over 1/32..1/128 is checked in the acceptance suite
        assert!((e1 / e2).log2() >= 1.3, "{e1} {e2}");
        assert!(sol.residual <= 1e-8);
        assert!(!sol.partition.free_boundary.is_empty());
    }

    #[test]
    fn half_plane_quadratic() {
        let h = 1.0 / 32.0;
        let grid = Arc::new(Grid::build(&Polygon::rectangle(-0.5, 0.0, 0.5, 1.0).unwrap(), h).unwrap());
        let exact = |p: Point| 0.5 * p[0].max(0.0).powi(2);
        let inst = ObstacleInstance::new(grid.clone(), |_| 1.0, exact);
        let sol = solve_obstacle(&inst).unwrap();
        let err = grid
            .inside_indices()
            .map(|k| (sol.v.values[k] - exact(grid.point_of(k))).abs())
            .fold(0.0, f64::max);
        assert!(err <= h * h, "{err}");
        for &k in &sol.partition.contact {
            assert!(grid.point_of(k)[0] <= h + 1e-12);
        }
        for p in &sol.partition.free_boundary {
            assert!(p[0].abs() <= h, "{p:?}");
        }
    }

    #[test]
    fn raising_boundary_data_raises_solution() {
        let h = 1.0 / 16.0;
        let lo = solve_obstacle(&ObstacleInstance::radial(0.5, 1.0, h).unwrap()).unwrap();
        let hi = solve_obstacle(&ObstacleInstance::radial(0.4, 1.0, h).unwrap()).unwrap();
        for k in lo.v.grid.inside_indices() {
            assert!(hi.v.values[k] >= lo.v.values[k] - 1e-12);
        }
    }

    #[test]
    fn invalid_instances_are_rejected() {
        let grid = Arc::new(Grid::build(&Polygon::square(1.0), 0.125).unwrap());
        let inst = ObstacleInstance::new(grid.clone(), |_| 0.0, |_| 0.0);
        assert!(matches!(solve_obstacle(&inst), Err(ObstacleError::InvalidInstance(_))));
        let inst = ObstacleInstance::new(grid, |_| 1.0, |_| -1.0);
        assert!(matches!(solve_obstacle(&inst), Err(ObstacleError::InvalidInstance(_))));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut inst = ObstacleInstance::radial(0.5, 1.0, 1.0 / 16.0).unwrap();
        inst.max_sweeps = 3;
        assert!(matches!(solve_obstacle(&inst), Err(ObstacleError::MaxItersExceeded { .. })));
    }

    #[test]
    fn partition_of_model_fields() {
        let h = 1.0 / 32.0;
        let grid = Arc::new(Grid::build(&Polygon::rectangle(-0.5, -0.5, 0.5, 0.5).unwrap(), h).unwrap());
        let v = ScalarField::from_fn(grid.clone(), |p| 0.5 * p[0].max(0.0).powi(2));
        let part = contact_partition(&v, h * h);
        assert!(!part.free_boundary.is_empty());
        assert!(part.free_boundary.iter().all(|p| p[0].abs() <= h));
        let zero = ScalarField::zeros(grid.clone());
        let part = contact_partition(&zero, h * h);
        assert_eq!(part.contact.len(), grid.inside_count());
        assert!(part.free_boundary.is_empty() && part.noncontact.is_empty());
    }

    #[test]
    fn measure_stability_on_radial_family() {
        let h = 1.0 / 64.0;
        let input = |id: &str, a: f64, f: f64| {
            let inst = ObstacleInstance::radial(a, 1.0, h).unwrap();
            let inst = ObstacleInstance { f: inst.f.iter().map(|x| x * f).collect(), ..inst };
            let sol = solve_obstacle(&inst).unwrap();
            StabilityInput {
                id: id.into(),
                v: sol.v,
                f: inst.f,
                contact_tol: h * h,
            }
        };
        let base = input("a0.5", 0.5, 1.0);
        let same = measure_stability_experiment(&[(base.clone(), base.clone())]).unwrap();
        assert_eq!(same.rows[0].sym_diff_area, 0.0);

        let other = input("a0.4", 0.4, 1.0);
        let tab = measure_stability_experiment(&[(base.clone(), other)]).unwrap();
        let expect = std::f64::consts::PI * (0.25 - 0.16);
        assert!((tab.rows[0].sym_diff_area / expect - 1.0).abs() <= 0.1, "{}", tab.rows[0].sym_diff_area);

        let family: Vec<_> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|d| (base.clone(), input(&format!("f{d}"), 0.5, 1.0 + d)))
            .collect();
        let tab = measure_stability_experiment(&family).unwrap();
        for w in tab.rows.windows(2) {
            assert!(w[1].sym_diff_area <= w[0].sym_diff_area, "{:?}", tab.rows);
        }
        assert!(tab.rows[0].sym_diff_area > 0.0);
        assert_eq!(tab.to_table().lines().count(), 5);
    }

    fn synthetic_window(samples: usize) -> (FanWindow, ScalarField, FanGenerator) {
        let h = 1.0 / 64.0;
        let half = 0.5f64;
        let mut v = vec![[0.4 * half.cos(), -0.4 * half.sin()]];
        for s in 0..64 {
            let a = -half + 2.0 * half * s as f64 / 63.0;
            v.push([a.cos(), a.sin()]);
        }
        v.push([0.4 * half.cos(), 0.4 * half.sin()]);
        let poly = Polygon::with_threshold(v, 0.05).unwrap();
        let grid = Arc::new(Grid::build(&poly, h).unwrap());
        let gen = FanGenerator::radial(1.0, 0.3, 2.0, half, 0.0, samples);
        let (u, fan) = synth_fan(grid.clone(), &gen).unwrap();
        let window = FanWindow::build(&fan, &grid, 0.1, 0.5).unwrap();
        (window, u, gen)
    }

    #[test]
    fn extension_reproduces_generator() {
        let (window, u, _) = synthetic_window(201);
        let u1 = minimal_convex_extension(&window).unwrap();
        assert!(window.node_count() > 100);
        for k in window.grid.inside_indices() {
            assert!((u1.values[k] - u.values[k]).abs() <= 1e-8, "{}", (u1.values[k] - u.values[k]).abs());
        }
    }

    #[test]
    fn parallel_extension_is_distance() {
        let grid = Arc::new(Grid::build(&Polygon::rectangle(0.0, 0.0, 1.0, 0.5).unwrap(), 1.0 / 32.0).unwrap());
        let gen = FanGenerator::parallel((0.0, 1.0), 0.2, 0.0, 1.0, 0.5, 21);
        let (_, fan) = synth_fan(grid.clone(), &gen).unwrap();
        let window = FanWindow::build(&fan, &grid, 0.0, 0.45).unwrap();
        let u1 = minimal_convex_extension(&window).unwrap();
        for k in window.grid.inside_indices() {
            assert!((u1.values[k] - grid.point_of(k)[1]).abs() < 1e-12);
        }
        let chart = FanChart::new(&fan);
        assert!(matches!(u1_laplacian_formula(&chart, 0.1, -0.5), Err(ObstacleError::DegenerateFan { .. })));
    }

    #[test]
    fn formula_zero_and_sign() {
        let (window, _, _) = synthetic_window(41);
        let chart = &window.chart;
        let t = 0.05;
        let r = chart.length(t);
        assert!((u1_laplacian_formula(chart, 2.0 * r / 3.0, t).unwrap() - 3.0).abs() <= 1e-12);
        let gap = 3.0 - u1_laplacian_formula(chart, r, t).unwrap();
        assert!(gap > 0.0 && gap < 1.0, "{gap}");
    }

    #[test]
    fn identical_inputs_give_zero_gap() {
        let (window, u, _) = synthetic_window(41);
        let u1 = minimal_convex_extension(&window).unwrap();
        let mut vals = u.values.clone();
        for k in window.grid.inside_indices() {
            vals[k] = u1.values[k];
        }
        let same = ScalarField::from_values(u.grid.clone(), vals);
        let labels = crate::regions::segment_regions(&same, &crate::regions::hessian_field(&same), 1e-6, 1.0 / 64.0);
        let gap = build_gap(&same, &labels, &window).unwrap();
        assert!(gap.v.inside_values().all(|x| x == 0.0));
        assert!(gap.partition.noncontact.is_empty() && gap.partition.free_boundary.is_empty());
        let rep = gap.report.unwrap();
        assert_eq!(rep.raw_min_v, 0.0);
        assert!(rep.reduction_failed, "no noncontact set, so no c₀");
    }
}
