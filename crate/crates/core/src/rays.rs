//! Leaves of the bunching region, tame fans in `(r, t)` coordinates and the
//! identities they satisfy.
//!
//! A fan is parameterized by `t`, the arc length along the boundary measured
//! clockwise, so that inward leaves satisfy `ξ × γ̇ > 0`. Points of the fan are
//! `x(r, t) = γ(t) + r ξ(t)` and the utility on a leaf is `b(t) + r m(t)`.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ScalarField;
use crate::geometry::{add, cross, dist, dot, norm, normalize, scale, sub, BoundaryChart, Grid, Point};
use crate::numeric::{median, quantile};
use crate::regions::{Hessian, HessianField, Region, RegionLabelField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TameFailure {
    Corner,
    NonPositiveDistortion,
    NotAdjacentToBunching,
    EndpointOnBoundary,
    Degenerate,
    ShortLeaf,
    NotAffine,
    Orientation,
    Crossing,
}

#[derive(Debug, Error)]
pub enum RayError {
    #[error("start point ({}, {}) is not in the bunching region", .0[0], .0[1])]
    NotInBunching(Point),
    #[error("both Hessian eigenvalues fall below the threshold along the leaf")]
    DirectionAmbiguous { leaf: Box<Leaf> },
    #[error("sample {sample} is not tame: {reason:?}")]
    NotTame { sample: usize, reason: TameFailure },
    #[error("fan needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("chart folds: parameters ({r1:.4}, {t1:.4}) and ({r2:.4}, {t2:.4}) map to nearby points")]
    ChartFold { r1: f64, t1: f64, r2: f64, t2: f64 },
    #[error("no tame arc found")]
    NoTameArc,
}

/// Marching and acceptance parameters; lengths are in domain units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanConfig {
    pub lambda_tol: f64,
    /// Marching step along the null direction.
    pub step: f64,
    /// Bisection resolution for the leaf tip.
    pub refine: f64,
    /// Allowed affine deviation per unit leaf length.
    pub affine_tol: f64,
    /// Samples in the local regression window for `t`-derivatives (odd).
    pub smoothing_window: usize,
    /// Minimum foot distortion for automatic arc selection.
    pub min_distortion: f64,
    /// Minimum leaf length for automatic arc selection.
    pub min_length: f64,
}

impl FanConfig {
    pub fn for_spacing(h: f64) -> Self {
        Self {
            lambda_tol: h,
            step: 0.5 * h,
            refine: 0.125 * h,
            affine_tol: 10.0 * h,
            smoothing_window: 5,
            min_distortion: 1e-2,
            min_length: 8.0 * h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub foot: Point,
    pub direction: Point,
    pub length: f64,
    pub b: f64,
    pub m: f64,
    pub endpoint_on_boundary: bool,
    pub foot_is_corner: bool,
    /// Both eigenvalues fell below `λ_tol` somewhere on the march.
    pub degenerate: bool,
    /// Largest `|u − (b + r m)|` over the fitted points.
    pub affine_deviation: f64,
}

impl Leaf {
    pub fn tip(&self) -> Point {
        add(self.foot, scale(self.direction, self.length))
    }
}

/// Where a leaf trace begins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeafStart {
    /// A boundary foot with its outward normal.
    Foot { point: Point, normal: Point, is_corner: bool },
    /// An inside node of the bunching region.
    Node { i: usize, j: usize },
}

fn hessian_at(hess: &HessianField, p: Point) -> Option<Hessian> {
    hess.interpolate(p)
}

struct March {
    points: Vec<Point>,
    end: Point,
    hit_boundary: bool,
    degenerate: bool,
}

/// Follows the null eigenvector from `p` with initial orientation `dir`
/// until `λ_min ≥ λ_tol` or the domain is left.
fn march(hess: &HessianField, p: Point, dir: Point, cfg: &FanConfig) -> March {
    let poly = hess.grid.polygon();
    let (lo, hi) = poly.bounding_box();
    let max_steps = (((hi[0] - lo[0]) + (hi[1] - lo[1])) / cfg.step).ceil() as usize * 2 + 8;
    let mut points = vec![p];
    let mut cur = p;
    let mut d = dir;
    let mut degenerate = false;
    for _ in 0..max_steps {
        if let Some(hs) = hessian_at(hess, cur) {
            if hs.lambda_max < cfg.lambda_tol {
                degenerate = true;
            } else {
                let mut q = hs.q_min;
                if dot(q, d) < 0.0 {
                    q = scale(q, -1.0);
                }
                d = q;
            }
        }
        let next = add(cur, scale(d, cfg.step));
        if !poly.contains(next) {
            let s = poly.exit_distance(cur, d);
            let end = add(cur, scale(d, s.min(cfg.step)));
            points.push(end);
            return March {
                points,
                end,
                hit_boundary: true,
                degenerate,
            };
        }
        cur = next;
        points.push(cur);
        if hessian_at(hess, cur).is_some_and(|hs| hs.lambda_min >= cfg.lambda_tol) {
            return March {
                points,
                end: cur,
                hit_boundary: false,
                degenerate,
            };
        }
    }
    March {
        end: cur,
        points,
        hit_boundary: false,
        degenerate,
    }
}

/// Unit principal direction of `pts − origin`, oriented along `hint`.
fn principal_direction(origin: Point, pts: &[Point], hint: Point) -> Point {
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let d = sub(*p, origin);
        sxx += d[0] * d[0];
        syy += d[1] * d[1];
        sxy += d[0] * d[1];
    }
    if sxx + syy == 0.0 {
        return normalize(hint);
    }
    let (_, _, _, q) = crate::numeric::sym_eigen2(sxx, sxy, syy);
    if dot(q, hint) < 0.0 {
        scale(q, -1.0)
    } else {
        q
    }
}

fn lambda_min_at(hess: &HessianField, p: Point) -> f64 {
    hessian_at(hess, p).map_or(f64::NEG_INFINITY, |h| h.lambda_min)
}

/// Builds the straight leaf from `foot` along the marched points.
fn finish_leaf(
    u: &ScalarField,
    hess: &HessianField,
    foot: Point,
    m: &March,
    hint: Point,
    foot_is_corner: bool,
    cfg: &FanConfig,
) -> Leaf {
    let poly = u.grid.polygon();
    let xi = principal_direction(foot, &m.points, hint);
    let exit = poly.exit_distance(foot, xi);
    let mut length = dot(sub(m.end, foot), xi).clamp(0.0, exit);
    let mut on_boundary = m.hit_boundary;
    if !m.hit_boundary {
        // bisection of the first crossing near the march tip
        let f = |r: f64| lambda_min_at(hess, add(foot, scale(xi, r))) - cfg.lambda_tol;
        let mut a = (length - 2.0 * cfg.step).max(0.0);
        let mut b = (length + cfg.step).min(exit);
        if f(a) < 0.0 && f(b) >= 0.0 {
            while b - a > cfg.refine {
                let c = 0.5 * (a + b);
                if f(c) >= 0.0 {
                    b = c;
                } else {
                    a = c;
                }
            }
            length = 0.5 * (a + b);
        }
        let tip = add(foot, scale(xi, length));
        on_boundary = -poly.signed_distance(tip) <= u.grid.h;
    } else {
        length = exit;
    }
    // least-squares fit of u along the leaf
    let n = ((length / cfg.step).floor() as usize).max(1);
    let (mut s1, mut sr, mut srr, mut su, mut sru) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let r = length * k as f64 / n as f64;
        let val = u.interpolate(add(foot, scale(xi, r)));
        if val.is_finite() {
            samples.push((r, val));
            s1 += 1.0;
            sr += r;
            srr += r * r;
            su += val;
            sru += r * val;
        }
    }
    let det = s1 * srr - sr * sr;
    let (b, slope) = if det.abs() > 1e-300 {
        ((srr * su - sr * sru) / det, (s1 * sru - sr * su) / det)
    } else {
        (su / s1.max(1.0), 0.0)
    };
    let affine_deviation = samples
        .iter()
        .map(|(r, v)| (v - b - slope * r).abs())
        .fold(0.0, f64::max);
    Leaf {
        foot,
        direction: xi,
        length,
        b,
        m: slope,
        endpoint_on_boundary: on_boundary,
        foot_is_corner,
        degenerate: m.degenerate,
        affine_deviation,
    }
}

/// Traces the leaf through `start` along the null direction of the
/// interpolated Hessian, then fits its straight segment, tip and affine data.
pub fn trace_leaf(
    u: &ScalarField,
    hess: &HessianField,
    labels: &RegionLabelField,
    start: LeafStart,
    cfg: &FanConfig,
) -> Result<Leaf, RayError> {
    let g = &*u.grid;
    let leaf = match start {
        LeafStart::Foot {
            point,
            normal,
            is_corner,
        } => {
            if !near_bunching(labels, point) {
                return Err(RayError::NotInBunching(point));
            }
            let inward = scale(normal, -1.0);
            let m = march(hess, point, inward, cfg);
            finish_leaf(u, hess, point, &m, inward, is_corner, cfg)
        }
        LeafStart::Node { i, j } => {
            let p = g.point(i, j);
            if labels.at(i, j) != Region::Bunching {
                return Err(RayError::NotInBunching(p));
            }
            let q = hessian_at(hess, p).map_or([1.0, 0.0], |hs| hs.q_min);
            let fwd = march(hess, p, q, cfg);
            let bwd = march(hess, p, scale(q, -1.0), cfg);
            // the foot is the end that reaches the boundary (or the nearer one)
            let (foot_m, far_m) = match (fwd.hit_boundary, bwd.hit_boundary) {
                (false, true) => (&bwd, &fwd),
                (true, false) => (&fwd, &bwd),
                _ => {
                    let df = -g.polygon().signed_distance(fwd.end);
                    let db = -g.polygon().signed_distance(bwd.end);
                    if db <= df {
                        (&bwd, &fwd)
                    } else {
                        (&fwd, &bwd)
                    }
                }
            };
            let foot = foot_m.end;
            let mut pts: Vec<Point> = foot_m.points.iter().rev().copied().collect();
            pts.extend(far_m.points.iter().skip(1).copied());
            let combined = March {
                points: pts,
                end: far_m.end,
                hit_boundary: foot_m.hit_boundary && far_m.hit_boundary,
                degenerate: fwd.degenerate || bwd.degenerate,
            };
            let hint = sub(far_m.end, foot);
            let is_corner = g
                .polygon()
                .vertices()
                .iter()
                .enumerate()
                .any(|(k, v)| dist(*v, foot) <= g.h && g.polygon().is_corner(k));
            finish_leaf(u, hess, foot, &combined, hint, is_corner, cfg)
        }
    };
    if leaf.degenerate {
        return Err(RayError::DirectionAmbiguous { leaf: Box::new(leaf) });
    }
    Ok(leaf)
}

/// True when a node within `2.5 h` of `p` is labeled bunching (nodes next to
/// the boundary carry no Hessian, so the first labeled layer can sit two
/// cells in on a slanted edge).
fn near_bunching(labels: &RegionLabelField, p: Point) -> bool {
    let g = &*labels.grid;
    let fi = (p[0] - g.origin[0]) / g.h;
    let fj = (p[1] - g.origin[1]) / g.h;
    let (ci, cj) = (fi.round() as isize, fj.round() as isize);
    for dj in -3..=3 {
        for di in -3..=3 {
            let (i, j) = (ci + di, cj + dj);
            if (i as f64 - fi).hypot(j as f64 - fj) <= 2.5 + 1e-9 && labels.at_signed(i, j) == Region::Bunching {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanSample {
    pub t: f64,
    pub leaf: Leaf,
    pub normal: Point,
    /// `(∇u(γ) − γ)·n`.
    pub distortion: f64,
    /// Index into the boundary chart, when built from one.
    pub chart_index: Option<usize>,
}

/// Sampled foliation over one boundary arc, ordered by increasing `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayFan {
    pub samples: Vec<FanSample>,
    pub r0: f64,
    pub eta0: f64,
    pub r_max: f64,
    pub smoothing_window: usize,
}

/// Smoothed chart data at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub t: f64,
    pub gamma: Point,
    pub gamma_dot: Point,
    pub xi: Point,
    pub xi_dot: Point,
    pub b: f64,
    pub m: f64,
    pub length: f64,
}

impl RayFan {
    pub fn from_samples(samples: Vec<FanSample>, smoothing_window: usize) -> Self {
        let r0 = samples.iter().map(|s| s.leaf.length).fold(f64::INFINITY, f64::min);
        let r_max = samples.iter().map(|s| s.leaf.length).fold(0.0, f64::max);
        let eta0 = samples.iter().map(|s| s.distortion).fold(f64::INFINITY, f64::min);
        Self {
            samples,
            r0,
            eta0,
            r_max,
            smoothing_window: smoothing_window.max(3) | 1,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    fn angles(&self) -> Vec<f64> {
        // continuous unwrapped angle of ξ
        let mut out = Vec::with_capacity(self.len());
        let mut prev: Option<f64> = None;
        for s in &self.samples {
            let d = s.leaf.direction;
            let mut a = d[1].atan2(d[0]);
            if let Some(p) = prev {
                while a - p > std::f64::consts::PI {
                    a -= 2.0 * std::f64::consts::PI;
                }
                while a - p < -std::f64::consts::PI {
                    a += 2.0 * std::f64::consts::PI;
                }
            }
            prev = Some(a);
            out.push(a);
        }
        out
    }

    /// Window indices for sample `k` (shifted inward near the ends).
    fn window(&self, k: usize) -> Range<usize> {
        let w = self.smoothing_window.min(self.len());
        let half = w / 2;
        let start = k.saturating_sub(half).min(self.len() - w);
        start..start + w
    }

    /// Local quadratic least-squares fit of `ys(t)` around sample `k`:
    /// returns value and slope at `t_k`.
    fn local_fit(&self, ys: &[f64], k: usize) -> (f64, f64) {
        let win = self.window(k);
        let tk = self.samples[k].t;
        let degree = if win.len() >= 5 { 2 } else { 1 };
        let mut ata = nalgebra::DMatrix::<f64>::zeros(degree + 1, degree + 1);
        let mut atb = nalgebra::DVector::<f64>::zeros(degree + 1);
        let scale_t = (self.samples[win.end - 1].t - self.samples[win.start].t).abs().max(1e-300);
        for i in win {
            let x = (self.samples[i].t - tk) / scale_t;
            let pw: Vec<f64> = (0..=degree).map(|e| x.powi(e as i32)).collect();
            for a in 0..=degree {
                atb[a] += pw[a] * ys[i];
                for b in 0..=degree {
                    ata[(a, b)] += pw[a] * pw[b];
                }
            }
        }
        match ata.lu().solve(&atb) {
            Some(c) => (c[0], c[1] / scale_t),
            None => (ys[k], 0.0),
        }
    }

    /// Smoothed chart data at sample `k`.
    pub fn chart_point(&self, k: usize) -> ChartPoint {
        let th = self.angles();
        let gx: Vec<f64> = self.samples.iter().map(|s| s.leaf.foot[0]).collect();
        let gy: Vec<f64> = self.samples.iter().map(|s| s.leaf.foot[1]).collect();
        let bs: Vec<f64> = self.samples.iter().map(|s| s.leaf.b).collect();
        let ms: Vec<f64> = self.samples.iter().map(|s| s.leaf.m).collect();
        self.chart_point_from(k, &th, &gx, &gy, &bs, &ms)
    }

    fn chart_point_from(&self, k: usize, th: &[f64], gx: &[f64], gy: &[f64], bs: &[f64], ms: &[f64]) -> ChartPoint {
        let (a, adot) = self.local_fit(th, k);
        let (x, xd) = self.local_fit(gx, k);
        let (y, yd) = self.local_fit(gy, k);
        let (b, _) = self.local_fit(bs, k);
        let (m, _) = self.local_fit(ms, k);
        ChartPoint {
            t: self.samples[k].t,
            gamma: [x, y],
            gamma_dot: [xd, yd],
            xi: [a.cos(), a.sin()],
            xi_dot: [-a.sin() * adot, a.cos() * adot],
            b,
            m,
            length: self.samples[k].leaf.length,
        }
    }

    /// Smoothed chart data at every sample.
    pub fn chart_points(&self) -> Vec<ChartPoint> {
        let th = self.angles();
        let gx: Vec<f64> = self.samples.iter().map(|s| s.leaf.foot[0]).collect();
        let gy: Vec<f64> = self.samples.iter().map(|s| s.leaf.foot[1]).collect();
        let bs: Vec<f64> = self.samples.iter().map(|s| s.leaf.b).collect();
        let ms: Vec<f64> = self.samples.iter().map(|s| s.leaf.m).collect();
        (0..self.len())
            .map(|k| self.chart_point_from(k, &th, &gx, &gy, &bs, &ms))
            .collect()
    }

    /// Nearest sample to parameter `t`.
    pub fn nearest_sample(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, s) in self.samples.iter().enumerate() {
            if (s.t - t).abs() < (self.samples[best].t - t).abs() {
                best = k;
            }
        }
        best
    }

    /// Delimiter-separated table, one row per sample.
    pub fn to_table(&self) -> String {
        let mut s = String::from("t,gamma_x,gamma_y,xi_x,xi_y,R,b,m,distortion,flags\n");
        for smp in &self.samples {
            let l = &smp.leaf;
            let mut flags = Vec::new();
            if l.endpoint_on_boundary {
                flags.push("boundary_endpoint");
            }
            if l.foot_is_corner {
                flags.push("corner");
            }
            if l.degenerate {
                flags.push("degenerate");
            }
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
                smp.t,
                l.foot[0],
                l.foot[1],
                l.direction[0],
                l.direction[1],
                l.length,
                l.b,
                l.m,
                smp.distortion,
                flags.join("|")
            ));
        }
        s
    }
}

/// Chart indices of a contiguous arc in clockwise order (decreasing chart
/// index, wrapping), given as a counterclockwise index range.
fn clockwise(chart: &BoundaryChart, arc: &Range<usize>) -> Vec<usize> {
    let n = chart.len();
    let len = (arc.end + n - arc.start) % n;
    let len = if len == 0 && arc.end != arc.start { n } else { len };
    (0..len).map(|k| (arc.start + len - 1 - k) % n).collect()
}

/// Traces one leaf per chart sample in `arc` (a counterclockwise index range,
/// possibly wrapping past the end) and checks the tameness conditions.
pub fn build_tame_fan(
    u: &ScalarField,
    hess: &HessianField,
    labels: &RegionLabelField,
    chart: &BoundaryChart,
    arc: Range<usize>,
    cfg: &FanConfig,
) -> Result<RayFan, RayError> {
    let idx = clockwise(chart, &arc);
    if idx.is_empty() {
        return Err(RayError::TooFewSamples { needed: 1, got: 0 });
    }
    if let Some(&c) = idx.iter().find(|&&c| chart.is_corner[c]) {
        return Err(RayError::NotTame {
            sample: c,
            reason: TameFailure::Corner,
        });
    }
    let s_start = chart.arclength[idx[0]];
    let results: Vec<Result<FanSample, RayError>> = idx
        .par_iter()
        .map(|&c| {
            let fail = |reason| RayError::NotTame { sample: c, reason };
            let x = chart.samples[c];
            let nrm = chart.normals[c];
            let d = crate::regions::boundary_distortion(u, x, nrm);
            if !(d > 0.0) {
                return Err(fail(TameFailure::NonPositiveDistortion));
            }
            let leaf = match trace_leaf(
                u,
                hess,
                labels,
                LeafStart::Foot {
                    point: x,
                    normal: nrm,
                    is_corner: false,
                },
                cfg,
            ) {
                Ok(l) => l,
                Err(RayError::NotInBunching(_)) => return Err(fail(TameFailure::NotAdjacentToBunching)),
                Err(RayError::DirectionAmbiguous { .. }) => return Err(fail(TameFailure::Degenerate)),
                Err(e) => return Err(e),
            };
            if leaf.endpoint_on_boundary {
                return Err(fail(TameFailure::EndpointOnBoundary));
            }
            if !(leaf.length > 0.0) {
                return Err(fail(TameFailure::ShortLeaf));
            }
            if leaf.affine_deviation > cfg.affine_tol * leaf.length {
                return Err(fail(TameFailure::NotAffine));
            }
            let t = (s_start - chart.arclength[c]).rem_euclid(chart.total_length);
            Ok(FanSample {
                t,
                leaf,
                normal: nrm,
                distortion: d,
                chart_index: Some(c),
            })
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    for r in results {
        samples.push(r?);
    }
    let fan = RayFan::from_samples(samples, cfg.smoothing_window);
    check_orientation_and_crossing(&fan)?;
    Ok(fan)
}

fn segments_intersect(a0: Point, a1: Point, b0: Point, b1: Point) -> bool {
    let d1 = cross(sub(a1, a0), sub(b0, a0));
    let d2 = cross(sub(a1, a0), sub(b1, a0));
    let d3 = cross(sub(b1, b0), sub(a0, b0));
    let d4 = cross(sub(b1, b0), sub(a1, b0));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn check_orientation_and_crossing(fan: &RayFan) -> Result<(), RayError> {
    if fan.len() >= 2 {
        for (k, cp) in fan.chart_points().iter().enumerate() {
            if !(cross(cp.xi, cp.gamma_dot) > 0.0) {
                return Err(RayError::NotTame {
                    sample: fan.samples[k].chart_index.unwrap_or(k),
                    reason: TameFailure::Orientation,
                });
            }
        }
    }
    for w in fan.samples.windows(2) {
        let (a, b) = (&w[0].leaf, &w[1].leaf);
        let a1 = add(a.foot, scale(a.direction, fan.r_max));
        let b1 = add(b.foot, scale(b.direction, fan.r_max));
        if segments_intersect(a.foot, a1, b.foot, b1) {
            return Err(RayError::NotTame {
                sample: w[1].chart_index.unwrap_or(0),
                reason: TameFailure::Crossing,
            });
        }
    }
    Ok(())
}

/// Per-sample tameness screen over the whole chart, used for arc selection.
pub fn tame_flags(
    u: &ScalarField,
    hess: &HessianField,
    labels: &RegionLabelField,
    chart: &BoundaryChart,
    cfg: &FanConfig,
) -> Vec<bool> {
    (0..chart.len())
        .into_par_iter()
        .map(|c| {
            if chart.is_corner[c] {
                return false;
            }
            let d = crate::regions::boundary_distortion(u, chart.samples[c], chart.normals[c]);
            if !(d >= cfg.min_distortion) {
                return false;
            }
            match trace_leaf(
                u,
                hess,
                labels,
                LeafStart::Foot {
                    point: chart.samples[c],
                    normal: chart.normals[c],
                    is_corner: false,
                },
                cfg,
            ) {
                Ok(l) => {
                    !l.endpoint_on_boundary
                        && l.length >= cfg.min_length
                        && l.affine_deviation <= cfg.affine_tol * l.length
                }
                Err(_) => false,
            }
        })
        .collect()
}

/// Longest run of tame samples on a single edge that also passes
/// [`build_tame_fan`]; failing samples split the run and the search repeats.
pub fn select_tame_arc(
    u: &ScalarField,
    hess: &HessianField,
    labels: &RegionLabelField,
    chart: &BoundaryChart,
    cfg: &FanConfig,
) -> Result<(Range<usize>, RayFan), RayError> {
    let flags = tame_flags(u, hess, labels, chart, cfg);
    let mut runs: Vec<Range<usize>> = Vec::new();
    let mut k = 0;
    while k < chart.len() {
        if !flags[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < chart.len() && flags[k] && chart.edge[k] == chart.edge[start] {
            k += 1;
        }
        runs.push(start..k);
    }
    let min_len = cfg.smoothing_window.max(5);
    loop {
        runs.retain(|r| r.len() >= min_len);
        // longest first, ties by position for determinism
        runs.sort_by(|a, b| b.len().cmp(&a.len()).then(a.start.cmp(&b.start)));
        let Some(run) = runs.first().cloned() else {
            return Err(RayError::NoTameArc);
        };
        match build_tame_fan(u, hess, labels, chart, run.clone(), cfg) {
            Ok(fan) => return Ok((run, fan)),
            Err(RayError::NotTame { sample, .. }) if run.contains(&sample) => {
                runs.remove(0);
                runs.push(run.start..sample);
                runs.push(sample + 1..run.end);
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanIdentityReport {
    pub t: Vec<f64>,
    /// `|R²|ξ̇| − 2|γ̇|d| / (2|γ̇|d)` per sample.
    pub ray_length_residual: Vec<f64>,
    pub median_residual: f64,
    pub p90_residual: f64,
    pub max_residual: f64,
    /// Smallest distance between consecutive leaves extended to `R_max`.
    pub min_separation: f64,
    pub min_orientation: f64,
}

/// Checks the ray-length identity `R²|ξ̇| = 2|γ̇|(∇u − x)·n`, chart
/// injectivity and orientation on a fan.
pub fn fan_identities(fan: &RayFan) -> Result<FanIdentityReport, RayError> {
    const NEEDED: usize = 5;
    if fan.len() < NEEDED {
        return Err(RayError::TooFewSamples {
            needed: NEEDED,
            got: fan.len(),
        });
    }
    let cps = fan.chart_points();
    let mut residual = Vec::with_capacity(fan.len());
    let mut min_orientation = f64::INFINITY;
    for (s, cp) in fan.samples.iter().zip(&cps) {
        let lhs = s.leaf.length.powi(2) * norm(cp.xi_dot);
        let rhs = 2.0 * norm(cp.gamma_dot) * s.distortion;
        residual.push((lhs - rhs).abs() / rhs.abs().max(1e-300));
        min_orientation = min_orientation.min(cross(cp.xi, cp.gamma_dot));
    }
    let mut min_separation = f64::INFINITY;
    for w in fan.samples.windows(2) {
        let (a, b) = (&w[0].leaf, &w[1].leaf);
        let a1 = add(a.foot, scale(a.direction, fan.r_max));
        let b1 = add(b.foot, scale(b.direction, fan.r_max));
        let d = if segments_intersect(a.foot, a1, b.foot, b1) {
            0.0
        } else {
            crate::geometry::segment_distance(a.foot, b.foot, b1)
                .min(crate::geometry::segment_distance(a1, b.foot, b1))
                .min(crate::geometry::segment_distance(b.foot, a.foot, a1))
                .min(crate::geometry::segment_distance(b1, a.foot, a1))
        };
        min_separation = min_separation.min(d);
    }
    Ok(FanIdentityReport {
        t: fan.t(),
        median_residual: median(&residual).unwrap_or(f64::NAN),
        p90_residual: quantile(&residual, 0.9).unwrap_or(f64::NAN),
        max_residual: residual.iter().copied().fold(0.0, f64::max),
        ray_length_residual: residual,
        min_separation,
        min_orientation,
    })
}

/// Analytic fan description used to synthesize test fields.
pub struct FanGenerator {
    pub gamma: Box<dyn Fn(f64) -> Point + Send + Sync>,
    pub xi: Box<dyn Fn(f64) -> Point + Send + Sync>,
    pub length: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub b: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub m: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Parameter interval covered by the chart.
    pub t_range: (f64, f64),
    /// Largest `r` the chart is asked to cover.
    pub r_extent: f64,
    /// Curvature `κ` of the strictly convex continuation
    /// `(κ/2)(r − R(t))₊²` added beyond the leaf tips (0 keeps `u₁`).
    pub detachment: f64,
    pub samples: usize,
}

impl FanGenerator {
    /// Feet on the circle of radius `rho` about the origin, inward radial
    /// leaves of constant length `length`, `b` constant and `m` chosen so
    /// the ray-length identity holds exactly: `d = R²/(2ρ)`. The chart covers
    /// `r ≤ 3ρ/4`, short of the center where the leaves meet.
    pub fn radial(rho: f64, length: f64, b: f64, half_angle: f64, detachment: f64, samples: usize) -> Self {
        let m = -rho - length * length / (2.0 * rho);
        Self {
            // clockwise parameterization by arc length
            gamma: Box::new(move |t| {
                let phi = -t / rho;
                [rho * phi.cos(), rho * phi.sin()]
            }),
            xi: Box::new(move |t| {
                let phi = -t / rho;
                [-phi.cos(), -phi.sin()]
            }),
            length: Box::new(move |_| length),
            b: Box::new(move |_| b),
            m: Box::new(move |_| m),
            t_range: (-half_angle * rho, half_angle * rho),
            r_extent: 0.75 * rho,
            detachment,
            samples,
        }
    }

    /// Feet on the line `y = 0` with vertical leaves (`x` runs with `t`
    /// reversed so that `ξ × γ̇ > 0`).
    pub fn parallel(x_range: (f64, f64), length: f64, b: f64, m: f64, r_extent: f64, samples: usize) -> Self {
        Self {
            gamma: Box::new(move |t| [-t, 0.0]),
            xi: Box::new(|_| [0.0, 1.0]),
            length: Box::new(move |_| length),
            b: Box::new(move |_| b),
            m: Box::new(move |_| m),
            t_range: (-x_range.1, -x_range.0),
            r_extent,
            detachment: 0.0,
            samples,
        }
    }

    fn deriv(f: &(dyn Fn(f64) -> Point + Send + Sync), t: f64) -> Point {
        let e = 1e-6;
        let a = f(t + e);
        let b = f(t - e);
        [(a[0] - b[0]) / (2.0 * e), (a[1] - b[1]) / (2.0 * e)]
    }

    fn deriv_s(f: &(dyn Fn(f64) -> f64 + Send + Sync), t: f64) -> f64 {
        let e = 1e-6;
        (f(t + e) - f(t - e)) / (2.0 * e)
    }

    fn value(&self, r: f64, t: f64) -> f64 {
        let big_r = (self.length)(t);
        let base = (self.b)(t) + r * (self.m)(t);
        let over = (r - big_r).max(0.0);
        base + 0.5 * self.detachment * over * over
    }

    /// Inverts the chart: `(r, t)` with `x = γ(t) + r ξ(t)`, `t` in range and
    /// `0 ≤ r ≤ r_extent`.
    pub fn invert(&self, x: Point) -> Option<(f64, f64)> {
        let (t0, t1) = self.t_range;
        let f = |t: f64| cross((self.xi)(t), sub(x, (self.gamma)(t)));
        let n = 256;
        let mut prev_t = t0;
        let mut prev_f = f(t0);
        for k in 1..=n {
            let t = t0 + (t1 - t0) * k as f64 / n as f64;
            let ft = f(t);
            if prev_f == 0.0 || prev_f * ft <= 0.0 {
                let (mut a, mut b, mut fa) = (prev_t, t, prev_f);
                for _ in 0..200 {
                    let c = 0.5 * (a + b);
                    let fc = f(c);
                    if fa * fc <= 0.0 {
                        b = c;
                    } else {
                        a = c;
                        fa = fc;
                    }
                    if b - a < 1e-15 * (1.0 + t1.abs().max(t0.abs())) {
                        break;
                    }
                }
                let tc = 0.5 * (a + b);
                let r = dot(sub(x, (self.gamma)(tc)), (self.xi)(tc));
                if (-1e-12..=self.r_extent + 1e-12).contains(&r) {
                    return Some((r.max(0.0), tc));
                }
            }
            prev_t = t;
            prev_f = ft;
        }
        None
    }

    /// Exact fan sample at parameter `t`, including the distortion of `u₁`
    /// at the foot (gradient from `m = ∇u·ξ`, `ḃ = ∇u·γ̇`).
    pub fn sample(&self, t: f64) -> FanSample {
        let g = (self.gamma)(t);
        let xi = (self.xi)(t);
        let gd = Self::deriv(&*self.gamma, t);
        let bd = Self::deriv_s(&*self.b, t);
        let m = (self.m)(t);
        // solve [ξ; γ̇] p = [m; ḃ]
        let det = xi[0] * gd[1] - xi[1] * gd[0];
        let p = [(m * gd[1] - xi[1] * bd) / det, (xi[0] * bd - m * gd[0]) / det];
        // outward normal: γ̇ rotated clockwise is outward for a clockwise walk
        let normal = normalize([-gd[1], gd[0]]);
        let normal = if dot(normal, xi) > 0.0 { scale(normal, -1.0) } else { normal };
        FanSample {
            t,
            leaf: Leaf {
                foot: g,
                direction: xi,
                length: (self.length)(t),
                b: (self.b)(t),
                m,
                endpoint_on_boundary: false,
                foot_is_corner: false,
                degenerate: false,
                affine_deviation: 0.0,
            },
            normal,
            distortion: dot(sub(p, g), normal),
            chart_index: None,
        }
    }
}

/// Rasterizes `b(t) + r m(t)` (plus the optional detachment) onto every inside
/// node of `grid` and returns the generator's exact fan.
pub fn synth_fan(grid: std::sync::Arc<Grid>, gen: &FanGenerator) -> Result<(ScalarField, RayFan), RayError> {
    check_fold(gen, grid.h)?;
    let mut bad: Option<Point> = None;
    let values: Vec<f64> = (0..grid.len())
        .map(|k| {
            if !grid.inside_idx(k) {
                return f64::NAN;
            }
            match gen.invert(grid.point_of(k)) {
                Some((r, t)) => gen.value(r, t),
                None => {
                    bad.get_or_insert(grid.point_of(k));
                    f64::NAN
                }
            }
        })
        .collect();
    if let Some(p) = bad {
        return Err(RayError::NotInBunching(p));
    }
    let n = gen.samples.max(2);
    let (t0, t1) = gen.t_range;
    let samples = (0..n)
        .map(|k| gen.sample(t0 + (t1 - t0) * k as f64 / (n - 1) as f64))
        .collect();
    Ok((ScalarField::from_values(grid, values), RayFan::from_samples(samples, 5)))
}

/// Fold detection: the chart Jacobian `ξ × (γ̇ + r ξ̇)` must stay positive on
/// the requested window, and parameter pairs more than `2h` apart (in
/// `|Δr| + |γ̇||Δt|`) must not map within `h/4` of each other.
fn check_fold(gen: &FanGenerator, h: f64) -> Result<(), RayError> {
    let (t0, t1) = gen.t_range;
    let speed = |t: f64| norm(FanGenerator::deriv(&*gen.gamma, t));
    let arc = (0..=64)
        .map(|k| speed(t0 + (t1 - t0) * k as f64 / 64.0))
        .fold(0.0, f64::max)
        * (t1 - t0);
    let nt = ((arc / (0.5 * h)).ceil() as usize).clamp(16, 2000);
    let nr = ((gen.r_extent / (0.5 * h)).ceil() as usize).clamp(16, 2000);
    let mut pts = Vec::with_capacity((nt + 1) * (nr + 1));
    for a in 0..=nt {
        let t = t0 + (t1 - t0) * a as f64 / nt as f64;
        let xi = (gen.xi)(t);
        let gd = FanGenerator::deriv(&*gen.gamma, t);
        let xd = FanGenerator::deriv(&*gen.xi, t);
        for c in 0..=nr {
            let r = gen.r_extent * c as f64 / nr as f64;
            let jac = cross(xi, add(gd, scale(xd, r)));
            if !(jac > 0.0) {
                return Err(RayError::ChartFold { r1: r, t1: t, r2: r, t2: t });
            }
            // arc-length coordinate along the feet for the separation test
            pts.push((r, t, a as f64 * arc / nt as f64, add((gen.gamma)(t), scale(xi, r))));
        }
    }
    let tol = 0.25 * h;
    let key = |p: Point| ((p[0] / tol).floor() as i64, (p[1] / tol).floor() as i64);
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
    for (k, p) in pts.iter().enumerate() {
        buckets.entry(key(p.3)).or_default().push(k);
    }
    for (k, p) in pts.iter().enumerate() {
        let (kx, ky) = key(p.3);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let Some(list) = buckets.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                for &o in list {
                    let q = &pts[o];
                    if o > k && (q.0 - p.0).abs() + (q.2 - p.2).abs() > 2.0 * h && dist(p.3, q.3) < tol {
                        return Err(RayError::ChartFold {
                            r1: p.0,
                            t1: p.1,
                            r2: q.0,
                            t2: q.1,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::Polygon;
    use crate::regions::{hessian_field, segment_regions};

    const RHO: f64 = 1.0;
    const R: f64 = 0.3;
    const HALF: f64 = 0.5;

    /// Convex window bounded by an inscribed arc of the unit circle, two
    /// radii and an inner chord.
    fn arc_window(inner: f64, k: usize) -> Polygon {
        let mut v = vec![[inner * HALF.cos(), -inner * HALF.sin()]];
        for s in 0..k {
            let a = -HALF + 2.0 * HALF * s as f64 / (k - 1) as f64;
            v.push([RHO * a.cos(), RHO * a.sin()]);
        }
        v.push([inner * HALF.cos(), inner * HALF.sin()]);
        Polygon::with_threshold(v, 0.05).unwrap()
    }

    struct Setup {
        u: ScalarField,
        hess: HessianField,
        labels: RegionLabelField,
        exact: RayFan,
        cfg: FanConfig,
    }

    fn radial_setup(h: f64) -> Setup {
        let grid = Arc::new(Grid::build(&arc_window(0.4, 64), h).unwrap());
        let gen = FanGenerator::radial(RHO, R, 2.0, HALF, 1.0, 41);
        let (u, exact) = synth_fan(grid, &gen).unwrap();
        let hess = hessian_field(&u);
        let labels = segment_regions(&u, &hess, h * h, h);
        Setup {
            u,
            hess,
            labels,
            exact,
            cfg: FanConfig::for_spacing(h),
        }
    }

    /// Chart indices on the circular arc, away from the straight sides.
    fn arc_indices(chart: &BoundaryChart, margin: f64) -> Range<usize> {
        let on_arc: Vec<usize> = (0..chart.len())
            .filter(|&c| {
                let p = chart.samples[c];
                norm(p) > 0.999 * RHO && p[1].atan2(p[0]).abs() < HALF - margin
            })
            .collect();
        *on_arc.first().unwrap()..*on_arc.last().unwrap() + 1
    }

    #[test]
    fn separable_field_gives_vertical_leaves() {
        let g = Arc::new(Grid::build(&Polygon::rectangle(1.0, 1.0, 2.0, 2.0).unwrap(), 1.0 / 32.0).unwrap());
        let u = ScalarField::from_fn(g, |p| (p[0] - 1.5).powi(2) + 0.1);
        let hess = hessian_field(&u);
        let labels = segment_regions(&u, &hess, 1e-3, 1.0 / 32.0);
        let cfg = FanConfig::for_spacing(1.0 / 32.0);
        let start = LeafStart::Foot {
            point: [1.3, 1.0],
            normal: [0.0, -1.0],
            is_corner: false,
        };
        let leaf = trace_leaf(&u, &hess, &labels, start, &cfg).unwrap();
        assert!(leaf.endpoint_on_boundary);
        assert!(dist(leaf.direction, [0.0, 1.0]) < 1e-9, "{:?}", leaf.direction);
        assert!(leaf.m.abs() < 1e-9 && (leaf.length - 1.0).abs() < 1e-9);
        assert!((leaf.b - 0.14).abs() < 1e-3);
    }

    #[test]
    fn start_outside_bunching_is_rejected() {
        let g = Arc::new(Grid::build(&Polygon::square(1.0), 1.0 / 16.0).unwrap());
        let u = ScalarField::from_fn(g, |p| 0.75 * (p[0] * p[0] + p[1] * p[1]));
        let hess = hessian_field(&u);
        let labels = segment_regions(&u, &hess, 1.0 / 256.0, 1.0 / 16.0);
        let cfg = FanConfig::for_spacing(1.0 / 16.0);
        let err = trace_leaf(&u, &hess, &labels, LeafStart::Node { i: 8, j: 8 }, &cfg).unwrap_err();
        assert!(matches!(err, RayError::NotInBunching(_)));
    }

    #[test]
    fn parallel_fan_is_distance_to_line() {
        let g = Arc::new(Grid::build(&Polygon::rectangle(0.0, 0.0, 1.0, 0.5).unwrap(), 1.0 / 16.0).unwrap());
        let gen = FanGenerator::parallel((0.0, 1.0), 0.5, 0.0, 1.0, 0.5, 11);
        let (u, fan) = synth_fan(g.clone(), &gen).unwrap();
        for k in g.inside_indices() {
            assert!((u.values[k] - g.point_of(k)[1]).abs() < 1e-12);
        }
        assert_eq!(fan.len(), 11);
    }

    #[test]
    fn radial_field_matches_chart_inversion() {
        let h = 1.0 / 32.0;
        let grid = Arc::new(Grid::build(&arc_window(0.4, 64), h).unwrap());
        let gen = FanGenerator::radial(RHO, R, 2.0, HALF, 0.0, 21);
        let (u, _) = synth_fan(grid.clone(), &gen).unwrap();
        let m = -RHO - R * R / (2.0 * RHO);
        for k in grid.inside_indices() {
            let r = RHO - norm(grid.point_of(k));
            assert!((u.values[k] - (2.0 + r * m)).abs() < 1e-10);
        }
    }

    #[test]
    fn converging_rays_fold() {
        let grid = Arc::new(Grid::build(&arc_window(0.4, 64), 1.0 / 16.0).unwrap());
        let mut gen = FanGenerator::radial(RHO, R, 2.0, HALF, 0.0, 21);
        gen.r_extent = 1.2 * RHO;
        assert!(matches!(synth_fan(grid, &gen), Err(RayError::ChartFold { .. })));
    }

    #[test]
    fn exact_radial_fan_satisfies_identity() {
        let gen = FanGenerator::radial(RHO, R, 2.0, HALF, 0.0, 41);
        let fan = RayFan::from_samples((0..41).map(|k| gen.sample(-0.5 + k as f64 / 40.0)).collect(), 5);
        assert!((fan.eta0 - R * R / (2.0 * RHO)).abs() < 1e-8, "{}", fan.eta0);
        let rep = fan_identities(&fan).unwrap();
        assert!(rep.max_residual <= 1e-3, "{}", rep.max_residual);
        assert!(rep.min_orientation > 0.0 && rep.min_separation > 0.0);

        let mut bumped = fan.clone();
        bumped.samples[20].leaf.length *= 1.1;
        let rep = fan_identities(&bumped).unwrap();
        assert!(rep.ray_length_residual[20] > 0.15);
    }

    #[test]
    fn too_few_samples() {
        let gen = FanGenerator::radial(RHO, R, 2.0, HALF, 0.0, 4);
        let fan = RayFan::from_samples((0..4).map(|k| gen.sample(0.1 * k as f64)).collect(), 5);
        assert!(matches!(fan_identities(&fan), Err(RayError::TooFewSamples { .. })));
    }

    #[test]
    fn traced_leaf_recovers_generator() {
        let h = 1.0 / 128.0;
        let s = radial_setup(h);
        let chart = s.u.grid.boundary_chart().unwrap();
        let arc = arc_indices(&chart, 0.1);
        for c in arc.step_by(17) {
            let start = LeafStart::Foot {
                point: chart.samples[c],
                normal: chart.normals[c],
                is_corner: false,
            };
            let leaf = trace_leaf(&s.u, &s.hess, &s.labels, start, &s.cfg).unwrap();
            let radial = scale(normalize(leaf.foot), -1.0);
            assert!((leaf.length - R).abs() <= 2.0 * h, "R {}", leaf.length);
            assert!(dist(leaf.direction, radial) <= 2.0 * h / RHO, "{:?}", leaf.direction);
            assert!(!leaf.endpoint_on_boundary);
        }
    }

    #[test]
    fn tame_fan_on_synthetic_arc() {
        let h = 1.0 / 128.0;
        let s = radial_setup(h);
        let chart = s.u.grid.boundary_chart().unwrap();
        let fan = build_tame_fan(&s.u, &s.hess, &s.labels, &chart, arc_indices(&chart, 0.1), &s.cfg).unwrap();
        assert!((fan.r0 / s.exact.r0 - 1.0).abs() < 0.1, "r0 {} vs {}", fan.r0, s.exact.r0);
        assert!((fan.eta0 / s.exact.eta0 - 1.0).abs() < 0.1, "eta0 {} vs {}", fan.eta0, s.exact.eta0);
        let rep = fan_identities(&fan).unwrap();
        assert!(rep.min_orientation > 0.0 && rep.min_separation > 0.0);
        assert!(rep.median_residual < 0.15, "{}", rep.median_residual);
        for smp in &fan.samples {
            assert!(smp.leaf.affine_deviation <= s.cfg.affine_tol * smp.leaf.length);
        }
        // t runs clockwise: feet move to decreasing polar angle
        let a0 = fan.samples[0].leaf.foot;
        let a1 = fan.samples[fan.len() - 1].leaf.foot;
        assert!(a0[1].atan2(a0[0]) > a1[1].atan2(a1[0]));
        assert_eq!(fan.to_table().lines().count(), fan.len() + 1);
    }

    #[test]
    fn corner_and_crossing_leaves_are_not_tame() {
        let h = 1.0 / 32.0;
        let g = Arc::new(Grid::build(&Polygon::rectangle(1.0, 1.0, 2.0, 2.0).unwrap(), h).unwrap());
        let u = ScalarField::from_fn(g.clone(), |p| (p[0] - 1.5).powi(2) + 0.1);
        let hess = hessian_field(&u);
        let labels = segment_regions(&u, &hess, 1e-3, h);
        let cfg = FanConfig::for_spacing(h);
        let chart = g.boundary_chart().unwrap();
        // bottom edge, including the corner at vertex 0
        let err = build_tame_fan(&u, &hess, &labels, &chart, 0..10, &cfg).unwrap_err();
        assert!(matches!(err, RayError::NotTame { reason: TameFailure::Corner, .. }), "{err}");
        let err = build_tame_fan(&u, &hess, &labels, &chart, 5..15, &cfg).unwrap_err();
        assert!(
            matches!(err, RayError::NotTame { reason: TameFailure::EndpointOnBoundary, .. }),
            "{err}"
        );
    }

    #[test]
    fn retrace_from_interior_is_idempotent() {
        let h = 1.0 / 64.0;
        let s = radial_setup(h);
        let chart = s.u.grid.boundary_chart().unwrap();
        let c = arc_indices(&chart, 0.1).start + 40;
        let start = LeafStart::Foot {
            point: chart.samples[c],
            normal: chart.normals[c],
            is_corner: false,
        };
        let leaf = trace_leaf(&s.u, &s.hess, &s.labels, start, &s.cfg).unwrap();
        let g = &s.u.grid;
        for frac in [0.3, 0.6] {
            let p = add(leaf.foot, scale(leaf.direction, frac * leaf.length));
            let (i, j) = (
                ((p[0] - g.origin[0]) / g.h).round() as usize,
                ((p[1] - g.origin[1]) / g.h).round() as usize,
            );
            let again = trace_leaf(&s.u, &s.hess, &s.labels, LeafStart::Node { i, j }, &s.cfg).unwrap();
            // the node sits up to h/√2 off the leaf; compare the foot line
            let radial = scale(normalize(g.point(i, j)), -1.0);
            assert!(dist(again.direction, radial) <= 2.0 * h, "{:?}", again.direction);
            assert!(dist(again.foot, scale(radial, -RHO)) <= 2.0 * h, "{:?}", again.foot);
        }
    }

    #[test]
    fn recovery_improves_with_refinement() {
        let err = |h: f64| {
            let s = radial_setup(h);
            let chart = s.u.grid.boundary_chart().unwrap();
            let arc = arc_indices(&chart, 0.1);
            let mut e: f64 = 0.0;
            for c in arc.step_by(9) {
                let start = LeafStart::Foot {
                    point: chart.samples[c],
                    normal: chart.normals[c],
                    is_corner: false,
                };
                let leaf = trace_leaf(&s.u, &s.hess, &s.labels, start, &s.cfg).unwrap();
                e = e.max((leaf.length - R).abs());
            }
            e
        };
        let (e1, e2) = (err(1.0 / 32.0), err(1.0 / 64.0));
        assert!(e2 < 0.75 * e1 || e2 < 1.0 / 256.0, "{e1} {e2}");
    }
}
