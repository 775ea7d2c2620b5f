//! Discrete Hessians, the exclusion / bunching / customization partition and
//! the structural diagnostics of a solved utility field.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::ScalarField;
use crate::geometry::{dot, sub, BoundaryChart, Grid, Point};
use crate::numeric::{median, quantile, sym_eigen2};

/// Symmetric 2×2 second-derivative matrix with its eigen-decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian {
    pub uxx: f64,
    pub uyy: f64,
    pub uxy: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Unit eigenvector of `lambda_min`.
    pub q_min: Point,
    pub q_max: Point,
}

impl Hessian {
    pub fn from_entries(uxx: f64, uyy: f64, uxy: f64) -> Self {
        let (lambda_min, lambda_max, q_min, q_max) = sym_eigen2(uxx, uxy, uyy);
        Self {
            uxx,
            uyy,
            uxy,
            lambda_min,
            lambda_max,
            q_min,
            q_max,
        }
    }

    pub fn trace(&self) -> f64 {
        self.uxx + self.uyy
    }
}

/// Central-difference Hessians at nodes whose 3×3 neighborhood is inside.
#[derive(Debug, Clone)]
pub struct HessianField {
    pub grid: Arc<Grid>,
    pub entries: Vec<Option<Hessian>>,
}

pub fn hessian_field(u: &ScalarField) -> HessianField {
    let g = u.grid.clone();
    let h2 = g.h * g.h;
    let entries = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = g.ij(k);
            let (ii, jj) = (i as isize, j as isize);
            for dj in -1..=1 {
                for di in -1..=1 {
                    if !g.inside_at(ii + di, jj + dj) {
                        return None;
                    }
                }
            }
            let v = |di: isize, dj: isize| u.values[g.index((ii + di) as usize, (jj + dj) as usize)];
            let c = v(0, 0);
            let uxx = (v(1, 0) - 2.0 * c + v(-1, 0)) / h2;
            let uyy = (v(0, 1) - 2.0 * c + v(0, -1)) / h2;
            let uxy = (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4.0 * h2);
            Some(Hessian::from_entries(uxx, uyy, uxy))
        })
        .collect();
    HessianField { grid: g, entries }
}

impl HessianField {
    pub fn at(&self, i: usize, j: usize) -> Option<&Hessian> {
        self.entries[self.grid.index(i, j)].as_ref()
    }

    /// Bilinear interpolation of the entries over the available corners of
    /// the cell holding `p`; falls back to the nearest available node within
    /// two cells (boundary layer). `None` if nothing is available.
    pub fn interpolate(&self, p: Point) -> Option<Hessian> {
        let g = &*self.grid;
        let loc = g.locate_unchecked(p);
        let mut acc = [0.0; 3];
        let mut wsum = 0.0;
        for (w, k) in loc.weights.iter().zip(loc.nodes(g)) {
            if let Some(hs) = &self.entries[k] {
                acc[0] += w * hs.uxx;
                acc[1] += w * hs.uyy;
                acc[2] += w * hs.uxy;
                wsum += w;
            }
        }
        if wsum > 1e-12 {
            return Some(Hessian::from_entries(acc[0] / wsum, acc[1] / wsum, acc[2] / wsum));
        }
        let fx = (p[0] - g.origin[0]) / g.h;
        let fy = (p[1] - g.origin[1]) / g.h;
        let mut best: Option<(f64, Hessian)> = None;
        let (ci, cj) = (fx.round() as isize, fy.round() as isize);
        for dj in -2..=2 {
            for di in -2..=2 {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= g.nx as isize || j >= g.ny as isize {
                    continue;
                }
                if let Some(hs) = self.at(i as usize, j as usize) {
                    let d = (i as f64 - fx).hypot(j as f64 - fy);
                    if best.as_ref().is_none_or(|b| d < b.0) {
                        best = Some((d, *hs));
                    }
                }
            }
        }
        best.map(|b| b.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Ω₀: priced out, `u = 0`.
    Exclusion,
    /// Ω₁: foliated by rays, Hessian degenerate.
    Bunching,
    /// Ω₂: strictly convex.
    Customization,
    /// Inside node without a full Hessian stencil and `u > u_tol`.
    Boundary,
    Outside,
}

impl Region {
    pub fn code(self) -> u8 {
        match self {
            Region::Exclusion => 0,
            Region::Bunching => 1,
            Region::Customization => 2,
            Region::Boundary => 3,
            Region::Outside => 4,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Region::Exclusion,
            1 => Region::Bunching,
            2 => Region::Customization,
            3 => Region::Boundary,
            4 => Region::Outside,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RegionLabelField {
    pub grid: Arc<Grid>,
    pub labels: Vec<Region>,
    pub u_tol: f64,
    pub lambda_tol: f64,
    /// Erosion radius used for the Laplacian statistics, in length units.
    pub erosion: f64,
}

impl RegionLabelField {
    pub fn at(&self, i: usize, j: usize) -> Region {
        self.labels[self.grid.index(i, j)]
    }

    /// Signed-index lookup; `Outside` off the lattice.
    pub fn at_signed(&self, i: isize, j: isize) -> Region {
        let g = &self.grid;
        if i < 0 || j < 0 || i >= g.nx as isize || j >= g.ny as isize {
            Region::Outside
        } else {
            self.at(i as usize, j as usize)
        }
    }

    pub fn count(&self, r: Region) -> usize {
        self.labels.iter().filter(|&&l| l == r).count()
    }

    /// Node count times `h²`.
    pub fn area(&self, r: Region) -> f64 {
        self.count(r) as f64 * self.grid.h * self.grid.h
    }

    /// Region label at the node nearest to `p`.
    pub fn nearest(&self, p: Point) -> Region {
        let g = &self.grid;
        let i = ((p[0] - g.origin[0]) / g.h).round() as isize;
        let j = ((p[1] - g.origin[1]) / g.h).round() as isize;
        self.at_signed(i, j)
    }

    /// Nodes of `r` whose every inside neighbor within `radius` also carries
    /// label `r` (neighbors off the mask break the interior too).
    pub fn eroded(&self, r: Region, radius: f64) -> Vec<usize> {
        let g = &*self.grid;
        let m = (radius / g.h + 1e-9).floor() as isize;
        let rr = (radius / g.h + 1e-9).powi(2);
        (0..g.len())
            .filter(|&k| {
                if self.labels[k] != r {
                    return false;
                }
                let (i, j) = g.ij(k);
                for dj in -m..=m {
                    for di in -m..=m {
                        if ((di * di + dj * dj) as f64) > rr {
                            continue;
                        }
                        if self.at_signed(i as isize + di, j as isize + dj) != r {
                            return false;
                        }
                    }
                }
                true
            })
            .collect()
    }
}

/// Labels every node: `Ω₀` if `u ≤ u_tol` (takes precedence), otherwise
/// `Ω₂` if `λ_min ≥ λ_tol`, `Ω₁` if a Hessian exists, `Boundary` if not.
pub fn segment_regions(u: &ScalarField, hess: &HessianField, u_tol: f64, lambda_tol: f64) -> RegionLabelField {
    let g = u.grid.clone();
    let labels = (0..g.len())
        .map(|k| {
            if !g.inside_idx(k) {
                Region::Outside
            } else if u.values[k] <= u_tol {
                Region::Exclusion
            } else {
                match &hess.entries[k] {
                    Some(hs) if hs.lambda_min >= lambda_tol => Region::Customization,
                    Some(_) => Region::Bunching,
                    None => Region::Boundary,
                }
            }
        })
        .collect();
    RegionLabelField {
        erosion: 3.0 * g.h,
        grid: g,
        labels,
        u_tol,
        lambda_tol,
    }
}

/// Default tolerances `(u_tol, λ_tol) = (h², h)`.
pub fn default_tolerances(h: f64) -> (f64, f64) {
    (h * h, h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub count: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl SampleStats {
    pub fn of(xs: &[f64]) -> Option<Self> {
        Some(Self {
            count: xs.len(),
            median: median(xs)?,
            p90: quantile(xs, 0.9)?,
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDiagnostics {
    pub area_exclusion: f64,
    pub area_bunching: f64,
    pub area_customization: f64,
    /// `|Δu − 3|` over customization nodes eroded by the label erosion radius.
    pub laplacian_defect: Option<SampleStats>,
    /// Lattice nodes inside the convex hull of `Ω₀` that are not in `Ω₀`.
    pub exclusion_convexity_defect: Option<f64>,
    /// `min (∇u − x)·n` over boundary samples.
    pub min_boundary_distortion: Option<f64>,
    /// Arc length of the sample attaining the minimum.
    pub argmin_distortion: Option<f64>,
}

/// Five-point Laplacian at an inside node with all four neighbors inside.
pub fn five_point_laplacian(u: &ScalarField, i: usize, j: usize) -> Option<f64> {
    let g = &*u.grid;
    let (ii, jj) = (i as isize, j as isize);
    for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
        if !g.inside_at(ii + di, jj + dj) {
            return None;
        }
    }
    let c = u.at(i, j);
    Some((u.at(i + 1, j) + u.at(i - 1, j) + u.at(i, j + 1) + u.at(i, j - 1) - 4.0 * c) / (g.h * g.h))
}

/// Outward normal distortion `(∇u(x) − x)·n(x)` at a boundary sample.
pub fn boundary_distortion(u: &ScalarField, x: Point, normal: Point) -> f64 {
    dot(sub(u.fit_gradient(x), x), normal)
}

pub fn region_diagnostics(u: &ScalarField, labels: &RegionLabelField, chart: &BoundaryChart) -> RegionDiagnostics {
    let g = &*u.grid;
    let defects: Vec<f64> = labels
        .eroded(Region::Customization, labels.erosion)
        .into_iter()
        .filter_map(|k| {
            let (i, j) = g.ij(k);
            five_point_laplacian(u, i, j).map(|l| (l - 3.0).abs())
        })
        .collect();
    let excl: Vec<[i64; 2]> = (0..g.len())
        .filter(|&k| labels.labels[k] == Region::Exclusion)
        .map(|k| {
            let (i, j) = g.ij(k);
            [i as i64, j as i64]
        })
        .collect();
    let exclusion_convexity_defect = if excl.is_empty() {
        None
    } else {
        let hull = lattice_hull(&excl);
        let mut missing = 0usize;
        let (lo, hi) = hull_box(&hull);
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                if in_hull(&hull, [i, j]) && labels.at(i as usize, j as usize) != Region::Exclusion {
                    missing += 1;
                }
            }
        }
        Some(missing as f64)
    };
    let mut min_d: Option<(f64, f64)> = None;
    for s in 0..chart.len() {
        let d = boundary_distortion(u, chart.samples[s], chart.normals[s]);
        if min_d.is_none_or(|m| d < m.0) {
            min_d = Some((d, chart.arclength[s]));
        }
    }
    RegionDiagnostics {
        area_exclusion: labels.area(Region::Exclusion),
        area_bunching: labels.area(Region::Bunching),
        area_customization: labels.area(Region::Customization),
        laplacian_defect: SampleStats::of(&defects),
        exclusion_convexity_defect,
        min_boundary_distortion: min_d.map(|m| m.0),
        argmin_distortion: min_d.map(|m| m.1),
    }
}

fn cross_i(o: [i64; 2], a: [i64; 2], b: [i64; 2]) -> i64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone-chain convex hull in exact integer arithmetic (counterclockwise,
/// collinear points dropped).
fn lattice_hull(pts: &[[i64; 2]]) -> Vec<[i64; 2]> {
    let mut p = pts.to_vec();
    p.sort();
    p.dedup();
    if p.len() <= 2 {
        return p;
    }
    let mut lower: Vec<[i64; 2]> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross_i(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<[i64; 2]> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross_i(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn hull_box(hull: &[[i64; 2]]) -> ([i64; 2], [i64; 2]) {
    let mut lo = [i64::MAX; 2];
    let mut hi = [i64::MIN; 2];
    for p in hull {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (lo, hi)
}

/// Closed containment in a counterclockwise lattice hull (degenerate hulls
/// are segments or points).
fn in_hull(hull: &[[i64; 2]], q: [i64; 2]) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == q,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross_i(a, b, q) == 0
                && q[0] >= a[0].min(b[0])
                && q[0] <= a[0].max(b[0])
                && q[1] >= a[1].min(b[1])
                && q[1] <= a[1].max(b[1])
        }
        n => (0..n).all(|k| cross_i(hull[k], hull[(k + 1) % n], q) >= 0),
    }
}
