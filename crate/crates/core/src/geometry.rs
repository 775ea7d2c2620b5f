//! Convex polygonal domains, their uniform node grids and boundary charts.
//!
//! Node `(i, j)` sits at `origin + (i h, j h)`; values are stored row-major with
//! `i` fastest, so the linear index is `i + j * nx`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

pub const DEFAULT_CORNER_ANGLE: f64 = 1e-3;

const VERTEX_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {index} coincides with its successor")]
    CoincidentVertices { index: usize },
    #[error("polygon is not counterclockwise and strictly convex at vertex {index} (cross = {cross:e})")]
    NotConvex { index: usize, cross: f64 },
    #[error("vertex {index} is not finite")]
    NonFinite { index: usize },
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("grid spacing {h} leaves fewer than 3 nodes per direction ({nx} x {ny})")]
    SpacingTooLarge { h: f64, nx: usize, ny: usize },
    #[error("point ({}, {}) lies outside the polygon", .0[0], .0[1])]
    OutsidePolygon(Point),
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Planar cross product `a × b = a¹b² − a²b¹`.
#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn normalize(a: Point) -> Point {
    let n = norm(a);
    [a[0] / n, a[1] / n]
}

/// Rotation by +90°.
#[inline]
pub fn perp(a: Point) -> Point {
    [-a[1], a[0]]
}

/// A counterclockwise, strictly convex polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
    corner_angle_threshold: f64,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        Self::with_threshold(vertices, DEFAULT_CORNER_ANGLE)
    }

    pub fn with_threshold(
        vertices: Vec<Point>,
        corner_angle_threshold: f64,
    ) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        for (index, v) in vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(GeometryError::NonFinite { index });
            }
        }
        for index in 0..n {
            if dist(vertices[index], vertices[(index + 1) % n]) <= VERTEX_EPS {
                return Err(GeometryError::CoincidentVertices { index });
            }
        }
        for index in 0..n {
            let prev = vertices[(index + n - 1) % n];
            let cur = vertices[index];
            let next = vertices[(index + 1) % n];
            let c = cross(sub(cur, prev), sub(next, cur));
            if c <= 0.0 {
                return Err(GeometryError::NotConvex { index, cross: c });
            }
        }
        Ok(Self {
            vertices,
            corner_angle_threshold,
        })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    /// The square type space `(a, a + 1)²`.
    pub fn square(a: f64) -> Self {
        Self::rectangle(a, a, a + 1.0, a + 1.0).expect("unit square is valid")
    }

    pub fn regular(n: usize, center: Point, radius: f64) -> Result<Self, GeometryError> {
        let verts = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            })
            .collect();
        Self::new(verts)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn corner_angle_threshold(&self) -> f64 {
        self.corner_angle_threshold
    }

    pub fn edge(&self, k: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[k], self.vertices[(k + 1) % n])
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len()
    }

    /// Unit outward normal of edge `k`.
    pub fn edge_normal(&self, k: usize) -> Point {
        let (a, b) = self.edge(k);
        let d = normalize(sub(b, a));
        [d[1], -d[0]]
    }

    pub fn shortest_edge(&self) -> f64 {
        (0..self.edge_count())
            .map(|k| {
                let (a, b) = self.edge(k);
                dist(a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.edge_count())
            .map(|k| {
                let (a, b) = self.edge(k);
                dist(a, b)
            })
            .sum()
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|k| cross(self.vertices[k], self.vertices[(k + 1) % n]))
            .sum::<f64>()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for c in 0..2 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        (lo, hi)
    }

    /// Exterior turning angle at vertex `k`, in `(0, π)`.
    pub fn turning_angle(&self, k: usize) -> f64 {
        let n = self.vertices.len();
        let a = sub(self.vertices[k], self.vertices[(k + n - 1) % n]);
        let b = sub(self.vertices[(k + 1) % n], self.vertices[k]);
        cross(a, b).atan2(dot(a, b))
    }

    pub fn is_corner(&self, k: usize) -> bool {
        self.turning_angle(k) > self.corner_angle_threshold
    }

    /// Signed distance to the boundary: negative inside, positive outside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        let mut inside_margin = f64::INFINITY;
        let mut outside = false;
        let mut best_out = f64::INFINITY;
        for k in 0..self.edge_count() {
            let (a, b) = self.edge(k);
            let nrm = self.edge_normal(k);
            let s = dot(sub(p, a), nrm);
            if s > 0.0 {
                outside = true;
            }
            inside_margin = inside_margin.min(-s);
            best_out = best_out.min(segment_distance(p, a, b));
        }
        if outside {
            best_out
        } else {
            -inside_margin
        }
    }

    /// Closed containment with a relative tolerance scaled to the polygon size.
    pub fn contains(&self, p: Point) -> bool {
        let (lo, hi) = self.bounding_box();
        let tol = 1e-12 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
        (0..self.edge_count()).all(|k| {
            let (a, _) = self.edge(k);
            dot(sub(p, a), self.edge_normal(k)) <= tol
        })
    }

    /// Closest boundary point of `p` together with the edge index.
    pub fn closest_boundary_point(&self, p: Point) -> (Point, usize) {
        let mut best = (self.vertices[0], 0usize, f64::INFINITY);
        for k in 0..self.edge_count() {
            let (a, b) = self.edge(k);
            let q = project_to_segment(p, a, b);
            let d = dist(p, q);
            if d < best.2 {
                best = (q, k, d);
            }
        }
        (best.0, best.1)
    }

    /// First exit of the ray `p + s dir`, `s > 0`, from the closed polygon
    /// (for `p` inside).
    pub fn exit_distance(&self, p: Point, dir: Point) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..self.edge_count() {
            let (a, _) = self.edge(k);
            let nrm = self.edge_normal(k);
            let rate = dot(dir, nrm);
            if rate > 1e-15 {
                let s = dot(sub(a, p), nrm) / rate;
                best = best.min(s.max(0.0));
            }
        }
        best
    }
}

pub fn project_to_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    let s = (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0);
    add(a, scale(ab, s))
}

pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    dist(p, project_to_segment(p, a, b))
}

/// Uniform node lattice over the polygon's bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    inside: Vec<bool>,
    polygon: Polygon,
}

impl Grid {
    pub fn build(polygon: &Polygon, h: f64) -> Result<Self, GeometryError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GeometryError::BadSpacing(h));
        }
        let (lo, hi) = polygon.bounding_box();
        let count = |len: f64| ((len / h) * (1.0 + 1e-12) + 1e-9).floor() as usize + 1;
        let nx = count(hi[0] - lo[0]);
        let ny = count(hi[1] - lo[1]);
        if nx < 3 || ny < 3 {
            return Err(GeometryError::SpacingTooLarge { h, nx, ny });
        }
        let mut inside = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let p = [lo[0] + i as f64 * h, lo[1] + j as f64 * h];
                inside[i + j * nx] = polygon.contains(p);
            }
        }
        Ok(Self {
            origin: lo,
            h,
            nx,
            ny,
            inside,
            polygon: polygon.clone(),
        })
    }

    /// Grid over `(1, 2)²`-style squares with `n` nodes per side.
    pub fn square_nodes(a: f64, n: usize) -> Result<Self, GeometryError> {
        Self::build(&Polygon::square(a), 1.0 / (n as f64 - 1.0))
    }

    /// Lattice with an explicit mask; the polygon is the lattice box.
    pub fn from_mask(origin: Point, h: f64, nx: usize, ny: usize, inside: Vec<bool>) -> Result<Self, GeometryError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GeometryError::BadSpacing(h));
        }
        if nx < 3 || ny < 3 {
            return Err(GeometryError::SpacingTooLarge { h, nx, ny });
        }
        assert_eq!(inside.len(), nx * ny, "mask length must match lattice");
        let hi = [origin[0] + (nx - 1) as f64 * h, origin[1] + (ny - 1) as f64 * h];
        let polygon = Polygon::rectangle(origin[0], origin[1], hi[0], hi[1])?;
        Ok(Self {
            origin,
            h,
            nx,
            ny,
            inside,
            polygon,
        })
    }

    /// Same lattice and polygon with the mask narrowed to nodes where `keep`
    /// holds.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> Self {
        let inside = (0..self.len()).map(|k| self.inside[k] && keep(k)).collect();
        Self {
            inside,
            ..self.clone()
        }
    }

    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.nx
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    #[inline]
    pub fn point_of(&self, idx: usize) -> Point {
        let (i, j) = self.ij(idx);
        self.point(i, j)
    }

    #[inline]
    pub fn inside(&self, i: usize, j: usize) -> bool {
        self.inside[self.index(i, j)]
    }

    #[inline]
    pub fn inside_idx(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    pub fn inside_mask(&self) -> &[bool] {
        &self.inside
    }

    /// Inside-node check for signed offsets; off-lattice offsets are outside.
    pub fn inside_at(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && self.inside(i as usize, j as usize)
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn inside_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| self.inside[k])
    }

    /// A cell is full when all four corners are inside.
    pub fn cell_full(&self, i: usize, j: usize) -> bool {
        i + 1 < self.nx
            && j + 1 < self.ny
            && self.inside(i, j)
            && self.inside(i + 1, j)
            && self.inside(i, j + 1)
            && self.inside(i + 1, j + 1)
    }

    /// Bilinear location of `p`: the lower-left node of its cell and the four
    /// corner weights in order `(i,j), (i+1,j), (i,j+1), (i+1,j+1)`.
    pub fn locate(&self, p: Point) -> Result<Location, GeometryError> {
        if !self.polygon.contains(p) {
            return Err(GeometryError::OutsidePolygon(p));
        }
        Ok(self.locate_unchecked(p))
    }

    /// Like [`Grid::locate`] but clamps points outside the lattice box.
    pub fn locate_unchecked(&self, p: Point) -> Location {
        let fx = ((p[0] - self.origin[0]) / self.h).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p[1] - self.origin[1]) / self.h).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let sx = fx - i as f64;
        let sy = fy - j as f64;
        Location {
            i,
            j,
            weights: [
                (1.0 - sx) * (1.0 - sy),
                sx * (1.0 - sy),
                (1.0 - sx) * sy,
                sx * sy,
            ],
        }
    }

    pub fn boundary_chart(&self) -> Result<BoundaryChart, GeometryError> {
        BoundaryChart::build(&self.polygon, 0.5 * self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub i: usize,
    pub j: usize,
    pub weights: [f64; 4],
}

impl Location {
    /// Linear indices matching the weight order.
    pub fn nodes(&self, grid: &Grid) -> [usize; 4] {
        [
            grid.index(self.i, self.j),
            grid.index(self.i + 1, self.j),
            grid.index(self.i, self.j + 1),
            grid.index(self.i + 1, self.j + 1),
        ]
    }
}

/// Arc-length sampling of the boundary with outward normals and corner flags.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryChart {
    pub samples: Vec<Point>,
    pub normals: Vec<Point>,
    pub is_corner: Vec<bool>,
    /// Cumulative arc length of each sample from vertex 0.
    pub arclength: Vec<f64>,
    /// Edge containing each sample (the outgoing edge at vertices).
    pub edge: Vec<usize>,
    pub total_length: f64,
}

impl BoundaryChart {
    pub fn build(polygon: &Polygon, spacing: f64) -> Result<Self, GeometryError> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(GeometryError::BadSpacing(spacing));
        }
        let n = polygon.edge_count();
        let mut chart = BoundaryChart {
            samples: Vec::new(),
            normals: Vec::new(),
            is_corner: Vec::new(),
            arclength: Vec::new(),
            edge: Vec::new(),
            total_length: 0.0,
        };
        let mut s0 = 0.0;
        for k in 0..n {
            let (a, b) = polygon.edge(k);
            let len = dist(a, b);
            let pieces = (len / spacing).ceil().max(1.0) as usize;
            let nrm = polygon.edge_normal(k);
            let prev_nrm = polygon.edge_normal((k + n - 1) % n);
            for p in 0..pieces {
                let s = p as f64 / pieces as f64;
                chart.samples.push(add(a, scale(sub(b, a), s)));
                if p == 0 {
                    chart.normals.push(normalize(add(nrm, prev_nrm)));
                    chart.is_corner.push(polygon.is_corner(k));
                } else {
                    chart.normals.push(nrm);
                    chart.is_corner.push(false);
                }
                chart.arclength.push(s0 + s * len);
                chart.edge.push(k);
            }
            s0 += len;
        }
        chart.total_length = s0;
        Ok(chart)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn corner_count(&self) -> usize {
        self.is_corner.iter().filter(|&&c| c).count()
    }

    /// Point and outward normal at arc length `s` (taken modulo the perimeter).
    pub fn at_arclength(&self, polygon: &Polygon, s: f64) -> (Point, Point, usize) {
        let s = s.rem_euclid(self.total_length);
        let mut acc = 0.0;
        for k in 0..polygon.edge_count() {
            let (a, b) = polygon.edge(k);
            let len = dist(a, b);
            if s <= acc + len || k + 1 == polygon.edge_count() {
                let t = ((s - acc) / len).clamp(0.0, 1.0);
                return (add(a, scale(sub(b, a), t)), polygon.edge_normal(k), k);
            }
            acc += len;
        }
        unreachable!()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_inside(poly: &[Point], p: Point) -> bool {
        // winding-free test for convex ccw polygons: left of every edge
        let n = poly.len();
        (0..n).all(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % n];
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-12
        })
    }

    #[test]
    fn unit_square_half_spacing() {
        let g = Grid::build(&Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap(), 0.5).unwrap();
        assert_eq!((g.nx, g.ny), (3, 3));
        assert_eq!(g.inside_count(), 9);
    }

    #[test]
    fn shifted_square_fine() {
        let g = Grid::build(&Polygon::square(1.0), 1.0 / 64.0).unwrap();
        assert_eq!((g.nx, g.ny), (65, 65));
        assert_eq!(g.inside_count(), 65 * 65);
        assert_eq!(g.point(64, 64), [2.0, 2.0]);
    }

    #[test]
    fn triangle_matches_brute_force() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let g = Grid::build(&Polygon::new(verts.clone()).unwrap(), 0.25).unwrap();
        let mut expected = 0;
        for j in 0..5 {
            for i in 0..5 {
                if brute_inside(&verts, [i as f64 * 0.25, j as f64 * 0.25]) {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 15);
        assert_eq!(g.inside_count(), expected);
    }

    #[test]
    fn rejects_bad_polygons() {
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [1.0, 0.0]]),
            Err(GeometryError::TooFewVertices(2))
        ));
        // clockwise
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]),
            Err(GeometryError::NotConvex { .. })
        ));
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            Err(GeometryError::CoincidentVertices { index: 0 })
        ));
        // reflex vertex 2
        let err = Polygon::new(vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [2.0, 2.0], [0.0, 2.0]])
            .unwrap_err();
        assert!(matches!(err, GeometryError::NotConvex { index: 2, .. }));
    }

    #[test]
    fn spacing_too_large() {
        let p = Polygon::square(1.0);
        assert!(matches!(
            Grid::build(&p, 0.6),
            Err(GeometryError::SpacingTooLarge { .. })
        ));
        assert!(matches!(Grid::build(&p, 0.0), Err(GeometryError::BadSpacing(_))));
    }

    #[test]
    fn square_chart_normals_and_corners() {
        let p = Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let c = BoundaryChart::build(&p, 0.25).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(c.corner_count(), 4);
        for k in 0..c.len() {
            if c.samples[k][0] == 1.0 && !c.is_corner[k] {
                assert_eq!(c.normals[k], [1.0, 0.0]);
            }
            assert!((norm(c.normals[k]) - 1.0).abs() <= 1e-12);
        }
        assert!((c.total_length - 4.0).abs() < 1e-12);
    }

    #[test]
    fn hexagon_chart_matches_edge_oracle() {
        let p = Polygon::regular(6, [0.0, 0.0], 1.0).unwrap();
        let c = BoundaryChart::build(&p, 0.1).unwrap();
        assert_eq!(c.corner_count(), 6);
        let verts = p.vertices();
        for k in 0..c.len() {
            if c.is_corner[k] {
                continue;
            }
            let e = c.edge[k];
            let a = verts[e];
            let b = verts[(e + 1) % 6];
            // perpendicular, pointing away from the centroid
            let d = [b[0] - a[0], b[1] - a[1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let mut nrm = [d[1] / len, -d[0] / len];
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            if nrm[0] * mid[0] + nrm[1] * mid[1] < 0.0 {
                nrm = [-nrm[0], -nrm[1]];
            }
            assert!((c.normals[k][0] - nrm[0]).abs() < 1e-12);
            assert!((c.normals[k][1] - nrm[1]).abs() < 1e-12);
        }
        assert!((c.total_length - p.perimeter()).abs() <= 1e-10 * p.perimeter());
    }

    #[test]
    fn near_straight_vertex_is_not_a_corner() {
        // vertex 2 turns by ~1e-4 rad
        let p = Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.99995, 1.0], [0.0, 1.0]])
            .unwrap();
        let c = BoundaryChart::build(&p, 0.1).unwrap();
        assert_eq!(c.corner_count(), 4);
    }

    #[test]
    fn locate_node_and_center() {
        let g = Grid::build(&Polygon::square(1.0), 0.25).unwrap();
        let loc = g.locate(g.point(1, 2)).unwrap();
        let n = loc.nodes(&g);
        let w: f64 = loc
            .weights
            .iter()
            .zip(n)
            .filter(|(_, k)| *k == g.index(1, 2))
            .map(|(w, _)| *w)
            .sum();
        assert!((w - 1.0).abs() < 1e-15);
        let loc = g.locate([1.125, 1.375]).unwrap();
        for w in loc.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert!(g.locate([0.5, 1.5]).is_err());
    }

    #[test]
    fn runs_are_contiguous_on_hexagon() {
        let p = Polygon::regular(6, [0.3, -0.2], 1.1).unwrap();
        let g = Grid::build(&p, 0.05).unwrap();
        for j in 0..g.ny {
            let row: Vec<bool> = (0..g.nx).map(|i| g.inside(i, j)).collect();
            let switches = row.windows(2).filter(|w| w[0] != w[1]).count();
            assert!(switches <= 2);
        }
        for i in 0..g.nx {
            let col: Vec<bool> = (0..g.ny).map(|j| g.inside(i, j)).collect();
            let switches = col.windows(2).filter(|w| w[0] != w[1]).count();
            assert!(switches <= 2);
        }
    }
}
