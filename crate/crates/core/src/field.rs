//! Grid functions on the inside nodes of a [`Grid`].

use std::sync::Arc;

use crate::geometry::{Grid, Point};

/// Nodal values on a grid; entries outside the mask are NaN.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    /// Set by producers that certify nonnegativity and discrete convexity.
    pub feasible: bool,
}

impl ScalarField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::from_fn(grid, |_| 0.0)
    }

    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(Point) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                if grid.inside_idx(k) {
                    f(grid.point_of(k))
                } else {
                    f64::NAN
                }
            })
            .collect();
        Self {
            grid,
            values,
            feasible: false,
        }
    }

    pub fn from_values(grid: Arc<Grid>, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "value count must match grid");
        for (k, v) in values.iter_mut().enumerate() {
            if !grid.inside_idx(k) {
                *v = f64::NAN;
            }
        }
        Self {
            grid,
            values,
            feasible: false,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn inside_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.inside_indices().map(move |k| self.values[k])
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.grid
            .inside_indices()
            .map(|k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_inside(&self) -> f64 {
        self.inside_values().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation; NaN if any corner of the cell is outside.
    pub fn interpolate(&self, p: Point) -> f64 {
        let loc = self.grid.locate_unchecked(p);
        let nodes = loc.nodes(&self.grid);
        let mut s = 0.0;
        for (w, k) in loc.weights.iter().zip(nodes) {
            if *w == 0.0 {
                continue;
            }
            s += w * self.values[k];
        }
        s
    }

    /// Gradient of the bilinear interpolant at `p`.
    pub fn interpolate_gradient(&self, p: Point) -> Point {
        let g = &self.grid;
        let loc = g.locate_unchecked(p);
        let sx = ((p[0] - g.origin[0]) / g.h - loc.i as f64).clamp(0.0, 1.0);
        let sy = ((p[1] - g.origin[1]) / g.h - loc.j as f64).clamp(0.0, 1.0);
        let [a, b, c, d] = loc.nodes(g).map(|k| self.values[k]);
        [
            ((b - a) * (1.0 - sy) + (d - c) * sy) / g.h,
            ((c - a) * (1.0 - sx) + (d - b) * sx) / g.h,
        ]
    }

    /// First derivatives at an inside node: centered where both neighbors
    /// exist, otherwise the second-order one-sided stencil (first order if
    /// only one neighbor is available).
    pub fn node_gradient(&self, i: usize, j: usize) -> Point {
        let g = &self.grid;
        let (i, j) = (i as isize, j as isize);
        let val = |a: isize, b: isize| self.values[g.index(a as usize, b as usize)];
        let diff = |di: isize, dj: isize| -> f64 {
            let inside = |s: isize| g.inside_at(i + s * di, j + s * dj);
            let v = |s: isize| val(i + s * di, j + s * dj);
            match (inside(1), inside(-1)) {
                (true, true) => (v(1) - v(-1)) / (2.0 * g.h),
                (true, false) if inside(2) => (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * g.h),
                (true, false) => (v(1) - v(0)) / g.h,
                (false, true) if inside(-2) => (3.0 * v(0) - 4.0 * v(-1) + v(-2)) / (2.0 * g.h),
                (false, true) => (v(0) - v(-1)) / g.h,
                (false, false) => 0.0,
            }
        };
        [diff(1, 0), diff(0, 1)]
    }

    /// Bilinear blend of [`ScalarField::node_gradient`] over the inside
    /// corners of the cell containing `p`.
    pub fn gradient_at(&self, p: Point) -> Point {
        let g = &self.grid;
        let loc = g.locate_unchecked(p);
        let corners = [(0, 0), (1, 0), (0, 1), (1, 1)];
        let mut acc = [0.0; 2];
        let mut wsum = 0.0;
        for (w, (di, dj)) in loc.weights.iter().zip(corners) {
            let (i, j) = (loc.i + di, loc.j + dj);
            if *w <= 0.0 || !g.inside(i, j) {
                continue;
            }
            let gr = self.node_gradient(i, j);
            acc[0] += w * gr[0];
            acc[1] += w * gr[1];
            wsum += w;
        }
        if wsum > 0.0 {
            [acc[0] / wsum, acc[1] / wsum]
        } else {
            self.interpolate_gradient(p)
        }
    }

    /// Gradient at `p` of the least-squares quadratic through the inside
    /// nodes within `2.5 h`; second order even where the boundary cuts the
    /// cell. Falls back to [`ScalarField::gradient_at`] with too few nodes.
    pub fn fit_gradient(&self, p: Point) -> Point {
        let g = &self.grid;
        let radius = 2.5;
        let ci = ((p[0] - g.origin[0]) / g.h).round() as isize;
        let cj = ((p[1] - g.origin[1]) / g.h).round() as isize;
        let mut ata = nalgebra::Matrix6::<f64>::zeros();
        let mut atb = nalgebra::Vector6::<f64>::zeros();
        let mut count = 0;
        for dj in -3..=3 {
            for di in -3..=3 {
                let (i, j) = (ci + di, cj + dj);
                if !g.inside_at(i, j) {
                    continue;
                }
                let q = g.point(i as usize, j as usize);
                let x = (q[0] - p[0]) / g.h;
                let y = (q[1] - p[1]) / g.h;
                if x.hypot(y) > radius {
                    continue;
                }
                let row = nalgebra::Vector6::new(1.0, x, y, x * x, x * y, y * y);
                ata += row * row.transpose();
                atb += row * self.values[g.index(i as usize, j as usize)];
                count += 1;
            }
        }
        if count < 10 {
            return self.gradient_at(p);
        }
        match ata.cholesky() {
            Some(ch) => {
                let c = ch.solve(&atb);
                [c[1] / g.h, c[2] / g.h]
            }
            None => self.gradient_at(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;

    #[test]
    fn bilinear_reproduces_affine() {
        let g = Arc::new(Grid::build(&Polygon::square(1.0), 0.1).unwrap());
        let f = ScalarField::from_fn(g, |p| 2.0 * p[0] - 3.0 * p[1] + 0.5);
        let p = [1.234, 1.777];
        assert!((f.interpolate(p) - (2.0 * p[0] - 3.0 * p[1] + 0.5)).abs() < 1e-12);
        let gr = f.interpolate_gradient(p);
        assert!((gr[0] - 2.0).abs() < 1e-10 && (gr[1] + 3.0).abs() < 1e-10);
    }

    #[test]
    fn boundary_gradient_is_exact_for_quadratics() {
        let g = Arc::new(Grid::build(&Polygon::rectangle(1.0, 1.0, 2.0, 2.0).unwrap(), 0.125).unwrap());
        let f = ScalarField::from_fn(g, |p| 0.75 * (p[0] * p[0] + p[1] * p[1]));
        for p in [[1.0, 1.3], [2.0, 1.77], [1.5, 2.0], [2.0, 2.0]] {
            let gr = f.gradient_at(p);
            assert!((gr[0] - 1.5 * p[0]).abs() < 1e-10 && (gr[1] - 1.5 * p[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn fitted_gradient_is_exact_for_quadratics_off_grid() {
        let poly = Polygon::regular(7, [0.0, 0.0], 1.0).unwrap();
        let g = Arc::new(Grid::build(&poly, 0.05).unwrap());
        let f = ScalarField::from_fn(g, |p| 0.3 * p[0] * p[0] - 0.7 * p[0] * p[1] + 0.2 * p[1] + 1.0);
        for p in [[0.95, 0.0], [0.1, 0.2], [-0.3, 0.71]] {
            let gr = f.fit_gradient(p);
            assert!((gr[0] - (0.6 * p[0] - 0.7 * p[1])).abs() < 1e-9, "{gr:?}");
            assert!((gr[1] - (-0.7 * p[0] + 0.2)).abs() < 1e-9, "{gr:?}");
        }
    }
}
