//! Discrete convexity cone and Euclidean projection onto the feasible set.

use serde::{Deserialize, Serialize};

use crate::field::ScalarField;
use crate::geometry::Grid;

use super::SolverError;

/// Finite stencil of second-difference directions, closed under negation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvexityCone {
    directions: Vec<[i32; 2]>,
}

/// One second-difference row `u(x+he) − 2u(x) + u(x−he) ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeRow {
    pub center: usize,
    pub plus: usize,
    pub minus: usize,
    pub direction: [i32; 2],
}

impl Default for ConvexityCone {
    fn default() -> Self {
        Self::eight()
    }
}

impl ConvexityCone {
    /// Axis and diagonal directions with their negatives.
    pub fn eight() -> Self {
        Self::from_representatives(&[[1, 0], [0, 1], [1, 1], [1, -1]])
    }

    /// [`ConvexityCone::eight`] plus the knight moves `(2,1), (1,2), …`.
    pub fn sixteen() -> Self {
        Self::from_representatives(&[
            [1, 0],
            [0, 1],
            [1, 1],
            [1, -1],
            [2, 1],
            [1, 2],
            [2, -1],
            [1, -2],
        ])
    }

    fn from_representatives(reps: &[[i32; 2]]) -> Self {
        let mut directions = Vec::with_capacity(2 * reps.len());
        for &[a, b] in reps {
            directions.push([a, b]);
            directions.push([-a, -b]);
        }
        Self { directions }
    }

    /// Validates an explicit list: symmetric, nonzero, containing the four
    /// axis/diagonal lines.
    pub fn from_directions(directions: Vec<[i32; 2]>) -> Result<Self, SolverError> {
        for d in &directions {
            if *d == [0, 0] {
                return Err(SolverError::BadCone("zero direction".into()));
            }
            if !directions.contains(&[-d[0], -d[1]]) {
                return Err(SolverError::BadCone(format!(
                    "direction ({}, {}) lacks its negative",
                    d[0], d[1]
                )));
            }
        }
        for req in [[1, 0], [0, 1], [1, 1], [1, -1]] {
            if !directions.contains(&req) {
                return Err(SolverError::BadCone(format!(
                    "missing required direction ({}, {})",
                    req[0], req[1]
                )));
            }
        }
        let mut dedup = directions;
        dedup.sort();
        dedup.dedup();
        Ok(Self { directions: dedup })
    }

    pub fn directions(&self) -> &[[i32; 2]] {
        &self.directions
    }

    /// One representative per ± pair (first nonzero component positive).
    pub fn representatives(&self) -> Vec<[i32; 2]> {
        let mut v: Vec<[i32; 2]> = self
            .directions
            .iter()
            .copied()
            .filter(|d| d[0] > 0 || (d[0] == 0 && d[1] > 0))
            .collect();
        v.sort();
        v
    }

    /// All rows whose three nodes are inside the grid mask.
    pub fn rows(&self, grid: &Grid) -> Vec<ConeRow> {
        let reps = self.representatives();
        let mut rows = Vec::new();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if !grid.inside(i, j) {
                    continue;
                }
                let (ii, jj) = (i as isize, j as isize);
                for &d in &reps {
                    let (dx, dy) = (d[0] as isize, d[1] as isize);
                    if grid.inside_at(ii + dx, jj + dy) && grid.inside_at(ii - dx, jj - dy) {
                        rows.push(ConeRow {
                            center: grid.index(i, j),
                            plus: grid.index((ii + dx) as usize, (jj + dy) as usize),
                            minus: grid.index((ii - dx) as usize, (jj - dy) as usize),
                            direction: d,
                        });
                    }
                }
            }
        }
        rows
    }

    /// Smallest second difference over all rows (raw, not divided by h²).
    pub fn min_row(&self, u: &ScalarField) -> f64 {
        self.rows(&u.grid)
            .iter()
            .map(|r| r.eval(&u.values))
            .fold(f64::INFINITY, f64::min)
    }
}

impl ConeRow {
    #[inline]
    pub fn eval(&self, u: &[f64]) -> f64 {
        u[self.plus] - 2.0 * u[self.center] + u[self.minus]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 200_000,
        }
    }
}

/// Euclidean projection of the nodal vector onto `{u ≥ 0} ∩ {cone rows ≥ 0}`.
///
/// Cyclic projections onto the half-spaces with Dykstra correction terms; for
/// half-spaces the corrections are scalar multipliers `z_i ≥ 0` and the
/// iterate stays `u₀ + Σ z_i a_i`.
pub fn project_feasible(
    u: &ScalarField,
    cone: &ConvexityCone,
    cfg: ProjectionConfig,
) -> Result<ScalarField, SolverError> {
    let grid = u.grid.clone();
    let rows = cone.rows(&grid);
    let inside: Vec<usize> = grid.inside_indices().collect();
    let mut x = u.values.clone();
    let mut z_pos = vec![0.0; inside.len()];
    let mut z_row = vec![0.0; rows.len()];
    let scale = u
        .inside_values()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for _sweep in 0..cfg.max_sweeps {
        let mut moved = 0.0f64;
        for (z, &k) in z_pos.iter_mut().zip(&inside) {
            let t = x[k];
            let nz = (*z - t).max(0.0);
            let d = nz - *z;
            if d != 0.0 {
                x[k] += d;
                moved = moved.max(d.abs());
                *z = nz;
            }
        }
        for (z, r) in z_row.iter_mut().zip(&rows) {
            let t = r.eval(&x);
            // |a|² = 6 for (1, −2, 1)
            let nz = (*z - t / 6.0).max(0.0);
            let d = nz - *z;
            if d != 0.0 {
                x[r.plus] += d;
                x[r.minus] += d;
                x[r.center] -= 2.0 * d;
                moved = moved.max(2.0 * d.abs());
                *z = nz;
            }
        }
        let viol = inside
            .iter()
            .map(|&k| (-x[k]).max(0.0))
            .chain(rows.iter().map(|r| (-r.eval(&x)).max(0.0)))
            .fold(0.0, f64::max);
        if moved <= cfg.tol * scale && viol <= cfg.tol * scale {
            let mut out = ScalarField::from_values(grid, x);
            out.feasible = true;
            return Ok(out);
        }
    }
    Err(SolverError::ProjectionStalled {
        sweeps: cfg.max_sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use std::sync::Arc;

    #[test]
    fn eight_directions_are_symmetric() {
        let c = ConvexityCone::eight();
        assert_eq!(c.directions().len(), 8);
        assert_eq!(c.representatives().len(), 4);
        assert_eq!(ConvexityCone::sixteen().directions().len(), 16);
        assert!(ConvexityCone::from_directions(vec![[1, 0], [-1, 0]]).is_err());
        assert!(ConvexityCone::from_directions(vec![[1, 0], [0, 1], [1, 1], [1, -1]]).is_err());
    }

    #[test]
    fn rows_stay_inside() {
        let g = Grid::build(&Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap(), 0.1)
            .unwrap();
        for r in ConvexityCone::sixteen().rows(&g) {
            for k in [r.center, r.plus, r.minus] {
                assert!(g.inside_idx(k));
            }
        }
    }

    #[test]
    fn feasible_field_is_fixed_point() {
        let g = Arc::new(Grid::build(&Polygon::square(1.0), 0.125).unwrap());
        let u = ScalarField::from_fn(g, |p| 0.75 * (p[0] * p[0] + p[1] * p[1]));
        let p = project_feasible(&u, &ConvexityCone::eight(), ProjectionConfig::default()).unwrap();
        assert!(p.max_abs_diff(&u) <= 1e-10);
    }

    #[test]
    fn negative_constant_clamps_to_zero() {
        let g = Arc::new(Grid::build(&Polygon::square(1.0), 0.125).unwrap());
        let u = ScalarField::from_fn(g, |_| -1.0);
        let p = project_feasible(&u, &ConvexityCone::eight(), ProjectionConfig::default()).unwrap();
        assert!(p.inside_values().all(|v| v.abs() <= 1e-10));
    }
}
