//! Discrete profit functional `Π(u) = ∫ x·∇u − u − ½|∇u|²`.
//!
//! Mass lumping uses bilinear cell weights: every full cell hands `h²/4` to
//! each corner node and `h²/2` to each of its four edges. Derivatives live on
//! edges as `(u_head − u_tail)/h`, paired with the midpoint coordinate along
//! the edge. The nodal gradient below is the exact adjoint of this sum.

use std::sync::Arc;

use crate::field::ScalarField;
use crate::geometry::Grid;
use crate::numeric::pairwise_sum;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Edge {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
    /// Midpoint coordinate along the edge direction.
    pub xmid: f64,
}

/// Quadrature weights and edge list for one grid.
#[derive(Debug, Clone)]
pub struct ProfitModel {
    grid: Arc<Grid>,
    pub(crate) node_weight: Vec<f64>,
    pub(crate) edges: Vec<Edge>,
}

impl ProfitModel {
    pub fn new(grid: Arc<Grid>) -> Self {
        let g = &*grid;
        let h2 = g.h * g.h;
        let mut node_weight = vec![0.0; g.len()];
        let mut hw = vec![0.0; g.len()]; // edge (i,j)-(i+1,j)
        let mut vw = vec![0.0; g.len()]; // edge (i,j)-(i,j+1)
        for j in 0..g.ny.saturating_sub(1) {
            for i in 0..g.nx.saturating_sub(1) {
                if !g.cell_full(i, j) {
                    continue;
                }
                for k in [
                    g.index(i, j),
                    g.index(i + 1, j),
                    g.index(i, j + 1),
                    g.index(i + 1, j + 1),
                ] {
                    node_weight[k] += 0.25 * h2;
                }
                hw[g.index(i, j)] += 0.5 * h2;
                hw[g.index(i, j + 1)] += 0.5 * h2;
                vw[g.index(i, j)] += 0.5 * h2;
                vw[g.index(i + 1, j)] += 0.5 * h2;
            }
        }
        let mut edges = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                let p = g.point(i, j);
                if hw[k] > 0.0 {
                    edges.push(Edge {
                        tail: k,
                        head: g.index(i + 1, j),
                        weight: hw[k],
                        xmid: p[0] + 0.5 * g.h,
                    });
                }
                if vw[k] > 0.0 {
                    edges.push(Edge {
                        tail: k,
                        head: g.index(i, j + 1),
                        weight: vw[k],
                        xmid: p[1] + 0.5 * g.h,
                    });
                }
            }
        }
        Self {
            grid,
            node_weight,
            edges,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Total quadrature area.
    pub fn area(&self) -> f64 {
        pairwise_sum(&self.node_weight)
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        let h = self.grid.h;
        let mut terms: Vec<f64> = Vec::with_capacity(self.node_weight.len() + self.edges.len());
        for (k, &w) in self.node_weight.iter().enumerate() {
            if w > 0.0 {
                terms.push(-w * u[k]);
            }
        }
        for e in &self.edges {
            let d = (u[e.head] - u[e.tail]) / h;
            terms.push(e.weight * (e.xmid * d - 0.5 * d * d));
        }
        pairwise_sum(&terms)
    }

    /// Exact gradient of [`ProfitModel::value`] with respect to nodal values
    /// (zero at nodes outside the mask).
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let h = self.grid.h;
        let mut g: Vec<f64> = self.node_weight.iter().map(|w| -w).collect();
        for e in &self.edges {
            let d = (u[e.head] - u[e.tail]) / h;
            let flux = e.weight * (e.xmid - d) / h;
            g[e.head] += flux;
            g[e.tail] -= flux;
        }
        g
    }

    /// Adds the (negated, hence positive semidefinite) Hessian `K` into a
    /// band matrix indexed through `map` (grid index → unknown index).
    pub(crate) fn add_stiffness(&self, map: &[usize], m: &mut crate::linalg::BandMatrix) {
        let h2 = self.grid.h * self.grid.h;
        for e in &self.edges {
            let c = e.weight / h2;
            let a = map[e.tail];
            let b = map[e.head];
            m.add(a, a, c);
            m.add(b, b, c);
            m.add(a, b, -c);
        }
    }
}

/// Discrete profit of a field.
pub fn discrete_profit(u: &ScalarField) -> f64 {
    ProfitModel::new(u.grid.clone()).value(&clean(u))
}

/// Exact gradient of [`discrete_profit`] as a field.
pub fn profit_gradient(u: &ScalarField) -> ScalarField {
    let model = ProfitModel::new(u.grid.clone());
    ScalarField::from_values(u.grid.clone(), model.gradient(&clean(u)))
}

fn clean(u: &ScalarField) -> Vec<f64> {
    u.values
        .iter()
        .map(|v| if v.is_finite() { *v } else { 0.0 })
        .collect()
}
