//! Dense convex QP `min ½xᵀPx + qᵀx  s.t.  Ax ≥ b` for tiny instances.
//!
//! Mehrotra predictor–corrector on the full KKT system, then an active-set
//! polish that re-solves the equality-constrained problem on the identified
//! active rows. Used only as an independent reference for small grids.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct DenseQp {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseQpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub polished: bool,
    pub max_violation: f64,
}

impl DenseQp {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    fn violation(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b)
            .iter()
            .map(|v| (-v).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn solve(&self, tol: f64, max_iter: usize) -> Option<DenseQpSolution> {
        let n = self.p.nrows();
        let m = self.a.nrows();
        let mut x = DVector::<f64>::zeros(n);
        let mut s = DVector::<f64>::from_element(m, 1.0);
        let mut lam = DVector::<f64>::from_element(m, 1.0);
        let scale = 1.0 + self.q.amax() + self.b.amax();
        let mut iterations = 0;
        for it in 0..max_iter {
            iterations = it + 1;
            let rd = &self.p * &x + &self.q - self.a.transpose() * &lam;
            let rp = &self.a * &x - &s - &self.b;
            let mu = s.dot(&lam) / m as f64;
            if rd.amax() <= tol * scale && rp.amax() <= tol * scale && mu <= tol * tol * scale {
                break;
            }
            let d = lam.component_div(&s);
            let mut mat = self.p.clone();
            for i in 0..m {
                let row = self.a.row(i);
                mat += row.transpose() * row * d[i];
            }
            let lu = mat.lu();
            let step_dir = |rc: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
                // rhs = −rd + Aᵀ S⁻¹(−rc − Λ rp)
                let t = (-rc - lam.component_mul(&rp)).component_div(&s);
                let rhs = -&rd + self.a.transpose() * &t;
                let dx = lu.solve(&rhs)?;
                let ds = &self.a * &dx + &rp;
                let dl = (-rc - lam.component_mul(&ds)).component_div(&s);
                Some((dx, ds, dl))
            };
            let rc_aff = s.component_mul(&lam);
            let (_, ds_a, dl_a) = step_dir(&rc_aff)?;
            let alpha_a = max_step(&s, &ds_a).min(max_step(&lam, &dl_a));
            let mu_aff = (&s + &ds_a * alpha_a).dot(&(&lam + &dl_a * alpha_a)) / m as f64;
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
            let rc = s.component_mul(&lam) + ds_a.component_mul(&dl_a)
                - DVector::from_element(m, sigma * mu);
            let (dx, ds, dl) = step_dir(&rc)?;
            let alpha = (0.99 * max_step(&s, &ds).min(max_step(&lam, &dl))).min(1.0);
            x += &dx * alpha;
            s += &ds * alpha;
            lam += &dl * alpha;
            // keep strictly positive
            s.apply(|v| *v = v.max(1e-300));
            lam.apply(|v| *v = v.max(1e-300));
        }
        let ipm_obj = self.objective(&x);
        let ipm_viol = self.violation(&x);
        // polish on the rows the IPM considers active
        let active: Vec<usize> = (0..m).filter(|&i| lam[i] > s[i]).collect();
        if let Some(xp) = self.equality_solve(&active) {
            let viol = self.violation(&xp);
            let obj = self.objective(&xp);
            if viol <= 1e-12 * scale && obj <= ipm_obj + 1e-14 * scale {
                return Some(DenseQpSolution {
                    x: xp,
                    objective: obj,
                    iterations,
                    polished: true,
                    max_violation: viol,
                });
            }
        }
        Some(DenseQpSolution {
            x,
            objective: ipm_obj,
            iterations,
            polished: false,
            max_violation: ipm_viol,
        })
    }

    /// Minimizer with the rows in `active` held at equality (least-squares
    /// KKT solve, tolerating dependent rows).
    fn equality_solve(&self, active: &[usize]) -> Option<DVector<f64>> {
        let n = self.p.nrows();
        let k = active.len();
        let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
        let mut rhs = DVector::<f64>::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.p);
        for (r, &i) in active.iter().enumerate() {
            for c in 0..n {
                kkt[(n + r, c)] = self.a[(i, c)];
                kkt[(c, n + r)] = -self.a[(i, c)];
            }
            rhs[n + r] = self.b[i];
        }
        for c in 0..n {
            rhs[c] = -self.q[c];
        }
        let svd = kkt.svd(true, true);
        let sol = svd.solve(&rhs, 1e-12).ok()?;
        Some(sol.rows(0, n).into_owned())
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut a = 1.0f64;
    for (x, d) in v.iter().zip(dv.iter()) {
        if *d < 0.0 {
            a = a.min(-x / d);
        }
    }
    a
}
