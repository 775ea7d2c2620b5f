//! Symmetric banded matrices and their Cholesky factorization.
//!
//! Natural (row-major) node ordering gives the discrete operators of this
//! crate a bandwidth of at most a few grid rows, which keeps a dense band
//! factorization cheap enough for the grids we solve on.

/// Lower band storage: `data[i * (bw + 1) + (bw - (i - j))]` holds `A[i][j]`
/// for `i - bw <= j <= i`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    /// Adds `v` to the symmetric entry `(i, j)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.slot(r, c)]
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..=i {
                let a = self.data[self.slot(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// In-place Cholesky `A = L Lᵀ`.
    pub fn cholesky(self) -> Result<BandCholesky, NotPositiveDefinite> {
        self.factor(false)
    }

    /// Cholesky that replaces pivots lost to cancellation (below `1e-14`
    /// of the diagonal) by a huge value, which effectively freezes that
    /// unknown in the solve. Interior-point Hessians become this
    /// ill-conditioned near the end of the central path.
    pub fn cholesky_guarded(self) -> Result<BandCholesky, NotPositiveDefinite> {
        self.factor(true)
    }

    fn factor(mut self, guarded: bool) -> Result<BandCholesky, NotPositiveDefinite> {
        let bw = self.bw;
        let w = bw + 1;
        for i in 0..self.n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // L[i][j] = (A[i][j] - sum_k L[i][k] L[j][k]) / L[j][j]
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.data[i * w + (bw - (i - j))];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                s -= dot(&self.data[ri + k0..ri + j], &self.data[rj + k0..rj + j]);
                if j == i {
                    let diag = self.data[ri + i];
                    if guarded && s.is_finite() && s <= 1e-14 * diag.abs() {
                        s = 1e128;
                    }
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(NotPositiveDefinite { row: i, pivot: s });
                    }
                    self.data[ri + i] = s.sqrt();
                } else {
                    self.data[ri + j] = s / self.data[rj + j];
                }
            }
        }
        Ok(BandCholesky { l: self })
    }
}

/// Dot product with four independent accumulators (vectorizes well).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let bw = self.l.bw;
        let w = bw + 1;
        let d = &self.l.data;
        let mut y = b.to_vec();
        for i in 0..n {
            let ri = i * w + bw - i;
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= d[ri + k] * y[k];
            }
            y[i] = s / d[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            let s = y[i] / d[ri + i];
            y[i] = s;
            for k in i.saturating_sub(bw)..i {
                y[k] -= d[ri + k] * s;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_poisson() {
        let n = 50;
        let mut a = BandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i + 1 < n {
                a.add(i + 1, i, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x);
        let sol = a.cholesky().unwrap().solve(&b);
        for i in 0..n {
            assert!((sol[i] - x[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn wide_band_matches_dense() {
        let n = 30;
        let bw = 7;
        let mut a = BandMatrix::zeros(n, bw);
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let v = if i == j {
                    20.0
                } else {
                    ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5
                };
                a.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 10.0).collect();
        let x = a.cholesky().unwrap().solve(&b);
        let xd = dense
            .lu()
            .solve(&nalgebra::DVector::from_vec(b.clone()))
            .unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_is_reported() {
        let mut a = BandMatrix::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert_eq!(a.cholesky().unwrap_err().row, 1);
    }
}
