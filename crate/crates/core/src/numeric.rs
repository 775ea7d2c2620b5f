//! Small numeric helpers shared across modules.

/// Pairwise (tree) summation with a fixed split order, so the result depends
/// only on the slice contents and never on how it was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Linear-interpolated quantile `q ∈ [0, 1]`; `None` for an empty sample.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    Some(v[lo] * (1.0 - f) + v[hi] * f)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    quantile(xs, 0.5)
}

/// Eigen-decomposition of the symmetric matrix `[[a, b], [b, c]]`:
/// returns `(λ_min, λ_max, q_min, q_max)` with unit eigenvectors.
pub fn sym_eigen2(a: f64, b: f64, c: f64) -> (f64, f64, [f64; 2], [f64; 2]) {
    let mean = 0.5 * (a + c);
    let half = 0.5 * (a - c);
    let r = half.hypot(b);
    let lmin = mean - r;
    let lmax = mean + r;
    // angle of the max eigenvector: tan 2θ = 2b / (a − c)
    let theta = 0.5 * b.atan2(half);
    let qmax = [theta.cos(), theta.sin()];
    let qmin = [-theta.sin(), theta.cos()];
    (lmin, lmax, qmin, qmax)
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_min(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_residuals() {
        for &(a, b, c) in &[(1.5, 0.0, 1.5), (2.0, 1.0, -1.0), (0.0, 3.0, 0.0), (1e-3, -2.0, 5.0)] {
            let (l0, l1, q0, q1) = sym_eigen2(a, b, c);
            assert!(l0 <= l1);
            for (l, q) in [(l0, q0), (l1, q1)] {
                let r = [a * q[0] + b * q[1] - l * q[0], b * q[0] + c * q[1] - l * q[1]];
                assert!(r[0].hypot(r[1]) <= 1e-12);
            }
        }
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(quantile(&[], 0.5), None);
        assert_eq!(quantile(&[0.0, 10.0], 0.05), Some(0.5));
    }

    #[test]
    fn golden() {
        let (x, _) = golden_min(0.0, 3.0, 1e-10, |x| (x - 1.3) * (x - 1.3));
        assert!((x - 1.3).abs() < 1e-8);
    }
}
