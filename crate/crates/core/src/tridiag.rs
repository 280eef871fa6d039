//! Tridiagonal solver (Thomas algorithm)
//!     A x = rhs
//! with A given by its sub-, main- and super-diagonal.

/// Solves in place; `rhs` holds the solution on return.
///
/// `lower[i]` couples row `i + 1` to column `i`, `upper[i]` couples row `i` to
/// column `i + 1`. Returns `None` if a zero pivot is met, which cannot happen
/// for strictly or weakly diagonally dominant M-matrices.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Option<()> {
    let n = diag.len();
    assert_eq!(rhs.len(), n);
    assert_eq!(lower.len() + 1, n);
    assert_eq!(upper.len() + 1, n);
    if n == 0 {
        return Some(());
    }

    let mut c = vec![0.0; n.saturating_sub(1)];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return None;
    }
    if n > 1 {
        c[0] = upper[0] / pivot;
    }
    rhs[0] /= pivot;

    // Forward sweep
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if pivot == 0.0 {
            return None;
        }
        if i < n - 1 {
            c[i] = upper[i] / pivot;
        }
        rhs[i] = (rhs[i] - lower[i - 1] * rhs[i - 1]) / pivot;
    }

    // Back substitution
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 7;
        let lower: Vec<f64> = (0..n - 1).map(|i| -0.5 - 0.1 * i as f64).collect();
        let upper: Vec<f64> = (0..n - 1).map(|i| -1.0 + 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        solve(&lower, &diag, &upper, &mut x).unwrap();
        let back = matvec(&lower, &diag, &upper, &x);
        for (u, v) in b.iter().zip(&back) {
            assert!((u - v).abs() < 1e-12, "{u} vs {v}");
        }
    }

    #[test]
    fn single_unknown() {
        let mut x = [6.0];
        solve(&[], &[3.0], &[], &mut x).unwrap();
        assert_eq!(x, [2.0]);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut x = [1.0, 1.0];
        assert!(solve(&[1.0], &[0.0, 1.0], &[1.0], &mut x).is_none());
    }
}
