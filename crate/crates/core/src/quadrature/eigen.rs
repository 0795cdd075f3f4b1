use super::JacobiMatrix;
use crate::error::{Error, Result};

/// Sweep budget per eigenvalue.
pub const MAX_SWEEPS: usize = 30;

/// Eigenvalues (ascending) of a symmetric tridiagonal matrix together with
/// the first component of each orthonormal eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalEigen {
    pub eigenvalues: Vec<f64>,
    pub first_components: Vec<f64>,
}

/// Implicit-shift QL iteration (the EISPACK `imtql2` scheme), accumulating
/// only the first row of the eigenvector matrix.
pub fn tridiag_eigen(matrix: &JacobiMatrix) -> Result<TridiagonalEigen> {
    let n = matrix.dim();
    let mut d = matrix.diagonal().to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(matrix.off_diagonal());
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if sweeps == MAX_SWEEPS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: sweeps,
                });
            }
            sweeps += 1;

            // Wilkinson-type shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;

                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    if d.iter().chain(&z).any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "non-finite eigen decomposition".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    Ok(TridiagonalEigen {
        eigenvalues: order.iter().map(|&i| d[i]).collect(),
        first_components: order.iter().map(|&i| z[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::RecurrenceCoeffs;
    use approx::assert_abs_diff_eq;

    fn jacobi(alpha: &[f64], beta: &[f64]) -> JacobiMatrix {
        RecurrenceCoeffs::new(alpha.to_vec(), beta.to_vec())
            .unwrap()
            .jacobi()
            .unwrap()
    }

    #[test]
    fn one_by_one() {
        let eig = tridiag_eigen(&jacobi(&[2.5], &[0.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![2.5]);
        assert_eq!(eig.first_components, vec![1.0]);
    }

    #[test]
    fn two_by_two() {
        let eig = tridiag_eigen(&jacobi(&[0.0, 0.0], &[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eig.eigenvalues[1], 1.0, epsilon = 1e-15);
        for v in &eig.first_components {
            assert_abs_diff_eq!(v * v, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn hermite_cubic_roots() {
        let eig = tridiag_eigen(&jacobi(&[0.0; 3], &[0.0, 1.0, 2.0])).unwrap();
        let r3 = 3f64.sqrt();
        for (got, want) in eig.eigenvalues.iter().zip([-r3, 0.0, r3]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn matches_characteristic_polynomial_and_orthonormality() {
        // Random-ish Jacobi matrix; eigenvalues must be roots of the
        // degree-n orthogonal polynomial built from the same coefficients,
        // and the first-row components must have unit norm.
        let alpha = [0.3, -1.1, 0.8, 2.0, -0.4, 0.05, 1.5];
        let beta = [0.0, 0.5, 1.7, 0.2, 3.1, 0.9, 1.1];
        let eig = tridiag_eigen(&jacobi(&alpha, &beta)).unwrap();
        let charpoly = |x: f64| {
            let (mut prev, mut cur) = (0.0, 1.0);
            for k in 0..alpha.len() {
                let next = (x - alpha[k]) * cur - beta[k] * prev;
                prev = cur;
                cur = next;
            }
            cur
        };
        for &lam in &eig.eigenvalues {
            let deriv = (charpoly(lam + 1e-7) - charpoly(lam - 1e-7)) / 2e-7;
            assert!((charpoly(lam) / deriv).abs() < 1e-12, "root {lam}");
        }
        let norm: f64 = eig.first_components.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn decoupled_blocks() {
        // Tiny off-diagonal: deflation path.
        let eig = tridiag_eigen(&jacobi(&[1.0, 3.0, -2.0], &[0.0, 1e-300, 1.0])).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.first_components[1].abs(), 1.0, epsilon = 1e-14);
        let norm: f64 = eig.first_components.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-14);
    }
}
