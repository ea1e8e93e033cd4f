//! Eigen-decomposition of symmetric 4×4 matrices via the cyclic Jacobi method.
//!
//! Everything downstream (Bingham modes, covariance inversion, 3-point conic
//! fits) reduces to the spectral decomposition of a symmetric 4×4 matrix. At
//! this size a cyclic Jacobi sweep is deterministic, pivot-free, and accurate
//! to machine precision, so we use it everywhere instead of a general-purpose
//! eigensolver.

use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

/// Hard cap on Jacobi sweeps. A symmetric 4×4 converges in a handful of
/// sweeps; hitting the cap means the input was not a finite symmetric matrix.
pub const MAX_JACOBI_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EigenError {
    #[error("Jacobi iteration did not converge within {MAX_JACOBI_SWEEPS} sweeps")]
    NoConvergence,
}

/// Spectral decomposition `A = V diag(λ) Vᵀ` with eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen4 {
    /// Eigenvalues sorted ascending.
    pub eigenvalues: Vector4<f64>,
    /// Column `j` is the unit eigenvector paired with `eigenvalues[j]`.
    pub eigenvectors: Matrix4<f64>,
}

impl SymEigen4 {
    /// Reassembles `V f(diag) Vᵀ`, applying `f` to each eigenvalue.
    pub fn map_rebuild(&self, f: impl Fn(f64) -> f64) -> Matrix4<f64> {
        let d = Matrix4::from_diagonal(&self.eigenvalues.map(f));
        let m = self.eigenvectors * d * self.eigenvectors.transpose();
        symmetrize(&m)
    }
}

/// Exact symmetrization `(M + Mᵀ)/2`; used to cancel round-off drift after
/// products of the form `V D Vᵀ`.
pub fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    0.5 * (m + m.transpose())
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 4×4 matrix.
///
/// Rotations are applied in a fixed (p, q) order each sweep, which makes the
/// result deterministic for identical inputs. Convergence is declared when
/// the off-diagonal Frobenius norm drops below `1e-14` times the matrix
/// scale.
pub fn sym_eigen4(m: &Matrix4<f64>) -> Result<SymEigen4, EigenError> {
    let mut a = symmetrize(m);
    let mut v = Matrix4::<f64>::identity();

    let scale = a.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;

    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let off = off_diagonal_norm(&a);
        if !off.is_finite() {
            return Err(EigenError::NoConvergence);
        }
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > tol {
        return Err(EigenError::NoConvergence);
    }

    // Sort eigenpairs ascending by eigenvalue.
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).expect("finite eigenvalues"));
    let eigenvalues = Vector4::from_fn(|i, _| a[(order[i], order[i])]);
    let eigenvectors = Matrix4::from_fn(|r, c| v[(r, order[c])]);

    Ok(SymEigen4 {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &Matrix4<f64>) -> f64 {
    let mut s = 0.0;
    for p in 0..3 {
        for q in (p + 1)..4 {
            s += a[(p, q)] * a[(p, q)];
        }
    }
    (2.0 * s).sqrt()
}

/// One Jacobi rotation annihilating `a[(p, q)]`, accumulated into `v`.
fn rotate(a: &mut Matrix4<f64>, v: &mut Matrix4<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    // Smaller-angle root of t² + 2tθ − 1 = 0 for stability.
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for i in 0..4 {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = c * aip - s * aiq;
        a[(i, q)] = s * aip + c * aiq;
    }
    for j in 0..4 {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = c * apj - s * aqj;
        a[(q, j)] = s * apj + c * aqj;
    }
    for i in 0..4 {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = c * vip - s * viq;
        v[(i, q)] = s * vip + c * viq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut impl Rng) -> Matrix4<f64> {
        let m = Matrix4::from_fn(|_, _| rng.random_range(-2.0..2.0));
        symmetrize(&m)
    }

    #[test]
    fn diagonal_matrix_is_its_own_decomposition() {
        let m = Matrix4::from_diagonal(&Vector4::new(5.0, 4.0, 3.0, 1.0));
        let e = sym_eigen4(&m).unwrap();
        assert_abs_diff_eq!(e.eigenvalues, Vector4::new(1.0, 3.0, 4.0, 5.0), epsilon = 1e-14);
        // Min-eigenvalue eigenvector is the last axis.
        assert_abs_diff_eq!(e.eigenvectors.column(0).abs(), Vector4::new(0.0, 0.0, 0.0, 1.0), epsilon = 1e-14);
    }

    #[test]
    fn zero_matrix_converges_immediately() {
        let e = sym_eigen4(&Matrix4::zeros()).unwrap();
        assert_eq!(e.eigenvalues, Vector4::zeros());
    }

    #[test]
    fn reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = random_symmetric(&mut rng);
            let e = sym_eigen4(&m).unwrap();
            let rebuilt = e.map_rebuild(|l| l);
            assert_abs_diff_eq!(rebuilt, m, epsilon = 1e-12);
            // Orthonormal eigenvectors.
            let vtv = e.eigenvectors.transpose() * e.eigenvectors;
            assert_abs_diff_eq!(vtv, Matrix4::identity(), epsilon = 1e-12);
            // Ascending order.
            for i in 0..3 {
                assert!(e.eigenvalues[i] <= e.eigenvalues[i + 1]);
            }
        }
    }

    #[test]
    fn matches_nalgebra_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let m = random_symmetric(&mut rng);
            let ours = sym_eigen4(&m).unwrap();
            let mut reference = m.symmetric_eigenvalues().as_slice().to_vec();
            reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for i in 0..4 {
                assert_abs_diff_eq!(ours.eigenvalues[i], reference[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rejects_nonfinite_input() {
        let mut m = Matrix4::identity();
        m[(0, 1)] = f64::NAN;
        m[(1, 0)] = f64::NAN;
        assert_eq!(sym_eigen4(&m), Err(EigenError::NoConvergence));
    }
}
