//! Bingham-distributed boundary coefficients.
//!
//! Each candidate's coefficient vector β is constrained to the unit 3-sphere,
//! so its posterior is a Bingham distribution parameterized in information
//! form by a symmetric PSD matrix `C⁻¹`. Only two things are ever needed from
//! it: the mode (minimum-eigenvalue eigenvector of `C⁻¹`) and the natural
//! additive measurement update `C⁻¹ ← C⁻¹ + Σ γ φφᵀ/σ²`. Motion prediction
//! passes through covariance form, `C⁻¹ ← (F C Fᵀ + Q)⁻¹`, since the Bingham
//! family is not closed under the affine coefficient transition.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{BasisVector, BoundaryCoefficients, GeometryError};
use crate::linalg::{self, symmetrize, EigenError};

/// Inversions regularize with a ridge of `RIDGE_SCALE · trace/4 · I` once the
/// condition number exceeds [`MAX_CONDITION`].
pub const MAX_CONDITION: f64 = 1e12;
const RIDGE_SCALE: f64 = 1e-9;

/// Prior concentration `εI` for a freshly accepted candidate.
pub const NEW_CANDIDATE_PRIOR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BinghamError {
    #[error("concentration matrix must be finite and symmetric within 1e-10")]
    NotSymmetric,
    #[error("concentration matrix must be positive semidefinite (min eigenvalue {0})")]
    NotPositiveSemidefinite(f64),
    #[error("eigen iteration failed: {0}")]
    EigenFailure(#[from] EigenError),
    #[error("state is singular and cannot be inverted even with the regularization ridge")]
    SingularState,
    #[error("update term {index} is invalid: gamma={gamma}, sigma2={sigma2}")]
    InvalidTerm { index: usize, gamma: f64, sigma2: f64 },
    #[error("invalid motion delta (dx={dx}, dy={dy}, dpsi={dpsi})")]
    InvalidMotion { dx: f64, dy: f64, dpsi: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Planar rigid motion of the radar between two frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionDelta {
    dx: f64,
    dy: f64,
    dpsi: f64,
}

impl MotionDelta {
    pub fn new(dx: f64, dy: f64, dpsi: f64) -> Result<Self, BinghamError> {
        let ok = dx.is_finite() && dy.is_finite() && dpsi.is_finite() && dpsi.abs() < std::f64::consts::PI;
        if !ok {
            return Err(BinghamError::InvalidMotion { dx, dy, dpsi });
        }
        Ok(Self { dx, dy, dpsi })
    }

    pub fn zero() -> Self {
        Self { dx: 0.0, dy: 0.0, dpsi: 0.0 }
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn dpsi(&self) -> f64 {
        self.dpsi
    }
}

/// Additive process noise `Q` applied in covariance form during prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessNoise {
    q: Matrix4<f64>,
}

impl ProcessNoise {
    /// Diagonal noise with one scale per coefficient. The defaults elsewhere
    /// reflect the mixed units of β (curvature² down to the constant term).
    pub fn diagonal(scales: [f64; 4]) -> Result<Self, BinghamError> {
        if scales.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(BinghamError::NotPositiveSemidefinite(
                scales.iter().cloned().fold(f64::INFINITY, f64::min),
            ));
        }
        Ok(Self {
            q: Matrix4::from_diagonal(&Vector4::from_column_slice(&scales)),
        })
    }

    pub fn zero() -> Self {
        Self { q: Matrix4::zeros() }
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.q
    }
}

/// One weighted pseudo-observation entering the Eq.-style additive update.
#[derive(Debug, Clone, Copy)]
pub struct UpdateTerm {
    pub gamma: f64,
    pub phi: BasisVector,
    pub sigma2: f64,
}

/// Information-form Bingham state over boundary coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BinghamState {
    cinv: Matrix4<f64>,
}

impl BinghamState {
    pub fn new(cinv: Matrix4<f64>) -> Result<Self, BinghamError> {
        if !cinv.iter().all(|x| x.is_finite()) {
            return Err(BinghamError::NotSymmetric);
        }
        let scale = cinv.norm().max(1.0);
        if (cinv - cinv.transpose()).norm() > 1e-10 * scale {
            return Err(BinghamError::NotSymmetric);
        }
        let cinv = symmetrize(&cinv);
        let eig = linalg::sym_eigen4(&cinv)?;
        if eig.eigenvalues[0] < -1e-10 * scale {
            return Err(BinghamError::NotPositiveSemidefinite(eig.eigenvalues[0]));
        }
        Ok(Self { cinv })
    }

    /// `εI`: the maximally uninformative (isotropic) concentration.
    pub fn isotropic(eps: f64) -> Self {
        Self {
            cinv: Matrix4::identity() * eps,
        }
    }

    pub fn cinv(&self) -> &Matrix4<f64> {
        &self.cinv
    }

    /// Mode of the distribution: unit eigenvector of the minimum eigenvalue
    /// of `C⁻¹β = λβ`, sign-fixed by [`BoundaryCoefficients::normalize`].
    pub fn mode(
        &self,
        reference: Option<&BoundaryCoefficients>,
    ) -> Result<BoundaryCoefficients, BinghamError> {
        let eig = linalg::sym_eigen4(&self.cinv)?;
        let v = eig.eigenvectors.column(0).into_owned();
        Ok(BoundaryCoefficients::normalize(v, reference)?)
    }

    /// Measurement update `C⁻¹ + Σᵢ γᵢ φᵢφᵢᵀ/σᵢ²`. Additive and independent
    /// of term order up to floating-point round-off.
    pub fn update<I>(&self, terms: I) -> Result<BinghamState, BinghamError>
    where
        I: IntoIterator<Item = UpdateTerm>,
    {
        let mut acc = self.cinv;
        for (index, term) in terms.into_iter().enumerate() {
            if !(term.sigma2 > 0.0) || !(0.0..=1.0).contains(&term.gamma) {
                return Err(BinghamError::InvalidTerm {
                    index,
                    gamma: term.gamma,
                    sigma2: term.sigma2,
                });
            }
            if term.gamma == 0.0 {
                continue;
            }
            let w = term.gamma / term.sigma2;
            acc += w * (term.phi * term.phi.transpose());
        }
        Ok(BinghamState { cinv: acc })
    }
}

/// Coefficient transition matrix `F` for a rigid radar motion: the conic that
/// fits the same world curve, re-expressed in the moved frame.
pub fn motion_matrix(m: &MotionDelta) -> Matrix4<f64> {
    let (s, c) = m.dpsi.sin_cos();
    let (dx, dy) = (m.dx, m.dy);
    Matrix4::new(
        1.0,
        0.0,
        0.0,
        0.0,
        2.0 * (dx * c + dy * s),
        c,
        s,
        0.0,
        2.0 * (dy * c - dx * s),
        -s,
        c,
        0.0,
        dx * dx + dy * dy,
        dx,
        dy,
        1.0,
    )
}

/// Motion prediction `C⁻¹ ← (F C Fᵀ + Q)⁻¹`.
pub fn predict(
    state: &BinghamState,
    m: &MotionDelta,
    q: &ProcessNoise,
) -> Result<BinghamState, BinghamError> {
    let c = invert_spd(&state.cinv)?;
    let f = motion_matrix(m);
    let predicted_cov = symmetrize(&(f * c * f.transpose())) + q.matrix();
    let cinv = invert_spd(&predicted_cov)?;
    Ok(BinghamState { cinv })
}

/// Inverts a symmetric PSD matrix through its spectral decomposition, adding
/// the regularization ridge when it is singular or too ill-conditioned.
fn invert_spd(m: &Matrix4<f64>) -> Result<Matrix4<f64>, BinghamError> {
    let eig = linalg::sym_eigen4(m)?;
    let lmin = eig.eigenvalues[0];
    let lmax = eig.eigenvalues[3];
    let needs_ridge = lmin <= 0.0 || lmax / lmin > MAX_CONDITION;
    let ridge = if needs_ridge {
        RIDGE_SCALE * m.trace().abs() / 4.0
    } else {
        0.0
    };
    if lmin + ridge <= 0.0 {
        return Err(BinghamError::SingularState);
    }
    Ok(eig.map_rebuild(|l| 1.0 / (l + ridge)))
}
