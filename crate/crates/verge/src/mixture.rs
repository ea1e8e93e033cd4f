//! Mean-field variational inference over the roadway mixture.
//!
//! Detections are generated by a Dirichlet process mixture with `K + 1`
//! classes: class 0 is a uniform outlier model over the field of view and
//! classes `1..=K` are boundary candidates whose implicit residual
//! `βᵀφ(z)` is Gaussian with the propagated pseudo-variance. Inference
//! alternates a responsibility E-step with closed-form M-steps for the
//! Dirichlet weights and the Bingham concentrations until the
//! responsibilities stop moving.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bingham::{BinghamError, BinghamState, UpdateTerm};
use crate::conic::{self, BoundaryCoefficients, FieldOfView, GeometryError, PolarPoint};

/// Pseudo-variances are clamped below by this before entering a density or an
/// information update. The first-order propagation collapses to zero for rays
/// tangent to the curve, which would otherwise give single detections nearly
/// infinite weight; a (1 cm)² floor is far below real sensor noise while
/// keeping densities and information contributions bounded.
pub const SIGMA2_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixtureError {
    #[error("detection noise must be positive (sigma_r={sigma_r}, sigma_theta={sigma_theta})")]
    InvalidNoise { sigma_r: f64, sigma_theta: f64 },
    #[error("alpha concentrations must be positive and finite")]
    InvalidAlpha,
    #[error("responsibility row {row} underflowed for every class")]
    AllZeroRow { row: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bingham(#[from] BinghamError),
}

/// One radar target detection with its reported polar noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    point: PolarPoint,
    sigma_r: f64,
    sigma_theta: f64,
}

impl Detection {
    pub fn new(point: PolarPoint, sigma_r: f64, sigma_theta: f64) -> Result<Self, MixtureError> {
        if !(sigma_r > 0.0 && sigma_theta > 0.0 && sigma_r.is_finite() && sigma_theta.is_finite()) {
            return Err(MixtureError::InvalidNoise { sigma_r, sigma_theta });
        }
        Ok(Self {
            point,
            sigma_r,
            sigma_theta,
        })
    }

    pub fn point(&self) -> &PolarPoint {
        &self.point
    }

    pub fn sigma_r(&self) -> f64 {
        self.sigma_r
    }

    pub fn sigma_theta(&self) -> f64 {
        self.sigma_theta
    }

    /// Diagonal polar noise covariance `diag(σ_r², σ_θ²)`.
    pub fn noise_covariance(&self) -> nalgebra::Matrix2<f64> {
        nalgebra::Matrix2::from_diagonal(&nalgebra::Vector2::new(
            self.sigma_r * self.sigma_r,
            self.sigma_theta * self.sigma_theta,
        ))
    }
}

/// All detections received from one radar pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datagram {
    pub timestamp: f64,
    pub detections: Vec<Detection>,
}

impl Datagram {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

/// One boundary candidate: its Bingham concentration plus the cached mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    id: u64,
    bingham: BinghamState,
    mode: BoundaryCoefficients,
}

impl Candidate {
    /// Builds a candidate, extracting and caching the mode. The sign is
    /// aligned to `reference` when given.
    pub fn new(
        id: u64,
        bingham: BinghamState,
        reference: Option<&BoundaryCoefficients>,
    ) -> Result<Self, BinghamError> {
        let mode = bingham.mode(reference)?;
        Ok(Self { id, bingham, mode })
    }

    /// Builds a candidate with an explicitly chosen mode. Used for proposal
    /// scoring where the state is isotropic and every direction is modal.
    pub(crate) fn with_mode(id: u64, bingham: BinghamState, mode: BoundaryCoefficients) -> Self {
        Self { id, bingham, mode }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn bingham(&self) -> &BinghamState {
        &self.bingham
    }

    pub fn mode(&self) -> &BoundaryCoefficients {
        &self.mode
    }
}

/// Outlier class plus `K` candidates with their Dirichlet concentrations.
///
/// `alpha[0]` always belongs to the outlier class; `alpha[k]` to
/// `candidates[k - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    alpha: Vec<f64>,
    candidates: Vec<Candidate>,
}

impl MixtureState {
    /// A mixture holding only the outlier class.
    pub fn outlier_only(outlier_alpha: f64) -> Result<Self, MixtureError> {
        if !(outlier_alpha > 0.0 && outlier_alpha.is_finite()) {
            return Err(MixtureError::InvalidAlpha);
        }
        Ok(Self {
            alpha: vec![outlier_alpha],
            candidates: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    pub fn classes(&self) -> usize {
        self.candidates.len() + 1
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn push_candidate(&mut self, candidate: Candidate, alpha: f64) -> Result<(), MixtureError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(MixtureError::InvalidAlpha);
        }
        self.candidates.push(candidate);
        self.alpha.push(alpha);
        Ok(())
    }

    /// Removes candidate `class` (1-based class index) together with its alpha.
    pub fn remove_class(&mut self, class: usize) {
        assert!(class >= 1 && class < self.classes(), "cannot remove the outlier class");
        self.alpha.remove(class);
        self.candidates.remove(class - 1);
    }

    pub fn set_alpha(&mut self, alpha: Vec<f64>) -> Result<(), MixtureError> {
        if alpha.len() != self.classes() {
            return Err(MixtureError::ShapeMismatch(format!(
                "alpha length {} != classes {}",
                alpha.len(),
                self.classes()
            )));
        }
        if alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(MixtureError::InvalidAlpha);
        }
        self.alpha = alpha;
        Ok(())
    }

    pub(crate) fn replace_candidate(&mut self, index: usize, candidate: Candidate) {
        self.candidates[index] = candidate;
    }

    /// Prior Bingham states re-paired with the mode cache of a later iterate,
    /// so a fresh posterior can be rebuilt from the same prior while the
    /// pseudo-variance is linearized at the current modes.
    pub(crate) fn with_modes_from(&self, current: &MixtureState) -> MixtureState {
        debug_assert_eq!(self.k(), current.k());
        let mut out = self.clone();
        for (i, cand) in current.candidates().iter().enumerate() {
            let prior = &out.candidates[i];
            out.candidates[i] = Candidate::with_mode(prior.id, prior.bingham.clone(), *cand.mode());
        }
        out
    }
}

/// Posterior class responsibilities `γ`, one row per detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    gamma: DMatrix<f64>,
}

impl Responsibilities {
    /// Wraps an explicit responsibility matrix. Every row must be a
    /// distribution over classes (entries in `[0, 1]`, summing to 1).
    pub fn from_matrix(gamma: DMatrix<f64>) -> Result<Self, MixtureError> {
        for i in 0..gamma.nrows() {
            let row = gamma.row(i);
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|g| !(0.0..=1.0).contains(g)) {
                return Err(MixtureError::ShapeMismatch(format!(
                    "row {i} is not a distribution (sum {sum})"
                )));
            }
        }
        Ok(Self { gamma })
    }

    pub fn rows(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn classes(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn gamma(&self, detection: usize, class: usize) -> f64 {
        self.gamma[(detection, class)]
    }

    /// Expected number of points in `class`: `Σᵢ γᵢₖ`.
    pub fn column_sum(&self, class: usize) -> f64 {
        self.gamma.column(class).sum()
    }

    /// Outlier responsibilities `γ_·0` as a vector.
    pub fn outlier_weights(&self) -> Vec<f64> {
        self.gamma.column(0).iter().cloned().collect()
    }

    /// Largest entry-wise difference against another responsibility matrix.
    pub fn max_abs_diff(&self, other: &Responsibilities) -> f64 {
        assert_eq!(self.gamma.shape(), other.gamma.shape());
        if self.gamma.is_empty() {
            return 0.0;
        }
        (&self.gamma - &other.gamma).abs().max()
    }
}

/// How the mixture weights enter the E-step densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiExpectation {
    /// `E[π_k]` — the arithmetic posterior mean the update equations use.
    #[default]
    Mean,
    /// `exp(E[log π_k])` — the canonical mean-field geometric variant, kept
    /// selectable for comparison.
    GeometricMean,
}

/// Tolerances of the variational loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfviConfig {
    /// Convergence threshold on `max|Δγ|`.
    pub tol_gamma: f64,
    /// Iteration cap; hitting it is reported, not an error.
    pub max_iters: usize,
    pub pi_expectation: PiExpectation,
}

impl Default for MfviConfig {
    fn default() -> Self {
        Self {
            tol_gamma: 1e-4,
            max_iters: 50,
            pi_expectation: PiExpectation::Mean,
        }
    }
}

/// Converged output of [`run_mfvi`].
#[derive(Debug, Clone)]
pub struct MfviResult {
    pub mixture: MixtureState,
    pub gamma: Responsibilities,
    /// Expected mixture weights for the final responsibilities.
    pub pi: Vec<f64>,
    /// Number of full E/M iterations performed.
    pub iterations: usize,
    pub converged: bool,
    /// Candidates whose Bingham update failed; flagged for pruning.
    pub invalid_candidates: Vec<u64>,
}

/// Posterior expectation of the mixture weights:
/// `(α_k + Σᵢγᵢₖ) / Σⱼ(α_j + Σᵢγᵢⱼ)`. Without responsibilities this is the
/// prior expectation `α/‖α‖₁`, which is what the proposer uses.
pub fn expected_pi(alpha: &[f64], gamma: Option<&Responsibilities>) -> Vec<f64> {
    let mut hat: Vec<f64> = alpha.to_vec();
    if let Some(g) = gamma {
        for (k, h) in hat.iter_mut().enumerate() {
            *h += g.column_sum(k);
        }
    }
    let total: f64 = hat.iter().sum();
    hat.iter().map(|h| h / total).collect()
}

/// Geometric-mean weights `exp(E[log π_k]) = exp(ψ(α̂_k) − ψ(Σα̂))`.
pub fn expected_pi_geometric(alpha: &[f64], gamma: Option<&Responsibilities>) -> Vec<f64> {
    let mut hat: Vec<f64> = alpha.to_vec();
    if let Some(g) = gamma {
        for (k, h) in hat.iter_mut().enumerate() {
            *h += g.column_sum(k);
        }
    }
    let total: f64 = hat.iter().sum();
    let psi_total = statrs::function::gamma::digamma(total);
    hat.iter()
        .map(|h| (statrs::function::gamma::digamma(*h) - psi_total).exp())
        .collect()
}

/// E-step: responsibilities `γᵢₖ ∝ w_k · p(zᵢ | class k)` computed in log
/// space with per-row max subtraction.
///
/// The outlier density is uniform over the field-of-view rectangle; each
/// candidate contributes a Gaussian density of its implicit residual at the
/// cached mode, with variance from [`conic::pseudo_variance`].
pub fn e_step(
    z: &Datagram,
    mixture: &MixtureState,
    weights: &[f64],
    fov: &FieldOfView,
) -> Result<Responsibilities, MixtureError> {
    let classes = mixture.classes();
    if weights.len() != classes {
        return Err(MixtureError::ShapeMismatch(format!(
            "{} weights for {} classes",
            weights.len(),
            classes
        )));
    }
    let n = z.len();
    let log_uniform = fov.uniform_density().ln();
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();

    let mut gamma = DMatrix::<f64>::zeros(n, classes);
    let mut log_rho = vec![0.0_f64; classes];
    for (i, det) in z.detections.iter().enumerate() {
        log_rho[0] = log_w[0] + log_uniform;
        for (ci, cand) in mixture.candidates().iter().enumerate() {
            let h = conic::evaluate(cand.mode(), det.point());
            let s2 = conic::pseudo_variance(cand.mode(), det.point(), &det.noise_covariance())?
                .max(SIGMA2_FLOOR);
            let log_pdf = -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - h * h / (2.0 * s2);
            log_rho[ci + 1] = log_w[ci + 1] + log_pdf;
        }
        let m = log_rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(MixtureError::AllZeroRow { row: i });
        }
        let mut sum = 0.0;
        for k in 0..classes {
            let e = (log_rho[k] - m).exp();
            gamma[(i, k)] = e;
            sum += e;
        }
        for k in 0..classes {
            gamma[(i, k)] /= sum;
        }
    }
    Ok(Responsibilities { gamma })
}

/// M-step for the Bingham concentrations: each candidate receives the
/// additive update with terms `(γᵢₖ, φ(zᵢ), σᵢₖ²)`, the pseudo-variance being
/// evaluated at the pre-update mode. Modes are re-extracted sign-aligned to
/// their previous values. Candidates whose eigen extraction fails keep their
/// old state and are reported for pruning.
pub fn m_step(
    z: &Datagram,
    gamma: &Responsibilities,
    mixture: &MixtureState,
) -> Result<(MixtureState, Vec<u64>), MixtureError> {
    if gamma.rows() != z.len() || gamma.classes() != mixture.classes() {
        return Err(MixtureError::ShapeMismatch(format!(
            "gamma {}x{} vs {} detections, {} classes",
            gamma.rows(),
            gamma.classes(),
            z.len(),
            mixture.classes()
        )));
    }
    let mut out = mixture.clone();
    let mut invalid = Vec::new();
    for (ci, cand) in mixture.candidates().iter().enumerate() {
        let class = ci + 1;
        let mut terms = Vec::with_capacity(z.len());
        for (i, det) in z.detections.iter().enumerate() {
            let s2 = conic::pseudo_variance(cand.mode(), det.point(), &det.noise_covariance())?
                .max(SIGMA2_FLOOR);
            terms.push(UpdateTerm {
                gamma: gamma.gamma(i, class),
                phi: conic::basis(det.point()),
                sigma2: s2,
            });
        }
        let updated = cand
            .bingham()
            .update(terms)
            .and_then(|b| Candidate::new(cand.id(), b, Some(cand.mode())));
        match updated {
            Ok(new_cand) => out.replace_candidate(ci, new_cand),
            Err(BinghamError::EigenFailure(_)) => invalid.push(cand.id()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok((out, invalid))
}

/// Runs the full variational loop until `max|Δγ| < tol_gamma` or the
/// iteration cap. Non-convergence is reported through the `converged` flag.
///
/// The Bingham M-step is rebuilt from the frame's prior concentration on
/// every iteration (only the responsibilities and the linearization point
/// move); accumulating onto the previous iterate would count the same
/// detections once per iteration.
pub fn run_mfvi(
    z: &Datagram,
    mixture: MixtureState,
    fov: &FieldOfView,
    cfg: &MfviConfig,
) -> Result<MfviResult, MixtureError> {
    let weights_of = |mix: &MixtureState, gamma: Option<&Responsibilities>| match cfg.pi_expectation {
        PiExpectation::Mean => expected_pi(mix.alpha(), gamma),
        PiExpectation::GeometricMean => expected_pi_geometric(mix.alpha(), gamma),
    };

    let prior = mixture;
    let mut current = prior.clone();
    let mut gamma = e_step(z, &current, &weights_of(&current, None), fov)?;
    let mut invalid = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        let weights = weights_of(&current, Some(&gamma));
        let base = prior.with_modes_from(&current);
        let (next_mix, mut bad) = m_step(z, &gamma, &base)?;
        invalid.append(&mut bad);
        let next_gamma = e_step(z, &next_mix, &weights, fov)?;
        iterations += 1;
        let delta = next_gamma.max_abs_diff(&gamma);
        current = next_mix;
        gamma = next_gamma;
        if delta < cfg.tol_gamma {
            converged = true;
            break;
        }
    }

    invalid.sort_unstable();
    invalid.dedup();
    let pi = expected_pi(current.alpha(), Some(&gamma));
    Ok(MfviResult {
        mixture: current,
        gamma,
        pi,
        iterations,
        converged,
        invalid_candidates: invalid,
    })
}
