//! Outlier-weighted RANSAC proposal of new boundary candidates.
//!
//! Variational inference only refines the candidates it is given, so unseen
//! boundaries have to be proposed from the data. Each proposal round draws a
//! minimal 3-detection sample with probability proportional to the outlier
//! responsibilities, fits the conic exactly, and scores it by how much
//! expected outlier mass it would absorb if added to the mixture with a
//! pseudo-count of 3. Sampling stops once the best score is confident enough
//! or the iteration budget runs out; the best proposal is accepted only if it
//! explains more than the acceptance threshold's worth of points.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bingham::{BinghamState, UpdateTerm, NEW_CANDIDATE_PRIOR_EPS};
use crate::conic::{self, BoundaryCoefficients, FieldOfView, GeometryError};
use crate::mixture::{self, Candidate, Datagram, MixtureError, MixtureState, Responsibilities, SIGMA2_FLOOR};

/// Dirichlet pseudo-count a proposal carries while being scored and when it
/// is first accepted: the minimal sample size.
pub const PROPOSAL_PSEUDO_COUNT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProposalError {
    #[error("need at least {needed} detections with positive outlier weight, found {found}")]
    InsufficientOutliers { needed: usize, found: usize },
    #[error("invalid proposer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Knobs of the proposal loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposerConfig {
    /// Stop sampling once the confidence of the best proposal exceeds this.
    pub confidence_threshold: f64,
    /// Minimum expected outlier reduction for a proposal to be accepted.
    /// Should stay above the minimal sample size of 3.
    pub acceptance_threshold: f64,
    /// Hard cap on sampling iterations (degenerate samples included).
    pub max_iterations: usize,
    /// Seed for the tracker-owned ChaCha8 stream.
    pub rng_seed: u64,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.99,
            // Real boundaries carry well over ten points' worth of outlier
            // mass when first seen; stray conics through dense clutter top
            // out around seven. Eight rejects the latter without touching
            // the former.
            acceptance_threshold: 8.0,
            max_iterations: 500,
            rng_seed: 0,
        }
    }
}

impl ProposerConfig {
    pub fn validate(&self) -> Result<(), ProposalError> {
        if !(self.confidence_threshold > 0.0 && self.confidence_threshold < 1.0) {
            return Err(ProposalError::InvalidConfig(format!(
                "confidence_threshold {} must lie in (0, 1)",
                self.confidence_threshold
            )));
        }
        if !(self.acceptance_threshold > PROPOSAL_PSEUDO_COUNT) {
            return Err(ProposalError::InvalidConfig(format!(
                "acceptance_threshold {} must exceed the minimal sample size 3",
                self.acceptance_threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(ProposalError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// An accepted candidate proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub beta: BoundaryCoefficients,
    /// Expected outlier-count reduction ξ.
    pub score: f64,
    /// The minimal sample that produced the fit.
    pub sample_indices: [usize; 3],
}

/// Weighted sampling without replacement of `k` distinct indices, with
/// per-index inclusion driven by `weights` (zero-weight entries are never
/// drawn).
///
/// Implements reservoir sampling with exponential jumps in its simplest
/// top-`k` form: every index draws one uniform `u` from `rng` in index order
/// and receives the key `u^(1/w)`; the `k` largest keys win. The draw order
/// is part of the format contract so that seeded runs can be replicated
/// elsewhere.
pub fn weighted_sample<R: Rng + ?Sized>(
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>, ProposalError> {
    let positive = weights.iter().filter(|w| **w > 0.0).count();
    if positive < k {
        return Err(ProposalError::InsufficientOutliers { needed: k, found: positive });
    }
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random();
            let key = if w > 0.0 { u.powf(1.0 / w) } else { -1.0 };
            (key, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(keyed[..k].iter().map(|(_, i)| *i).collect())
}

/// Scores a proposal: the expected number of points leaving the outlier
/// class when `beta_prime` joins the mixture with pseudo-count 3.
///
/// Note the printed form of the score sums `γ′ − γ`, which is non-positive
/// for a useful proposal; what the confidence ratio and the "greatest score
/// wins" rule actually need is the outlier *reduction*, so this returns
/// `Σᵢ (γᵢ₀ − γ′ᵢ₀)` — larger is better.
pub fn score(
    beta_prime: &BoundaryCoefficients,
    z: &Datagram,
    mixture: &MixtureState,
    gamma: &Responsibilities,
    fov: &FieldOfView,
) -> f64 {
    match scored_e_step(beta_prime, z, mixture, fov) {
        Ok(gamma_prime) => {
            let before = gamma.column_sum(0);
            let after = gamma_prime.column_sum(0);
            before - after
        }
        // A proposal that cannot even be scored explains nothing.
        Err(_) => f64::NEG_INFINITY,
    }
}

/// One E-step over the augmented mixture `B ∪ β′` with weights
/// `π′ = [αᵀ, 3]ᵀ / ‖·‖₁`.
fn scored_e_step(
    beta_prime: &BoundaryCoefficients,
    z: &Datagram,
    mixture: &MixtureState,
    fov: &FieldOfView,
) -> Result<Responsibilities, MixtureError> {
    let mut augmented = mixture.clone();
    let placeholder = Candidate::with_mode(
        u64::MAX,
        BinghamState::isotropic(NEW_CANDIDATE_PRIOR_EPS),
        *beta_prime,
    );
    augmented.push_candidate(placeholder, PROPOSAL_PSEUDO_COUNT)?;
    let pi_prime = mixture::expected_pi(augmented.alpha(), None);
    mixture::e_step(z, &augmented, &pi_prime, fov)
}

/// Seed Bingham state for an accepted proposal: the `εI` prior plus one
/// measurement update weighted by the scoring E-step's responsibilities for
/// the new class. Warm-starts the next variational round.
pub fn seed_candidate_state(
    beta: &BoundaryCoefficients,
    z: &Datagram,
    mixture: &MixtureState,
    fov: &FieldOfView,
) -> Result<BinghamState, ProposalError> {
    let gamma_prime = scored_e_step(beta, z, mixture, fov)?;
    let new_class = gamma_prime.classes() - 1;
    let mut terms = Vec::with_capacity(z.len());
    for (i, det) in z.detections.iter().enumerate() {
        let s2 = conic::pseudo_variance(beta, det.point(), &det.noise_covariance())?.max(SIGMA2_FLOOR);
        terms.push(UpdateTerm {
            gamma: gamma_prime.gamma(i, new_class),
            phi: conic::basis(det.point()),
            sigma2: s2,
        });
    }
    Ok(BinghamState::isotropic(NEW_CANDIDATE_PRIOR_EPS)
        .update(terms)
        .map_err(MixtureError::from)?)
}

/// Confidence that no better proposal remains after `iterations` samples,
/// given the best outlier-reduction ratio so far:
/// `1 − (1 − ratio³)^j`.
pub fn confidence(best_score: f64, total_outlier_mass: f64, iterations: usize) -> f64 {
    if total_outlier_mass <= 0.0 {
        return 1.0;
    }
    let ratio = (best_score / total_outlier_mass).clamp(0.0, 1.0);
    1.0 - (1.0 - ratio.powi(3)).powi(iterations as i32)
}

/// Full proposal loop: sample → fit → score, tracking the best ξ, until the
/// confidence threshold or the iteration cap is reached. Returns a proposal
/// only when its score clears the acceptance threshold. Degenerate samples
/// are skipped but still consume an iteration.
pub fn propose<R: Rng + ?Sized>(
    z: &Datagram,
    mixture: &MixtureState,
    gamma: &Responsibilities,
    fov: &FieldOfView,
    cfg: &ProposerConfig,
    rng: &mut R,
) -> Option<Proposal> {
    let outlier_weights = gamma.outlier_weights();
    let total_outlier_mass: f64 = outlier_weights.iter().sum();
    // ξ can never exceed the available outlier mass, so when that mass is
    // at or below the acceptance bar there is nothing to propose.
    if total_outlier_mass <= cfg.acceptance_threshold {
        return None;
    }

    let mut best: Option<Proposal> = None;
    for iteration in 1..=cfg.max_iterations {
        let indices = match weighted_sample(&outlier_weights, 3, rng) {
            Ok(v) => v,
            Err(_) => return None,
        };
        let fit = conic::fit_exact(
            z.detections[indices[0]].point(),
            z.detections[indices[1]].point(),
            z.detections[indices[2]].point(),
        );
        if let Ok(beta) = fit {
            let xi = score(&beta, z, mixture, gamma, fov);
            // Strict improvement keeps the earliest of tied proposals.
            if best.as_ref().is_none_or(|b| xi > b.score) {
                best = Some(Proposal {
                    beta,
                    score: xi,
                    sample_indices: [indices[0], indices[1], indices[2]],
                });
            }
        }
        let best_score = best.as_ref().map_or(0.0, |b| b.score);
        if confidence(best_score, total_outlier_mass, iteration) > cfg.confidence_threshold {
            break;
        }
    }
    best.filter(|p| p.score > cfg.acceptance_threshold)
}
