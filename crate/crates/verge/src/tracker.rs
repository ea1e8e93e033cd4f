//! Per-frame boundary tracking.
//!
//! One `step` per datagram: predict every candidate under the known radar
//! motion, alternate variational inference with RANSAC proposals until no
//! proposal is accepted, refresh the Dirichlet concentrations as a moving
//! average of expected support, prune starved or invalid candidates, and
//! report the left/right boundaries by nearest y-intercept.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bingham::{self, BinghamError, MotionDelta, ProcessNoise};
use crate::conic::{self, BoundaryCoefficients, FieldOfView, GeometryError};
use crate::mixture::{
    run_mfvi, Candidate, Datagram, MfviConfig, MixtureError, MixtureState, Responsibilities,
};
use crate::proposal::{self, ProposalError, ProposerConfig, PROPOSAL_PSEUDO_COUNT};

/// The outlier concentration is never allowed below this, so the Dirichlet
/// prior stays proper even when a frame contains no outliers and `c = 1`.
const MIN_OUTLIER_ALPHA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("datagram timestamps must increase: {prev} then {next}")]
    NonMonotonicTimestamp { prev: f64, next: f64 },
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bingham(#[from] BinghamError),
}

/// Everything the tracker needs to run; all values have working defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Moving-average weight `c` of the concentration update: 0 keeps the
    /// prior constant, 1 lets the current frame determine it entirely.
    pub smoothing: f64,
    /// Candidates whose concentration falls below this are removed.
    pub prune_threshold: f64,
    /// Additive prediction noise on the coefficient distribution.
    pub process_noise: ProcessNoise,
    pub proposer: ProposerConfig,
    pub mfvi: MfviConfig,
    /// Outlier-class concentration at start of tracking.
    pub initial_outlier_alpha: f64,
    /// Cap on accepted proposals per frame.
    pub max_proposal_rounds: usize,
    /// Estimates within the first frames are flagged provisional.
    pub warmup_frames: usize,
    pub fov: FieldOfView,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            smoothing: 0.3,
            prune_threshold: 2.0,
            // Sized so several frames of measurement information can
            // accumulate before the random walk forgets it; the basis has
            // mixed units, hence the per-coefficient spread.
            process_noise: ProcessNoise::diagonal([1e-9, 1e-6, 1e-5, 1e-4]).expect("valid default"),
            proposer: ProposerConfig::default(),
            mfvi: MfviConfig::default(),
            initial_outlier_alpha: 10.0,
            max_proposal_rounds: 5,
            warmup_frames: 3,
            fov: FieldOfView::new(40.0, -std::f64::consts::FRAC_PI_3, std::f64::consts::FRAC_PI_3)
                .expect("valid default"),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(TrackerError::InvalidConfig(format!(
                "smoothing {} must lie in [0, 1]",
                self.smoothing
            )));
        }
        if !(self.prune_threshold >= 0.0) {
            return Err(TrackerError::InvalidConfig(format!(
                "prune_threshold {} must be >= 0",
                self.prune_threshold
            )));
        }
        if !(self.initial_outlier_alpha > 0.0) {
            return Err(TrackerError::InvalidConfig(
                "initial_outlier_alpha must be positive".into(),
            ));
        }
        self.proposer.validate()?;
        Ok(())
    }
}

/// One reported boundary: coefficients plus the y-intercept that selected it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideEstimate {
    pub beta: BoundaryCoefficients,
    pub y_intercept: f64,
}

/// Per-frame bookkeeping surfaced with the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    /// Candidate count after pruning.
    pub candidates: usize,
    /// Variational iterations summed over proposal rounds.
    pub mfvi_iterations: usize,
    pub proposals_accepted: usize,
    /// Expected number of outlier points, `Σᵢ γᵢ₀`.
    pub outlier_mass: f64,
    /// Candidates dropped by prediction failures or invalid geometry.
    pub dropped_candidates: usize,
    /// True within the configured warm-up window.
    pub provisional: bool,
    /// True when the datagram carried no detections and the frame only
    /// carried predictions forward.
    pub empty_frame: bool,
}

/// Left/right boundary estimate for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub timestamp: f64,
    pub left: Option<SideEstimate>,
    pub right: Option<SideEstimate>,
    pub diagnostics: FrameDiagnostics,
}

/// Moving-average concentration update, applied to every class including the
/// outlier: `α_k ← (1−c)·α_k + c·Σᵢγᵢₖ`.
pub fn update_concentrations(alpha_prev: &[f64], gamma: &Responsibilities, c: f64) -> Vec<f64> {
    assert_eq!(alpha_prev.len(), gamma.classes(), "alpha/gamma shape mismatch");
    alpha_prev
        .iter()
        .enumerate()
        .map(|(k, a)| (1.0 - c) * a + c * gamma.column_sum(k))
        .collect()
}

/// Groups candidates by the sign of their y-intercept nearest the origin and
/// picks the nearest-intercept candidate on each side. Candidates without a
/// real intercept are ineligible; a circle crossing the y axis twice is
/// assigned by its crossing of smaller magnitude.
pub fn select_boundaries(
    modes: &[BoundaryCoefficients],
) -> (Option<(usize, f64)>, Option<(usize, f64)>) {
    let mut left: Option<(usize, f64)> = None;
    let mut right: Option<(usize, f64)> = None;
    for (i, beta) in modes.iter().enumerate() {
        let Ok(roots) = conic::y_intercepts(beta) else {
            continue;
        };
        let y = roots
            .iter()
            .cloned()
            .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
            .expect("y_intercepts returns at least one root");
        let slot = if y < 0.0 {
            &mut left
        } else if y > 0.0 {
            &mut right
        } else {
            continue; // on the radar itself; not a usable boundary
        };
        if slot.is_none_or(|(_, best)| y.abs() < best.abs()) {
            *slot = Some((i, y));
        }
    }
    (left, right)
}

/// Sequentially consumes datagrams and maintains the candidate set.
#[derive(Debug, Clone)]
pub struct BoundaryTracker {
    cfg: TrackerConfig,
    mixture: MixtureState,
    rng: ChaCha8Rng,
    next_id: u64,
    frame: usize,
    last_timestamp: Option<f64>,
}

impl BoundaryTracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self, TrackerError> {
        cfg.validate()?;
        let mixture = MixtureState::outlier_only(cfg.initial_outlier_alpha)?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.proposer.rng_seed);
        Ok(Self {
            cfg,
            mixture,
            rng,
            next_id: 1,
            frame: 0,
            last_timestamp: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn mixture(&self) -> &MixtureState {
        &self.mixture
    }

    /// Predicts every candidate under the frame-to-frame motion. Candidates
    /// whose state cannot be predicted, or whose predicted mode is not a real
    /// curve, are dropped. Returns the number dropped.
    pub fn predict_all(&mut self, m: &MotionDelta) -> usize {
        let mut survivors = MixtureState::outlier_only(self.mixture.alpha()[0])
            .expect("outlier alpha stays positive");
        let mut dropped = 0;
        let alphas: Vec<f64> = self.mixture.alpha()[1..].to_vec();
        let candidates: Vec<Candidate> = self.mixture.candidates().to_vec();
        for (cand, alpha) in candidates.into_iter().zip(alphas) {
            let predicted = bingham::predict(cand.bingham(), m, &self.cfg.process_noise)
                .and_then(|b| Candidate::new(cand.id(), b, Some(cand.mode())));
            match predicted {
                Ok(next) if next.mode().is_real_curve() => {
                    survivors.push_candidate(next, alpha).expect("alpha stays positive");
                }
                _ => dropped += 1,
            }
        }
        self.mixture = survivors;
        dropped
    }

    /// Processes one frame and returns its boundary estimate.
    pub fn step(
        &mut self,
        z: &Datagram,
        motion: &MotionDelta,
    ) -> Result<BoundaryEstimate, TrackerError> {
        if let Some(prev) = self.last_timestamp {
            if z.timestamp <= prev {
                return Err(TrackerError::NonMonotonicTimestamp {
                    prev,
                    next: z.timestamp,
                });
            }
        }
        self.last_timestamp = Some(z.timestamp);

        let mut diag = FrameDiagnostics {
            provisional: self.frame < self.cfg.warmup_frames,
            ..FrameDiagnostics::default()
        };
        diag.dropped_candidates = self.predict_all(motion);

        if z.is_empty() {
            // Nothing to infer from; carry the predictions forward.
            diag.empty_frame = true;
            diag.candidates = self.mixture.k();
            self.frame += 1;
            return Ok(self.assemble_estimate(z.timestamp, diag));
        }

        // Alternate inference and proposal until no proposal is accepted.
        let mut result = run_mfvi(z, self.mixture.clone(), &self.cfg.fov, &self.cfg.mfvi)?;
        diag.mfvi_iterations += result.iterations;
        while diag.proposals_accepted < self.cfg.max_proposal_rounds {
            let Some(prop) = proposal::propose(
                z,
                &result.mixture,
                &result.gamma,
                &self.cfg.fov,
                &self.cfg.proposer,
                &mut self.rng,
            ) else {
                break;
            };
            let seed_state =
                proposal::seed_candidate_state(&prop.beta, z, &result.mixture, &self.cfg.fov)?;
            let candidate = Candidate::new(self.next_id, seed_state, Some(&prop.beta))?;
            self.next_id += 1;
            let mut mixture = result.mixture;
            mixture.push_candidate(candidate, PROPOSAL_PSEUDO_COUNT)?;
            diag.proposals_accepted += 1;
            result = run_mfvi(z, mixture, &self.cfg.fov, &self.cfg.mfvi)?;
            diag.mfvi_iterations += result.iterations;
        }

        diag.outlier_mass = result.gamma.column_sum(0);

        // Concentration moving average, then pruning.
        let mut alpha = update_concentrations(result.mixture.alpha(), &result.gamma, self.cfg.smoothing);
        alpha[0] = alpha[0].max(MIN_OUTLIER_ALPHA);
        let mut mixture = result.mixture;
        for class in (1..mixture.classes()).rev() {
            let cand = &mixture.candidates()[class - 1];
            let starved = alpha[class] < self.cfg.prune_threshold || alpha[class] <= 0.0;
            let invalid = result.invalid_candidates.contains(&cand.id())
                || !cand.mode().is_real_curve();
            if starved || invalid {
                mixture.remove_class(class);
                alpha.remove(class);
            }
        }
        mixture.set_alpha(alpha)?;
        self.mixture = mixture;

        diag.candidates = self.mixture.k();
        self.frame += 1;
        Ok(self.assemble_estimate(z.timestamp, diag))
    }

    fn assemble_estimate(&self, timestamp: f64, diag: FrameDiagnostics) -> BoundaryEstimate {
        let modes: Vec<BoundaryCoefficients> =
            self.mixture.candidates().iter().map(|c| *c.mode()).collect();
        let (left, right) = select_boundaries(&modes);
        let to_side = |sel: Option<(usize, f64)>| {
            sel.map(|(i, y)| SideEstimate {
                beta: modes[i],
                y_intercept: y,
            })
        };
        BoundaryEstimate {
            timestamp,
            left: to_side(left),
            right: to_side(right),
            diagnostics: diag,
        }
    }
}
