//! Deterministic synthetic radar scenes with exact ground truth.
//!
//! A scene is a centerline trajectory (straight and constant-curvature arc
//! segments driven at piecewise-constant speed) with boundaries defined as
//! lateral offsets of that centerline, so every boundary piece is itself a
//! line or a circular arc. Per frame the simulator poses the radar on the
//! centerline, samples noisy inlier detections along the visible boundary
//! pieces, sprinkles uniform clutter over the field of view, and emits the
//! exact frame-to-frame motion plus ground-truth coefficients and boundary
//! points in the radar frame.
//!
//! All randomness comes from a ChaCha8 stream derived from `(seed, frame)`,
//! so identical specs generate identical scenes, frame by frame.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bingham::MotionDelta;
use crate::conic::{BoundaryCoefficients, FieldOfView, PolarPoint};
use crate::mixture::{Datagram, Detection};

/// Resolution of the visibility walk along boundary curves, in meters.
const WALK_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
}

/// Which side of the road a boundary belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// One piece of the driven centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectorySegment {
    Straight {
        length: f64,
        speed: f64,
    },
    /// Constant-radius turn. `angle` is the signed heading change over the
    /// segment; positive turns toward +y (the right).
    Arc {
        radius: f64,
        angle: f64,
        speed: f64,
    },
}

impl TrajectorySegment {
    fn duration(&self) -> f64 {
        match self {
            TrajectorySegment::Straight { length, speed } => length / speed,
            TrajectorySegment::Arc { radius, angle, speed } => radius * angle.abs() / speed,
        }
    }
}

/// A boundary as a constant lateral offset of the centerline; negative
/// offsets lie to the left (negative y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryOffset {
    pub side: Side,
    pub offset: f64,
}

/// Azimuth sector mask active over a time window; inlier detections inside
/// it are suppressed, imitating a passing vehicle occluding the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occluder {
    pub t_start: f64,
    pub t_end: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub frame_rate: f64,
    /// Detection budget per frame, split between clutter and boundaries.
    pub detections_per_frame: usize,
    pub clutter_fraction: f64,
    pub sigma_r: f64,
    pub sigma_theta: f64,
    /// Thin out detections at grazing incidence (cosine law).
    pub lambertian_decay: bool,
    pub fov: FieldOfView,
    pub trajectory: Vec<TrajectorySegment>,
    pub boundaries: Vec<BoundaryOffset>,
    pub occluders: Vec<Occluder>,
    /// Spacing of emitted ground-truth boundary points, in meters.
    pub truth_spacing: f64,
}

impl SceneSpec {
    /// Straight two-boundary road driven at constant speed.
    pub fn straight_road(length: f64, speed: f64, half_width: f64) -> Self {
        Self {
            seed: 0,
            frame_rate: 10.0,
            detections_per_frame: 60,
            clutter_fraction: 0.4,
            sigma_r: 0.15,
            sigma_theta: 0.5_f64.to_radians(),
            lambertian_decay: true,
            fov: FieldOfView::new(40.0, -std::f64::consts::FRAC_PI_3, std::f64::consts::FRAC_PI_3)
                .expect("valid fov"),
            trajectory: vec![TrajectorySegment::Straight { length, speed }],
            boundaries: vec![
                BoundaryOffset { side: Side::Left, offset: -half_width },
                BoundaryOffset { side: Side::Right, offset: half_width },
            ],
            occluders: Vec::new(),
            truth_spacing: 1.0,
        }
    }

    /// Straight approach, constant-radius turn, straight exit.
    pub fn curved_transition(radius: f64, turn_angle: f64, speed: f64, half_width: f64) -> Self {
        let mut spec = Self::straight_road(100.0, speed, half_width);
        spec.trajectory = vec![
            TrajectorySegment::Straight { length: 80.0, speed },
            TrajectorySegment::Arc { radius, angle: turn_angle, speed },
            TrajectorySegment::Straight { length: 80.0, speed },
        ];
        spec
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::InvalidSpec(m));
        if !(self.frame_rate > 0.0) {
            return err(format!("frame_rate {} must be positive", self.frame_rate));
        }
        if !(0.0..=1.0).contains(&self.clutter_fraction) {
            return err(format!("clutter_fraction {} must lie in [0, 1]", self.clutter_fraction));
        }
        if !(self.sigma_r >= 0.0 && self.sigma_theta >= 0.0) {
            return err("noise sigmas must be non-negative".into());
        }
        if !(self.truth_spacing > 0.0) {
            return err("truth_spacing must be positive".into());
        }
        if self.trajectory.is_empty() {
            return err("trajectory must contain at least one segment".into());
        }
        for (i, seg) in self.trajectory.iter().enumerate() {
            match *seg {
                TrajectorySegment::Straight { length, speed } => {
                    if !(length > 0.0 && speed > 0.0) {
                        return err(format!("trajectory segment {i}: length and speed must be positive"));
                    }
                }
                TrajectorySegment::Arc { radius, angle, speed } => {
                    if !(radius > 0.0 && speed > 0.0 && angle != 0.0) {
                        return err(format!(
                            "trajectory segment {i}: radius/speed must be positive and angle nonzero"
                        ));
                    }
                    // A boundary offset reaching the turn center collapses
                    // the offset arc to a point.
                    for b in &self.boundaries {
                        let k = angle.signum() * radius - b.offset;
                        if k.abs() < 0.5 {
                            return err(format!(
                                "boundary offset {} collides with arc center of segment {i}",
                                b.offset
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Exact radar pose on the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector2<f64>,
    pub heading: f64,
}

impl Pose {
    fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.heading.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    /// World point expressed in this pose's radar frame.
    pub fn to_local(&self, world: Vector2<f64>) -> Vector2<f64> {
        self.rotation().transpose() * (world - self.position)
    }
}

/// A boundary piece in world coordinates, parametrized for exact sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
enum WorldSegment {
    Line {
        a: Vector2<f64>,
        b: Vector2<f64>,
    },
    /// `point(ψ) = center + k·(sin ψ, −cos ψ)` for ψ in `[psi0, psi1]`
    /// (possibly decreasing); `|k|` is the radius.
    Arc {
        center: Vector2<f64>,
        k: f64,
        psi0: f64,
        psi1: f64,
    },
}

impl WorldSegment {
    fn length(&self) -> f64 {
        match self {
            WorldSegment::Line { a, b } => (b - a).norm(),
            WorldSegment::Arc { k, psi0, psi1, .. } => k.abs() * (psi1 - psi0).abs(),
        }
    }

    /// Point at normalized parameter `u ∈ [0, 1]`.
    fn point(&self, u: f64) -> Vector2<f64> {
        match self {
            WorldSegment::Line { a, b } => a + (b - a) * u,
            WorldSegment::Arc { center, k, psi0, psi1 } => {
                let psi = psi0 + (psi1 - psi0) * u;
                center + *k * Vector2::new(psi.sin(), -psi.cos())
            }
        }
    }

    /// Unit tangent at parameter `u`.
    fn tangent(&self, u: f64) -> Vector2<f64> {
        match self {
            WorldSegment::Line { a, b } => (b - a).normalize(),
            WorldSegment::Arc { k, psi0, psi1, .. } => {
                let psi = psi0 + (psi1 - psi0) * u;
                let d = Vector2::new(psi.cos(), psi.sin()) * k.signum() * (psi1 - psi0).signum();
                d.normalize()
            }
        }
    }

    /// Boundary model coefficients in the radar frame of `pose`.
    fn coefficients(&self, pose: &Pose) -> BoundaryCoefficients {
        match self {
            WorldSegment::Line { a, b } => {
                let la = pose.to_local(*a);
                let lb = pose.to_local(*b);
                let dir = lb - la;
                let n = Vector2::new(-dir.y, dir.x).normalize();
                BoundaryCoefficients::normalize(
                    nalgebra::Vector4::new(0.0, n.x, n.y, -n.dot(&la)),
                    None,
                )
                .expect("line normal is nonzero")
            }
            WorldSegment::Arc { center, k, .. } => {
                let c = pose.to_local(*center);
                let r2 = k * k;
                BoundaryCoefficients::normalize(
                    nalgebra::Vector4::new(1.0, -2.0 * c.x, -2.0 * c.y, c.norm_squared() - r2),
                    None,
                )
                .expect("arc coefficients are nonzero")
            }
        }
    }
}

/// One boundary as a chain of world segments, one per trajectory segment.
#[derive(Debug, Clone, PartialEq)]
struct WorldBoundary {
    side: Side,
    segments: Vec<WorldSegment>,
}

/// Exact ground truth for one boundary in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthBoundary {
    pub side: Side,
    /// Coefficients of the boundary piece the radar currently drives along.
    pub beta: BoundaryCoefficients,
    /// Boundary points visible in this frame, radar-frame Cartesian,
    /// spaced by `truth_spacing`.
    pub points: Vec<[f64; 2]>,
}

/// Ground truth for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub timestamp: f64,
    pub boundaries: Vec<TruthBoundary>,
}

/// One simulated frame: what the tracker consumes plus what the evaluator
/// checks against.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub datagram: Datagram,
    pub motion: MotionDelta,
    pub truth: FrameTruth,
}

/// Builds the whole scene. Output is a pure function of the spec.
pub fn generate(spec: &SceneSpec) -> Result<Vec<SimFrame>, SimError> {
    spec.validate()?;
    let scene = SceneGeometry::build(spec)?;

    let total_time: f64 = spec.trajectory.iter().map(|s| s.duration()).sum();
    let n_frames = (total_time * spec.frame_rate).floor() as usize + 1;

    let mut frames = Vec::with_capacity(n_frames);
    let mut prev_pose: Option<Pose> = None;
    for j in 0..n_frames {
        let t = j as f64 / spec.frame_rate;
        let pose = scene.pose_at(t);
        let motion = match prev_pose {
            None => MotionDelta::zero(),
            Some(p) => relative_motion(&p, &pose),
        };
        prev_pose = Some(pose);

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(j as u64 + 1);

        let datagram = scene.sample_frame(spec, t, &pose, &mut rng);
        let truth = scene.frame_truth(spec, t, &pose);
        frames.push(SimFrame { datagram, motion, truth });
    }
    Ok(frames)
}

/// Rigid motion of the radar from `prev` to `next`, expressed in `prev`'s
/// frame.
pub fn relative_motion(prev: &Pose, next: &Pose) -> MotionDelta {
    let d = prev.rotation().transpose() * (next.position - prev.position);
    let mut dpsi = next.heading - prev.heading;
    while dpsi > std::f64::consts::PI {
        dpsi -= 2.0 * std::f64::consts::PI;
    }
    while dpsi < -std::f64::consts::PI {
        dpsi += 2.0 * std::f64::consts::PI;
    }
    MotionDelta::new(d.x, d.y, dpsi).expect("finite trajectory motion")
}

struct SceneGeometry {
    /// Start time, start pose and definition of each trajectory segment.
    timeline: Vec<(f64, Pose, TrajectorySegment)>,
    total_time: f64,
    end_pose: Pose,
    boundaries: Vec<WorldBoundary>,
}

impl SceneGeometry {
    fn build(spec: &SceneSpec) -> Result<Self, SimError> {
        let mut timeline = Vec::new();
        let mut pose = Pose { position: Vector2::zeros(), heading: 0.0 };
        let mut t = 0.0;
        let mut boundaries: Vec<WorldBoundary> = spec
            .boundaries
            .iter()
            .map(|b| WorldBoundary { side: b.side, segments: Vec::new() })
            .collect();

        for seg in &spec.trajectory {
            timeline.push((t, pose, *seg));
            match *seg {
                TrajectorySegment::Straight { length, .. } => {
                    let dir = Vector2::new(pose.heading.cos(), pose.heading.sin());
                    let lateral = Vector2::new(-pose.heading.sin(), pose.heading.cos());
                    let end = pose.position + dir * length;
                    for (wb, off) in boundaries.iter_mut().zip(&spec.boundaries) {
                        wb.segments.push(WorldSegment::Line {
                            a: pose.position + lateral * off.offset,
                            b: end + lateral * off.offset,
                        });
                    }
                    pose = Pose { position: end, heading: pose.heading };
                }
                TrajectorySegment::Arc { radius, angle, .. } => {
                    let rho = angle.signum() * radius;
                    let psi0 = pose.heading;
                    let psi1 = pose.heading + angle;
                    let n0 = Vector2::new(-psi0.sin(), psi0.cos());
                    // Centerline point(ψ) = center − ρ·n(ψ).
                    let center = pose.position + n0 * rho;
                    for (wb, off) in boundaries.iter_mut().zip(&spec.boundaries) {
                        wb.segments.push(WorldSegment::Arc {
                            center,
                            k: rho - off.offset,
                            psi0,
                            psi1,
                        });
                    }
                    let n1 = Vector2::new(-psi1.sin(), psi1.cos());
                    pose = Pose { position: center - n1 * rho, heading: psi1 };
                }
            }
            t += seg.duration();
        }
        Ok(Self {
            timeline,
            total_time: t,
            end_pose: pose,
            boundaries,
        })
    }

    fn pose_at(&self, t: f64) -> Pose {
        if t >= self.total_time {
            return self.end_pose;
        }
        let idx = self
            .timeline
            .iter()
            .rposition(|(start, _, _)| t >= *start)
            .unwrap_or(0);
        let (start, pose, seg) = self.timeline[idx];
        let tau = t - start;
        match seg {
            TrajectorySegment::Straight { speed, .. } => {
                let dir = Vector2::new(pose.heading.cos(), pose.heading.sin());
                Pose {
                    position: pose.position + dir * speed * tau,
                    heading: pose.heading,
                }
            }
            TrajectorySegment::Arc { radius, angle, speed } => {
                let rho = angle.signum() * radius;
                let omega = angle.signum() * speed / radius;
                let psi = pose.heading + omega * tau;
                let n0 = Vector2::new(-pose.heading.sin(), pose.heading.cos());
                let center = pose.position + n0 * rho;
                let n = Vector2::new(-psi.sin(), psi.cos());
                Pose { position: center - n * rho, heading: psi }
            }
        }
    }

    fn active_segment(&self, t: f64) -> usize {
        if t >= self.total_time {
            return self.timeline.len() - 1;
        }
        self.timeline
            .iter()
            .rposition(|(start, _, _)| t >= *start)
            .unwrap_or(0)
    }

    /// Visible samples of one boundary: `(segment index, parameter)` pairs on
    /// an arclength grid of `step`, filtered by the field of view.
    fn visible_params(
        &self,
        boundary: &WorldBoundary,
        pose: &Pose,
        fov: &FieldOfView,
        step: f64,
    ) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (si, seg) in boundary.segments.iter().enumerate() {
            let len = seg.length();
            let steps = (len / step).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let u = s as f64 / steps as f64;
                let local = pose.to_local(seg.point(u));
                if let Ok(p) = PolarPoint::from_cartesian(local.x, local.y) {
                    if fov.contains(&p) {
                        out.push((si, u));
                    }
                }
            }
        }
        out
    }

    fn occluded(&self, spec: &SceneSpec, t: f64, theta: f64) -> bool {
        spec.occluders
            .iter()
            .any(|o| t >= o.t_start && t <= o.t_end && theta >= o.theta_min && theta <= o.theta_max)
    }

    fn sample_frame(
        &self,
        spec: &SceneSpec,
        t: f64,
        pose: &Pose,
        rng: &mut ChaCha8Rng,
    ) -> Datagram {
        let n_clutter = (spec.detections_per_frame as f64 * spec.clutter_fraction).round() as usize;
        let n_inlier_budget = spec.detections_per_frame.saturating_sub(n_clutter);
        let mut detections = Vec::with_capacity(spec.detections_per_frame);

        // Inliers along each visible boundary. With Lambertian decay the
        // sampling density along the curve is proportional to the cosine of
        // the incidence angle, concentrating returns where the boundary
        // faces the radar; the per-boundary budget itself is preserved.
        if !self.boundaries.is_empty() && n_inlier_budget > 0 {
            let per_boundary = n_inlier_budget / self.boundaries.len();
            let mut remainder = n_inlier_budget % self.boundaries.len();
            for boundary in &self.boundaries {
                let mut budget = per_boundary;
                if remainder > 0 {
                    budget += 1;
                    remainder -= 1;
                }
                let visible = self.visible_params(boundary, pose, &spec.fov, WALK_STEP);
                if visible.is_empty() {
                    continue;
                }
                let weights: Vec<f64> = visible
                    .iter()
                    .map(|(si, u)| {
                        if !spec.lambertian_decay {
                            return 1.0;
                        }
                        let seg = &boundary.segments[*si];
                        let world = seg.point(*u);
                        let ray = (world - pose.position).normalize();
                        let tangent = seg.tangent(*u);
                        let normal = Vector2::new(-tangent.y, tangent.x);
                        ray.dot(&normal).abs().max(1e-6)
                    })
                    .collect();
                let total_weight: f64 = weights.iter().sum();
                for _ in 0..budget {
                    // Inverse-CDF draw over the visibility grid.
                    let mut pick = rng.random_range(0.0..total_weight);
                    let mut chosen = visible.len() - 1;
                    for (idx, w) in weights.iter().enumerate() {
                        if pick < *w {
                            chosen = idx;
                            break;
                        }
                        pick -= w;
                    }
                    let (si, u) = visible[chosen];
                    let seg = &boundary.segments[si];
                    // Jitter within half a walk step along the curve.
                    let du = WALK_STEP / seg.length().max(WALK_STEP);
                    let u = (u + rng.random_range(-0.5..0.5) * du).clamp(0.0, 1.0);
                    let world = seg.point(u);
                    let local = pose.to_local(world);
                    let Ok(exact) = PolarPoint::from_cartesian(local.x, local.y) else {
                        continue;
                    };
                    if self.occluded(spec, t, exact.theta()) {
                        continue;
                    }
                    let nr: f64 = StandardNormal.sample(rng);
                    let nt: f64 = StandardNormal.sample(rng);
                    let r = exact.r() + spec.sigma_r * nr;
                    let theta = exact.theta() + spec.sigma_theta * nt;
                    let Ok(noisy) = PolarPoint::new(r, theta) else {
                        continue;
                    };
                    if !spec.fov.contains(&noisy) {
                        continue;
                    }
                    detections.push(
                        Detection::new(noisy, spec.sigma_r.max(1e-6), spec.sigma_theta.max(1e-6))
                            .expect("positive sigmas"),
                    );
                }
            }
        }

        // Uniform clutter over the field-of-view rectangle.
        for _ in 0..n_clutter {
            let r = rng.random_range(0.0..spec.fov.r_max());
            let theta = rng.random_range(spec.fov.theta_min()..spec.fov.theta_max());
            detections.push(
                Detection::new(
                    PolarPoint::new(r, theta).expect("clutter point is valid"),
                    spec.sigma_r.max(1e-6),
                    spec.sigma_theta.max(1e-6),
                )
                .expect("positive sigmas"),
            );
        }

        Datagram { timestamp: t, detections }
    }

    fn frame_truth(&self, spec: &SceneSpec, t: f64, pose: &Pose) -> FrameTruth {
        let active = self.active_segment(t);
        let mut boundaries = Vec::with_capacity(self.boundaries.len());
        for boundary in &self.boundaries {
            let beta = boundary.segments[active].coefficients(pose);
            let visible = self.visible_params(boundary, pose, &spec.fov, WALK_STEP);
            let stride = (spec.truth_spacing / WALK_STEP).round().max(1.0) as usize;
            let points: Vec<[f64; 2]> = visible
                .iter()
                .step_by(stride)
                .map(|(si, u)| {
                    let local = pose.to_local(boundary.segments[*si].point(*u));
                    [local.x, local.y]
                })
                .collect();
            boundaries.push(TruthBoundary { side: boundary.side, beta, points });
        }
        FrameTruth { timestamp: t, boundaries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bingham::motion_matrix;
    use crate::conic::{self, rigid_transform};
    use approx::assert_abs_diff_eq;

    fn quiet_spec() -> SceneSpec {
        let mut spec = SceneSpec::straight_road(100.0, 10.0, 3.5);
        spec.sigma_r = 0.0;
        spec.sigma_theta = 0.0;
        spec.clutter_fraction = 0.0;
        spec.lambertian_decay = false;
        spec.seed = 7;
        spec
    }

    #[test]
    fn noiseless_detections_lie_on_truth_curves() {
        let frames = generate(&quiet_spec()).unwrap();
        assert!(!frames.is_empty());
        for frame in &frames {
            for det in &frame.datagram.detections {
                let best = frame
                    .truth
                    .boundaries
                    .iter()
                    .map(|b| conic::evaluate(&b.beta, det.point()).abs())
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= 1e-9, "residual {best}");
            }
        }
    }

    #[test]
    fn full_clutter_is_uniform_over_fov() {
        let mut spec = quiet_spec();
        spec.clutter_fraction = 1.0;
        spec.detections_per_frame = 200;
        let frames = generate(&spec).unwrap();
        let fov = spec.fov;

        // Bin (r, theta) into 5 x 4 cells and chi-square against uniform.
        let mut counts = [0usize; 20];
        let mut total = 0usize;
        for frame in &frames {
            for det in &frame.datagram.detections {
                let ri = ((det.point().r() / fov.r_max()) * 5.0).min(4.999) as usize;
                let ti = (((det.point().theta() - fov.theta_min())
                    / (fov.theta_max() - fov.theta_min()))
                    * 4.0)
                    .min(3.999) as usize;
                counts[ri * 4 + ti] += 1;
                total += 1;
                if total >= 10_000 {
                    break;
                }
            }
            if total >= 10_000 {
                break;
            }
        }
        assert!(total >= 10_000);
        let expected = total as f64 / 20.0;
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
        // dof 19 critical value at p = 0.01.
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    #[test]
    fn motion_deltas_compose_to_trajectory_endpoint() {
        let spec = SceneSpec::curved_transition(50.0, 0.6, 10.0, 3.5);
        let frames = generate(&spec).unwrap();

        // Compose all per-frame rigid motions.
        let mut t = nalgebra::Matrix3::<f64>::identity();
        for frame in &frames {
            let m = frame.motion;
            t *= rigid_transform(m.dx(), m.dy(), m.dpsi());
        }

        let scene = SceneGeometry::build(&spec).unwrap();
        let last_t = (frames.len() - 1) as f64 / spec.frame_rate;
        let end = scene.pose_at(last_t);
        assert_abs_diff_eq!(t[(0, 2)], end.position.x, epsilon = 1e-9);
        assert_abs_diff_eq!(t[(1, 2)], end.position.y, epsilon = 1e-9);
        assert_abs_diff_eq!(t[(1, 0)].atan2(t[(0, 0)]), end.heading, epsilon = 1e-9);
    }

    #[test]
    fn truth_coefficients_follow_motion_transform() {
        // Single-segment scene: the same world curve seen from successive
        // poses must obey the coefficient transition exactly.
        let frames = generate(&quiet_spec()).unwrap();
        for w in frames.windows(2) {
            let (prev, next) = (&w[0], &w[1]);
            for (pb, nb) in prev.truth.boundaries.iter().zip(&next.truth.boundaries) {
                let pushed = BoundaryCoefficients::normalize(
                    motion_matrix(&next.motion) * pb.beta.as_vector(),
                    Some(&nb.beta),
                )
                .unwrap();
                assert!(
                    (pushed.as_vector() - nb.beta.as_vector()).norm() < 1e-9,
                    "transform mismatch"
                );
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SceneSpec::straight_road(50.0, 10.0, 3.5);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn lambertian_decay_pulls_detections_toward_the_radar() {
        // Straight road: incidence grows with range, so the cosine weighting
        // must shift the detection mass to short range while keeping the
        // budget roughly intact.
        let mut with = quiet_spec();
        with.lambertian_decay = true;
        let mut without = quiet_spec();
        without.lambertian_decay = false;

        let mean_range = |frames: &[SimFrame]| -> f64 {
            let (mut sum, mut n) = (0.0, 0usize);
            for f in frames {
                for d in &f.datagram.detections {
                    sum += d.point().r();
                    n += 1;
                }
            }
            sum / n as f64
        };
        let frames_with = generate(&with).unwrap();
        let frames_without = generate(&without).unwrap();
        assert!(mean_range(&frames_with) < 0.8 * mean_range(&frames_without));

        let count = |frames: &[SimFrame]| -> usize {
            frames.iter().map(|f| f.datagram.detections.len()).sum()
        };
        let (n_with, n_without) = (count(&frames_with), count(&frames_without));
        assert!(
            (n_with as f64) > 0.9 * n_without as f64,
            "budget must be preserved: {n_with} vs {n_without}"
        );
    }

    #[test]
    fn occluder_masks_inliers() {
        let mut spec = quiet_spec();
        spec.occluders = vec![Occluder {
            t_start: 0.0,
            t_end: 100.0,
            theta_min: -1.5,
            theta_max: 0.0,
        }];
        let frames = generate(&spec).unwrap();
        for frame in &frames {
            for det in &frame.datagram.detections {
                assert!(det.point().theta() > 0.0, "masked sector still produced detections");
            }
        }
    }

    #[test]
    fn truth_points_are_spaced_and_visible() {
        let spec = quiet_spec();
        let frames = generate(&spec).unwrap();
        let frame = &frames[3];
        for b in &frame.truth.boundaries {
            assert!(b.points.len() > 10);
            for pair in b.points.windows(2) {
                let d = ((pair[0][0] - pair[1][0]).powi(2) + (pair[0][1] - pair[1][1]).powi(2)).sqrt();
                assert!(d > 0.5 && d < 2.0, "spacing {d}");
            }
            for p in &b.points {
                let polar = PolarPoint::from_cartesian(p[0], p[1]).unwrap();
                assert!(spec.fov.contains(&polar));
            }
        }
    }

    #[test]
    fn rejects_inconsistent_specs() {
        let mut spec = quiet_spec();
        spec.clutter_fraction = 1.5;
        assert!(matches!(generate(&spec), Err(SimError::InvalidSpec(_))));

        let mut spec = quiet_spec();
        spec.trajectory = vec![TrajectorySegment::Arc { radius: 3.5, angle: 1.0, speed: 10.0 }];
        // Right boundary offset 3.5 swallows the 3.5 m turn radius.
        assert!(matches!(generate(&spec), Err(SimError::InvalidSpec(_))));
    }
}
