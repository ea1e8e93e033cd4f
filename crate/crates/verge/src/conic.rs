//! The homogeneous conic road boundary model.
//!
//! A boundary is the zero set of `β₁(x²+y²) + β₂x + β₃y + β₄ = 0`, which in
//! polar coordinates becomes `βᵀφ(s) = 0` with basis
//! `φ(s) = (r², r·cosθ, r·sinθ, 1)`. The form covers circles (`β₁ ≠ 0`) and
//! lines (`β₁ = 0`) in one parameter vector defined up to scale, so all
//! coefficients here are kept on the unit 3-sphere.
//!
//! Coordinate convention: x forward, y to the right; azimuth θ = 0 is
//! forward, θ < 0 points left, θ > 0 points right.

use nalgebra::{Matrix2, Matrix3, SMatrix, Vector2, Vector4};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::EigenError;

/// `|β₁|` below this (on a unit-norm β) is treated as zero curvature, i.e. a
/// line rather than a circle.
pub const LINE_CURVATURE_EPS: f64 = 1e-8;

/// A 3-point sample is degenerate when the ratio of smallest to largest
/// singular value of its basis matrix falls below this.
pub const RANK_RATIO_EPS: f64 = 1e-10;

/// Polar basis vector `φ = (r², r·cosθ, r·sinθ, 1)`.
pub type BasisVector = Vector4<f64>;

/// 4×2 Jacobian `∂φ/∂(r, θ)`; the constant-basis row is identically zero.
pub type BasisJacobian = SMatrix<f64, 4, 2>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid polar point (r={r}, theta={theta}): r must be >= 0 and both finite")]
    InvalidPoint { r: f64, theta: f64 },
    #[error("invalid field of view (r_max={r_max}, theta in [{theta_min}, {theta_max}])")]
    InvalidFieldOfView {
        r_max: f64,
        theta_min: f64,
        theta_max: f64,
    },
    #[error("noise covariance must be symmetric positive semidefinite")]
    InvalidNoise,
    #[error("the 3-point sample is rank-deficient and fits no unique conic")]
    DegenerateSample,
    #[error("the boundary model has no real y-intercept")]
    NoIntercept,
    #[error("conic has imaginary radius (not a real curve)")]
    ImaginaryRadius,
    #[error("cannot normalize an all-zero coefficient vector")]
    ZeroVector,
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// One radar target position in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    r: f64,
    theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Result<Self, GeometryError> {
        if !(r.is_finite() && theta.is_finite() && r >= 0.0) {
            return Err(GeometryError::InvalidPoint { r, theta });
        }
        Ok(Self { r, theta })
    }

    pub fn from_cartesian(x: f64, y: f64) -> Result<Self, GeometryError> {
        Self::new(x.hypot(y), y.atan2(x))
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn to_cartesian(&self) -> Vector2<f64> {
        Vector2::new(self.r * self.theta.cos(), self.r * self.theta.sin())
    }
}

/// The radar's sensing region `[0, r_max] × [θ_min, θ_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOfView {
    r_max: f64,
    theta_min: f64,
    theta_max: f64,
}

impl FieldOfView {
    pub fn new(r_max: f64, theta_min: f64, theta_max: f64) -> Result<Self, GeometryError> {
        let ok = r_max.is_finite()
            && theta_min.is_finite()
            && theta_max.is_finite()
            && r_max > 0.0
            && theta_min < theta_max;
        if !ok {
            return Err(GeometryError::InvalidFieldOfView {
                r_max,
                theta_min,
                theta_max,
            });
        }
        Ok(Self {
            r_max,
            theta_min,
            theta_max,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn theta_min(&self) -> f64 {
        self.theta_min
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn contains(&self, p: &PolarPoint) -> bool {
        p.r <= self.r_max && (self.theta_min..=self.theta_max).contains(&p.theta)
    }

    /// Density of the uniform outlier model, `1/(r_max·(θ_max−θ_min))`.
    /// The polar area Jacobian is deliberately omitted: outliers are modelled
    /// as uniform over the (r, θ) rectangle itself.
    pub fn uniform_density(&self) -> f64 {
        1.0 / (self.r_max * (self.theta_max - self.theta_min))
    }
}

/// Unit-norm coefficient vector of the boundary conic.
///
/// The model is homogeneous (`β ≡ cβ`), so the vector is stored normalized,
/// with the sign fixed either against a reference (temporal continuity) or by
/// making the first non-negligible component positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCoefficients(Vector4<f64>);

impl BoundaryCoefficients {
    /// Normalizes a raw coefficient vector. With a `reference` the sign is
    /// chosen so that the dot product with it is non-negative; without one,
    /// the first component with magnitude above 1e-12 is made positive.
    pub fn normalize(
        raw: Vector4<f64>,
        reference: Option<&BoundaryCoefficients>,
    ) -> Result<Self, GeometryError> {
        let norm = raw.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(GeometryError::ZeroVector);
        }
        let mut unit = raw / norm;
        let flip = match reference {
            Some(r) => unit.dot(&r.0) < 0.0,
            None => unit.iter().find(|c| c.abs() > 1e-12).is_some_and(|c| *c < 0.0),
        };
        if flip {
            unit = -unit;
        }
        Ok(Self(unit))
    }

    pub fn as_vector(&self) -> &Vector4<f64> {
        &self.0
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    /// Whether the curve is a line under the `LINE_CURVATURE_EPS` threshold.
    pub fn is_line(&self) -> bool {
        self.0[0].abs() < LINE_CURVATURE_EPS
    }

    /// Smallest angle between two coefficient directions, ignoring the
    /// antipodal sign ambiguity. Radians in `[0, π/2]`.
    pub fn angular_distance(&self, other: &BoundaryCoefficients) -> f64 {
        self.0.dot(&other.0).abs().clamp(0.0, 1.0).acos()
    }

    /// Center and radius of the circle branch.
    pub fn circle_parameters(&self) -> Result<(Vector2<f64>, f64), GeometryError> {
        let [b1, b2, b3, b4] = self.to_array();
        let disc = b2 * b2 + b3 * b3 - 4.0 * b1 * b4;
        if disc < 0.0 {
            return Err(GeometryError::ImaginaryRadius);
        }
        let center = Vector2::new(-b2 / (2.0 * b1), -b3 / (2.0 * b1));
        let radius = disc.sqrt() / (2.0 * b1.abs());
        Ok((center, radius))
    }

    /// False only for a circle branch whose radius would be imaginary.
    pub fn is_real_curve(&self) -> bool {
        self.is_line() || self.circle_parameters().is_ok()
    }
}

impl Serialize for BoundaryCoefficients {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundaryCoefficients {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = <[f64; 4]>::deserialize(deserializer)?;
        let v = Vector4::from_column_slice(&raw);
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(D::Error::custom(format!(
                "boundary coefficients must be unit-norm, got norm {norm}"
            )));
        }
        // Rescale exactly to unit norm but keep the stored sign, so values
        // round-trip without being re-oriented.
        Ok(Self(v / norm))
    }
}

/// Basis functions `φ(p) = (r², r·cosθ, r·sinθ, 1)`.
pub fn basis(p: &PolarPoint) -> BasisVector {
    let (r, theta) = (p.r, p.theta);
    Vector4::new(r * r, r * theta.cos(), r * theta.sin(), 1.0)
}

/// Jacobian of `φ` with respect to `(r, θ)`.
pub fn basis_jacobian(p: &PolarPoint) -> BasisJacobian {
    let (r, theta) = (p.r, p.theta);
    let (sin, cos) = theta.sin_cos();
    SMatrix::<f64, 4, 2>::from_rows(&[
        [2.0 * r, 0.0].into(),
        [cos, -r * sin].into(),
        [sin, r * cos].into(),
        [0.0, 0.0].into(),
    ])
}

/// Implicit residual `h(p, β) = βᵀφ(p)`; zero iff `p` lies on the curve.
pub fn evaluate(beta: &BoundaryCoefficients, p: &PolarPoint) -> f64 {
    beta.as_vector().dot(&basis(p))
}

/// First-order propagation of the polar measurement noise through the
/// implicit residual: `σ² = βᵀ Φ Σ Φᵀ β`.
pub fn pseudo_variance(
    beta: &BoundaryCoefficients,
    p: &PolarPoint,
    noise: &Matrix2<f64>,
) -> Result<f64, GeometryError> {
    let sym_ok = (noise[(0, 1)] - noise[(1, 0)]).abs() <= 1e-12 * noise.norm().max(1.0);
    // 2×2 PSD check: non-negative diagonal and determinant.
    let psd_ok = noise[(0, 0)] >= 0.0
        && noise[(1, 1)] >= 0.0
        && noise[(0, 0)] * noise[(1, 1)] - noise[(0, 1)] * noise[(1, 0)] >= -1e-12;
    if !(sym_ok && psd_ok && noise.iter().all(|x| x.is_finite())) {
        return Err(GeometryError::InvalidNoise);
    }
    let g = basis_jacobian(p).transpose() * beta.as_vector(); // Φᵀβ, 2-vector
    Ok((g.transpose() * noise * g)[(0, 0)].max(0.0))
}

/// Fits the unique conic through three detections: the null space of the 3×4
/// matrix `A` with rows `φ(pᵢ)ᵀ`.
///
/// Rank is certified by the singular values of `A` itself (ratio below
/// [`RANK_RATIO_EPS`] is degenerate); the null vector comes from the cofactor
/// expansion `nⱼ = (−1)ʲ det(A with column j removed)`, which is exact for a
/// rank-3 matrix.
pub fn fit_exact(
    p1: &PolarPoint,
    p2: &PolarPoint,
    p3: &PolarPoint,
) -> Result<BoundaryCoefficients, GeometryError> {
    let rows = [basis(p1), basis(p2), basis(p3)];
    let a = SMatrix::<f64, 3, 4>::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]);

    let singular = a.singular_values();
    let (s_max, s_min) = (singular[0], singular[2]);
    if !(s_max > 0.0) || s_min / s_max < RANK_RATIO_EPS {
        return Err(GeometryError::DegenerateSample);
    }

    let minor = |j: usize| -> f64 {
        let cols: Vec<usize> = (0..4).filter(|&c| c != j).collect();
        let m = |r: usize, k: usize| a[(r, cols[k])];
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    };
    let null = Vector4::new(minor(0), -minor(1), minor(2), -minor(3));
    BoundaryCoefficients::normalize(null, None).map_err(|_| GeometryError::DegenerateSample)
}

/// Real y-axis crossings of the boundary: roots of `β₁y² + β₃y + β₄ = 0`,
/// sorted ascending. The line branch yields the single root `−β₄/β₃`.
pub fn y_intercepts(beta: &BoundaryCoefficients) -> Result<Vec<f64>, GeometryError> {
    let [b1, _, b3, b4] = beta.to_array();
    if beta.is_line() {
        if b3.abs() < LINE_CURVATURE_EPS {
            return Err(GeometryError::NoIntercept);
        }
        return Ok(vec![-b4 / b3]);
    }
    let disc = b3 * b3 - 4.0 * b1 * b4;
    if disc < 0.0 {
        return Err(GeometryError::NoIntercept);
    }
    if disc == 0.0 {
        return Ok(vec![-b3 / (2.0 * b1)]);
    }
    // Citardauq-stable form: avoid cancellation between -b3 and the root.
    // disc > 0 here, so q is nonzero.
    let q = -0.5 * (b3 + b3.signum() * disc.sqrt());
    let (mut y1, mut y2) = (q / b1, b4 / q);
    if y1 > y2 {
        std::mem::swap(&mut y1, &mut y2);
    }
    Ok(vec![y1, y2])
}

/// Signed geometric distance from a Cartesian point to the boundary curve.
///
/// Positive on the side of the curve that contains the radar origin (the
/// roadway interior under assumption that the radar drives between the
/// boundaries). Circle branch: distance to center minus radius, re-signed;
/// line branch: standard point-line distance, re-signed.
pub fn geometric_distance(
    point: Vector2<f64>,
    beta: &BoundaryCoefficients,
) -> Result<f64, GeometryError> {
    let [_, b2, b3, b4] = beta.to_array();
    if beta.is_line() {
        let n = (b2 * b2 + b3 * b3).sqrt();
        if n == 0.0 {
            // Not a curve at all (β ∝ (0,0,0,1)).
            return Err(GeometryError::ImaginaryRadius);
        }
        let raw = (b2 * point.x + b3 * point.y + b4) / n;
        let origin_raw = b4 / n;
        Ok(raw * sign_of(origin_raw))
    } else {
        let (center, radius) = beta.circle_parameters()?;
        let raw = (point - center).norm() - radius;
        let origin_raw = center.norm() - radius;
        Ok(raw * sign_of(origin_raw))
    }
}

/// Sign with the degenerate on-curve origin treated as positive.
fn sign_of(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// 3×3 homogeneous rigid transform for a motion of the radar frame: rotation
/// by `dpsi` then translation `(dx, dy)`, i.e. the pose of the new frame
/// expressed in the old one.
pub fn rigid_transform(dx: f64, dy: f64, dpsi: f64) -> Matrix3<f64> {
    let (s, c) = dpsi.sin_cos();
    Matrix3::new(c, -s, dx, s, c, dy, 0.0, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn coeff(raw: [f64; 4]) -> BoundaryCoefficients {
        BoundaryCoefficients::normalize(Vector4::from_column_slice(&raw), None).unwrap()
    }

    fn polar(r: f64, theta: f64) -> PolarPoint {
        PolarPoint::new(r, theta).unwrap()
    }

    /// Circle through `center` with `radius` as a raw coefficient vector.
    fn circle_coeffs(cx: f64, cy: f64, radius: f64) -> BoundaryCoefficients {
        coeff([1.0, -2.0 * cx, -2.0 * cy, cx * cx + cy * cy - radius * radius])
    }

    #[test]
    fn basis_examples() {
        assert_eq!(basis(&polar(1.0, 0.0)), Vector4::new(1.0, 1.0, 0.0, 1.0));
        assert_eq!(basis(&polar(0.0, 1.3)), Vector4::new(0.0, 0.0, 0.0, 1.0));
        let phi = basis(&polar(2.0, std::f64::consts::FRAC_PI_2));
        assert_abs_diff_eq!(phi, Vector4::new(4.0, 0.0, 2.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn basis_jacobian_examples() {
        let j = basis_jacobian(&polar(1.0, 0.0));
        let expect = SMatrix::<f64, 4, 2>::from_rows(&[
            [2.0, 0.0].into(),
            [1.0, 0.0].into(),
            [0.0, 1.0].into(),
            [0.0, 0.0].into(),
        ]);
        assert_abs_diff_eq!(j, expect, epsilon = 1e-15);

        let j0 = basis_jacobian(&polar(0.0, 0.0));
        let expect0 = SMatrix::<f64, 4, 2>::from_rows(&[
            [0.0, 0.0].into(),
            [1.0, 0.0].into(),
            [0.0, 0.0].into(),
            [0.0, 0.0].into(),
        ]);
        assert_abs_diff_eq!(j0, expect0, epsilon = 1e-15);
    }

    #[test]
    fn basis_jacobian_matches_finite_differences() {
        // Independent oracle: central differences of `basis` itself.
        let h = 1e-6;
        let check = |r: f64, theta: f64| {
            let j = basis_jacobian(&polar(r, theta));
            let dr = (basis(&polar(r + h, theta)) - basis(&polar(r - h, theta))) / (2.0 * h);
            let dt = (basis(&polar(r, theta + h)) - basis(&polar(r, theta - h))) / (2.0 * h);
            for i in 0..4 {
                assert_abs_diff_eq!(j[(i, 0)], dr[i], epsilon = 1e-5);
                assert_abs_diff_eq!(j[(i, 1)], dt[i], epsilon = 1e-5);
            }
        };
        check(3.0, 0.7);
        for k in 0..50 {
            let r = 0.5 + (k as f64) * 1.37 % 60.0;
            let theta = -1.0 + (k as f64) * 0.077;
            check(r, theta);
        }
    }

    #[test]
    fn evaluate_on_and_off_curve() {
        let line = coeff([0.0, 0.0, 1.0, -2.0]); // y = 2
        assert_abs_diff_eq!(evaluate(&line, &polar(2.0, std::f64::consts::FRAC_PI_2)), 0.0, epsilon = 1e-12);

        let circle = coeff([1.0, 0.0, 0.0, -1.0]); // unit circle about origin
        assert_abs_diff_eq!(evaluate(&circle, &polar(1.0, 0.3)), 0.0, epsilon = 1e-12);

        // Off-curve point at (0, 3): residual (3 - 2)/√5 after normalization.
        let v = evaluate(&line, &polar(3.0, std::f64::consts::FRAC_PI_2));
        assert_relative_eq!(v, 1.0 / 5.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn pseudo_variance_scaling_and_example() {
        let beta = coeff([0.0, 0.0, 1.0, 0.0]);
        let p = polar(1.0, 0.0);

        assert_eq!(pseudo_variance(&beta, &p, &Matrix2::zeros()).unwrap(), 0.0);

        let noise = Matrix2::from_diagonal(&Vector2::new(0.01, 0.04));
        let s2 = pseudo_variance(&beta, &p, &noise).unwrap();
        assert_relative_eq!(s2, 0.04, epsilon = 1e-14);

        // Doubling both standard deviations quadruples the variance.
        let quad = pseudo_variance(&beta, &p, &(4.0 * noise)).unwrap();
        assert_relative_eq!(quad, 4.0 * s2, epsilon = 1e-12);

        let asym = Matrix2::new(0.01, 0.5, -0.5, 0.04);
        assert_eq!(pseudo_variance(&beta, &p, &asym), Err(GeometryError::InvalidNoise));
        let neg = Matrix2::from_diagonal(&Vector2::new(-0.01, 0.04));
        assert_eq!(pseudo_variance(&beta, &p, &neg), Err(GeometryError::InvalidNoise));
    }

    #[test]
    fn fit_exact_canonical_circle_and_line() {
        let fit = fit_exact(&polar(1.0, 0.0), &polar(1.0, std::f64::consts::FRAC_PI_2), &polar(1.0, std::f64::consts::PI)).unwrap();
        let expect = coeff([1.0, 0.0, 0.0, -1.0]);
        assert!((fit.as_vector() - expect.as_vector()).norm() < 1e-9);

        let pts: Vec<PolarPoint> = [(-1.0, 2.0), (0.0, 2.0), (3.0, 2.0)]
            .iter()
            .map(|&(x, y)| PolarPoint::from_cartesian(x, y).unwrap())
            .collect();
        let fit = fit_exact(&pts[0], &pts[1], &pts[2]).unwrap();
        let expect = coeff([0.0, 0.0, 1.0, -2.0]);
        assert!((fit.as_vector() - expect.as_vector()).norm() < 1e-9);
        assert!(fit.to_array()[0].abs() < 1e-9);
    }

    #[test]
    fn fit_exact_recovers_circle_parameters() {
        let (cx, cy, radius) = (5.0, -4.0, 3.0);
        let at = |t: f64| PolarPoint::from_cartesian(cx + radius * t.cos(), cy + radius * t.sin()).unwrap();
        let fit = fit_exact(&at(0.3), &at(1.9), &at(4.4)).unwrap();
        let (center, r) = fit.circle_parameters().unwrap();
        assert_abs_diff_eq!(center, Vector2::new(cx, cy), epsilon = 1e-6);
        assert_abs_diff_eq!(r, radius, epsilon = 1e-6);
    }

    #[test]
    fn fit_exact_rejects_degenerate_samples() {
        let p = polar(3.0, 0.4);
        assert_eq!(fit_exact(&p, &p, &polar(5.0, 0.1)), Err(GeometryError::DegenerateSample));
    }

    #[test]
    fn y_intercept_cases() {
        let line = coeff([0.0, 0.0, 1.0, -2.0]);
        assert_eq!(y_intercepts(&line).unwrap(), vec![2.0]);

        let circle = coeff([1.0, 0.0, 0.0, -1.0]);
        let roots = y_intercepts(&circle).unwrap();
        assert_abs_diff_eq!(roots[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(roots[1], 1.0, epsilon = 1e-12);

        // Circle centered (5, 0) with radius 1 never crosses the y axis.
        let offside = circle_coeffs(5.0, 0.0, 1.0);
        assert_eq!(y_intercepts(&offside), Err(GeometryError::NoIntercept));

        // Vertical line x = 3 has no y-intercept either.
        let vertical = coeff([0.0, 1.0, 0.0, -3.0]);
        assert_eq!(y_intercepts(&vertical), Err(GeometryError::NoIntercept));
    }

    #[test]
    fn geometric_distance_cases() {
        let line = coeff([0.0, 0.0, 1.0, -2.0]);
        assert_relative_eq!(geometric_distance(Vector2::zeros(), &line).unwrap(), 2.0, epsilon = 1e-12);

        let circle = coeff([1.0, 0.0, 0.0, -1.0]);
        let d = geometric_distance(Vector2::new(0.0, 3.0), &circle).unwrap();
        assert_relative_eq!(d.abs(), 2.0, epsilon = 1e-12);

        let big = circle_coeffs(4.0, 5.0, 5.0);
        assert_abs_diff_eq!(geometric_distance(Vector2::new(1.0, 1.0), &big).unwrap(), 0.0, epsilon = 1e-9);

        let imaginary = coeff([1.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            geometric_distance(Vector2::zeros(), &imaginary),
            Err(GeometryError::ImaginaryRadius)
        );
    }

    #[test]
    fn normalize_sign_rules() {
        let b = coeff([0.0, 0.0, 2.0, -4.0]);
        let s = 5.0_f64.sqrt();
        assert_abs_diff_eq!(*b.as_vector(), Vector4::new(0.0, 0.0, 1.0, -2.0) / s, epsilon = 1e-15);

        // Antipodal raw vector flips back onto the reference.
        let r = coeff([0.0, 0.0, 1.0, -2.0]);
        let aligned =
            BoundaryCoefficients::normalize(Vector4::new(0.0, 0.0, -1.0, 2.0), Some(&r)).unwrap();
        assert!(aligned.as_vector().dot(r.as_vector()) > 0.0);

        assert_eq!(
            BoundaryCoefficients::normalize(Vector4::zeros(), None),
            Err(GeometryError::ZeroVector)
        );
    }

    proptest! {
        /// Homogeneity: any nonzero scaling of β leaves the normalized model
        /// and every scale-insensitive quantity unchanged.
        #[test]
        fn homogeneity(raw in prop::array::uniform4(-10.0..10.0f64), c in prop_oneof![Just(-3.0), Just(0.5), Just(10.0)],
                       r in 0.0..60.0f64, theta in -1.5..1.5f64) {
            let v = Vector4::from_column_slice(&raw);
            prop_assume!(v.norm() > 1e-6);
            let b = BoundaryCoefficients::normalize(v, None).unwrap();
            let bc = BoundaryCoefficients::normalize(c * v, None).unwrap();
            prop_assert!((b.as_vector() - bc.as_vector()).norm() < 1e-12);

            let p = polar(r, theta);
            prop_assert!((evaluate(&b, &p).abs() - evaluate(&bc, &p).abs()).abs() < 1e-12);

            let (da, db) = (geometric_distance(p.to_cartesian(), &b), geometric_distance(p.to_cartesian(), &bc));
            match (da, db) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-9),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "distance branches disagree under scaling"),
            }
        }

        /// r² = x² + y² for every basis vector.
        #[test]
        fn basis_consistency(r in 0.0..100.0f64, theta in -3.0..3.0f64) {
            let phi = basis(&polar(r, theta));
            prop_assert!((phi[0] - (phi[1] * phi[1] + phi[2] * phi[2])).abs() <= 1e-9 * phi[0].max(1.0));
            prop_assert_eq!(phi[3], 1.0);
        }

        /// fit_exact leaves zero residual on its three defining points.
        #[test]
        fn fit_exact_zero_residual(seedpts in prop::array::uniform3((0.5..50.0f64, -1.4..1.4f64))) {
            let pts: Vec<PolarPoint> = seedpts.iter().map(|&(r, t)| polar(r, t)).collect();
            if let Ok(beta) = fit_exact(&pts[0], &pts[1], &pts[2]) {
                for p in &pts {
                    prop_assert!(evaluate(&beta, p).abs() <= 1e-9 * basis(p).norm());
                }
            }
        }

        /// Parametric points on a circle or line are at distance zero.
        #[test]
        fn distance_zero_on_curve(cx in -20.0..20.0f64, cy in -20.0..20.0f64, radius in 0.5..30.0f64, t in 0.0..6.28f64) {
            let circle = circle_coeffs(cx, cy, radius);
            let p = Vector2::new(cx + radius * t.cos(), cy + radius * t.sin());
            prop_assert!(geometric_distance(p, &circle).unwrap().abs() < 1e-9);

            let line = coeff([0.0, (t).sin(), (t).cos(), cx]);
            // Point on the line: pick the closest point to (cy, cx) projected.
            let n = Vector2::new(t.sin(), t.cos());
            let q = Vector2::new(cy, cx * 0.5);
            let on_line = q - (n.dot(&q) + cx) * n;
            prop_assert!(geometric_distance(on_line, &line).unwrap().abs() < 1e-9);
        }
    }
}
