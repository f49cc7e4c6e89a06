//! Camera model, observation types and the elementary constructions every
//! solver consumes: bearing vectors, epipolar-plane normals and back-projected
//! plane normals.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive and finite, got fx={fx}, fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidIntrinsics(
                "principal point must be finite".into(),
            ));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Square pixels with the principal point at the origin.
    pub fn from_focal(focal: f64) -> Result<Self> {
        Self::new(focal, focal, 0.0, 0.0)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// `K^-1 p` with the homogeneous coordinate kept at 1.
    pub fn normalized_ray(&self, p: PixelPoint) -> Vector3<f64> {
        Vector3::new((p.u - self.cx) / self.fx, (p.v - self.cy) / self.fy, 1.0)
    }

    /// Projects a point given in camera coordinates. `None` when it is not in
    /// front of the camera.
    pub fn project(&self, x: &Vector3<f64>) -> Option<PixelPoint> {
        if x.z <= 0.0 {
            return None;
        }
        Some(PixelPoint::new(
            self.fx * x.x / x.z + self.cx,
            self.fy * x.y / x.z + self.cy,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn homogeneous(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, 1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }
}

/// Unit-norm viewing ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingVector(Vector3<f64>);

impl BearingVector {
    pub fn new_normalize(v: Vector3<f64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroDirection);
        }
        Ok(Self(v / norm))
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Vector3<f64> {
        self.0
    }
}

/// Unit bearing `K^-1 p / |K^-1 p|`.
pub fn bearing_from_pixel(p: PixelPoint, k: &CameraIntrinsics) -> BearingVector {
    let ray = k.normalized_ray(p);
    BearingVector(ray / ray.norm())
}

/// Unnormalized normal of the epipolar plane, `b0 x R01 b1`, in frame 0.
///
/// Vanishes when the two rays are parallel; callers treat a norm below
/// `1e-12` as an uninformative term.
pub fn epipolar_normal(b0: &Vector3<f64>, b1: &Vector3<f64>, r01: &Matrix3<f64>) -> Vector3<f64> {
    b0.cross(&(r01 * b1))
}

/// An image line in polar form together with the segment it was fitted to.
///
/// The line coefficients are `l = (sin θ, -cos θ, ρ)` so that `l · (u, v, 1) = 0`
/// on the line. `ρ >= 0` and `θ ∈ [0, 2π)`. `foot_offset` is the signed
/// position of the segment midpoint along the direction `(cos θ, sin θ)`,
/// measured from the foot of the perpendicular from the image origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineObservation {
    pub rho: f64,
    pub theta: f64,
    pub endpoints: [PixelPoint; 2],
    /// Segment length `c` in pixels.
    pub length: f64,
    /// Signed foot-point to midpoint distance `d` in pixels.
    pub foot_offset: f64,
}

impl LineObservation {
    pub fn coefficients(&self) -> Vector3<f64> {
        line_coefficients(self.theta, self.rho)
    }

    pub fn residual(&self, p: PixelPoint) -> f64 {
        self.coefficients().dot(&p.homogeneous())
    }
}

pub fn line_coefficients(theta: f64, rho: f64) -> Vector3<f64> {
    let (s, c) = theta.sin_cos();
    Vector3::new(s, -c, rho)
}

/// Fits the polar line through two image points.
pub fn line_from_endpoints(p1: PixelPoint, p2: PixelPoint) -> Result<LineObservation> {
    let delta = p2.as_vector() - p1.as_vector();
    let length = delta.norm();
    if !(length >= 1e-9) {
        return Err(Error::DegenerateSegment(length));
    }
    // unit normal a = (sin θ, -cos θ), line: a·p + ρ = 0
    let mut a = Vector2::new(-delta.y, delta.x) / length;
    let mid = 0.5 * (p1.as_vector() + p2.as_vector());
    let mut rho = -a.dot(&mid);
    if rho < 0.0 || (rho == 0.0 && a.x < 0.0) {
        a = -a;
        rho = -rho;
    }
    let mut theta = a.x.atan2(-a.y);
    if theta < 0.0 {
        theta += TAU;
    }
    if theta >= TAU {
        theta -= TAU;
    }
    let direction = Vector2::new(-a.y, a.x);
    Ok(LineObservation {
        rho,
        theta,
        endpoints: [p1, p2],
        length,
        foot_offset: direction.dot(&mid),
    })
}

/// Back-projected plane normal in a camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneNormal {
    pub n: Vector3<f64>,
    pub frame: usize,
}

/// Unit normal `K^T l / |K^T l|` of the plane through the optical center and
/// the image line.
pub fn backprojected_normal(l: &LineObservation, k: &CameraIntrinsics, frame: usize) -> PlaneNormal {
    PlaneNormal {
        n: backprojected_normal_from_coefficients(&l.coefficients(), k),
        frame,
    }
}

pub(crate) fn backprojected_normal_from_coefficients(
    l: &Vector3<f64>,
    k: &CameraIntrinsics,
) -> Vector3<f64> {
    let v = k.matrix().transpose() * l;
    v / v.norm()
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Cayley (Gibbs) parameters `c = tan(θ/2) · axis`.
///
/// `R = (I - [c]x)^-1 (I + [c]x)`, singular only at 180 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cayley(pub Vector3<f64>);

impl Cayley {
    pub fn identity() -> Self {
        Self(Vector3::zeros())
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let c = &self.0;
        let s = c.norm_squared();
        ((1.0 - s) * Matrix3::identity() + 2.0 * c * c.transpose() + 2.0 * skew(c)) / (1.0 + s)
    }

    pub fn to_rotation(&self) -> Rotation3<f64> {
        Rotation3::from_matrix_unchecked(self.to_matrix())
    }

    pub fn from_matrix(r: &Matrix3<f64>) -> Result<Self> {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
        let (w, v) = (q.w, q.imag());
        if w.abs() < 1e-12 {
            return Err(Error::CayleySingular);
        }
        Ok(Self(v / w))
    }

    /// Partial derivatives `∂R/∂c_i`.
    pub fn jacobian(&self) -> [Matrix3<f64>; 3] {
        let c = &self.0;
        let s = 1.0 + c.norm_squared();
        let r = self.to_matrix();
        std::array::from_fn(|i| {
            let mut e = Vector3::zeros();
            e[i] = 1.0;
            let da = -2.0 * c[i] * Matrix3::identity()
                + 2.0 * (e * c.transpose() + c * e.transpose())
                + 2.0 * skew(&e);
            (da - 2.0 * c[i] * r) / s
        })
    }
}

/// Rotation angle in radians, `2 atan2(|q_v|, |q_w|)`.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    2.0 * q.imag().norm().atan2(q.w.abs())
}

/// Sum of the angles of `R_gt^T R_est` over the two relative rotations, in degrees.
pub fn rotation_error(
    gt_a: &Matrix3<f64>,
    est_a: &Matrix3<f64>,
    gt_b: &Matrix3<f64>,
    est_b: &Matrix3<f64>,
) -> f64 {
    (rotation_angle(&(gt_a.transpose() * est_a)) + rotation_angle(&(gt_b.transpose() * est_b)))
        .to_degrees()
}

pub fn direction_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::ZeroDirection);
    }
    // atan2 form keeps precision near 0 and 180 degrees
    Ok(a.cross(b).norm().atan2(a.dot(b)))
}

/// Sum of the angles between ground-truth and estimated translation
/// directions, in degrees.
pub fn translation_direction_error(
    gt_a: &Vector3<f64>,
    est_a: &Vector3<f64>,
    gt_b: &Vector3<f64>,
    est_b: &Vector3<f64>,
) -> Result<f64> {
    Ok((direction_angle(gt_a, est_a)? + direction_angle(gt_b, est_b)?).to_degrees())
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % TAU;
    if x > PI {
        x -= TAU;
    } else if x <= -PI {
        x += TAU;
    }
    x
}
