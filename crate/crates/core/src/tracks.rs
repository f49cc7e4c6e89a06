//! Feature tracks across the three frames.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector3};

use crate::geometry::{
    backprojected_normal, bearing_from_pixel, line_from_endpoints, CameraIntrinsics,
    LineObservation, PixelPoint,
};
use crate::rotation::covariance::{line_covariance, normal_covariance_unscented};
use crate::{Error, Result};

/// One observation of a point in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointObservation {
    pub pixel: PixelPoint,
    pub bearing: Vector3<f64>,
    /// `K^-1 (u, v, 1)`, homogeneous calibrated coordinates.
    pub ray: Vector3<f64>,
    pub pixel_cov: Matrix2<f64>,
    /// First-order covariance of `bearing` induced by `pixel_cov`.
    pub bearing_cov: Matrix3<f64>,
}

impl PointObservation {
    pub fn new(k: &CameraIntrinsics, pixel: PixelPoint, pixel_cov: Matrix2<f64>) -> Self {
        let ray = k.normalized_ray(pixel);
        let bearing = *bearing_from_pixel(pixel, k).as_vector();
        let dray = Matrix3x2::new(1.0 / k.fx, 0.0, 0.0, 1.0 / k.fy, 0.0, 0.0);
        let jac = (Matrix3::identity() - bearing * bearing.transpose()) / ray.norm() * dray;
        Self {
            pixel,
            bearing,
            ray,
            pixel_cov,
            bearing_cov: jac * pixel_cov * jac.transpose(),
        }
    }
}

/// A point observed in at least two of the frames 0, 1, 2.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTrack {
    pub id: u64,
    pub obs: [Option<PointObservation>; 3],
}

impl PointTrack {
    pub fn new(
        id: u64,
        k: &CameraIntrinsics,
        pixels: [Option<PixelPoint>; 3],
        pixel_cov: Matrix2<f64>,
    ) -> Result<Self> {
        let obs = pixels.map(|p| {
            p.filter(PixelPoint::is_finite)
                .map(|p| PointObservation::new(k, p, pixel_cov))
        });
        if obs.iter().flatten().count() < 2 {
            return Err(Error::NotEnoughFeatures(format!(
                "point track {id} is observed in fewer than two frames"
            )));
        }
        Ok(Self { id, obs })
    }

    /// Isotropic pixel noise of standard deviation `sigma`.
    pub fn isotropic(
        id: u64,
        k: &CameraIntrinsics,
        pixels: [Option<PixelPoint>; 3],
        sigma: f64,
    ) -> Result<Self> {
        Self::new(id, k, pixels, Matrix2::identity() * sigma * sigma)
    }

    pub fn observed(&self, frame: usize) -> bool {
        self.obs[frame].is_some()
    }

    pub fn bearing(&self, frame: usize) -> Option<&Vector3<f64>> {
        self.obs[frame].as_ref().map(|o| &o.bearing)
    }

    pub fn pixels(&self) -> [Option<PixelPoint>; 3] {
        self.obs.map(|o| o.map(|o| o.pixel))
    }
}

/// One frame's view of a line: the fitted observation, its back-projected
/// plane normal and that normal's covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineView {
    pub line: LineObservation,
    pub normal: Vector3<f64>,
    pub normal_cov: Matrix3<f64>,
    /// Calibrated rays `K^-1 p` through the two segment endpoints.
    pub endpoint_rays: [Vector3<f64>; 2],
}

/// A line observed in all three frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LineTrack {
    pub id: u64,
    pub views: [LineView; 3],
    pub sigma: f64,
}

impl LineTrack {
    /// `sigma` is the perpendicular endpoint uncertainty in pixels.
    pub fn new(
        id: u64,
        k: &CameraIntrinsics,
        lines: [LineObservation; 3],
        sigma: f64,
    ) -> Result<Self> {
        let mut views = Vec::with_capacity(3);
        for (frame, line) in lines.into_iter().enumerate() {
            let cov = line_covariance(sigma, line.length, line.foot_offset)?;
            views.push(LineView {
                line,
                normal: backprojected_normal(&line, k, frame).n,
                normal_cov: normal_covariance_unscented(&line, &cov, k).covariance,
                endpoint_rays: line.endpoints.map(|p| k.normalized_ray(p)),
            });
        }
        let views: [LineView; 3] = views.try_into().expect("three views");
        Ok(Self { id, views, sigma })
    }

    pub fn from_endpoints(
        id: u64,
        k: &CameraIntrinsics,
        endpoints: [[PixelPoint; 2]; 3],
        sigma: f64,
    ) -> Result<Self> {
        let mut lines = Vec::with_capacity(3);
        for [a, b] in endpoints {
            lines.push(line_from_endpoints(a, b)?);
        }
        Self::new(id, k, lines.try_into().expect("three lines"), sigma)
    }

    pub fn normals(&self) -> [Vector3<f64>; 3] {
        self.views.map(|v| v.normal)
    }

    pub fn endpoints(&self) -> [[PixelPoint; 2]; 3] {
        self.views.map(|v| v.line.endpoints)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn point_track_needs_two_frames() {
        let k = CameraIntrinsics::from_focal(800.0).unwrap();
        let p = Some(PixelPoint::new(10.0, 20.0));
        assert!(PointTrack::isotropic(0, &k, [p, None, None], 1.0).is_err());
        assert!(PointTrack::isotropic(0, &k, [p, Some(PixelPoint::new(f64::NAN, 0.0)), None], 1.0).is_err());
        let t = PointTrack::isotropic(0, &k, [p, p, None], 1.0).unwrap();
        assert!(t.observed(0) && t.observed(1) && !t.observed(2));
    }

    #[test]
    fn bearing_covariance_matches_finite_differences() {
        let k = CameraIntrinsics::new(800.0, 760.0, 15.0, -20.0).unwrap();
        let p = PixelPoint::new(250.0, -130.0);
        let obs = PointObservation::new(&k, p, Matrix2::identity());
        let h = 1e-4;
        let b = |u: f64, v: f64| *bearing_from_pixel(PixelPoint::new(u, v), &k).as_vector();
        let du = (b(p.u + h, p.v) - b(p.u - h, p.v)) / (2.0 * h);
        let dv = (b(p.u, p.v + h) - b(p.u, p.v - h)) / (2.0 * h);
        let expected = du * du.transpose() + dv * dv.transpose();
        assert_relative_eq!(obs.bearing_cov, expected, epsilon = 1e-14, max_relative = 1e-6);
    }
}
