//! Uncertainty of line observations and of their back-projected normals.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::geometry::{backprojected_normal_from_coefficients, line_coefficients, CameraIntrinsics, LineObservation};
use crate::{Error, Result};

/// Covariance of a line over `(θ, ρ)`, derived from a perpendicular endpoint
/// uncertainty `sigma_line`.
///
/// With segment length `c` and signed foot-to-midpoint offset `d`:
///
/// ```text
/// | 2σ²/c²      -2dσ²/c²          |
/// | -2dσ²/c²    (1/2 + 2d²/c²)σ²  |
/// ```
///
/// The first row is the angle, the second the distance: a segment fitted to
/// two endpoints with independent perpendicular errors has `var θ = 2σ²/c²`,
/// and the midpoint's perpendicular error `σ²/2` maps into `ρ` together with
/// the lever arm `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineCovariance {
    pub matrix: Matrix2<f64>,
    pub sigma_line: f64,
}

pub fn line_covariance(sigma_line: f64, length: f64, foot_offset: f64) -> Result<LineCovariance> {
    if !(length >= 1e-6) {
        return Err(Error::DegenerateSegment(length));
    }
    let s2 = sigma_line * sigma_line;
    let c2 = length * length;
    let d = foot_offset;
    let off = -2.0 * d * s2 / c2;
    Ok(LineCovariance {
        matrix: Matrix2::new(2.0 * s2 / c2, off, off, (0.5 + 2.0 * d * d / c2) * s2),
        sigma_line,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalCovariance {
    pub covariance: Matrix3<f64>,
    /// Set when the line covariance was not positive definite and had to be
    /// regularized before taking its square root.
    pub regularized: bool,
}

fn cholesky2(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let l00 = m[(0, 0)].sqrt();
    if !(l00 > 0.0) {
        return None;
    }
    let l10 = m[(1, 0)] / l00;
    let rem = m[(1, 1)] - l10 * l10;
    if !(rem > 0.0) {
        return None;
    }
    Some(Matrix2::new(l00, 0.0, l10, rem.sqrt()))
}

/// Propagates the `(θ, ρ)` covariance into the unit back-projected normal with
/// the unscented transform (α = 1, β = 0, κ = 1).
pub fn normal_covariance_unscented(
    l: &LineObservation,
    cov: &LineCovariance,
    k: &CameraIntrinsics,
) -> NormalCovariance {
    if cov.matrix == Matrix2::zeros() {
        return NormalCovariance {
            covariance: Matrix3::zeros(),
            regularized: false,
        };
    }
    let (sqrt, regularized) = match cholesky2(&cov.matrix) {
        Some(s) => (s, false),
        None => {
            let reg = cov.matrix + Matrix2::identity() * 1e-12;
            match cholesky2(&reg) {
                Some(s) => (s, true),
                None => {
                    return NormalCovariance {
                        covariance: Matrix3::zeros(),
                        regularized: true,
                    }
                }
            }
        }
    };

    const DIM: f64 = 2.0;
    const LAMBDA: f64 = 1.0;
    let spread = (DIM + LAMBDA).sqrt();
    let w0 = LAMBDA / (DIM + LAMBDA);
    let wi = 1.0 / (2.0 * (DIM + LAMBDA));

    let center = Vector2::new(l.theta, l.rho);
    let map = |x: Vector2<f64>| backprojected_normal_from_coefficients(&line_coefficients(x[0], x[1]), k);
    let mut points = [Vector3::zeros(); 5];
    points[0] = map(center);
    for i in 0..2 {
        let col = sqrt.column(i) * spread;
        points[1 + 2 * i] = map(center + col);
        points[2 + 2 * i] = map(center - col);
    }
    let mean = points[0] * w0 + points[1..].iter().fold(Vector3::zeros(), |acc, p| acc + p * wi);
    let mut covariance = Matrix3::zeros();
    for (i, p) in points.iter().enumerate() {
        let w = if i == 0 { w0 } else { wi };
        let d = p - mean;
        covariance += w * d * d.transpose();
    }
    NormalCovariance {
        covariance,
        regularized,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::line_from_endpoints;
    use crate::geometry::PixelPoint;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn closed_form_values() {
        let c = line_covariance(1.0, 2.0, 0.0).unwrap();
        assert_relative_eq!(c.matrix, Matrix2::new(0.5, 0.0, 0.0, 0.5), epsilon = 1e-15);
        let c = line_covariance(1.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(c.matrix, Matrix2::new(0.5, -0.5, -0.5, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn short_segment_rejected() {
        assert!(line_covariance(1.0, 1e-7, 0.0).is_err());
    }

    #[test]
    fn psd_over_grid() {
        for &s in &[0.1, 0.5, 1.0, 3.0] {
            for &c in &[1e-3, 0.5, 10.0, 300.0] {
                for &d in &[-500.0, -3.0, 0.0, 0.7, 250.0] {
                    let m = line_covariance(s, c, d).unwrap().matrix;
                    assert_eq!(m[(0, 1)], m[(1, 0)]);
                    let e = m.symmetric_eigenvalues();
                    let scale = m.abs().max();
                    assert!(e.min() >= -1e-12 * scale, "{s} {c} {d}: {e}");
                    // closed-form determinant: σ⁴/c²
                    let diag = m[(0, 0)] * m[(1, 1)];
                    assert!((m.determinant() - s.powi(4) / (c * c)).abs() <= 1e-9 * diag + 1e-12);
                }
            }
        }
    }

    fn sample_line() -> (LineObservation, CameraIntrinsics) {
        let k = CameraIntrinsics::new(800.0, 800.0, 20.0, -10.0).unwrap();
        let l = line_from_endpoints(PixelPoint::new(-120.0, 40.0), PixelPoint::new(90.0, 160.0)).unwrap();
        (l, k)
    }

    #[test]
    fn zero_covariance_maps_to_zero() {
        let (l, k) = sample_line();
        let cov = line_covariance(0.0, l.length, l.foot_offset).unwrap();
        let n = normal_covariance_unscented(&l, &cov, &k);
        assert_eq!(n.covariance, Matrix3::zeros());
        assert!(!n.regularized);
    }

    #[test]
    fn vanishing_covariance_is_linear() {
        let (l, k) = sample_line();
        let mk = |eps: f64| {
            let cov = LineCovariance {
                matrix: Matrix2::identity() * eps,
                sigma_line: 0.0,
            };
            normal_covariance_unscented(&l, &cov, &k).covariance
        };
        let (a, b) = (mk(1e-8), mk(2e-8));
        assert!(a.norm() < 1e-6);
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-5);
    }

    #[test]
    fn singular_covariance_is_regularized() {
        let (l, k) = sample_line();
        let cov = LineCovariance {
            matrix: Matrix2::new(1e-4, 1e-4, 1e-4, 1e-4),
            sigma_line: 1.0,
        };
        assert!(normal_covariance_unscented(&l, &cov, &k).regularized);
    }

    #[test]
    fn agrees_with_monte_carlo() {
        let (l, k) = sample_line();
        let cov = line_covariance(1.5, l.length, l.foot_offset).unwrap();
        let ut = normal_covariance_unscented(&l, &cov, &k).covariance;

        let chol = cov.matrix.cholesky().unwrap().l();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let samples: Vec<Vector3<f64>> = (0..n)
            .map(|_| {
                let z = Vector2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                let x = Vector2::new(l.theta, l.rho) + chol * z;
                backprojected_normal_from_coefficients(&line_coefficients(x[0], x[1]), &k)
            })
            .collect();
        let mean = samples.iter().sum::<Vector3<f64>>() / n as f64;
        let mc = samples
            .iter()
            .map(|s| (s - mean) * (s - mean).transpose())
            .sum::<Matrix3<f64>>()
            / (n as f64 - 1.0);
        assert!((ut - mc).norm() < 0.1 * mc.norm(), "ut {ut} mc {mc}");
    }
}
