//! Inverse-variance weights of the point and line residuals.
//!
//! Both are first-order propagations: the residual's gradient with respect to
//! the observed unit vectors, contracted with their covariances.

use nalgebra::{Matrix3, Vector3};

use crate::rotation::RotationProblem;
use crate::tracks::{LineTrack, PointTrack};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for WeightLimits {
    fn default() -> Self {
        Self { min: 1e-4, max: 1e8 }
    }
}

impl WeightLimits {
    /// `1 / variance`, clamped. Zero or non-finite variance maps to `max`.
    pub fn inverse(&self, variance: f64) -> f64 {
        if !(variance > 0.0) || !variance.is_finite() {
            return self.max;
        }
        (1.0 / variance).clamp(self.min, self.max)
    }
}

/// Per-term weights of a [`RotationProblem`], in the order of its term lists.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    pub point10: Vec<f64>,
    pub point12: Vec<f64>,
    pub line: Vec<f64>,
}

impl WeightState {
    pub fn uniform(problem: &RotationProblem<'_>) -> Self {
        Self {
            point10: vec![1.0; problem.pair10.len()],
            point12: vec![1.0; problem.pair12.len()],
            line: vec![1.0; problem.line_terms.len()],
        }
    }

    /// Recomputes every weight at the given rotations. `t10` and `t12` are the
    /// directions of cameras 0 and 2 seen from camera 1 (sign irrelevant).
    pub fn refresh(
        &mut self,
        problem: &RotationProblem<'_>,
        r10: &Matrix3<f64>,
        r12: &Matrix3<f64>,
        t10: &Vector3<f64>,
        t12: &Vector3<f64>,
        limits: &WeightLimits,
    ) {
        for (w, &i) in self.point10.iter_mut().zip(&problem.pair10) {
            *w = point_weight(&problem.points[i], 0, r10, t10, limits);
        }
        for (w, &i) in self.point12.iter_mut().zip(&problem.pair12) {
            *w = point_weight(&problem.points[i], 2, r12, t12, limits);
        }
        for (w, &i) in self.line.iter_mut().zip(&problem.line_terms) {
            *w = line_weight(&problem.lines[i], r10, r12, limits);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.point10
            .iter()
            .chain(&self.point12)
            .chain(&self.line)
            .all(|w| w.is_finite() && *w > 0.0)
    }
}

/// Variance of `tᵀ(b1 x R bk)` under the bearing covariances of frames 1 and
/// `other`.
pub fn point_variance(track: &PointTrack, other: usize, r1k: &Matrix3<f64>, t: &Vector3<f64>) -> f64 {
    let (Some(o1), Some(ok)) = (track.obs[1].as_ref(), track.obs[other].as_ref()) else {
        return 0.0;
    };
    let Some(t) = t.try_normalize(0.0) else {
        return 0.0;
    };
    let g1 = (r1k * ok.bearing).cross(&t);
    let gk = r1k.transpose() * t.cross(&o1.bearing);
    (g1.transpose() * o1.bearing_cov * g1)[0] + (gk.transpose() * ok.bearing_cov * gk)[0]
}

pub fn point_weight(
    track: &PointTrack,
    other: usize,
    r1k: &Matrix3<f64>,
    t: &Vector3<f64>,
    limits: &WeightLimits,
) -> f64 {
    limits.inverse(point_variance(track, other, r1k, t))
}

/// Gradients of `n0 · (n1 x n2)` (with `n0 = R10 m0`, `n2 = R12 m2`) with
/// respect to the observed normals `m0, m1, m2`.
pub fn line_residual_gradients(track: &LineTrack, r10: &Matrix3<f64>, r12: &Matrix3<f64>) -> [Vector3<f64>; 3] {
    let [m0, n1, m2] = track.normals();
    let n0 = r10 * m0;
    let n2 = r12 * m2;
    [
        r10.transpose() * n1.cross(&n2),
        n2.cross(&n0),
        r12.transpose() * n0.cross(&n1),
    ]
}

pub fn line_variance(track: &LineTrack, r10: &Matrix3<f64>, r12: &Matrix3<f64>) -> f64 {
    let grads = line_residual_gradients(track, r10, r12);
    grads
        .iter()
        .zip(&track.views)
        .map(|(g, v)| (g.transpose() * v.normal_cov * g)[0])
        .sum()
}

pub fn line_weight(track: &LineTrack, r10: &Matrix3<f64>, r12: &Matrix3<f64>, limits: &WeightLimits) -> f64 {
    limits.inverse(line_variance(track, r10, r12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bearing_from_pixel, CameraIntrinsics, PixelPoint};
    use crate::scene::{generate_scene, ScenarioConfig};
    use approx::assert_relative_eq;
    use nalgebra::Matrix2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy_scene(noise: f64, seed: u64) -> crate::scene::ThreeViewScene {
        generate_scene(&ScenarioConfig {
            n_points: 10,
            n_lines: 10,
            noise_std: noise,
            rng_seed: seed,
            ..ScenarioConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_covariance_hits_upper_clamp() {
        let s = noisy_scene(0.0, 1);
        let limits = WeightLimits::default();
        let t = s.gt_frame1_directions().0;
        assert_eq!(point_weight(&s.point_tracks[0], 0, &s.gt_r10, &t, &limits), limits.max);
        assert_eq!(line_weight(&s.line_tracks[0], &s.gt_r10, &s.gt_r12, &limits), limits.max);
    }

    #[test]
    fn line_variance_scales_with_sigma_squared() {
        let s = noisy_scene(1.0, 2);
        let base = &s.line_tracks[3];
        let k = s.intrinsics;
        let at = |sigma: f64| {
            let mut lines = base.views.map(|v| v.line);
            for l in &mut lines {
                l.foot_offset = 0.0;
            }
            let t = LineTrack::new(0, &k, lines, sigma).unwrap();
            line_variance(&t, &s.gt_r10, &s.gt_r12)
        };
        // the normal covariance is an unscented propagation, so only close to quadratic
        assert_relative_eq!(at(2.0), 4.0 * at(1.0), max_relative = 1e-3);
    }

    #[test]
    fn point_variance_scales_linearly_with_covariance() {
        let s = noisy_scene(0.0, 3);
        let k = s.intrinsics;
        let pixels = s.point_tracks[2].pixels();
        let t = s.gt_frame1_directions().0;
        let var = |c: f64| {
            let track = PointTrack::new(0, &k, pixels, Matrix2::identity() * c).unwrap();
            point_variance(&track, 0, &s.gt_r10, &t)
        };
        assert_relative_eq!(var(3.0), 3.0 * var(1.0), max_relative = 1e-12);
    }

    #[test]
    fn line_gradients_match_finite_differences() {
        let s = noisy_scene(1.0, 4);
        let track = &s.line_tracks[5];
        let r10 = s.gt_r10;
        let r12 = s.gt_r12;
        let e = |m: [Vector3<f64>; 3]| (r10 * m[0]).dot(&m[1].cross(&(r12 * m[2])));
        let grads = line_residual_gradients(track, &r10, &r12);
        let m = track.normals();
        let h = 1e-6;
        let mut fd_var = 0.0;
        for k in 0..3 {
            let mut g = Vector3::zeros();
            for a in 0..3 {
                let (mut p, mut q) = (m, m);
                p[k][a] += h;
                q[k][a] -= h;
                g[a] = (e(p) - e(q)) / (2.0 * h);
            }
            assert_relative_eq!(g, grads[k], max_relative = 1e-6, epsilon = 1e-12);
            fd_var += (g.transpose() * track.views[k].normal_cov * g)[0];
        }
        assert_relative_eq!(fd_var, line_variance(track, &r10, &r12), max_relative = 1e-6);
    }

    #[test]
    fn point_variance_matches_monte_carlo() {
        let s = noisy_scene(0.0, 5);
        let k: CameraIntrinsics = s.intrinsics;
        let track = &s.point_tracks[4];
        let sigma = 1.0;
        let cov = Matrix2::identity() * sigma * sigma;
        let px = track.pixels();
        let noisy = PointTrack::new(0, &k, px, cov).unwrap();
        let t = s.gt_frame1_directions().0;
        let predicted = point_variance(&noisy, 0, &s.gt_r10, &t);

        let (p0, p1) = (px[0].unwrap(), px[1].unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, sigma).unwrap();
        let n = 100_000;
        let mut jitter = |p: PixelPoint| PixelPoint::new(p.u + normal.sample(&mut rng), p.v + normal.sample(&mut rng));
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let b0 = *bearing_from_pixel(jitter(p0), &k).as_vector();
                let b1 = *bearing_from_pixel(jitter(p1), &k).as_vector();
                t.normalize().dot(&b1.cross(&(s.gt_r10 * b0)))
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert_relative_eq!(predicted, var, max_relative = 0.15);
    }

    #[test]
    fn weights_refresh_stays_finite() {
        let s = noisy_scene(0.8, 6);
        let p = RotationProblem::new(&s.point_tracks, &s.line_tracks, crate::rotation::CostModel::POINTS_AND_LINES);
        let mut w = WeightState::uniform(&p);
        let (t10, t12) = s.gt_frame1_directions();
        w.refresh(&p, &s.gt_r10, &s.gt_r12, &t10, &t12, &WeightLimits::default());
        assert!(w.all_finite());
        assert!(w.point10.iter().all(|&x| x > 1.0));
    }
}
