//! Rotation estimation: the coplanarity costs, their Levenberg-Marquardt
//! minimization over the two Cayley vectors, and the reweighting loop.

pub mod cost;
pub mod covariance;
pub mod irls;
pub mod lm;
pub mod weights;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3, Vector6};
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::geometry::Cayley;
use crate::Result;

pub use cost::{
    combined_cost, evaluate, nbc_matrix, nbc_mini_residual, nbc_mult_residual, nec_matrix,
    CostModel, Evaluation, LineForm, RotationProblem,
};
pub use irls::{irls_solve, IrlsConfig, IrlsOutcome};
pub use lm::{lm_minimize, LmConfig, LmReport, Termination};
pub use weights::{line_weight, point_weight, WeightLimits, WeightState};

/// The two unknown relative rotations `R10` and `R12` as Cayley vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationPair {
    pub c10: Cayley,
    pub c12: Cayley,
}

impl Default for RotationPair {
    fn default() -> Self {
        Self::identity()
    }
}

impl RotationPair {
    pub fn identity() -> Self {
        Self {
            c10: Cayley::identity(),
            c12: Cayley::identity(),
        }
    }

    pub fn from_matrices(r10: &Matrix3<f64>, r12: &Matrix3<f64>) -> Result<Self> {
        Ok(Self {
            c10: Cayley::from_matrix(r10)?,
            c12: Cayley::from_matrix(r12)?,
        })
    }

    pub fn r10(&self) -> Matrix3<f64> {
        self.c10.to_matrix()
    }

    pub fn r12(&self) -> Matrix3<f64> {
        self.c12.to_matrix()
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let (a, b) = (self.c10.0, self.c12.0);
        Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            c10: Cayley(Vector3::new(v[0], v[1], v[2])),
            c12: Cayley(Vector3::new(v[3], v[4], v[5])),
        }
    }

    pub fn offset(&self, delta: &Vector6<f64>) -> Self {
        Self::from_vector(&(self.to_vector() + delta))
    }

    /// Both rotations turned by `angle` radians about independent random axes.
    pub fn perturbed(&self, angle: f64, rng: &mut impl Rng) -> Result<Self> {
        Self::from_matrices(
            &rotate_randomly(&self.r10(), angle, rng),
            &rotate_randomly(&self.r12(), angle, rng),
        )
    }

    /// Both rotations turned about random axes by angles drawn uniformly from
    /// `[0, max_angle]`.
    pub fn jittered(&self, max_angle: f64, rng: &mut impl Rng) -> Result<Self> {
        let a = rng.random_range(0.0..=max_angle);
        let b = rng.random_range(0.0..=max_angle);
        Self::from_matrices(&rotate_randomly(&self.r10(), a, rng), &rotate_randomly(&self.r12(), b, rng))
    }
}

/// `r` composed with a rotation of `angle` about a uniformly random axis.
pub fn rotate_randomly(r: &Matrix3<f64>, angle: f64, rng: &mut impl Rng) -> Matrix3<f64> {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let axis = Unit::new_normalize(Vector3::from(axis));
    r * Rotation3::from_axis_angle(&axis, angle).into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_angle;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perturbation_has_requested_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = RotationPair::from_vector(&Vector6::new(0.1, -0.2, 0.05, 0.3, 0.0, -0.1));
        for deg in [0.0f64, 1.0, 5.0, 10.0] {
            let p = base.perturbed(deg.to_radians(), &mut rng).unwrap();
            assert_relative_eq!(rotation_angle(&(base.r10().transpose() * p.r10())), deg.to_radians(), epsilon = 1e-12);
            assert_relative_eq!(rotation_angle(&(base.r12().transpose() * p.r12())), deg.to_radians(), epsilon = 1e-12);
        }
        for _ in 0..50 {
            let p = base.jittered(0.05, &mut rng).unwrap();
            assert!(rotation_angle(&(base.r10().transpose() * p.r10())) <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn vector_round_trip() {
        let v = Vector6::new(0.1, 0.2, 0.3, -0.4, 0.5, -0.6);
        assert_eq!(RotationPair::from_vector(&v).to_vector(), v);
    }
}
