//! Iteratively reweighted rotation solve.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::eigen::CoplanarityMatrix;
use crate::rotation::{
    lm_minimize, LmConfig, LmReport, RotationPair, RotationProblem, WeightLimits, WeightState,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrlsConfig {
    /// Number of LM solves; weights are refreshed between consecutive solves.
    pub loops: usize,
    /// With `false` a single unweighted LM solve is run.
    pub reweight: bool,
    pub lm: LmConfig,
    pub limits: WeightLimits,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            loops: 5,
            reweight: true,
            lm: LmConfig::default(),
            limits: WeightLimits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsOutcome {
    pub state: RotationPair,
    /// Weights the final LM solve ran with.
    pub weights: WeightState,
    pub reports: Vec<LmReport>,
    /// Index of the first loop whose LM solve hit the iteration cap.
    pub unconverged_loop: Option<usize>,
}

impl IrlsOutcome {
    pub fn final_cost(&self) -> f64 {
        self.reports.last().map_or(0.0, |r| r.final_cost)
    }

    pub fn lm_iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).sum()
    }
}

/// Direction of the point-term eigenvector for one pair: the translation
/// estimate implied by the rotation alone.
fn eigen_direction(problem: &RotationProblem<'_>, pair: &[usize], other: usize, state: &RotationPair) -> Vector3<f64> {
    let r = if other == 0 { state.r10() } else { state.r12() };
    let normals: Vec<Vector3<f64>> = pair
        .iter()
        .map(|&i| {
            let t = &problem.points[i];
            t.bearing(1).unwrap().cross(&(r * t.bearing(other).unwrap()))
        })
        .collect();
    CoplanarityMatrix::from_normals(normals.iter()).direction()
}

/// Runs the reweighting loop from `initial`.
///
/// `translation` supplies, for the current rotations, the directions from
/// camera 1 towards cameras 0 and 2; when it returns `None` the eigenvector
/// of each pair's coplanarity matrix is used instead.
pub fn irls_solve<F>(problem: &RotationProblem<'_>, initial: &RotationPair, cfg: &IrlsConfig, mut translation: F) -> IrlsOutcome
where
    F: FnMut(&RotationPair) -> Option<(Vector3<f64>, Vector3<f64>)>,
{
    let mut weights = WeightState::uniform(problem);
    let mut state = *initial;
    let mut reports = Vec::new();
    let mut unconverged_loop = None;
    let loops = if cfg.reweight { cfg.loops.max(1) } else { 1 };

    for index in 0..loops {
        if index > 0 {
            let (t10, t12) = translation(&state).unwrap_or_else(|| {
                (
                    eigen_direction(problem, &problem.pair10, 0, &state),
                    eigen_direction(problem, &problem.pair12, 2, &state),
                )
            });
            weights.refresh(problem, &state.r10(), &state.r12(), &t10, &t12, &cfg.limits);
        }
        let (next, report) = lm_minimize(problem, &weights, &state, &cfg.lm);
        if !report.converged() && unconverged_loop.is_none() {
            unconverged_loop = Some(index);
        }
        state = next;
        reports.push(report);
    }

    IrlsOutcome {
        state,
        weights,
        reports,
        unconverged_loop,
    }
}
