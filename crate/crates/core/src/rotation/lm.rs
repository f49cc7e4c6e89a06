//! Levenberg-Marquardt over the six Cayley parameters.

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::rotation::{evaluate, RotationPair, RotationProblem, WeightState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub relative_cost_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            relative_cost_tolerance: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Gradient,
    Step,
    CostStalled,
    /// Damping grew without finding a descent step.
    DampingOverflow,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub termination: Termination,
    /// Cost after every accepted step, starting with the initial cost.
    pub accepted_costs: Vec<f64>,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }
}

const MAX_DAMPING: f64 = 1e32;

fn solve_damped(jtj: &Matrix6<f64>, jtr: &Vector6<f64>, mu: f64) -> Option<Vector6<f64>> {
    let a = jtj + Matrix6::identity() * mu;
    a.cholesky().map(|c| -c.solve(jtr))
}

pub fn lm_minimize(
    problem: &RotationProblem<'_>,
    weights: &WeightState,
    initial: &RotationPair,
    cfg: &LmConfig,
) -> (RotationPair, LmReport) {
    let mut state = *initial;
    let mut eval = evaluate(problem, weights, &state, true);
    let mut report = LmReport {
        iterations: 0,
        initial_cost: eval.cost,
        final_cost: eval.cost,
        termination: Termination::MaxIterations,
        accepted_costs: vec![eval.cost],
    };

    let max_diag = (0..6).map(|i| eval.jtj[(i, i)]).fold(0.0, f64::max);
    let mut mu = cfg.initial_damping * max_diag.max(f64::MIN_POSITIVE);

    while report.iterations < cfg.max_iterations {
        if eval.gradient().norm() < cfg.gradient_tolerance {
            report.termination = Termination::Gradient;
            break;
        }
        report.iterations += 1;

        let mut accepted = false;
        loop {
            if mu > MAX_DAMPING {
                report.termination = Termination::DampingOverflow;
                break;
            }
            let Some(delta) = solve_damped(&eval.jtj, &eval.jtr, mu) else {
                mu *= 2.0;
                continue;
            };
            if delta.norm() < cfg.step_tolerance {
                report.termination = Termination::Step;
                break;
            }
            let candidate = state.offset(&delta);
            let trial = evaluate(problem, weights, &candidate, true);
            if trial.cost.is_finite() && trial.cost < eval.cost {
                let decrease = (eval.cost - trial.cost) / eval.cost;
                state = candidate;
                eval = trial;
                report.accepted_costs.push(eval.cost);
                mu /= 3.0;
                accepted = true;
                if decrease < cfg.relative_cost_tolerance {
                    report.termination = Termination::CostStalled;
                }
                break;
            }
            mu *= 2.0;
        }
        if !accepted || report.termination == Termination::CostStalled {
            if !accepted && report.termination == Termination::MaxIterations {
                report.termination = Termination::Step;
            }
            break;
        }
    }
    report.final_cost = eval.cost;
    (state, report)
}
