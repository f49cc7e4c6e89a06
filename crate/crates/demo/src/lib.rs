//! Interactive demo operations, exported to JavaScript as JSON strings.
//!
//! Every export also has a plain Rust counterpart returning a typed result,
//! which is what the native tests call.

use nalgebra::Vector3;
use rt2pl::geometry::{rotation_error, translation_direction_error};
use rt2pl::pipeline::estimate_from_initial;
use rt2pl::rng::{derive_seed, stream, Domain};
use rt2pl::rotation::cost::{combined_cost, RotationProblem};
use rt2pl::rotation::WeightState;
use rt2pl::{
    estimate_three_view_pose, generate_scene, generate_scene_with_rotations, Cayley, EstimatorConfig, PixelPoint,
    RotationPair, ScenarioConfig, SolverVariant,
};
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

const SUCCESS_DEG: f64 = 0.5;

#[derive(Debug, Clone, Serialize)]
pub struct Landscape {
    pub resolution: usize,
    /// Cayley coordinates of the grid along x and y.
    pub axis_x: Vec<f64>,
    pub axis_y: Vec<f64>,
    pub truth: [f64; 3],
    /// Row-major over `(y, x)`, one grid per variant.
    pub mult: Vec<f64>,
    pub mini: Vec<f64>,
}

/// Line-only costs of both triple-product and smallest-eigenvalue forms over a
/// Cayley slice of `R10` through its true value.
pub fn landscape(seed: u64, lines: usize, noise: f64, half_width: f64, resolution: usize) -> rt2pl::Result<Landscape> {
    let resolution = resolution.clamp(3, 201);
    let cfg = ScenarioConfig {
        n_points: 0,
        n_lines: lines,
        noise_std: noise,
        rng_seed: seed,
        ..ScenarioConfig::default()
    };
    let truth = Vector3::new(0.2, 0.2, 0.2);
    let r12 = generate_scene(&cfg)?.gt_r12;
    let scene = generate_scene_with_rotations(&cfg, &Cayley(truth).to_matrix(), &r12)?;
    let c12 = scene.gt_rotation_pair().c12;
    let axis = |centre: f64| -> Vec<f64> {
        (0..resolution)
            .map(|i| centre - half_width + 2.0 * half_width * i as f64 / (resolution - 1) as f64)
            .collect()
    };
    let (axis_x, axis_y) = (axis(truth.x), axis(truth.y));
    let grid = |variant: SolverVariant| {
        let problem = RotationProblem::new(&scene.point_tracks, &scene.line_tracks, variant.cost_model());
        let weights = WeightState::uniform(&problem);
        let mut out = Vec::with_capacity(resolution * resolution);
        for &cy in &axis_y {
            for &cx in &axis_x {
                let state = RotationPair {
                    c10: Cayley(Vector3::new(cx, cy, truth.z)),
                    c12,
                };
                out.push(combined_cost(&problem, &weights, &state).0);
            }
        }
        out
    };
    Ok(Landscape {
        resolution,
        mult: grid(SolverVariant::NbcOnly),
        mini: grid(SolverVariant::NbcMini),
        axis_x,
        axis_y,
        truth: truth.into(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub outlier: bool,
    pub inlier: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub e_rot_deg: f64,
    /// `None` when the translation is reported as degenerate.
    pub e_t_deg: Option<f64>,
    pub pure_rotation: bool,
    pub point_inliers: usize,
    pub line_inliers: usize,
    pub points_rejected_correctly: usize,
    pub points_rejected_wrongly: usize,
    pub lines_rejected_correctly: usize,
    pub lines_rejected_wrongly: usize,
    /// Frame-1 observations for drawing; points as zero-length segments.
    pub points: Vec<Segment>,
    pub lines: Vec<Segment>,
    pub image_half_width: f64,
}

fn px(p: PixelPoint) -> [f64; 2] {
    [p.u, p.v]
}

/// Generates a scene and runs the robust estimator on it.
pub fn estimate(
    seed: u64,
    points: usize,
    lines: usize,
    noise: f64,
    outliers: f64,
    variant: SolverVariant,
) -> rt2pl::Result<EstimateReport> {
    let cfg = ScenarioConfig {
        n_points: points,
        n_lines: lines,
        noise_std: noise,
        outlier_fraction: outliers,
        rng_seed: seed,
        ..ScenarioConfig::default()
    };
    let scene = generate_scene(&cfg)?;
    let mut est = EstimatorConfig::for_variant(variant);
    est.ransac.rng_seed = seed;
    let pose = estimate_three_view_pose(&scene.point_tracks, &scene.line_tracks, &est)?;
    let e_rot = rotation_error(&scene.gt_r10, &pose.rotations.r10(), &scene.gt_r12, &pose.rotations.r12());
    let (ga, gb) = scene.gt_relative_translations();
    let e_t = pose
        .relative_translations()
        .and_then(|(a, b)| translation_direction_error(&ga, &a, &gb, &b).ok());

    let count = |truth: &[bool], mask: &[bool], outlier: bool| {
        truth.iter().zip(mask).filter(|(&t, &inl)| !inl && t == outlier).count()
    };
    let point_segments = scene
        .point_tracks
        .iter()
        .zip(&scene.point_outliers)
        .zip(&pose.point_inliers)
        .filter_map(|((t, &outlier), &inlier)| {
            let p = px(t.pixels()[1]?);
            Some(Segment { a: p, b: p, outlier, inlier })
        })
        .collect();
    let line_segments = scene
        .line_tracks
        .iter()
        .zip(&scene.line_outliers)
        .zip(&pose.line_inliers)
        .map(|((t, &outlier), &inlier)| {
            let [a, b] = t.endpoints()[1];
            Segment {
                a: px(a),
                b: px(b),
                outlier,
                inlier,
            }
        })
        .collect();

    Ok(EstimateReport {
        e_rot_deg: e_rot,
        e_t_deg: e_t,
        pure_rotation: pose.pure_rotation(),
        point_inliers: pose.point_inliers.iter().filter(|&&b| b).count(),
        line_inliers: pose.line_inliers.iter().filter(|&&b| b).count(),
        points_rejected_correctly: count(&scene.point_outliers, &pose.point_inliers, true),
        points_rejected_wrongly: count(&scene.point_outliers, &pose.point_inliers, false),
        lines_rejected_correctly: count(&scene.line_outliers, &pose.line_inliers, true),
        lines_rejected_wrongly: count(&scene.line_outliers, &pose.line_inliers, false),
        points: point_segments,
        lines: line_segments,
        image_half_width: cfg.view_tan * cfg.focal,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceCurve {
    pub deviations_deg: Vec<f64>,
    /// Fraction of trials ending within 0.5 degrees of the truth.
    pub mult: Vec<f64>,
    pub mini: Vec<f64>,
    pub trials: usize,
}

/// Success rate of the two line-only forms against the initial deviation.
pub fn convergence(seed: u64, trials: usize, lines: usize, noise: f64, max_deviation_deg: f64, steps: usize) -> rt2pl::Result<ConvergenceCurve> {
    let steps = steps.max(1);
    let deviations: Vec<f64> = (0..=steps).map(|i| max_deviation_deg * i as f64 / steps as f64).collect();
    let mut mult = vec![0.0; deviations.len()];
    let mut mini = vec![0.0; deviations.len()];
    for trial in 0..trials {
        let s = derive_seed(seed, trial as u64);
        let scene = generate_scene(&ScenarioConfig {
            n_points: 0,
            n_lines: lines,
            noise_std: noise,
            rng_seed: s,
            ..ScenarioConfig::default()
        })?;
        let gt = scene.gt_rotation_pair();
        for (k, &dev) in deviations.iter().enumerate() {
            let init = gt.perturbed(dev.to_radians(), &mut stream(s, Domain::Initialization, k as u64))?;
            for (variant, tally) in [(SolverVariant::NbcOnly, &mut mult), (SolverVariant::NbcMini, &mut mini)] {
                let cfg = EstimatorConfig::for_variant(variant);
                let ok = estimate_from_initial(&scene.point_tracks, &scene.line_tracks, &init, &cfg)
                    .map(|p| rotation_error(&scene.gt_r10, &p.rotations.r10(), &scene.gt_r12, &p.rotations.r12()) < SUCCESS_DEG)
                    .unwrap_or(false);
                if ok {
                    tally[k] += 1.0;
                }
            }
        }
    }
    let n = trials.max(1) as f64;
    Ok(ConvergenceCurve {
        deviations_deg: deviations,
        mult: mult.into_iter().map(|c| c / n).collect(),
        mini: mini.into_iter().map(|c| c / n).collect(),
        trials,
    })
}

fn to_json<T: Serialize>(r: rt2pl::Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

#[wasm_bindgen(js_name = costLandscape)]
pub fn cost_landscape_json(seed: u32, lines: u32, noise: f64, half_width: f64, resolution: u32) -> String {
    to_json(landscape(seed as u64, lines as usize, noise, half_width, resolution as usize))
}

/// `variant` is one of `rt2pl`, `point_irls`, `nbc`, `nbc_mini`.
#[wasm_bindgen(js_name = estimatePose)]
pub fn estimate_json(seed: u32, points: u32, lines: u32, noise: f64, outliers: f64, variant: &str) -> String {
    match variant.parse::<SolverVariant>() {
        Ok(v) => to_json(estimate(seed as u64, points as usize, lines as usize, noise, outliers, v)),
        Err(e) => error_json(&e.to_string()),
    }
}

#[wasm_bindgen(js_name = convergenceCurve)]
pub fn convergence_json(seed: u32, trials: u32, lines: u32, noise: f64, max_deviation_deg: f64, steps: u32) -> String {
    to_json(convergence(
        seed as u64,
        trials as usize,
        lines as usize,
        noise,
        max_deviation_deg,
        steps as usize,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landscape_is_minimal_at_truth_without_noise() {
        let l = landscape(3, 10, 0.0, 0.5, 21).unwrap();
        assert_eq!(l.mult.len(), 21 * 21);
        let centre = 10 * 21 + 10;
        assert!(l.mult[centre] < 1e-20 && l.mini[centre] < 1e-20);
        assert!(l.mult.iter().all(|&c| c >= l.mult[centre]));
        assert!(l.mini.iter().all(|&c| c >= l.mini[centre]));
    }

    #[test]
    fn estimate_reports_outlier_handling() {
        let r = estimate(4, 60, 60, 0.5, 0.2, SolverVariant::Rt2pl).unwrap();
        assert!(r.e_rot_deg < 0.5);
        assert!(r.e_t_deg.unwrap() < 2.0);
        assert_eq!(r.points.len(), 60);
        assert!(r.points_rejected_correctly >= 10 && r.lines_rejected_correctly >= 10);
        assert_eq!(r.points.iter().filter(|s| s.outlier).count(), 12);
    }

    #[test]
    fn convergence_is_certain_at_zero_deviation_without_noise() {
        let c = convergence(1, 5, 15, 0.0, 10.0, 2).unwrap();
        assert_eq!(c.deviations_deg, vec![0.0, 5.0, 10.0]);
        assert_eq!(c.mult[0], 1.0);
        assert_eq!(c.mini[0], 1.0);
    }

    #[test]
    fn json_exports_parse() {
        let v: serde_json::Value = serde_json::from_str(&cost_landscape_json(1, 8, 0.5, 0.3, 5)).unwrap();
        assert_eq!(v["resolution"], 5);
        let v: serde_json::Value = serde_json::from_str(&estimate_json(1, 30, 30, 0.5, 0.0, "nbc")).unwrap();
        assert!(v["e_rot_deg"].as_f64().is_some());
        let v: serde_json::Value = serde_json::from_str(&estimate_json(1, 30, 30, 0.5, 0.0, "bogus")).unwrap();
        assert!(v["error"].is_string());
    }
}
