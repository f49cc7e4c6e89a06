//! Trial drivers for every experiment kind.

use nalgebra::Vector3;
use rayon::prelude::*;
use rt2pl::geometry::{rotation_error, translation_direction_error, Cayley};
use rt2pl::pipeline::{estimate_from_initial, estimate_three_view_pose, EstimatorConfig, PoseEstimate, SolverVariant};
use rt2pl::rng::{derive_seed, stream, Domain};
use rt2pl::rotation::{combined_cost, RotationPair, RotationProblem, WeightState};
use rt2pl::scene::{generate_scene, generate_scene_with_rotations, ScenarioConfig, SceneMode, ThreeViewScene};
use rt2pl::translation::estimate_translation;
use serde::{Deserialize, Serialize};

use crate::record::TrialRecord;
use crate::spec::{ExperimentKind, ExperimentSpec, InitMode};
use crate::Result;

/// Records of a run; the landscape experiment fills `landscape` instead.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub landscape: Vec<LandscapeSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSample {
    pub variant: SolverVariant,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub cost: f64,
}

/// One grid node of a pose trial.
#[derive(Debug, Clone, Copy)]
struct Node {
    variant: SolverVariant,
    mode: SceneMode,
    noise: f64,
    outliers: f64,
    deviation_deg: f64,
}

#[derive(Serialize)]
struct Echo<'a> {
    scene: &'a ScenarioConfig,
    estimator: &'a EstimatorConfig,
    init: InitMode,
    init_max_angle: f64,
    deviation_deg: f64,
}

pub fn trial_seed(spec: &ExperimentSpec, trial: usize) -> u64 {
    derive_seed(spec.seed, trial as u64)
}

fn pool(spec: &ExperimentSpec) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads.unwrap_or(0))
        .build()?)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let pool = pool(spec)?;
    Ok(match spec.kind {
        ExperimentKind::NoiseSweep | ExperimentKind::Degeneracy => ExperimentOutput {
            records: pool.install(|| run_noise_sweep(spec)),
            ..Default::default()
        },
        ExperimentKind::OutlierSweep | ExperimentKind::Runtime => ExperimentOutput {
            records: pool.install(|| run_outlier_sweep(spec)),
            ..Default::default()
        },
        ExperimentKind::Convergence => ExperimentOutput {
            records: pool.install(|| run_convergence(spec)),
            ..Default::default()
        },
        ExperimentKind::LigtResilience => ExperimentOutput {
            records: pool.install(|| run_ligt_resilience(spec)),
            ..Default::default()
        },
        ExperimentKind::CostLandscape => ExperimentOutput {
            landscape: cost_landscape(spec)?,
            ..Default::default()
        },
    })
}

fn run_nodes(spec: &ExperimentSpec, nodes: &[Node]) -> Vec<TrialRecord> {
    let jobs: Vec<(Node, usize)> = nodes
        .iter()
        .flat_map(|n| (0..spec.trials).map(move |t| (*n, t)))
        .collect();
    jobs.par_iter().map(|(node, t)| pose_trial(spec, node, *t)).collect()
}

/// Mean accuracy per (mode, noise, variant), started near the truth unless
/// the spec asks for RANSAC.
pub fn run_noise_sweep(spec: &ExperimentSpec) -> Vec<TrialRecord> {
    let mut nodes = Vec::new();
    for &mode in &spec.modes {
        for &noise in &spec.noise_levels {
            for &variant in &spec.variants {
                nodes.push(Node {
                    variant,
                    mode,
                    noise,
                    outliers: spec.scene.outlier_fraction,
                    deviation_deg: 0.0,
                });
            }
        }
    }
    run_nodes(spec, &nodes)
}

/// Accuracy, outlier classification and timing per outlier fraction.
pub fn run_outlier_sweep(spec: &ExperimentSpec) -> Vec<TrialRecord> {
    let mut nodes = Vec::new();
    for &outliers in &spec.outlier_fractions {
        for &noise in &spec.noise_levels {
            for &variant in &spec.variants {
                nodes.push(Node {
                    variant,
                    mode: spec.modes[0],
                    noise,
                    outliers,
                    deviation_deg: 0.0,
                });
            }
        }
    }
    run_nodes(spec, &nodes)
}

/// Success rate per initial deviation; every trial starts from the truth
/// turned by exactly the deviation about random axes.
pub fn run_convergence(spec: &ExperimentSpec) -> Vec<TrialRecord> {
    let mut nodes = Vec::new();
    for &deviation_deg in &spec.deviations_deg {
        for &variant in &spec.variants {
            nodes.push(Node {
                variant,
                mode: spec.modes[0],
                noise: spec.noise_levels[0],
                outliers: 0.0,
                deviation_deg,
            });
        }
    }
    run_nodes(spec, &nodes)
}

fn scene_config(spec: &ExperimentSpec, mode: SceneMode, noise: f64, outliers: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        mode,
        noise_std: noise,
        outlier_fraction: outliers,
        rng_seed: seed,
        ..spec.scene
    }
}

fn blank_record(spec: &ExperimentSpec, node: &Node, trial: usize, seed: u64, cfg: &ScenarioConfig) -> TrialRecord {
    let echo = Echo {
        scene: cfg,
        estimator: &spec.estimator,
        init: spec.init,
        init_max_angle: spec.init_max_angle,
        deviation_deg: node.deviation_deg,
    };
    TrialRecord {
        experiment: spec.kind.as_str().into(),
        trial,
        seed,
        variant: node.variant.as_str().into(),
        mode: node.mode.as_str().into(),
        n_points: cfg.n_points,
        n_lines: cfg.n_lines,
        noise_std: node.noise,
        outlier_fraction: node.outliers,
        deviation_deg: node.deviation_deg,
        e_rot_deg: f64::NAN,
        e_t_deg: f64::NAN,
        ransac_ms: f64::NAN,
        rotation_ms: f64::NAN,
        translation_ms: f64::NAN,
        total_ms: f64::NAN,
        converged: false,
        pure_rotation: false,
        point_precision: f64::NAN,
        point_recall: f64::NAN,
        line_precision: f64::NAN,
        line_recall: f64::NAN,
        status: "error".into(),
        message: String::new(),
        config: serde_json::to_string(&echo).unwrap_or_default(),
    }
}

/// Precision and recall of outlier detection: `truth[i]` marks a true
/// outlier, `inliers[i]` the estimator's verdict. NaN when undefined.
pub fn outlier_precision_recall(truth: &[bool], inliers: &[bool]) -> (f64, f64) {
    let flagged = inliers.iter().filter(|&&i| !i).count();
    let actual = truth.iter().filter(|&&t| t).count();
    let hits = truth.iter().zip(inliers).filter(|(&t, &i)| t && !i).count();
    let precision = if flagged > 0 { hits as f64 / flagged as f64 } else if actual == 0 { f64::NAN } else { 1.0 };
    let recall = if actual > 0 { hits as f64 / actual as f64 } else { f64::NAN };
    (precision, recall)
}

/// `(e_rot, e_t)` in degrees; `e_t` is NaN when either side has no
/// translation direction.
pub fn pose_errors(scene: &ThreeViewScene, pose: &PoseEstimate) -> (f64, f64) {
    let e_rot = rotation_error(&scene.gt_r10, &pose.rotations.r10(), &scene.gt_r12, &pose.rotations.r12());
    let (ga, gb) = scene.gt_relative_translations();
    let e_t = match pose.relative_translations() {
        Some((a, b)) => translation_direction_error(&ga, &a, &gb, &b).unwrap_or(f64::NAN),
        None => f64::NAN,
    };
    (e_rot, e_t)
}

/// Runs one variant on one scene as the spec prescribes.
pub fn solve_scene(
    spec: &ExperimentSpec,
    scene: &ThreeViewScene,
    variant: SolverVariant,
    deviation_deg: f64,
    seed: u64,
) -> rt2pl::Result<PoseEstimate> {
    let mut cfg = EstimatorConfig {
        variant,
        ..spec.estimator
    };
    cfg.irls.reweight = variant.reweights() && spec.estimator.irls.reweight;
    cfg.ransac.rng_seed = seed;
    let gt = scene.gt_rotation_pair();
    let mut rng = stream(seed, Domain::Initialization, 0);
    match spec.init {
        InitMode::Ransac => estimate_three_view_pose(&scene.point_tracks, &scene.line_tracks, &cfg),
        InitMode::NearTruth => {
            let init = if deviation_deg > 0.0 {
                gt.perturbed(deviation_deg.to_radians(), &mut rng)?
            } else {
                gt.jittered(spec.init_max_angle, &mut rng)?
            };
            estimate_from_initial(&scene.point_tracks, &scene.line_tracks, &init, &cfg)
        }
    }
}

fn pose_trial(spec: &ExperimentSpec, node: &Node, trial: usize) -> TrialRecord {
    let seed = trial_seed(spec, trial);
    let cfg = scene_config(spec, node.mode, node.noise, node.outliers, seed);
    let mut rec = blank_record(spec, node, trial, seed, &cfg);
    let scene = match generate_scene(&cfg) {
        Ok(s) => s,
        Err(e) => {
            rec.message = format!("scene: {e}");
            return rec;
        }
    };
    let pose = match solve_scene(spec, &scene, node.variant, node.deviation_deg, seed) {
        Ok(p) => p,
        Err(e) => {
            rec.message = e.to_string();
            return rec;
        }
    };
    let (e_rot, e_t) = pose_errors(&scene, &pose);
    let t = pose.diagnostics.timings;
    rec.e_rot_deg = e_rot;
    rec.e_t_deg = e_t;
    rec.ransac_ms = t.ransac_ms;
    rec.rotation_ms = t.rotation_ms;
    rec.translation_ms = t.translation_ms;
    rec.total_ms = t.total_ms;
    rec.pure_rotation = pose.pure_rotation();
    rec.converged = e_rot < spec.success_threshold_deg;
    if spec.init == InitMode::Ransac {
        if node.variant.uses_points() {
            (rec.point_precision, rec.point_recall) = outlier_precision_recall(&scene.point_outliers, &pose.point_inliers);
        }
        if node.variant.uses_lines() {
            (rec.line_precision, rec.line_recall) = outlier_precision_recall(&scene.line_outliers, &pose.line_inliers);
        }
    }
    let expects_translation = node.mode != SceneMode::PureRotation;
    if expects_translation && pose.pure_rotation() {
        rec.status = "degenerate_translation".into();
        rec.message = "translation reported as pure rotation".into();
    } else {
        rec.status = "ok".into();
        if let Some(l) = pose.diagnostics.unconverged_loop {
            rec.message = format!("lm iteration cap in reweighting loop {l}");
        }
    }
    rec
}

/// Grid nodes of the translation test: a rotation-perturbation sweep without
/// noise and a noise sweep with exact rotations.
pub fn ligt_nodes(spec: &ExperimentSpec) -> Vec<(f64, f64)> {
    let mut nodes: Vec<(f64, f64)> = spec.deviations_deg.iter().map(|&d| (0.0, d)).collect();
    for &n in &spec.noise_levels {
        if !nodes.contains(&(n, 0.0)) {
            nodes.push((n, 0.0));
        }
    }
    nodes
}

/// Translation error of each LiGT variant for given (possibly perturbed)
/// rotations; the variants see the same scene and the same perturbation.
pub fn run_ligt_resilience(spec: &ExperimentSpec) -> Vec<TrialRecord> {
    let jobs: Vec<((f64, f64), usize)> = ligt_nodes(spec)
        .into_iter()
        .flat_map(|n| (0..spec.trials).map(move |t| (n, t)))
        .collect();
    jobs.par_iter()
        .flat_map_iter(|&((noise, deviation), trial)| ligt_trial(spec, noise, deviation, trial))
        .collect()
}

fn ligt_trial(spec: &ExperimentSpec, noise: f64, deviation_deg: f64, trial: usize) -> Vec<TrialRecord> {
    let seed = trial_seed(spec, trial);
    let cfg = scene_config(spec, SceneMode::General, noise, 0.0, seed);
    let node = Node {
        variant: SolverVariant::Rt2pl,
        mode: SceneMode::General,
        noise,
        outliers: 0.0,
        deviation_deg,
    };
    let template = blank_record(spec, &node, trial, seed, &cfg);
    let scene = generate_scene(&cfg);
    let rotations = scene.as_ref().map_err(|e| e.to_string()).and_then(|s| {
        s.gt_rotation_pair()
            .perturbed(deviation_deg.to_radians(), &mut stream(seed, Domain::Initialization, 1))
            .map_err(|e| e.to_string())
    });
    spec.ligt_variants
        .iter()
        .map(|&v| {
            let mut rec = template.clone();
            rec.variant = v.label().into();
            let (scene, rot) = match (&scene, &rotations) {
                (Ok(s), Ok(r)) => (s, r),
                (Err(e), _) => {
                    rec.message = format!("scene: {e}");
                    return rec;
                }
                (_, Err(e)) => {
                    rec.message = e.clone();
                    return rec;
                }
            };
            let sol = estimate_translation(&scene.point_tracks, &scene.line_tracks, rot, v, &spec.estimator.ligt);
            rec.e_rot_deg = rotation_error(&scene.gt_r10, &rot.r10(), &scene.gt_r12, &rot.r12());
            match rt2pl::translation::relative_translations(&sol, rot) {
                Ok((a, b)) => {
                    let (ga, gb) = scene.gt_relative_translations();
                    rec.e_t_deg = translation_direction_error(&ga, &a, &gb, &b).unwrap_or(f64::NAN);
                    rec.status = "ok".into();
                    rec.converged = true;
                }
                Err(e) => {
                    rec.status = "degenerate_translation".into();
                    rec.message = e.to_string();
                }
            }
            rec
        })
        .collect()
}

/// Cost of each variant over a Cayley grid for `R10` (true value at
/// `spec.landscape.truth`), with `R12` fixed at its true value and unit weights.
pub fn cost_landscape(spec: &ExperimentSpec) -> Result<Vec<LandscapeSample>> {
    let ls = &spec.landscape;
    let cfg = ScenarioConfig {
        noise_std: spec.noise_levels[0],
        rng_seed: spec.seed,
        ..spec.scene
    };
    let r12 = generate_scene(&cfg)?.gt_r12;
    let truth = Vector3::from(ls.truth);
    let scene = generate_scene_with_rotations(&cfg, &Cayley(truth).to_matrix(), &r12)?;
    let c12 = scene.gt_rotation_pair().c12;

    let n = ls.resolution;
    let axis = |i: usize, centre: f64| centre - ls.half_width + 2.0 * ls.half_width * i as f64 / (n - 1) as f64;
    let zs: Vec<f64> = if ls.slice_only { vec![truth.z] } else { (0..n).map(|k| axis(k, truth.z)).collect() };
    let mut out = Vec::new();
    for &variant in &spec.variants {
        let problem = RotationProblem::new(&scene.point_tracks, &scene.line_tracks, variant.cost_model());
        let weights = WeightState::uniform(&problem);
        for &cz in &zs {
            for j in 0..n {
                for i in 0..n {
                    let c = Vector3::new(axis(i, truth.x), axis(j, truth.y), cz);
                    let state = RotationPair { c10: Cayley(c), c12 };
                    let (cost, _) = combined_cost(&problem, &weights, &state);
                    out.push(LandscapeSample {
                        variant,
                        cx: c.x,
                        cy: c.y,
                        cz,
                        cost,
                    });
                }
            }
        }
    }
    Ok(out)
}
