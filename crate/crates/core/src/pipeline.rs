//! End-to-end three-view estimator: per-type RANSAC, pooled IRLS refinement
//! and linear translation recovery.

use std::str::FromStr;

use nalgebra::{Vector3, Vector6};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::CoplanarityMatrix;
use crate::rng::{stream, Domain};
use crate::rotation::{
    irls_solve, lm_minimize, CostModel, IrlsConfig, IrlsOutcome, LineForm, LmConfig, RotationPair,
    RotationProblem, WeightState,
};
use crate::tracks::{LineTrack, PointTrack};
use crate::translation::{estimate_translation, FrameRotations, LigtConfig, LigtVariant, TranslationSolution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverVariant {
    /// Points and lines (triple-product form), reweighted, point-line translation.
    Rt2pl,
    /// Points only, reweighted, point translation.
    #[serde(rename = "point_irls", alias = "point-irls")]
    PointOnlyIrls,
    /// Lines only (triple-product form), unweighted, line translation.
    #[serde(rename = "nbc")]
    NbcOnly,
    /// Lines only (smallest-eigenvalue form), unweighted, line translation.
    #[serde(alias = "nbc-mini")]
    NbcMini,
}

impl SolverVariant {
    pub const ALL: [SolverVariant; 4] = [
        SolverVariant::Rt2pl,
        SolverVariant::PointOnlyIrls,
        SolverVariant::NbcOnly,
        SolverVariant::NbcMini,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverVariant::Rt2pl => "rt2pl",
            SolverVariant::PointOnlyIrls => "point_irls",
            SolverVariant::NbcOnly => "nbc",
            SolverVariant::NbcMini => "nbc_mini",
        }
    }

    pub fn line_form(&self) -> LineForm {
        match self {
            SolverVariant::NbcMini => LineForm::Mini,
            _ => LineForm::Mult,
        }
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            use_points: self.uses_points(),
            use_lines: self.uses_lines(),
            line_form: self.line_form(),
        }
    }

    pub fn uses_points(&self) -> bool {
        matches!(self, SolverVariant::Rt2pl | SolverVariant::PointOnlyIrls)
    }

    pub fn uses_lines(&self) -> bool {
        matches!(self, SolverVariant::Rt2pl | SolverVariant::NbcOnly | SolverVariant::NbcMini)
    }

    pub fn reweights(&self) -> bool {
        matches!(self, SolverVariant::Rt2pl | SolverVariant::PointOnlyIrls)
    }

    pub fn ligt_variant(&self) -> LigtVariant {
        match (self.uses_points(), self.uses_lines()) {
            (true, true) => LigtVariant::PointsAndLines,
            (true, false) => LigtVariant::Points,
            _ => LigtVariant::Lines,
        }
    }
}

impl FromStr for SolverVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s || v.as_str().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown solver variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InlierThresholds {
    /// Bound on `|tᵀ(b1 x R bk)|` with unit `t`, for every observed pair.
    pub point: f64,
    /// Bound on the unit-normal triple product.
    pub line: f64,
}

impl Default for InlierThresholds {
    fn default() -> Self {
        Self { point: 2e-3, line: 2e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub sample_size: usize,
    pub max_iterations: usize,
    pub thresholds: InlierThresholds,
    /// Half-width of the uniform perturbation added to every Cayley component
    /// of the current best state to seed each hypothesis.
    pub variation_magnitude: f64,
    pub confidence: f64,
    /// A hypothesis needs `sample_size + min_consensus_extra` inliers.
    pub min_consensus_extra: usize,
    pub rng_seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            sample_size: 10,
            max_iterations: 200,
            thresholds: InlierThresholds::default(),
            variation_magnitude: 0.1,
            confidence: 0.99,
            min_consensus_extra: 4,
            rng_seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn min_consensus(&self) -> usize {
        self.sample_size + self.min_consensus_extra
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub variant: SolverVariant,
    pub ransac: RansacConfig,
    pub irls: IrlsConfig,
    pub ligt: LigtConfig,
    /// Pure rotation is declared when the median rotation-compensated parallax
    /// of the point tracks is below this many bearing standard deviations.
    pub parallax_sigmas: f64,
    /// Re-score all features with the refined pose and refine again when the
    /// inlier sets change.
    pub reclassify: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            variant: SolverVariant::Rt2pl,
            ransac: RansacConfig::default(),
            irls: IrlsConfig::default(),
            ligt: LigtConfig::default(),
            parallax_sigmas: 3.0,
            reclassify: true,
        }
    }
}

impl EstimatorConfig {
    pub fn for_variant(variant: SolverVariant) -> Self {
        let mut cfg = Self {
            variant,
            ..Self::default()
        };
        cfg.irls.reweight = variant.reweights();
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSource {
    Points,
    Lines,
    Given,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub ransac_ms: f64,
    pub rotation_ms: f64,
    pub translation_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub init_source: InitSource,
    pub point_ransac_iterations: usize,
    pub line_ransac_iterations: usize,
    pub irls_loops: usize,
    pub lm_iterations: usize,
    pub final_cost: f64,
    /// First IRLS loop whose LM solve hit its iteration cap.
    pub unconverged_loop: Option<usize>,
    pub reclassified: bool,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub variant: SolverVariant,
    pub rotations: RotationPair,
    pub translation: TranslationSolution,
    pub point_inliers: Vec<bool>,
    pub line_inliers: Vec<bool>,
    pub diagnostics: Diagnostics,
}

impl PoseEstimate {
    pub fn pure_rotation(&self) -> bool {
        self.translation.pure_rotation
    }

    /// Unit `(⁰t₁, ¹t₂)`, or `None` for a pure rotation.
    pub fn relative_translations(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        crate::translation::relative_translations(&self.translation, &self.rotations).ok()
    }
}

#[cfg(not(target_arch = "wasm32"))]
struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }

    fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

// no monotonic clock without JS glue; timings read zero
#[cfg(target_arch = "wasm32")]
struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    fn start() -> Self {
        Self
    }

    fn ms(&self) -> f64 {
        0.0
    }
}

/// Residual of a point track: the largest `|tᵀ(b1 x R bk)|` over its observed
/// pairs with frame 1. Tracks not seen in frame 1 carry no rotation
/// constraint here and score infinity.
pub fn point_residual(track: &PointTrack, rot: &FrameRotations, t10: &Vector3<f64>, t12: &Vector3<f64>) -> f64 {
    let Some(b1) = track.bearing(1) else {
        return f64::INFINITY;
    };
    let mut worst: f64 = 0.0;
    if let Some(b0) = track.bearing(0) {
        worst = worst.max(t10.dot(&b1.cross(&(rot.r10 * b0))).abs());
    }
    if let Some(b2) = track.bearing(2) {
        worst = worst.max(t12.dot(&b1.cross(&(rot.r12 * b2))).abs());
    }
    worst
}

pub fn line_residual(track: &LineTrack, rot: &FrameRotations) -> f64 {
    let [n0, n1, n2] = track.normals();
    (rot.r10 * n0).dot(&n1.cross(&(rot.r12 * n2))).abs()
}

/// Eigenvector directions of the two point pairs at the given rotations,
/// computed from the listed tracks.
fn eigen_directions(points: &[PointTrack], idx: &[usize], rot: &FrameRotations) -> (Vector3<f64>, Vector3<f64>) {
    let mut n10 = Vec::with_capacity(idx.len());
    let mut n12 = Vec::with_capacity(idx.len());
    for &i in idx {
        let t = &points[i];
        if let (Some(b1), Some(b0)) = (t.bearing(1), t.bearing(0)) {
            n10.push(b1.cross(&(rot.r10 * b0)));
        }
        if let (Some(b1), Some(b2)) = (t.bearing(1), t.bearing(2)) {
            n12.push(b1.cross(&(rot.r12 * b2)));
        }
    }
    (
        CoplanarityMatrix::from_normals(n10.iter()).direction(),
        CoplanarityMatrix::from_normals(n12.iter()).direction(),
    )
}

/// Frame-1 directions towards cameras 0 and 2 implied by a translation
/// solution.
fn frame1_directions(sol: &TranslationSolution, rot: &FrameRotations) -> Option<(Vector3<f64>, Vector3<f64>)> {
    if sol.pure_rotation {
        return None;
    }
    let [t0, t1, t2] = sol.global;
    let a = (rot.r_g[1] * (t0 - t1)).try_normalize(0.0)?;
    let b = (rot.r_g[1] * (t2 - t1)).try_normalize(0.0)?;
    Some((a, b))
}

/// Inlier masks at the given rotations. `directions` are the unit frame-1
/// directions towards cameras 0 and 2; without them the coplanarity
/// eigenvectors of all point tracks are used.
pub fn classify_inliers(
    points: &[PointTrack],
    lines: &[LineTrack],
    rotations: &RotationPair,
    directions: Option<(Vector3<f64>, Vector3<f64>)>,
    thresholds: &InlierThresholds,
) -> (Vec<bool>, Vec<bool>) {
    let rot = FrameRotations::from_pair(rotations);
    let (t10, t12) = directions.unwrap_or_else(|| {
        let all: Vec<usize> = (0..points.len()).collect();
        eigen_directions(points, &all, &rot)
    });
    let p = points
        .iter()
        .map(|t| point_residual(t, &rot, &t10, &t12) < thresholds.point)
        .collect();
    let l = lines.iter().map(|t| line_residual(t, &rot) < thresholds.line).collect();
    (p, l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Points,
    Lines,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacOutcome {
    pub state: RotationPair,
    pub inliers: Vec<bool>,
    pub consensus: usize,
    pub iterations: usize,
    /// Final LM cost of the winning hypothesis on its sample.
    pub cost: f64,
}

fn required_iterations(inlier_ratio: f64, sample_size: usize, confidence: f64) -> usize {
    let good = inlier_ratio.powi(sample_size as i32);
    if good >= 1.0 {
        return 1;
    }
    if good <= 0.0 {
        return usize::MAX;
    }
    let n = (1.0 - confidence).ln() / (1.0 - good).ln();
    if n.is_finite() {
        n.ceil().max(1.0) as usize
    } else {
        usize::MAX
    }
}

/// RANSAC over one feature type. Each hypothesis starts from the current best
/// rotations plus a uniform random variation and is refined by LM on its
/// sample; it is scored by the number of features of that type it explains.
pub fn ransac_rotation(
    points: &[PointTrack],
    lines: &[LineTrack],
    kind: FeatureKind,
    line_form: LineForm,
    cfg: &RansacConfig,
    lm: &LmConfig,
) -> Result<RansacOutcome> {
    let (n, model, domain, label) = match kind {
        FeatureKind::Points => (points.len(), CostModel::POINTS_ONLY, Domain::RansacPoints, "point tracks"),
        FeatureKind::Lines => (lines.len(), CostModel::lines_only(line_form), Domain::RansacLines, "line tracks"),
    };
    if n < cfg.sample_size || cfg.sample_size == 0 {
        return Err(Error::NotEnoughFeatures(format!(
            "{n} {label}, RANSAC needs at least {}",
            cfg.sample_size
        )));
    }

    let mut best: Option<RansacOutcome> = None;
    let mut budget = cfg.max_iterations;
    let mut iter = 0;
    while iter < budget.min(cfg.max_iterations) {
        let mut rng = stream(cfg.rng_seed, domain, iter as u64);
        let chosen = sample(&mut rng, n, cfg.sample_size).into_vec();
        let v = cfg.variation_magnitude;
        let jitter = Vector6::from_fn(|_, _| if v > 0.0 { rng.random_range(-v..=v) } else { 0.0 });
        let start = best.as_ref().map_or(RotationPair::identity(), |b| b.state).offset(&jitter);

        let problem = match kind {
            FeatureKind::Points => RotationProblem::with_indices(points, lines, &chosen, &[], model),
            FeatureKind::Lines => RotationProblem::with_indices(points, lines, &[], &chosen, model),
        };
        let weights = WeightState::uniform(&problem);
        let (state, report) = lm_minimize(&problem, &weights, &start, lm);
        iter += 1;

        let rot = FrameRotations::from_pair(&state);
        let inliers: Vec<bool> = match kind {
            FeatureKind::Points => {
                let (t10, t12) = eigen_directions(points, &chosen, &rot);
                points
                    .iter()
                    .map(|t| point_residual(t, &rot, &t10, &t12) < cfg.thresholds.point)
                    .collect()
            }
            FeatureKind::Lines => lines.iter().map(|t| line_residual(t, &rot) < cfg.thresholds.line).collect(),
        };
        let consensus = inliers.iter().filter(|&&x| x).count();
        let better = match &best {
            None => true,
            Some(b) => consensus > b.consensus || (consensus == b.consensus && report.final_cost < b.cost),
        };
        if better {
            best = Some(RansacOutcome {
                state,
                inliers,
                consensus,
                iterations: 0,
                cost: report.final_cost,
            });
            budget = required_iterations(consensus as f64 / n as f64, cfg.sample_size, cfg.confidence);
        }
    }

    let mut best = best.expect("at least one hypothesis");
    best.iterations = iter;
    if best.consensus < cfg.min_consensus() {
        return Err(Error::NoConsensus {
            kind: label,
            required: cfg.min_consensus(),
            best: best.consensus,
        });
    }
    Ok(best)
}

/// Median rotation-compensated parallax of the point tracks, relative to the
/// bearing noise. `None` without usable tracks.
fn parallax_is_negligible(points: &[PointTrack], mask: &[bool], rot: &FrameRotations, sigmas: f64) -> Option<bool> {
    let mut angles = Vec::new();
    let mut spreads = Vec::new();
    for (t, _) in points.iter().zip(mask).filter(|(_, &m)| m) {
        let Some(o1) = t.obs[1].as_ref() else { continue };
        for (k, r) in [(0usize, &rot.r10), (2, &rot.r12)] {
            if let Some(ok) = t.obs[k].as_ref() {
                let moved = r * ok.bearing;
                angles.push(o1.bearing.cross(&moved).norm().atan2(o1.bearing.dot(&moved)));
                spreads.push((o1.bearing_cov.trace() + ok.bearing_cov.trace()).sqrt());
            }
        }
    }
    if angles.is_empty() {
        return None;
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let angle = median(&mut angles);
    let spread = median(&mut spreads);
    Some(angle <= (sigmas * spread).max(1e-9))
}

struct Refined {
    irls: IrlsOutcome,
    translation: TranslationSolution,
    ms_rotation: f64,
    ms_translation: f64,
}

fn select<T: Clone>(items: &[T], mask: &[bool]) -> Vec<T> {
    items.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| x.clone()).collect()
}

fn refine(
    points: &[PointTrack],
    lines: &[LineTrack],
    point_mask: &[bool],
    line_mask: &[bool],
    initial: &RotationPair,
    cfg: &EstimatorConfig,
) -> Result<Refined> {
    let variant = cfg.variant;
    let problem = RotationProblem::with_masks(points, lines, point_mask, line_mask, variant.cost_model());
    if !problem.constrains_both() {
        return Err(Error::NotEnoughFeatures(
            "the inlier set does not constrain both relative rotations".into(),
        ));
    }
    let in_points = if variant.uses_points() { select(points, point_mask) } else { Vec::new() };
    let in_lines = if variant.uses_lines() { select(lines, line_mask) } else { Vec::new() };
    let ligt = variant.ligt_variant();

    let clock = Stopwatch::start();
    let irls = irls_solve(&problem, initial, &cfg.irls, |state| {
        let sol = estimate_translation(&in_points, &in_lines, state, ligt, &cfg.ligt);
        frame1_directions(&sol, &FrameRotations::from_pair(state))
    });
    let ms_rotation = clock.ms();

    let clock = Stopwatch::start();
    let mut translation = estimate_translation(&in_points, &in_lines, &irls.state, ligt, &cfg.ligt);
    let rot = FrameRotations::from_pair(&irls.state);
    if variant.uses_points() && !translation.pure_rotation {
        if parallax_is_negligible(points, point_mask, &rot, cfg.parallax_sigmas) == Some(true) {
            translation.global = [Vector3::zeros(); 3];
            translation.pure_rotation = true;
        }
    }
    Ok(Refined {
        irls,
        translation,
        ms_rotation,
        ms_translation: clock.ms(),
    })
}

fn assemble(
    variant: SolverVariant,
    refined: Refined,
    point_inliers: Vec<bool>,
    line_inliers: Vec<bool>,
    mut diagnostics: Diagnostics,
) -> PoseEstimate {
    diagnostics.irls_loops = refined.irls.reports.len();
    diagnostics.lm_iterations = refined.irls.lm_iterations();
    diagnostics.final_cost = refined.irls.final_cost();
    diagnostics.unconverged_loop = refined.irls.unconverged_loop;
    diagnostics.timings.rotation_ms += refined.ms_rotation;
    diagnostics.timings.translation_ms += refined.ms_translation;
    PoseEstimate {
        variant,
        rotations: refined.irls.state,
        translation: refined.translation,
        point_inliers,
        line_inliers,
        diagnostics,
    }
}

fn empty_diagnostics(init_source: InitSource) -> Diagnostics {
    Diagnostics {
        init_source,
        point_ransac_iterations: 0,
        line_ransac_iterations: 0,
        irls_loops: 0,
        lm_iterations: 0,
        final_cost: 0.0,
        unconverged_loop: None,
        reclassified: false,
        timings: StageTimings::default(),
    }
}

/// Refines from a known starting rotation pair using every feature the
/// variant consumes (no outlier rejection).
pub fn estimate_from_initial(
    points: &[PointTrack],
    lines: &[LineTrack],
    initial: &RotationPair,
    cfg: &EstimatorConfig,
) -> Result<PoseEstimate> {
    let clock = Stopwatch::start();
    let pm = vec![cfg.variant.uses_points(); points.len()];
    let lm = vec![cfg.variant.uses_lines(); lines.len()];
    let refined = refine(points, lines, &pm, &lm, initial, cfg)?;
    let mut pose = assemble(cfg.variant, refined, pm, lm, empty_diagnostics(InitSource::Given));
    pose.diagnostics.timings.total_ms = clock.ms();
    Ok(pose)
}

/// Robust estimate: RANSAC per feature type, pooled IRLS refinement on the
/// inliers, then translation from the inliers.
pub fn estimate_three_view_pose(
    points: &[PointTrack],
    lines: &[LineTrack],
    cfg: &EstimatorConfig,
) -> Result<PoseEstimate> {
    let total = Stopwatch::start();
    let variant = cfg.variant;
    let rc = &cfg.ransac;
    let lm = &cfg.irls.lm;

    let clock = Stopwatch::start();
    let point_ransac = variant
        .uses_points()
        .then(|| ransac_rotation(points, lines, FeatureKind::Points, variant.line_form(), rc, lm));
    let line_ransac = variant
        .uses_lines()
        .then(|| ransac_rotation(points, lines, FeatureKind::Lines, variant.line_form(), rc, lm));
    let ransac_ms = clock.ms();

    let mut diagnostics = empty_diagnostics(InitSource::Points);
    diagnostics.timings.ransac_ms = ransac_ms;
    let mut point_mask = vec![false; points.len()];
    let mut line_mask = vec![false; lines.len()];
    let mut first_error = None;
    let mut from_points = None;
    let mut from_lines = None;
    match point_ransac {
        Some(Ok(r)) => {
            diagnostics.point_ransac_iterations = r.iterations;
            point_mask = r.inliers.clone();
            from_points = Some(r);
        }
        Some(Err(e)) => first_error = Some(e),
        None => {}
    }
    match line_ransac {
        Some(Ok(r)) => {
            diagnostics.line_ransac_iterations = r.iterations;
            line_mask = r.inliers.clone();
            from_lines = Some(r);
        }
        Some(Err(e)) => {
            first_error.get_or_insert(e);
        }
        None => {}
    }

    let initial = match (&from_points, &from_lines) {
        (Some(p), _) if p.consensus >= rc.sample_size => p.state,
        (_, Some(l)) => {
            diagnostics.init_source = InitSource::Lines;
            l.state
        }
        (Some(p), None) => p.state,
        (None, None) => {
            return Err(first_error.unwrap_or_else(|| Error::NotEnoughFeatures("no usable features".into())));
        }
    };

    let mut refined = refine(points, lines, &point_mask, &line_mask, &initial, cfg)?;
    if cfg.reclassify {
        let rot = FrameRotations::from_pair(&refined.irls.state);
        let directions = frame1_directions(&refined.translation, &rot).or_else(|| {
            let idx: Vec<usize> = (0..points.len()).filter(|&i| point_mask[i]).collect();
            (!idx.is_empty()).then(|| eigen_directions(points, &idx, &rot))
        });
        let (mut p2, mut l2) = classify_inliers(points, lines, &refined.irls.state, directions, &rc.thresholds);
        if !variant.uses_points() {
            p2.fill(false);
        }
        if !variant.uses_lines() {
            l2.fill(false);
        }
        if p2 != point_mask || l2 != line_mask {
            if let Ok(again) = refine(points, lines, &p2, &l2, &refined.irls.state, cfg) {
                diagnostics.timings.rotation_ms += refined.ms_rotation;
                diagnostics.timings.translation_ms += refined.ms_translation;
                refined = again;
                point_mask = p2;
                line_mask = l2;
                diagnostics.reclassified = true;
            }
        }
    }

    let mut pose = assemble(variant, refined, point_mask, line_mask, diagnostics);
    pose.diagnostics.timings.total_ms = total.ms();
    Ok(pose)
}
