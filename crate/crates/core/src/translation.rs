//! Global translations from known rotations.
//!
//! Every feature contributes rows `B t0 + C t1 + D t2 = 0` over the camera
//! centers `t_k` (global frame = frame 0), with `D = -(B + C)` so that a common
//! shift of all three centers is always in the null space. Point rows are the
//! three pairwise epipolar constraints; a line row is the trifocal incidence
//! relation with the two cross products replaced by their signed magnitudes
//! along the estimated line direction.

use nalgebra::{DMatrix, Matrix3, RowVector3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::eigen::canonical_sign;
use crate::geometry::skew;
use crate::rotation::cost::nbc_matrix;
use crate::rotation::RotationPair;
use crate::scene::global_rotations;
use crate::tracks::{LineTrack, PointTrack};
use crate::{Error, Result};

/// Rows shorter than this are dropped before normalization.
const MIN_ROW_NORM: f64 = 1e-12;
/// Rows needed beyond the 3-dimensional common-translation gauge.
const MIN_ROWS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LigtVariant {
    Points,
    Lines,
    PointsAndLines,
}

impl LigtVariant {
    pub fn uses_points(&self) -> bool {
        matches!(self, LigtVariant::Points | LigtVariant::PointsAndLines)
    }

    pub fn uses_lines(&self) -> bool {
        matches!(self, LigtVariant::Lines | LigtVariant::PointsAndLines)
    }

    pub fn label(&self) -> &'static str {
        match self {
            LigtVariant::Points => "P-LiGT",
            LigtVariant::Lines => "L-LiGT",
            LigtVariant::PointsAndLines => "PL-LiGT",
        }
    }
}

impl std::str::FromStr for LigtVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "points" | "p" | "p-ligt" => Ok(LigtVariant::Points),
            "lines" | "l" | "l-ligt" => Ok(LigtVariant::Lines),
            "points_and_lines" | "pl" | "pl-ligt" => Ok(LigtVariant::PointsAndLines),
            other => Err(Error::InvalidConfig(format!("unknown translation variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LigtConfig {
    /// Lines whose coplanarity eigenvalue exceeds this are not used.
    pub line_max_lambda: f64,
    /// Lines whose back-projected planes (nearly) coincide are not used: the
    /// middle eigenvalue of their coplanarity matrix must exceed this.
    pub line_min_plane_spread: f64,
    /// Degeneracy when the second smallest singular value of the gauge-reduced
    /// system falls below this fraction of the largest.
    pub degeneracy_ratio: f64,
    pub normalize_rows: bool,
}

impl Default for LigtConfig {
    fn default() -> Self {
        Self {
            line_max_lambda: 0.05,
            line_min_plane_spread: 1e-4,
            degeneracy_ratio: 1e-8,
            normalize_rows: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSource {
    Point(u64),
    Line(u64),
}

/// One scalar constraint `b·t0 + c·t1 + d·t2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LigtRow {
    pub b: RowVector3<f64>,
    pub c: RowVector3<f64>,
    pub d: RowVector3<f64>,
    pub source: RowSource,
}

impl LigtRow {
    fn new(b: RowVector3<f64>, c: RowVector3<f64>, source: RowSource) -> Self {
        Self {
            b,
            c,
            d: -(b + c),
            source,
        }
    }

    pub fn as_vector(&self) -> SVector<f64, 9> {
        SVector::<f64, 9>::from_iterator(self.b.iter().chain(self.c.iter()).chain(self.d.iter()).copied())
    }

    pub fn evaluate(&self, t: &[Vector3<f64>; 3]) -> f64 {
        (self.b * t[0] + self.c * t[1] + self.d * t[2])[0]
    }
}

/// Rotations of the three frames relative to the global (frame 0) frame,
/// with the derived pairwise rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRotations {
    pub r_g: [Matrix3<f64>; 3],
    pub r01: Matrix3<f64>,
    pub r02: Matrix3<f64>,
    pub r10: Matrix3<f64>,
    pub r12: Matrix3<f64>,
}

impl FrameRotations {
    pub fn new(r10: &Matrix3<f64>, r12: &Matrix3<f64>) -> Self {
        let r_g = global_rotations(r10, r12);
        Self {
            r_g,
            r01: r10.transpose(),
            r02: r_g[2].transpose(),
            r10: *r10,
            r12: *r12,
        }
    }

    pub fn from_pair(pair: &RotationPair) -> Self {
        Self::new(&pair.r10(), &pair.r12())
    }
}

/// The up to three epipolar rows of a point track, one per observed frame
/// pair (0-1, 0-2, 1-2), built from calibrated homogeneous rays.
pub fn point_ligt_rows(track: &PointTrack, rot: &FrameRotations) -> Vec<LigtRow> {
    let f = track.obs.map(|o| o.map(|o| o.ray));
    let zero = RowVector3::zeros();
    let src = RowSource::Point(track.id);
    let mut rows = Vec::with_capacity(3);
    if let (Some(f0), Some(f1)) = (f[0], f[1]) {
        let a = f0.transpose() * skew(&(rot.r01 * f1)) * rot.r_g[0];
        rows.push(LigtRow::new(-a, a, src));
    }
    if let (Some(f0), Some(f2)) = (f[0], f[2]) {
        let a = f0.transpose() * skew(&(rot.r02 * f2)) * rot.r_g[0];
        rows.push(LigtRow::new(-a, zero, src));
    }
    if let (Some(f1), Some(f2)) = (f[1], f[2]) {
        let a = f1.transpose() * skew(&(rot.r12 * f2)) * rot.r_g[1];
        rows.push(LigtRow::new(zero, -a, src));
    }
    rows
}

/// Direction of a line in frame 0: the eigenvector of the smallest eigenvalue
/// of its coplanarity matrix, rotated out of frame 1. `None` when the line is
/// rejected (poor coplanarity or overlapping back-projected planes).
pub fn line_direction_estimate(track: &LineTrack, rot: &FrameRotations, cfg: &LigtConfig) -> Option<Vector3<f64>> {
    let m = nbc_matrix(track, &rot.r10, &rot.r12);
    if m.lambda_min() > cfg.line_max_lambda || m.eigen.values[1] < cfg.line_min_plane_spread {
        return None;
    }
    Some(canonical_sign(rot.r01 * m.direction()))
}

/// The single trifocal row of a line track given its frame-0 direction `r0`.
/// `None` when both cross-product magnitudes vanish.
pub fn line_ligt_row(track: &LineTrack, rot: &FrameRotations, r0: &Vector3<f64>) -> Option<LigtRow> {
    let [n0, n1, n2] = track.normals();
    let a1 = n0.cross(&(rot.r01 * n1));
    let a2 = n0.cross(&(rot.r02 * n2));
    let (m1, m2) = (a1.norm(), a2.norm());
    if m1 < MIN_ROW_NORM && m2 < MIN_ROW_NORM {
        return None;
    }
    let s1 = sign(r0.dot(&a1)) * m1;
    let s2 = sign(r0.dot(&a2)) * m2;
    let p = s2 * n1.transpose() * rot.r_g[1];
    let b = s1 * n2.transpose() * rot.r_g[2] - p;
    Some(LigtRow::new(b, p, RowSource::Line(track.id)))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Stacked constraint rows with the rotations they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LigtSystem {
    pub rows: Vec<LigtRow>,
    pub rotations: FrameRotations,
    pub lines_rejected: usize,
}

impl LigtSystem {
    pub fn new(rotations: FrameRotations) -> Self {
        Self {
            rows: Vec::new(),
            rotations,
            lines_rejected: 0,
        }
    }

    pub fn build(
        points: &[PointTrack],
        lines: &[LineTrack],
        rotations: FrameRotations,
        variant: LigtVariant,
        cfg: &LigtConfig,
    ) -> Self {
        let mut sys = Self::new(rotations);
        if variant.uses_points() {
            for t in points {
                sys.add_point(t);
            }
        }
        if variant.uses_lines() {
            for t in lines {
                sys.add_line(t, cfg);
            }
        }
        sys
    }

    pub fn add_point(&mut self, track: &PointTrack) {
        self.rows.extend(point_ligt_rows(track, &self.rotations));
    }

    pub fn add_line(&mut self, track: &LineTrack, cfg: &LigtConfig) {
        let row = line_direction_estimate(track, &self.rotations, cfg)
            .and_then(|r0| line_ligt_row(track, &self.rotations, &r0));
        match row {
            Some(r) => self.rows.push(r),
            None => self.lines_rejected += 1,
        }
    }

    /// `#rows x 9` coefficient matrix over `(t0; t1; t2)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows.len(), 9);
        for (i, r) in self.rows.iter().enumerate() {
            a.row_mut(i).copy_from(&r.as_vector().transpose());
        }
        a
    }
}

/// Camera centers (gauge `t0 = 0`, `|t1| = 1`) or a pure-rotation flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationSolution {
    pub global: [Vector3<f64>; 3],
    /// Set when the rows do not determine a translation direction; `global`
    /// is then all zeros.
    pub pure_rotation: bool,
    /// Singular values of the gauge-reduced system, ascending.
    pub singular_values: Vec<f64>,
    pub rows_used: usize,
    pub lines_rejected: usize,
}

impl TranslationSolution {
    fn degenerate(singular_values: Vec<f64>, rows_used: usize, lines_rejected: usize) -> Self {
        Self {
            global: [Vector3::zeros(); 3],
            pure_rotation: true,
            singular_values,
            rows_used,
            lines_rejected,
        }
    }
}

/// Orthonormal basis (9 x 6) of the complement of the common translations
/// `(v, v, v)`.
fn gauge_complement() -> SMatrix<f64, 9, 6> {
    let mut q = SMatrix::<f64, 9, 6>::zeros();
    let a = 1.0 / 2f64.sqrt();
    let b = 1.0 / 6f64.sqrt();
    for i in 0..3 {
        q[(i, i)] = a;
        q[(3 + i, i)] = -a;
        q[(i, 3 + i)] = b;
        q[(3 + i, 3 + i)] = b;
        q[(6 + i, 3 + i)] = -2.0 * b;
    }
    q
}

/// Solves the stacked system for its null direction orthogonal to the
/// common-translation gauge, then fixes the gauge. The overall sign is left
/// as the SVD returns it; see [`estimate_translation`] for cheirality.
pub fn solve_ligt(system: &LigtSystem, cfg: &LigtConfig) -> TranslationSolution {
    let mut rows: Vec<SVector<f64, 9>> = Vec::with_capacity(system.rows.len());
    for r in &system.rows {
        let v = r.as_vector();
        let n = v.norm();
        if n < MIN_ROW_NORM {
            continue;
        }
        rows.push(if cfg.normalize_rows { v / n } else { v });
    }
    let used = rows.len();
    if used < MIN_ROWS {
        return TranslationSolution::degenerate(Vec::new(), used, system.lines_rejected);
    }

    let q = gauge_complement();
    let mut aq = DMatrix::<f64>::zeros(used.max(6), 6);
    for (i, r) in rows.iter().enumerate() {
        aq.row_mut(i).copy_from(&(r.transpose() * q));
    }
    let svd = aq.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let largest = *singular_values.last().unwrap();
    if !(singular_values[1] > cfg.degeneracy_ratio * largest) {
        return TranslationSolution::degenerate(singular_values, used, system.lines_rejected);
    }

    let y = v_t.row(order[0]).transpose();
    let x = q * SVector::<f64, 6>::from_iterator(y.iter().copied());
    let t = [
        Vector3::new(x[0], x[1], x[2]),
        Vector3::new(x[3], x[4], x[5]),
        Vector3::new(x[6], x[7], x[8]),
    ];
    let shifted = [Vector3::zeros(), t[1] - t[0], t[2] - t[0]];
    let scale = if shifted[1].norm() > 1e-9 * shifted[2].norm().max(1e-300) {
        shifted[1].norm()
    } else {
        shifted[2].norm()
    };
    if !(scale > 0.0) {
        return TranslationSolution::degenerate(singular_values, used, system.lines_rejected);
    }
    TranslationSolution {
        global: shifted.map(|v| v / scale),
        pure_rotation: false,
        singular_values,
        rows_used: used,
        lines_rejected: system.lines_rejected,
    }
}

/// Depths `(λa, λb)` minimizing `|λa da - (cb + λb db)|`.
fn midpoint_depths(da: &Vector3<f64>, cb: &Vector3<f64>, db: &Vector3<f64>) -> Option<(f64, f64)> {
    let (aa, ab, bb) = (da.dot(da), da.dot(db), db.dot(db));
    let det = aa * bb - ab * ab;
    if det.abs() < 1e-12 * aa * bb {
        return None;
    }
    let (ra, rb) = (da.dot(cb), db.dot(cb));
    let la = (bb * ra - ab * rb) / det;
    let lb = (ab * ra - aa * rb) / det;
    Some((la, lb))
}

/// Positive when the landmarks triangulate in front of the cameras for
/// `global`, negative when they do for the mirrored solution.
pub fn cheirality_vote(
    points: &[PointTrack],
    lines: &[LineTrack],
    rot: &FrameRotations,
    global: &[Vector3<f64>; 3],
) -> i64 {
    let mut vote = 0i64;
    let mut tally = |la: f64, lb: f64| {
        if la > 0.0 && lb > 0.0 {
            vote += 1;
        } else if la < 0.0 && lb < 0.0 {
            vote -= 1;
        }
    };
    for t in points {
        // frame pair (a, b), rays in the global frame
        let pair = if t.observed(0) && t.observed(1) {
            Some((0, 1))
        } else if t.observed(1) && t.observed(2) {
            Some((1, 2))
        } else if t.observed(0) && t.observed(2) {
            Some((0, 2))
        } else {
            None
        };
        let Some((a, b)) = pair else { continue };
        let da = rot.r_g[a].transpose() * t.obs[a].unwrap().ray;
        let db = rot.r_g[b].transpose() * t.obs[b].unwrap().ray;
        if let Some((la, lb)) = midpoint_depths(&da, &(global[b] - global[a]), &db) {
            tally(la, lb);
        }
    }
    if vote != 0 {
        return vote;
    }
    // lines: endpoint rays of frame 0 against the back-projected plane of frame 1
    for t in lines {
        let plane_n = rot.r_g[1].transpose() * t.views[1].normal;
        for ray in &t.views[0].endpoint_rays {
            let denom = plane_n.dot(ray);
            if denom.abs() < 1e-12 {
                continue;
            }
            let depth = plane_n.dot(&global[1]) / denom;
            if depth > 0.0 {
                vote += 1;
            } else if depth < 0.0 {
                vote -= 1;
            }
        }
    }
    vote
}

/// Builds, solves and sign-disambiguates the translation system.
pub fn estimate_translation(
    points: &[PointTrack],
    lines: &[LineTrack],
    rotations: &RotationPair,
    variant: LigtVariant,
    cfg: &LigtConfig,
) -> TranslationSolution {
    let rot = FrameRotations::from_pair(rotations);
    let system = LigtSystem::build(points, lines, rot, variant, cfg);
    let mut sol = solve_ligt(&system, cfg);
    if !sol.pure_rotation {
        let p: &[PointTrack] = if variant.uses_points() { points } else { &[] };
        if cheirality_vote(p, lines, &rot, &sol.global) < 0 {
            sol.global = sol.global.map(|v| -v);
        }
    }
    sol
}

/// Unit relative directions `(⁰t₁, ¹t₂)`.
pub fn relative_translations(sol: &TranslationSolution, rotations: &RotationPair) -> Result<(Vector3<f64>, Vector3<f64>)> {
    if sol.pure_rotation {
        return Err(Error::NotEnoughFeatures("translation is degenerate (pure rotation)".into()));
    }
    let rot = FrameRotations::from_pair(rotations);
    let [t0, t1, t2] = sol.global;
    let a = rot.r_g[0] * (t1 - t0);
    let b = rot.r_g[1] * (t2 - t1);
    let a = a.try_normalize(0.0).ok_or(Error::ZeroDirection)?;
    let b = b.try_normalize(0.0).ok_or(Error::ZeroDirection)?;
    Ok((a, b))
}
