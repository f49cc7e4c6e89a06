//! Coplanarity costs over the rotation pair.
//!
//! Point terms: for each frame pair sharing frame 1, the epipolar-plane normals
//! `b1 x R1k bk` must be coplanar; the cost is the smallest eigenvalue of their
//! scatter matrix. It is stacked as one residual `tᵀn` per track, `t` being the
//! eigenvector of that eigenvalue.
//!
//! Line terms: the three back-projected normals of a line, rotated into frame
//! 1, must be coplanar. `Mult` uses the scalar triple product (parallelepiped
//! volume, `√det M`), `Mini` the smallest eigenvalue of `M` stacked as three
//! residuals.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::eigen::{sym_eigen3, CoplanarityMatrix};
use crate::rotation::{RotationPair, WeightState};
use crate::tracks::{LineTrack, PointTrack};

/// Normals shorter than this carry no direction and are skipped.
pub const MIN_NORMAL_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineForm {
    Mini,
    Mult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub use_points: bool,
    pub use_lines: bool,
    pub line_form: LineForm,
}

impl CostModel {
    pub const POINTS_AND_LINES: Self = Self {
        use_points: true,
        use_lines: true,
        line_form: LineForm::Mult,
    };
    pub const POINTS_ONLY: Self = Self {
        use_points: true,
        use_lines: false,
        line_form: LineForm::Mult,
    };

    pub fn lines_only(form: LineForm) -> Self {
        Self {
            use_points: false,
            use_lines: true,
            line_form: form,
        }
    }
}

/// Scatter matrix of the epipolar normals `ba x R_ab bb` for bearing pairs.
pub fn nec_matrix(bearings: &[(Vector3<f64>, Vector3<f64>)], r_ab: &Matrix3<f64>) -> CoplanarityMatrix {
    let normals: Vec<Vector3<f64>> = bearings
        .iter()
        .map(|(a, b)| a.cross(&(r_ab * b)))
        .filter(|n| n.norm() >= MIN_NORMAL_NORM)
        .collect();
    CoplanarityMatrix::from_normals(normals.iter())
}

/// Normals of a line track expressed in frame 1.
pub fn line_normals_in_frame1(track: &LineTrack, r10: &Matrix3<f64>, r12: &Matrix3<f64>) -> [Vector3<f64>; 3] {
    let [n0, n1, n2] = track.normals();
    [r10 * n0, n1, r12 * n2]
}

pub fn nbc_matrix(track: &LineTrack, r10: &Matrix3<f64>, r12: &Matrix3<f64>) -> CoplanarityMatrix {
    let normals = line_normals_in_frame1(track, r10, r12);
    CoplanarityMatrix::from_normals(normals.iter())
}

pub fn nbc_mini_residual(m: &CoplanarityMatrix) -> f64 {
    m.lambda_min()
}

/// `|n0 · (n1 x n2)|`, equal to `√det M` for `M = Σ n nᵀ` of the three normals.
pub fn nbc_mult_residual(n0: &Vector3<f64>, n1: &Vector3<f64>, n2: &Vector3<f64>) -> f64 {
    n0.dot(&n1.cross(n2)).abs()
}

/// The selected features and cost terms of one rotation solve.
#[derive(Debug, Clone)]
pub struct RotationProblem<'a> {
    pub points: &'a [PointTrack],
    pub lines: &'a [LineTrack],
    /// Point tracks contributing to the frame 1 / frame 0 term.
    pub pair10: Vec<usize>,
    /// Point tracks contributing to the frame 1 / frame 2 term.
    pub pair12: Vec<usize>,
    pub line_terms: Vec<usize>,
    pub model: CostModel,
}

impl<'a> RotationProblem<'a> {
    pub fn new(points: &'a [PointTrack], lines: &'a [LineTrack], model: CostModel) -> Self {
        let all_points: Vec<usize> = (0..points.len()).collect();
        let all_lines: Vec<usize> = (0..lines.len()).collect();
        Self::with_indices(points, lines, &all_points, &all_lines, model)
    }

    pub fn with_masks(
        points: &'a [PointTrack],
        lines: &'a [LineTrack],
        point_mask: &[bool],
        line_mask: &[bool],
        model: CostModel,
    ) -> Self {
        let p: Vec<usize> = (0..points.len()).filter(|&i| point_mask[i]).collect();
        let l: Vec<usize> = (0..lines.len()).filter(|&i| line_mask[i]).collect();
        Self::with_indices(points, lines, &p, &l, model)
    }

    pub fn with_indices(
        points: &'a [PointTrack],
        lines: &'a [LineTrack],
        point_idx: &[usize],
        line_idx: &[usize],
        model: CostModel,
    ) -> Self {
        let (mut pair10, mut pair12) = (Vec::new(), Vec::new());
        if model.use_points {
            for &i in point_idx {
                let t = &points[i];
                if t.observed(0) && t.observed(1) {
                    pair10.push(i);
                }
                if t.observed(1) && t.observed(2) {
                    pair12.push(i);
                }
            }
        }
        let line_terms = if model.use_lines { line_idx.to_vec() } else { Vec::new() };
        Self {
            points,
            lines,
            pair10,
            pair12,
            line_terms,
            model,
        }
    }

    pub fn residual_count(&self) -> usize {
        let per_line = match self.model.line_form {
            LineForm::Mult => 1,
            LineForm::Mini => 3,
        };
        self.pair10.len() + self.pair12.len() + per_line * self.line_terms.len()
    }

    /// Cost terms constraining each rotation; used to reject problems where
    /// one of the two rotations is unobservable.
    pub fn constrains_both(&self) -> bool {
        let lines = !self.line_terms.is_empty();
        (lines || self.pair10.len() >= 2) && (lines || self.pair12.len() >= 2)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `Σ r²`.
    pub cost: f64,
    pub residuals: Vec<f64>,
    /// One row per residual, present when requested.
    pub jacobian: Option<Vec<Vector6<f64>>>,
    pub jtj: Matrix6<f64>,
    pub jtr: Vector6<f64>,
}

impl Evaluation {
    /// `∇ Σ r² = 2 Jᵀ r`.
    pub fn gradient(&self) -> Vector6<f64> {
        2.0 * self.jtr
    }
}

struct Accumulator {
    residuals: Vec<f64>,
    rows: Option<Vec<Vector6<f64>>>,
    jtj: Matrix6<f64>,
    jtr: Vector6<f64>,
    with_jacobian: bool,
}

impl Accumulator {
    fn push(&mut self, r: f64, row: Option<Vector6<f64>>) {
        self.residuals.push(r);
        if let Some(row) = row {
            self.jtj += row * row.transpose();
            self.jtr += row * r;
            if let Some(rows) = self.rows.as_mut() {
                rows.push(row);
            }
        }
    }
}

/// One eigenvalue term: residuals `√w tᵀn` with the eigenvector `t` of the
/// smallest eigenvalue of `Σ w n nᵀ`. The Jacobian includes the first-order
/// eigenvector derivative.
fn eigen_block(normals: &[Vector3<f64>], derivs: &[[Vector3<f64>; 6]], weights: &[f64], acc: &mut Accumulator) {
    if normals.is_empty() {
        return;
    }
    let mut m = Matrix3::zeros();
    for (n, w) in normals.iter().zip(weights) {
        m += *w * n * n.transpose();
    }
    let eig = sym_eigen3(&m);
    let t = eig.min_vector();

    let mut dt = [Vector3::zeros(); 6];
    if acc.with_jacobian {
        let tol = 1e-10 * eig.values[2].abs().max(f64::MIN_POSITIVE);
        for k in 1..3 {
            let gap = eig.values[k] - eig.values[0];
            if !(gap > tol) {
                continue;
            }
            let vk = eig.vectors.column(k).into_owned();
            let mut coef = [0.0; 6];
            for ((n, dn), w) in normals.iter().zip(derivs).zip(weights) {
                let (vn, tn) = (vk.dot(n), t.dot(n));
                for p in 0..6 {
                    coef[p] += w * (vk.dot(&dn[p]) * tn + vn * dn[p].dot(&t));
                }
            }
            for p in 0..6 {
                dt[p] -= vk * (coef[p] / gap);
            }
        }
    }

    for ((n, dn), w) in normals.iter().zip(derivs).zip(weights) {
        let sw = w.sqrt();
        let r = sw * t.dot(n);
        let row = acc
            .with_jacobian
            .then(|| Vector6::from_fn(|p, _| sw * (dt[p].dot(n) + t.dot(&dn[p]))));
        acc.push(r, row);
    }
}

/// Residuals, cost and (optionally) Jacobian of the weighted cost at `state`.
pub fn evaluate(
    problem: &RotationProblem<'_>,
    weights: &WeightState,
    state: &RotationPair,
    with_jacobian: bool,
) -> Evaluation {
    let r10 = state.r10();
    let r12 = state.r12();
    let (d10, d12) = if with_jacobian {
        (state.c10.jacobian(), state.c12.jacobian())
    } else {
        ([Matrix3::zeros(); 3], [Matrix3::zeros(); 3])
    };

    let mut acc = Accumulator {
        residuals: Vec::with_capacity(problem.residual_count()),
        rows: with_jacobian.then(|| Vec::with_capacity(problem.residual_count())),
        jtj: Matrix6::zeros(),
        jtr: Vector6::zeros(),
        with_jacobian,
    };

    // point pairs: n = b1 x R1k bk
    for (indices, rot, drot, other, offset, w) in [
        (&problem.pair10, &r10, &d10, 0usize, 0usize, &weights.point10),
        (&problem.pair12, &r12, &d12, 2, 3, &weights.point12),
    ] {
        let mut normals = Vec::with_capacity(indices.len());
        let mut derivs = Vec::with_capacity(indices.len());
        for &i in indices.iter() {
            let t = &problem.points[i];
            let b1 = t.bearing(1).expect("frame 1 observed");
            let bk = t.bearing(other).expect("paired frame observed");
            normals.push(b1.cross(&(rot * bk)));
            let mut d = [Vector3::zeros(); 6];
            if with_jacobian {
                for a in 0..3 {
                    d[offset + a] = b1.cross(&(drot[a] * bk));
                }
            }
            derivs.push(d);
        }
        eigen_block(&normals, &derivs, w, &mut acc);
    }

    for (slot, &i) in problem.line_terms.iter().enumerate() {
        let track = &problem.lines[i];
        let [m0, m1, m2] = track.normals();
        let (n0, n1, n2) = (r10 * m0, m1, r12 * m2);
        let w = weights.line[slot];
        match problem.model.line_form {
            LineForm::Mult => {
                let sw = w.sqrt();
                let r = sw * n0.dot(&n1.cross(&n2));
                let row = with_jacobian.then(|| {
                    let c12 = n1.cross(&n2);
                    let c01 = n0.cross(&n1);
                    let mut row = Vector6::zeros();
                    for a in 0..3 {
                        row[a] = sw * (d10[a] * m0).dot(&c12);
                        row[3 + a] = sw * (d12[a] * m2).dot(&c01);
                    }
                    row
                });
                acc.push(r, row);
            }
            LineForm::Mini => {
                let mut dn0 = [Vector3::zeros(); 6];
                let mut dn2 = [Vector3::zeros(); 6];
                if with_jacobian {
                    for a in 0..3 {
                        dn0[a] = d10[a] * m0;
                        dn2[3 + a] = d12[a] * m2;
                    }
                }
                eigen_block(&[n0, n1, n2], &[dn0, [Vector3::zeros(); 6], dn2], &[w; 3], &mut acc);
            }
        }
    }

    let cost = acc.residuals.iter().map(|r| r * r).sum();
    Evaluation {
        cost,
        residuals: acc.residuals,
        jacobian: acc.rows,
        jtj: acc.jtj,
        jtr: acc.jtr,
    }
}

/// Weighted combined cost and its stacked residuals.
pub fn combined_cost(problem: &RotationProblem<'_>, weights: &WeightState, state: &RotationPair) -> (f64, Vec<f64>) {
    let e = evaluate(problem, weights, state, false);
    (e.cost, e.residuals)
}
