//! Symmetric 3x3 eigen decomposition and the coplanarity matrix built on it.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};

/// Relative eigenvalue gap below which the cross-product eigenvectors are
/// replaced by Jacobi rotations.
const GAP_TOLERANCE: f64 = 1e-6;

/// Eigenvalues in ascending order; `vectors.column(i)` belongs to `values[i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen3 {
    pub values: Vector3<f64>,
    pub vectors: Matrix3<f64>,
}

impl SymEigen3 {
    pub fn min_vector(&self) -> Vector3<f64> {
        self.vectors.column(0).into_owned()
    }
}

/// Closed-form (trigonometric) eigen decomposition of a symmetric 3x3 matrix.
/// Only the upper triangle is read.
pub fn sym_eigen3(m: &Matrix3<f64>) -> SymEigen3 {
    let m = symmetrize(m);
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    let scale = m.abs().max();
    if scale == 0.0 {
        return SymEigen3 {
            values: Vector3::zeros(),
            vectors: Matrix3::identity(),
        };
    }
    if p1 == 0.0 {
        return sorted(Vector3::new(m[(0, 0)], m[(1, 1)], m[(2, 2)]), Matrix3::identity());
    }

    let q = m.trace() / 3.0;
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (m - q * Matrix3::identity()) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + TAU / 3.0).cos();
    let middle = 3.0 * q - largest - smallest;
    let values = Vector3::new(smallest, middle.clamp(smallest, largest), largest);

    let tol = GAP_TOLERANCE * values.abs().max().max(f64::MIN_POSITIVE);
    if values[1] - values[0] < tol || values[2] - values[1] < tol {
        return jacobi_eigen3(&m);
    }

    let v0 = null_vector(&(m - values[0] * Matrix3::identity()));
    let v2 = null_vector(&(m - values[2] * Matrix3::identity()));
    let (v0, v2) = match (v0, v2) {
        (Some(a), Some(b)) => (a, b),
        _ => return jacobi_eigen3(&m),
    };
    // re-orthogonalize the largest against the smallest before completing the basis
    let v2 = (v2 - v0 * v0.dot(&v2)).normalize();
    let v1 = v2.cross(&v0);
    let vectors = Matrix3::from_columns(&[canonical_sign(v0), canonical_sign(v1), canonical_sign(v2)]);
    SymEigen3 { values, vectors }
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let mut s = *m;
    for i in 0..3 {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }
    s
}

/// Unit vector spanning the null space of a rank-2 matrix: the largest cross
/// product of its rows.
fn null_vector(a: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let r0 = a.row(0).transpose();
    let r1 = a.row(1).transpose();
    let r2 = a.row(2).transpose();
    let candidates = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))?;
    let n = best.norm();
    (n > 0.0 && n.is_finite()).then(|| best / n)
}

/// Flips `v` so that its largest-magnitude component is positive (first index
/// wins ties).
pub fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let mut idx = 0;
    for i in 1..3 {
        if v[i].abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        -v
    } else {
        v
    }
}

fn sorted(values: Vector3<f64>, vectors: Matrix3<f64>) -> SymEigen3 {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    SymEigen3 {
        values: Vector3::new(values[idx[0]], values[idx[1]], values[idx[2]]),
        vectors: Matrix3::from_columns(&[
            canonical_sign(vectors.column(idx[0]).into_owned()),
            canonical_sign(vectors.column(idx[1]).into_owned()),
            canonical_sign(vectors.column(idx[2]).into_owned()),
        ]),
    }
}

/// Cyclic Jacobi sweeps; used when eigenvalues (nearly) coincide.
pub fn jacobi_eigen3(m: &Matrix3<f64>) -> SymEigen3 {
    let mut a = symmetrize(m);
    let mut v = Matrix3::<f64>::identity();
    for _ in 0..64 {
        let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        let diag = a[(0, 0)].powi(2) + a[(1, 1)].powi(2) + a[(2, 2)].powi(2);
        if off <= f64::EPSILON.powi(2) * 1e-4 * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Matrix3::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            a = rot.transpose() * a * rot;
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            v *= rot;
        }
    }
    sorted(Vector3::new(a[(0, 0)], a[(1, 1)], a[(2, 2)]), v)
}

/// `M = Σ w n nᵀ` with its eigen decomposition.
///
/// The smallest eigenvalue is recomputed as `Σ w (vᵀn)²` from the summed
/// normals, which keeps it accurate to the square of the rounding error when
/// the normals are exactly coplanar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoplanarityMatrix {
    pub m: Matrix3<f64>,
    pub eigen: SymEigen3,
}

impl CoplanarityMatrix {
    pub fn from_normals<'a>(normals: impl IntoIterator<Item = &'a Vector3<f64>>) -> Self {
        let terms: Vec<(Vector3<f64>, f64)> = normals.into_iter().map(|n| (*n, 1.0)).collect();
        Self::from_weighted_normals(terms)
    }

    pub fn from_weighted_normals(terms: impl IntoIterator<Item = (Vector3<f64>, f64)> + Clone) -> Self {
        let mut m = Matrix3::zeros();
        for (n, w) in terms.clone() {
            m += w * n * n.transpose();
        }
        let mut eigen = sym_eigen3(&m);
        let v = eigen.min_vector();
        let refined: f64 = terms.into_iter().map(|(n, w)| w * v.dot(&n).powi(2)).sum();
        eigen.values[0] = refined.min(eigen.values[1]);
        Self { m, eigen }
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigen.values[0]
    }

    /// Eigenvector of the smallest eigenvalue: the direction orthogonal to the
    /// best-fit plane of the normals.
    pub fn direction(&self) -> Vector3<f64> {
        self.eigen.min_vector()
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }
}
