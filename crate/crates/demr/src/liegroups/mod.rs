//! SO(3)/SE(3) points, tangent coordinates, exponential and logarithm maps,
//! Euclidean embeddings with their deterministic inverses, and the
//! concentrated Gaussian noise model used by the estimation experiments.

mod embed;
mod gaussian;
mod maps;

pub use embed::{
    baseline_to_rotation, dist_extrinsic, embed_rotation, embed_transform, inverse_embed,
    nearest_rotation, project_so3_svd, rot_from_6d, rotation_rep, EmbeddedVector, Tag,
};
pub use gaussian::{
    chordal_mean_project, frechet_mean, sample_transform_in_range, sample_transform_uniform,
    ConcentratedGaussian, SampleMode,
};
pub use maps::{
    dist_angular, dist_geodesic_se3, dist_geodesic_so3, exp_se3, exp_so3, hat, log_se3, log_so3,
    vee,
};

use crate::matlin::{Matrix, MatError};
use thiserror::Error;

/// Orthogonality / determinant tolerance for accepting a rotation matrix.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LieError {
    #[error("matrix is not skew-symmetric (residual {residual:.3e})")]
    NotSkew { residual: f64 },
    #[error("matrix is not a rotation (orthogonality residual {ortho:.3e}, det {det})")]
    NotRotation { ortho: f64, det: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("nearest rotation is not unique (two smallest singular values sum to {gap:.3e}); a representative is attached")]
    RankDeficient {
        gap: f64,
        representative: RotationMatrix,
    },
    #[error("embedded-vector tag mismatch: expected {expected}, got {got}")]
    TagMismatch { expected: String, got: String },
    #[error("tag {0} has no inverse embedding onto SO(3)/SE(3)")]
    UnknownTag(String),
    #[error("embedded vector for tag {tag} must have length {expected}, got {got}")]
    BadLength {
        tag: String,
        expected: usize,
        got: usize,
    },
    #[error("entries must be finite")]
    NotFinite,
    #[error("covariance must be symmetric positive-definite: {0}")]
    BadCovariance(String),
    #[error("fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("mean requires at least one sample")]
    EmptySample,
    #[error("sample {index} lies {distance:.4} from the first sample, outside the pi/2 ball")]
    DispersedSamples { index: usize, distance: f64 },
    #[error("mean iteration did not converge (last update {update_norm:.3e}); last iterate attached")]
    NonConvergence {
        update_norm: f64,
        last: RotationMatrix,
    },
    #[error(transparent)]
    Mat(#[from] MatError),
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// A point on SO(3): a 3x3 matrix with orthonormal rows/columns and
/// determinant +1, enforced at construction to [`ROTATION_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix {
    r: Matrix,
}

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix {
            r: Matrix::identity(3),
        }
    }

    /// Validate and wrap a 3x3 matrix.
    pub fn from_matrix(r: Matrix) -> Result<Self, LieError> {
        if r.rows() != 3 || r.cols() != 3 {
            return Err(LieError::DegenerateInput(format!(
                "rotation must be 3x3, got {}x{}",
                r.rows(),
                r.cols()
            )));
        }
        if !r.is_finite() {
            return Err(LieError::NotFinite);
        }
        let ortho = r.orthonormality_residual();
        let det = det3(&r);
        if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(LieError::NotRotation { ortho, det });
        }
        Ok(RotationMatrix { r })
    }

    /// Wrap without validation; for internal products of already-valid
    /// rotations where drift is at rounding level.
    pub(crate) fn from_matrix_unchecked(r: Matrix) -> Self {
        debug_assert!(r.orthonormality_residual() <= 1e-7, "unchecked non-rotation");
        RotationMatrix { r }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.r
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.r[(i, j)]
    }

    /// Group inverse (= transpose).
    pub fn inverse(&self) -> RotationMatrix {
        RotationMatrix {
            r: self.r.transpose(),
        }
    }

    pub fn compose(&self, other: &RotationMatrix) -> RotationMatrix {
        RotationMatrix::from_matrix_unchecked(self.r.matmul(&other.r))
    }

    /// Rotate a point.
    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[(i, 0)] * p[0] + self.r[(i, 1)] * p[1] + self.r[(i, 2)] * p[2];
        }
        out
    }

    pub fn max_abs_diff(&self, other: &RotationMatrix) -> f64 {
        self.r.max_abs_diff(&other.r)
    }
}

pub(crate) fn det3(m: &Matrix) -> f64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// A rigid motion: rotation plus translation, i.e. the homogeneous form
/// `[[R, t], [0, 1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rot: RotationMatrix,
    pub trans: [f64; 3],
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rot: RotationMatrix::identity(),
            trans: [0.0; 3],
        }
    }

    pub fn new(rot: RotationMatrix, trans: [f64; 3]) -> Result<Self, LieError> {
        if !trans.iter().all(|x| x.is_finite()) {
            return Err(LieError::NotFinite);
        }
        Ok(RigidTransform { rot, trans })
    }

    pub fn inverse(&self) -> RigidTransform {
        let rot_inv = self.rot.inverse();
        let t = rot_inv.apply(&self.trans);
        RigidTransform {
            rot: rot_inv,
            trans: [-t[0], -t[1], -t[2]],
        }
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let rt = self.rot.apply(&other.trans);
        RigidTransform {
            rot: self.rot.compose(&other.rot),
            trans: [
                rt[0] + self.trans[0],
                rt[1] + self.trans[1],
                rt[2] + self.trans[2],
            ],
        }
    }

    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        let r = self.rot.apply(p);
        [
            r[0] + self.trans[0],
            r[1] + self.trans[1],
            r[2] + self.trans[2],
        ]
    }
}

/// so(3) tangent coordinates: the rotation vector `omega` (radians * axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So3Tangent(pub [f64; 3]);

impl So3Tangent {
    pub fn norm(&self) -> f64 {
        norm3(&self.0)
    }
}

/// se(3) tangent coordinates: rotation block `omega` and translation block
/// `v`, in that order (matching the 6x6 covariance layout of the noise
/// model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se3Tangent {
    pub omega: [f64; 3],
    pub v: [f64; 3],
}

impl Se3Tangent {
    pub fn norm(&self) -> f64 {
        (dot3(&self.omega, &self.omega) + dot3(&self.v, &self.v)).sqrt()
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.omega[0],
            self.omega[1],
            self.omega[2],
            self.v[0],
            self.v[1],
            self.v[2],
        ]
    }
}

/// Either kind of group element; the return type of the inverse embedding
/// and the mean type of the concentrated Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Rotation(RotationMatrix),
    Transform(RigidTransform),
}

impl GroupElement {
    pub fn as_rotation(&self) -> Option<&RotationMatrix> {
        match self {
            GroupElement::Rotation(r) => Some(r),
            GroupElement::Transform(_) => None,
        }
    }

    pub fn as_transform(&self) -> Option<&RigidTransform> {
        match self {
            GroupElement::Transform(m) => Some(m),
            GroupElement::Rotation(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_rejects_non_orthogonal() {
        let mut m = Matrix::identity(3);
        m[(0, 1)] = 0.1;
        assert!(matches!(
            RotationMatrix::from_matrix(m),
            Err(LieError::NotRotation { .. })
        ));
    }

    #[test]
    fn rotation_rejects_reflection() {
        let m = Matrix::diag(&[1.0, 1.0, -1.0]);
        assert!(matches!(
            RotationMatrix::from_matrix(m),
            Err(LieError::NotRotation { .. })
        ));
    }

    #[test]
    fn transform_inverse_composes_to_identity() {
        let rot = exp_so3(&So3Tangent([0.3, -0.2, 0.9]));
        let m = RigidTransform::new(rot, [1.0, -2.0, 0.5]).unwrap();
        let id = m.compose(&m.inverse());
        assert!(id.rot.max_abs_diff(&RotationMatrix::identity()) < 1e-12);
        assert!(norm3(&id.trans) < 1e-12);
    }

    #[test]
    fn apply_matches_homogeneous_composition() {
        let rot = exp_so3(&So3Tangent([0.1, 0.2, 0.3]));
        let m = RigidTransform::new(rot, [4.0, 5.0, 6.0]).unwrap();
        let p = [1.0, -1.0, 2.0];
        let direct = m.apply(&p);
        let via = m.rot.apply(&p);
        assert!((direct[0] - via[0] - 4.0).abs() < 1e-15);
        assert!((direct[1] - via[1] - 5.0).abs() < 1e-15);
        assert!((direct[2] - via[2] - 6.0).abs() < 1e-15);
    }
}
