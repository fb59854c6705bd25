//! Euclidean embeddings of SO(3)/SE(3) and their deterministic inverses.
//!
//! The network emits an [`EmbeddedVector`]; [`inverse_embed`] maps it back
//! onto the manifold. Tags `nine9`/`se12` use the SVD projection, `sixd6`
//! uses Gram-Schmidt over the two predicted columns, and the classic
//! parameterizations (`euler3`, `axis3`, `quat4`) are kept as baselines.

use serde::{Deserialize, Serialize};

use super::maps::{exp_so3, log_so3};
use super::{cross3, det3, dot3, norm3, GroupElement, LieError, RigidTransform, RotationMatrix, So3Tangent};
use crate::matlin::{svd, Matrix};

/// Representation tag of an [`EmbeddedVector`].
///
/// `symvec` lengths are owned by the Grassmann side (`n(n+1)/2` for an
/// ambient dimension chosen there), so the tag itself carries no length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Euler3,
    Axis3,
    Quat4,
    Sixd6,
    Nine9,
    Se12,
    Symvec,
}

impl Tag {
    /// Required data length, `None` for `symvec`.
    pub fn len(&self) -> Option<usize> {
        match self {
            Tag::Euler3 | Tag::Axis3 => Some(3),
            Tag::Quat4 => Some(4),
            Tag::Sixd6 => Some(6),
            Tag::Nine9 => Some(9),
            Tag::Se12 => Some(12),
            Tag::Symvec => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Tag::Euler3 => "euler3",
            Tag::Axis3 => "axis3",
            Tag::Quat4 => "quat4",
            Tag::Sixd6 => "sixd6",
            Tag::Nine9 => "nine9",
            Tag::Se12 => "se12",
            Tag::Symvec => "symvec",
        }
    }
}

impl std::str::FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler3" => Ok(Tag::Euler3),
            "axis3" => Ok(Tag::Axis3),
            "quat4" => Ok(Tag::Quat4),
            "sixd6" => Ok(Tag::Sixd6),
            "nine9" => Ok(Tag::Nine9),
            "se12" => Ok(Tag::Se12),
            "symvec" => Ok(Tag::Symvec),
            other => Err(format!("unknown representation tag '{other}'")),
        }
    }
}

impl std::fmt::Display for Tag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A tagged Euclidean representation: the raw network output and the
/// pre-image of the inverse embedding. Carries no manifold constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedVector {
    tag: Tag,
    data: Vec<f64>,
}

impl EmbeddedVector {
    pub fn new(tag: Tag, data: Vec<f64>) -> Result<Self, LieError> {
        if let Some(expected) = tag.len() {
            if data.len() != expected {
                return Err(LieError::BadLength {
                    tag: tag.name().into(),
                    expected,
                    got: data.len(),
                });
            }
        } else if data.is_empty() {
            return Err(LieError::BadLength {
                tag: tag.name().into(),
                expected: 1,
                got: 0,
            });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(LieError::NotFinite);
        }
        Ok(EmbeddedVector { tag, data })
    }

    pub fn tag(&self) -> Tag {
        self.tag
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Mean squared difference between two same-tag embedded vectors.
pub fn dist_extrinsic(a: &EmbeddedVector, b: &EmbeddedVector) -> Result<f64, LieError> {
    if a.tag != b.tag || a.data.len() != b.data.len() {
        return Err(LieError::TagMismatch {
            expected: format!("{} (len {})", a.tag, a.data.len()),
            got: format!("{} (len {})", b.tag, b.data.len()),
        });
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data.len() as f64)
}

/// Nearest rotation to an arbitrary 3x3 matrix in Frobenius norm, via SVD:
/// `U V^T` when that has positive determinant, else `U diag(1, 1, -1) V^T`.
///
/// When the two smallest singular values sum below 1e-12 the minimizer is
/// not unique; the error carries the representative that would have been
/// returned so callers may accept it anyway.
pub fn nearest_rotation(m: &Matrix) -> Result<RotationMatrix, LieError> {
    assert_eq!((m.rows(), m.cols()), (3, 3), "nearest_rotation needs 3x3");
    if !m.is_finite() {
        return Err(LieError::NotFinite);
    }
    let f = svd(m)?;
    // det(U) det(V) is the sign of det(M) whenever M is nonsingular.
    let flip = det3(&f.u) * det3(&f.v) < 0.0;
    let mut u = f.u;
    if flip {
        for i in 0..3 {
            u[(i, 2)] = -u[(i, 2)];
        }
    }
    let r = RotationMatrix::from_matrix_unchecked(u.matmul_transpose(&f.v));
    let gap = f.s[1] + f.s[2];
    if gap < 1e-12 {
        return Err(LieError::RankDeficient {
            gap,
            representative: r,
        });
    }
    Ok(r)
}

/// Inverse of the 9D embedding: reshape row-major to 3x3 and project onto
/// SO(3) with [`nearest_rotation`].
pub fn project_so3_svd(e: &EmbeddedVector) -> Result<RotationMatrix, LieError> {
    expect_tag(e, Tag::Nine9)?;
    nearest_rotation(&Matrix::from_vec(3, 3, e.data.clone()))
}

/// Inverse of the 6D embedding: Gram-Schmidt on the two predicted columns,
/// third column by cross product.
pub fn rot_from_6d(e: &EmbeddedVector) -> Result<RotationMatrix, LieError> {
    expect_tag(e, Tag::Sixd6)?;
    let xa = [e.data[0], e.data[1], e.data[2]];
    let xb = [e.data[3], e.data[4], e.data[5]];
    let na = norm3(&xa);
    if na < 1e-12 {
        return Err(LieError::DegenerateInput(format!(
            "first 6D column has norm {na:.3e}"
        )));
    }
    let b1 = [xa[0] / na, xa[1] / na, xa[2] / na];
    let proj = dot3(&b1, &xb);
    let mut b2 = [xb[0] - proj * b1[0], xb[1] - proj * b1[1], xb[2] - proj * b1[2]];
    let nb = norm3(&b2);
    if nb < 1e-12 {
        return Err(LieError::DegenerateInput(format!(
            "6D columns are parallel (deflated norm {nb:.3e})"
        )));
    }
    for x in &mut b2 {
        *x /= nb;
    }
    let b3 = cross3(&b1, &b2);
    let mut r = Matrix::zeros(3, 3);
    for i in 0..3 {
        r[(i, 0)] = b1[i];
        r[(i, 1)] = b2[i];
        r[(i, 2)] = b3[i];
    }
    Ok(RotationMatrix::from_matrix_unchecked(r))
}

/// Intrinsic Z-Y-X (yaw, pitch, roll) Euler composition.
pub fn rotation_from_euler(yaw: f64, pitch: f64, roll: f64) -> RotationMatrix {
    let (cy, sy) = (yaw.cos(), yaw.sin());
    let (cp, sp) = (pitch.cos(), pitch.sin());
    let (cr, sr) = (roll.cos(), roll.sin());
    let r = Matrix::from_rows(&[
        &[cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        &[sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        &[-sp, cp * sr, cp * cr],
    ]);
    RotationMatrix::from_matrix_unchecked(r)
}

/// Extract intrinsic Z-Y-X angles `[yaw, pitch, roll]`. At the pitch
/// singularity (|pitch| = pi/2) roll is fixed to zero.
pub fn euler_angles(r: &RotationMatrix) -> [f64; 3] {
    let m = r.matrix();
    let sp = (-m[(2, 0)]).clamp(-1.0, 1.0);
    let pitch = sp.asin();
    if sp.abs() > 1.0 - 1e-12 {
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        return [yaw, pitch, 0.0];
    }
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    [yaw, pitch, roll]
}

/// Unit-quaternion `(w, x, y, z)` to rotation matrix; the quaternion is
/// normalized first.
fn quat_to_rotation(q: &[f64]) -> Result<RotationMatrix, LieError> {
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(LieError::DegenerateInput(format!(
            "quaternion norm {norm:.3e}"
        )));
    }
    let (w, x, y, z) = (q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm);
    let r = Matrix::from_rows(&[
        &[
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        &[
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        &[
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]);
    Ok(RotationMatrix::from_matrix_unchecked(r))
}

/// Rotation to unit quaternion `(w, x, y, z)` with `w >= 0` (Shepperd's
/// method, branching on the largest diagonal combination).
pub fn rotation_to_quat(r: &RotationMatrix) -> [f64; 4] {
    let m = r.matrix();
    let tr = m.trace();
    let (w, x, y, z);
    if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    if w < 0.0 {
        [-w, -x, -y, -z]
    } else {
        [w, x, y, z]
    }
}

/// Inverse embedding of the classic parameterizations.
pub fn baseline_to_rotation(e: &EmbeddedVector) -> Result<RotationMatrix, LieError> {
    match e.tag {
        Tag::Euler3 => Ok(rotation_from_euler(e.data[0], e.data[1], e.data[2])),
        Tag::Axis3 => Ok(exp_so3(&So3Tangent([e.data[0], e.data[1], e.data[2]]))),
        Tag::Quat4 => quat_to_rotation(&e.data),
        other => Err(LieError::TagMismatch {
            expected: "euler3|axis3|quat4".into(),
            got: other.name().into(),
        }),
    }
}

/// The 9D embedding: row-major flatten of the rotation matrix.
pub fn embed_rotation(r: &RotationMatrix) -> EmbeddedVector {
    EmbeddedVector {
        tag: Tag::Nine9,
        data: r.matrix().data().to_vec(),
    }
}

/// The 12D embedding of a rigid transform: flattened rotation followed by
/// the translation.
pub fn embed_transform(m: &RigidTransform) -> EmbeddedVector {
    let mut data = m.rot.matrix().data().to_vec();
    data.extend_from_slice(&m.trans);
    EmbeddedVector {
        tag: Tag::Se12,
        data,
    }
}

/// Represent a rotation in any rotation tag: the generalized embedding used
/// to build training targets for every head variant.
pub fn rotation_rep(r: &RotationMatrix, tag: Tag) -> Result<EmbeddedVector, LieError> {
    let data = match tag {
        Tag::Euler3 => euler_angles(r).to_vec(),
        Tag::Axis3 => log_so3(r).0.to_vec(),
        Tag::Quat4 => rotation_to_quat(r).to_vec(),
        Tag::Sixd6 => {
            let m = r.matrix();
            vec![
                m[(0, 0)],
                m[(1, 0)],
                m[(2, 0)],
                m[(0, 1)],
                m[(1, 1)],
                m[(2, 1)],
            ]
        }
        Tag::Nine9 => return Ok(embed_rotation(r)),
        other => {
            return Err(LieError::TagMismatch {
                expected: "a rotation tag".into(),
                got: other.name().into(),
            })
        }
    };
    EmbeddedVector::new(tag, data)
}

/// Dispatch the inverse embedding by tag. `se12` splits into an SVD-projected
/// rotation block and a verbatim translation.
pub fn inverse_embed(e: &EmbeddedVector) -> Result<GroupElement, LieError> {
    match e.tag {
        Tag::Euler3 | Tag::Axis3 | Tag::Quat4 => {
            Ok(GroupElement::Rotation(baseline_to_rotation(e)?))
        }
        Tag::Sixd6 => Ok(GroupElement::Rotation(rot_from_6d(e)?)),
        Tag::Nine9 => Ok(GroupElement::Rotation(project_so3_svd(e)?)),
        Tag::Se12 => {
            let rot = nearest_rotation(&Matrix::from_vec(3, 3, e.data[..9].to_vec()))?;
            let trans = [e.data[9], e.data[10], e.data[11]];
            Ok(GroupElement::Transform(RigidTransform { rot, trans }))
        }
        Tag::Symvec => Err(LieError::UnknownTag(e.tag.name().into())),
    }
}

fn expect_tag(e: &EmbeddedVector, want: Tag) -> Result<(), LieError> {
    if e.tag != want {
        return Err(LieError::TagMismatch {
            expected: want.name().into(),
            got: e.tag.name().into(),
        });
    }
    Ok(())
}
