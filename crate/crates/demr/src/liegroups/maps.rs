//! Exponential/logarithm maps and geodesic distances on SO(3) and SE(3).
//!
//! Conventions: `log_so3` returns the rotation vector with norm in `[0, pi]`,
//! and geodesic distances are Euclidean norms of tangent coordinates (the
//! rotation angle on SO(3)), so `dist_angular` and `dist_geodesic_so3`
//! coincide.

use super::{dot3, norm3, LieError, RigidTransform, RotationMatrix, Se3Tangent, So3Tangent};
use crate::matlin::Matrix;

/// Angle below which the Rodrigues coefficients switch to Taylor series.
const SMALL_ANGLE: f64 = 1e-7;
/// `cos(theta) < -1 + PI_BRANCH` selects the near-pi axis recovery.
const PI_BRANCH: f64 = 1e-7;

/// Hat operator: the skew matrix with `hat(w) x = w cross x`.
pub fn hat(t: &So3Tangent) -> Matrix {
    let [x, y, z] = t.0;
    Matrix::from_rows(&[&[0.0, -z, y], &[z, 0.0, -x], &[-y, x, 0.0]])
}

/// Vee operator, the inverse of [`hat`]. Rejects matrices whose symmetric
/// part exceeds 1e-9 in magnitude.
pub fn vee(s: &Matrix) -> Result<So3Tangent, LieError> {
    assert_eq!((s.rows(), s.cols()), (3, 3), "vee needs a 3x3 matrix");
    let residual = s.add(&s.transpose()).max_abs();
    if residual > 1e-9 {
        return Err(LieError::NotSkew { residual });
    }
    Ok(So3Tangent([s[(2, 1)], s[(0, 2)], s[(1, 0)]]))
}

/// Rodrigues formula: `exp(hat(omega))`.
pub fn exp_so3(t: &So3Tangent) -> RotationMatrix {
    let theta2 = dot3(&t.0, &t.0);
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(t);
    let k2 = k.matmul(&k);
    let r = Matrix::identity(3).add(&k.scale(a)).add(&k2.scale(b));
    RotationMatrix::from_matrix_unchecked(r)
}

/// Logarithm map; the returned rotation vector has norm in `[0, pi]`.
pub fn log_so3(r: &RotationMatrix) -> So3Tangent {
    let m = r.matrix();
    let cos_theta = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // Skew part: w = vee((R - R^T)/2) = sin(theta) * axis.
    let w = [
        (m[(2, 1)] - m[(1, 2)]) / 2.0,
        (m[(0, 2)] - m[(2, 0)]) / 2.0,
        (m[(1, 0)] - m[(0, 1)]) / 2.0,
    ];
    let sin_theta = norm3(&w);
    let theta = sin_theta.atan2(cos_theta);

    if cos_theta < -1.0 + PI_BRANCH {
        // Near pi the skew part vanishes; recover the axis from the largest
        // diagonal of (R + I)/2 ~= axis axis^T, then take the sign from the
        // remaining skew part when it is informative.
        let b = m.add(&Matrix::identity(3)).scale(0.5);
        let mut i = 0;
        for k in 1..3 {
            if b[(k, k)] > b[(i, i)] {
                i = k;
            }
        }
        let mut axis = [0.0; 3];
        axis[i] = b[(i, i)].max(0.0).sqrt();
        for j in 0..3 {
            if j != i {
                axis[j] = b[(i, j)] / axis[i];
            }
        }
        let norm = norm3(&axis);
        for a in &mut axis {
            *a /= norm;
        }
        if dot3(&axis, &w) < 0.0 {
            for a in &mut axis {
                *a = -*a;
            }
        }
        return So3Tangent([theta * axis[0], theta * axis[1], theta * axis[2]]);
    }

    if theta < SMALL_ANGLE {
        let scale = 1.0 + theta * theta / 6.0; // theta / sin(theta), 2nd order
        return So3Tangent([w[0] * scale, w[1] * scale, w[2] * scale]);
    }
    let scale = theta / sin_theta;
    So3Tangent([w[0] * scale, w[1] * scale, w[2] * scale])
}

/// Coefficients of the SE(3) left Jacobian `V = I + b K + c K^2`.
fn se3_v_coeffs(theta: f64) -> (f64, f64) {
    let theta2 = theta * theta;
    if theta < SMALL_ANGLE {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    }
}

/// Exponential map on SE(3): rotation by Rodrigues, translation through the
/// left Jacobian `V(omega)`.
pub fn exp_se3(t: &Se3Tangent) -> RigidTransform {
    let omega = So3Tangent(t.omega);
    let rot = exp_so3(&omega);
    let theta = omega.norm();
    let (b, c) = se3_v_coeffs(theta);
    let k = hat(&omega);
    let k2 = k.matmul(&k);
    let v_mat = Matrix::identity(3).add(&k.scale(b)).add(&k2.scale(c));
    let mut trans = [0.0; 3];
    for (i, tr) in trans.iter_mut().enumerate() {
        *tr = v_mat[(i, 0)] * t.v[0] + v_mat[(i, 1)] * t.v[1] + v_mat[(i, 2)] * t.v[2];
    }
    RigidTransform { rot, trans }
}

/// Logarithm map on SE(3); inverts [`exp_se3`] via the closed-form inverse
/// Jacobian.
pub fn log_se3(m: &RigidTransform) -> Se3Tangent {
    let omega = log_so3(&m.rot);
    let theta = omega.norm();
    let theta2 = theta * theta;
    let d = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / theta2;
        (1.0 - a / (2.0 * b)) / theta2
    };
    let k = hat(&omega);
    let k2 = k.matmul(&k);
    let v_inv = Matrix::identity(3)
        .add(&k.scale(-0.5))
        .add(&k2.scale(d));
    let mut v = [0.0; 3];
    for (i, vi) in v.iter_mut().enumerate() {
        *vi = v_inv[(i, 0)] * m.trans[0] + v_inv[(i, 1)] * m.trans[1] + v_inv[(i, 2)] * m.trans[2];
    }
    Se3Tangent { omega: omega.0, v }
}

/// Geodesic distance on SO(3): the rotation angle of `a^T b`, in `[0, pi]`.
pub fn dist_geodesic_so3(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    log_so3(&a.inverse().compose(b)).norm()
}

/// Geodesic distance on SE(3): `||log(a^-1 b)||_2` over the stacked
/// `(omega, v)` coordinates. Radians and length units are mixed with unit
/// weights; callers that need a different weighting can recompute from the
/// tangent blocks.
pub fn dist_geodesic_se3(a: &RigidTransform, b: &RigidTransform) -> f64 {
    log_se3(&a.inverse().compose(b)).norm()
}

/// Angular distance `acos((tr(R') - 1) / 2)` for `R' = a b^-1`, the trace
/// form of the rotation angle. Equals [`dist_geodesic_so3`] up to rounding.
pub fn dist_angular(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    let rp = a.compose(&b.inverse());
    ((rp.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}
