//! Grassmann manifold points as orthonormal frames, the projector embedding
//! `U U^T` with its eigendecomposition inverse, the sqrt(2)-weighted
//! symmetric vectorization, and the principal-angle distance family.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matlin::{gram_schmidt, svd, sym_eig, MatError, Matrix};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum GrassError {
    #[error("frame is not orthonormal (residual {residual:.3e})")]
    NotOrthonormal { residual: f64 },
    #[error("subspace dimension must satisfy 1 <= m < n, got m={m}, n={n}")]
    BadDimensions { n: usize, m: usize },
    #[error("matrix is not a projector: {0}")]
    NotProjector(String),
    #[error("eigengap {gap:.3e} below 1e-10: the top-{m} subspace is ill-defined")]
    SpectralTie { m: usize, gap: f64 },
    #[error("symmetric vector length {got} does not match n(n+1)/2 = {expected} for n = {n}")]
    LengthMismatch { n: usize, expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("Martin distance undefined: principal angle {angle:.6} reaches pi/2")]
    MartinUndefined { angle: f64 },
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Which principal-angle distance to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrassDistance {
    /// Arc length `sqrt(sum theta_k^2)`.
    Geodesic,
    /// Binet-Cauchy, `1 - prod cos^2 theta_k`.
    Bc,
    /// Martin, `log prod (cos^2 theta_k)^-1`.
    Martin,
}

/// A point on the Grassmannian `G(m, R^n)`: an n x m orthonormal frame,
/// understood modulo right O(m) action.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoint {
    u: Matrix,
}

impl GrassmannPoint {
    pub fn from_frame(u: Matrix) -> Result<Self, GrassError> {
        let (n, m) = (u.rows(), u.cols());
        if m < 1 || m >= n {
            return Err(GrassError::BadDimensions { n, m });
        }
        let residual = u.orthonormality_residual();
        if residual > 1e-9 {
            return Err(GrassError::NotOrthonormal { residual });
        }
        Ok(GrassmannPoint { u })
    }

    pub fn frame(&self) -> &Matrix {
        &self.u
    }

    pub fn ambient_dim(&self) -> usize {
        self.u.rows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.u.cols()
    }
}

/// The symmetric idempotent `U U^T` representing a subspace independently
/// of the frame choice.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    p: Matrix,
}

impl Projector {
    pub fn from_matrix(p: Matrix) -> Result<Self, GrassError> {
        if p.rows() != p.cols() {
            return Err(GrassError::NotProjector(format!(
                "must be square, got {}x{}",
                p.rows(),
                p.cols()
            )));
        }
        let sym = p.max_abs_diff(&p.transpose());
        if sym > 1e-9 {
            return Err(GrassError::NotProjector(format!(
                "asymmetry {sym:.3e} exceeds 1e-9"
            )));
        }
        let idem = p.matmul(&p).max_abs_diff(&p);
        if idem > 1e-6 {
            return Err(GrassError::NotProjector(format!(
                "idempotency residual {idem:.3e} exceeds 1e-6"
            )));
        }
        let trace = p.trace();
        if (trace - trace.round()).abs() > 1e-6 || trace.round() < 1.0 {
            return Err(GrassError::NotProjector(format!(
                "trace {trace} is not a positive integer rank"
            )));
        }
        Ok(Projector { p })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    /// Rank, read off the trace.
    pub fn rank(&self) -> usize {
        self.p.trace().round() as usize
    }
}

/// Half-vectorization of a symmetric n x n matrix: diagonal entries first,
/// then upper off-diagonals row by row, scaled by sqrt(2) so the Euclidean
/// inner product equals the Frobenius inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct SymVec {
    n: usize,
    data: Vec<f64>,
}

impl SymVec {
    pub fn from_data(n: usize, data: Vec<f64>) -> Result<Self, GrassError> {
        let expected = n * (n + 1) / 2;
        if data.len() != expected {
            return Err(GrassError::LengthMismatch {
                n,
                expected,
                got: data.len(),
            });
        }
        Ok(SymVec { n, data })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Expected symmetric-vector length for ambient dimension `n`.
pub fn symvec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// The projector embedding `P = U U^T`.
pub fn embed_projector(g: &GrassmannPoint) -> Projector {
    Projector {
        p: g.frame().matmul_transpose(g.frame()),
    }
}

/// Inverse embedding by eigendecomposition: symmetrize, decompose, keep the
/// top-m eigenvector frame. Requires eigengap `lambda_m - lambda_{m+1}`
/// of at least 1e-10, otherwise the subspace is ill-defined.
pub fn inverse_embed_grassmann(msym: &Matrix, m: usize) -> Result<GrassmannPoint, GrassError> {
    let n = msym.rows();
    if msym.cols() != n {
        return Err(GrassError::DimMismatch(format!(
            "expected square input, got {}x{}",
            n,
            msym.cols()
        )));
    }
    if m < 1 || m >= n {
        return Err(GrassError::BadDimensions { n, m });
    }
    let eig = sym_eig(&msym.symmetrized())?;
    let gap = eig.lambda[m - 1] - eig.lambda[m];
    if gap < 1e-10 {
        return Err(GrassError::SpectralTie { m, gap });
    }
    let mut u = Matrix::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            u[(i, j)] = eig.q[(i, j)];
        }
    }
    GrassmannPoint::from_frame(u)
}

/// Symmetric vectorization with the sqrt(2) off-diagonal weight.
pub fn sym_vec(a: &Matrix) -> Result<SymVec, GrassError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(GrassError::DimMismatch(format!(
            "expected square input, got {}x{}",
            n,
            a.cols()
        )));
    }
    let asym = a.max_abs_diff(&a.transpose());
    if asym > 1e-9 {
        return Err(GrassError::DimMismatch(format!(
            "input asymmetry {asym:.3e} exceeds 1e-9"
        )));
    }
    let sqrt2 = 2.0_f64.sqrt();
    let mut data = Vec::with_capacity(symvec_len(n));
    for i in 0..n {
        data.push(a[(i, i)]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            data.push(sqrt2 * a[(i, j)]);
        }
    }
    Ok(SymVec { n, data })
}

/// Exact inverse of [`sym_vec`].
pub fn sym_unvec(v: &SymVec) -> Matrix {
    let n = v.n;
    let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = v.data[i];
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let x = v.data[k] * inv_sqrt2;
            a[(i, j)] = x;
            a[(j, i)] = x;
            k += 1;
        }
    }
    a
}

/// Principal angles between two subspaces, ascending in `[0, pi/2]`.
///
/// Cosines come from the singular values of `U_a^T U_b`; angles below pi/4
/// are recomputed from the sines (singular values of the residual
/// `U_b - U_a U_a^T U_b`), which keeps near-zero angles accurate where
/// `acos` of a near-one cosine loses half the significand.
pub fn principal_angles(a: &GrassmannPoint, b: &GrassmannPoint) -> Result<Vec<f64>, GrassError> {
    if a.ambient_dim() != b.ambient_dim() || a.subspace_dim() != b.subspace_dim() {
        return Err(GrassError::DimMismatch(format!(
            "({}, {}) vs ({}, {})",
            a.ambient_dim(),
            a.subspace_dim(),
            b.ambient_dim(),
            b.subspace_dim()
        )));
    }
    let m = a.subspace_dim();
    let overlap = a.frame().transpose().matmul(b.frame());
    let cosines = svd(&overlap)?.s;
    let residual = b.frame().sub(&a.frame().matmul(&overlap));
    let sines = svd(&residual)?.s;
    // Cosines are descending, so angle k (ascending) pairs with the
    // (m-1-k)-th descending sine.
    let mut angles = Vec::with_capacity(m);
    for k in 0..m {
        let c = cosines[k].clamp(0.0, 1.0);
        let s = sines[m - 1 - k].clamp(0.0, 1.0);
        angles.push(if c * c > 0.5 { s.asin() } else { c.acos() });
    }
    Ok(angles)
}

/// Principal-angle distances; all vanish iff the subspaces coincide and are
/// invariant under the right orthogonal action on either frame.
pub fn dist_grassmann(
    a: &GrassmannPoint,
    b: &GrassmannPoint,
    kind: GrassDistance,
) -> Result<f64, GrassError> {
    let angles = principal_angles(a, b)?;
    dist_from_angles(&angles, kind)
}

/// Distance evaluation from precomputed principal angles.
pub fn dist_from_angles(angles: &[f64], kind: GrassDistance) -> Result<f64, GrassError> {
    match kind {
        GrassDistance::Geodesic => Ok(angles.iter().map(|t| t * t).sum::<f64>().sqrt()),
        GrassDistance::Bc => {
            let prod: f64 = angles.iter().map(|t| t.cos() * t.cos()).product();
            Ok(1.0 - prod)
        }
        GrassDistance::Martin => {
            for &t in angles {
                if t >= std::f64::consts::FRAC_PI_2 - 1e-9 {
                    return Err(GrassError::MartinUndefined { angle: t });
                }
            }
            Ok(angles.iter().map(|t| -2.0 * t.cos().ln()).sum())
        }
    }
}

/// Uniform (invariant) subspace sample: an orthonormalized Gaussian frame.
pub fn sample_subspace_uniform(n: usize, m: usize, rng: &mut Rng) -> Result<GrassmannPoint, GrassError> {
    if m < 1 || m >= n {
        return Err(GrassError::BadDimensions { n, m });
    }
    loop {
        let g = Matrix::from_vec(n, m, rng.normal_vec(n * m));
        // A Gaussian frame is almost surely full rank; on the 1e-12
        // degeneracy we simply draw again.
        match gram_schmidt(&g) {
            Ok(q) => return GrassmannPoint::from_frame(q),
            Err(MatError::DegenerateInput { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

/// Perturb a frame by `scale * G` for Gaussian `G` and re-orthonormalize:
/// a nearby-but-distinct candidate subspace.
pub fn gram_schmidt_frame_perturbation(
    g: &GrassmannPoint,
    scale: f64,
    rng: &mut Rng,
) -> Result<GrassmannPoint, GrassError> {
    let (n, m) = (g.ambient_dim(), g.subspace_dim());
    loop {
        let noise = Matrix::from_vec(n, m, rng.normal_vec(n * m)).scale(scale);
        match gram_schmidt(&g.frame().add(&noise)) {
            Ok(q) => return GrassmannPoint::from_frame(q),
            Err(MatError::DegenerateInput { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

/// The projector-Gaussian error model: `U U^T + sigma * (G + G^T) / 2` for
/// an i.i.d. standard Gaussian `G`. The symmetrized noise is zero-mean, so
/// entrywise averages of many draws converge to the true projector.
pub fn projector_gaussian_sample(gt: &GrassmannPoint, sigma: f64, rng: &mut Rng) -> Matrix {
    assert!(sigma >= 0.0, "noise level must be non-negative");
    let n = gt.ambient_dim();
    let p = embed_projector(gt);
    let g = Matrix::from_vec(n, n, rng.normal_vec(n * n));
    p.matrix().add(&g.symmetrized().scale(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis_subspace(n: usize, m: usize) -> GrassmannPoint {
        let mut u = Matrix::zeros(n, m);
        for j in 0..m {
            u[(j, j)] = 1.0;
        }
        GrassmannPoint::from_frame(u).unwrap()
    }

    fn random_orthogonal(m: usize, rng: &mut Rng) -> Matrix {
        loop {
            let g = Matrix::from_vec(m, m, rng.normal_vec(m * m));
            if let Ok(q) = gram_schmidt(&g) {
                return q;
            }
        }
    }

    #[test]
    fn projector_of_axis_frame_is_diagonal() {
        let g = axis_subspace(4, 2);
        let p = embed_projector(&g);
        assert!(p
            .matrix()
            .max_abs_diff(&Matrix::diag(&[1.0, 1.0, 0.0, 0.0]))
            < 1e-15);
        assert_eq!(p.rank(), 2);
    }

    #[test]
    fn projector_is_quotient_invariant() {
        let mut rng = Rng::seed_from_u64(3);
        let g = sample_subspace_uniform(7, 3, &mut rng).unwrap();
        let q = random_orthogonal(3, &mut rng);
        let rotated = GrassmannPoint::from_frame(g.frame().matmul(&q)).unwrap();
        let p1 = embed_projector(&g);
        let p2 = embed_projector(&rotated);
        assert!(p1.matrix().max_abs_diff(p2.matrix()) <= 1e-12);
    }

    #[test]
    fn projector_rank_matches_spectrum() {
        let mut rng = Rng::seed_from_u64(5);
        let g = sample_subspace_uniform(9, 4, &mut rng).unwrap();
        let p = embed_projector(&g);
        let eig = sym_eig(p.matrix()).unwrap();
        let rank = eig.lambda.iter().filter(|&&l| l > 0.5).count();
        assert_eq!(rank, 4);
    }

    #[test]
    fn inverse_embed_reference_cases() {
        let g = inverse_embed_grassmann(&Matrix::diag(&[1.0, 1.0, 0.0, 0.0]), 2).unwrap();
        let expected = axis_subspace(4, 2);
        let angles = principal_angles(&g, &expected).unwrap();
        assert!(angles.iter().all(|&t| t <= 1e-9));

        assert!(matches!(
            inverse_embed_grassmann(&Matrix::diag(&[1.0, 1.0, 1.0, 1.0]), 2),
            Err(GrassError::SpectralTie { .. })
        ));
    }

    #[test]
    fn inverse_embed_roundtrips_the_projector() {
        let mut rng = Rng::seed_from_u64(7);
        for _ in 0..50 {
            let g = sample_subspace_uniform(12, 4, &mut rng).unwrap();
            let p = embed_projector(&g);
            let back = inverse_embed_grassmann(p.matrix(), 4).unwrap();
            let angles = principal_angles(&g, &back).unwrap();
            assert!(angles.iter().all(|&t| t <= 1e-9));
        }
    }

    #[test]
    fn inverse_embed_tolerates_small_perturbations() {
        let mut rng = Rng::seed_from_u64(9);
        let g = sample_subspace_uniform(20, 5, &mut rng).unwrap();
        let noisy = projector_gaussian_sample(&g, 1e-6, &mut rng);
        let back = inverse_embed_grassmann(&noisy, 5).unwrap();
        let angles = principal_angles(&g, &back).unwrap();
        assert!(angles.iter().all(|&t| t <= 1e-4));
    }

    #[test]
    fn symvec_reference_values() {
        let v = sym_vec(&Matrix::identity(2)).unwrap();
        assert_eq!(v.data(), &[1.0, 1.0, 0.0]);

        let x = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let v = sym_vec(&x).unwrap();
        assert!((v.data()[0]).abs() < 1e-15);
        assert!((v.data()[1]).abs() < 1e-15);
        assert!((v.data()[2] - 2.0_f64.sqrt()).abs() < 1e-15);
        // Norm check: ||X||_F^2 = 2 equals the squared vector norm.
        assert!((v.norm() * v.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symvec_roundtrips_to_one_ulp() {
        // Diagonal entries are copied verbatim; off-diagonals pass through
        // one multiplication and one division by sqrt(2), which IEEE
        // arithmetic recovers to within a single rounding.
        let mut rng = Rng::seed_from_u64(11);
        for _ in 0..100 {
            let raw = Matrix::from_vec(6, 6, rng.normal_vec(36));
            let s = raw.symmetrized();
            let v = sym_vec(&s).unwrap();
            let back = sym_unvec(&v);
            assert!(back.max_abs_diff(&s) <= 1e-15 * s.max_abs());
            for i in 0..6 {
                assert_eq!(back[(i, i)], s[(i, i)]);
            }
        }
    }

    #[test]
    fn symvec_is_an_isometry() {
        let mut rng = Rng::seed_from_u64(13);
        for _ in 0..100 {
            let a = Matrix::from_vec(5, 5, rng.normal_vec(25)).symmetrized();
            let b = Matrix::from_vec(5, 5, rng.normal_vec(25)).symmetrized();
            let va = sym_vec(&a).unwrap();
            let vb = sym_vec(&b).unwrap();
            let euclid: f64 = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).sum();
            let frob: f64 = a
                .data()
                .iter()
                .zip(b.data().iter())
                .map(|(x, y)| x * y)
                .sum();
            assert!((euclid - frob).abs() <= 1e-12 * frob.abs().max(1.0));
        }
    }

    #[test]
    fn symvec_rejects_wrong_length() {
        assert!(matches!(
            SymVec::from_data(3, vec![0.0; 5]),
            Err(GrassError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn principal_angles_reference_cases() {
        let a = axis_subspace(3, 1);
        let same = principal_angles(&a, &a).unwrap();
        assert!(same[0] <= 1e-9);

        let mut e2 = Matrix::zeros(3, 1);
        e2[(1, 0)] = 1.0;
        let b = GrassmannPoint::from_frame(e2).unwrap();
        let orth = principal_angles(&a, &b).unwrap();
        assert!((orth[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

        let alpha = 0.3_f64;
        let mut tilted = Matrix::zeros(3, 1);
        tilted[(0, 0)] = alpha.cos();
        tilted[(1, 0)] = alpha.sin();
        let c = GrassmannPoint::from_frame(tilted).unwrap();
        let t = principal_angles(&a, &c).unwrap();
        assert!((t[0] - alpha).abs() < 1e-12);
    }

    #[test]
    fn principal_angles_are_ascending_and_invariant() {
        let mut rng = Rng::seed_from_u64(17);
        let a = sample_subspace_uniform(10, 4, &mut rng).unwrap();
        let b = sample_subspace_uniform(10, 4, &mut rng).unwrap();
        let angles = principal_angles(&a, &b).unwrap();
        assert!(angles.windows(2).all(|w| w[0] <= w[1] + 1e-12));

        let q = random_orthogonal(4, &mut rng);
        let b_rot = GrassmannPoint::from_frame(b.frame().matmul(&q)).unwrap();
        let rotated = principal_angles(&a, &b_rot).unwrap();
        for (x, y) in angles.iter().zip(rotated.iter()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn distance_reference_values() {
        let a = axis_subspace(3, 1);
        for kind in [GrassDistance::Geodesic, GrassDistance::Bc, GrassDistance::Martin] {
            assert!(dist_grassmann(&a, &a, kind).unwrap() <= 1e-9);
        }

        // Single angle 0.3: geodesic 0.3, bc = 1 - cos^2(0.3),
        // martin = -2 ln cos(0.3).
        let angles = [0.3];
        assert!(
            (dist_from_angles(&angles, GrassDistance::Geodesic).unwrap() - 0.3).abs() < 1e-15
        );
        let bc = dist_from_angles(&angles, GrassDistance::Bc).unwrap();
        assert!((bc - (1.0 - 0.3_f64.cos().powi(2))).abs() < 1e-15);
        let martin = dist_from_angles(&angles, GrassDistance::Martin).unwrap();
        assert!((martin - (-2.0 * 0.3_f64.cos().ln())).abs() < 1e-15);

        // Orthogonal case: bc saturates at 1, martin is undefined.
        let right_angle = [std::f64::consts::FRAC_PI_2];
        assert!((dist_from_angles(&right_angle, GrassDistance::Bc).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            dist_from_angles(&right_angle, GrassDistance::Martin),
            Err(GrassError::MartinUndefined { .. })
        ));
    }

    #[test]
    fn distances_are_quotient_invariant() {
        let mut rng = Rng::seed_from_u64(19);
        let a = sample_subspace_uniform(8, 3, &mut rng).unwrap();
        let b = sample_subspace_uniform(8, 3, &mut rng).unwrap();
        let q = random_orthogonal(3, &mut rng);
        let a_rot = GrassmannPoint::from_frame(a.frame().matmul(&q)).unwrap();
        for kind in [GrassDistance::Geodesic, GrassDistance::Bc, GrassDistance::Martin] {
            let d1 = dist_grassmann(&a, &b, kind).unwrap();
            let d2 = dist_grassmann(&a_rot, &b, kind).unwrap();
            assert!((d1 - d2).abs() <= 1e-9);
        }
    }

    #[test]
    fn subspace_sampler_is_valid_and_deterministic() {
        let mut rng = Rng::seed_from_u64(23);
        for _ in 0..100 {
            let g = sample_subspace_uniform(6, 2, &mut rng).unwrap();
            assert!(g.frame().orthonormality_residual() <= 1e-9);
        }
        let a = sample_subspace_uniform(5, 2, &mut Rng::seed_from_u64(7)).unwrap();
        let b = sample_subspace_uniform(5, 2, &mut Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.frame().data(), b.frame().data());
    }

    #[test]
    fn line_angles_are_uniform() {
        // m = 1, n = 2: the sampled line angle must be uniform on [0, pi).
        let mut rng = Rng::seed_from_u64(29);
        let n = 10_000;
        let mut angles: Vec<f64> = (0..n)
            .map(|_| {
                let g = sample_subspace_uniform(2, 1, &mut rng).unwrap();
                let (x, y) = (g.frame()[(0, 0)], g.frame()[(1, 0)]);
                let mut t = y.atan2(x);
                if t < 0.0 {
                    t += std::f64::consts::PI;
                }
                if t >= std::f64::consts::PI {
                    t -= std::f64::consts::PI;
                }
                t / std::f64::consts::PI
            })
            .collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Kolmogorov-Smirnov against the uniform CDF; 1.63 / sqrt(n) is the
        // critical value at significance 0.01.
        let mut ks = 0.0_f64;
        for (i, &t) in angles.iter().enumerate() {
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            ks = ks.max((emp_hi - t).abs()).max((t - emp_lo).abs());
        }
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn noise_model_reference_cases() {
        let mut rng = Rng::seed_from_u64(31);
        let g = sample_subspace_uniform(6, 2, &mut rng).unwrap();
        let clean = projector_gaussian_sample(&g, 0.0, &mut rng);
        assert_eq!(clean.max_abs_diff(embed_projector(&g).matrix()), 0.0);

        let mut r1 = Rng::seed_from_u64(77);
        let mut r2 = Rng::seed_from_u64(77);
        let g1 = sample_subspace_uniform(6, 2, &mut r1).unwrap();
        let g2 = sample_subspace_uniform(6, 2, &mut r2).unwrap();
        let n1 = projector_gaussian_sample(&g1, 0.3, &mut r1);
        let n2 = projector_gaussian_sample(&g2, 0.3, &mut r2);
        assert_eq!(n1.max_abs_diff(&n2), 0.0);
    }

    #[test]
    fn mean_of_noisy_projectors_recovers_subspace() {
        let mut rng = Rng::seed_from_u64(37);
        let gt = sample_subspace_uniform(20, 5, &mut rng).unwrap();
        let k = 2000;
        let mut mean = Matrix::zeros(20, 20);
        for _ in 0..k {
            mean = mean.add(&projector_gaussian_sample(&gt, 0.01, &mut rng));
        }
        mean = mean.scale(1.0 / k as f64);
        let back = inverse_embed_grassmann(&mean, 5).unwrap();
        let d = dist_grassmann(&back, &gt, GrassDistance::Geodesic).unwrap();
        assert!(d <= 0.01, "distance {d}");
    }

    #[test]
    fn noise_response_is_monotone_in_sigma() {
        let mut rng = Rng::seed_from_u64(41);
        let gt = sample_subspace_uniform(12, 3, &mut rng).unwrap();
        let mut means = Vec::new();
        for &sigma in &[1e-4, 1e-3, 1e-2, 1e-1] {
            let mut acc = 0.0;
            let mut count = 0;
            for _ in 0..100 {
                let noisy = projector_gaussian_sample(&gt, sigma, &mut rng);
                match inverse_embed_grassmann(&noisy, 3) {
                    Ok(est) => {
                        acc += dist_grassmann(&est, &gt, GrassDistance::Geodesic).unwrap();
                        count += 1;
                    }
                    Err(GrassError::SpectralTie { .. }) => continue,
                    Err(e) => panic!("{e}"),
                }
            }
            means.push(acc / count as f64);
        }
        assert!(means.windows(2).all(|w| w[0] <= w[1]), "means {means:?}");
    }
}
