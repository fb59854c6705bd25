//! Concentrated Gaussian noise on SO(3)/SE(3), intrinsic and chordal means,
//! and the uniform transform samplers for the pose experiments.

use serde::{Deserialize, Serialize};

use super::embed::embed_rotation;
use super::maps::{dist_geodesic_so3, exp_se3, exp_so3, log_so3};
use super::{GroupElement, LieError, RigidTransform, RotationMatrix, Se3Tangent, So3Tangent};
use crate::liegroups::embed::{nearest_rotation, rotation_from_euler};
use crate::matlin::{sym_eig, Matrix};
use crate::rng::Rng;

/// A concentrated Gaussian on a matrix group: a tangent-space Gaussian with
/// covariance `sigma` pushed through the exponential map at `mean`, i.e.
/// samples are `mean * exp(hat(eps))` with `eps ~ N(0, sigma)`.
#[derive(Debug, Clone)]
pub struct ConcentratedGaussian {
    mean: GroupElement,
    /// Factor `L` with `L L^T = sigma`, from the eigendecomposition.
    factor: Matrix,
}

impl ConcentratedGaussian {
    /// `sigma` must be d x d (d = 3 for a rotation mean, 6 for a transform
    /// mean), symmetric to 1e-12 and positive definite.
    pub fn new(mean: GroupElement, sigma: Matrix) -> Result<Self, LieError> {
        let d = match &mean {
            GroupElement::Rotation(_) => 3,
            GroupElement::Transform(_) => 6,
        };
        if sigma.rows() != d || sigma.cols() != d {
            return Err(LieError::BadCovariance(format!(
                "expected {d}x{d}, got {}x{}",
                sigma.rows(),
                sigma.cols()
            )));
        }
        let asym = sigma.max_abs_diff(&sigma.transpose());
        if asym > 1e-12 {
            return Err(LieError::BadCovariance(format!(
                "asymmetry {asym:.3e} exceeds 1e-12"
            )));
        }
        let eig = sym_eig(&sigma).map_err(|e| LieError::BadCovariance(e.to_string()))?;
        let min = *eig
            .lambda
            .last()
            .expect("covariance has at least one eigenvalue");
        if min <= 0.0 {
            return Err(LieError::BadCovariance(format!(
                "smallest eigenvalue {min:.3e} is not positive"
            )));
        }
        // L = Q diag(sqrt(lambda)); then L L^T = Q diag(lambda) Q^T = sigma.
        let mut factor = eig.q;
        for j in 0..d {
            let s = eig.lambda[j].sqrt();
            for i in 0..d {
                factor[(i, j)] *= s;
            }
        }
        Ok(ConcentratedGaussian { mean, factor })
    }

    /// Isotropic covariance `sigma^2 I`.
    pub fn isotropic(mean: GroupElement, sigma: f64) -> Result<Self, LieError> {
        let d = match &mean {
            GroupElement::Rotation(_) => 3,
            GroupElement::Transform(_) => 6,
        };
        Self::new(mean, Matrix::identity(d).scale(sigma * sigma))
    }

    pub fn mean(&self) -> &GroupElement {
        &self.mean
    }

    /// Draw `mean * exp(hat(eps))`, `eps ~ N(0, sigma)`.
    pub fn sample(&self, rng: &mut Rng) -> GroupElement {
        let d = self.factor.rows();
        let z = rng.normal_vec(d);
        let mut eps = vec![0.0; d];
        for (i, e) in eps.iter_mut().enumerate() {
            for j in 0..d {
                *e += self.factor[(i, j)] * z[j];
            }
        }
        match &self.mean {
            GroupElement::Rotation(mu) => {
                let noise = exp_so3(&So3Tangent([eps[0], eps[1], eps[2]]));
                GroupElement::Rotation(mu.compose(&noise))
            }
            GroupElement::Transform(mu) => {
                let noise = exp_se3(&Se3Tangent {
                    omega: [eps[0], eps[1], eps[2]],
                    v: [eps[3], eps[4], eps[5]],
                });
                GroupElement::Transform(mu.compose(&noise))
            }
        }
    }
}

/// Fréchet mean of rotations by fixed-point iteration: the intrinsic oracle
/// that the chordal estimator is checked against.
///
/// Requires every sample within a geodesic ball of radius pi/2 around the
/// first; iterates `mu <- mu exp(mean_i log(mu^T R_i))` until the update
/// norm falls below 1e-10 (cap 1000 iterations).
pub fn frechet_mean(samples: &[RotationMatrix]) -> Result<RotationMatrix, LieError> {
    if samples.is_empty() {
        return Err(LieError::EmptySample);
    }
    for (index, s) in samples.iter().enumerate() {
        let distance = dist_geodesic_so3(&samples[0], s);
        if distance >= std::f64::consts::FRAC_PI_2 {
            return Err(LieError::DispersedSamples { index, distance });
        }
    }
    let mut mu = samples[0].clone();
    let inv_n = 1.0 / samples.len() as f64;
    for _ in 0..1000 {
        let mut update = [0.0; 3];
        for s in samples {
            let t = log_so3(&mu.inverse().compose(s));
            update[0] += t.0[0];
            update[1] += t.0[1];
            update[2] += t.0[2];
        }
        for u in &mut update {
            *u *= inv_n;
        }
        let norm = (update[0] * update[0] + update[1] * update[1] + update[2] * update[2]).sqrt();
        mu = mu.compose(&exp_so3(&So3Tangent(update)));
        if norm <= 1e-10 {
            return Ok(mu);
        }
    }
    let mut update = [0.0; 3];
    for s in samples {
        let t = log_so3(&mu.inverse().compose(s));
        for (u, x) in update.iter_mut().zip(t.0.iter()) {
            *u += x * inv_n;
        }
    }
    Err(LieError::NonConvergence {
        update_norm: (update.iter().map(|x| x * x).sum::<f64>()).sqrt(),
        last: mu,
    })
}

/// The extrinsic estimator under test: entrywise mean of the 9D embeddings
/// projected back onto SO(3).
pub fn chordal_mean_project(samples: &[RotationMatrix]) -> Result<RotationMatrix, LieError> {
    if samples.is_empty() {
        return Err(LieError::EmptySample);
    }
    let mut mean = Matrix::zeros(3, 3);
    for s in samples {
        mean = mean.add(&Matrix::from_vec(3, 3, embed_rotation(s).data().to_vec()));
    }
    mean = mean.scale(1.0 / samples.len() as f64);
    nearest_rotation(&mean)
}

/// Which representation space the uniform transform sampler draws in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Euler,
    Axis,
    So3,
}

impl std::str::FromStr for SampleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(SampleMode::Euler),
            "axis" => Ok(SampleMode::Axis),
            "so3" => Ok(SampleMode::So3),
            other => Err(format!("unknown sampling mode '{other}'")),
        }
    }
}

impl std::fmt::Display for SampleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SampleMode::Euler => "euler",
            SampleMode::Axis => "axis",
            SampleMode::So3 => "so3",
        })
    }
}

/// Draw a rigid transform whose rotation coordinates are i.i.d. uniform on
/// `[-pi * fraction, +pi * fraction]` in the chosen representation space
/// (Euler angles, or an axis-angle cube mapped through the exponential),
/// and whose translation is standard normal.
pub fn sample_transform_uniform(
    mode: SampleMode,
    fraction: f64,
    rng: &mut Rng,
) -> Result<RigidTransform, LieError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(LieError::BadFraction(fraction));
    }
    sample_transform_in_range(mode, -fraction, fraction, rng)
}

/// Generalized range sampler: each rotation coordinate is uniform on
/// `[pi * lo_scale, pi * hi_scale]`. `sample_transform_uniform` is the
/// symmetric case; the one-sided training protocol keeps `lo_scale` at -1
/// and shrinks only the upper bound.
pub fn sample_transform_in_range(
    mode: SampleMode,
    lo_scale: f64,
    hi_scale: f64,
    rng: &mut Rng,
) -> Result<RigidTransform, LieError> {
    if !(lo_scale >= -1.0 && lo_scale < hi_scale && hi_scale <= 1.0) {
        return Err(LieError::BadFraction(hi_scale));
    }
    let lo = std::f64::consts::PI * lo_scale;
    let hi = std::f64::consts::PI * hi_scale;
    let a = rng.uniform_in(lo, hi);
    let b = rng.uniform_in(lo, hi);
    let c = rng.uniform_in(lo, hi);
    let rot = match mode {
        SampleMode::Euler => rotation_from_euler(a, b, c),
        SampleMode::Axis | SampleMode::So3 => exp_so3(&So3Tangent([a, b, c])),
    };
    let trans = [rng.normal(), rng.normal(), rng.normal()];
    Ok(RigidTransform { rot, trans })
}
