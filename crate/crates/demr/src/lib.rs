//! demr: extrinsic manifold representation toolkit.
//!
//! Neural regressors emit Euclidean vectors, losses are computed in the
//! embedded space, and a deterministic inverse embedding maps outputs back
//! onto SO(3), SE(3) or the Grassmann manifold. The crate bundles:
//!
//! - [`matlin`]: self-contained dense kernels (Jacobi SVD, symmetric
//!   eigendecomposition, Gram-Schmidt);
//! - [`liegroups`]: SO(3)/SE(3) points, exp/log maps, the 6D/9D/baseline
//!   embeddings with inverses, distances, and the concentrated Gaussian
//!   noise model with intrinsic/extrinsic mean estimators;
//! - [`grassmann`]: subspaces as frames and projectors, the symmetric
//!   vectorization, and principal-angle distances;
//! - [`net`]: a small dense regressor with analytic reverse-mode gradients,
//!   Adam, a finite-difference gradient checker, and binary checkpoints;
//! - [`tasks`]: dataset synthesis and evaluation for the two experiments
//!   (relative pose on SE(3), illumination subspaces on the Grassmannian);
//! - [`props`]: the estimator property checks behind `demr props`;
//! - [`cli`]: JSON-configured experiment drivers shared by the `demr`
//!   binary and the integration tests.
//!
//! Everything is deterministic given a seed: the crate ships its own
//! xoshiro256** generator ([`rng`]) and fixed-order reductions throughout.

pub mod cli;
pub mod grassmann;
pub mod liegroups;
pub mod matlin;
pub mod net;
pub mod props;
pub mod rng;
pub mod tasks;
