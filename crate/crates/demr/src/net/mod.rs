//! A minimal differentiable regressor: dense layers, a shared per-point
//! encoder with max pooling for the pose task, representation heads, and
//! analytic reverse-mode gradients with an Adam optimizer and a
//! finite-difference gradient checker.
//!
//! Training is single-threaded and deterministic: fixed batch order, fixed
//! reduction order, seeded initialization.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grassmann::{
    dist_grassmann, inverse_embed_grassmann, sym_unvec, GrassDistance, GrassError, GrassmannPoint,
    SymVec,
};
use crate::liegroups::{
    dist_geodesic_se3, inverse_embed, EmbeddedVector, GroupElement, LieError, RigidTransform, Tag,
};
use crate::matlin::Matrix;
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tag mismatch: expected {expected}, got {got}")]
    TagMismatch { expected: String, got: String },
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("batch must be nonempty")]
    EmptyBatch,
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Grass(#[from] GrassError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

/// Dense layer `y = activation(W x + b)`; `w` is out x in, row-major.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Glorot-uniform initialization, zero biases, draws in row-major order.
    pub fn init(input: usize, output: usize, activation: Activation, rng: &mut Rng) -> Self {
        let bound = (6.0 / (input + output) as f64).sqrt();
        let mut w = Matrix::zeros(output, input);
        for i in 0..output {
            for j in 0..input {
                w[(i, j)] = rng.uniform_in(-bound, bound);
            }
        }
        DenseLayer {
            w,
            b: vec![0.0; output],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    fn forward_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut out = Vec::with_capacity(self.output_dim());
        for i in 0..self.output_dim() {
            let row = self.w.row(i);
            let mut acc = self.b[i];
            for (&wv, &xv) in row.iter().zip(x.iter()) {
                acc += wv * xv;
            }
            out.push(self.activation.apply(acc));
        }
        out
    }

    /// Forward over a stack of rows (points x features).
    fn forward_rows(&self, x: &Matrix) -> Matrix {
        debug_assert_eq!(x.cols(), self.input_dim());
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        for r in 0..x.rows() {
            let xrow = x.row(r);
            for i in 0..self.output_dim() {
                let wrow = self.w.row(i);
                let mut acc = self.b[i];
                for (&wv, &xv) in wrow.iter().zip(xrow.iter()) {
                    acc += wv * xv;
                }
                out[(r, i)] = self.activation.apply(acc);
            }
        }
        out
    }
}

/// Gradient (or moment) storage congruent with one [`DenseLayer`].
#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub dw: Matrix,
    pub db: Vec<f64>,
}

impl LayerGrad {
    fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGrad {
            dw: Matrix::zeros(layer.output_dim(), layer.input_dim()),
            db: vec![0.0; layer.output_dim()],
        }
    }
}

/// Gradients shaped exactly like [`RegressorParams`].
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub encoder: Vec<LayerGrad>,
    pub head: Vec<LayerGrad>,
    pub trans_head: Option<LayerGrad>,
}

impl GradientBundle {
    pub fn zeros_like(params: &RegressorParams) -> Self {
        GradientBundle {
            encoder: params.encoder.iter().map(LayerGrad::zeros_like).collect(),
            head: params.head.iter().map(LayerGrad::zeros_like).collect(),
            trans_head: params.trans_head.as_ref().map(LayerGrad::zeros_like),
        }
    }

    fn layers(&self) -> impl Iterator<Item = &LayerGrad> {
        self.encoder
            .iter()
            .chain(self.head.iter())
            .chain(self.trans_head.iter())
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|l| l.dw.is_finite() && l.db.iter().all(|x| x.is_finite()))
    }

    /// Flat read in declaration order (per layer: weights row-major, then
    /// bias). Mirrors [`RegressorParams::get_param`].
    pub fn get(&self, mut idx: usize) -> f64 {
        for layer in self.layers() {
            let wlen = layer.dw.data().len();
            if idx < wlen {
                return layer.dw.data()[idx];
            }
            idx -= wlen;
            if idx < layer.db.len() {
                return layer.db[idx];
            }
            idx -= layer.db.len();
        }
        panic!("flat gradient index out of range");
    }
}

/// The regressor: a shared per-point encoder (pose task), a head stack whose
/// final layer emits the tagged representation, and an optional translation
/// branch reading the trunk output.
#[derive(Debug, Clone)]
pub struct RegressorParams {
    pub encoder: Vec<DenseLayer>,
    pub head: Vec<DenseLayer>,
    pub rot_head_tag: Tag,
    pub trans_head: Option<DenseLayer>,
}

impl RegressorParams {
    /// Pose network: per-point encoder over 3D points, two pooled features
    /// concatenated into a trunk, linear rotation and translation branches.
    pub fn new_pose(
        tag: Tag,
        encoder_widths: &[usize],
        head_widths: &[usize],
        rng: &mut Rng,
    ) -> Result<Self, NetError> {
        Self::new_pose_with(
            tag,
            encoder_widths,
            Activation::Relu,
            head_widths,
            Activation::Tanh,
            rng,
        )
    }

    /// [`RegressorParams::new_pose`] with explicit encoder/trunk
    /// activations.
    pub fn new_pose_with(
        tag: Tag,
        encoder_widths: &[usize],
        encoder_activation: Activation,
        head_widths: &[usize],
        trunk_activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self, NetError> {
        let tag_len = tag
            .len()
            .ok_or_else(|| NetError::TagMismatch {
                expected: "a fixed-length rotation tag".into(),
                got: tag.name().into(),
            })?;
        if encoder_widths.is_empty() {
            return Err(NetError::ShapeMismatch("encoder widths empty".into()));
        }
        let mut encoder = Vec::new();
        let mut input = 3;
        for &w in encoder_widths {
            encoder.push(DenseLayer::init(input, w, encoder_activation, rng));
            input = w;
        }
        let mut head = Vec::new();
        let mut trunk_in = 2 * input;
        for &w in head_widths {
            head.push(DenseLayer::init(trunk_in, w, trunk_activation, rng));
            trunk_in = w;
        }
        head.push(DenseLayer::init(trunk_in, tag_len, Activation::Linear, rng));
        let trans_head = DenseLayer::init(trunk_in, 3, Activation::Linear, rng);
        Ok(RegressorParams {
            encoder,
            head,
            rot_head_tag: tag,
            trans_head: Some(trans_head),
        })
    }

    /// Subspace network: dense stack from an image vector straight to the
    /// symmetric-vector output (no pooling, no translation branch).
    pub fn new_subspace(
        input_len: usize,
        hidden_widths: &[usize],
        output_len: usize,
        hidden_activation: Activation,
        rng: &mut Rng,
    ) -> Self {
        let mut encoder = Vec::new();
        let mut input = input_len;
        for &w in hidden_widths {
            encoder.push(DenseLayer::init(input, w, hidden_activation, rng));
            input = w;
        }
        let head = vec![DenseLayer::init(input, output_len, Activation::Linear, rng)];
        RegressorParams {
            encoder,
            head,
            rot_head_tag: Tag::Symvec,
            trans_head: None,
        }
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder
            .iter()
            .chain(self.head.iter())
            .chain(self.trans_head.iter())
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .map(|l| l.w.data().len() + l.b.len())
            .sum()
    }

    pub fn get_param(&self, mut idx: usize) -> f64 {
        for layer in self.layers() {
            let wlen = layer.w.data().len();
            if idx < wlen {
                return layer.w.data()[idx];
            }
            idx -= wlen;
            if idx < layer.b.len() {
                return layer.b[idx];
            }
            idx -= layer.b.len();
        }
        panic!("flat parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        let layers = self
            .encoder
            .iter_mut()
            .chain(self.head.iter_mut())
            .chain(self.trans_head.iter_mut());
        for layer in layers {
            let wlen = layer.w.data().len();
            if idx < wlen {
                layer.w.data_mut()[idx] = value;
                return;
            }
            idx -= wlen;
            if idx < layer.b.len() {
                layer.b[idx] = value;
                return;
            }
            idx -= layer.b.len();
        }
        panic!("flat parameter index out of range");
    }

    /// Output length of the rotation/representation head.
    pub fn output_len(&self) -> usize {
        self.head.last().expect("head is never empty").output_dim()
    }

    fn congruent_with(&self, grads: &GradientBundle) -> bool {
        if self.encoder.len() != grads.encoder.len()
            || self.head.len() != grads.head.len()
            || self.trans_head.is_some() != grads.trans_head.is_some()
        {
            return false;
        }
        self.layers().zip(grads.layers()).all(|(p, g)| {
            p.w.rows() == g.dw.rows() && p.w.cols() == g.dw.cols() && p.b.len() == g.db.len()
        })
    }
}

/// Per-cloud forward record: post-activations per encoder layer.
#[derive(Debug, Clone)]
struct CloudCache {
    posts: Vec<Matrix>,
}

/// Everything the backward pass needs from one pose forward.
#[derive(Debug, Clone)]
pub struct PoseCache {
    cloud_r: CloudCache,
    cloud_t: CloudCache,
    argmax_r: Vec<usize>,
    argmax_t: Vec<usize>,
    z: Vec<f64>,
    head_posts: Vec<Vec<f64>>,
    trans_post: Vec<f64>,
}

/// Forward record for the subspace stack.
#[derive(Debug, Clone)]
pub struct SubspaceCache {
    posts: Vec<Vec<f64>>,
}

fn encode_cloud(params: &RegressorParams, cloud: &Matrix) -> (Vec<f64>, CloudCache, Vec<usize>) {
    let mut posts = Vec::with_capacity(params.encoder.len());
    let mut current = cloud.clone();
    for layer in &params.encoder {
        current = layer.forward_rows(&current);
        posts.push(current.clone());
    }
    let last = posts.last().expect("pose encoder is nonempty");
    let width = last.cols();
    let mut pooled = vec![f64::NEG_INFINITY; width];
    let mut argmax = vec![0usize; width];
    for r in 0..last.rows() {
        let row = last.row(r);
        for (u, &v) in row.iter().enumerate() {
            // Strict comparison keeps the lowest point index on ties.
            if v > pooled[u] {
                pooled[u] = v;
                argmax[u] = r;
            }
        }
    }
    (pooled, CloudCache { posts }, argmax)
}

/// Forward pass of the pose network over a reference/target cloud pair.
///
/// Returns the tagged rotation representation, the translation estimate and
/// the cache consumed by the backward pass.
pub fn forward_pose(
    params: &RegressorParams,
    p_r: &Matrix,
    p_t: &Matrix,
) -> Result<(EmbeddedVector, [f64; 3], PoseCache), NetError> {
    if p_r.cols() != 3 || p_t.cols() != 3 || p_r.rows() < 3 || p_t.rows() < 3 {
        return Err(NetError::ShapeMismatch(format!(
            "point clouds must be Nx3 with N >= 3, got {}x{} and {}x{}",
            p_r.rows(),
            p_r.cols(),
            p_t.rows(),
            p_t.cols()
        )));
    }
    let trans_layer = params
        .trans_head
        .as_ref()
        .ok_or_else(|| NetError::ShapeMismatch("pose network needs a translation head".into()))?;

    let (pool_r, cloud_r, argmax_r) = encode_cloud(params, p_r);
    let (pool_t, cloud_t, argmax_t) = encode_cloud(params, p_t);
    let mut z = pool_r;
    z.extend_from_slice(&pool_t);

    let mut head_posts = Vec::with_capacity(params.head.len());
    let mut current = z.clone();
    for layer in &params.head {
        current = layer.forward_vec(&current);
        head_posts.push(current.clone());
    }
    let trunk = if params.head.len() >= 2 {
        &head_posts[params.head.len() - 2]
    } else {
        &z
    };
    let trans_post = trans_layer.forward_vec(trunk);
    let rot_out = head_posts.last().expect("head is nonempty").clone();
    let rot = EmbeddedVector::new(params.rot_head_tag, rot_out)?;
    let trans = [trans_post[0], trans_post[1], trans_post[2]];
    Ok((
        rot,
        trans,
        PoseCache {
            cloud_r,
            cloud_t,
            argmax_r,
            argmax_t,
            z,
            head_posts,
            trans_post,
        },
    ))
}

/// Forward pass of the subspace stack on a single image vector.
pub fn forward_subspace(
    params: &RegressorParams,
    x: &[f64],
) -> Result<(Vec<f64>, SubspaceCache), NetError> {
    let first = params
        .encoder
        .first()
        .or_else(|| params.head.first())
        .expect("network has at least one layer");
    if x.len() != first.input_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "input length {} does not match first layer input {}",
            x.len(),
            first.input_dim()
        )));
    }
    let mut posts = Vec::with_capacity(params.encoder.len() + params.head.len());
    let mut current = x.to_vec();
    for layer in params.encoder.iter().chain(params.head.iter()) {
        current = layer.forward_vec(&current);
        posts.push(current.clone());
    }
    Ok((current, SubspaceCache { posts }))
}

/// Backward through one dense layer for a single vector.
///
/// `post` is the layer output, `input` its input, `upstream` is dL/d(post).
/// Returns dL/d(input) and accumulates weight/bias gradients.
fn backward_vec(
    layer: &DenseLayer,
    grad: &mut LayerGrad,
    input: &[f64],
    post: &[f64],
    upstream: &[f64],
) -> Vec<f64> {
    let mut dinput = vec![0.0; layer.input_dim()];
    for i in 0..layer.output_dim() {
        let dpre = upstream[i] * layer.activation.derivative_from_output(post[i]);
        if dpre == 0.0 {
            continue;
        }
        grad.db[i] += dpre;
        let wrow = layer.w.row(i);
        let grow = &mut grad.dw.data_mut()[i * layer.input_dim()..(i + 1) * layer.input_dim()];
        for k in 0..input.len() {
            grow[k] += dpre * input[k];
            dinput[k] += dpre * wrow[k];
        }
    }
    dinput
}

/// Backward through the encoder for one cloud. The pooled gradient routes to
/// each unit's argmax point; only those rows are walked back.
fn backward_cloud(
    params: &RegressorParams,
    grads: &mut GradientBundle,
    cloud: &Matrix,
    cache: &CloudCache,
    argmax: &[usize],
    d_pool: &[f64],
) {
    // Rows that received any gradient, ascending for a fixed reduction order.
    let mut rows: Vec<usize> = argmax.to_vec();
    rows.sort_unstable();
    rows.dedup();

    let last = params.encoder.len() - 1;
    // Upstream gradient per active row at the top encoder layer.
    let width = params.encoder[last].output_dim();
    let mut upstream: Vec<(usize, Vec<f64>)> =
        rows.iter().map(|&r| (r, vec![0.0; width])).collect();
    for (u, (&row, &g)) in argmax.iter().zip(d_pool.iter()).enumerate() {
        if g == 0.0 {
            continue;
        }
        let slot = upstream
            .binary_search_by_key(&row, |(r, _)| *r)
            .expect("argmax row is present");
        upstream[slot].1[u] += g;
    }

    for l in (0..=last).rev() {
        let layer = &params.encoder[l];
        let grad = &mut grads.encoder[l];
        let mut next: Vec<(usize, Vec<f64>)> = Vec::with_capacity(upstream.len());
        for (row, up) in &upstream {
            let post = cache.posts[l].row(*row);
            let input: &[f64] = if l == 0 {
                cloud.row(*row)
            } else {
                cache.posts[l - 1].row(*row)
            };
            let dinput = backward_vec(layer, grad, input, post, up);
            next.push((*row, dinput));
        }
        upstream = next;
    }
}

/// One labelled pose sample as consumed by the network: the cloud pair, the
/// target representation for the configured tag, the target translation and
/// the ground-truth transform (used by the intrinsic loss).
#[derive(Debug, Clone)]
pub struct PoseItem {
    pub p_r: Matrix,
    pub p_t: Matrix,
    pub rot_target: EmbeddedVector,
    pub trans_target: [f64; 3],
    pub gt: RigidTransform,
}

/// One labelled subspace sample: the image vector, its symmetric-vector
/// target and the ground-truth subspace.
#[derive(Debug, Clone)]
pub struct SubspaceItem {
    pub image: Vec<f64>,
    pub target: SymVec,
    pub gt: GrassmannPoint,
}

/// A training batch for either task.
#[derive(Debug, Clone, Copy)]
pub enum Batch<'a> {
    Pose(&'a [PoseItem]),
    Subspace(&'a [SubspaceItem]),
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        match self {
            Batch::Pose(items) => items.len(),
            Batch::Subspace(items) => items.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loss selection: extrinsic MSE in the embedded space with analytic
/// gradients, or the intrinsic geodesic loss with central finite-difference
/// gradients (oracle-grade and slow; comparison runs only).
#[derive(Debug, Clone, Copy)]
pub enum LossMode {
    DemrExtrinsic,
    DimrGeodesicFd { step: f64 },
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    sum / a.len() as f64
}

/// Loss and parameter gradients for a batch.
///
/// `demr_extrinsic`: MSE between the network output and the target
/// embedding (pose adds the translation MSE), gradients by backprop.
/// `dimr_geodesic_fd`: mean geodesic distance after the inverse embedding,
/// gradients by central differences over every parameter.
pub fn loss_and_grad(
    params: &RegressorParams,
    batch: Batch,
    mode: LossMode,
) -> Result<(f64, GradientBundle), NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    match mode {
        LossMode::DemrExtrinsic => loss_and_grad_extrinsic(params, batch),
        LossMode::DimrGeodesicFd { step } => loss_and_grad_fd(params, batch, step),
    }
}

fn loss_and_grad_extrinsic(
    params: &RegressorParams,
    batch: Batch,
) -> Result<(f64, GradientBundle), NetError> {
    let mut grads = GradientBundle::zeros_like(params);
    let inv_batch = 1.0 / batch.len() as f64;
    let mut loss = 0.0;

    match batch {
        Batch::Pose(items) => {
            for item in items {
                if item.rot_target.tag() != params.rot_head_tag {
                    return Err(NetError::TagMismatch {
                        expected: params.rot_head_tag.name().into(),
                        got: item.rot_target.tag().name().into(),
                    });
                }
                let (rot, trans, cache) = forward_pose(params, &item.p_r, &item.p_t)?;
                loss += (mse(rot.data(), item.rot_target.data())
                    + mse(&trans, &item.trans_target))
                    * inv_batch;

                let rot_len = rot.data().len() as f64;
                let d_rot: Vec<f64> = rot
                    .data()
                    .iter()
                    .zip(item.rot_target.data())
                    .map(|(o, t)| 2.0 * (o - t) / rot_len * inv_batch)
                    .collect();
                let d_trans: Vec<f64> = trans
                    .iter()
                    .zip(item.trans_target.iter())
                    .map(|(o, t)| 2.0 * (o - t) / 3.0 * inv_batch)
                    .collect();
                backward_pose(params, &mut grads, item, &cache, &d_rot, &d_trans);
            }
        }
        Batch::Subspace(items) => {
            for item in items {
                let (out, cache) = forward_subspace(params, &item.image)?;
                if out.len() != item.target.len() {
                    return Err(NetError::ShapeMismatch(format!(
                        "output length {} vs target length {}",
                        out.len(),
                        item.target.len()
                    )));
                }
                loss += mse(&out, item.target.data()) * inv_batch;
                let out_len = out.len() as f64;
                let d_out: Vec<f64> = out
                    .iter()
                    .zip(item.target.data())
                    .map(|(o, t)| 2.0 * (o - t) / out_len * inv_batch)
                    .collect();
                backward_subspace(params, &mut grads, item, &cache, &d_out);
            }
        }
    }
    if !loss.is_finite() || !grads.is_finite() {
        return Err(NetError::NonFiniteLoss);
    }
    Ok((loss, grads))
}

fn backward_pose(
    params: &RegressorParams,
    grads: &mut GradientBundle,
    item: &PoseItem,
    cache: &PoseCache,
    d_rot: &[f64],
    d_trans: &[f64],
) {
    let nhead = params.head.len();
    let trunk: &[f64] = if nhead >= 2 {
        &cache.head_posts[nhead - 2]
    } else {
        &cache.z
    };

    // Translation branch feeds gradient into the trunk output.
    let trans_layer = params.trans_head.as_ref().expect("pose net has trans head");
    let trans_grad = grads.trans_head.as_mut().expect("congruent grads");
    let mut d_trunk = backward_vec(trans_layer, trans_grad, trunk, &cache.trans_post, d_trans);

    // Rotation head (last head layer).
    let rot_input: &[f64] = trunk;
    let d_from_rot = backward_vec(
        &params.head[nhead - 1],
        &mut grads.head[nhead - 1],
        rot_input,
        &cache.head_posts[nhead - 1],
        d_rot,
    );
    for (a, b) in d_trunk.iter_mut().zip(d_from_rot.iter()) {
        *a += b;
    }

    // Remaining trunk layers, last to first.
    let mut upstream = d_trunk;
    for l in (0..nhead.saturating_sub(1)).rev() {
        let input: &[f64] = if l == 0 { &cache.z } else { &cache.head_posts[l - 1] };
        upstream = backward_vec(
            &params.head[l],
            &mut grads.head[l],
            input,
            &cache.head_posts[l],
            &upstream,
        );
    }

    // Split the concatenated gradient and route through each cloud.
    let width = cache.z.len() / 2;
    backward_cloud(
        params,
        grads,
        &item.p_r,
        &cache.cloud_r,
        &cache.argmax_r,
        &upstream[..width],
    );
    backward_cloud(
        params,
        grads,
        &item.p_t,
        &cache.cloud_t,
        &cache.argmax_t,
        &upstream[width..],
    );
}

fn backward_subspace(
    params: &RegressorParams,
    grads: &mut GradientBundle,
    item: &SubspaceItem,
    cache: &SubspaceCache,
    d_out: &[f64],
) {
    let n_enc = params.encoder.len();
    let mut upstream = d_out.to_vec();
    let total = n_enc + params.head.len();
    for l in (0..total).rev() {
        let (layer, grad) = if l < n_enc {
            (&params.encoder[l], &mut grads.encoder[l])
        } else {
            (&params.head[l - n_enc], &mut grads.head[l - n_enc])
        };
        let input: &[f64] = if l == 0 {
            &item.image
        } else {
            &cache.posts[l - 1]
        };
        upstream = backward_vec(layer, grad, input, &cache.posts[l], &upstream);
    }
}

/// Loss only, plus the relu activity pattern (one bool per relu unit
/// evaluation, fixed order) used to detect kink crossings in the checker.
fn loss_with_pattern(
    params: &RegressorParams,
    batch: Batch,
    mode: LossMode,
    pattern: Option<&mut Vec<bool>>,
) -> Result<f64, NetError> {
    let mut pat = pattern;
    let mut record = |cachebits: Vec<bool>| {
        if let Some(p) = pat.as_deref_mut() {
            p.extend_from_slice(&cachebits);
        }
    };
    let inv_batch = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    match batch {
        Batch::Pose(items) => {
            for item in items {
                let (rot, trans, cache) = forward_pose(params, &item.p_r, &item.p_t)?;
                record(relu_pattern_pose(params, &cache));
                loss += match mode {
                    LossMode::DemrExtrinsic => {
                        (mse(rot.data(), item.rot_target.data())
                            + mse(&trans, &item.trans_target))
                            * inv_batch
                    }
                    LossMode::DimrGeodesicFd { .. } => {
                        let element = inverse_embed(&rot)?;
                        let est = match element {
                            GroupElement::Rotation(r) => RigidTransform::new(r, trans)?,
                            GroupElement::Transform(m) => m,
                        };
                        dist_geodesic_se3(&est, &item.gt) * inv_batch
                    }
                };
            }
        }
        Batch::Subspace(items) => {
            for item in items {
                let (out, cache) = forward_subspace(params, &item.image)?;
                record(relu_pattern_subspace(params, &cache));
                loss += match mode {
                    LossMode::DemrExtrinsic => mse(&out, item.target.data()) * inv_batch,
                    LossMode::DimrGeodesicFd { .. } => {
                        let n = item.target.ambient_dim();
                        let sv = SymVec::from_data(n, out)?;
                        let est = inverse_embed_grassmann(
                            &sym_unvec(&sv),
                            item.gt.subspace_dim(),
                        )?;
                        dist_grassmann(&est, &item.gt, GrassDistance::Geodesic)? * inv_batch
                    }
                };
            }
        }
    }
    if !loss.is_finite() {
        return Err(NetError::NonFiniteLoss);
    }
    Ok(loss)
}

fn relu_pattern_pose(params: &RegressorParams, cache: &PoseCache) -> Vec<bool> {
    let mut bits = Vec::new();
    for (layer, posts) in params.encoder.iter().zip(cache.cloud_r.posts.iter()) {
        if layer.activation == Activation::Relu {
            bits.extend(posts.data().iter().map(|&x| x > 0.0));
        }
    }
    for (layer, posts) in params.encoder.iter().zip(cache.cloud_t.posts.iter()) {
        if layer.activation == Activation::Relu {
            bits.extend(posts.data().iter().map(|&x| x > 0.0));
        }
    }
    for (layer, post) in params.head.iter().zip(cache.head_posts.iter()) {
        if layer.activation == Activation::Relu {
            bits.extend(post.iter().map(|&x| x > 0.0));
        }
    }
    bits
}

fn relu_pattern_subspace(params: &RegressorParams, cache: &SubspaceCache) -> Vec<bool> {
    let mut bits = Vec::new();
    for (layer, post) in params
        .encoder
        .iter()
        .chain(params.head.iter())
        .zip(cache.posts.iter())
    {
        if layer.activation == Activation::Relu {
            bits.extend(post.iter().map(|&x| x > 0.0));
        }
    }
    bits
}

/// Central finite differences over every parameter.
fn loss_and_grad_fd(
    params: &RegressorParams,
    batch: Batch,
    step: f64,
) -> Result<(f64, GradientBundle), NetError> {
    let loss = loss_with_pattern(params, batch, LossMode::DimrGeodesicFd { step }, None)?;
    let mut grads = GradientBundle::zeros_like(params);
    let mut work = params.clone();
    let count = params.param_count();
    let mut flat = vec![0.0; count];
    for (i, slot) in flat.iter_mut().enumerate() {
        let orig = params.get_param(i);
        work.set_param(i, orig + step);
        let plus = loss_with_pattern(&work, batch, LossMode::DimrGeodesicFd { step }, None)?;
        work.set_param(i, orig - step);
        let minus = loss_with_pattern(&work, batch, LossMode::DimrGeodesicFd { step }, None)?;
        work.set_param(i, orig);
        *slot = (plus - minus) / (2.0 * step);
    }
    write_flat_into(&mut grads, &flat);
    if !grads.is_finite() {
        return Err(NetError::NonFiniteLoss);
    }
    Ok((loss, grads))
}

fn write_flat_into(grads: &mut GradientBundle, flat: &[f64]) {
    let mut idx = 0;
    let layers = grads
        .encoder
        .iter_mut()
        .chain(grads.head.iter_mut())
        .chain(grads.trans_head.iter_mut());
    for layer in layers {
        for slot in layer.dw.data_mut() {
            *slot = flat[idx];
            idx += 1;
        }
        for slot in &mut layer.db {
            *slot = flat[idx];
            idx += 1;
        }
    }
    debug_assert_eq!(idx, flat.len());
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam state, moment buffers congruent with the parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub step: u64,
    pub m: GradientBundle,
    pub v: GradientBundle,
    pub hyper: AdamParams,
}

impl OptimizerState {
    pub fn new(params: &RegressorParams, hyper: AdamParams) -> Self {
        OptimizerState {
            step: 0,
            m: GradientBundle::zeros_like(params),
            v: GradientBundle::zeros_like(params),
            hyper,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut RegressorParams,
    grads: &GradientBundle,
    state: &mut OptimizerState,
) -> Result<(), NetError> {
    if !params.congruent_with(grads) || !params.congruent_with(&state.m) {
        return Err(NetError::ShapeMismatch(
            "gradient/state shapes do not match parameters".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let h = state.hyper;
    let bc1 = 1.0 - h.beta1.powi(t);
    let bc2 = 1.0 - h.beta2.powi(t);

    let players = params
        .encoder
        .iter_mut()
        .chain(params.head.iter_mut())
        .chain(params.trans_head.iter_mut());
    let glayers = grads
        .encoder
        .iter()
        .chain(grads.head.iter())
        .chain(grads.trans_head.iter());
    let mlayers = state
        .m
        .encoder
        .iter_mut()
        .chain(state.m.head.iter_mut())
        .chain(state.m.trans_head.iter_mut());
    let vlayers = state
        .v
        .encoder
        .iter_mut()
        .chain(state.v.head.iter_mut())
        .chain(state.v.trans_head.iter_mut());

    for (((p, g), m), v) in players.zip(glayers).zip(mlayers).zip(vlayers) {
        update_slice(
            p.w.data_mut(),
            g.dw.data(),
            m.dw.data_mut(),
            v.dw.data_mut(),
            h,
            bc1,
            bc2,
        );
        update_slice(&mut p.b, &g.db, &mut m.db, &mut v.db, h, bc1, bc2);
    }
    Ok(())
}

fn update_slice(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    h: AdamParams,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..p.len() {
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        p[i] -= h.lr * mhat / (vhat.sqrt() + h.eps);
    }
}

/// Result of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Parameters skipped because the +/-h evaluations crossed a relu kink,
    /// where central differences are invalid by construction.
    pub excluded_kink_crossings: usize,
}

/// Compare analytic extrinsic-loss gradients against central differences.
///
/// Every parameter is checked when there are at most 10^4; larger networks
/// use a seeded random subset of 64. Relative error is
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn grad_check(
    params: &RegressorParams,
    batch: Batch,
    h: f64,
    rng: &mut Rng,
) -> Result<GradCheckReport, NetError> {
    assert!((1e-6..=1e-3).contains(&h), "step must lie in [1e-6, 1e-3]");
    let (_, analytic) = loss_and_grad(params, batch, LossMode::DemrExtrinsic)?;
    let count = params.param_count();
    let indices: Vec<usize> = if count <= 10_000 {
        (0..count).collect()
    } else {
        let mut picked = std::collections::BTreeSet::new();
        while picked.len() < 64 {
            picked.insert(rng.below(count as u64) as usize);
        }
        picked.into_iter().collect()
    };

    let mut work = params.clone();
    let mut max_rel_err = 0.0_f64;
    let mut checked = 0;
    let mut excluded = 0;
    for &i in &indices {
        let orig = params.get_param(i);
        let mut pattern_plus = Vec::new();
        work.set_param(i, orig + h);
        let plus = loss_with_pattern(
            &work,
            batch,
            LossMode::DemrExtrinsic,
            Some(&mut pattern_plus),
        )?;
        let mut pattern_minus = Vec::new();
        work.set_param(i, orig - h);
        let minus = loss_with_pattern(
            &work,
            batch,
            LossMode::DemrExtrinsic,
            Some(&mut pattern_minus),
        )?;
        work.set_param(i, orig);
        if pattern_plus != pattern_minus {
            excluded += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.get(i);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        max_rel_err = max_rel_err.max(rel);
        checked += 1;
    }
    Ok(GradCheckReport {
        max_rel_err,
        checked,
        excluded_kink_crossings: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroups::{embed_rotation, rotation_rep, RotationMatrix};
    use crate::matlin::Matrix;

    fn random_cloud(n: usize, rng: &mut Rng) -> Matrix {
        Matrix::from_vec(n, 3, rng.normal_vec(n * 3))
    }

    fn pose_item(tag: Tag, rng: &mut Rng) -> PoseItem {
        let p_r = random_cloud(16, rng);
        let gt = crate::liegroups::sample_transform_uniform(
            crate::liegroups::SampleMode::So3,
            0.8,
            rng,
        )
        .unwrap();
        let mut p_t = Matrix::zeros(16, 3);
        for i in 0..16 {
            let p = [p_r[(i, 0)], p_r[(i, 1)], p_r[(i, 2)]];
            let q = gt.apply(&p);
            for j in 0..3 {
                p_t[(i, j)] = q[j];
            }
        }
        let rot_target = rotation_rep(&gt.rot, tag).unwrap();
        PoseItem {
            p_r,
            p_t,
            rot_target,
            trans_target: gt.trans,
            gt,
        }
    }

    fn subspace_item(n: usize, m: usize, rng: &mut Rng) -> SubspaceItem {
        let gt = crate::grassmann::sample_subspace_uniform(n, m, rng).unwrap();
        let coeff = rng.normal_vec(m);
        let mut image = vec![0.0; n];
        for (i, px) in image.iter_mut().enumerate() {
            for j in 0..m {
                *px += gt.frame()[(i, j)] * coeff[j];
            }
            *px += 0.05 * rng.normal();
        }
        let target =
            crate::grassmann::sym_vec(crate::grassmann::embed_projector(&gt).matrix()).unwrap();
        SubspaceItem { image, target, gt }
    }

    fn zero_params(tag: Tag) -> RegressorParams {
        let mut rng = Rng::seed_from_u64(0);
        let mut p = RegressorParams::new_pose(tag, &[8, 12], &[10], &mut rng).unwrap();
        for i in 0..p.param_count() {
            p.set_param(i, 0.0);
        }
        p
    }

    #[test]
    fn zero_params_output_head_biases() {
        let params = zero_params(Tag::Nine9);
        let mut rng = Rng::seed_from_u64(1);
        let p_r = random_cloud(8, &mut rng);
        let p_t = random_cloud(8, &mut rng);
        let (rot, trans, _) = forward_pose(&params, &p_r, &p_t).unwrap();
        assert!(rot.data().iter().all(|&x| x == 0.0));
        assert_eq!(trans, [0.0; 3]);
    }

    #[test]
    fn pose_forward_is_permutation_invariant() {
        let mut rng = Rng::seed_from_u64(2);
        let params = RegressorParams::new_pose(Tag::Sixd6, &[8, 12], &[10], &mut rng).unwrap();
        let p_r = random_cloud(12, &mut rng);
        let p_t = random_cloud(12, &mut rng);
        let (rot1, trans1, _) = forward_pose(&params, &p_r, &p_t).unwrap();

        // Reverse the rows of p_r.
        let mut reversed = Matrix::zeros(12, 3);
        for i in 0..12 {
            for j in 0..3 {
                reversed[(i, j)] = p_r[(11 - i, j)];
            }
        }
        let (rot2, trans2, _) = forward_pose(&params, &reversed, &p_t).unwrap();
        assert_eq!(rot1.data(), rot2.data());
        assert_eq!(trans1, trans2);
    }

    #[test]
    fn pose_output_length_follows_tag() {
        let mut rng = Rng::seed_from_u64(3);
        let params = RegressorParams::new_pose(Tag::Sixd6, &[8, 12], &[10], &mut rng).unwrap();
        let p_r = random_cloud(8, &mut rng);
        let p_t = random_cloud(8, &mut rng);
        let (rot, _, _) = forward_pose(&params, &p_r, &p_t).unwrap();
        assert_eq!(rot.data().len(), 6);
    }

    #[test]
    fn subspace_zero_params_emit_zero() {
        let mut rng = Rng::seed_from_u64(4);
        let mut params =
            RegressorParams::new_subspace(10, &[16], 15, Activation::Relu, &mut rng);
        for i in 0..params.param_count() {
            params.set_param(i, 0.0);
        }
        let (out, _) = forward_subspace(&params, &vec![1.0; 10]).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
        assert_eq!(out.len(), 15);
    }

    #[test]
    fn subspace_identity_slice_layer() {
        // A single linear layer seeded as an identity slice copies the
        // input prefix.
        let mut rng = Rng::seed_from_u64(5);
        let mut params = RegressorParams::new_subspace(6, &[], 4, Activation::Relu, &mut rng);
        for i in 0..params.param_count() {
            params.set_param(i, 0.0);
        }
        for k in 0..4 {
            // W is 4x6 row-major at flat offset 0.
            params.set_param(k * 6 + k, 1.0);
        }
        let x = vec![9.0, -3.0, 2.5, 0.5, 7.0, 1.0];
        let (out, _) = forward_subspace(&params, &x).unwrap();
        assert_eq!(out, vec![9.0, -3.0, 2.5, 0.5]);
    }

    #[test]
    fn symvec_output_length_for_n64() {
        assert_eq!(crate::grassmann::symvec_len(64), 2080);
    }

    #[test]
    fn perfect_prediction_has_zero_loss_and_grads() {
        let mut rng = Rng::seed_from_u64(6);
        let mut params = zero_params(Tag::Nine9);
        // Bias the rotation head to the target embedding and the translation
        // head to the target translation; with zero weights the output is
        // exactly the bias.
        let identity_target = embed_rotation(&RotationMatrix::identity());
        let nhead = params.head.len();
        params.head[nhead - 1].b = identity_target.data().to_vec();

        let p_r = random_cloud(8, &mut rng);
        let item = PoseItem {
            p_t: p_r.clone(),
            p_r,
            rot_target: identity_target,
            trans_target: [0.0; 3],
            gt: RigidTransform::identity(),
        };
        let (loss, grads) =
            loss_and_grad(&params, Batch::Pose(&[item]), LossMode::DemrExtrinsic).unwrap();
        assert_eq!(loss, 0.0);
        for i in 0..params.param_count() {
            assert_eq!(grads.get(i), 0.0);
        }
    }

    #[test]
    fn scalar_linear_model_matches_hand_gradient() {
        // Single linear neuron y = w x + b on one sample: dL/dw = 2 (wx + b
        // - t) x, dL/db = 2 (wx + b - t).
        let mut rng = Rng::seed_from_u64(7);
        let mut params = RegressorParams::new_subspace(1, &[], 1, Activation::Relu, &mut rng);
        params.set_param(0, 0.7); // w
        params.set_param(1, -0.2); // b
        let item = SubspaceItem {
            image: vec![1.3],
            target: SymVec::from_data(1, vec![2.0]).unwrap(),
            gt: crate::grassmann::sample_subspace_uniform(3, 1, &mut rng).unwrap(),
        };
        let (loss, grads) =
            loss_and_grad(&params, Batch::Subspace(&[item]), LossMode::DemrExtrinsic).unwrap();
        let pred = 0.7 * 1.3 - 0.2;
        assert!((loss - (pred - 2.0) * (pred - 2.0)).abs() < 1e-15);
        assert!((grads.get(0) - 2.0 * (pred - 2.0) * 1.3).abs() < 1e-12);
        assert!((grads.get(1) - 2.0 * (pred - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn grad_check_linear_model_is_exact() {
        let mut rng = Rng::seed_from_u64(8);
        let params = RegressorParams::new_subspace(4, &[], 3, Activation::Relu, &mut rng);
        let items: Vec<SubspaceItem> = (0..3)
            .map(|_| SubspaceItem {
                image: rng.normal_vec(4),
                target: SymVec::from_data(2, rng.normal_vec(3)).unwrap(),
                gt: crate::grassmann::sample_subspace_uniform(3, 1, &mut rng).unwrap(),
            })
            .collect();
        let report = grad_check(&params, Batch::Subspace(&items), 1e-4, &mut rng).unwrap();
        assert!(report.max_rel_err <= 1e-9, "err {}", report.max_rel_err);
        assert_eq!(report.excluded_kink_crossings, 0);
    }

    #[test]
    fn grad_check_two_layer_tanh_net() {
        let mut rng = Rng::seed_from_u64(9);
        let params = RegressorParams::new_subspace(5, &[7], 6, Activation::Tanh, &mut rng);
        let items: Vec<SubspaceItem> = (0..2)
            .map(|_| SubspaceItem {
                image: rng.normal_vec(5),
                target: SymVec::from_data(3, rng.normal_vec(6)).unwrap(),
                gt: crate::grassmann::sample_subspace_uniform(4, 2, &mut rng).unwrap(),
            })
            .collect();
        let report = grad_check(&params, Batch::Subspace(&items), 1e-4, &mut rng).unwrap();
        assert!(report.max_rel_err <= 1e-5, "err {}", report.max_rel_err);
    }

    #[test]
    fn grad_check_pose_network() {
        let mut rng = Rng::seed_from_u64(10);
        for tag in [Tag::Nine9, Tag::Sixd6, Tag::Euler3] {
            let params = RegressorParams::new_pose(tag, &[6, 8], &[10], &mut rng).unwrap();
            let items: Vec<PoseItem> = (0..2).map(|_| pose_item(tag, &mut rng)).collect();
            let report = grad_check(&params, Batch::Pose(&items), 1e-4, &mut rng).unwrap();
            assert!(
                report.max_rel_err <= 1e-5,
                "{tag}: err {} ({} checked, {} excluded)",
                report.max_rel_err,
                report.checked,
                report.excluded_kink_crossings
            );
        }
    }

    #[test]
    fn dimr_fd_gradients_agree_on_subspace_toy() {
        // The finite-difference path must produce a descent direction that
        // matches a direct numerical probe of the intrinsic loss.
        let mut rng = Rng::seed_from_u64(11);
        let params = RegressorParams::new_subspace(4, &[6], 10, Activation::Tanh, &mut rng);
        let items: Vec<SubspaceItem> = (0..2).map(|_| subspace_item(4, 2, &mut rng)).collect();
        let (loss, grads) = loss_and_grad(
            &params,
            Batch::Subspace(&items),
            LossMode::DimrGeodesicFd { step: 1e-4 },
        )
        .unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        // Probe one parameter by hand.
        let mut work = params.clone();
        let orig = work.get_param(3);
        work.set_param(3, orig + 1e-4);
        let plus = loss_with_pattern(
            &work,
            Batch::Subspace(&items),
            LossMode::DimrGeodesicFd { step: 1e-4 },
            None,
        )
        .unwrap();
        work.set_param(3, orig - 1e-4);
        let minus = loss_with_pattern(
            &work,
            Batch::Subspace(&items),
            LossMode::DimrGeodesicFd { step: 1e-4 },
            None,
        )
        .unwrap();
        let numeric = (plus - minus) / 2e-4;
        assert!((grads.get(3) - numeric).abs() <= 1e-12);
    }

    #[test]
    fn adam_reference_steps() {
        let mut rng = Rng::seed_from_u64(12);
        let mut params = RegressorParams::new_subspace(1, &[], 1, Activation::Relu, &mut rng);
        params.set_param(0, 0.0);
        params.set_param(1, 0.0);
        let mut state = OptimizerState::new(
            &params,
            AdamParams {
                lr: 0.1,
                ..AdamParams::default()
            },
        );

        // Zero gradient leaves parameters unchanged.
        let zero = GradientBundle::zeros_like(&params);
        adam_step(&mut params, &zero, &mut state).unwrap();
        assert_eq!(params.get_param(0), 0.0);

        // Unit gradient moves w by ~ -lr at the first effective step.
        let mut state = OptimizerState::new(
            &params,
            AdamParams {
                lr: 0.1,
                ..AdamParams::default()
            },
        );
        let mut g = GradientBundle::zeros_like(&params);
        g.head[0].dw.data_mut()[0] = 1.0;
        adam_step(&mut params, &g, &mut state).unwrap();
        assert!((params.get_param(0) + 0.1).abs() < 1e-8);
    }

    #[test]
    fn adam_rejects_incongruent_shapes() {
        let mut rng = Rng::seed_from_u64(13);
        let mut params = RegressorParams::new_subspace(2, &[], 2, Activation::Relu, &mut rng);
        let other = RegressorParams::new_subspace(3, &[], 2, Activation::Relu, &mut rng);
        let grads = GradientBundle::zeros_like(&other);
        let mut state = OptimizerState::new(&params, AdamParams::default());
        assert!(matches!(
            adam_step(&mut params, &grads, &mut state),
            Err(NetError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let run = |seed: u64| -> Vec<f64> {
            let mut rng = Rng::seed_from_u64(seed);
            let mut params =
                RegressorParams::new_pose(Tag::Sixd6, &[6, 8], &[10], &mut rng).unwrap();
            let items: Vec<PoseItem> = (0..4).map(|_| pose_item(Tag::Sixd6, &mut rng)).collect();
            let mut state = OptimizerState::new(&params, AdamParams::default());
            let mut losses = Vec::new();
            for _ in 0..20 {
                let (loss, grads) =
                    loss_and_grad(&params, Batch::Pose(&items), LossMode::DemrExtrinsic)
                        .unwrap();
                adam_step(&mut params, &grads, &mut state).unwrap();
                losses.push(loss);
            }
            losses
        };
        let a = run(77);
        let b = run(77);
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert!(a.last().unwrap() < a.first().unwrap());
    }

    #[test]
    fn tag_mismatch_is_rejected() {
        let mut rng = Rng::seed_from_u64(14);
        let params = RegressorParams::new_pose(Tag::Nine9, &[6, 8], &[10], &mut rng).unwrap();
        let item = pose_item(Tag::Sixd6, &mut rng);
        assert!(matches!(
            loss_and_grad(&params, Batch::Pose(&[item]), LossMode::DemrExtrinsic),
            Err(NetError::TagMismatch { .. })
        ));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut rng = Rng::seed_from_u64(15);
        let params = RegressorParams::new_subspace(2, &[], 2, Activation::Relu, &mut rng);
        let items: Vec<SubspaceItem> = Vec::new();
        assert!(matches!(
            loss_and_grad(&params, Batch::Subspace(&items), LossMode::DemrExtrinsic),
            Err(NetError::EmptyBatch)
        ));
    }
}
