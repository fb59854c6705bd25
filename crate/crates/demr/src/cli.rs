//! Experiment drivers behind the `demr` binary: JSON experiment configs,
//! deterministic training loops, report/CSV persistence and the exit-code
//! contract (0 ok, 1 failed checks, 2 config, 3 IO, 4 numerical).
//!
//! Every command is a pure function of (config, seed) up to the wall-clock
//! field of `report.json`; CSV outputs are byte-identical across reruns.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grassmann::{embed_projector, sym_vec, GrassError, SymVec};
use crate::liegroups::{LieError, SampleMode, Tag};
use crate::matlin::MatError;
use crate::net::{
    adam_step, loss_and_grad, save_checkpoint, Activation, AdamParams, Batch, LossMode, NetError,
    OptimizerState, PoseItem, RegressorParams, SubspaceItem,
};
use crate::props::{run_props, PropCheck, PropsConfig};
use crate::rng::Rng;
use crate::tasks::{
    evaluate_pose, evaluate_pose_oracle, evaluate_subspace, evaluate_subspace_with,
    gen_pose_dataset, gen_subspace_dataset, make_pose_items, make_subspace_items, PoseDataConfig,
    PoseEval, RangeStyle, SubspaceDataConfig, TaskError,
};

/// Shipped pose architecture (per-point encoder widths).
pub const POSE_ENCODER_WIDTHS: &[usize] = &[32, 64];
/// Shipped pose architecture (trunk widths before the linear branches).
pub const POSE_HEAD_WIDTHS: &[usize] = &[64];
/// Shipped subspace architecture (hidden widths before the linear output).
pub const SUBSPACE_HIDDEN_WIDTHS: &[usize] = &[256, 256];

/// Embedded copy of the config schema shipped at `configs/config.schema.json`.
pub const CONFIG_SCHEMA: &str = include_str!("../../../configs/config.schema.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("{0} proposition checks failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::BadConfig(msg) => CliError::Config(msg),
            TaskError::Ingest { .. } => CliError::Io(e.to_string()),
            TaskError::Io(_) => CliError::Io(e.to_string()),
            TaskError::DimMismatch(_) => CliError::Config(e.to_string()),
            TaskError::Net(inner) => NetError::into(inner),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::ShapeMismatch(_) | NetError::TagMismatch { .. } | NetError::EmptyBatch => {
                CliError::Config(e.to_string())
            }
            NetError::Io(_) | NetError::Checkpoint(_) => CliError::Io(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<LieError> for CliError {
    fn from(e: LieError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<GrassError> for CliError {
    fn from(e: GrassError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<MatError> for CliError {
    fn from(e: MatError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Pose,
    Subspace,
    Props,
}

/// Pose experiment section: data generation plus training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseExperimentConfig {
    pub tag: Tag,
    pub data: PoseDataConfig,
    pub iterations: usize,
    pub batch: usize,
    pub lr: f64,
    pub encoder_widths: Vec<usize>,
    pub head_widths: Vec<usize>,
    pub encoder_activation: Activation,
    pub trunk_activation: Activation,
}

impl Default for PoseExperimentConfig {
    fn default() -> Self {
        PoseExperimentConfig {
            tag: Tag::Nine9,
            data: PoseDataConfig {
                points: 256,
                train_count: 1024,
                test_count: 512,
                mode: SampleMode::So3,
                fraction: 0.8,
                cloud_csv: None,
                cloud_scale: None,
                cloud_spikes: 0,
                spike_factor: 3.0,
                range_style: RangeStyle::Symmetric,
                point_noise: 0.0,
            },
            iterations: 2000,
            batch: 32,
            lr: 1e-3,
            encoder_widths: POSE_ENCODER_WIDTHS.to_vec(),
            head_widths: POSE_HEAD_WIDTHS.to_vec(),
            encoder_activation: Activation::Relu,
            trunk_activation: Activation::Tanh,
        }
    }
}

/// Reduced-size finite-difference competitor settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimrConfig {
    pub data: SubspaceDataConfig,
    pub iterations: usize,
    pub batch: usize,
    pub lr: f64,
    pub hidden_widths: Vec<usize>,
    pub fd_step: f64,
}

impl Default for DimrConfig {
    fn default() -> Self {
        DimrConfig {
            data: SubspaceDataConfig {
                n: 12,
                m: 2,
                identities: 8,
                images_per_identity: 16,
                noise_sigma: 0.05,
                split: 0.8,
                split_by: crate::tasks::SplitBy::Images,
                images_path: None,
                center_pca: false,
            },
            iterations: 400,
            batch: 6,
            lr: 1e-3,
            hidden_widths: vec![16],
            fd_step: 1e-4,
        }
    }
}

/// Subspace experiment section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubspaceExperimentConfig {
    pub data: SubspaceDataConfig,
    pub iterations: usize,
    pub batch: usize,
    pub lr: f64,
    pub hidden_widths: Vec<usize>,
    pub dimr: DimrConfig,
}

impl Default for SubspaceExperimentConfig {
    fn default() -> Self {
        SubspaceExperimentConfig {
            data: SubspaceDataConfig {
                n: 64,
                m: 5,
                identities: 40,
                images_per_identity: 64,
                noise_sigma: 0.05,
                split: 0.8,
                split_by: crate::tasks::SplitBy::Images,
                images_path: None,
                center_pca: false,
            },
            iterations: 800,
            batch: 32,
            lr: 1e-3,
            hidden_widths: SUBSPACE_HIDDEN_WIDTHS.to_vec(),
            dimr: DimrConfig::default(),
        }
    }
}

/// Top-level experiment descriptor; `seed` is mandatory, unknown keys are
/// rejected, validated against the schema in `configs/config.schema.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub pose: Option<PoseExperimentConfig>,
    #[serde(default)]
    pub subspace: Option<SubspaceExperimentConfig>,
    #[serde(default)]
    pub props: Option<PropsConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let check_positive = |name: &str, v: usize| -> Result<(), CliError> {
            if v == 0 {
                Err(CliError::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        if let Some(pose) = &self.pose {
            check_positive("pose.iterations", pose.iterations)?;
            check_positive("pose.batch", pose.batch)?;
            if !(pose.lr > 0.0) {
                return Err(CliError::Config("pose.lr must be positive".into()));
            }
            if pose.encoder_widths.is_empty() || pose.encoder_widths.contains(&0) {
                return Err(CliError::Config("pose.encoder_widths must be nonempty positive".into()));
            }
            if pose.tag.len().is_none() {
                return Err(CliError::Config(format!(
                    "pose.tag {} is not a rotation representation",
                    pose.tag
                )));
            }
        }
        if let Some(sub) = &self.subspace {
            check_positive("subspace.iterations", sub.iterations)?;
            check_positive("subspace.batch", sub.batch)?;
            if !(sub.lr > 0.0) {
                return Err(CliError::Config("subspace.lr must be positive".into()));
            }
            check_positive("subspace.dimr.iterations", sub.dimr.iterations)?;
            check_positive("subspace.dimr.batch", sub.dimr.batch)?;
            if !(sub.dimr.fd_step >= 1e-6 && sub.dimr.fd_step <= 1e-3) {
                return Err(CliError::Config(
                    "subspace.dimr.fd_step must lie in [1e-6, 1e-3]".into(),
                ));
            }
        }
        Ok(())
    }

    fn pose_section(&self) -> PoseExperimentConfig {
        self.pose.clone().unwrap_or_default()
    }

    fn subspace_section(&self) -> SubspaceExperimentConfig {
        self.subspace.clone().unwrap_or_default()
    }

    fn props_section(&self) -> PropsConfig {
        self.props.clone().unwrap_or_default()
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// Fisher-Yates shuffle driven by the experiment generator.
fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.below((i + 1) as u64) as usize;
        items.swap(i, j);
    }
}

enum TrainItems {
    Pose(Vec<PoseItem>),
    Subspace(Vec<SubspaceItem>),
}

impl TrainItems {
    fn len(&self) -> usize {
        match self {
            TrainItems::Pose(v) => v.len(),
            TrainItems::Subspace(v) => v.len(),
        }
    }

    fn shuffle(&mut self, rng: &mut Rng) {
        match self {
            TrainItems::Pose(v) => shuffle(v, rng),
            TrainItems::Subspace(v) => shuffle(v, rng),
        }
    }

    fn batch(&self, start: usize, len: usize) -> Batch<'_> {
        match self {
            TrainItems::Pose(v) => Batch::Pose(&v[start..start + len]),
            TrainItems::Subspace(v) => Batch::Subspace(&v[start..start + len]),
        }
    }
}

/// Deterministic epoch-shuffled mini-batch training. Returns the loss
/// recorded at every iteration.
fn train_network(
    params: &mut RegressorParams,
    mut items: TrainItems,
    mode: LossMode,
    iterations: usize,
    batch_size: usize,
    lr: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>, CliError> {
    if items.len() == 0 {
        return Err(CliError::Config("empty training set".into()));
    }
    let batch_size = batch_size.min(items.len());
    let mut state = OptimizerState::new(
        params,
        AdamParams {
            lr,
            ..AdamParams::default()
        },
    );
    let mut losses = Vec::with_capacity(iterations);
    let mut cursor = usize::MAX; // forces an initial shuffle
    for _ in 0..iterations {
        if cursor.saturating_add(batch_size) > items.len() {
            items.shuffle(rng);
            cursor = 0;
        }
        let batch = items.batch(cursor, batch_size);
        cursor += batch_size;
        let (loss, grads) = loss_and_grad(params, batch, mode)?;
        adam_step(params, &grads, &mut state)?;
        losses.push(loss);
    }
    Ok(losses)
}

/// Window-10 smoothed loss curve.
fn smoothed(losses: &[f64]) -> Vec<f64> {
    losses
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let lo = i.saturating_sub(9);
            let window = &losses[lo..=i];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect()
}

/// First epoch (1-based iteration index) whose window-10 smoothed loss is
/// within 1% of the final smoothed loss.
pub fn convergence_epoch(losses: &[f64]) -> usize {
    if losses.is_empty() {
        return 0;
    }
    let smooth = smoothed(losses);
    let last = *smooth.last().expect("nonempty");
    let bound = last + last.abs() * 0.01 + 1e-12;
    smooth
        .iter()
        .position(|&s| s <= bound)
        .map(|i| i + 1)
        .unwrap_or(losses.len())
}

// ---------------------------------------------------------------------------
// Pose command
// ---------------------------------------------------------------------------

/// Everything a pose run produces before any file is written.
#[derive(Debug)]
pub struct PoseOutcome {
    pub eval: PoseEval,
    pub losses: Vec<f64>,
    pub convergence_epoch: usize,
    pub params: RegressorParams,
}

/// Train and evaluate one pose configuration. Pure in (config, seed).
///
/// With `stub_gt` the network is left untrained and evaluation uses the
/// oracle stub that emits the embedded ground truth (all error columns 0).
pub fn run_pose_experiment(
    cfg: &PoseExperimentConfig,
    seed: u64,
    stub_gt: bool,
) -> Result<PoseOutcome, CliError> {
    let mut data_rng = Rng::with_stream(seed, 1);
    let (train, test) = gen_pose_dataset(&cfg.data, &mut data_rng)?;

    let mut init_rng = Rng::with_stream(seed, 2);
    let mut params = RegressorParams::new_pose_with(
        cfg.tag,
        &cfg.encoder_widths,
        cfg.encoder_activation,
        &cfg.head_widths,
        cfg.trunk_activation,
        &mut init_rng,
    )?;

    if stub_gt {
        let eval = evaluate_pose_oracle(&test, cfg.tag)?;
        return Ok(PoseOutcome {
            eval,
            losses: Vec::new(),
            convergence_epoch: 0,
            params,
        });
    }

    let items = make_pose_items(&train, cfg.tag)?;
    let mut train_rng = Rng::with_stream(seed, 3);
    let losses = train_network(
        &mut params,
        TrainItems::Pose(items),
        LossMode::DemrExtrinsic,
        cfg.iterations,
        cfg.batch,
        cfg.lr,
        &mut train_rng,
    )?;
    let eval = evaluate_pose(&params, &test, cfg.tag)?;
    let epoch = convergence_epoch(&losses);
    Ok(PoseOutcome {
        eval,
        losses,
        convergence_epoch: epoch,
        params,
    })
}

// ---------------------------------------------------------------------------
// Subspace command
// ---------------------------------------------------------------------------

/// One trained subspace variant.
#[derive(Debug)]
pub struct SubspaceVariantOutcome {
    pub avg_dg: f64,
    pub losses: Vec<f64>,
    pub convergence_epoch: usize,
    pub params: RegressorParams,
}

/// Outcome of the subspace experiment, including the two fixed baselines
/// the trained model is compared against.
#[derive(Debug)]
pub struct SubspaceOutcome {
    pub demr: SubspaceVariantOutcome,
    pub dimr_fd: Option<SubspaceVariantOutcome>,
    pub untrained_avg_dg: f64,
    pub mean_projector_avg_dg: f64,
    pub stubbed: bool,
}

fn mean_projector_symvec(train: &[crate::tasks::SubspaceSample]) -> Result<SymVec, CliError> {
    let n = train[0].gt.ambient_dim();
    let mut mean = crate::matlin::Matrix::zeros(n, n);
    for s in train {
        mean = mean.add(embed_projector(&s.gt).matrix());
    }
    mean = mean.scale(1.0 / train.len() as f64);
    Ok(sym_vec(&mean)?)
}

/// Train and evaluate the subspace configuration; optionally also train the
/// reduced-size finite-difference geodesic competitor.
pub fn run_subspace_experiment(
    cfg: &SubspaceExperimentConfig,
    seed: u64,
    with_dimr: bool,
    stub_gt: bool,
) -> Result<SubspaceOutcome, CliError> {
    let mut data_rng = Rng::with_stream(seed, 11);
    let (train, test) = gen_subspace_dataset(&cfg.data, &mut data_rng)?;
    let out_len = crate::grassmann::symvec_len(cfg.data.n);

    let mut init_rng = Rng::with_stream(seed, 12);
    let mut params = RegressorParams::new_subspace(
        cfg.data.n,
        &cfg.hidden_widths,
        out_len,
        Activation::Relu,
        &mut init_rng,
    );

    // Fixed baselines, evaluated before any training.
    let untrained_avg_dg = evaluate_subspace(&params, &test)?.avg;
    let mean_sv = mean_projector_symvec(&train)?;
    let mean_projector_avg_dg =
        evaluate_subspace_with(|_, _| Ok(mean_sv.clone()), &test)?.avg;

    let demr = if stub_gt {
        let avg = evaluate_subspace_with(
            |_, sample| Ok(sym_vec(embed_projector(&sample.gt).matrix())?),
            &test,
        )?
        .avg;
        SubspaceVariantOutcome {
            avg_dg: avg,
            losses: Vec::new(),
            convergence_epoch: 0,
            params: params.clone(),
        }
    } else {
        let items = make_subspace_items(&train)?;
        let mut train_rng = Rng::with_stream(seed, 13);
        let losses = train_network(
            &mut params,
            TrainItems::Subspace(items),
            LossMode::DemrExtrinsic,
            cfg.iterations,
            cfg.batch,
            cfg.lr,
            &mut train_rng,
        )?;
        let avg = evaluate_subspace(&params, &test)?.avg;
        let epoch = convergence_epoch(&losses);
        SubspaceVariantOutcome {
            avg_dg: avg,
            losses,
            convergence_epoch: epoch,
            params,
        }
    };

    let dimr_fd = if with_dimr && !stub_gt {
        let mut dimr_data_rng = Rng::with_stream(seed, 21);
        let (dtrain, dtest) = gen_subspace_dataset(&cfg.dimr.data, &mut dimr_data_rng)?;
        let dout = crate::grassmann::symvec_len(cfg.dimr.data.n);
        let mut dimr_init_rng = Rng::with_stream(seed, 22);
        let mut dparams = RegressorParams::new_subspace(
            cfg.dimr.data.n,
            &cfg.dimr.hidden_widths,
            dout,
            Activation::Tanh,
            &mut dimr_init_rng,
        );
        let ditems = make_subspace_items(&dtrain)?;
        let mut dimr_train_rng = Rng::with_stream(seed, 23);
        let losses = train_network(
            &mut dparams,
            TrainItems::Subspace(ditems),
            LossMode::DimrGeodesicFd {
                step: cfg.dimr.fd_step,
            },
            cfg.dimr.iterations,
            cfg.dimr.batch,
            cfg.dimr.lr,
            &mut dimr_train_rng,
        )?;
        let avg = evaluate_subspace(&dparams, &dtest)?.avg;
        let epoch = convergence_epoch(&losses);
        Some(SubspaceVariantOutcome {
            avg_dg: avg,
            losses,
            convergence_epoch: epoch,
            params: dparams,
        })
    } else {
        None
    };

    Ok(SubspaceOutcome {
        demr,
        dimr_fd,
        untrained_avg_dg,
        mean_projector_avg_dg,
        stubbed: stub_gt,
    })
}

// ---------------------------------------------------------------------------
// File output
// ---------------------------------------------------------------------------

/// Floats in CSV/JSON reports carry 17 significant digits (round-trip
/// exact).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text.as_bytes())
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

fn loss_curve_json(losses: &[f64]) -> serde_json::Value {
    serde_json::Value::Array(
        losses
            .iter()
            .enumerate()
            .map(|(i, l)| serde_json::json!([i + 1, l]))
            .collect(),
    )
}

fn stats_json(stats: &crate::tasks::ErrorStats) -> serde_json::Value {
    serde_json::json!({
        "avg": stats.avg,
        "median": stats.median,
        "std": stats.std,
    })
}

/// Resolve the output directory: `DEMR_OUT` overrides the config, which
/// overrides `./runs`.
fn resolve_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    if let Ok(dir) = std::env::var("DEMR_OUT") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))
}

/// `demr pose`: generate, train, evaluate, persist. Returns the output dir.
pub fn cmd_pose(cfg: &ExperimentConfig, stub_gt: bool) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let pose_cfg = cfg.pose_section();
    let outcome = run_pose_experiment(&pose_cfg, cfg.seed, stub_gt)?;
    let out_dir = resolve_out_dir(cfg);
    ensure_dir(&out_dir)?;

    let report = serde_json::json!({
        "task": "pose",
        "config": serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?,
        "stats": {
            "combined_deg": stats_json(&outcome.eval.combined_deg),
            "rotation_deg": stats_json(&outcome.eval.rotation_deg),
            "translation": stats_json(&outcome.eval.translation),
        },
        "loss_curve": loss_curve_json(&outcome.losses),
        "convergence_epoch": outcome.convergence_epoch,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
    });
    write_text(
        &out_dir.join("report.json"),
        &serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?,
    )?;

    let mut stats_csv = String::from("tag,fraction,avg_deg,median_deg,std_deg\n");
    stats_csv.push_str(&format!(
        "{},{},{},{},{}\n",
        pose_cfg.tag,
        fmt_f64(pose_cfg.data.fraction),
        fmt_f64(outcome.eval.combined_deg.avg),
        fmt_f64(outcome.eval.combined_deg.median),
        fmt_f64(outcome.eval.combined_deg.std),
    ));
    write_text(&out_dir.join("stats.csv"), &stats_csv)?;

    let mut pct = String::from("error_deg,cumulative_fraction\n");
    let n = outcome.eval.combined_deg.per_sample.len();
    for (i, err) in outcome.eval.combined_deg.per_sample.iter().enumerate() {
        pct.push_str(&format!(
            "{},{}\n",
            fmt_f64(*err),
            fmt_f64((i + 1) as f64 / n as f64)
        ));
    }
    write_text(&out_dir.join("percentile.csv"), &pct)?;

    save_checkpoint(&outcome.params, &out_dir.join("checkpoint.demr"))?;
    Ok(out_dir)
}

/// `demr subspace`: train the extrinsic model (optionally the
/// finite-difference intrinsic competitor), persist report and summary.
pub fn cmd_subspace(
    cfg: &ExperimentConfig,
    with_dimr: bool,
    stub_gt: bool,
) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let sub_cfg = cfg.subspace_section();
    let outcome = run_subspace_experiment(&sub_cfg, cfg.seed, with_dimr, stub_gt)?;
    let out_dir = resolve_out_dir(cfg);
    ensure_dir(&out_dir)?;

    let mut variants = serde_json::Map::new();
    variants.insert(
        "demr".into(),
        serde_json::json!({
            "avg_dg": outcome.demr.avg_dg,
            "convergence_epoch": outcome.demr.convergence_epoch,
            "loss_curve": loss_curve_json(&outcome.demr.losses),
        }),
    );
    if let Some(dimr) = &outcome.dimr_fd {
        variants.insert(
            "dimr_fd".into(),
            serde_json::json!({
                "avg_dg": dimr.avg_dg,
                "convergence_epoch": dimr.convergence_epoch,
                "loss_curve": loss_curve_json(&dimr.losses),
            }),
        );
    }
    let report = serde_json::json!({
        "task": "subspace",
        "config": serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?,
        "variants": serde_json::Value::Object(variants),
        "baselines": {
            "untrained_avg_dg": outcome.untrained_avg_dg,
            "mean_projector_avg_dg": outcome.mean_projector_avg_dg,
        },
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
    });
    write_text(
        &out_dir.join("report.json"),
        &serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?,
    )?;

    let mut summary = String::from("variant,avg_dg,convergence_epoch\n");
    summary.push_str(&format!(
        "demr,{},{}\n",
        fmt_f64(outcome.demr.avg_dg),
        outcome.demr.convergence_epoch
    ));
    if let Some(dimr) = &outcome.dimr_fd {
        summary.push_str(&format!(
            "dimr_fd,{},{}\n",
            fmt_f64(dimr.avg_dg),
            dimr.convergence_epoch
        ));
    }
    summary.push_str(&format!(
        "baseline_untrained,{},0\n",
        fmt_f64(outcome.untrained_avg_dg)
    ));
    summary.push_str(&format!(
        "baseline_mean_projector,{},0\n",
        fmt_f64(outcome.mean_projector_avg_dg)
    ));
    write_text(&out_dir.join("summary.csv"), &summary)?;

    save_checkpoint(&outcome.demr.params, &out_dir.join("checkpoint.demr"))?;
    if let Some(dimr) = &outcome.dimr_fd {
        save_checkpoint(&dimr.params, &out_dir.join("checkpoint_dimr.demr"))?;
    }
    Ok(out_dir)
}

/// `demr props`: run the proposition suite, write `props.csv`, and fail
/// with a nonzero exit when any row fails.
pub fn cmd_props(cfg: &ExperimentConfig) -> Result<(PathBuf, Vec<PropCheck>), CliError> {
    let props_cfg = cfg.props_section();
    let checks = run_props(&props_cfg, cfg.seed).map_err(CliError::from)?;
    let out_dir = resolve_out_dir(cfg);
    ensure_dir(&out_dir)?;

    let mut csv = String::from("check,statistic,threshold,pass\n");
    for c in &checks {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            c.name,
            fmt_f64(c.statistic),
            fmt_f64(c.threshold),
            c.pass
        ));
    }
    write_text(&out_dir.join("props.csv"), &csv)?;

    let failures = checks.iter().filter(|c| !c.pass).count();
    if failures > 0 {
        return Err(CliError::ChecksFailed(failures));
    }
    Ok((out_dir, checks))
}

// ---------------------------------------------------------------------------
// Top-level dispatch
// ---------------------------------------------------------------------------

/// Parsed command-line options, applied on top of the JSON config.
#[derive(Debug, Clone)]
pub struct CliOverrides {
    pub seed: Option<u64>,
    pub tag: Option<Tag>,
    pub fraction: Option<f64>,
    pub stub_gt: bool,
    pub dimr_fd: bool,
}

/// Load the config, apply overrides and dispatch the subcommand. Returns
/// the output directory on success.
pub fn dispatch(
    task: TaskKind,
    config_path: &Path,
    overrides: &CliOverrides,
) -> Result<PathBuf, CliError> {
    let mut cfg = ExperimentConfig::from_file(config_path)?;
    if cfg.task != task {
        return Err(CliError::Config(format!(
            "config declares task {:?} but the {:?} subcommand was invoked",
            cfg.task, task
        )));
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(tag) = overrides.tag {
        let mut pose = cfg.pose_section();
        pose.tag = tag;
        cfg.pose = Some(pose);
    }
    if let Some(fraction) = overrides.fraction {
        let mut pose = cfg.pose_section();
        pose.data.fraction = fraction;
        cfg.pose = Some(pose);
    }
    cfg.validate()?;
    match task {
        TaskKind::Pose => cmd_pose(&cfg, overrides.stub_gt),
        TaskKind::Subspace => cmd_subspace(&cfg, overrides.dimr_fd, overrides.stub_gt),
        TaskKind::Props => cmd_props(&cfg).map(|(dir, checks)| {
            for c in &checks {
                println!(
                    "{:28} statistic {:>12.5e}  threshold {:>9.1e}  {}",
                    c.name,
                    c.statistic,
                    c.threshold,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            dir
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys_and_missing_seed() {
        let bad = r#"{"task": "pose", "seed": 1, "bogus": 7}"#;
        assert!(matches!(
            ExperimentConfig::from_json(bad),
            Err(CliError::Config(_))
        ));
        let missing_seed = r#"{"task": "pose"}"#;
        assert!(matches!(
            ExperimentConfig::from_json(missing_seed),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn config_minimal_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"task": "props", "seed": 7}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(cfg.pose.is_none());
        let props = cfg.props_section();
        assert_eq!(props.samples, 10_000);
    }

    #[test]
    fn convergence_epoch_reference_cases() {
        assert_eq!(convergence_epoch(&[]), 0);
        assert_eq!(convergence_epoch(&[1.0]), 1);
        // Strictly decreasing then flat: converges where the smoothed curve
        // enters the 1% band of the final smoothed value.
        let mut losses = vec![10.0, 8.0, 6.0, 4.0, 2.0];
        losses.extend(std::iter::repeat(1.0).take(40));
        let epoch = convergence_epoch(&losses);
        assert!(epoch > 5 && epoch < 30, "epoch {epoch}");
        // All-zero curve converges immediately.
        assert_eq!(convergence_epoch(&[0.0, 0.0, 0.0]), 1);
    }

    #[test]
    fn exit_codes_match_contract() {
        assert_eq!(CliError::ChecksFailed(1).exit_code(), 1);
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Io("x".into()).exit_code(), 3);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 4);
    }

    #[test]
    fn fmt_f64_has_17_significant_digits_and_roundtrips() {
        let xs = [0.1, 123456.789, 1e-300, std::f64::consts::PI];
        for &x in &xs {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }
}
