//! Generalization sweep on the pose task: train each rotation
//! representation on a restricted rotation range and evaluate on the full
//! range, mirroring the fraction sweep of the original experiment.
//!
//! Usage: `cargo run --release --example pose_generalization -- [fraction] [seed] [iterations]`

use demr::cli::{run_pose_experiment, PoseExperimentConfig};
use demr::liegroups::Tag;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let fraction: f64 = args.get(1).map_or(0.2, |s| s.parse().unwrap());
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().unwrap());
    let iterations: usize = args.get(3).map_or(2000, |s| s.parse().unwrap());
    let lr: f64 = args.get(4).map_or(1e-3, |s| s.parse().unwrap());
    let parse_widths = |s: &String| -> Vec<usize> {
        s.split(',')
            .filter(|w| !w.is_empty())
            .map(|w| w.parse().unwrap())
            .collect()
    };
    let widths: Vec<usize> = args.get(5).map_or_else(|| vec![32, 64], parse_widths);
    let head: Vec<usize> = args.get(6).map_or_else(|| vec![64], parse_widths);
    let scale: Option<[f64; 3]> = args.get(7).and_then(|s| {
        let v: Vec<f64> = s
            .split(',')
            .filter(|w| !w.is_empty())
            .map(|w| w.parse().unwrap())
            .collect();
        (v.len() == 3).then(|| [v[0], v[1], v[2]])
    });
    let style = match args.get(8).map(String::as_str) {
        Some("one_sided") => demr::tasks::RangeStyle::OneSided,
        _ => demr::tasks::RangeStyle::Symmetric,
    };
    let parse_act = |s: &str| match s {
        "linear" => demr::net::Activation::Linear,
        "tanh" => demr::net::Activation::Tanh,
        _ => demr::net::Activation::Relu,
    };
    let enc_act = parse_act(args.get(9).map_or("relu", String::as_str));
    let trunk_act = parse_act(args.get(10).map_or("tanh", String::as_str));
    let train_count: usize = args.get(11).map_or(1024, |s| s.parse().unwrap());
    let spikes: usize = args.get(12).map_or(0, |s| s.parse().unwrap());
    let spike_factor: f64 = args.get(13).map_or(3.0, |s| s.parse().unwrap());
    let batch: usize = args.get(14).map_or(32, |s| s.parse().unwrap());

    println!("fraction {fraction}, seed {seed}, {iterations} iterations, lr {lr}, enc {widths:?}, head {head:?}, scale {scale:?}, style {style:?}");
    println!("{:8} {:>12} {:>12} {:>12}", "tag", "rot_avg_deg", "rot_med_deg", "trans_avg");
    for tag in [Tag::Euler3, Tag::Axis3, Tag::Sixd6, Tag::Nine9] {
        let mut cfg = PoseExperimentConfig::default();
        cfg.tag = tag;
        cfg.data.fraction = fraction;
        cfg.iterations = iterations;
        cfg.lr = lr;
        cfg.encoder_widths = widths.clone();
        cfg.head_widths = head.clone();
        cfg.data.cloud_scale = scale;
        cfg.data.range_style = style;
        cfg.encoder_activation = enc_act;
        cfg.trunk_activation = trunk_act;
        cfg.data.train_count = train_count;
        cfg.data.cloud_spikes = spikes;
        cfg.data.spike_factor = spike_factor;
        cfg.batch = batch;
        let started = std::time::Instant::now();
        let outcome = run_pose_experiment(&cfg, seed, false).expect("experiment failed");
        println!(
            "{:8} {:>12.3} {:>12.3} {:>12.4}   ({:.1}s, converged at {})",
            tag.name(),
            outcome.eval.rotation_deg.avg,
            outcome.eval.rotation_deg.median,
            outcome.eval.translation.avg,
            started.elapsed().as_secs_f64(),
            outcome.convergence_epoch,
        );
    }
}
