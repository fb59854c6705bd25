//! Diagnostic: train on a restricted range and evaluate on the SAME range
//! (held-out samples), isolating in-distribution fit from extrapolation.

use demr::liegroups::Tag;
use demr::net::{
    adam_step, loss_and_grad, AdamParams, Batch, LossMode, OptimizerState, RegressorParams,
};
use demr::rng::Rng;
use demr::tasks::{evaluate_pose, gen_pose_dataset, make_pose_items, PoseDataConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let fraction: f64 = args.get(1).map_or(0.2, |s| s.parse().unwrap());
    let iterations: usize = args.get(2).map_or(2000, |s| s.parse().unwrap());
    let lr: f64 = args.get(3).map_or(3e-3, |s| s.parse().unwrap());
    let enc: Vec<usize> = args.get(4).map_or_else(
        || vec![64],
        |s| s.split(',').map(|w| w.parse().unwrap()).collect(),
    );
    let head: Vec<usize> = args.get(5).map_or_else(
        || vec![128, 96],
        |s| s.split(',').map(|w| w.parse().unwrap()).collect(),
    );
    let scale: Option<[f64; 3]> = args.get(6).map(|s| {
        let v: Vec<f64> = s.split(',').map(|w| w.parse().unwrap()).collect();
        [v[0], v[1], v[2]]
    });

    let data_cfg = PoseDataConfig {
        points: 256,
        train_count: 1024,
        test_count: 256,
        mode: demr::liegroups::SampleMode::So3,
        fraction,
        cloud_csv: None,
        cloud_scale: scale,
        cloud_spikes: 0,
        spike_factor: 3.0,
        range_style: demr::tasks::RangeStyle::Symmetric,
        point_noise: 0.0,
    };

    println!("in-distribution diagnostic: fraction {fraction}, {iterations} iters, lr {lr}, enc {enc:?}, head {head:?}, scale {scale:?}");
    for tag in [Tag::Euler3, Tag::Sixd6, Tag::Nine9] {
        let mut rng = Rng::with_stream(0, 1);
        let (train, _) = gen_pose_dataset(&data_cfg, &mut rng).unwrap();
        // In-distribution split: last 256 training-range samples held out.
        let (fit, holdout) = train.split_at(768);
        let items = make_pose_items(fit, tag).unwrap();

        let mut init_rng = Rng::with_stream(0, 2);
        let mut params = RegressorParams::new_pose(tag, &enc, &head, &mut init_rng).unwrap();
        let mut state = OptimizerState::new(
            &params,
            AdamParams {
                lr,
                ..AdamParams::default()
            },
        );
        let mut batch_rng = Rng::with_stream(0, 3);
        let mut first_loss = 0.0;
        let mut last_loss = 0.0;
        for it in 0..iterations {
            let start = (batch_rng.below((items.len() - 32) as u64)) as usize;
            let (loss, grads) =
                loss_and_grad(&params, Batch::Pose(&items[start..start + 32]), LossMode::DemrExtrinsic)
                    .unwrap();
            adam_step(&mut params, &grads, &mut state).unwrap();
            if it == 0 {
                first_loss = loss;
            }
            last_loss = loss;
        }
        let eval = evaluate_pose(&params, holdout, tag).unwrap();
        println!(
            "{:8} loss {:.5} -> {:.5}   holdout rot avg {:>8.3} deg, med {:>8.3}, trans {:.4}",
            tag.name(),
            first_loss,
            last_loss,
            eval.rotation_deg.avg,
            eval.rotation_deg.median,
            eval.translation.avg
        );
    }
}
