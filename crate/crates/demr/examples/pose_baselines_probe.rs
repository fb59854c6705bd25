//! Reference errors of trivial predictors on the full-range test
//! distribution (mode so3): identity rotation, and the mean angle itself.

use demr::liegroups::{dist_geodesic_so3, RotationMatrix, SampleMode};
use demr::rng::Rng;
use demr::tasks::{gen_pose_dataset, PoseDataConfig, DEG_PER_RAD};

fn main() {
    let cfg = PoseDataConfig {
        points: 8,
        train_count: 1,
        test_count: 4096,
        mode: SampleMode::So3,
        fraction: 1.0,
        cloud_csv: None,
        cloud_scale: None,
        cloud_spikes: 0,
        spike_factor: 3.0,
        range_style: demr::tasks::RangeStyle::Symmetric,
        point_noise: 0.0,
    };
    let mut rng = Rng::with_stream(0, 1);
    let (_, test) = gen_pose_dataset(&cfg, &mut rng).unwrap();
    let id = RotationMatrix::identity();
    let mean_angle: f64 = test
        .iter()
        .map(|s| dist_geodesic_so3(&s.gt.rot, &id))
        .sum::<f64>()
        / test.len() as f64;
    println!("identity-predictor mean rotation error: {:.2} deg", mean_angle * DEG_PER_RAD);

    // Random predictor: pair up shuffled ground truths.
    let mut err = 0.0;
    for i in 0..test.len() - 1 {
        err += dist_geodesic_so3(&test[i].gt.rot, &test[i + 1].gt.rot);
    }
    println!(
        "random-predictor mean rotation error: {:.2} deg",
        err / (test.len() - 1) as f64 * DEG_PER_RAD
    );
}
