//! Trains a small model on synthetic scenes, then fuses a multi-focus pair
//! and compares the wavelet pipeline with plain feature averaging.
//!
//! cargo run --release -p wavefuse-core --example synthetic_fusion -- [steps]

use wavefuse_core::fusion::FusionRuleConfig;
use wavefuse_core::metrics::{evaluate_all, METRIC_NAMES};
use wavefuse_core::network::{fuse_images, fuse_images_baseline, train, TrainConfig};
use wavefuse_core::synth::{multi_focus_pair, scene};

fn main() {
    let steps: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(40);
    let images: Vec<_> = (0..16).map(|i| scene(48, 48, i).to_tensor()).collect();
    let config = TrainConfig {
        batch_size: 8,
        epochs: steps,
        image_size: 48,
        max_steps: Some(steps),
        ..TrainConfig::default()
    };
    let outcome = train(&images, &config).expect("training");
    for r in &outcome.history {
        println!("epoch {:3}  loss {:.4}", r.epoch, r.loss.total);
    }

    let pair = multi_focus_pair(48, 48, 99, 2.0);
    let fused = fuse_images(
        &pair.a,
        &pair.b,
        &outcome.weights,
        &FusionRuleConfig::default(),
    )
    .expect("fusion");
    let mean = fuse_images_baseline(&pair.a, &pair.b, &outcome.weights).expect("fusion");
    let d = evaluate_all(&pair.a, &pair.b, &fused).expect("metrics");
    let m = evaluate_all(&pair.a, &pair.b, &mean).expect("metrics");
    println!("{:<10} {:>10} {:>10}", "metric", "dwt", "mean");
    for (name, (x, y)) in METRIC_NAMES
        .iter()
        .zip(d.values().into_iter().zip(m.values()))
    {
        println!("{name:<10} {x:>10.4} {y:>10.4}");
    }
}
