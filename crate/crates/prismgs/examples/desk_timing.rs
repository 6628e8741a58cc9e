//! Scratch tuning probe for the desk-profile checkerboard run (deleted
//! before release).

use prismgs::scene::{generate_synthetic_scene, SceneFamily, SyntheticSpec};
use prismgs::train::{train_scene, TrainConfig};
use std::time::Instant;

fn main() {
    let iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let thresh: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(6e-3);
    let ss: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(4);

    let mut spec = SyntheticSpec::new(SceneFamily::CheckerboardPlane);
    spec.supersample = ss;
    let scene = generate_synthetic_scene::<f64>(&spec).unwrap();

    let config = TrainConfig {
        iterations: iters,
        densify_until_iter: 2500.min(iters / 2),
        densify_grad_threshold: thresh,
        seed: 42,
        ..TrainConfig::desk()
    };
    let t0 = Instant::now();
    let result = train_scene(&scene.dataset, &config).unwrap();
    let dt = t0.elapsed();
    let psnr = |split: &str| {
        let v: Vec<f64> = result
            .report
            .final_metrics
            .iter()
            .filter(|m| m.split == split)
            .map(|m| m.psnr)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    eprintln!(
        "ss {ss} thresh {thresh:.1e}: {iters} iters in {:.1}s, count {}, events {}, train {:.2} dB, test {:.2} dB",
        dt.as_secs_f64(),
        result.report.final_count,
        result.report.events.len(),
        psnr("train"),
        psnr("test")
    );
}
