//! Scratch probe: PSNR of the generating truth vs the stored ground truth
//! (the model-capacity ceiling of the dataset). Deleted before release.

use prismgs::loss::psnr;
use prismgs::render::{render, RenderOptions};
use prismgs::scene::{generate_synthetic_scene, SceneFamily, SyntheticSpec};

fn main() {
    for ss in [1usize, 2, 4] {
        let mut spec = SyntheticSpec::new(SceneFamily::CheckerboardPlane);
        spec.supersample = ss;
        let scene = generate_synthetic_scene::<f64>(&spec).unwrap();
        let opts = RenderOptions::default();
        let mut vals = Vec::new();
        for (cam, gt) in scene.dataset.cameras.iter().zip(&scene.dataset.images) {
            let img = render(&scene.truth, cam, &opts).unwrap().output.image.clamped01();
            vals.push(psnr(&img, gt).unwrap());
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        eprintln!("supersample {ss}: truth-render PSNR mean {mean:.2} dB, min {min:.2} dB");
    }
}
