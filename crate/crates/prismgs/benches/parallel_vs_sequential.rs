//! Compares the rayon-parallel core against the sequential fallback on the
//! hot kernels: forward render, backward render, pyramid blur, and SSIM.
//! Run with `cargo bench` (the `parallel` feature is required so both modes
//! exist in one binary; the sequential rows flip the runtime toggle).

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{Matrix3, Vector3, Vector4};
use prismgs::camera::{Camera, Split};
use prismgs::gaussian::GaussianPrimitive;
use prismgs::image_buf::ImageBuffer;
use prismgs::loss::ssim;
use prismgs::parallel::force_sequential;
use prismgs::pyramid::gaussian_blur;
use prismgs::render::{render, render_backward, RenderOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn camera(width: usize, height: usize) -> Camera<f32> {
    Camera {
        id: 0,
        fx: width as f32,
        fy: width as f32,
        cx: (width as f32 - 1.0) / 2.0,
        cy: (height as f32 - 1.0) / 2.0,
        width,
        height,
        rotation: Matrix3::identity(),
        translation: Vector3::zeros(),
        split: Split::Train,
        image_path: String::new(),
    }
}

fn field(n: usize) -> Vec<GaussianPrimitive<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    (0..n)
        .map(|_| GaussianPrimitive {
            position: Vector3::new(
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.6..0.6),
                rng.random_range(1.5..3.0),
            ),
            log_scale: Vector3::new(
                rng.random_range(-3.2..-1.8),
                rng.random_range(-3.2..-1.8),
                rng.random_range(-3.2..-1.8),
            ),
            rotation: Vector4::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ),
            opacity_logit: rng.random_range(0.0..2.0),
            sh_coeffs: vec![Vector3::new(
                rng.random_range(-0.5..1.5),
                rng.random_range(-0.5..1.5),
                rng.random_range(-0.5..1.5),
            )],
        })
        .collect()
}

fn bench_modes<F: FnMut()>(c: &mut Criterion, name: &str, mut f: F) {
    let mut group = c.benchmark_group(name);
    group.sample_size(20);
    for (label, seq) in [("parallel", false), ("sequential", true)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &seq, |b, &seq| {
            force_sequential(seq);
            b.iter(&mut f);
        });
    }
    group.finish();
    force_sequential(false);
}

fn benches(c: &mut Criterion) {
    let cam = camera(160, 120);
    let gaussians = field(300);
    let opts = RenderOptions::default();

    bench_modes(c, "render_forward", || {
        black_box(render(&gaussians, &cam, &opts).unwrap());
    });

    let rendered = render(&gaussians, &cam, &opts).unwrap();
    let upstream = ImageBuffer::constant(cam.width, cam.height, 1.0f32 / 3.0);
    bench_modes(c, "render_backward", || {
        black_box(render_backward(&rendered.context, &gaussians, &upstream).unwrap());
    });

    let img = rendered.output.image.clamped01();
    bench_modes(c, "gaussian_blur", || {
        black_box(gaussian_blur(&img, 1.0f32).unwrap());
    });

    let gt = ImageBuffer::constant(cam.width, cam.height, 0.5f32);
    bench_modes(c, "ssim", || {
        black_box(ssim(&img, &gt).unwrap());
    });
}

criterion_group!(modes, benches);
criterion_main!(modes);
