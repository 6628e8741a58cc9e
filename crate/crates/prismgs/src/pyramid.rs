//! Image pyramids and the multi-scale supervision loss.
//!
//! Ground-truth pyramids follow the classic anti-aliasing recipe: each level
//! is the previous one low-pass filtered with a Gaussian and then decimated
//! by 2. Rendered pyramids are produced by rendering at each level's scaled
//! camera and are deliberately *not* blurred — the multi-scale loss must push
//! the primitives themselves to become band-limited.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::gaussian::GaussianPrimitive;
use crate::image_buf::ImageBuffer;
use crate::parallel::{for_each_chunk_mut, sum_indexed};
use crate::real::{fl, Real};
use crate::render::{render_at_level, RenderOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PyramidKind {
    GroundTruth,
    Rendered,
}

/// Stack of progressively half-resolution images, finest first.
#[derive(Debug, Clone)]
pub struct ImagePyramid<T: Real> {
    pub levels: Vec<ImageBuffer<T>>,
    pub sigma: T,
    pub kind: PyramidKind,
}

impl<T: Real> ImagePyramid<T> {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }
}

/// Largest level count <= `requested` keeping the coarsest level >= 8x8.
pub fn effective_levels(width: usize, height: usize, requested: usize) -> usize {
    let mut l = 1;
    while l < requested && (width >> l) >= 8 && (height >> l) >= 8 {
        l += 1;
    }
    l
}

/// Normalized 1D Gaussian kernel of radius ceil(3 sigma).
pub fn gaussian_kernel_1d<T: Real>(sigma: T) -> Result<Vec<T>> {
    if sigma <= T::zero() {
        return Err(Error::InvalidInput(format!(
            "blur sigma must be positive, got {}",
            sigma.to_f64()
        )));
    }
    let radius = (sigma.to_f64() * 3.0).ceil() as i64;
    let inv_two_s2 = T::one() / (fl::<T>(2.0) * sigma * sigma);
    let mut k: Vec<T> = (-radius..=radius)
        .map(|i| {
            let x = fl::<T>(i as f64);
            (-x * x * inv_two_s2).exp()
        })
        .collect();
    let sum: T = k.iter().fold(T::zero(), |a, &b| a + b);
    for v in &mut k {
        *v /= sum;
    }
    Ok(k)
}

/// Separable Gaussian blur with edge replication; dimensions unchanged.
pub fn gaussian_blur<T: Real>(img: &ImageBuffer<T>, sigma: T) -> Result<ImageBuffer<T>> {
    let kernel = gaussian_kernel_1d(sigma)?;
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = (img.width, img.height);
    let row_len = w * 3;

    // Horizontal pass.
    let mut horiz = ImageBuffer::zeros(w, h);
    for_each_chunk_mut(&mut horiz.data, row_len, |y, row| {
        for x in 0..w {
            let mut acc = [T::zero(); 3];
            for (ki, &kv) in kernel.iter().enumerate() {
                let xi = (x as i64 + ki as i64 - radius).clamp(0, w as i64 - 1) as usize;
                let src = img.get(xi, y);
                for c in 0..3 {
                    acc[c] += kv * src[c];
                }
            }
            row[x * 3..x * 3 + 3].copy_from_slice(&acc);
        }
    });

    // Vertical pass.
    let mut out = ImageBuffer::zeros(w, h);
    for_each_chunk_mut(&mut out.data, row_len, |y, row| {
        for x in 0..w {
            let mut acc = [T::zero(); 3];
            for (ki, &kv) in kernel.iter().enumerate() {
                let yi = (y as i64 + ki as i64 - radius).clamp(0, h as i64 - 1) as usize;
                let src = horiz.get(x, yi);
                for c in 0..3 {
                    acc[c] += kv * src[c];
                }
            }
            row[x * 3..x * 3 + 3].copy_from_slice(&acc);
        }
    });
    Ok(out)
}

/// Stride-2 decimation keeping even-index samples; dims floor-halved.
pub fn downsample2<T: Real>(img: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
    if img.width < 2 || img.height < 2 {
        return Err(Error::InvalidInput(format!(
            "cannot downsample {}x{} image",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width / 2, img.height / 2);
    let mut out = ImageBuffer::zeros(w, h);
    for_each_chunk_mut(&mut out.data, w * 3, |y, row| {
        for x in 0..w {
            row[x * 3..x * 3 + 3].copy_from_slice(&img.get(2 * x, 2 * y));
        }
    });
    Ok(out)
}

/// Ground-truth pyramid: level 0 is `img`; level l+1 = decimate(blur(level l)).
///
/// The level count is clamped so the coarsest level stays >= 8x8; callers can
/// compare `num_levels()` against the request to report clamping.
pub fn build_gt_pyramid<T: Real>(
    img: ImageBuffer<T>,
    levels: usize,
    sigma: T,
) -> Result<ImagePyramid<T>> {
    if levels < 1 {
        return Err(Error::InvalidInput("pyramid needs at least one level".into()));
    }
    let l_eff = effective_levels(img.width, img.height, levels);
    let mut out = Vec::with_capacity(l_eff);
    out.push(img);
    for l in 1..l_eff {
        let next = downsample2(&gaussian_blur(&out[l - 1], sigma)?)?;
        out.push(next);
    }
    Ok(ImagePyramid { levels: out, sigma, kind: PyramidKind::GroundTruth })
}

/// Rendered pyramid: each level rendered at that level's scaled camera.
/// No blur — the loss, not a post-filter, supplies the anti-aliasing.
pub fn build_rendered_pyramid<T: Real>(
    gaussians: &[GaussianPrimitive<T>],
    cam: &Camera<T>,
    levels: usize,
    opts: &RenderOptions<T>,
) -> Result<ImagePyramid<T>> {
    if levels < 1 {
        return Err(Error::InvalidInput("pyramid needs at least one level".into()));
    }
    let l_eff = effective_levels(cam.width, cam.height, levels);
    let mut out = Vec::with_capacity(l_eff);
    for l in 0..l_eff {
        out.push(render_at_level(gaussians, cam, l, opts)?.output.image);
    }
    Ok(ImagePyramid {
        levels: out,
        sigma: T::zero(),
        kind: PyramidKind::Rendered,
    })
}

/// Multi-scale supervision loss and its per-level image gradients.
#[derive(Debug, Clone)]
pub struct MssResult<T: Real> {
    pub loss: T,
    /// Gradient w.r.t. the rendered image at level l+1 (level 0 is excluded
    /// from this loss), so `level_grads.len() == L - 1`.
    pub level_grads: Vec<ImageBuffer<T>>,
}

/// loss = sum_{l=1..L-1} w_l * mean|rendered_l - gt_l|.
///
/// Level 0 belongs to the base loss and is excluded here. `weights` has one
/// entry per pyramid level (index 0 unused); `None` means all ones.
pub fn mss_loss<T: Real>(
    rendered: &ImagePyramid<T>,
    gt: &ImagePyramid<T>,
    weights: Option<&[T]>,
) -> Result<MssResult<T>> {
    let l_count = rendered.num_levels();
    if gt.num_levels() != l_count {
        return Err(Error::Contract(format!(
            "pyramid level count mismatch: rendered {} vs gt {}",
            l_count,
            gt.num_levels()
        )));
    }
    if let Some(w) = weights {
        if w.len() != l_count {
            return Err(Error::Contract(format!(
                "expected {} level weights, got {}",
                l_count,
                w.len()
            )));
        }
    }
    let mut loss = T::zero();
    let mut level_grads = Vec::with_capacity(l_count.saturating_sub(1));
    for l in 1..l_count {
        let r = &rendered.levels[l];
        let g = &gt.levels[l];
        if !r.same_shape(g) {
            return Err(Error::Contract(format!(
                "level {l} shape mismatch: {}x{} vs {}x{}",
                r.width, g.width, r.height, g.height
            )));
        }
        let w_l = weights.map_or(T::one(), |w| w[l]);
        let n = <T as Real>::from_usize(r.n_values());
        let sum_abs = sum_indexed(r.n_values(), T::zero(), |i| (r.data[i] - g.data[i]).abs());
        loss += w_l * sum_abs / n;
        let scale = w_l / n;
        let mut grad = ImageBuffer::zeros(r.width, r.height);
        for_each_chunk_mut(&mut grad.data, r.width * 3, |y, row| {
            let base = y * r.width * 3;
            for (i, gv) in row.iter_mut().enumerate() {
                let d = r.data[base + i] - g.data[base + i];
                *gv = if d > T::zero() {
                    scale
                } else if d < T::zero() {
                    -scale
                } else {
                    T::zero()
                };
            }
        });
        level_grads.push(grad);
    }
    Ok(MssResult { loss, level_grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn variance(img: &ImageBuffer<f64>) -> f64 {
        let m = img.mean();
        img.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / img.n_values() as f64
    }

    fn noise_image(w: usize, h: usize, seed: u64) -> ImageBuffer<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = ImageBuffer::zeros(w, h);
        for v in &mut img.data {
            *v = rng.random::<f64>();
        }
        img
    }

    #[test]
    fn kernel_normalized_and_symmetric() {
        let k = gaussian_kernel_1d::<f64>(1.0).unwrap();
        assert_eq!(k.len(), 7); // radius ceil(3)
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() / 2 {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
        let k25 = gaussian_kernel_1d::<f64>(2.5).unwrap();
        assert_eq!(k25.len(), 17); // radius ceil(7.5) = 8
    }

    #[test]
    fn blur_rejects_nonpositive_sigma() {
        let img = ImageBuffer::<f64>::zeros(4, 4);
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn blur_preserves_constant_image() {
        let img = ImageBuffer::constant(12, 9, [0.25f64, 0.5, 0.75]);
        let out = gaussian_blur(&img, 1.3).unwrap();
        for (a, b) in out.data.iter().zip(img.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_impulse_matches_direct_2d_kernel() {
        // Oracle: evaluate the 2D Gaussian directly on the truncated support
        // and normalize; must equal the separable result exactly (within fp).
        let mut img = ImageBuffer::<f64>::zeros(9, 9);
        img.set(4, 4, [1.0, 1.0, 1.0]);
        let out = gaussian_blur(&img, 1.0).unwrap();

        let r = 3i64;
        let mut k2 = vec![0.0f64; 49];
        let mut sum = 0.0;
        for j in -r..=r {
            for i in -r..=r {
                let v = (-((i * i + j * j) as f64) / 2.0).exp();
                k2[((j + r) * 7 + (i + r)) as usize] = v;
                sum += v;
            }
        }
        for (y, j) in (1..=7).zip(-r..=r) {
            for (x, i) in (1..=7).zip(-r..=r) {
                let want = k2[((j + r) * 7 + (i + r)) as usize] / sum;
                let got = out.get(x, y)[0];
                assert!((got - want).abs() < 1e-12, "({x},{y}): {got} vs {want}");
            }
        }
        // Outside the 3-sigma support the impulse response is exactly zero.
        assert_eq!(out.get(0, 4)[0], 0.0);
        assert_eq!(out.get(8, 4)[0], 0.0);
    }

    #[test]
    fn blur_reduces_noise_variance() {
        let img = noise_image(32, 32, 7);
        let out = gaussian_blur(&img, 1.0).unwrap();
        assert!(variance(&out) < variance(&img) * 0.5);
    }

    #[test]
    fn blur_fixes_constants_and_stays_in_range() {
        // Normalized kernel + edge replication: constants are exact fixed
        // points, and every output is a convex combination of inputs.
        let flat = ImageBuffer::constant(17, 9, [0.25f64, 0.5, 0.75]);
        let out = gaussian_blur(&flat, 1.3).unwrap();
        for (a, b) in out.data.iter().zip(flat.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }

        let img = noise_image(64, 64, 11);
        let out = gaussian_blur(&img, 1.0).unwrap();
        let max_in = img.data.iter().cloned().fold(f64::MIN, f64::max);
        let min_in = img.data.iter().cloned().fold(f64::MAX, f64::min);
        for &v in &out.data {
            assert!(v <= max_in + 1e-12 && v >= min_in - 1e-12);
        }
    }

    #[test]
    fn downsample_picks_even_indices() {
        let img = ImageBuffer::from_fn(4, 4, |x, y| [(y * 4 + x) as f64, 0.0, 0.0]);
        let out = downsample2(&img).unwrap();
        assert_eq!((out.width, out.height), (2, 2));
        assert_eq!(out.get(0, 0)[0], 0.0);
        assert_eq!(out.get(1, 0)[0], 2.0);
        assert_eq!(out.get(0, 1)[0], 8.0);
        assert_eq!(out.get(1, 1)[0], 10.0);
    }

    #[test]
    fn downsample_rejects_tiny_images() {
        assert!(downsample2(&ImageBuffer::<f64>::zeros(1, 4)).is_err());
        assert!(downsample2(&ImageBuffer::<f64>::zeros(4, 1)).is_err());
    }

    #[test]
    fn blur_downsample_tracks_analytic_sinusoid() {
        // Low-frequency sinusoid (period 16 px): one blur + decimate step
        // should match continuous Gaussian attenuation exp(-sigma^2 w^2 / 2)
        // evaluated at the subsampled grid, within 2% of full scale.
        let period = 16.0f64;
        let omega = std::f64::consts::TAU / period;
        let img = ImageBuffer::from_fn(64, 64, |x, _| {
            let v = 0.5 + 0.4 * (omega * x as f64).sin();
            [v, v, v]
        });
        let out = downsample2(&gaussian_blur(&img, 1.0).unwrap()).unwrap();
        let atten = (-0.5 * omega * omega).exp();
        for y in 2..out.height - 2 {
            for x in 2..out.width - 2 {
                let want = 0.5 + 0.4 * atten * (omega * (2 * x) as f64).sin();
                let got = out.get(x, y)[0];
                assert!((got - want).abs() < 0.02, "({x},{y}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn gt_pyramid_dimension_chain() {
        let img = ImageBuffer::<f64>::zeros(64, 64);
        let p = build_gt_pyramid(img, 4, 1.0).unwrap();
        let dims: Vec<_> = p.levels.iter().map(|l| (l.width, l.height)).collect();
        assert_eq!(dims, vec![(64, 64), (32, 32), (16, 16), (8, 8)]);
    }

    #[test]
    fn gt_pyramid_single_level_is_input() {
        let img = noise_image(16, 16, 3);
        let p = build_gt_pyramid(img.clone(), 1, 1.0).unwrap();
        assert_eq!(p.num_levels(), 1);
        assert_eq!(p.levels[0].data, img.data);
    }

    #[test]
    fn gt_pyramid_clamps_to_keep_coarsest_8x8() {
        let img = ImageBuffer::<f64>::zeros(64, 64);
        let p = build_gt_pyramid(img, 8, 1.0).unwrap();
        assert_eq!(p.num_levels(), 4); // 64 -> 32 -> 16 -> 8, then stop
        let img = ImageBuffer::<f64>::zeros(64, 32);
        let p = build_gt_pyramid(img, 8, 1.0).unwrap();
        assert_eq!(p.num_levels(), 3); // height chain 32 -> 16 -> 8
    }

    #[test]
    fn checkerboard_level2_is_near_gray() {
        // 2-px checker squares alias badly under naive subsampling but melt
        // into gray once pre-filtered.
        let img = ImageBuffer::from_fn(32, 32, |x, y| {
            let v = if (x / 2 + y / 2) % 2 == 0 { 1.0f64 } else { 0.0 };
            [v, v, v]
        });
        let p = build_gt_pyramid(img.clone(), 3, 1.0).unwrap();
        let level2 = &p.levels[2];
        assert!((level2.mean() - 0.5).abs() < 0.05);

        // Naive chain (no blur) keeps full checker contrast.
        let naive = downsample2(&downsample2(&img).unwrap()).unwrap();
        let energy = |b: &ImageBuffer<f64>| {
            b.data.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / b.n_values() as f64
        };
        assert!(energy(level2) * 10.0 <= energy(&naive));
    }

    #[test]
    fn mss_zero_on_identical_pyramids() {
        let img = noise_image(32, 32, 5);
        let p = build_gt_pyramid(img, 3, 1.0).unwrap();
        let r = mss_loss(&p, &p, None).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.level_grads.iter().all(|g| g.data.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn mss_single_level_is_empty_sum() {
        let img = noise_image(16, 16, 5);
        let p = build_gt_pyramid(img, 1, 1.0).unwrap();
        let r = mss_loss(&p, &p, None).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.level_grads.is_empty());
    }

    #[test]
    fn mss_constant_offset_closed_form() {
        let base = noise_image(32, 32, 9);
        let gt = build_gt_pyramid(base, 2, 1.0).unwrap();
        let mut rendered = gt.clone();
        for v in &mut rendered.levels[1].data {
            *v += 0.1;
        }
        let r = mss_loss(&rendered, &gt, None).unwrap();
        assert!((r.loss - 0.1).abs() < 1e-12);
        let n1 = gt.levels[1].n_values() as f64;
        for &g in &r.level_grads[0].data {
            assert!((g - 1.0 / n1).abs() < 1e-15);
        }
    }

    #[test]
    fn mss_weights_scale_levels() {
        let base = noise_image(32, 32, 13);
        let gt = build_gt_pyramid(base, 3, 1.0).unwrap();
        let mut rendered = gt.clone();
        for l in 1..3 {
            for v in &mut rendered.levels[l].data {
                *v += 0.2;
            }
        }
        let unit = mss_loss(&rendered, &gt, None).unwrap();
        let weighted = mss_loss(&rendered, &gt, Some(&[0.0, 2.0, 0.5])).unwrap();
        assert!((unit.loss - 0.4).abs() < 1e-12);
        assert!((weighted.loss - 0.5).abs() < 1e-12);
        assert!(mss_loss(&rendered, &gt, Some(&[1.0])).is_err());
    }

    #[test]
    fn mss_gradients_match_finite_differences() {
        let gt = build_gt_pyramid(noise_image(32, 32, 21), 3, 1.0).unwrap();
        let mut rendered = build_gt_pyramid(noise_image(32, 32, 22), 3, 1.0).unwrap();
        let base = mss_loss(&rendered, &gt, None).unwrap();
        let eps = 1e-4;
        let mut checked = 0;
        for l in 1..3 {
            for i in (0..rendered.levels[l].n_values()).step_by(37) {
                let diff = rendered.levels[l].data[i] - gt.levels[l].data[i];
                if diff.abs() <= 1e-3 {
                    continue; // skip sign-flip neighborhoods
                }
                let orig = rendered.levels[l].data[i];
                rendered.levels[l].data[i] = orig + eps;
                let hi = mss_loss(&rendered, &gt, None).unwrap().loss;
                rendered.levels[l].data[i] = orig - eps;
                let lo = mss_loss(&rendered, &gt, None).unwrap().loss;
                rendered.levels[l].data[i] = orig;
                let fd = (hi - lo) / (2.0 * eps);
                assert!(
                    (fd - base.level_grads[l - 1].data[i]).abs() < 1e-6,
                    "level {l} value {i}: fd {fd} vs {}",
                    base.level_grads[l - 1].data[i]
                );
                checked += 1;
            }
        }
        assert!(checked > 20);
    }
}
