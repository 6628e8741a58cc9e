//! Held-out evaluation: PSNR, SSIM, and the cross-scale consistency error.

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::Result;
use crate::gaussian::GaussianPrimitive;
use crate::image_buf::ImageBuffer;
use crate::loss::{psnr, ssim};
use crate::pyramid::{downsample2, gaussian_blur};
use crate::real::{fl, Real};
use crate::render::{render, render_at_level, RenderOptions};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CameraMetrics {
    pub camera_id: u32,
    pub split: String,
    pub psnr: f64,
    pub ssim: f64,
    /// Cross-scale consistency error E: mean L1 between the blurred,
    /// 2x-downsampled full render and a direct half-resolution render.
    /// Lower is better; proxies aliasing across scales.
    pub cross_scale_e: f64,
}

/// E = meanL1(downsample2(blur(render @ full)), render @ half).
pub fn cross_scale_error<T: Real>(
    gaussians: &[GaussianPrimitive<T>],
    cam: &Camera<T>,
    opts: &RenderOptions<T>,
    sigma: f64,
) -> Result<T> {
    let full = render(gaussians, cam, opts)?.output.image.clamped01();
    let filtered = downsample2(&gaussian_blur(&full, fl(sigma))?)?;
    let half = render_at_level(gaussians, cam, 1, opts)?.output.image.clamped01();
    filtered.mean_abs_diff(&half)
}

pub fn evaluate_camera<T: Real>(
    gaussians: &[GaussianPrimitive<T>],
    cam: &Camera<T>,
    gt: &ImageBuffer<T>,
    opts: &RenderOptions<T>,
    sigma: f64,
) -> Result<CameraMetrics> {
    let rendered = render(gaussians, cam, opts)?.output.image.clamped01();
    let psnr_db = psnr(&rendered, gt)?;
    let ssim_val = ssim(&rendered, gt)?.value;
    let e = cross_scale_error(gaussians, cam, opts, sigma)?;
    Ok(CameraMetrics {
        camera_id: cam.id,
        split: cam.split.as_str().to_string(),
        psnr: psnr_db.to_f64(),
        ssim: ssim_val.to_f64(),
        cross_scale_e: e.to_f64(),
    })
}
