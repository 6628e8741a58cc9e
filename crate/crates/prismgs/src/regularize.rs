//! Physically-grounded Gaussian size regularization.
//!
//! Each camera samples 3D space at interval T = d/f at depth d; the global
//! minimum over training views gives a physical lower bound on how small a
//! Gaussian can be while staying resolvable. Gaussians whose smallest scale
//! axis falls below tau = nyquist_factor * T_min pay a hinge penalty.

use nalgebra::Vector3;

use crate::camera::{Camera, Split};
use crate::error::{Error, Result};
use crate::gaussian::GaussianPrimitive;
use crate::parallel::{map_indexed, sum_indexed};
use crate::real::Real;

/// World-space pixel sampling interval T = d/f at depth `depth`.
pub fn pixel_sampling_interval<T: Real>(depth: T, focal: T) -> Result<T> {
    if depth <= T::zero() || focal <= T::zero() {
        return Err(Error::InvalidInput(format!(
            "sampling interval needs positive depth and focal, got d={} f={}",
            depth.to_f64(),
            focal.to_f64()
        )));
    }
    Ok(depth / focal)
}

/// The frozen size bound for a training run.
#[derive(Debug, Clone)]
pub struct SamplingBound<T: Real> {
    /// (camera id, T = d_min / f_eff), one entry per training camera that
    /// sees at least one point.
    pub per_camera_t: Vec<(u32, T)>,
    pub t_min: T,
    pub tau_size: T,
}

/// Computes the per-camera sampling intervals from the initial point cloud
/// and freezes tau = nyquist_factor * T_min.
///
/// Per training camera: d_min = max(near_clamp, smallest positive depth of
/// a point projecting inside the image), f_eff = min(fx, fy). A point is
/// inside when its continuous pixel coordinate lands within the image
/// rectangle [-0.5, dim - 0.5).
pub fn compute_sampling_bound<T: Real>(
    cameras: &[Camera<T>],
    points: &[Vector3<T>],
    near_clamp: T,
    nyquist_factor: T,
) -> Result<SamplingBound<T>> {
    if nyquist_factor <= T::zero() {
        return Err(Error::InvalidInput("nyquist factor must be positive".into()));
    }
    let train: Vec<&Camera<T>> = cameras.iter().filter(|c| c.split == Split::Train).collect();
    if train.is_empty() {
        return Err(Error::InvalidInput("no training cameras".into()));
    }
    let half = <T as Real>::from_f64(0.5);
    let per_camera: Vec<Option<(u32, T)>> = map_indexed(train.len(), |ci| {
        let cam = train[ci];
        let mut d_min: Option<T> = None;
        for p in points {
            let p_cam = cam.world_to_camera(p);
            if !(p_cam.z > T::zero()) {
                continue;
            }
            let px = cam.cam_to_pixel(&p_cam);
            if px.x < -half
                || px.y < -half
                || px.x >= <T as Real>::from_usize(cam.width) - half
                || px.y >= <T as Real>::from_usize(cam.height) - half
            {
                continue;
            }
            d_min = Some(match d_min {
                Some(d) => d.min(p_cam.z),
                None => p_cam.z,
            });
        }
        d_min.map(|d| {
            let f_eff = cam.fx.min(cam.fy);
            (cam.id, d.max(near_clamp) / f_eff)
        })
    });
    let per_camera_t: Vec<(u32, T)> = per_camera.into_iter().flatten().collect();
    let Some(t_min) = per_camera_t
        .iter()
        .map(|&(_, t)| t)
        .min_by(|a, b| a.partial_cmp(b).expect("finite sampling intervals"))
    else {
        return Err(Error::Config(
            "no training camera sees any initial point; set tau_size manually".into(),
        ));
    };
    Ok(SamplingBound { per_camera_t, t_min, tau_size: nyquist_factor * t_min })
}

/// Hinge size loss sum_i max(0, tau - min(s_i)) and its gradient w.r.t.
/// log_scale (nonzero only on the arg-min axis; ties go to the lowest axis
/// index; the hinge is inactive at exactly min(s) = tau).
///
/// `normalize` divides by the Gaussian count (off by default: the raw sum
/// matches the published weighting).
pub fn size_loss<T: Real>(
    gaussians: &[GaussianPrimitive<T>],
    tau_size: T,
    normalize: bool,
) -> Result<(T, Vec<Vector3<T>>)> {
    if tau_size <= T::zero() {
        return Err(Error::InvalidInput(format!(
            "tau_size must be positive, got {}",
            tau_size.to_f64()
        )));
    }
    let scale = if normalize && !gaussians.is_empty() {
        T::one() / <T as Real>::from_usize(gaussians.len())
    } else {
        T::one()
    };
    let loss = sum_indexed(gaussians.len(), T::zero(), |i| {
        let (_, s_min) = min_scale_axis(&gaussians[i]);
        (tau_size - s_min).max(T::zero())
    }) * scale;
    let grads = map_indexed(gaussians.len(), |i| {
        let (axis, s_min) = min_scale_axis(&gaussians[i]);
        let mut g = Vector3::zeros();
        if s_min < tau_size {
            // d/d log_s of -exp(log_s) on the arg-min axis.
            g[axis] = -s_min * scale;
        }
        g
    });
    Ok((loss, grads))
}

fn min_scale_axis<T: Real>(g: &GaussianPrimitive<T>) -> (usize, T) {
    let s = g.scale();
    let mut axis = 0;
    let mut s_min = s[0];
    for a in 1..3 {
        if s[a] < s_min {
            axis = a;
            s_min = s[a];
        }
    }
    (axis, s_min)
}
