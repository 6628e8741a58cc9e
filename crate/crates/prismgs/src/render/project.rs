//! Gaussian-to-screen projection.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::camera::Camera;
use crate::gaussian::{rotation_from_unit_quat, sh_basis, GaussianPrimitive};
use crate::real::{fl, sigmoid, Real};

use super::{Footprint, RenderOptions};

/// Inclusive integer pixel bounds of the 3-sigma screen-space ellipse AABB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBounds {
    pub x_lo: i64,
    pub x_hi: i64,
    pub y_lo: i64,
    pub y_hi: i64,
}

impl PixelBounds {
    pub fn contains(&self, px: i64, py: i64) -> bool {
        px >= self.x_lo && px <= self.x_hi && py >= self.y_lo && py <= self.y_hi
    }

    fn misses_image(&self, width: usize, height: usize) -> bool {
        self.x_hi < 0 || self.y_hi < 0 || self.x_lo >= width as i64 || self.y_lo >= height as i64
    }
}

/// A Gaussian after projection, with quantities cached for compositing and
/// the backward chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGaussian<T: Real> {
    pub mean2d: Vector2<T>,
    /// 2D covariance including the low-pass dilation.
    pub cov2d: Matrix2<T>,
    /// Inverse of `cov2d`.
    pub conic: Matrix2<T>,
    /// Camera-frame depth (the d in the sampling interval T = d/f).
    pub depth: T,
    /// View-dependent color, clamped to >= 0 per channel.
    pub color: Vector3<T>,
    pub opacity: T,
    pub source_index: usize,
    pub bounds: PixelBounds,
    /// Camera-frame mean, retained for the projection backward chain.
    pub mean_cam: Vector3<T>,
    /// Bit c set when color channel c was clamped at zero (gradient mask).
    pub clamp_mask: u8,
}

#[derive(Debug, Clone)]
pub enum ProjectOutcome<T: Real> {
    Visible(Box<ProjectedGaussian<T>>),
    Culled,
    /// Pre-dilation 2D covariance had a non-positive determinant.
    Degenerate,
}

/// Evaluates SH color without re-validating the coefficient count.
/// Returns the clamped color and a per-channel clamp bitmask.
pub(crate) fn sh_color_raw<T: Real>(
    degree: usize,
    coeffs: &[Vector3<T>],
    dir: &Vector3<T>,
) -> (Vector3<T>, u8) {
    let basis = sh_basis(degree, dir);
    let mut c = Vector3::repeat(fl::<T>(0.5));
    for (k, coeff) in coeffs.iter().enumerate() {
        c += coeff * basis[k];
    }
    let mut mask = 0u8;
    for ch in 0..3 {
        if c[ch] < T::zero() {
            mask |= 1 << ch;
            c[ch] = T::zero();
        }
    }
    (c, mask)
}

pub(crate) fn degree_for_count(count: usize) -> usize {
    match count {
        1 => 0,
        4 => 1,
        9 => 2,
        _ => 3,
    }
}

/// Projects one Gaussian through `cam`.
///
/// Culled when the depth is at or behind the near plane or (in AABB
/// footprint mode) the 3-sigma screen ellipse misses the image; degenerate
/// when the pre-dilation 2D covariance determinant is not positive.
pub fn project_gaussian<T: Real>(
    g: &GaussianPrimitive<T>,
    cam: &Camera<T>,
    opts: &RenderOptions<T>,
) -> ProjectOutcome<T> {
    let mean_cam = cam.world_to_camera(&g.position);
    if !(mean_cam.z > opts.near_plane) || !mean_cam.z.is_finite() {
        return ProjectOutcome::Culled;
    }

    // World covariance from the (normalized) quaternion and exp(log_scale).
    let norm = g.rotation.norm();
    if !(norm > T::zero()) || !norm.is_finite() {
        return ProjectOutcome::Degenerate;
    }
    let rot = rotation_from_unit_quat(&(g.rotation / norm));
    let scale = g.scale();
    if scale.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
        return ProjectOutcome::Degenerate;
    }
    let sigma_w = rot * Matrix3::from_diagonal(&scale.map(|s| s * s)) * rot.transpose();

    // cov2d = J W Sigma W^T J^T + dilation I.
    let j = cam.projection_jacobian(&mean_cam);
    let m = cam.rotation * sigma_w * cam.rotation.transpose();
    let cov_raw = j * m * j.transpose();
    let det_raw = cov_raw.determinant();
    if !(det_raw > T::zero()) {
        return ProjectOutcome::Degenerate;
    }
    let cov2d = cov_raw + Matrix2::from_diagonal_element(opts.dilation);
    let det = cov2d.determinant();
    let conic = Matrix2::new(
        cov2d[(1, 1)] / det,
        -cov2d[(0, 1)] / det,
        -cov2d[(0, 1)] / det,
        cov2d[(0, 0)] / det,
    );

    let mean2d = cam.cam_to_pixel(&mean_cam);
    if !mean2d.x.is_finite() || !mean2d.y.is_finite() {
        return ProjectOutcome::Culled;
    }

    let bounds = match opts.footprint {
        Footprint::Aabb3Sigma => {
            let b = pixel_bounds(&mean2d, &cov2d);
            if b.misses_image(cam.width, cam.height) {
                return ProjectOutcome::Culled;
            }
            b
        }
        Footprint::Full => PixelBounds {
            x_lo: 0,
            x_hi: cam.width as i64 - 1,
            y_lo: 0,
            y_hi: cam.height as i64 - 1,
        },
    };

    let dir = (g.position - cam.center()).normalize();
    let (color, clamp_mask) = sh_color_raw(degree_for_count(g.sh_coeffs.len()), &g.sh_coeffs, &dir);

    ProjectOutcome::Visible(Box::new(ProjectedGaussian {
        mean2d,
        cov2d,
        conic,
        depth: mean_cam.z,
        color,
        opacity: sigmoid(g.opacity_logit),
        source_index: 0, // filled by the caller
        bounds,
        mean_cam,
        clamp_mask,
    }))
}

/// Integer AABB of the 3-sigma ellipse: radius = 3 sqrt(lambda_max) of the
/// dilated covariance. All renderers (tiled and naive) share this rule.
pub fn pixel_bounds<T: Real>(mean2d: &Vector2<T>, cov2d: &Matrix2<T>) -> PixelBounds {
    let a = cov2d[(0, 0)];
    let b = cov2d[(0, 1)];
    let c = cov2d[(1, 1)];
    let half = fl::<T>(0.5);
    let mid = (a + c) * half;
    let disc = ((a - c) * (a - c) * fl::<T>(0.25) + b * b).max(T::zero()).sqrt();
    let lambda_max = (mid + disc).max(T::zero());
    let r = fl::<T>(3.0) * lambda_max.sqrt();
    PixelBounds {
        x_lo: (mean2d.x - r).floor().to_f64() as i64,
        x_hi: (mean2d.x + r).ceil().to_f64() as i64,
        y_lo: (mean2d.y - r).floor().to_f64() as i64,
        y_hi: (mean2d.y + r).ceil().to_f64() as i64,
    }
}
