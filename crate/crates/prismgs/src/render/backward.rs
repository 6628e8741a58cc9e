//! Backward pass: from an upstream image gradient to gradients for every
//! Gaussian parameter, for L = sum_p upstream(p) . image(p).
//!
//! Phase A replays compositing per tile back-to-front (recovering each
//! contribution's transmittance from the stored final value) and accumulates
//! gradients w.r.t. each projection's 2D quantities. Tiles are reduced in
//! tile index order, so accumulation is bit-identical for any thread count.
//! Phase B chains 2D gradients through projection, covariance construction,
//! quaternion normalization, and spherical harmonics, independently per
//! Gaussian.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::gaussian::{
    rotation_from_unit_quat, rotation_quat_derivatives, sh_basis, sh_basis_grad,
    GaussianPrimitive, MAX_SH_COEFFS,
};
use crate::image_buf::ImageBuffer;
use crate::parallel::map_indexed;
use crate::real::{fl, Real};

use super::forward::eval_alpha;
use super::project::degree_for_count;
use super::{common_sh_count, RenderContext, TILE_SIZE};

/// Per-parameter gradients, indexed by source Gaussian.
#[derive(Debug, Clone)]
pub struct GaussianGradients<T: Real> {
    pub d_position: Vec<Vector3<T>>,
    pub d_log_scale: Vec<Vector3<T>>,
    pub d_rotation: Vec<Vector4<T>>,
    pub d_opacity_logit: Vec<T>,
    /// Flattened per-coefficient gradients, `sh_stride` entries per Gaussian.
    pub d_sh: Vec<Vector3<T>>,
    pub sh_stride: usize,
    /// Gradient w.r.t. the projected 2D mean, in pixels (densification
    /// statistic; zero for unprojected Gaussians).
    pub d_mean2d: Vec<Vector2<T>>,
    /// True where the Gaussian projected onto the image this pass.
    pub visible: Vec<bool>,
}

impl<T: Real> GaussianGradients<T> {
    pub fn zeros(n: usize, sh_stride: usize) -> Self {
        Self {
            d_position: vec![Vector3::zeros(); n],
            d_log_scale: vec![Vector3::zeros(); n],
            d_rotation: vec![Vector4::zeros(); n],
            d_opacity_logit: vec![T::zero(); n],
            d_sh: vec![Vector3::zeros(); n * sh_stride],
            sh_stride,
            d_mean2d: vec![Vector2::zeros(); n],
            visible: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.d_position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_position.is_empty()
    }

    /// Keeps gradients for the first `n` Gaussians only (used when a list's
    /// tail is frozen context that renders but never updates).
    pub fn truncate(&mut self, n: usize) {
        self.d_position.truncate(n);
        self.d_log_scale.truncate(n);
        self.d_rotation.truncate(n);
        self.d_opacity_logit.truncate(n);
        self.d_sh.truncate(n * self.sh_stride);
        self.d_mean2d.truncate(n);
        self.visible.truncate(n);
    }

    /// Sums `other` into `self` (same scene, e.g. across pyramid levels).
    pub fn accumulate(&mut self, other: &Self) {
        assert_eq!(self.len(), other.len());
        assert_eq!(self.sh_stride, other.sh_stride);
        for i in 0..self.len() {
            self.d_position[i] += other.d_position[i];
            self.d_log_scale[i] += other.d_log_scale[i];
            self.d_rotation[i] += other.d_rotation[i];
            self.d_opacity_logit[i] += other.d_opacity_logit[i];
            self.d_mean2d[i] += other.d_mean2d[i];
            self.visible[i] = self.visible[i] || other.visible[i];
        }
        for (a, b) in self.d_sh.iter_mut().zip(other.d_sh.iter()) {
            *a += b;
        }
    }
}

struct PerVisible<T: Real> {
    source: usize,
    d_position: Vector3<T>,
    d_log_scale: Vector3<T>,
    d_rotation: Vector4<T>,
    d_opacity_logit: T,
    d_sh: [Vector3<T>; MAX_SH_COEFFS],
    d_mean2d: Vector2<T>,
}

/// Slot layout for 2D accumulation per (tile, list entry):
/// [dc_r, dc_g, dc_b, d_opacity, d_mx, d_my, d_s00, d_s01, d_s11].
type Slot2d<T> = [T; 9];

pub fn render_backward<T: Real>(
    ctx: &RenderContext<T>,
    gaussians: &[GaussianPrimitive<T>],
    upstream: &ImageBuffer<T>,
) -> Result<GaussianGradients<T>> {
    if gaussians.len() != ctx.n_gaussians {
        return Err(Error::Contract(format!(
            "backward called with {} gaussians, forward saw {}",
            gaussians.len(),
            ctx.n_gaussians
        )));
    }
    if upstream.width != ctx.cam.width || upstream.height != ctx.cam.height {
        return Err(Error::Contract(format!(
            "upstream gradient is {}x{}, render was {}x{}",
            upstream.width, upstream.height, ctx.cam.width, ctx.cam.height
        )));
    }
    let sh_stride = common_sh_count(gaussians)?;

    // Phase A: per-tile 2D gradients, reduced in tile order.
    let n_vis = ctx.visible.len();
    let tile_grads = map_indexed(ctx.tile_lists.len(), |t| backward_tile(t, ctx, upstream));
    let mut acc2d: Vec<Slot2d<T>> = vec![[T::zero(); 9]; n_vis];
    for (t, tg) in tile_grads.into_iter().enumerate() {
        for (slot, &vi) in tg.iter().zip(&ctx.tile_lists[t]) {
            let a = &mut acc2d[vi as usize];
            for c in 0..9 {
                a[c] += slot[c];
            }
        }
    }

    // Phase B: independent per-Gaussian chains to parameters.
    let per_visible = map_indexed(n_vis, |i| chain_to_parameters(ctx, gaussians, &acc2d[i], i));

    let mut out = GaussianGradients::zeros(gaussians.len(), sh_stride);
    for p in per_visible {
        out.visible[p.source] = true;
        out.d_position[p.source] = p.d_position;
        out.d_log_scale[p.source] = p.d_log_scale;
        out.d_rotation[p.source] = p.d_rotation;
        out.d_opacity_logit[p.source] = p.d_opacity_logit;
        out.d_mean2d[p.source] = p.d_mean2d;
        let base = p.source * sh_stride;
        out.d_sh[base..base + sh_stride].copy_from_slice(&p.d_sh[..sh_stride]);
    }
    Ok(out)
}

fn backward_tile<T: Real>(
    t: usize,
    ctx: &RenderContext<T>,
    upstream: &ImageBuffer<T>,
) -> Vec<Slot2d<T>> {
    let list = &ctx.tile_lists[t];
    let mut grads: Vec<Slot2d<T>> = vec![[T::zero(); 9]; list.len()];
    if list.is_empty() {
        return grads;
    }
    let (w, h) = (ctx.cam.width, ctx.cam.height);
    let x0 = (t % ctx.tiles_x) * TILE_SIZE;
    let y0 = (t / ctx.tiles_x) * TILE_SIZE;
    let tw = (w - x0).min(TILE_SIZE);
    let th = (h - y0).min(TILE_SIZE);
    let half = fl::<T>(0.5);

    for ly in 0..th {
        let py = (y0 + ly) as i64;
        let fy = <T as Real>::from_f64(py as f64);
        for lx in 0..tw {
            let px = (x0 + lx) as i64;
            let fx = <T as Real>::from_f64(px as f64);
            let pix = (y0 + ly) * w + x0 + lx;
            let u = [
                upstream.data[pix * 3],
                upstream.data[pix * 3 + 1],
                upstream.data[pix * 3 + 2],
            ];
            if u[0] == T::zero() && u[1] == T::zero() && u[2] == T::zero() {
                continue;
            }
            let n_end = ctx.range_end[pix] as usize;
            if n_end == 0 {
                continue;
            }
            // Back-to-front replay, recovering each contribution's
            // transmittance from the stored final value.
            let mut t_run = ctx.t_final[pix];
            let mut rear = [T::zero(); 3];
            for k in (0..n_end).rev() {
                let pg = &ctx.visible[list[k] as usize];
                if !pg.bounds.contains(px, py) {
                    continue;
                }
                let (a, g, d, clamped) = eval_alpha(pg, fx, fy);
                if a < ctx.opts.alpha_cutoff {
                    continue;
                }
                let one_minus = T::one() - a;
                let t_i = t_run / one_minus;
                let slot = &mut grads[k];

                let w_ca = a * t_i;
                slot[0] += u[0] * w_ca;
                slot[1] += u[1] * w_ca;
                slot[2] += u[2] * w_ca;

                let u_dot_c = u[0] * pg.color.x + u[1] * pg.color.y + u[2] * pg.color.z;
                let u_dot_rear = u[0] * rear[0] + u[1] * rear[1] + u[2] * rear[2];
                let d_alpha = u_dot_c * t_i - u_dot_rear / one_minus;

                if !clamped {
                    slot[3] += d_alpha * g;
                    let dg = d_alpha * pg.opacity * g;
                    let q = Vector2::new(
                        pg.conic[(0, 0)] * d.x + pg.conic[(0, 1)] * d.y,
                        pg.conic[(0, 1)] * d.x + pg.conic[(1, 1)] * d.y,
                    );
                    slot[4] += dg * q.x;
                    slot[5] += dg * q.y;
                    slot[6] += dg * half * q.x * q.x;
                    slot[7] += dg * half * q.x * q.y;
                    slot[8] += dg * half * q.y * q.y;
                }

                rear[0] += pg.color.x * w_ca;
                rear[1] += pg.color.y * w_ca;
                rear[2] += pg.color.z * w_ca;
                t_run = t_i;
            }
        }
    }
    grads
}

fn chain_to_parameters<T: Real>(
    ctx: &RenderContext<T>,
    gaussians: &[GaussianPrimitive<T>],
    acc: &Slot2d<T>,
    i: usize,
) -> PerVisible<T> {
    let pg = &ctx.visible[i];
    let source = pg.source_index;
    let mut out = PerVisible {
        source,
        d_position: Vector3::zeros(),
        d_log_scale: Vector3::zeros(),
        d_rotation: Vector4::zeros(),
        d_opacity_logit: T::zero(),
        d_sh: [Vector3::zeros(); MAX_SH_COEFFS],
        d_mean2d: Vector2::new(acc[4], acc[5]),
    };
    if acc.iter().all(|&v| v == T::zero()) {
        return out;
    }
    let src = &gaussians[source];
    let cam = &ctx.cam;
    let two = fl::<T>(2.0);

    let d_color = Vector3::new(acc[0], acc[1], acc[2]);
    let d_mean2d = Vector2::new(acc[4], acc[5]);
    let g2 = Matrix2::new(acc[6], acc[7], acc[7], acc[8]);

    // Recompute projection pieces (deterministic, same inputs as forward).
    let norm = src.rotation.norm();
    let qh = src.rotation / norm;
    let r = rotation_from_unit_quat(&qh);
    let s = src.scale();
    let dmat = Matrix3::from_diagonal(&s.map(|v| v * v));
    let sigma_w = r * dmat * r.transpose();
    let m = cam.rotation * sigma_w * cam.rotation.transpose();
    let j = cam.projection_jacobian(&pg.mean_cam);

    // cov2d = J M J^T + dil I, M = W Sigma W^T, Sigma = R D R^T.
    let dm = j.transpose() * g2 * j;
    let d_sigma = cam.rotation.transpose() * dm * cam.rotation;
    let a_mat = r.transpose() * d_sigma * r;
    out.d_log_scale = Vector3::new(
        two * s.x * s.x * a_mat[(0, 0)],
        two * s.y * s.y * a_mat[(1, 1)],
        two * s.z * s.z * a_mat[(2, 2)],
    );
    let dr = d_sigma * r * dmat * two;
    let dq_mats = rotation_quat_derivatives(&qh);
    let mut dqh = Vector4::zeros();
    for k in 0..4 {
        dqh[k] = dr.component_mul(&dq_mats[k]).sum();
    }
    out.d_rotation = (dqh - qh * qh.dot(&dqh)) / norm;

    // Position: pixel-mean path plus the Jacobian's own dependence on the
    // camera-frame mean.
    let mut d_mean_cam = j.transpose() * d_mean2d;
    let dj = g2 * j * m * two;
    let (x, y, z) = (pg.mean_cam.x, pg.mean_cam.y, pg.mean_cam.z);
    let z2 = z * z;
    let z3 = z2 * z;
    d_mean_cam.x += dj[(0, 2)] * (-cam.fx / z2);
    d_mean_cam.y += dj[(1, 2)] * (-cam.fy / z2);
    d_mean_cam.z += dj[(0, 0)] * (-cam.fx / z2)
        + dj[(0, 2)] * (two * cam.fx * x / z3)
        + dj[(1, 1)] * (-cam.fy / z2)
        + dj[(1, 2)] * (two * cam.fy * y / z3);
    out.d_position = cam.rotation.transpose() * d_mean_cam;

    // Spherical harmonics: clamped channels pass no gradient.
    let mut dc = d_color;
    for ch in 0..3 {
        if pg.clamp_mask & (1 << ch) != 0 {
            dc[ch] = T::zero();
        }
    }
    let count = src.sh_coeffs.len();
    let degree = degree_for_count(count);
    let u_vec = src.position - cam.center();
    let dist = u_vec.norm();
    let dir = u_vec / dist;
    let basis = sh_basis(degree, &dir);
    for k in 0..count {
        out.d_sh[k] = dc * basis[k];
    }
    if degree > 0 {
        // View-direction path back to position.
        let bg = sh_basis_grad(degree, &dir);
        let mut ddir = Vector3::zeros();
        for k in 1..count {
            ddir += bg[k] * dc.dot(&src.sh_coeffs[k]);
        }
        out.d_position += (ddir - dir * dir.dot(&ddir)) / dist;
    }

    out.d_opacity_logit = acc[3] * pg.opacity * (T::one() - pg.opacity);
    out
}
