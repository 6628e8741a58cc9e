//! Reconstruction losses and evaluation metrics.
//!
//! All image losses are mean-normalized so weights transfer across
//! resolutions. SSIM uses the reference 11x11 Gaussian window (sigma 1.5,
//! C1 = 0.01^2, C2 = 0.03^2) with valid (no-pad) window placement, and
//! returns an analytic gradient with respect to the first argument.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_buf::ImageBuffer;
use crate::parallel::{map_indexed, sum_indexed};
use crate::real::{fl, Real};

/// Mean absolute error and its gradient w.r.t. `a`.
pub fn l1_image_loss<T: Real>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<(T, ImageBuffer<T>)> {
    if !a.same_shape(b) {
        return Err(Error::Contract(format!(
            "l1 shape mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let n = a.n_values();
    let inv_n = T::one() / <T as Real>::from_usize(n);
    let loss = sum_indexed(n, T::zero(), |i| (a.data[i] - b.data[i]).abs()) * inv_n;
    let mut grad = ImageBuffer::zeros(a.width, a.height);
    for (g, (&av, &bv)) in grad.data.iter_mut().zip(a.data.iter().zip(b.data.iter())) {
        let d = av - bv;
        *g = if d > T::zero() {
            inv_n
        } else if d < T::zero() {
            -inv_n
        } else {
            T::zero()
        };
    }
    Ok((loss, grad))
}

const SSIM_RADIUS: usize = 5;
const SSIM_WINDOW: usize = 2 * SSIM_RADIUS + 1;

fn ssim_window<T: Real>() -> [T; SSIM_WINDOW] {
    let sigma = 1.5f64;
    let mut k = [T::zero(); SSIM_WINDOW];
    let mut sum = 0.0f64;
    let mut raw = [0.0f64; SSIM_WINDOW];
    for (i, r) in raw.iter_mut().enumerate() {
        let x = i as f64 - SSIM_RADIUS as f64;
        *r = (-x * x / (2.0 * sigma * sigma)).exp();
        sum += *r;
    }
    for i in 0..SSIM_WINDOW {
        k[i] = fl(raw[i] / sum);
    }
    k
}

/// Horizontal valid correlation: out(u, y) = sum_i k[i] src(u+i, y).
fn valid_h<T: Real>(src: &[T], w: usize, h: usize, k: &[T; SSIM_WINDOW]) -> Vec<T> {
    let wm = w - SSIM_WINDOW + 1;
    let rows = map_indexed(h, |y| {
        let mut row = vec![T::zero(); wm];
        for (u, out) in row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * src[y * w + u + i];
            }
            *out = acc;
        }
        row
    });
    rows.concat()
}

/// Vertical valid correlation: out(x, u) = sum_i k[i] src(x, u+i).
fn valid_v<T: Real>(src: &[T], w: usize, h: usize, k: &[T; SSIM_WINDOW]) -> Vec<T> {
    let hm = h - SSIM_WINDOW + 1;
    let rows = map_indexed(hm, |u| {
        let mut row = vec![T::zero(); w];
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * src[(u + i) * w + x];
            }
            *out = acc;
        }
        row
    });
    rows.concat()
}

/// Adjoint of `valid_h`: scatters a (w - 10) x h map back to w x h.
fn adjoint_h<T: Real>(map: &[T], wm: usize, h: usize, k: &[T; SSIM_WINDOW]) -> Vec<T> {
    let w = wm + SSIM_WINDOW - 1;
    let rows = map_indexed(h, |y| {
        let mut row = vec![T::zero(); w];
        for (x, out) in row.iter_mut().enumerate() {
            let i_lo = (x + 1).saturating_sub(wm);
            let i_hi = x.min(SSIM_WINDOW - 1);
            let mut acc = T::zero();
            for i in i_lo..=i_hi {
                acc += k[i] * map[y * wm + (x - i)];
            }
            *out = acc;
        }
        row
    });
    rows.concat()
}

/// Adjoint of `valid_v`: scatters a w x (h - 10) map back to w x h.
fn adjoint_v<T: Real>(map: &[T], w: usize, hm: usize, k: &[T; SSIM_WINDOW]) -> Vec<T> {
    let h = hm + SSIM_WINDOW - 1;
    let rows = map_indexed(h, |y| {
        let mut row = vec![T::zero(); w];
        let i_lo = (y + 1).saturating_sub(hm);
        let i_hi = y.min(SSIM_WINDOW - 1);
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for i in i_lo..=i_hi {
                acc += k[i] * map[(y - i) * w + x];
            }
            *out = acc;
        }
        row
    });
    rows.concat()
}

fn valid_corr<T: Real>(src: &[T], w: usize, h: usize, k: &[T; SSIM_WINDOW]) -> Vec<T> {
    let hm = h - SSIM_WINDOW + 1;
    let tmp = valid_v(src, w, h, k);
    valid_h(&tmp, w, hm, k)
}

fn adjoint_corr<T: Real>(map: &[T], wm: usize, hm: usize, k: &[T; SSIM_WINDOW]) -> Vec<T> {
    let tmp = adjoint_h(map, wm, hm, k);
    let w = wm + SSIM_WINDOW - 1;
    adjoint_v(&tmp, w, hm, k)
}

fn channel_plane<T: Real>(img: &ImageBuffer<T>, c: usize) -> Vec<T> {
    (0..img.width * img.height).map(|p| img.data[p * 3 + c]).collect()
}

pub struct SsimResult<T: Real> {
    pub value: T,
    /// d SSIM / d a, full image resolution.
    pub grad: ImageBuffer<T>,
}

/// Mean SSIM over valid window placements and channels, plus its gradient
/// with respect to `a`.
pub fn ssim<T: Real>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<SsimResult<T>> {
    if !a.same_shape(b) {
        return Err(Error::Contract(format!(
            "ssim shape mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "image {}x{} smaller than the {}x{} SSIM window",
            a.width, a.height, SSIM_WINDOW, SSIM_WINDOW
        )));
    }
    let (w, h) = (a.width, a.height);
    let (wm, hm) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let k = ssim_window::<T>();
    let c1 = fl::<T>(0.01 * 0.01);
    let c2 = fl::<T>(0.03 * 0.03);
    let n_map = <T as Real>::from_usize(wm * hm * 3);
    let inv_n = T::one() / n_map;

    let mut value = T::zero();
    let mut grad = ImageBuffer::zeros(w, h);
    for c in 0..3 {
        let x = channel_plane(a, c);
        let y = channel_plane(b, c);
        let xx: Vec<T> = x.iter().map(|&v| v * v).collect();
        let yy: Vec<T> = y.iter().map(|&v| v * v).collect();
        let xy: Vec<T> = x.iter().zip(y.iter()).map(|(&u, &v)| u * v).collect();

        let mu_x = valid_corr(&x, w, h, &k);
        let mu_y = valid_corr(&y, w, h, &k);
        let s_xx = valid_corr(&xx, w, h, &k);
        let s_yy = valid_corr(&yy, w, h, &k);
        let s_xy = valid_corr(&xy, w, h, &k);

        // Per-window maps for S and the three gradient coefficients:
        // dS/dx_k = g_{k-u} (P(u) + x_k Q(u) + y_k R(u)).
        let mut p = vec![T::zero(); wm * hm];
        let mut q = vec![T::zero(); wm * hm];
        let mut r = vec![T::zero(); wm * hm];
        let two = fl::<T>(2.0);
        for u in 0..wm * hm {
            let (mx, my) = (mu_x[u], mu_y[u]);
            let var_x = s_xx[u] - mx * mx;
            let var_y = s_yy[u] - my * my;
            let cov = s_xy[u] - mx * my;
            let a1 = two * mx * my + c1;
            let a2 = two * cov + c2;
            let b1 = mx * mx + my * my + c1;
            let b2 = var_x + var_y + c2;
            let s = (a1 * a2) / (b1 * b2);
            value += s;
            p[u] = two * (my * (a2 - a1) + s * mx * (b1 - b2)) / (b1 * b2);
            q[u] = -two * s / b2;
            r[u] = two * a1 / (b1 * b2);
        }

        let gp = adjoint_corr(&p, wm, hm, &k);
        let gq = adjoint_corr(&q, wm, hm, &k);
        let gr = adjoint_corr(&r, wm, hm, &k);
        for pix in 0..w * h {
            grad.data[pix * 3 + c] = (gp[pix] + x[pix] * gq[pix] + y[pix] * gr[pix]) * inv_n;
        }
    }
    Ok(SsimResult { value: value * inv_n, grad })
}

/// Base reconstruction loss (1 - lambda) L1 + lambda (1 - SSIM) and the
/// component values needed for reporting.
pub struct BaseLoss<T: Real> {
    pub loss: T,
    pub l1: T,
    pub dssim: T,
    pub grad: ImageBuffer<T>,
}

pub fn base_loss<T: Real>(
    render0: &ImageBuffer<T>,
    gt0: &ImageBuffer<T>,
    lambda_dssim: T,
) -> Result<BaseLoss<T>> {
    if lambda_dssim < T::zero() || lambda_dssim > T::one() {
        return Err(Error::InvalidInput(format!(
            "lambda_dssim must be in [0,1], got {}",
            lambda_dssim.to_f64()
        )));
    }
    let (l1, l1_grad) = l1_image_loss(render0, gt0)?;
    if lambda_dssim == T::zero() {
        // Degenerate weight: identical to plain L1 (also skips the SSIM
        // pass so zero-weight runs match an L1-only trainer bit for bit).
        return Ok(BaseLoss { loss: l1, l1, dssim: T::zero(), grad: l1_grad });
    }
    let s = ssim(render0, gt0)?;
    let dssim = T::one() - s.value;
    let loss = (T::one() - lambda_dssim) * l1 + lambda_dssim * dssim;
    let mut grad = l1_grad;
    let w_l1 = T::one() - lambda_dssim;
    for (g, sg) in grad.data.iter_mut().zip(s.grad.data.iter()) {
        *g = w_l1 * *g - lambda_dssim * *sg;
    }
    Ok(BaseLoss { loss, l1, dssim, grad })
}

/// All components of the training objective for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T: Real> {
    pub l1: T,
    pub dssim: T,
    pub base: T,
    pub mss: T,
    pub size: T,
    pub total: T,
}

impl<T: Real> LossBreakdown<T> {
    pub fn to_f64(&self) -> LossBreakdown<f64> {
        LossBreakdown {
            l1: self.l1.to_f64(),
            dssim: self.dssim.to_f64(),
            base: self.base.to_f64(),
            mss: self.mss.to_f64(),
            size: self.size.to_f64(),
            total: self.total.to_f64(),
        }
    }
}

/// total = base + lambda_mss * mss + lambda_size * size, with the base
/// recomposed from its components for reporting.
pub fn total_loss<T: Real>(
    l1: T,
    dssim: T,
    lambda_dssim: T,
    mss: T,
    size: T,
    lambda_mss: T,
    lambda_size: T,
) -> Result<LossBreakdown<T>> {
    if lambda_mss < T::zero() || lambda_size < T::zero() {
        return Err(Error::InvalidInput("loss weights must be non-negative".into()));
    }
    let base = (T::one() - lambda_dssim) * l1 + lambda_dssim * dssim;
    let total = base + lambda_mss * mss + lambda_size * size;
    Ok(LossBreakdown { l1, dssim, base, mss, size, total })
}

/// 10 log10(1 / MSE) on the [0,1] range, capped at 100 dB.
pub fn psnr<T: Real>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<T> {
    if !a.same_shape(b) {
        return Err(Error::Contract(format!(
            "psnr shape mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let n = a.n_values();
    let mse = sum_indexed(n, T::zero(), |i| {
        let d = a.data[i] - b.data[i];
        d * d
    }) / <T as Real>::from_usize(n);
    let cap = fl::<T>(100.0);
    if mse <= T::zero() {
        return Ok(cap);
    }
    Ok((fl::<T>(10.0) * (T::one() / mse).log10()).min(cap))
}
