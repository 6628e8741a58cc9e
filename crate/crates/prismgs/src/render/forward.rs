//! Forward compositing: binning, sorting, and front-to-back alpha blending.

use nalgebra::Vector2;

use crate::camera::Camera;
use crate::error::Result;
use crate::gaussian::GaussianPrimitive;
use crate::image_buf::ImageBuffer;
use crate::parallel::map_indexed;
use crate::real::Real;

use super::project::{project_gaussian, ProjectOutcome, ProjectedGaussian};
use super::{alpha_clamp_max, RenderContext, RenderOptions, RenderOutput, Rendered, TILE_SIZE};

/// Gaussian falloff and clamped alpha at pixel center (px, py).
/// Shared by forward and backward so replayed alphas are bit-identical.
#[inline]
pub(crate) fn eval_alpha<T: Real>(
    pg: &ProjectedGaussian<T>,
    px: T,
    py: T,
) -> (T, T, Vector2<T>, bool) {
    let d = Vector2::new(px - pg.mean2d.x, py - pg.mean2d.y);
    let half = <T as Real>::from_f64(0.5);
    let power = -half
        * (pg.conic[(0, 0)] * d.x * d.x
            + <T as Real>::from_f64(2.0) * pg.conic[(0, 1)] * d.x * d.y
            + pg.conic[(1, 1)] * d.y * d.y);
    let g = power.exp();
    let raw = pg.opacity * g;
    let max = alpha_clamp_max::<T>();
    if raw > max {
        (max, g, d, true)
    } else {
        (raw, g, d, false)
    }
}

struct TileResult<T: Real> {
    color: Vec<T>,
    t_final: Vec<T>,
    contrib: Vec<u32>,
    range_end: Vec<u32>,
}

pub(super) fn render_impl<T: Real>(
    gaussians: &[GaussianPrimitive<T>],
    cam: &Camera<T>,
    opts: &RenderOptions<T>,
) -> Result<Rendered<T>> {
    let (w, h) = (cam.width, cam.height);

    // Project every Gaussian (independent, order-preserving).
    let outcomes = map_indexed(gaussians.len(), |i| project_gaussian(&gaussians[i], cam, opts));
    let mut visible: Vec<ProjectedGaussian<T>> = Vec::new();
    let mut n_degenerate = 0usize;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            ProjectOutcome::Visible(mut p) => {
                p.source_index = i;
                visible.push(*p);
            }
            ProjectOutcome::Degenerate => n_degenerate += 1,
            ProjectOutcome::Culled => {}
        }
    }

    // Global front-to-back order; source index breaks depth ties so the
    // composite order is a deterministic function of the input.
    let mut order: Vec<u32> = (0..visible.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let (pa, pb) = (&visible[a as usize], &visible[b as usize]);
        pa.depth
            .partial_cmp(&pb.depth)
            .expect("finite depths")
            .then(pa.source_index.cmp(&pb.source_index))
    });

    // Bin in sorted order so each tile list is already depth-sorted.
    let tiles_x = w.div_ceil(TILE_SIZE);
    let tiles_y = h.div_ceil(TILE_SIZE);
    let mut tile_lists: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for &vi in &order {
        let b = visible[vi as usize].bounds;
        let tx_lo = (b.x_lo.max(0) as usize) / TILE_SIZE;
        let tx_hi = (b.x_hi.min(w as i64 - 1) as usize) / TILE_SIZE;
        let ty_lo = (b.y_lo.max(0) as usize) / TILE_SIZE;
        let ty_hi = (b.y_hi.min(h as i64 - 1) as usize) / TILE_SIZE;
        for ty in ty_lo..=ty_hi {
            for tx in tx_lo..=tx_hi {
                tile_lists[ty * tiles_x + tx].push(vi);
            }
        }
    }

    // Composite tiles independently.
    let tile_results = map_indexed(tiles_x * tiles_y, |t| {
        composite_tile(t, tiles_x, w, h, &tile_lists[t], &visible, opts)
    });

    // Assemble tile buffers in tile order.
    let mut image = ImageBuffer::zeros(w, h);
    let mut alpha = vec![T::zero(); w * h];
    let mut contrib_count = vec![0u32; w * h];
    let mut t_final = vec![T::one(); w * h];
    let mut range_end = vec![0u32; w * h];
    for (t, tile) in tile_results.into_iter().enumerate() {
        let x0 = (t % tiles_x) * TILE_SIZE;
        let y0 = (t / tiles_x) * TILE_SIZE;
        let tw = (w - x0).min(TILE_SIZE);
        let th = (h - y0).min(TILE_SIZE);
        for ly in 0..th {
            let row = (y0 + ly) * w + x0;
            for lx in 0..tw {
                let local = ly * tw + lx;
                let pix = row + lx;
                image.data[pix * 3..pix * 3 + 3]
                    .copy_from_slice(&tile.color[local * 3..local * 3 + 3]);
                t_final[pix] = tile.t_final[local];
                alpha[pix] = T::one() - tile.t_final[local];
                contrib_count[pix] = tile.contrib[local];
                range_end[pix] = tile.range_end[local];
            }
        }
    }

    Ok(Rendered {
        output: RenderOutput { image, alpha, contrib_count, n_degenerate },
        context: RenderContext {
            visible,
            tile_lists,
            t_final,
            range_end,
            tiles_x,

            n_gaussians: gaussians.len(),
            cam: cam.clone(),
            opts: *opts,
        },
    })
}

fn composite_tile<T: Real>(
    t: usize,
    tiles_x: usize,
    w: usize,
    h: usize,
    list: &[u32],
    visible: &[ProjectedGaussian<T>],
    opts: &RenderOptions<T>,
) -> TileResult<T> {
    let x0 = (t % tiles_x) * TILE_SIZE;
    let y0 = (t / tiles_x) * TILE_SIZE;
    let tw = (w - x0).min(TILE_SIZE);
    let th = (h - y0).min(TILE_SIZE);
    let mut res = TileResult {
        color: vec![T::zero(); tw * th * 3],
        t_final: vec![T::one(); tw * th],
        contrib: vec![0u32; tw * th],
        range_end: vec![0u32; tw * th],
    };
    for ly in 0..th {
        let py = (y0 + ly) as i64;
        let fy = <T as Real>::from_f64(py as f64);
        for lx in 0..tw {
            let px = (x0 + lx) as i64;
            let fx = <T as Real>::from_f64(px as f64);
            let local = ly * tw + lx;
            let mut trans = T::one();
            let mut c = [T::zero(); 3];
            for (k, &vi) in list.iter().enumerate() {
                let pg = &visible[vi as usize];
                if !pg.bounds.contains(px, py) {
                    continue;
                }
                let (a, _, _, _) = eval_alpha(pg, fx, fy);
                if a < opts.alpha_cutoff {
                    continue;
                }
                let w_c = a * trans;
                c[0] += pg.color.x * w_c;
                c[1] += pg.color.y * w_c;
                c[2] += pg.color.z * w_c;
                res.contrib[local] += 1;
                res.range_end[local] = (k + 1) as u32;
                trans *= T::one() - a;
                // Terminate once transmittance is negligible; the dropped
                // tail is bounded by the threshold itself.
                if trans < opts.transmittance_stop {
                    break;
                }
            }
            res.color[local * 3..local * 3 + 3].copy_from_slice(&c);
            res.t_final[local] = trans;
        }
    }
    res
}
