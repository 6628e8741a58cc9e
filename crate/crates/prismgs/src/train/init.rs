//! Primitive initialization from a sparse point cloud.

use nalgebra::{Vector3, Vector4};

use crate::error::{Error, Result};
use crate::gaussian::{rgb_to_dc_coeff, sh_coeff_count, GaussianPrimitive};
use crate::parallel::map_indexed;
use crate::real::{fl, logit, Real};
use crate::scene::PointCloud;

/// Initialized primitives plus a warning when the documented fallback path
/// was taken.
pub struct InitOutcome<T: Real> {
    pub gaussians: Vec<GaussianPrimitive<T>>,
    pub warning: Option<String>,
}

const INIT_OPACITY: f64 = 0.1;

/// One primitive per point: isotropic scale from the mean distance to the 3
/// nearest neighbors (clamped up to `min_scale` when given), identity
/// rotation, opacity 0.1, degree-0 SH from the point color with higher
/// orders zeroed. Fewer than 4 points fall back to `scene_extent / 100`.
pub fn init_gaussians<T: Real>(
    cloud: &PointCloud<T>,
    min_scale: Option<T>,
    scene_extent: T,
    sh_degree: usize,
) -> Result<InitOutcome<T>> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("cannot initialize from an empty point cloud".to_string()));
    }
    if cloud.colors.len() != cloud.positions.len() {
        return Err(Error::InvalidInput("point colors are not aligned with positions".to_string()));
    }
    let coeffs = sh_coeff_count(sh_degree);
    if coeffs > crate::gaussian::MAX_SH_COEFFS {
        return Err(Error::InvalidInput(format!("SH degree {sh_degree} exceeds the supported maximum of 3")));
    }

    let n = cloud.positions.len();
    let fallback = scene_extent / fl::<T>(100.0);
    let (scales, warning) = if n < 4 {
        (
            vec![fallback; n],
            Some(format!("only {n} points: using fallback scale (scene extent / 100)")),
        )
    } else {
        let scales = map_indexed(n, |i| {
            let p = cloud.positions[i];
            // Three smallest non-self distances, tracked in a sorted triple.
            let inf = <T as Real>::from_f64(f64::INFINITY);
            let mut best = [inf; 3];
            for (j, q) in cloud.positions.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = (q - p).norm();
                if d < best[2] {
                    best[2] = d;
                    if best[2] < best[1] {
                        best.swap(1, 2);
                    }
                    if best[1] < best[0] {
                        best.swap(0, 1);
                    }
                }
            }
            let mean = (best[0] + best[1] + best[2]) / fl::<T>(3.0);
            // Coincident points would give a zero (degenerate) scale.
            if mean > T::zero() {
                mean
            } else {
                fallback
            }
        });
        (scales, None)
    };

    let opacity_logit = fl::<T>(logit(INIT_OPACITY));
    let inv255 = T::one() / fl::<T>(255.0);
    let gaussians = map_indexed(n, |i| {
        let scale = match min_scale {
            Some(lo) => scales[i].max(lo),
            None => scales[i],
        };
        let c = cloud.colors[i];
        let rgb = [
            <T as Real>::from_f64(c[0] as f64) * inv255,
            <T as Real>::from_f64(c[1] as f64) * inv255,
            <T as Real>::from_f64(c[2] as f64) * inv255,
        ];
        let mut sh = vec![Vector3::zeros(); coeffs];
        sh[0] = rgb_to_dc_coeff(rgb);
        GaussianPrimitive {
            position: cloud.positions[i],
            log_scale: Vector3::from_element(scale.ln()),
            rotation: Vector4::new(T::one(), T::zero(), T::zero(), T::zero()),
            opacity_logit,
            sh_coeffs: sh,
        }
    });
    Ok(InitOutcome { gaussians, warning })
}
