//! Adaptive density control: clone small / split large primitives whose
//! screen-space position gradients stay high, and prune transparent ones.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::gaussian::{quat_to_rotation, GaussianPrimitive};
use crate::real::{fl, Real};

/// Scale divisor for split children.
pub const SPLIT_SCALE_FACTOR: f64 = 1.6;

#[derive(Debug, Clone, Copy)]
pub struct DensifyParams<T: Real> {
    pub grad_threshold: T,
    pub prune_opacity: T,
    pub tau_size: T,
    pub max_gaussians: usize,
    /// When false (schedule exhausted or cap reached), only pruning runs.
    pub densify: bool,
}

#[derive(Debug, Clone)]
pub struct DensifyOutcome {
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
    /// For each primitive in the new list, the index it came from in the old
    /// list (`None` for freshly created ones). Drives optimizer-state remap.
    pub moment_map: Vec<Option<usize>>,
}

/// One densify/prune pass. `mean_grad_norm[i]` is the average screen-space
/// position-gradient magnitude of primitive `i` since the last pass.
/// High-gradient primitives are cloned in place when their smallest scale is
/// below 2·tau_size and otherwise split into two children sampled from the
/// parent's own distribution with scales divided by 1.6 (parent removed).
/// Low-opacity primitives are pruned afterwards. New primitives stop being
/// created once `max_gaussians` is reached.
pub fn densify_and_prune<T: Real>(
    gaussians: &mut Vec<GaussianPrimitive<T>>,
    mean_grad_norm: &[T],
    params: &DensifyParams<T>,
    rng: &mut ChaCha8Rng,
) -> Result<DensifyOutcome> {
    let n = gaussians.len();
    debug_assert_eq!(mean_grad_norm.len(), n);
    let clone_below = params.tau_size * fl::<T>(2.0);
    let split_scale = fl::<T>(1.0 / SPLIT_SCALE_FACTOR).ln();

    let mut out: Vec<GaussianPrimitive<T>> = Vec::with_capacity(n + 8);
    let mut map: Vec<Option<usize>> = Vec::with_capacity(n + 8);
    let mut cloned = 0usize;
    let mut split = 0usize;
    let mut budget = params.max_gaussians.saturating_sub(n);

    for i in 0..n {
        let g = &gaussians[i];
        let hot = params.densify && i < mean_grad_norm.len() && mean_grad_norm[i] > params.grad_threshold;
        if !hot {
            out.push(g.clone());
            map.push(Some(i));
            continue;
        }
        if g.scale().min() < clone_below {
            out.push(g.clone());
            map.push(Some(i));
            if budget > 0 {
                out.push(g.clone());
                map.push(None);
                cloned += 1;
                budget -= 1;
            }
        } else if budget > 0 {
            // Two children drawn from the parent's own distribution.
            let rot = quat_to_rotation(&g.rotation)?;
            let scale = g.scale();
            for _ in 0..2 {
                let z = Vector3::new(
                    fl::<T>(rng.sample(StandardNormal)),
                    fl::<T>(rng.sample(StandardNormal)),
                    fl::<T>(rng.sample(StandardNormal)),
                );
                let offset = rot * Vector3::new(z.x * scale.x, z.y * scale.y, z.z * scale.z);
                let mut child = g.clone();
                child.position += offset;
                child.log_scale += Vector3::from_element(split_scale);
                out.push(child);
                map.push(None);
            }
            split += 1;
            budget = budget.saturating_sub(1); // net +1 (parent removed)
        } else {
            out.push(g.clone());
            map.push(Some(i));
        }
    }

    // Prune transparent primitives from the combined list.
    let mut pruned = 0usize;
    let mut kept: Vec<GaussianPrimitive<T>> = Vec::with_capacity(out.len());
    let mut kept_map: Vec<Option<usize>> = Vec::with_capacity(map.len());
    for (g, m) in out.into_iter().zip(map) {
        if g.opacity() < params.prune_opacity {
            pruned += 1;
        } else {
            kept.push(g);
            kept_map.push(m);
        }
    }

    *gaussians = kept;
    Ok(DensifyOutcome { cloned, split, pruned, moment_map: kept_map })
}
