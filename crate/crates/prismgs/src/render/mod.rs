//! Differentiable tile-based rasterizer.
//!
//! Forward: EWA-style projection of each Gaussian to a 2D mean/covariance,
//! binning into 16x16 pixel tiles, per-pixel front-to-back alpha compositing
//! in (depth, source index) order. Backward: per-tile back-to-front replay
//! using the stored final transmittance, then an analytic chain from 2D
//! gradients to every Gaussian parameter.
//!
//! Both passes are deterministic by construction: tiles are reduced in tile
//! index order and per-Gaussian work is independent, so results are
//! bit-identical for any worker-thread count.

mod backward;
mod forward;
mod project;

pub use backward::{render_backward, GaussianGradients};
pub use project::{project_gaussian, PixelBounds, ProjectOutcome, ProjectedGaussian};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::gaussian::{sh_degree_from_coeff_count, GaussianPrimitive};
use crate::image_buf::ImageBuffer;
use crate::real::{fl, Real};

pub const TILE_SIZE: usize = 16;

/// Which pixels a projected Gaussian may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Footprint {
    /// Only pixels inside the integer AABB of the 3-sigma screen ellipse.
    /// This is part of the render contract (the naive reference applies the
    /// same rule), so tiled and untiled rendering agree bit for bit.
    Aabb3Sigma,
    /// Every pixel; keeps the forward pass smooth for finite-difference
    /// gradient probes.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions<T: Real> {
    pub near_plane: T,
    /// Contributions with alpha below this are skipped.
    pub alpha_cutoff: T,
    /// Compositing stops before a contribution would push transmittance
    /// below this.
    pub transmittance_stop: T,
    /// Isotropic low-pass dilation added to every 2D covariance (pixels^2).
    pub dilation: T,
    pub footprint: Footprint,
}

impl<T: Real> Default for RenderOptions<T> {
    fn default() -> Self {
        Self {
            near_plane: fl(0.01),
            alpha_cutoff: fl(1.0 / 255.0),
            transmittance_stop: fl(1e-4),
            dilation: fl(0.3),
            footprint: Footprint::Aabb3Sigma,
        }
    }
}

impl<T: Real> RenderOptions<T> {
    /// Smooth-forward configuration for finite-difference gradient checks:
    /// no contribution cutoffs and full-image footprints.
    pub fn oracle() -> Self {
        Self {
            alpha_cutoff: T::zero(),
            transmittance_stop: T::zero(),
            footprint: Footprint::Full,
            ..Self::default()
        }
    }

    /// Configuration for tiled-vs-naive equivalence tests: cutoffs zeroed,
    /// footprint rule kept.
    pub fn equivalence() -> Self {
        Self {
            alpha_cutoff: T::zero(),
            transmittance_stop: T::zero(),
            ..Self::default()
        }
    }
}

/// Alphas are capped just below one so backward transmittance recovery
/// (division by 1 - alpha) stays finite even for saturated opacities.
pub(crate) fn alpha_clamp_max<T: Real>() -> T {
    T::one() - fl::<T>(1e-6)
}

#[derive(Debug, Clone)]
pub struct RenderOutput<T: Real> {
    /// Composited color, >= 0; not clamped above (callers clamp at the loss
    /// boundary where the clamp mask is applied to gradients).
    pub image: ImageBuffer<T>,
    /// Per-pixel accumulated opacity, in [0,1].
    pub alpha: Vec<T>,
    /// Per-pixel number of composited contributions (diagnostics).
    pub contrib_count: Vec<u32>,
    /// Primitives skipped for a degenerate (non-positive-determinant)
    /// pre-dilation 2D covariance.
    pub n_degenerate: usize,
}

/// Forward intermediates retained for the backward pass.
#[derive(Debug, Clone)]
pub struct RenderContext<T: Real> {
    pub(crate) visible: Vec<ProjectedGaussian<T>>,
    /// Per tile: indices into `visible`, sorted by (depth, source index).
    pub(crate) tile_lists: Vec<Vec<u32>>,
    /// Per pixel: transmittance after the last composited contribution.
    pub(crate) t_final: Vec<T>,
    /// Per pixel: exclusive end index into the pixel's tile list covering
    /// every composited contribution.
    pub(crate) range_end: Vec<u32>,
    pub(crate) tiles_x: usize,
    pub(crate) n_gaussians: usize,
    pub(crate) cam: Camera<T>,
    pub(crate) opts: RenderOptions<T>,
}

#[derive(Debug, Clone)]
pub struct Rendered<T: Real> {
    pub output: RenderOutput<T>,
    pub context: RenderContext<T>,
}

/// Validates that all Gaussians share one legal SH coefficient count and
/// returns it (1 for an empty list so downstream code has a valid degree).
pub(crate) fn common_sh_count<T: Real>(gaussians: &[GaussianPrimitive<T>]) -> Result<usize> {
    let Some(first) = gaussians.first() else {
        return Ok(1);
    };
    let count = first.sh_coeffs.len();
    sh_degree_from_coeff_count(count)?;
    if let Some(bad) = gaussians.iter().position(|g| g.sh_coeffs.len() != count) {
        return Err(Error::InvalidInput(format!(
            "gaussian {bad} has {} SH coefficients, expected {count}",
            gaussians[bad].sh_coeffs.len()
        )));
    }
    Ok(count)
}

/// Renders the scene through `cam`, retaining backward intermediates.
pub fn render<T: Real>(
    gaussians: &[GaussianPrimitive<T>],
    cam: &Camera<T>,
    opts: &RenderOptions<T>,
) -> Result<Rendered<T>> {
    cam.validate()?;
    common_sh_count(gaussians)?;
    forward::render_impl(gaussians, cam, opts)
}

/// Renders at pyramid level `level` using the level-scaled camera.
/// Level 0 is bit-identical to `render`.
pub fn render_at_level<T: Real>(
    gaussians: &[GaussianPrimitive<T>],
    cam: &Camera<T>,
    level: usize,
    opts: &RenderOptions<T>,
) -> Result<Rendered<T>> {
    if level == 0 {
        return render(gaussians, cam, opts);
    }
    if (cam.width >> level) == 0 || (cam.height >> level) == 0 {
        return Err(Error::InvalidInput(format!(
            "level {level} collapses a {}x{} camera below one pixel",
            cam.width, cam.height
        )));
    }
    render(gaussians, &cam.scaled_for_level(level), opts)
}
