//! Differentiable 3D Gaussian splatting on the CPU.
//!
//! A scene is a set of anisotropic 3D Gaussians (position, per-axis scale,
//! rotation, opacity, spherical-harmonic color). The renderer projects each
//! Gaussian to a screen-space ellipse, bins by tile, depth-sorts and
//! alpha-composites front to back, and provides an analytic backward pass
//! for every parameter. Training combines an L1 + D-SSIM photometric loss
//! at full resolution with two regularizers: a multi-scale loss against a
//! pre-filtered ground-truth image pyramid, and a hinge penalty on Gaussians
//! whose smallest scale axis falls below a Nyquist-derived world-space bound.
//!
//! All numeric kernels are generic over [`Real`] (`f32` for training, `f64`
//! for gradient-check suites) and are deterministic: parallel reductions run
//! in a fixed order, so results are bit-identical across thread counts and
//! across the `parallel` feature flag.

pub mod camera;
pub mod error;
pub mod gaussian;
pub mod image_buf;
pub mod loss;
pub mod parallel;
pub mod pyramid;
pub mod real;
pub mod regularize;
pub mod render;
pub mod scene;
pub mod train;

pub use camera::Camera;
pub use error::{Error, Result};
pub use gaussian::GaussianPrimitive;
pub use image_buf::ImageBuffer;
pub use real::Real;
