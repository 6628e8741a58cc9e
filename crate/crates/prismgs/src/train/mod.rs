//! Training orchestration: scene partitioning into blocks, per-block
//! optimization of the joint objective (base photometric + multi-scale
//! supervision + size regularization), adaptive density control, and block
//! merging. Runs are bit-reproducible for a fixed seed.

pub mod adam;
pub mod blocks;
pub mod checkpoint;
pub mod densify;
pub mod eval;
pub mod init;

use nalgebra::{Vector3, Vector4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Split;
use crate::error::{Error, Result};
use crate::gaussian::{sh_coeff_count, GaussianPrimitive};
use crate::image_buf::ImageBuffer;
use crate::loss::{base_loss, total_loss, LossBreakdown};
use crate::pyramid::{build_gt_pyramid, mss_loss, ImagePyramid, PyramidKind};
use crate::real::{fl, Real};
use crate::regularize::{compute_sampling_bound, size_loss};
use crate::render::{render, render_at_level, render_backward, GaussianGradients, RenderOptions, Rendered};
use crate::scene::{PointCloud, SceneDataset};

pub use adam::{Adam, ParamGroup};
pub use blocks::{merge_blocks, owner_blocks, partition_scene, SceneBlock, DEFAULT_CAMERA_MARGIN};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use densify::{densify_and_prune, DensifyOutcome, DensifyParams, SPLIT_SCALE_FACTOR};
pub use eval::{cross_scale_error, evaluate_camera, CameraMetrics};
pub use init::{init_gaussians, InitOutcome};

/// Full training configuration. Defaults are desk scale; `paper()` restores
/// the published 60k-iteration schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Weight of DSSIM inside the base photometric loss.
    pub lambda_dssim: f64,
    /// Weight of the multi-scale supervision term.
    pub lambda_mss: f64,
    /// Weight of the size regularization term.
    pub lambda_size: f64,
    /// Requested pyramid level count L (clamped so the coarsest level stays
    /// >= 8x8).
    pub pyramid_levels: usize,
    /// Gaussian blur sigma used when building ground-truth pyramids.
    pub pyramid_sigma: f64,
    /// Explicit size threshold; `None` derives tau = nyquist_factor * T_min
    /// from the initial point cloud and training cameras.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_size: Option<f64>,
    pub nyquist_factor: f64,
    /// Lower bound on per-point depth when deriving the sampling interval.
    pub near_clamp: f64,
    /// Divide the size loss by the Gaussian count (off by default: the raw
    /// sum matches the published weighting).
    pub normalize_size_loss: bool,
    pub sh_degree: usize,
    /// Position learning rate (multiplied by the scene extent, decayed
    /// exponentially to `lr_position_final`).
    pub lr_position: f64,
    pub lr_position_final: f64,
    pub lr_log_scale: f64,
    pub lr_rotation: f64,
    pub lr_opacity: f64,
    pub lr_sh: f64,
    /// Mean screen-space position-gradient norm (pixels) above which a
    /// primitive is densified.
    pub densify_grad_threshold: f64,
    pub densify_interval: usize,
    pub densify_until_iter: usize,
    pub prune_opacity_threshold: f64,
    pub max_gaussians: usize,
    /// Block partition grid (nx, ny) over the point cloud's x/y extent.
    pub grid: (usize, usize),
    /// Per-side fractional expansion of a block's box for camera assignment.
    pub camera_margin: f64,
    /// Seed for every stochastic choice (camera order, densify sampling).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    /// Desk-scale profile: short schedule for small synthetic scenes.
    pub fn desk() -> Self {
        Self {
            iterations: 5000,
            lambda_dssim: 0.2,
            lambda_mss: 0.1,
            lambda_size: 0.01,
            pyramid_levels: 4,
            pyramid_sigma: 1.0,
            tau_size: None,
            nyquist_factor: 2.0,
            near_clamp: 0.01,
            normalize_size_loss: false,
            sh_degree: 3,
            lr_position: 1.6e-4,
            lr_position_final: 1.6e-6,
            lr_log_scale: 5e-3,
            lr_rotation: 1e-3,
            lr_opacity: 5e-2,
            lr_sh: 2.5e-3,
            densify_grad_threshold: 6e-3,
            densify_interval: 100,
            densify_until_iter: 2500,
            prune_opacity_threshold: 0.005,
            max_gaussians: 500_000,
            grid: (1, 1),
            camera_margin: DEFAULT_CAMERA_MARGIN,
            seed: 0,
        }
    }

    /// Published schedule: 60k iterations, densification for the first 15k.
    pub fn paper() -> Self {
        Self { iterations: 60_000, densify_until_iter: 15_000, ..Self::desk() }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Config(format!("unknown profile '{other}' (expected desk or paper)"))),
        }
    }

    /// `iterations == 0` is allowed as a degenerate initialize-and-evaluate
    /// run (used by resume-with-no-extra-steps flows).
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lambda_dssim", self.lambda_dssim),
            ("lambda_mss", self.lambda_mss),
            ("lambda_size", self.lambda_size),
            ("lr_position", self.lr_position),
            ("lr_position_final", self.lr_position_final),
            ("lr_log_scale", self.lr_log_scale),
            ("lr_rotation", self.lr_rotation),
            ("lr_opacity", self.lr_opacity),
            ("lr_sh", self.lr_sh),
            ("densify_grad_threshold", self.densify_grad_threshold),
            ("prune_opacity_threshold", self.prune_opacity_threshold),
            ("camera_margin", self.camera_margin),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.lambda_dssim > 1.0 {
            return Err(Error::Config(format!("lambda_dssim must be <= 1, got {}", self.lambda_dssim)));
        }
        if self.pyramid_levels < 1 {
            return Err(Error::Config("pyramid_levels must be >= 1".into()));
        }
        if !(self.pyramid_sigma > 0.0) {
            return Err(Error::Config(format!("pyramid_sigma must be positive, got {}", self.pyramid_sigma)));
        }
        if !(self.nyquist_factor > 0.0) {
            return Err(Error::Config(format!("nyquist_factor must be positive, got {}", self.nyquist_factor)));
        }
        if !(self.near_clamp > 0.0) {
            return Err(Error::Config(format!("near_clamp must be positive, got {}", self.near_clamp)));
        }
        if let Some(tau) = self.tau_size {
            if !(tau > 0.0) {
                return Err(Error::Config(format!("tau_size must be positive, got {tau}")));
            }
        }
        if self.sh_degree > 3 {
            return Err(Error::Config(format!("sh_degree must be <= 3, got {}", self.sh_degree)));
        }
        if self.densify_interval < 1 {
            return Err(Error::Config("densify_interval must be >= 1".into()));
        }
        if self.max_gaussians < 1 {
            return Err(Error::Config("max_gaussians must be >= 1".into()));
        }
        if self.grid.0 < 1 || self.grid.1 < 1 {
            return Err(Error::Config("partition grid must be at least 1x1".into()));
        }
        Ok(())
    }
}

/// One densify/prune pass in the event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensifyEvent {
    /// 1-based iteration count at which the pass ran.
    pub iteration: usize,
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
    pub total_after: usize,
}

/// Everything a training run records: per-iteration loss terms, density
/// control events, per-camera metrics on the final model, and warnings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_history: Vec<LossBreakdown<f64>>,
    pub events: Vec<DensifyEvent>,
    pub final_metrics: Vec<CameraMetrics>,
    pub final_count: usize,
    pub warnings: Vec<String>,
}

/// A trained block: its primitives, report, and optimizer state.
#[derive(Debug, Clone)]
pub struct TrainedBlock<T: Real> {
    pub gaussians: Vec<GaussianPrimitive<T>>,
    pub report: TrainReport,
    pub optimizer: Adam<T>,
}

/// A trained scene. `optimizer` is kept only for single-block runs, where
/// the state still corresponds 1:1 to the merged primitive list.
#[derive(Debug, Clone)]
pub struct TrainResult<T: Real> {
    pub gaussians: Vec<GaussianPrimitive<T>>,
    pub report: TrainReport,
    pub optimizer: Option<Adam<T>>,
}

/// The size threshold for a run: an explicit override wins; otherwise tau is
/// derived from the initial points and training cameras. A derivation
/// failure is fatal only when the size loss is active.
pub fn resolve_tau<T: Real>(config: &TrainConfig, dataset: &SceneDataset<T>) -> Result<Option<T>> {
    if let Some(tau) = config.tau_size {
        return Ok(Some(fl(tau)));
    }
    match compute_sampling_bound(
        &dataset.cameras,
        &dataset.points.positions,
        fl(config.near_clamp),
        fl(config.nyquist_factor),
    ) {
        Ok(bound) => Ok(Some(bound.tau_size)),
        Err(_) if config.lambda_size == 0.0 => Ok(None),
        Err(e) => Err(e),
    }
}

/// SplitMix64 finalizer over (seed, block, stream) so each block's camera
/// order and densify sampling use independent streams of one user seed.
fn stream_seed(seed: u64, block_id: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ block_id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Zeroes upstream gradients wherever the raw render exceeded 1: losses see
/// the clamped image, so those values have zero downstream sensitivity.
fn zero_where_clamped<T: Real>(upstream: &mut ImageBuffer<T>, raw: &ImageBuffer<T>) {
    for (u, r) in upstream.data.iter_mut().zip(&raw.data) {
        if *r > T::one() {
            *u = T::zero();
        }
    }
}

/// Exponentially decayed position learning rate (before the scene-extent
/// factor), reaching `lr_position_final` on the last scheduled iteration.
fn position_lr(config: &TrainConfig, it: usize) -> f64 {
    if config.lr_position <= 0.0 || config.lr_position_final <= 0.0 {
        return config.lr_position;
    }
    let frac = (it as f64 + 1.0) / config.iterations.max(1) as f64;
    config.lr_position * (config.lr_position_final / config.lr_position).powf(frac)
}

fn check_finite<T: Real>(iteration: usize, breakdown: &LossBreakdown<T>) -> Result<()> {
    let terms = [
        ("l1", breakdown.l1),
        ("dssim", breakdown.dssim),
        ("mss", breakdown.mss),
        ("size", breakdown.size),
        ("total", breakdown.total),
    ];
    for (term, v) in terms {
        if !v.to_f64().is_finite() {
            return Err(Error::NonFinite { iteration, term: term.to_string() });
        }
    }
    Ok(())
}

/// One Adam step over all five parameter groups (gather to flat slices,
/// update, scatter back).
fn apply_updates<T: Real>(
    adam: &mut Adam<T>,
    gaussians: &mut [GaussianPrimitive<T>],
    grads: &GaussianGradients<T>,
    config: &TrainConfig,
    scene_extent: T,
    it: usize,
) -> Result<()> {
    let n = gaussians.len();
    let stride = grads.sh_stride;
    let lr_pos = scene_extent * fl::<T>(position_lr(config, it));

    let mut vals: Vec<T> = Vec::with_capacity(n * 3 * stride.max(2));
    let mut gs: Vec<T> = Vec::with_capacity(vals.capacity());

    vals.clear();
    gs.clear();
    for g in gaussians.iter() {
        vals.extend_from_slice(g.position.as_slice());
    }
    for d in &grads.d_position {
        gs.extend_from_slice(d.as_slice());
    }
    adam.update(ParamGroup::Position, &mut vals, &gs, lr_pos)?;
    for (g, c) in gaussians.iter_mut().zip(vals.chunks_exact(3)) {
        g.position = Vector3::new(c[0], c[1], c[2]);
    }

    vals.clear();
    gs.clear();
    for g in gaussians.iter() {
        vals.extend_from_slice(g.log_scale.as_slice());
    }
    for d in &grads.d_log_scale {
        gs.extend_from_slice(d.as_slice());
    }
    adam.update(ParamGroup::LogScale, &mut vals, &gs, fl(config.lr_log_scale))?;
    for (g, c) in gaussians.iter_mut().zip(vals.chunks_exact(3)) {
        g.log_scale = Vector3::new(c[0], c[1], c[2]);
    }

    vals.clear();
    gs.clear();
    for g in gaussians.iter() {
        vals.extend_from_slice(g.rotation.as_slice());
    }
    for d in &grads.d_rotation {
        gs.extend_from_slice(d.as_slice());
    }
    adam.update(ParamGroup::Rotation, &mut vals, &gs, fl(config.lr_rotation))?;
    for (g, c) in gaussians.iter_mut().zip(vals.chunks_exact(4)) {
        g.rotation = Vector4::new(c[0], c[1], c[2], c[3]);
    }

    vals.clear();
    gs.clear();
    for g in gaussians.iter() {
        vals.push(g.opacity_logit);
    }
    gs.extend_from_slice(&grads.d_opacity_logit);
    adam.update(ParamGroup::Opacity, &mut vals, &gs, fl(config.lr_opacity))?;
    for (g, v) in gaussians.iter_mut().zip(&vals) {
        g.opacity_logit = *v;
    }

    vals.clear();
    gs.clear();
    for g in gaussians.iter() {
        for c in &g.sh_coeffs {
            vals.extend_from_slice(c.as_slice());
        }
    }
    for d in &grads.d_sh {
        gs.extend_from_slice(d.as_slice());
    }
    adam.update(ParamGroup::Sh, &mut vals, &gs, fl(config.lr_sh))?;
    for (i, g) in gaussians.iter_mut().enumerate() {
        for (k, c) in g.sh_coeffs.iter_mut().enumerate() {
            let base = (i * stride + k) * 3;
            *c = Vector3::new(vals[base], vals[base + 1], vals[base + 2]);
        }
    }
    Ok(())
}

/// Trains one block for `config.iterations` steps. The block's primitives
/// initialize from its owned points; the rest of the cloud renders as
/// frozen context (cameras see the whole scene, so without it the
/// unexplained remainder would drag the owned primitives toward other
/// blocks' content).
pub fn train_block<T: Real>(
    block: &SceneBlock<T>,
    dataset: &SceneDataset<T>,
    config: &TrainConfig,
) -> Result<TrainedBlock<T>> {
    config.validate()?;
    let extent = dataset.scene_extent();
    let tau = resolve_tau(config, dataset)?;

    let sub = PointCloud {
        positions: block.point_indices.iter().map(|&i| dataset.points.positions[i]).collect(),
        colors: block.point_indices.iter().map(|&i| dataset.points.colors[i]).collect(),
    };
    let initialized = init_gaussians(&sub, tau, extent, config.sh_degree)?;
    let mut warnings = Vec::new();
    if let Some(w) = initialized.warning {
        warnings.push(format!("block {}: {w}", block.id));
    }

    let n_points = dataset.points.positions.len();
    let context: Vec<GaussianPrimitive<T>> = if block.point_indices.len() == n_points {
        Vec::new()
    } else {
        let mut owned = vec![false; n_points];
        for &i in &block.point_indices {
            owned[i] = true;
        }
        let rest = PointCloud {
            positions: (0..n_points).filter(|&i| !owned[i]).map(|i| dataset.points.positions[i]).collect(),
            colors: (0..n_points).filter(|&i| !owned[i]).map(|i| dataset.points.colors[i]).collect(),
        };
        init_gaussians(&rest, tau, extent, config.sh_degree)?.gaussians
    };
    train_block_core(block, dataset, config, initialized.gaussians, context, warnings)
}

/// The block training loop. Each step renders one training camera (seeded
/// shuffle per epoch) over the owned primitives plus the frozen context,
/// accumulates gradients from the base loss (level 0), the multi-scale term
/// (levels 1..L-1), and the size term, then applies a single per-group Adam
/// update; density control runs on its schedule. Gradients, density control,
/// and the optimizer touch only the owned primitives.
fn train_block_core<T: Real>(
    block: &SceneBlock<T>,
    dataset: &SceneDataset<T>,
    config: &TrainConfig,
    mut gaussians: Vec<GaussianPrimitive<T>>,
    context: Vec<GaussianPrimitive<T>>,
    mut warnings: Vec<String>,
) -> Result<TrainedBlock<T>> {
    config.validate()?;
    let cam_indices: Vec<usize> = dataset
        .cameras
        .iter()
        .enumerate()
        .filter(|(_, c)| c.split == Split::Train && block.camera_ids.contains(&c.id))
        .map(|(i, _)| i)
        .collect();
    if cam_indices.is_empty() {
        return Err(Error::Config(format!("block {} has no training cameras", block.id)));
    }

    let extent = dataset.scene_extent();
    let tau = resolve_tau(config, dataset)?;
    let densify_tau = tau.unwrap_or_else(|| extent / fl::<T>(100.0));

    let opts = RenderOptions::default();
    let sigma = fl::<T>(config.pyramid_sigma);
    let lambda_dssim = fl::<T>(config.lambda_dssim);
    let lambda_mss = fl::<T>(config.lambda_mss);
    let lambda_size = fl::<T>(config.lambda_size);

    // Ground-truth pyramids are static; build them once (only needed when
    // the multi-scale term is active).
    let gt_pyramids: Option<Vec<ImagePyramid<T>>> = if config.lambda_mss > 0.0 {
        let mut pyrs = Vec::with_capacity(cam_indices.len());
        for &ci in &cam_indices {
            pyrs.push(build_gt_pyramid(dataset.images[ci].clone(), config.pyramid_levels, sigma)?);
        }
        Some(pyrs)
    } else {
        None
    };

    let mut cam_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, block.id as u64, 0));
    let mut den_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, block.id as u64, 1));
    let mut order: Vec<usize> = (0..cam_indices.len()).collect();
    let mut cursor = order.len();

    let sh_stride = sh_coeff_count(config.sh_degree);
    let mut adam = Adam::<T>::new();
    let mut grad_accum = vec![T::zero(); gaussians.len()];
    let mut seen = vec![0u32; gaussians.len()];
    let mut loss_history: Vec<LossBreakdown<f64>> = Vec::with_capacity(config.iterations);
    let mut events = Vec::new();

    for it in 0..config.iterations {
        if cursor == order.len() {
            order.shuffle(&mut cam_rng);
            cursor = 0;
        }
        let slot = order[cursor];
        cursor += 1;
        let ci = cam_indices[slot];
        let cam = &dataset.cameras[ci];
        let gt0 = &dataset.images[ci];

        let n_own = gaussians.len();
        let joined: Vec<GaussianPrimitive<T>>;
        let scene: &[GaussianPrimitive<T>] = if context.is_empty() {
            &gaussians
        } else {
            joined = gaussians.iter().chain(&context).cloned().collect();
            &joined
        };

        let rendered = render(scene, cam, &opts)?;
        let clamped = rendered.output.image.clamped01();
        let base = base_loss(&clamped, gt0, lambda_dssim)?;
        let mut upstream = base.grad;
        zero_where_clamped(&mut upstream, &rendered.output.image);
        let mut grads = render_backward(&rendered.context, scene, &upstream)?;

        let mut mss_value = T::zero();
        if let Some(pyrs) = &gt_pyramids {
            let gt_pyr = &pyrs[slot];
            let l_cam = gt_pyr.num_levels();
            if l_cam > 1 {
                let mut level_renders: Vec<Rendered<T>> = Vec::with_capacity(l_cam - 1);
                let mut level_images: Vec<ImageBuffer<T>> = Vec::with_capacity(l_cam);
                level_images.push(clamped.clone());
                for l in 1..l_cam {
                    let r = render_at_level(scene, cam, l, &opts)?;
                    level_images.push(r.output.image.clamped01());
                    level_renders.push(r);
                }
                let rendered_pyr =
                    ImagePyramid { levels: level_images, sigma: T::zero(), kind: PyramidKind::Rendered };
                let mss = mss_loss(&rendered_pyr, gt_pyr, None)?;
                mss_value = mss.loss;
                for (lr, mut up) in level_renders.iter().zip(mss.level_grads) {
                    for v in &mut up.data {
                        *v *= lambda_mss;
                    }
                    zero_where_clamped(&mut up, &lr.output.image);
                    let level_grads = render_backward(&lr.context, scene, &up)?;
                    grads.accumulate(&level_grads);
                }
            }
        }
        grads.truncate(n_own);

        let mut size_value = T::zero();
        if config.lambda_size > 0.0 {
            let tau_v = tau.expect("tau resolution is fatal when the size loss is active");
            let (sv, sg) = size_loss(&gaussians, tau_v, config.normalize_size_loss)?;
            size_value = sv;
            for (d, g) in grads.d_log_scale.iter_mut().zip(&sg) {
                *d += g * lambda_size;
            }
        }

        let breakdown =
            total_loss(base.l1, base.dssim, lambda_dssim, mss_value, size_value, lambda_mss, lambda_size)?;
        check_finite(it, &breakdown)?;
        loss_history.push(breakdown.to_f64());

        for i in 0..gaussians.len() {
            if grads.visible[i] {
                grad_accum[i] += grads.d_mean2d[i].norm();
                seen[i] += 1;
            }
        }

        adam.begin_step();
        apply_updates(&mut adam, &mut gaussians, &grads, config, extent, it)?;

        let step1 = it + 1;
        if step1 % config.densify_interval == 0 && step1 <= config.densify_until_iter {
            let mean: Vec<T> = grad_accum
                .iter()
                .zip(&seen)
                .map(|(&a, &s)| if s > 0 { a / <T as Real>::from_usize(s as usize) } else { T::zero() })
                .collect();
            let params = DensifyParams {
                grad_threshold: fl(config.densify_grad_threshold),
                prune_opacity: fl(config.prune_opacity_threshold),
                tau_size: densify_tau,
                max_gaussians: config.max_gaussians,
                densify: gaussians.len() < config.max_gaussians,
            };
            let outcome = densify_and_prune(&mut gaussians, &mean, &params, &mut den_rng)?;
            adam.remap(&outcome.moment_map, sh_stride);
            grad_accum = vec![T::zero(); gaussians.len()];
            seen = vec![0u32; gaussians.len()];
            events.push(DensifyEvent {
                iteration: step1,
                cloned: outcome.cloned,
                split: outcome.split,
                pruned: outcome.pruned,
                total_after: gaussians.len(),
            });
        }
    }

    // Block-level metrics render with the context so they reflect what the
    // cameras actually saw during training (context is empty single-block).
    let joined: Vec<GaussianPrimitive<T>>;
    let scene: &[GaussianPrimitive<T>] = if context.is_empty() {
        &gaussians
    } else {
        joined = gaussians.iter().chain(&context).cloned().collect();
        &joined
    };
    let mut final_metrics = Vec::new();
    for (i, cam) in dataset.cameras.iter().enumerate() {
        if block.camera_ids.contains(&cam.id) {
            final_metrics.push(evaluate_camera(scene, cam, &dataset.images[i], &opts, config.pyramid_sigma)?);
        }
    }

    let final_count = gaussians.len();
    Ok(TrainedBlock {
        gaussians,
        report: TrainReport { loss_history, events, final_metrics, final_count, warnings },
        optimizer: adam,
    })
}

/// Partitions, trains, and merges. A single-block grid trains directly. A
/// multi-block grid runs coarse-to-fine: a global warmup pass over the whole
/// scene spends half the iteration budget aligning all primitives, then each
/// block refines its share of the warmed-up model against the frozen
/// remainder — boundary content every block agrees on, so the merged halves
/// stay consistent. Blocks that own nothing are skipped with a warning; the
/// merged report concatenates histories and recomputes final metrics over
/// every camera on the merged model.
pub fn train_scene<T: Real>(dataset: &SceneDataset<T>, config: &TrainConfig) -> Result<TrainResult<T>> {
    config.validate()?;
    dataset.validate()?;
    let blocks = partition_scene(dataset, config.grid, config.camera_margin)?;

    if blocks.len() == 1 {
        let TrainedBlock { gaussians, report: mut rep, optimizer } = train_block(&blocks[0], dataset, config)?;
        rep.final_count = gaussians.len();
        return Ok(TrainResult { gaussians, report: rep, optimizer: Some(optimizer) });
    }

    // Global warmup over every point and camera, under a pseudo-block id
    // past the real ones so its RNG streams are distinct.
    let warmup_iters = config.iterations / 2;
    let full = SceneBlock {
        id: blocks.len(),
        cell: (0, 0),
        lo: Vector3::zeros(),
        hi: Vector3::zeros(),
        camera_ids: dataset.cameras.iter().map(|c| c.id).collect(),
        point_indices: (0..dataset.points.positions.len()).collect(),
    };
    let warm_cfg = TrainConfig { iterations: warmup_iters, ..config.clone() };
    let warm = train_block(&full, dataset, &warm_cfg)?;

    let positions: Vec<Vector3<T>> = warm.gaussians.iter().map(|g| g.position).collect();
    let owners = owner_blocks(&blocks, &positions)?;

    let refine_cfg = TrainConfig { iterations: config.iterations - warmup_iters, ..config.clone() };
    let mut per_block: Vec<Vec<GaussianPrimitive<T>>> = Vec::with_capacity(blocks.len());
    let mut reports: Vec<TrainReport> = Vec::new();
    let mut skipped: Vec<String> = Vec::new();
    for block in &blocks {
        let own: Vec<GaussianPrimitive<T>> = warm
            .gaussians
            .iter()
            .zip(&owners)
            .filter(|(_, &o)| o == block.id)
            .map(|(g, _)| g.clone())
            .collect();
        if own.is_empty() {
            skipped.push(format!("block {} owns no primitives after warmup; skipped", block.id));
            per_block.push(Vec::new());
            continue;
        }
        let context: Vec<GaussianPrimitive<T>> = warm
            .gaussians
            .iter()
            .zip(&owners)
            .filter(|(_, &o)| o != block.id)
            .map(|(g, _)| g.clone())
            .collect();
        let TrainedBlock { gaussians, report, .. } =
            train_block_core(block, dataset, &refine_cfg, own, context, Vec::new())?;
        per_block.push(gaussians);
        reports.push(report);
    }

    let gaussians = merge_blocks(&blocks, per_block)?;
    let mut merged = TrainReport::default();
    merged.loss_history.extend(warm.report.loss_history);
    merged.events.extend(warm.report.events);
    merged.warnings.extend(warm.report.warnings);
    for r in reports {
        merged.loss_history.extend(r.loss_history);
        merged.events.extend(r.events);
        merged.warnings.extend(r.warnings);
    }
    merged.warnings.extend(skipped);
    let opts = RenderOptions::default();
    for (i, cam) in dataset.cameras.iter().enumerate() {
        merged
            .final_metrics
            .push(evaluate_camera(&gaussians, cam, &dataset.images[i], &opts, config.pyramid_sigma)?);
    }
    merged.final_count = gaussians.len();
    Ok(TrainResult { gaussians, report: merged, optimizer: None })
}
