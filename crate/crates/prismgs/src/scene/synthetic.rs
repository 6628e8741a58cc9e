//! Procedural test scenes with exact geometry and self-rendered ground truth.
//!
//! Each family builds a known set of primitives and a camera rig, then
//! renders ground-truth images with the renderer itself at `supersample`x
//! resolution followed by a box filter, so that ground truth contains the
//! sub-pixel detail a plain one-sample render would alias away.
//!
//! Families:
//! - `checkerboard-plane`: a grid of alternating-color primitives on a plane,
//!   viewed from near/mid/far orbit rings. Fine detail; exercises aliasing.
//! - `gaussian-field`: randomized anisotropic primitives in a box, with one
//!   deterministic isotropic anchor at the scene center. Orbit rings.
//! - `two-walls`: two parallel walls at known depths d1 < d2, cameras on a
//!   small ring in the z=0 plane with identity rotation, so the minimum
//!   visible point depth is exactly d1.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::{centered_principal_point, Camera, Split};
use crate::error::{Error, Result};
use crate::gaussian::{rgb_to_dc_coeff, GaussianPrimitive};
use crate::image_buf::ImageBuffer;
use crate::real::{fl, Real};
use crate::render::{render, RenderOptions};

use super::{PointCloud, SceneDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneFamily {
    CheckerboardPlane,
    GaussianField,
    TwoWalls,
}

impl SceneFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "checkerboard-plane" => Ok(Self::CheckerboardPlane),
            "gaussian-field" => Ok(Self::GaussianField),
            "two-walls" => Ok(Self::TwoWalls),
            other => Err(Error::InvalidInput(format!(
                "unknown scene family '{other}' (expected checkerboard-plane, gaussian-field, or two-walls)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CheckerboardPlane => "checkerboard-plane",
            Self::GaussianField => "gaussian-field",
            Self::TwoWalls => "two-walls",
        }
    }
}

/// Parameters for a synthetic scene. `n_primitives` is the grid side for the
/// plane/wall families and the primitive count for `gaussian-field`; `seed`
/// only affects `gaussian-field`.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub family: SceneFamily,
    pub n_cameras: usize,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub n_primitives: usize,
    pub seed: u64,
    pub supersample: usize,
    pub test_every: usize,
}

impl SyntheticSpec {
    pub fn new(family: SceneFamily) -> Self {
        let n_primitives = match family {
            SceneFamily::CheckerboardPlane => 16,
            SceneFamily::GaussianField => 48,
            SceneFamily::TwoWalls => 9,
        };
        Self {
            family,
            n_cameras: 24,
            width: 64,
            height: 64,
            focal: 64.0,
            n_primitives,
            seed: 7,
            supersample: 4,
            test_every: 4,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_cameras < 2 {
            return Err(Error::InvalidInput("need at least 2 cameras".to_string()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::InvalidInput("images must be at least 16x16".to_string()));
        }
        if !(self.focal > 0.0) {
            return Err(Error::InvalidInput("focal length must be positive".to_string()));
        }
        if self.n_primitives == 0 {
            return Err(Error::InvalidInput("need at least one primitive".to_string()));
        }
        if !(1..=8).contains(&self.supersample) {
            return Err(Error::InvalidInput("supersample must be in 1..=8".to_string()));
        }
        if self.test_every < 2 {
            return Err(Error::InvalidInput("test_every must be at least 2".to_string()));
        }
        Ok(())
    }
}

pub struct SyntheticScene<T: Real> {
    pub dataset: SceneDataset<T>,
    /// The primitives ground truth was rendered from.
    pub truth: Vec<GaussianPrimitive<T>>,
}

pub fn generate_synthetic_scene<T: Real>(spec: &SyntheticSpec) -> Result<SyntheticScene<T>> {
    spec.validate()?;
    let (truth, mut cameras) = match spec.family {
        SceneFamily::CheckerboardPlane => checkerboard_plane(spec),
        SceneFamily::GaussianField => gaussian_field(spec),
        SceneFamily::TwoWalls => two_walls(spec),
    };
    for (i, cam) in cameras.iter_mut().enumerate() {
        cam.id = i as u32;
        cam.split = if i % spec.test_every == spec.test_every - 1 { Split::Test } else { Split::Train };
        cam.image_path = format!("images/cam_{i:03}.png");
    }

    let opts = RenderOptions::default();
    let mut images = Vec::with_capacity(cameras.len());
    for cam in &cameras {
        images.push(ground_truth_image(&truth, cam, spec.supersample, &opts)?);
    }

    let points = PointCloud {
        positions: truth.iter().map(|g| g.position).collect(),
        colors: truth
            .iter()
            .map(|g| {
                let c = crate::gaussian::eval_sh_color(&g.sh_coeffs, &Vector3::z())
                    .unwrap_or_else(|_| Vector3::zeros());
                [to_u8(c[0]), to_u8(c[1]), to_u8(c[2])]
            })
            .collect(),
    };

    let dataset = SceneDataset { cameras, points, images };
    dataset.validate()?;
    Ok(SyntheticScene { dataset, truth })
}

/// Renders `cam` at `supersample`x resolution and box-filters back down,
/// clamping to [0,1].
pub fn ground_truth_image<T: Real>(
    gaussians: &[GaussianPrimitive<T>],
    cam: &Camera<T>,
    supersample: usize,
    opts: &RenderOptions<T>,
) -> Result<ImageBuffer<T>> {
    let cam_s = cam.supersampled(supersample);
    let rendered = render(gaussians, &cam_s, opts)?;
    Ok(box_downsample(&rendered.output.image, supersample)?.clamped01())
}

/// Averages `factor`x`factor` blocks. Dimensions must be exact multiples.
pub fn box_downsample<T: Real>(img: &ImageBuffer<T>, factor: usize) -> Result<ImageBuffer<T>> {
    if factor == 0 {
        return Err(Error::Contract("box filter factor must be positive".to_string()));
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    if img.width % factor != 0 || img.height % factor != 0 {
        return Err(Error::Contract(format!(
            "{}x{} image is not divisible by box filter factor {factor}",
            img.width, img.height
        )));
    }
    let inv = T::one() / <T as Real>::from_usize(factor * factor);
    Ok(ImageBuffer::from_fn(img.width / factor, img.height / factor, |x, y| {
        let mut acc = [T::zero(); 3];
        for dy in 0..factor {
            for dx in 0..factor {
                let px = img.get(x * factor + dx, y * factor + dy);
                for c in 0..3 {
                    acc[c] += px[c];
                }
            }
        }
        [acc[0] * inv, acc[1] * inv, acc[2] * inv]
    }))
}

fn to_u8<T: Real>(v: T) -> u8 {
    (v.to_f64().clamp(0.0, 1.0) * 255.0).round() as u8
}

/// World-to-camera rotation that points the optical axis from `pos` at
/// `target`, with image y roughly along world +y.
fn look_at_rotation<T: Real>(pos: &Vector3<T>, target: &Vector3<T>) -> Matrix3<T> {
    let f = (target - pos).normalize();
    let up = Vector3::new(T::zero(), T::one(), T::zero());
    let x = up.cross(&f).normalize();
    let y = f.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), f.transpose()])
}

fn camera_at<T: Real>(spec: &SyntheticSpec, pos: Vector3<T>, rotation: Matrix3<T>) -> Camera<T> {
    let (cx, cy) = centered_principal_point(spec.width, spec.height);
    Camera {
        id: 0,
        fx: fl(spec.focal),
        fy: fl(spec.focal),
        cx,
        cy,
        width: spec.width,
        height: spec.height,
        rotation,
        translation: -(rotation * pos),
        split: Split::Train,
        image_path: String::new(),
    }
}

/// Cameras on three rings (near/mid/far) looking at `center`. Ring `r` sits
/// at distance `dists[r]` with polar tilt `tilts[r]` off the -z axis.
fn orbit_cameras<T: Real>(
    spec: &SyntheticSpec,
    center: Vector3<T>,
    dists: [f64; 3],
    tilts: [f64; 3],
) -> Vec<Camera<T>> {
    let n = spec.n_cameras;
    (0..n)
        .map(|i| {
            let ring = i % 3;
            let k = i / 3;
            let in_ring = (n - ring).div_ceil(3);
            let theta = std::f64::consts::TAU * k as f64 / in_ring as f64 + 0.37 * ring as f64;
            let (d, phi) = (dists[ring], tilts[ring]);
            let u = Vector3::new(
                fl::<T>(phi.sin() * theta.cos()),
                fl::<T>(phi.sin() * theta.sin()),
                fl::<T>(phi.cos()),
            );
            let pos = center - u * fl::<T>(d);
            let rot = look_at_rotation(&pos, &center);
            camera_at(spec, pos, rot)
        })
        .collect()
}

fn dc_gaussian<T: Real>(
    position: Vector3<T>,
    scale: Vector3<T>,
    rgb: [f64; 3],
    opacity_logit: f64,
) -> GaussianPrimitive<T> {
    GaussianPrimitive {
        position,
        log_scale: scale.map(|s| s.ln()),
        rotation: nalgebra::Vector4::new(T::one(), T::zero(), T::zero(), T::zero()),
        opacity_logit: fl(opacity_logit),
        sh_coeffs: vec![rgb_to_dc_coeff([fl(rgb[0]), fl(rgb[1]), fl(rgb[2])])],
    }
}

/// Grid of alternating light/dark primitives on the z=2 plane, 2x2 world
/// units, viewed from three orbit rings.
fn checkerboard_plane<T: Real>(spec: &SyntheticSpec) -> (Vec<GaussianPrimitive<T>>, Vec<Camera<T>>) {
    let side = spec.n_primitives;
    let plane_z = 2.0;
    let half = 1.0;
    let spacing = 2.0 * half / side as f64;
    let sigma = spacing / 2.0;
    let light = [0.9, 0.87, 0.8];
    let dark = [0.08, 0.1, 0.14];

    let mut truth = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            let x = -half + (i as f64 + 0.5) * spacing;
            let y = -half + (j as f64 + 0.5) * spacing;
            let rgb = if (i + j) % 2 == 0 { light } else { dark };
            truth.push(dc_gaussian(
                Vector3::new(fl(x), fl(y), fl(plane_z)),
                Vector3::new(fl(sigma), fl(sigma), fl(0.015)),
                rgb,
                3.0,
            ));
        }
    }
    let center = Vector3::new(T::zero(), T::zero(), fl(plane_z));
    let cams = orbit_cameras(spec, center, [1.6, 2.4, 3.6], [0.35, 0.25, 0.18]);
    (truth, cams)
}

/// Randomized anisotropic primitives in a box around (0,0,2.2), plus one
/// deterministic isotropic anchor at the exact center.
fn gaussian_field<T: Real>(spec: &SyntheticSpec) -> (Vec<GaussianPrimitive<T>>, Vec<Camera<T>>) {
    let center = Vector3::new(0.0, 0.0, 2.2);
    let half = Vector3::new(0.8, 0.8, 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut truth = Vec::with_capacity(spec.n_primitives);
    truth.push(dc_gaussian(
        Vector3::new(fl(center.x), fl(center.y), fl(center.z)),
        Vector3::new(fl(0.09), fl(0.09), fl(0.09)),
        [0.85, 0.8, 0.7],
        2.5,
    ));
    for _ in 1..spec.n_primitives {
        let pos = Vector3::new(
            fl::<T>(center.x + rng.random_range(-half.x..half.x)),
            fl::<T>(center.y + rng.random_range(-half.y..half.y)),
            fl::<T>(center.z + rng.random_range(-half.z..half.z)),
        );
        let mut scale = Vector3::zeros();
        for k in 0..3 {
            scale[k] = fl::<T>((rng.random_range(0.04f64.ln()..0.13f64.ln())).exp());
        }
        let rgb = [
            rng.random_range(0.15..0.9),
            rng.random_range(0.15..0.9),
            rng.random_range(0.15..0.9),
        ];
        let logit = rng.random_range(0.8..3.0);
        let mut g = dc_gaussian(pos, scale, rgb, logit);
        g.rotation = nalgebra::Vector4::new(
            fl(rng.random_range(-1.0..1.0f64)),
            fl(rng.random_range(-1.0..1.0f64)),
            fl(rng.random_range(-1.0..1.0f64)),
            fl(rng.random_range(-1.0..1.0f64)),
        );
        if g.rotation.norm() < <T as Real>::from_f64(1e-3) {
            g.rotation = nalgebra::Vector4::new(T::one(), T::zero(), T::zero(), T::zero());
        }
        truth.push(g);
    }
    let center_t = Vector3::new(fl(center.x), fl(center.y), fl(center.z));
    let cams = orbit_cameras(spec, center_t, [1.5, 2.2, 3.2], [0.4, 0.3, 0.2]);
    (truth, cams)
}

/// Wall-1 checker distance in front of wall-2 backdrop. Cameras sit on a ring
/// in the z=0 plane with identity rotation, so every camera's nearest visible
/// point is exactly at depth `WALL1_Z`.
pub const WALL1_Z: f64 = 2.0;
pub const WALL2_Z: f64 = 4.0;

fn two_walls<T: Real>(spec: &SyntheticSpec) -> (Vec<GaussianPrimitive<T>>, Vec<Camera<T>>) {
    let mut truth = Vec::new();
    let wall = |truth: &mut Vec<GaussianPrimitive<T>>, z: f64, half: f64, side: usize, a: [f64; 3], b: [f64; 3]| {
        let spacing = 2.0 * half / (side - 1).max(1) as f64;
        let sigma = spacing / 2.0;
        for j in 0..side {
            for i in 0..side {
                let x = -half + i as f64 * spacing;
                let y = -half + j as f64 * spacing;
                let rgb = if (i + j) % 2 == 0 { a } else { b };
                truth.push(dc_gaussian(
                    Vector3::new(fl(x), fl(y), fl(z)),
                    Vector3::new(fl(sigma), fl(sigma), fl(sigma)),
                    rgb,
                    3.0,
                ));
            }
        }
    };
    wall(&mut truth, WALL1_Z, 0.8, spec.n_primitives, [0.85, 0.3, 0.25], [0.92, 0.9, 0.85]);
    wall(&mut truth, WALL2_Z, 2.0, spec.n_primitives + 4, [0.2, 0.3, 0.7], [0.55, 0.6, 0.65]);

    let n = spec.n_cameras;
    let cams = (0..n)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / n as f64;
            let pos = Vector3::new(fl::<T>(0.25 * theta.cos()), fl::<T>(0.25 * theta.sin()), T::zero());
            camera_at(spec, pos, Matrix3::identity())
        })
        .collect();
    (truth, cams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::build_gt_pyramid;
    use crate::regularize::compute_sampling_bound;
    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    fn small_spec(family: SceneFamily) -> SyntheticSpec {
        let mut spec = SyntheticSpec::new(family);
        spec.n_cameras = 6;
        spec
    }

    #[test]
    fn family_names_round_trip() {
        for family in [SceneFamily::CheckerboardPlane, SceneFamily::GaussianField, SceneFamily::TwoWalls] {
            assert_eq!(SceneFamily::parse(family.as_str()).unwrap(), family);
        }
        assert!(SceneFamily::parse("nerf").is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec(SceneFamily::GaussianField);
        let a: SyntheticScene<f32> = generate_synthetic_scene(&spec).unwrap();
        let b: SyntheticScene<f32> = generate_synthetic_scene(&spec).unwrap();
        assert_eq!(a.truth.len(), b.truth.len());
        for (ga, gb) in a.truth.iter().zip(&b.truth) {
            assert_eq!(ga.position, gb.position);
            assert_eq!(ga.log_scale, gb.log_scale);
        }
        for (ia, ib) in a.dataset.images.iter().zip(&b.dataset.images) {
            assert_eq!(ia.data, ib.data);
        }
    }

    #[test]
    fn splits_follow_test_every() {
        let mut spec = small_spec(SceneFamily::TwoWalls);
        spec.n_cameras = 8;
        let scene: SyntheticScene<f32> = generate_synthetic_scene(&spec).unwrap();
        let train = scene.dataset.train_indices();
        let test = scene.dataset.test_indices();
        assert_eq!(test, vec![3, 7]);
        assert_eq!(train.len() + test.len(), 8);
        for img in &scene.dataset.images {
            assert!(img.is_finite());
            assert!(img.data.iter().all(|&v| v >= 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn two_walls_min_depth_is_exactly_the_front_wall() {
        let spec = small_spec(SceneFamily::TwoWalls);
        let scene: SyntheticScene<f64> = generate_synthetic_scene(&spec).unwrap();
        let bound = compute_sampling_bound(
            &scene.dataset.cameras,
            &scene.dataset.points.positions,
            0.01,
            2.0,
        )
        .unwrap();
        // d/f = 2/64 and the factor-2 scaling are exact in binary floating point.
        assert_eq!(bound.t_min, WALL1_Z / spec.focal);
        assert_eq!(bound.tau_size, 2.0 * WALL1_Z / spec.focal);
        assert_eq!(bound.per_camera_t.len(), scene.dataset.train_indices().len());
        for &(_, t) in &bound.per_camera_t {
            assert_eq!(t, WALL1_Z / spec.focal);
        }
    }

    #[test]
    fn gaussian_field_anchor_is_brightest_at_principal_point() {
        let mut spec = small_spec(SceneFamily::GaussianField);
        spec.n_primitives = 1;
        let scene: SyntheticScene<f64> = generate_synthetic_scene(&spec).unwrap();
        for (cam, img) in scene.dataset.cameras.iter().zip(&scene.dataset.images) {
            let mut best = (0usize, 0usize);
            let mut best_v = -1.0;
            for y in 0..img.height {
                for x in 0..img.width {
                    let p = img.get(x, y);
                    let v = p[0] + p[1] + p[2];
                    if v > best_v {
                        best_v = v;
                        best = (x, y);
                    }
                }
            }
            assert!(best_v > 0.0, "camera {} rendered black", cam.id);
            assert!(
                (best.0 as f64 - cam.cx).abs() <= 0.75 && (best.1 as f64 - cam.cy).abs() <= 0.75,
                "camera {}: brightest pixel {:?} not at principal point ({}, {})",
                cam.id,
                best,
                cam.cx,
                cam.cy
            );
        }
    }

    /// Energy above 0.3 cycles/pixel in a mean-removed grayscale FFT.
    fn high_band_energy(img: &ImageBuffer<f64>) -> f64 {
        let (w, h) = (img.width, img.height);
        let mut gray = vec![Complex::new(0.0, 0.0); w * h];
        let mut mean = 0.0;
        for y in 0..h {
            for x in 0..w {
                let p = img.get(x, y);
                let v = (p[0] + p[1] + p[2]) / 3.0;
                gray[y * w + x].re = v;
                mean += v;
            }
        }
        mean /= (w * h) as f64;
        for v in &mut gray {
            v.re -= mean;
        }
        let mut planner = FftPlanner::new();
        let row_fft = planner.plan_fft_forward(w);
        for y in 0..h {
            row_fft.process(&mut gray[y * w..(y + 1) * w]);
        }
        let col_fft = planner.plan_fft_forward(h);
        let mut col = vec![Complex::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                col[y] = gray[y * w + x];
            }
            col_fft.process(&mut col);
            for y in 0..h {
                gray[y * w + x] = col[y];
            }
        }
        let mut energy = 0.0;
        for y in 0..h {
            for x in 0..w {
                let fx = x.min(w - x) as f64 / w as f64;
                let fy = y.min(h - y) as f64 / h as f64;
                if fx.max(fy) > 0.3 {
                    energy += gray[y * w + x].norm_sqr();
                }
            }
        }
        energy
    }

    #[test]
    fn supersampled_ground_truth_reduces_high_frequency_energy_on_far_ring() {
        let mut spec = small_spec(SceneFamily::CheckerboardPlane);
        spec.n_cameras = 9;
        // A fine checker: far-ring splats are sub-pixel (~0.28 px), where the
        // 1-sample render aliases and the supersampled ground truth does not.
        spec.n_primitives = 64;
        let scene: SyntheticScene<f64> = generate_synthetic_scene(&spec).unwrap();
        let opts = RenderOptions::default();
        // Ring assignment is round-robin, so camera 2 is on the far ring.
        for far in [2usize, 5, 8] {
            let cam = &scene.dataset.cameras[far];
            let naive = render(&scene.truth, cam, &opts).unwrap().output.image.clamped01();
            let e_naive = high_band_energy(&naive);
            let e_gt = high_band_energy(&scene.dataset.images[far]);
            assert!(e_naive > 0.0);
            assert!(
                e_gt < e_naive,
                "camera {far}: supersampled energy {e_gt} not below naive {e_naive}"
            );
        }
    }

    #[test]
    fn gt_pyramid_levels_track_direct_supersampled_renders() {
        let spec = small_spec(SceneFamily::CheckerboardPlane);
        let scene: SyntheticScene<f64> = generate_synthetic_scene(&spec).unwrap();
        let opts = RenderOptions::default();
        let cam = &scene.dataset.cameras[0];
        let pyr = build_gt_pyramid(scene.dataset.images[0].clone(), 4, 1.0).unwrap();
        for level in 1..4 {
            let cam_l = cam.scaled_for_level(level);
            let direct = ground_truth_image(&scene.truth, &cam_l, spec.supersample, &opts).unwrap();
            let diff = pyr.levels[level].mean_abs_diff(&direct).unwrap();
            assert!(diff < 0.05, "level {level}: mean L1 {diff} vs direct render");
        }
    }

    #[test]
    fn box_downsample_averages_blocks() {
        let img = ImageBuffer::<f64>::from_fn(4, 2, |x, y| {
            let v = (y * 4 + x) as f64;
            [v, 10.0 + v, 20.0 + v]
        });
        let down = box_downsample(&img, 2).unwrap();
        assert_eq!(down.width, 2);
        assert_eq!(down.height, 1);
        // Block {0,1,4,5} averages 2.5.
        assert_eq!(down.get(0, 0), [2.5, 12.5, 22.5]);
        assert_eq!(down.get(1, 0), [4.5, 14.5, 24.5]);
        assert!(box_downsample(&img, 3).is_err());
        let same = box_downsample(&img, 1).unwrap();
        assert_eq!(same.data, img.data);
    }

    #[test]
    fn spec_validation_catches_bad_values() {
        let mut spec = small_spec(SceneFamily::CheckerboardPlane);
        spec.supersample = 0;
        assert!(generate_synthetic_scene::<f32>(&spec).is_err());
        let mut spec = small_spec(SceneFamily::CheckerboardPlane);
        spec.n_cameras = 1;
        assert!(generate_synthetic_scene::<f32>(&spec).is_err());
        let mut spec = small_spec(SceneFamily::CheckerboardPlane);
        spec.test_every = 1;
        assert!(generate_synthetic_scene::<f32>(&spec).is_err());
    }
}
