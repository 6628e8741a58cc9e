//! Shared support for the integration suites: an independent per-pixel
//! reference renderer (no tiling, its own projection and SH math) plus
//! random scene/camera generators for the oracle checks.
#![allow(dead_code)]

pub mod probes;

use nalgebra::{Vector3, Vector4};
use prismgs::camera::{Camera, Split};
use prismgs::gaussian::GaussianPrimitive;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Cutoff/termination knobs of the documented compositing contract.
#[derive(Debug, Clone, Copy)]
pub struct NaiveOptions {
    pub near_plane: f64,
    pub alpha_cutoff: f64,
    pub transmittance_stop: f64,
    pub dilation: f64,
    /// When false, contributions are restricted to the 3-sigma AABB.
    pub full_footprint: bool,
}

impl NaiveOptions {
    /// Mirror of the renderer's defaults.
    pub fn default_mode() -> Self {
        Self {
            near_plane: 0.01,
            alpha_cutoff: 1.0 / 255.0,
            transmittance_stop: 1e-4,
            dilation: 0.3,
            full_footprint: false,
        }
    }

    /// Thresholds zeroed for equivalence testing; footprint rule kept.
    pub fn equivalence_mode() -> Self {
        Self { alpha_cutoff: 0.0, transmittance_stop: 0.0, ..Self::default_mode() }
    }
}

struct NaiveSplat {
    mean_x: f64,
    mean_y: f64,
    depth: f64,
    // Inverse 2D covariance entries (symmetric).
    inv_a: f64,
    inv_b: f64,
    inv_c: f64,
    opacity: f64,
    color: [f64; 3],
    // Inclusive integer footprint.
    x_lo: i64,
    x_hi: i64,
    y_lo: i64,
    y_hi: i64,
    index: usize,
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

fn quat_matrix(q: [f64; 4]) -> [[f64; 3]; 3] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

const C0: f64 = 0.28209479177387814;
const C1: f64 = 0.4886025119029199;
const C2: [f64; 5] = [
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
];
const C3: [f64; 7] = [
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
];

fn sh_color(coeffs: &[Vector3<f64>], dir: [f64; 3]) -> [f64; 3] {
    let (x, y, z) = (dir[0], dir[1], dir[2]);
    let mut basis = [0.0f64; 16];
    basis[0] = C0;
    if coeffs.len() > 1 {
        basis[1] = -C1 * y;
        basis[2] = C1 * z;
        basis[3] = -C1 * x;
    }
    if coeffs.len() > 4 {
        basis[4] = C2[0] * x * y;
        basis[5] = C2[1] * y * z;
        basis[6] = C2[2] * (2.0 * z * z - x * x - y * y);
        basis[7] = C2[3] * x * z;
        basis[8] = C2[4] * (x * x - y * y);
    }
    if coeffs.len() > 9 {
        basis[9] = C3[0] * y * (3.0 * x * x - y * y);
        basis[10] = C3[1] * x * y * z;
        basis[11] = C3[2] * y * (4.0 * z * z - x * x - y * y);
        basis[12] = C3[3] * z * (2.0 * z * z - 3.0 * x * x - 3.0 * y * y);
        basis[13] = C3[4] * x * (4.0 * z * z - x * x - y * y);
        basis[14] = C3[5] * z * (x * x - y * y);
        basis[15] = C3[6] * x * (x * x - y * y);
    }
    let mut rgb = [0.5f64; 3];
    for (k, c) in coeffs.iter().enumerate() {
        for ch in 0..3 {
            rgb[ch] += c[ch] * basis[k];
        }
    }
    for v in &mut rgb {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    rgb
}

/// Per-pixel reference compositor: projects every Gaussian with scalar
/// math, sorts one global list by (depth, input index), and blends
/// front-to-back at each pixel. Returns a flat RGB buffer.
pub fn naive_render(
    gaussians: &[GaussianPrimitive<f64>],
    cam: &Camera<f64>,
    o: &NaiveOptions,
) -> Vec<f64> {
    let r_cam = [
        [cam.rotation[(0, 0)], cam.rotation[(0, 1)], cam.rotation[(0, 2)]],
        [cam.rotation[(1, 0)], cam.rotation[(1, 1)], cam.rotation[(1, 2)]],
        [cam.rotation[(2, 0)], cam.rotation[(2, 1)], cam.rotation[(2, 2)]],
    ];
    let t = [cam.translation.x, cam.translation.y, cam.translation.z];
    // Camera center: -R^T t.
    let mut center = [0.0f64; 3];
    for i in 0..3 {
        center[i] = -(r_cam[0][i] * t[0] + r_cam[1][i] * t[1] + r_cam[2][i] * t[2]);
    }

    let mut splats: Vec<NaiveSplat> = Vec::new();
    for (index, g) in gaussians.iter().enumerate() {
        let p = [g.position.x, g.position.y, g.position.z];
        let mut pc = [0.0f64; 3];
        for i in 0..3 {
            pc[i] = r_cam[i][0] * p[0] + r_cam[i][1] * p[1] + r_cam[i][2] * p[2] + t[i];
        }
        if !(pc[2] > o.near_plane) || !pc[2].is_finite() {
            continue;
        }

        let rg = quat_matrix([g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]]);
        let s2 = [
            (2.0 * g.log_scale.x).exp(),
            (2.0 * g.log_scale.y).exp(),
            (2.0 * g.log_scale.z).exp(),
        ];
        let mut rd = rg;
        for (i, row) in rd.iter_mut().enumerate() {
            let _ = i;
            for (j, v) in row.iter_mut().enumerate() {
                *v *= s2[j];
            }
        }
        let mut rg_t = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rg_t[i][j] = rg[j][i];
            }
        }
        let sigma_w = mat_mul(&rd, &rg_t);
        let m = mat_mul(&mat_mul(&r_cam, &sigma_w), &{
            let mut rt = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    rt[i][j] = r_cam[j][i];
                }
            }
            rt
        });

        let (fx, fy, z) = (cam.fx, cam.fy, pc[2]);
        let j0 = [fx / z, 0.0, -fx * pc[0] / (z * z)];
        let j1 = [0.0, fy / z, -fy * pc[1] / (z * z)];
        let jm = |j: &[f64; 3], k: usize| j[0] * m[0][k] + j[1] * m[1][k] + j[2] * m[2][k];
        let jm0 = [jm(&j0, 0), jm(&j0, 1), jm(&j0, 2)];
        let jm1 = [jm(&j1, 0), jm(&j1, 1), jm(&j1, 2)];
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let a_raw = dot(&jm0, &j0);
        let b_raw = dot(&jm0, &j1);
        let c_raw = dot(&jm1, &j1);
        if !(a_raw * c_raw - b_raw * b_raw > 0.0) {
            continue; // degenerate: skipped, as documented
        }
        let (a, b, c) = (a_raw + o.dilation, b_raw, c_raw + o.dilation);
        let det = a * c - b * b;

        let mean_x = fx * pc[0] / z + cam.cx;
        let mean_y = fy * pc[1] / z + cam.cy;
        if !mean_x.is_finite() || !mean_y.is_finite() {
            continue;
        }

        let (x_lo, x_hi, y_lo, y_hi) = if o.full_footprint {
            (0, cam.width as i64 - 1, 0, cam.height as i64 - 1)
        } else {
            let mid = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).max(0.0).sqrt();
            let r = 3.0 * (mid + disc).max(0.0).sqrt();
            let lo_hi = (
                (mean_x - r).floor() as i64,
                (mean_x + r).ceil() as i64,
                (mean_y - r).floor() as i64,
                (mean_y + r).ceil() as i64,
            );
            if lo_hi.1 < 0
                || lo_hi.3 < 0
                || lo_hi.0 >= cam.width as i64
                || lo_hi.2 >= cam.height as i64
            {
                continue;
            }
            lo_hi
        };

        let dir_raw = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
        let dn = (dir_raw[0] * dir_raw[0] + dir_raw[1] * dir_raw[1] + dir_raw[2] * dir_raw[2])
            .sqrt();
        let color = sh_color(&g.sh_coeffs, [dir_raw[0] / dn, dir_raw[1] / dn, dir_raw[2] / dn]);

        splats.push(NaiveSplat {
            mean_x,
            mean_y,
            depth: pc[2],
            inv_a: c / det,
            inv_b: -b / det,
            inv_c: a / det,
            opacity: 1.0 / (1.0 + (-g.opacity_logit).exp()),
            color,
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            index,
        });
    }

    splats.sort_by(|p, q| {
        p.depth
            .partial_cmp(&q.depth)
            .unwrap()
            .then(p.index.cmp(&q.index))
    });

    let (w, h) = (cam.width, cam.height);
    let mut image = vec![0.0f64; w * h * 3];
    for py in 0..h {
        for px in 0..w {
            let (fx, fy) = (px as f64, py as f64);
            let mut trans = 1.0f64;
            let pix = py * w + px;
            for s in &splats {
                if (px as i64) < s.x_lo
                    || (px as i64) > s.x_hi
                    || (py as i64) < s.y_lo
                    || (py as i64) > s.y_hi
                {
                    continue;
                }
                let dx = fx - s.mean_x;
                let dy = fy - s.mean_y;
                let q = s.inv_a * dx * dx + 2.0 * s.inv_b * dx * dy + s.inv_c * dy * dy;
                let alpha = (s.opacity * (-0.5 * q).exp()).min(1.0 - 1e-6);
                if alpha < o.alpha_cutoff {
                    continue;
                }
                for ch in 0..3 {
                    image[pix * 3 + ch] += s.color[ch] * alpha * trans;
                }
                trans *= 1.0 - alpha;
                if trans < o.transmittance_stop {
                    break;
                }
            }
        }
    }
    image
}

/// Random camera looking roughly at the origin-centered scene volume.
pub fn random_camera(rng: &mut ChaCha8Rng) -> Camera<f64> {
    let width = rng.random_range(24..=64);
    let height = rng.random_range(24..=64);
    random_camera_sized(rng, width, height)
}

/// Random pose/intrinsics at fixed image dimensions.
pub fn random_camera_sized(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Camera<f64> {
    let focal = rng.random_range(0.6..1.6) * width as f64;
    // Small random rotation: axis-angle up to ~0.25 rad.
    let axis = nalgebra::Unit::new_normalize(Vector3::new(
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
    ));
    let angle = rng.random_range(-0.25..0.25);
    let rotation = nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner();
    Camera {
        id: 0,
        fx: focal,
        fy: focal * rng.random_range(0.9..1.1),
        cx: (width as f64 - 1.0) / 2.0 + rng.random_range(-1.0..1.0),
        cy: (height as f64 - 1.0) / 2.0 + rng.random_range(-1.0..1.0),
        width,
        height,
        rotation,
        translation: Vector3::new(
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
        ),
        split: Split::Train,
        image_path: String::new(),
    }
}

/// Random Gaussians in the frustum around z in [1.5, 3.5]. One SH degree is
/// drawn per scene (the renderer requires a homogeneous coefficient count).
pub fn random_gaussians(rng: &mut ChaCha8Rng, n: usize, max_sh_degree: usize) -> Vec<GaussianPrimitive<f64>> {
    let degree = rng.random_range(0..=max_sh_degree);
    let n_coeffs = (degree + 1) * (degree + 1);
    (0..n)
        .map(|_| {
            let mut sh_coeffs = vec![Vector3::zeros(); n_coeffs];
            for (k, c) in sh_coeffs.iter_mut().enumerate() {
                let amp = if k == 0 { 1.2 } else { 0.25 };
                *c = Vector3::new(
                    (rng.random::<f64>() - 0.35) * amp,
                    (rng.random::<f64>() - 0.35) * amp,
                    (rng.random::<f64>() - 0.35) * amp,
                );
            }
            GaussianPrimitive {
                position: Vector3::new(
                    rng.random_range(-0.9..0.9),
                    rng.random_range(-0.9..0.9),
                    rng.random_range(1.5..3.5),
                ),
                log_scale: Vector3::new(
                    rng.random_range(-3.5..-1.2),
                    rng.random_range(-3.5..-1.2),
                    rng.random_range(-3.5..-1.2),
                ),
                rotation: Vector4::new(
                    1.0 + rng.random_range(-0.6..0.6),
                    rng.random_range(-0.6..0.6),
                    rng.random_range(-0.6..0.6),
                    rng.random_range(-0.6..0.6),
                ),
                opacity_logit: rng.random_range(-2.0..3.0),
                sh_coeffs,
            }
        })
        .collect()
}
