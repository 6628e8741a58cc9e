//! Gaussian primitive parameterization and the deterministic math mapping
//! parameters to renderable quantities (rotation matrix, 3D covariance,
//! view-dependent color).

use nalgebra::{Matrix3, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::real::{fl, sigmoid, Real};

/// One anisotropic 3D Gaussian.
///
/// Scale is stored as log and opacity as a logit so optimizer steps cannot
/// violate positivity / the (0,1) range. Quaternion components are (w,x,y,z)
/// in memory and on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrimitive<T: Real> {
    pub position: Vector3<T>,
    pub log_scale: Vector3<T>,
    pub rotation: Vector4<T>,
    pub opacity_logit: T,
    /// One RGB coefficient per SH basis function, length `(degree + 1)^2`.
    pub sh_coeffs: Vec<Vector3<T>>,
}

impl<T: Real> GaussianPrimitive<T> {
    pub fn scale(&self) -> Vector3<T> {
        self.log_scale.map(|v| v.exp())
    }

    pub fn opacity(&self) -> T {
        sigmoid(self.opacity_logit)
    }

    pub fn sh_degree(&self) -> usize {
        sh_degree_from_coeff_count(self.sh_coeffs.len()).expect("coefficient count")
    }

    pub fn covariance(&self) -> Covariance3<T> {
        build_covariance(&self.scale(), &self.rotation).expect("scale positive by construction")
    }
}

/// Symmetric positive semi-definite 3x3 covariance, world units squared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance3<T: Real> {
    m: Matrix3<T>,
}

impl<T: Real> Covariance3<T> {
    pub fn matrix(&self) -> &Matrix3<T> {
        &self.m
    }

    pub fn det(&self) -> T {
        self.m.determinant()
    }
}

pub fn sh_coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

pub fn sh_degree_from_coeff_count(count: usize) -> Result<usize> {
    match count {
        1 => Ok(0),
        4 => Ok(1),
        9 => Ok(2),
        16 => Ok(3),
        _ => Err(Error::InvalidInput(format!("invalid SH coefficient count {count}"))),
    }
}

pub const MAX_SH_COEFFS: usize = 16;

/// Rotation matrix from a (w,x,y,z) quaternion, normalized internally.
pub fn quat_to_rotation<T: Real>(q: &Vector4<T>) -> Result<Matrix3<T>> {
    let n = q.norm();
    if n <= T::zero() || !n.is_finite() {
        return Err(Error::InvalidInput("zero-norm quaternion".into()));
    }
    let q = q / n;
    Ok(rotation_from_unit_quat(&q))
}

/// Rotation matrix from an already-normalized (w,x,y,z) quaternion.
pub fn rotation_from_unit_quat<T: Real>(q: &Vector4<T>) -> Matrix3<T> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let two = fl::<T>(2.0);
    Matrix3::new(
        T::one() - two * (y * y + z * z),
        two * (x * y - w * z),
        two * (x * z + w * y),
        two * (x * y + w * z),
        T::one() - two * (x * x + z * z),
        two * (y * z - w * x),
        two * (x * z - w * y),
        two * (y * z + w * x),
        T::one() - two * (x * x + y * y),
    )
}

/// Sigma = R diag(s)^2 R^T.
pub fn build_covariance<T: Real>(scale: &Vector3<T>, rotation: &Vector4<T>) -> Result<Covariance3<T>> {
    if scale.iter().any(|&s| s <= T::zero()) {
        return Err(Error::InvalidInput(format!(
            "non-positive scale ({}, {}, {})",
            scale.x.to_f64(),
            scale.y.to_f64(),
            scale.z.to_f64()
        )));
    }
    let r = quat_to_rotation(rotation)?;
    let d = Matrix3::from_diagonal(&scale.map(|s| s * s));
    Ok(Covariance3 { m: r * d * r.transpose() })
}

/// Partial derivatives of `rotation_from_unit_quat` with respect to each
/// quaternion component (w,x,y,z), treating the components as independent
/// (the caller chains through normalization separately).
pub fn rotation_quat_derivatives<T: Real>(q: &Vector4<T>) -> [Matrix3<T>; 4] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let two = fl::<T>(2.0);
    let zero = T::zero();
    let d_w = Matrix3::new(zero, -z, y, z, zero, -x, -y, x, zero) * two;
    let d_x = Matrix3::new(zero, y, z, y, -two * x, -w, z, w, -two * x) * two;
    let d_y = Matrix3::new(-two * y, x, w, x, zero, z, -w, z, -two * y) * two;
    let d_z = Matrix3::new(-two * z, -w, x, w, -two * z, y, x, y, zero) * two;
    [d_w, d_x, d_y, d_z]
}

const SH_C0: f64 = 0.28209479177387814;
const SH_C1: f64 = 0.4886025119029199;
const SH_C2: [f64; 5] = [
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
];
const SH_C3: [f64; 7] = [
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
];

/// Real SH basis values at `dir` for bands 0..=degree (3DGS ordering).
pub fn sh_basis<T: Real>(degree: usize, dir: &Vector3<T>) -> [T; MAX_SH_COEFFS] {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut b = [T::zero(); MAX_SH_COEFFS];
    b[0] = fl(SH_C0);
    if degree >= 1 {
        b[1] = -fl::<T>(SH_C1) * y;
        b[2] = fl::<T>(SH_C1) * z;
        b[3] = -fl::<T>(SH_C1) * x;
    }
    if degree >= 2 {
        let two = fl::<T>(2.0);
        b[4] = fl::<T>(SH_C2[0]) * x * y;
        b[5] = fl::<T>(SH_C2[1]) * y * z;
        b[6] = fl::<T>(SH_C2[2]) * (two * z * z - x * x - y * y);
        b[7] = fl::<T>(SH_C2[3]) * x * z;
        b[8] = fl::<T>(SH_C2[4]) * (x * x - y * y);
    }
    if degree >= 3 {
        let three = fl::<T>(3.0);
        let four = fl::<T>(4.0);
        let two = fl::<T>(2.0);
        b[9] = fl::<T>(SH_C3[0]) * y * (three * x * x - y * y);
        b[10] = fl::<T>(SH_C3[1]) * x * y * z;
        b[11] = fl::<T>(SH_C3[2]) * y * (four * z * z - x * x - y * y);
        b[12] = fl::<T>(SH_C3[3]) * z * (two * z * z - three * x * x - three * y * y);
        b[13] = fl::<T>(SH_C3[4]) * x * (four * z * z - x * x - y * y);
        b[14] = fl::<T>(SH_C3[5]) * z * (x * x - y * y);
        b[15] = fl::<T>(SH_C3[6]) * x * (x * x - y * y);
    }
    b
}

/// Per-basis gradients w.r.t. the (unconstrained) direction components.
pub fn sh_basis_grad<T: Real>(degree: usize, dir: &Vector3<T>) -> [Vector3<T>; MAX_SH_COEFFS] {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut g = [Vector3::zeros(); MAX_SH_COEFFS];
    if degree >= 1 {
        g[1] = Vector3::new(T::zero(), -fl::<T>(SH_C1), T::zero());
        g[2] = Vector3::new(T::zero(), T::zero(), fl::<T>(SH_C1));
        g[3] = Vector3::new(-fl::<T>(SH_C1), T::zero(), T::zero());
    }
    if degree >= 2 {
        let two = fl::<T>(2.0);
        let four = fl::<T>(4.0);
        g[4] = Vector3::new(y, x, T::zero()) * fl::<T>(SH_C2[0]);
        g[5] = Vector3::new(T::zero(), z, y) * fl::<T>(SH_C2[1]);
        g[6] = Vector3::new(-two * x, -two * y, four * z) * fl::<T>(SH_C2[2]);
        g[7] = Vector3::new(z, T::zero(), x) * fl::<T>(SH_C2[3]);
        g[8] = Vector3::new(two * x, -two * y, T::zero()) * fl::<T>(SH_C2[4]);
    }
    if degree >= 3 {
        let two = fl::<T>(2.0);
        let three = fl::<T>(3.0);
        let four = fl::<T>(4.0);
        let six = fl::<T>(6.0);
        let eight = fl::<T>(8.0);
        g[9] = Vector3::new(six * x * y, three * x * x - three * y * y, T::zero()) * fl::<T>(SH_C3[0]);
        g[10] = Vector3::new(y * z, x * z, x * y) * fl::<T>(SH_C3[1]);
        g[11] = Vector3::new(
            -two * x * y,
            four * z * z - x * x - three * y * y,
            eight * y * z,
        ) * fl::<T>(SH_C3[2]);
        g[12] = Vector3::new(
            -six * x * z,
            -six * y * z,
            six * z * z - three * x * x - three * y * y,
        ) * fl::<T>(SH_C3[3]);
        g[13] = Vector3::new(
            four * z * z - three * x * x - y * y,
            -two * x * y,
            eight * x * z,
        ) * fl::<T>(SH_C3[4]);
        g[14] = Vector3::new(two * x * z, -two * y * z, x * x - y * y) * fl::<T>(SH_C3[5]);
        g[15] = Vector3::new(three * x * x - y * y, -two * x * y, T::zero()) * fl::<T>(SH_C3[6]);
    }
    g
}

/// View-dependent color: 0.5 + sum_k c_k Y_k(dir), clamped to >= 0 per channel.
///
/// The 0.5 offset is the common splatting checkpoint convention, so saved
/// files interoperate with external viewers.
pub fn eval_sh_color<T: Real>(sh_coeffs: &[Vector3<T>], view_dir: &Vector3<T>) -> Result<Vector3<T>> {
    let degree = sh_degree_from_coeff_count(sh_coeffs.len())?;
    let basis = sh_basis(degree, view_dir);
    let mut c = Vector3::repeat(fl::<T>(0.5));
    for (k, coeff) in sh_coeffs.iter().enumerate() {
        c += coeff * basis[k];
    }
    Ok(c.map(|v| v.max(T::zero())))
}

/// DC-only coefficient that reproduces `rgb` for every view direction.
pub fn rgb_to_dc_coeff<T: Real>(rgb: [T; 3]) -> Vector3<T> {
    let c0 = fl::<T>(SH_C0);
    Vector3::new(rgb[0], rgb[1], rgb[2]).map(|v| (v - fl::<T>(0.5)) / c0)
}
