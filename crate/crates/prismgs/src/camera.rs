//! Pinhole camera model.
//!
//! Pixel (i, j) is sampled at continuous image coordinates (i, j), i.e.
//! integer pixel centers. `rotation` maps world to camera coordinates
//! (`x_cam = R x_world + t`) with the camera looking down +z.

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{fl, Real};

/// Which evaluation split a camera belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera<T: Real> {
    pub id: u32,
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
    /// World-to-camera rotation.
    pub rotation: Matrix3<T>,
    /// World-to-camera translation.
    pub translation: Vector3<T>,
    pub split: Split,
    pub image_path: String,
}

impl<T: Real> Camera<T> {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation(format!(
                "camera {}: zero image dimensions",
                self.id
            )));
        }
        if self.fx <= T::zero() || self.fy <= T::zero() {
            return Err(Error::Validation(format!(
                "camera {}: non-positive focal length",
                self.id
            )));
        }
        Ok(())
    }

    /// Frobenius norm of R^T R - I; zero for an exact rotation.
    pub fn orthonormality_error(&self) -> T {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm()
    }

    /// Gram-Schmidt on the rows (camera axes in world coordinates).
    pub fn reorthonormalize(&mut self) {
        let r = self.rotation;
        let mut a = r.row(0).transpose();
        let mut b = r.row(1).transpose();
        a.normalize_mut();
        b -= a * a.dot(&b);
        b.normalize_mut();
        let c = a.cross(&b);
        self.rotation = Matrix3::from_rows(&[a.transpose(), b.transpose(), c.transpose()]);
    }

    pub fn world_to_camera(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    /// Camera center in world coordinates: -R^T t.
    pub fn center(&self) -> Vector3<T> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Unit vector from the camera center toward a world point.
    pub fn view_dir(&self, p: &Vector3<T>) -> Vector3<T> {
        (p - self.center()).normalize()
    }

    /// Perspective projection of a camera-space point to pixel coordinates.
    pub fn cam_to_pixel(&self, p_cam: &Vector3<T>) -> Vector2<T> {
        Vector2::new(
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        )
    }

    /// Projects a world point; `None` when its depth is at or behind `near`.
    pub fn project(&self, p: &Vector3<T>, near: T) -> Option<(Vector2<T>, T)> {
        let p_cam = self.world_to_camera(p);
        if p_cam.z <= near {
            return None;
        }
        Some((self.cam_to_pixel(&p_cam), p_cam.z))
    }

    /// Jacobian of the camera-space -> pixel map at `p_cam`:
    /// [[fx/z, 0, -fx x/z^2], [0, fy/z, -fy y/z^2]].
    pub fn projection_jacobian(&self, p_cam: &Vector3<T>) -> Matrix2x3<T> {
        let z = p_cam.z;
        let zz = z * z;
        Matrix2x3::new(
            self.fx / z,
            T::zero(),
            -self.fx * p_cam.x / zz,
            T::zero(),
            self.fy / z,
            -self.fy * p_cam.y / zz,
        )
    }

    /// Camera for pyramid level `level`: dimensions floor-halved per level,
    /// focal lengths halved, principal point tracked in edge coordinates
    /// (`c' = (c + 0.5) / 2 - 0.5` per level) so the optical axis stays on
    /// the same scene point after each 2x downsample.
    pub fn scaled_for_level(&self, level: usize) -> Camera<T> {
        let f = fl::<T>((1u64 << level) as f64);
        let half = fl::<T>(0.5);
        Camera {
            width: (self.width >> level).max(1),
            height: (self.height >> level).max(1),
            fx: self.fx / f,
            fy: self.fy / f,
            cx: (self.cx + half) / f - half,
            cy: (self.cy + half) / f - half,
            ..self.clone()
        }
    }

    /// Camera rendering at `factor`x resolution for box-filter downsampling
    /// back to native size (used when rendering ground-truth images).
    pub fn supersampled(&self, factor: usize) -> Camera<T> {
        let s = fl::<T>(factor as f64);
        let half = fl::<T>(0.5);
        Camera {
            width: self.width * factor,
            height: self.height * factor,
            fx: self.fx * s,
            fy: self.fy * s,
            cx: s * (self.cx + half) - half,
            cy: s * (self.cy + half) - half,
            ..self.clone()
        }
    }

    pub fn convert<U: Real>(&self) -> Camera<U> {
        Camera {
            id: self.id,
            fx: <U as Real>::from_f64(self.fx.to_f64()),
            fy: <U as Real>::from_f64(self.fy.to_f64()),
            cx: <U as Real>::from_f64(self.cx.to_f64()),
            cy: <U as Real>::from_f64(self.cy.to_f64()),
            width: self.width,
            height: self.height,
            rotation: self.rotation.map(|v| <U as Real>::from_f64(v.to_f64())),
            translation: self.translation.map(|v| <U as Real>::from_f64(v.to_f64())),
            split: self.split,
            image_path: self.image_path.clone(),
        }
    }
}

/// Principal point of a `width x height` synthetic camera: the geometric
/// image center in integer-pixel-center coordinates.
pub fn centered_principal_point<T: Real>(width: usize, height: usize) -> (T, T) {
    let half = fl::<T>(0.5);
    (
        fl::<T>(width as f64 - 1.0) * half,
        fl::<T>(height as f64 - 1.0) * half,
    )
}
