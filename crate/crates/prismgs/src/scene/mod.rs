//! Scene datasets: cameras, a sparse point cloud, and ground-truth images.
//!
//! On disk a dataset is a directory containing `cameras.txt` (versioned text
//! format), `points.ply`, and the per-camera images referenced by each
//! camera's `image_path` (PNG, values mapped to [0,1] by dividing by 255, no
//! gamma handling).

pub mod cameras_file;
pub mod ply;
pub mod synthetic;

use std::path::Path;

use nalgebra::Vector3;

pub use cameras_file::{load_cameras, parse_cameras, render_cameras, write_cameras};
pub use ply::{
    load_gaussians_ply, load_ply_points, parse_gaussians_ply, parse_ply_points, save_gaussians_ply,
    save_ply_points,
};
pub use synthetic::{box_downsample, generate_synthetic_scene, SceneFamily, SyntheticScene, SyntheticSpec};

use crate::camera::{Camera, Split};
use crate::error::{Error, Result};
use crate::image_buf::ImageBuffer;
use crate::real::Real;

/// Sparse scene points with 8-bit RGB colors, as produced by SfM or a
/// synthetic generator. Used to seed optimization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud<T: Real> {
    pub positions: Vec<Vector3<T>>,
    pub colors: Vec<[u8; 3]>,
}

impl<T: Real> PointCloud<T> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Axis-aligned bounding box of the points, if any.
    pub fn bounding_box(&self) -> Option<(Vector3<T>, Vector3<T>)> {
        let first = *self.positions.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.positions[1..] {
            for k in 0..3 {
                if p[k] < lo[k] {
                    lo[k] = p[k];
                }
                if p[k] > hi[k] {
                    hi[k] = p[k];
                }
            }
        }
        Some((lo, hi))
    }
}

/// A complete training scene held in memory. `images[i]` is the ground truth
/// for `cameras[i]`.
#[derive(Debug, Clone)]
pub struct SceneDataset<T: Real> {
    pub cameras: Vec<Camera<T>>,
    pub points: PointCloud<T>,
    pub images: Vec<ImageBuffer<T>>,
}

impl<T: Real> SceneDataset<T> {
    pub fn validate(&self) -> Result<()> {
        if self.cameras.len() != self.images.len() {
            return Err(Error::Validation(format!(
                "{} cameras but {} images",
                self.cameras.len(),
                self.images.len()
            )));
        }
        let mut ids: Vec<u32> = self.cameras.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.cameras.len() {
            return Err(Error::Validation("camera ids are not unique".to_string()));
        }
        for (cam, img) in self.cameras.iter().zip(&self.images) {
            cam.validate()?;
            if img.width != cam.width || img.height != cam.height {
                return Err(Error::Validation(format!(
                    "camera {} is {}x{} but its image is {}x{}",
                    cam.id, cam.width, cam.height, img.width, img.height
                )));
            }
        }
        if self.points.colors.len() != self.points.positions.len() {
            return Err(Error::Validation("point colors are not aligned with positions".to_string()));
        }
        Ok(())
    }

    pub fn indices_for(&self, split: Split) -> Vec<usize> {
        (0..self.cameras.len()).filter(|&i| self.cameras[i].split == split).collect()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices_for(Split::Train)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.indices_for(Split::Test)
    }

    /// Radius of the camera-center bounding sphere, used to scale position
    /// learning rates and split offsets to the scene. Falls back to the point
    /// cloud, then to 1.
    pub fn scene_extent(&self) -> T {
        let centers: Vec<Vector3<T>> = self.cameras.iter().map(Camera::center).collect();
        if let Some(r) = bounding_radius(&centers) {
            if r > T::default() {
                return r;
            }
        }
        if let Some(r) = bounding_radius(&self.points.positions) {
            if r > T::default() {
                return r;
            }
        }
        <T as Real>::from_f64(1.0)
    }

    /// Writes `cameras.txt`, `points.ply`, and one PNG per camera under
    /// `dir`. Cameras without an `image_path` get `images/cam_<id>.png`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        std::fs::create_dir_all(dir)?;
        let mut cameras = self.cameras.clone();
        for cam in &mut cameras {
            if cam.image_path.is_empty() {
                cam.image_path = format!("images/cam_{:03}.png", cam.id);
            }
        }
        for (cam, img) in cameras.iter().zip(&self.images) {
            let path = dir.join(&cam.image_path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            img.save_png(&path)?;
        }
        write_cameras(&dir.join("cameras.txt"), &cameras)?;
        save_ply_points(&dir.join("points.ply"), &self.points)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let cameras: Vec<Camera<T>> = load_cameras(&dir.join("cameras.txt"))?;
        let points = load_ply_points(&dir.join("points.ply"))?;
        let mut images = Vec::with_capacity(cameras.len());
        for cam in &cameras {
            if cam.image_path.is_empty() {
                return Err(Error::Validation(format!("camera {} has no image path", cam.id)));
            }
            images.push(ImageBuffer::load_png(&dir.join(&cam.image_path))?);
        }
        let ds = Self { cameras, points, images };
        ds.validate()?;
        Ok(ds)
    }
}

fn bounding_radius<T: Real>(points: &[Vector3<T>]) -> Option<T> {
    if points.is_empty() {
        return None;
    }
    let mut center = Vector3::zeros();
    for p in points {
        center += p;
    }
    center /= <T as Real>::from_usize(points.len());
    let mut r2 = T::default();
    for p in points {
        let d2 = (p - center).norm_squared();
        if d2 > r2 {
            r2 = d2;
        }
    }
    Some(r2.sqrt())
}
