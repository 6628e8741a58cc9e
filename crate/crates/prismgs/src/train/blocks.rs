//! Scene partitioning into blocks for independent training, plus the merge
//! that stitches trained blocks back together.
//!
//! Blocks tile the x/y extent of the point cloud on a uniform grid (z is
//! never split). Ownership is exhaustive: a position maps to exactly one
//! block by clamped cell index, so out-of-range positions belong to the
//! nearest border block and merging never loses primitives to gaps.

use nalgebra::Vector3;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::gaussian::GaussianPrimitive;
use crate::real::{fl, Real};
use crate::scene::SceneDataset;

/// Fraction of each cell dimension added on every side when testing camera
/// membership by position.
pub const DEFAULT_CAMERA_MARGIN: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct SceneBlock<T: Real> {
    pub id: usize,
    /// Cell coordinates in the partition grid.
    pub cell: (usize, usize),
    pub lo: Vector3<T>,
    pub hi: Vector3<T>,
    pub camera_ids: Vec<u32>,
    pub point_indices: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Grid<T: Real> {
    nx: usize,
    ny: usize,
    lo: Vector3<T>,
    hi: Vector3<T>,
}

impl<T: Real> Grid<T> {
    fn cell_of(&self, p: &Vector3<T>) -> (usize, usize) {
        let cell = |v: T, lo: T, hi: T, n: usize| -> usize {
            if n == 1 || hi <= lo {
                return 0;
            }
            let t = (v - lo) / (hi - lo) * <T as Real>::from_usize(n);
            (t.floor().to_f64() as isize).clamp(0, n as isize - 1) as usize
        };
        (cell(p.x, self.lo.x, self.hi.x, self.nx), cell(p.y, self.lo.y, self.hi.y, self.ny))
    }

    fn cell_bounds(&self, cx: usize, cy: usize) -> (Vector3<T>, Vector3<T>) {
        let edge = |lo: T, hi: T, n: usize, i: usize| -> (T, T) {
            let w = (hi - lo) / <T as Real>::from_usize(n);
            (lo + w * <T as Real>::from_usize(i), lo + w * <T as Real>::from_usize(i + 1))
        };
        let (x0, x1) = edge(self.lo.x, self.hi.x, self.nx, cx);
        let (y0, y1) = edge(self.lo.y, self.hi.y, self.ny, cy);
        (Vector3::new(x0, y0, self.lo.z), Vector3::new(x1, y1, self.hi.z))
    }
}

/// True when `cam` projects `p` inside its image bounds in front of the near
/// plane; the same visibility rule the sampling bound uses.
fn camera_sees<T: Real>(cam: &Camera<T>, p: &Vector3<T>) -> bool {
    let near = fl::<T>(1e-4);
    match cam.project(p, near) {
        Some((px, _)) => {
            let half = fl::<T>(0.5);
            px.x >= -half
                && px.x < <T as Real>::from_usize(cam.width) - half
                && px.y >= -half
                && px.y < <T as Real>::from_usize(cam.height) - half
        }
        None => false,
    }
}

/// Uniform-grid partition over the point cloud's x/y extent. Every point is
/// owned by exactly one block; every camera is assigned to at least one
/// block (position within the margin-expanded box, or viewing one of the
/// block's points, or — as a last resort — the block with the nearest
/// center).
pub fn partition_scene<T: Real>(
    dataset: &SceneDataset<T>,
    grid: (usize, usize),
    camera_margin: f64,
) -> Result<Vec<SceneBlock<T>>> {
    let (nx, ny) = grid;
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("partition grid must be at least 1x1".to_string()));
    }
    let points = &dataset.points.positions;
    let (lo, hi) = dataset
        .points
        .bounding_box()
        .ok_or_else(|| Error::Config("cannot partition an empty point cloud".to_string()))?;
    let grid = Grid { nx, ny, lo, hi };

    let mut blocks: Vec<SceneBlock<T>> = (0..nx * ny)
        .map(|id| {
            let (cx, cy) = (id % nx, id / nx);
            let (blo, bhi) = grid.cell_bounds(cx, cy);
            SceneBlock { id, cell: (cx, cy), lo: blo, hi: bhi, camera_ids: Vec::new(), point_indices: Vec::new() }
        })
        .collect();

    for (i, p) in points.iter().enumerate() {
        let (cx, cy) = grid.cell_of(p);
        blocks[cy * nx + cx].point_indices.push(i);
    }

    let margin = fl::<T>(camera_margin);
    for cam in &dataset.cameras {
        let center = cam.center();
        let mut assigned = false;
        for block in blocks.iter_mut() {
            let ext = block.hi - block.lo;
            let e = Vector3::new(ext.x * margin, ext.y * margin, ext.z * margin);
            let inside = (0..3).all(|k| center[k] >= block.lo[k] - e[k] && center[k] <= block.hi[k] + e[k]);
            let views = !inside
                && block.point_indices.iter().any(|&i| camera_sees(cam, &points[i]));
            if inside || views {
                block.camera_ids.push(cam.id);
                assigned = true;
            }
        }
        if !assigned {
            // Nearest block center keeps the every-camera invariant.
            let mut best = (<T as Real>::from_f64(f64::INFINITY), 0usize);
            for block in &blocks {
                let mid = (block.lo + block.hi) * fl::<T>(0.5);
                let d = (center - mid).norm_squared();
                if d < best.0 {
                    best = (d, block.id);
                }
            }
            blocks[best.1].camera_ids.push(cam.id);
        }
    }
    Ok(blocks)
}

/// Reconstructs the partition grid spanned by a block list.
fn grid_of_blocks<T: Real>(blocks: &[SceneBlock<T>]) -> Grid<T> {
    let nx = blocks.iter().map(|b| b.cell.0).max().unwrap_or(0) + 1;
    let ny = blocks.iter().map(|b| b.cell.1).max().unwrap_or(0) + 1;
    let mut lo = blocks[0].lo;
    let mut hi = blocks[0].hi;
    for b in blocks {
        for k in 0..3 {
            lo[k] = lo[k].min(b.lo[k]);
            hi[k] = hi[k].max(b.hi[k]);
        }
    }
    Grid { nx, ny, lo, hi }
}

/// Owning block id for each position, by the same clamped-cell rule the
/// merge uses: exhaustive, so every position maps to exactly one block.
/// `blocks` must be a full partition in id order.
pub fn owner_blocks<T: Real>(blocks: &[SceneBlock<T>], positions: &[Vector3<T>]) -> Result<Vec<usize>> {
    if blocks.is_empty() {
        return Err(Error::Contract("cannot assign owners with no blocks".to_string()));
    }
    let grid = grid_of_blocks(blocks);
    if blocks.len() != grid.nx * grid.ny {
        return Err(Error::Contract(format!(
            "{} blocks do not form a full {}x{} grid",
            blocks.len(),
            grid.nx,
            grid.ny
        )));
    }
    Ok(positions
        .iter()
        .map(|p| {
            let (cx, cy) = grid.cell_of(p);
            cy * grid.nx + cx
        })
        .collect())
}

/// Concatenates trained blocks, keeping each primitive only if its position
/// still lies in its owning block's cell — growth across a boundary during
/// training is dropped in favor of the neighbor that owns that space. Order
/// is (block id, local index). `per_block` must align with `blocks`.
pub fn merge_blocks<T: Real>(
    blocks: &[SceneBlock<T>],
    per_block: Vec<Vec<GaussianPrimitive<T>>>,
) -> Result<Vec<GaussianPrimitive<T>>> {
    if blocks.len() != per_block.len() {
        return Err(Error::Contract(format!(
            "{} blocks but {} trained primitive lists",
            blocks.len(),
            per_block.len()
        )));
    }
    if blocks.len() == 1 {
        return Ok(per_block.into_iter().next().unwrap());
    }
    let grid = grid_of_blocks(blocks);

    let mut merged = Vec::new();
    let mut ordered: Vec<(usize, &SceneBlock<T>, Vec<GaussianPrimitive<T>>)> = Vec::new();
    for (block, trained) in blocks.iter().zip(per_block) {
        ordered.push((block.id, block, trained));
    }
    ordered.sort_by_key(|(id, _, _)| *id);
    for (_, block, trained) in ordered {
        for g in trained {
            if grid.cell_of(&g.position) == block.cell {
                merged.push(g);
            }
        }
    }
    Ok(merged)
}
