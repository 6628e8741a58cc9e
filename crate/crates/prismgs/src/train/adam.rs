//! Adam optimizer over flat per-group parameter slices.
//!
//! Five parameter groups (position, log-scale, rotation, opacity logit, SH
//! coefficients) each keep first/second moment buffers aligned with the
//! primitive list; when the list changes shape (densify/prune), `remap`
//! rebuilds the buffers so surviving primitives keep their moments and new
//! ones start cold.

use crate::error::{Error, Result};
use crate::real::{fl, Real};

pub const N_GROUPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Position = 0,
    LogScale = 1,
    Rotation = 2,
    Opacity = 3,
    Sh = 4,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; N_GROUPS] = [
        ParamGroup::Position,
        ParamGroup::LogScale,
        ParamGroup::Rotation,
        ParamGroup::Opacity,
        ParamGroup::Sh,
    ];

    /// Values per primitive in this group; SH width depends on the
    /// coefficient count.
    pub fn width(self, sh_coeffs: usize) -> usize {
        match self {
            ParamGroup::Position | ParamGroup::LogScale => 3,
            ParamGroup::Rotation => 4,
            ParamGroup::Opacity => 1,
            ParamGroup::Sh => 3 * sh_coeffs,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Adam<T: Real> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    /// Global step count shared by all groups; drives bias correction.
    pub step: u64,
    groups: [Moments<T>; N_GROUPS],
}

impl<T: Real> Default for Adam<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Adam<T> {
    pub fn new() -> Self {
        Self {
            beta1: fl(0.9),
            beta2: fl(0.999),
            eps: fl(1e-15),
            step: 0,
            groups: Default::default(),
        }
    }

    /// Advances the shared step counter; call once per optimization step,
    /// before the per-group updates.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    /// One Adam update on a flat group slice. Buffers are created on first
    /// use; a later length mismatch means the caller forgot to `remap`.
    pub fn update(&mut self, group: ParamGroup, values: &mut [T], grads: &[T], lr: T) -> Result<()> {
        if values.len() != grads.len() {
            return Err(Error::Contract(format!(
                "{} values but {} gradients in group {group:?}",
                values.len(),
                grads.len()
            )));
        }
        let buf = &mut self.groups[group as usize];
        if buf.m.is_empty() && !values.is_empty() {
            buf.m = vec![T::zero(); values.len()];
            buf.v = vec![T::zero(); values.len()];
        }
        if buf.m.len() != values.len() {
            return Err(Error::Contract(format!(
                "group {group:?} moments hold {} values but {} parameters supplied",
                buf.m.len(),
                values.len()
            )));
        }
        let one = T::one();
        let b1 = self.beta1;
        let b2 = self.beta2;
        // Bias correction from the shared step count.
        let t = <T as Real>::from_f64(self.step.max(1) as f64);
        let c1 = one - b1.powf(t);
        let c2 = one - b2.powf(t);
        for i in 0..values.len() {
            let g = grads[i];
            buf.m[i] = b1 * buf.m[i] + (one - b1) * g;
            buf.v[i] = b2 * buf.v[i] + (one - b2) * g * g;
            let m_hat = buf.m[i] / c1;
            let v_hat = buf.v[i] / c2;
            values[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    /// Rebuilds every group's moment buffers after the primitive list
    /// changed: `map[new] = Some(old)` keeps that primitive's moments,
    /// `None` starts cold.
    pub fn remap(&mut self, map: &[Option<usize>], sh_coeffs: usize) {
        for group in ParamGroup::ALL {
            let width = group.width(sh_coeffs);
            let buf = &mut self.groups[group as usize];
            if buf.m.is_empty() {
                continue;
            }
            let old_rows = buf.m.len() / width;
            let mut m = vec![T::zero(); map.len() * width];
            let mut v = vec![T::zero(); map.len() * width];
            for (new, old) in map.iter().enumerate() {
                if let Some(old) = *old {
                    debug_assert!(old < old_rows);
                    let (a, b) = (new * width, old * width);
                    m[a..a + width].copy_from_slice(&buf.m[b..b + width]);
                    v[a..a + width].copy_from_slice(&buf.v[b..b + width]);
                }
            }
            buf.m = m;
            buf.v = v;
        }
    }

    pub fn moments(&self, group: ParamGroup) -> (&[T], &[T]) {
        let buf = &self.groups[group as usize];
        (&buf.m, &buf.v)
    }

    pub fn set_moments(&mut self, group: ParamGroup, m: Vec<T>, v: Vec<T>) -> Result<()> {
        if m.len() != v.len() {
            return Err(Error::Contract("moment buffers must have equal length".to_string()));
        }
        self.groups[group as usize] = Moments { m, v };
        Ok(())
    }
}
