//! Checkpoint directories: primitives as PLY, config as versioned TOML,
//! optimizer moments as a versioned binary sidecar, and the train report as
//! JSON. Each file is written to a temp name and renamed, so an interrupted
//! save never leaves a half-written component under the final name.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianPrimitive;
use crate::real::Real;
use crate::scene::ply::encode_gaussians_ply;
use crate::scene::load_gaussians_ply;
use crate::train::adam::{Adam, ParamGroup};
use crate::train::{TrainConfig, TrainReport};

/// Version tag inside `config.toml`; bump on incompatible layout changes.
pub const CHECKPOINT_VERSION: u32 = 1;
/// Magic prefix of `optimizer.bin`.
pub const OPTIMIZER_MAGIC: &[u8; 7] = b"PGSOPT1";

pub const PLY_FILE: &str = "point_cloud.ply";
pub const CONFIG_FILE: &str = "config.toml";
pub const OPTIMIZER_FILE: &str = "optimizer.bin";
pub const REPORT_FILE: &str = "report.json";

/// Everything a checkpoint restores. `optimizer` is `None` when the
/// directory has no `optimizer.bin` (evaluation-only exports).
#[derive(Debug, Clone)]
pub struct Checkpoint<T: Real> {
    pub gaussians: Vec<GaussianPrimitive<T>>,
    pub config: TrainConfig,
    pub report: TrainReport,
    pub optimizer: Option<Adam<T>>,
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    version: u32,
    config: TrainConfig,
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `optimizer.bin`: magic, u64 step, then per parameter group (fixed order)
/// a u64 length followed by that many f64 first moments and f64 second
/// moments, all little-endian.
fn encode_optimizer<T: Real>(adam: &Adam<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16);
    out.extend_from_slice(OPTIMIZER_MAGIC);
    out.extend_from_slice(&adam.step.to_le_bytes());
    for group in ParamGroup::ALL {
        let (m, v) = adam.moments(group);
        out.extend_from_slice(&(m.len() as u64).to_le_bytes());
        for x in m {
            out.extend_from_slice(&x.to_f64().to_le_bytes());
        }
        for x in v {
            out.extend_from_slice(&x.to_f64().to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::InvalidInput("optimizer state truncated".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec<T: Real>(&mut self, n: usize) -> Result<Vec<T>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| <T as Real>::from_f64(f64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}

fn decode_optimizer<T: Real>(bytes: &[u8]) -> Result<Adam<T>> {
    if bytes.len() < OPTIMIZER_MAGIC.len() || &bytes[..OPTIMIZER_MAGIC.len()] != OPTIMIZER_MAGIC {
        let found = bytes
            .get(..OPTIMIZER_MAGIC.len())
            .map(|b| String::from_utf8_lossy(b).into_owned())
            .unwrap_or_else(|| "<short file>".to_string());
        return Err(Error::VersionMismatch {
            found,
            expected: String::from_utf8_lossy(OPTIMIZER_MAGIC).into_owned(),
        });
    }
    let mut cursor = Cursor { bytes, pos: OPTIMIZER_MAGIC.len() };
    let mut adam = Adam::<T>::new();
    adam.step = cursor.u64()?;
    for group in ParamGroup::ALL {
        let len = cursor.u64()? as usize;
        let m = cursor.f64_vec(len)?;
        let v = cursor.f64_vec(len)?;
        adam.set_moments(group, m, v)?;
    }
    if cursor.pos != bytes.len() {
        return Err(Error::InvalidInput(format!(
            "optimizer state has {} trailing bytes",
            bytes.len() - cursor.pos
        )));
    }
    Ok(adam)
}

/// Writes `point_cloud.ply`, `config.toml`, `report.json`, and (when given)
/// `optimizer.bin` under `dir`, creating it if needed.
pub fn save_checkpoint<T: Real>(
    dir: &Path,
    gaussians: &[GaussianPrimitive<T>],
    config: &TrainConfig,
    report: &TrainReport,
    optimizer: Option<&Adam<T>>,
) -> Result<()> {
    config.validate()?;
    fs::create_dir_all(dir)?;
    atomic_write(&dir.join(PLY_FILE), &encode_gaussians_ply(gaussians)?)?;
    let config_text = toml::to_string_pretty(&ConfigFile { version: CHECKPOINT_VERSION, config: config.clone() })
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    atomic_write(&dir.join(CONFIG_FILE), config_text.as_bytes())?;
    let report_json = serde_json::to_vec_pretty(report)
        .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    atomic_write(&dir.join(REPORT_FILE), &report_json)?;
    if let Some(adam) = optimizer {
        atomic_write(&dir.join(OPTIMIZER_FILE), &encode_optimizer(adam))?;
    }
    Ok(())
}

pub fn load_checkpoint<T: Real>(dir: &Path) -> Result<Checkpoint<T>> {
    let gaussians = load_gaussians_ply(&dir.join(PLY_FILE))?;

    let config_text = fs::read_to_string(dir.join(CONFIG_FILE))?;
    let file: ConfigFile = toml::from_str(&config_text)
        .map_err(|e| Error::Config(format!("cannot parse {}: {e}", CONFIG_FILE)))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: file.version.to_string(),
            expected: CHECKPOINT_VERSION.to_string(),
        });
    }
    file.config.validate()?;

    let report: TrainReport = serde_json::from_slice(&fs::read(dir.join(REPORT_FILE))?)
        .map_err(|e| Error::Config(format!("cannot parse {}: {e}", REPORT_FILE)))?;

    let optimizer_path = dir.join(OPTIMIZER_FILE);
    let optimizer = if optimizer_path.exists() {
        Some(decode_optimizer(&fs::read(optimizer_path)?)?)
    } else {
        None
    };

    Ok(Checkpoint { gaussians, config: file.config, report, optimizer })
}
