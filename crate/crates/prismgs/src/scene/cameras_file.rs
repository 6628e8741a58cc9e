//! Versioned line-oriented camera file format.
//!
//! Header line `prismgs-cameras v1`, then one camera per line:
//! `id fx fy cx cy width height r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz split image_path`
//! with whitespace-separated fields; `split` is `train` or `test`; an
//! `image_path` of `-` means none (paths cannot contain whitespace).
//!
//! Loaded rotations must be orthonormal: drift up to 1e-3 (Frobenius) is
//! repaired by Gram-Schmidt, anything worse is rejected.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::camera::{Camera, Split};
use crate::error::{Error, Result};
use crate::real::Real;

const HEADER: &str = "prismgs-cameras v1";
const FIELDS: usize = 21;

/// Rotations orthonormal within this are accepted as-is.
const ORTHO_ACCEPT: f64 = 1e-6;
/// Rotations off by up to this are re-orthonormalized; beyond it, rejected.
const ORTHO_REPAIR: f64 = 1e-3;

pub fn load_cameras<T: Real>(path: &Path) -> Result<Vec<Camera<T>>> {
    let text = std::fs::read_to_string(path)?;
    parse_cameras(&text)
}

pub fn parse_cameras<T: Real>(text: &str) -> Result<Vec<Camera<T>>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().expect("non-empty text");
    if first.trim() != HEADER {
        return Err(Error::VersionMismatch {
            found: first.trim().to_string(),
            expected: HEADER.to_string(),
        });
    }
    let mut cameras = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        cameras.push(parse_line(line, line_no)?);
    }
    Ok(cameras)
}

fn parse_line<T: Real>(line: &str, line_no: usize) -> Result<Camera<T>> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != FIELDS {
        return Err(Error::Format {
            line: line_no,
            msg: format!("expected {FIELDS} fields, found {}", toks.len()),
        });
    }
    let num = |i: usize| -> Result<f64> {
        toks[i].parse::<f64>().map_err(|_| Error::Format {
            line: line_no,
            msg: format!("field {}: '{}' is not a number", i + 1, toks[i]),
        })
    };
    let dim = |i: usize| -> Result<usize> {
        toks[i].parse::<usize>().map_err(|_| Error::Format {
            line: line_no,
            msg: format!("field {}: '{}' is not a dimension", i + 1, toks[i]),
        })
    };
    let id = toks[0].parse::<u32>().map_err(|_| Error::Format {
        line: line_no,
        msg: format!("camera id '{}' is not an unsigned integer", toks[0]),
    })?;
    let mut r = [0.0f64; 9];
    for (k, v) in r.iter_mut().enumerate() {
        *v = num(7 + k)?;
    }
    let split = Split::parse(toks[19]).map_err(|e| Error::Format {
        line: line_no,
        msg: e.to_string(),
    })?;
    let mut cam = Camera {
        id,
        fx: <T as Real>::from_f64(num(1)?),
        fy: <T as Real>::from_f64(num(2)?),
        cx: <T as Real>::from_f64(num(3)?),
        cy: <T as Real>::from_f64(num(4)?),
        width: dim(5)?,
        height: dim(6)?,
        rotation: Matrix3::from_row_slice(&r).map(<T as Real>::from_f64),
        translation: Vector3::new(<T as Real>::from_f64(num(16)?), <T as Real>::from_f64(num(17)?), <T as Real>::from_f64(num(18)?)),
        split,
        image_path: if toks[20] == "-" { String::new() } else { toks[20].to_string() },
    };
    let err = cam.orthonormality_error().to_f64();
    if err > ORTHO_REPAIR {
        return Err(Error::Validation(format!(
            "line {line_no}: camera {id} rotation is not orthonormal (error {err:.3e})"
        )));
    }
    if err > ORTHO_ACCEPT {
        cam.reorthonormalize();
    }
    cam.validate().map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
    Ok(cam)
}

pub fn write_cameras<T: Real>(path: &Path, cameras: &[Camera<T>]) -> Result<()> {
    std::fs::write(path, render_cameras(cameras)?)?;
    Ok(())
}

/// Serializes cameras to the v1 text format. Floats are written with the
/// shortest representation that parses back to the same value.
pub fn render_cameras<T: Real>(cameras: &[Camera<T>]) -> Result<String> {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for cam in cameras {
        cam.validate()?;
        if cam.image_path.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput(format!(
                "camera {}: image path '{}' contains whitespace",
                cam.id, cam.image_path
            )));
        }
        write!(
            out,
            "{} {} {} {} {} {} {}",
            cam.id,
            cam.fx.to_f64(),
            cam.fy.to_f64(),
            cam.cx.to_f64(),
            cam.cy.to_f64(),
            cam.width,
            cam.height
        )
        .unwrap();
        for r in 0..3 {
            for c in 0..3 {
                write!(out, " {}", cam.rotation[(r, c)].to_f64()).unwrap();
            }
        }
        for k in 0..3 {
            write!(out, " {}", cam.translation[k].to_f64()).unwrap();
        }
        let path_field = if cam.image_path.is_empty() { "-" } else { &cam.image_path };
        writeln!(out, " {} {}", cam.split.as_str(), path_field).unwrap();
    }
    Ok(out)
}
