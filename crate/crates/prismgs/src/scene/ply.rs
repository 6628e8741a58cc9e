//! PLY input/output: sparse point clouds and trained primitive sets.
//!
//! The reader is liberal: ASCII or binary-little-endian, scalar properties
//! addressed by name, unknown properties skipped. The writers always emit
//! binary-little-endian with f32 payloads.
//!
//! Trained primitives use the de-facto splat vertex layout: `x y z nx ny nz
//! f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3`, where `f_rest` holds the
//! higher-order SH coefficients channel-major (`f_rest[ch*(C-1) + (k-1)]` for
//! coefficient `k` of channel `ch`), scales are logarithmic, opacity is a
//! logit, and `rot_0..3` is the quaternion as (w, x, y, z).

use std::path::Path;

use nalgebra::{Vector3, Vector4};

use crate::error::{Error, Result};
use crate::gaussian::{sh_degree_from_coeff_count, GaussianPrimitive};
use crate::real::Real;

use super::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            Self::I8 => bytes[0] as i8 as f64,
            Self::U8 => bytes[0] as f64,
            Self::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Self::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Self::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    props: Vec<(String, ScalarType)>,
    has_list: bool,
}

impl PlyElement {
    fn row_size(&self) -> usize {
        self.props.iter().map(|(_, t)| t.size()).sum()
    }
}

/// The `vertex` element of a PLY file, decoded to f64 row-major values.
struct VertexRows {
    names: Vec<String>,
    count: usize,
    stride: usize,
    data: Vec<f64>,
}

impl VertexRows {
    fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name).ok_or_else(|| Error::Format {
            line: 0,
            msg: format!("vertex element is missing required property '{name}'"),
        })
    }

    fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.stride + col]
    }
}

fn parse_header(bytes: &[u8]) -> Result<(PlyFormatState, usize)> {
    let end_tag = b"end_header";
    let end = bytes
        .windows(end_tag.len())
        .position(|w| w == end_tag)
        .ok_or_else(|| Error::Format { line: 0, msg: "missing end_header".to_string() })?;
    let body_start = match bytes[end..].iter().position(|&b| b == b'\n') {
        Some(nl) => end + nl + 1,
        None => bytes.len(),
    };
    let header = std::str::from_utf8(&bytes[..body_start]).map_err(|_| Error::Format {
        line: 0,
        msg: "header is not valid UTF-8".to_string(),
    })?;
    if header.lines().next().map(str::trim) != Some("ply") {
        return Err(Error::Format { line: 1, msg: "not a PLY file".to_string() });
    }

    let mut format = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_lines = 0usize;
    for (idx, raw) in header.lines().enumerate() {
        header_lines = idx + 1;
        let line_no = idx + 1;
        let line = raw.trim();
        let mut toks = line.split_whitespace();
        let Some(head) = toks.next() else { continue };
        match head {
            "ply" => {
                if line_no != 1 {
                    return Err(Error::Format { line: line_no, msg: "misplaced 'ply' magic".into() });
                }
            }
            "format" => {
                format = Some(match toks.next() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLe,
                    other => {
                        return Err(Error::Format {
                            line: line_no,
                            msg: format!("unsupported format '{}'", other.unwrap_or("")),
                        })
                    }
                });
            }
            "comment" | "obj_info" => {}
            "element" => {
                let name = toks.next().unwrap_or("").to_string();
                let count = toks
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::Format {
                        line: line_no,
                        msg: "element needs a name and a count".to_string(),
                    })?;
                elements.push(PlyElement { name, count, props: Vec::new(), has_list: false });
            }
            "property" => {
                let elem = elements.last_mut().ok_or_else(|| Error::Format {
                    line: line_no,
                    msg: "property before any element".to_string(),
                })?;
                let t1 = toks.next().unwrap_or("");
                if t1 == "list" {
                    elem.has_list = true;
                    continue;
                }
                let ty = ScalarType::parse(t1).ok_or_else(|| Error::Format {
                    line: line_no,
                    msg: format!("unknown property type '{t1}'"),
                })?;
                let name = toks.next().unwrap_or("").to_string();
                if name.is_empty() {
                    return Err(Error::Format { line: line_no, msg: "property needs a name".into() });
                }
                elem.props.push((name, ty));
            }
            "end_header" => break,
            other => {
                return Err(Error::Format {
                    line: line_no,
                    msg: format!("unrecognized header keyword '{other}'"),
                })
            }
        }
    }
    let format = format.ok_or_else(|| Error::Format { line: 0, msg: "missing format line".into() })?;
    Ok((PlyFormatState { format, elements, header_lines }, body_start))
}

struct PlyFormatState {
    format: PlyFormat,
    elements: Vec<PlyElement>,
    header_lines: usize,
}

/// Decodes the `vertex` element, skipping any elements that precede it.
fn read_vertex_rows(bytes: &[u8]) -> Result<VertexRows> {
    let (state, body_start) = parse_header(bytes)?;
    let vertex_pos = state
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::Format { line: 0, msg: "no vertex element".to_string() })?;
    let vertex = &state.elements[vertex_pos];
    if vertex.has_list {
        return Err(Error::Format {
            line: 0,
            msg: "list properties on the vertex element are not supported".to_string(),
        });
    }
    let names: Vec<String> = vertex.props.iter().map(|(n, _)| n.clone()).collect();
    let stride = vertex.props.len();
    let mut data = vec![0.0f64; vertex.count * stride];

    match state.format {
        PlyFormat::Ascii => {
            let body = std::str::from_utf8(&bytes[body_start..]).map_err(|_| Error::Format {
                line: state.header_lines,
                msg: "ASCII body is not valid UTF-8".to_string(),
            })?;
            let mut lines = body.lines().filter(|l| !l.trim().is_empty());
            for e in &state.elements[..vertex_pos] {
                for _ in 0..e.count {
                    lines.next().ok_or_else(|| Error::Format {
                        line: 0,
                        msg: format!("unexpected end of data in element '{}'", e.name),
                    })?;
                }
            }
            for row in 0..vertex.count {
                let line = lines.next().ok_or_else(|| Error::Format {
                    line: 0,
                    msg: format!("expected {} vertex rows, found {row}", vertex.count),
                })?;
                let mut toks = line.split_whitespace();
                for col in 0..stride {
                    let tok = toks.next().ok_or_else(|| Error::Format {
                        line: 0,
                        msg: format!("vertex row {row} has too few values"),
                    })?;
                    data[row * stride + col] = tok.parse::<f64>().map_err(|_| Error::Format {
                        line: 0,
                        msg: format!("vertex row {row}: '{tok}' is not a number"),
                    })?;
                }
            }
        }
        PlyFormat::BinaryLe => {
            let mut offset = body_start;
            for e in &state.elements[..vertex_pos] {
                if e.has_list {
                    return Err(Error::Format {
                        line: 0,
                        msg: format!(
                            "cannot skip binary element '{}' with list properties",
                            e.name
                        ),
                    });
                }
                offset += e.count * e.row_size();
            }
            let row_size = vertex.row_size();
            let need = vertex.count * row_size;
            if bytes.len() < offset + need {
                return Err(Error::Format {
                    line: 0,
                    msg: format!(
                        "binary body truncated: need {need} bytes for vertices, have {}",
                        bytes.len().saturating_sub(offset)
                    ),
                });
            }
            for row in 0..vertex.count {
                let mut at = offset + row * row_size;
                for (col, (_, ty)) in vertex.props.iter().enumerate() {
                    data[row * stride + col] = ty.read_le(&bytes[at..]);
                    at += ty.size();
                }
            }
        }
    }
    Ok(VertexRows { names, count: vertex.count, stride, data })
}

pub fn load_ply_points<T: Real>(path: &Path) -> Result<PointCloud<T>> {
    parse_ply_points(&std::fs::read(path)?)
}

pub fn parse_ply_points<T: Real>(bytes: &[u8]) -> Result<PointCloud<T>> {
    let rows = read_vertex_rows(bytes)?;
    let (ix, iy, iz) = (rows.require("x")?, rows.require("y")?, rows.require("z")?);
    let color_cols = match (rows.column("red"), rows.column("green"), rows.column("blue")) {
        (Some(r), Some(g), Some(b)) => Some((r, g, b)),
        _ => None,
    };
    let mut cloud = PointCloud { positions: Vec::with_capacity(rows.count), colors: Vec::with_capacity(rows.count) };
    for row in 0..rows.count {
        cloud.positions.push(Vector3::new(
            <T as Real>::from_f64(rows.get(row, ix)),
            <T as Real>::from_f64(rows.get(row, iy)),
            <T as Real>::from_f64(rows.get(row, iz)),
        ));
        let color = match color_cols {
            Some((r, g, b)) => [
                rows.get(row, r).clamp(0.0, 255.0).round() as u8,
                rows.get(row, g).clamp(0.0, 255.0).round() as u8,
                rows.get(row, b).clamp(0.0, 255.0).round() as u8,
            ],
            None => [128, 128, 128],
        };
        cloud.colors.push(color);
    }
    Ok(cloud)
}

pub fn save_ply_points<T: Real>(path: &Path, cloud: &PointCloud<T>) -> Result<()> {
    std::fs::write(path, encode_ply_points(cloud))?;
    Ok(())
}

pub fn encode_ply_points<T: Real>(cloud: &PointCloud<T>) -> Vec<u8> {
    let n = cloud.positions.len();
    let mut out = Vec::with_capacity(256 + n * 15);
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {n}\n").as_bytes());
    out.extend_from_slice(b"property float x\nproperty float y\nproperty float z\n");
    out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    out.extend_from_slice(b"end_header\n");
    for i in 0..n {
        for k in 0..3 {
            out.extend_from_slice(&cloud.positions[i][k].to_f32().to_le_bytes());
        }
        let c = cloud.colors.get(i).copied().unwrap_or([128, 128, 128]);
        out.extend_from_slice(&c);
    }
    out
}

/// Number of `f_rest` properties for a coefficient count (3 channels, minus DC).
fn rest_len(coeff_count: usize) -> usize {
    3 * (coeff_count - 1)
}

pub fn save_gaussians_ply<T: Real>(path: &Path, gaussians: &[GaussianPrimitive<T>]) -> Result<()> {
    std::fs::write(path, encode_gaussians_ply(gaussians)?)?;
    Ok(())
}

pub fn encode_gaussians_ply<T: Real>(gaussians: &[GaussianPrimitive<T>]) -> Result<Vec<u8>> {
    let coeff_count = match gaussians.first() {
        Some(g) => g.sh_coeffs.len(),
        None => 1,
    };
    sh_degree_from_coeff_count(coeff_count)?;
    for (i, g) in gaussians.iter().enumerate() {
        if g.sh_coeffs.len() != coeff_count {
            return Err(Error::InvalidInput(format!(
                "gaussian {i} has {} SH coefficients, expected {coeff_count}",
                g.sh_coeffs.len()
            )));
        }
    }

    let n = gaussians.len();
    let mut out = Vec::with_capacity(512 + n * 4 * (17 + rest_len(coeff_count)));
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {n}\n").as_bytes());
    for name in ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"] {
        out.extend_from_slice(format!("property float {name}\n").as_bytes());
    }
    for k in 0..rest_len(coeff_count) {
        out.extend_from_slice(format!("property float f_rest_{k}\n").as_bytes());
    }
    for name in ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
        out.extend_from_slice(format!("property float {name}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");

    let mut push = |v: T| out.extend_from_slice(&v.to_f32().to_le_bytes());
    for g in gaussians {
        for k in 0..3 {
            push(g.position[k]);
        }
        for _ in 0..3 {
            push(T::default()); // normals are not modeled; write zeros
        }
        for ch in 0..3 {
            push(g.sh_coeffs[0][ch]);
        }
        for ch in 0..3 {
            for k in 1..coeff_count {
                push(g.sh_coeffs[k][ch]);
            }
        }
        push(g.opacity_logit);
        for k in 0..3 {
            push(g.log_scale[k]);
        }
        for k in 0..4 {
            push(g.rotation[k]);
        }
    }
    Ok(out)
}

pub fn load_gaussians_ply<T: Real>(path: &Path) -> Result<Vec<GaussianPrimitive<T>>> {
    parse_gaussians_ply(&std::fs::read(path)?)
}

pub fn parse_gaussians_ply<T: Real>(bytes: &[u8]) -> Result<Vec<GaussianPrimitive<T>>> {
    let rows = read_vertex_rows(bytes)?;
    let pos = [rows.require("x")?, rows.require("y")?, rows.require("z")?];
    let dc = [rows.require("f_dc_0")?, rows.require("f_dc_1")?, rows.require("f_dc_2")?];
    let opacity = rows.require("opacity")?;
    let scale = [rows.require("scale_0")?, rows.require("scale_1")?, rows.require("scale_2")?];
    let rot = [
        rows.require("rot_0")?,
        rows.require("rot_1")?,
        rows.require("rot_2")?,
        rows.require("rot_3")?,
    ];

    // f_rest_* must be contiguous from 0 and total a legal SH layout.
    let n_rest = rows.names.iter().filter(|n| n.starts_with("f_rest_")).count();
    let mut rest_cols = Vec::with_capacity(n_rest);
    for k in 0..n_rest {
        rest_cols.push(rows.column(&format!("f_rest_{k}")).ok_or_else(|| Error::Format {
            line: 0,
            msg: format!("f_rest_* properties are not contiguous: missing f_rest_{k}"),
        })?);
    }
    let coeff_count = match n_rest {
        0 => 1,
        n if n % 3 == 0 => n / 3 + 1,
        n => {
            return Err(Error::Format {
                line: 0,
                msg: format!("{n} f_rest properties do not form whole RGB coefficients"),
            })
        }
    };
    sh_degree_from_coeff_count(coeff_count).map_err(|_| Error::Format {
        line: 0,
        msg: format!("{n_rest} f_rest properties do not match any SH degree (expected 0, 9, 24, or 45)"),
    })?;

    let mut gaussians = Vec::with_capacity(rows.count);
    for row in 0..rows.count {
        let mut sh = vec![Vector3::zeros(); coeff_count];
        for ch in 0..3 {
            sh[0][ch] = <T as Real>::from_f64(rows.get(row, dc[ch]));
            for k in 1..coeff_count {
                sh[k][ch] = <T as Real>::from_f64(rows.get(row, rest_cols[ch * (coeff_count - 1) + (k - 1)]));
            }
        }
        gaussians.push(GaussianPrimitive {
            position: Vector3::new(
                <T as Real>::from_f64(rows.get(row, pos[0])),
                <T as Real>::from_f64(rows.get(row, pos[1])),
                <T as Real>::from_f64(rows.get(row, pos[2])),
            ),
            log_scale: Vector3::new(
                <T as Real>::from_f64(rows.get(row, scale[0])),
                <T as Real>::from_f64(rows.get(row, scale[1])),
                <T as Real>::from_f64(rows.get(row, scale[2])),
            ),
            rotation: Vector4::new(
                <T as Real>::from_f64(rows.get(row, rot[0])),
                <T as Real>::from_f64(rows.get(row, rot[1])),
                <T as Real>::from_f64(rows.get(row, rot[2])),
                <T as Real>::from_f64(rows.get(row, rot[3])),
            ),
            opacity_logit: <T as Real>::from_f64(rows.get(row, opacity)),
            sh_coeffs: sh,
        });
    }
    Ok(gaussians)
}
