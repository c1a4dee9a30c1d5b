//! Grid file formats.
//!
//! * Binary PGM (`P5`), 8-bit or 16-bit big-endian samples, scaled by maxval
//!   into `[0, 1]` on import and quantized on export.
//! * `CIF1` raw grids: a 16-byte header (`b"CIF1"`, `u32` height, `u32` width,
//!   4 reserved zero bytes, integers little-endian) followed by `height*width`
//!   little-endian `f64` values in row-major order. Lossless.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

const CIF_MAGIC: &[u8; 4] = b"CIF1";
const CIF_HEADER_LEN: usize = 16;

/// Sample depth used when writing PGM files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let mut pos = 0usize;
    let next_token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&mut pos)?;
    if magic != "P5" {
        return Err(Error::Format(format!("expected P5 magic, found {magic:?}")));
    }
    let number = |pos: &mut usize, what: &str| -> Result<usize> {
        let tok = next_token(pos)?;
        tok.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM {what}: {tok:?}")))
    };
    let width = number(&mut pos, "width")?;
    let height = number(&mut pos, "height")?;
    let maxval = number(&mut pos, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;

    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let n = width * height;
    let raster = bytes
        .get(pos..pos + n * bytes_per_sample)
        .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    let scale = maxval as f64;
    let data: Vec<f64> = if bytes_per_sample == 1 {
        raster.iter().map(|&b| b as f64 / scale).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    ImageGrid::new(height, width, data)
}

pub fn encode_pgm(grid: &ImageGrid, depth: PgmDepth) -> Vec<u8> {
    let maxval: u32 = match depth {
        PgmDepth::Eight => 255,
        PgmDepth::Sixteen => 65535,
    };
    let mut out = format!("P5\n{} {}\n{}\n", grid.width(), grid.height(), maxval).into_bytes();
    for &v in grid.as_slice() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        match depth {
            PgmDepth::Eight => out.push(q as u8),
            PgmDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

pub fn encode_cif(grid: &ImageGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(CIF_HEADER_LEN + 8 * grid.len());
    out.extend_from_slice(CIF_MAGIC);
    out.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for v in grid.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_cif(bytes: &[u8]) -> Result<ImageGrid> {
    if bytes.len() < CIF_HEADER_LEN || &bytes[..4] != CIF_MAGIC {
        return Err(Error::Format("missing CIF1 header".into()));
    }
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[CIF_HEADER_LEN..];
    if body.len() != 8 * height * width {
        return Err(Error::Format(format!(
            "CIF body has {} bytes, expected {}",
            body.len(),
            8 * height * width
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ImageGrid::new(height, width, data)
}

/// Reads a grid, picking the decoder from the file extension (`.pgm` or `.cif`).
pub fn read_grid(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = match extension(path).as_deref() {
        Some("pgm") => decode_pgm(&bytes),
        Some("cif") => decode_cif(&bytes),
        _ => Err(Error::Format("unknown grid extension (want .pgm or .cif)".into())),
    };
    decoded.map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes a grid; `.pgm` quantizes to 8 bits, anything else is written as `CIF1`.
pub fn write_grid(path: impl AsRef<Path>, grid: &ImageGrid) -> Result<()> {
    let path = path.as_ref();
    let bytes = match extension(path).as_deref() {
        Some("pgm") => encode_pgm(grid, PgmDepth::Eight),
        _ => encode_cif(grid),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}
