//! Field serialization: raw little-endian `f64` pairs `(re, im)` in row-major
//! order plus a JSON sidecar describing the grid.
//!
//! `stem.bin` holds the samples and `stem.json` the [`FieldHeader`].

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConfigWaveFunction, GridSpec, PhaseGrid, PhaseWaveFunction, XAxis};

pub const FORMAT_NAME: &str = "phasediff-field";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDomain {
    /// Phase-space field, shape `(nx, np)`, `p` varying fastest.
    Phase { grid: GridSpec, hbar: f64 },
    /// Configuration-space wave function of length `n`.
    Config { n: usize, x_min: f64, x_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub domain: FieldDomain,
    pub shape: Vec<usize>,
    pub dtype: String,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

fn encode(values: impl Iterator<Item = C64>) -> Vec<u8> {
    let mut out = Vec::new();
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], expected: usize) -> Result<Vec<C64>> {
    if bytes.len() != expected * 16 {
        return Err(Error::Format(format!(
            "expected {} bytes of samples, found {}",
            expected * 16,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect())
}

fn write_pair(stem: &Path, header: &FieldHeader, data: Vec<u8>) -> Result<()> {
    let (bin, json) = paths(stem);
    fs::write(bin, data)?;
    let text = serde_json::to_string_pretty(header).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(json, text + "\n")?;
    Ok(())
}

fn read_header(stem: &Path) -> Result<(FieldHeader, Vec<u8>)> {
    let (bin, json) = paths(stem);
    let header: FieldHeader =
        serde_json::from_str(&fs::read_to_string(json)?).map_err(|e| Error::Format(e.to_string()))?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported field format {} v{}",
            header.format, header.version
        )));
    }
    Ok((header, fs::read(bin)?))
}

pub fn write_phase_field(stem: &Path, phi: &PhaseWaveFunction, hbar: f64) -> Result<()> {
    let g = phi.grid();
    let header = FieldHeader {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        domain: FieldDomain::Phase { grid: g.spec(), hbar },
        shape: vec![g.nx(), g.np()],
        dtype: "complex128-le".into(),
    };
    write_pair(stem, &header, encode(phi.values().iter().copied()))
}

pub fn read_phase_field(stem: &Path) -> Result<PhaseWaveFunction> {
    let (header, bytes) = read_header(stem)?;
    let FieldDomain::Phase { grid, hbar } = header.domain else {
        return Err(Error::Format("not a phase-space field".into()));
    };
    let grid = PhaseGrid::new(grid, hbar)?;
    let values = decode(&bytes, grid.nx() * grid.np())?;
    let arr = Array2::from_shape_vec(grid.shape(), values).map_err(|e| Error::Format(e.to_string()))?;
    PhaseWaveFunction::new(grid, arr)
}

pub fn write_config_field(stem: &Path, psi: &ConfigWaveFunction) -> Result<()> {
    let ax = psi.axis();
    let header = FieldHeader {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        domain: FieldDomain::Config {
            n: ax.n,
            x_min: ax.x_min,
            x_max: ax.x_max,
        },
        shape: vec![ax.n],
        dtype: "complex128-le".into(),
    };
    write_pair(stem, &header, encode(psi.values().iter().copied()))
}

pub fn read_config_field(stem: &Path) -> Result<ConfigWaveFunction> {
    let (header, bytes) = read_header(stem)?;
    let FieldDomain::Config { n, x_min, x_max } = header.domain else {
        return Err(Error::Format("not a configuration-space field".into()));
    };
    let axis = XAxis::new(n, x_min, x_max)?;
    ConfigWaveFunction::new(axis, decode(&bytes, n)?)
}
