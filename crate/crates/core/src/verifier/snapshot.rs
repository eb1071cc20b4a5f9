//! Flat binary wavefunction dumps with a JSON sidecar.
//!
//! The `.bin` file holds little-endian `f64` pairs `(re, im)` in `s₁`-major
//! order; the sidecar records the lab-frame grid the amplitudes live on.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::grid::Grid2D;
use super::propagate::FramedState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub t: f64,
    pub n1: usize,
    pub n2: usize,
    pub s1_min: f64,
    pub s1_max: f64,
    pub s2_min: f64,
    pub s2_max: f64,
    pub ds1: f64,
    pub ds2: f64,
    pub layout: String,
    pub encoding: String,
    pub length_unit: String,
}

impl SnapshotMeta {
    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new([self.n1, self.n2], [self.s1_min, self.s2_min], [self.s1_max, self.s2_max])
    }
}

fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes the lab-frame wavefunction to `path` (`.bin`) and its sidecar.
pub fn write_snapshot(path: &Path, state: &FramedState, t: f64) -> Result<SnapshotMeta> {
    let g = state.psi.grid;
    let meta = SnapshotMeta {
        t,
        n1: g.n[0],
        n2: g.n[1],
        s1_min: state.x[0] + g.min[0],
        s1_max: state.x[0] + g.max[0],
        s2_min: state.x[1] + g.min[1],
        s2_max: state.x[1] + g.max[1],
        ds1: g.ds[0],
        ds2: g.ds[1],
        layout: "s1-major".into(),
        encoding: "f64le re,im".into(),
        length_unit: "um".into(),
    };
    let amps = state.lab_amplitudes();
    let mut bytes = Vec::with_capacity(16 * amps.len());
    for z in &amps {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotMeta, Vec<Complex64>)> {
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    if bytes.len() != 16 * meta.n1 * meta.n2 {
        return Err(Error::InvalidInput(format!(
            "snapshot holds {} bytes, expected {}",
            bytes.len(),
            16 * meta.n1 * meta.n2
        )));
    }
    let amps = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8-byte chunk"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8-byte chunk"));
            Complex64::new(re, im)
        })
        .collect();
    Ok((meta, amps))
}
