//! Run manifest and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
    /// Data rows for CSVs, `None` for plots.
    pub rows: Option<usize>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Constants {
    pub wavelength_m: f64,
    pub mass_kg: f64,
    pub recoil_energy_j: f64,
    pub recoil_energy_khz: f64,
    pub recoil_temperature_k: f64,
    pub recoil_velocity_m_s: f64,
    pub time_unit_s: f64,
    pub length_unit_m: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub scenario: String,
    pub kind: String,
    pub tool: String,
    pub version: String,
    /// Configuration text as given.
    pub config: String,
    pub threads: usize,
    pub constants: Constants,
    pub wall_clock_s: f64,
    pub outputs: Vec<OutputRecord>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

impl RunManifest {
    pub fn succeeded(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn datasets(&self) -> usize {
        self.outputs.iter().filter(|o| o.rows.is_some()).count()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp: PathBuf = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"x\n").unwrap();
        write_atomic(&p, b"y\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"y\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
