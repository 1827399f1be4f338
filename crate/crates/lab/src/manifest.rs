//! Run manifests and checksummed output files.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    BoundFailure,
    BlowUp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub software_version: String,
    pub status: Status,
    /// One line per asserted bound that failed.
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
    pub summary: BTreeMap<String, Value>,
    /// The configuration as run, in config-file syntax.
    pub config: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resumed_from: Option<FileEntry>,
}

impl RunManifest {
    /// 0 on success, 1 when an asserted bound failed, 2 on blow-up.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => 0,
            Status::BoundFailure => 1,
            Status::BlowUp => 2,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_entry(path: &Path, label: String) -> io::Result<FileEntry> {
    let bytes = fs::read(path)?;
    Ok(FileEntry {
        path: label,
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// Output directory that remembers every file written into it.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.path(name), bytes)?;
        self.push(name, bytes);
        Ok(())
    }

    /// Renders into memory with `f`, then writes `name`.
    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> io::Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    /// Records a file that something else already wrote into the directory.
    pub fn register(&mut self, name: &str) -> io::Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.push(name, &bytes);
        Ok(())
    }

    fn push(&mut self, name: &str, bytes: &[u8]) {
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    pub fn into_files(self) -> Vec<FileEntry> {
        self.files
    }
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> io::Result<()> {
    let json = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
    fs::write(dir.join(MANIFEST_FILE), json + "\n")
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
    fn rewriting_a_file_keeps_one_entry() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::create(dir.path()).unwrap();
        out.write("a.csv", b"1").unwrap();
        out.write("a.csv", b"22").unwrap();
        let files = out.into_files();
        assert_eq!(files.len(), 1);
        assert_eq!(files[0].bytes, 2);
    }
}
