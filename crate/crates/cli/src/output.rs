//! In-memory output bundle, flushed only after a subcommand succeeds so a
//! failed run leaves nothing behind.

use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Default)]
pub struct Bundle {
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct FileEntry<'a> {
    path: &'a str,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    subcommand: &'a str,
    config_sha256: String,
    seed: u64,
    refine: u32,
    versions: Versions,
    files: Vec<FileEntry<'a>>,
}

#[derive(Serialize)]
struct Versions {
    sfqo_cli: &'static str,
    sfqo: &'static str,
}

pub struct RunInfo<'a> {
    pub subcommand: &'a str,
    pub config_json: &'a [u8],
    pub seed: u64,
    pub refine: u32,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Bundle {
    /// Adds a file built by `write`.
    pub fn add<F>(&mut self, name: &str, write: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> sfqo::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf).with_context(|| format!("writing {name}"))?;
        self.push(name, buf)
    }

    pub fn add_bytes(&mut self, name: &str, bytes: Vec<u8>) -> anyhow::Result<()> {
        self.push(name, bytes)
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.push(name, buf)
    }

    fn push(&mut self, name: &str, bytes: Vec<u8>) -> anyhow::Result<()> {
        if self.files.iter().any(|(n, _)| n == name) || name == "manifest.json" {
            bail!("output {name} written twice");
        }
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// Writes every file plus `manifest.json` into `dir`.
    pub fn commit(mut self, dir: &Path, info: &RunInfo) -> anyhow::Result<Vec<String>> {
        self.files.sort_by(|a, b| a.0.cmp(&b.0));
        let manifest = Manifest {
            tool: "sfqo",
            subcommand: info.subcommand,
            config_sha256: sha256_hex(info.config_json),
            seed: info.seed,
            refine: info.refine,
            versions: Versions {
                sfqo_cli: env!("CARGO_PKG_VERSION"),
                sfqo: sfqo_version(),
            },
            files: self
                .files
                .iter()
                .map(|(n, b)| FileEntry {
                    path: n,
                    bytes: b.len(),
                    sha256: sha256_hex(b),
                })
                .collect(),
        };
        let mut mbytes = serde_json::to_vec_pretty(&manifest)?;
        mbytes.push(b'\n');
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in self
            .files
            .iter()
            .chain(std::iter::once(&("manifest.json".to_string(), mbytes)))
        {
            let path = dir.join(name);
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            written.push(name.clone());
        }
        Ok(written)
    }
}

/// The library and the CLI are versioned together.
fn sfqo_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}
