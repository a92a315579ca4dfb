//! Deterministic artifact writers: fixed-format CSV, the run manifest, and
//! the configuration hash.
//!
//! Floats are rendered with 17 significant digits so every f64 round-trips
//! and identical runs produce byte-identical files; rows end with a bare
//! `\n` regardless of platform.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// 17 significant digits, scientific notation, locale-independent.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Streaming CSV writer with a fixed header.
pub struct Csv {
    out: BufWriter<File>,
    path: PathBuf,
    columns: usize,
}

impl Csv {
    pub fn create(path: &Path, header: &[&str]) -> Result<Csv> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        out.write_all(header.join(",").as_bytes())?;
        out.write_all(b"\n")?;
        Ok(Csv { out, path: path.to_path_buf(), columns: header.len() })
    }

    /// One data row; fields were already formatted by the caller.
    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        self.out.write_all(fields.join(",").as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().with_context(|| format!("writing {}", self.path.display()))
    }
}

/// FNV-1a over the canonical run description; cheap, stable, and good
/// enough to detect configuration drift between runs.
pub fn config_hash(canonical: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canonical.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Final status recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Warning,
    Error,
}

impl RunStatus {
    fn label(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Warning => "warning",
            RunStatus::Error => "error",
        }
    }
}

/// Writes `manifest.txt` into the output directory. Called on every exit
/// path, including failures that left partial artifacts behind.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    seed: u64,
    threads: usize,
    hash: u64,
    status: RunStatus,
) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let path = out_dir.join("manifest.txt");
    let body = format!(
        "command = {command}\nversion = {}\nseed = {seed}\nthreads = {threads}\nconfig_hash = {hash:016x}\nstatus = {}\n",
        env!("CARGO_PKG_VERSION"),
        status.label(),
    );
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}
