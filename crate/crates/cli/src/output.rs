//! Output directories, file writers and worker configuration.

use std::fs;
use std::path::{Path, PathBuf};

use pnpkit::io::{encode_pnm, encode_raw};
use pnpkit::Signal;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::failure::Failure;

pub const THREADS_ENV: &str = "PNPKIT_THREADS";

/// First 16 hex digits of the SHA-256 of the canonical config JSON.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(serde_json::to_vec(cfg).expect("config serializes"));
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// `--out`, then the config's `output`, then `pnpkit-runs/<command>-<hash>`.
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &ExperimentConfig, command: &str) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("pnpkit-runs").join(format!("{command}-{}", config_hash(cfg))))
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&root)
            .map_err(|e| Failure::usage(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<PathBuf, Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
        text.push('\n');
        self.write(name, text)
    }

    /// Writes `<stem>.raw` and, for grayscale or RGB images, `<stem>.pgm`/`.ppm`.
    pub fn write_signal(&self, stem: &str, x: &Signal) -> Result<(), Failure> {
        self.write(&format!("{stem}.raw"), encode_raw(x)?)?;
        let ext = match x.shape() {
            [_, _] => "pgm",
            [_, _, 3] => "ppm",
            _ => return Ok(()),
        };
        self.write(&format!("{stem}.{ext}"), encode_pnm(x, 255)?)?;
        Ok(())
    }
}

/// Worker count: available parallelism, capped by `PNPKIT_THREADS`.
pub fn worker_count() -> Result<usize, Failure> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n.min(available)),
            _ => Err(Failure::usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(available),
    }
}

/// JSON-friendly float: non-finite values become `null`.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// File-name-safe version of a label.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
