//! Run directories and provenance.

use std::path::{Path, PathBuf};

use serde::Serialize;

use lmsv_core::io::sha256_hex;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub version: &'static str,
    pub seed: u64,
}

pub struct Run {
    pub dir: PathBuf,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
}

/// Hash of the effective configuration (seed applied, output location dropped).
pub fn config_hash(cfg: &ExperimentConfig, seed: u64) -> String {
    let mut c = cfg.clone();
    c.out = None;
    c.strict = false;
    c.seed = Some(seed);
    sha256_hex(serde_json::to_string(&c).unwrap_or_default().as_bytes())
}

/// `out/<command>-<hash>`, or the first free `-2`, `-3`, … suffix, so a
/// previous run is never overwritten.
fn fresh_dir(out: &Path, command: &str, hash: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let base = format!("{command}-{}", &hash[..12]);
    let mut k = 1;
    loop {
        let dir = if k == 1 { out.join(&base) } else { out.join(format!("{base}-{k}")) };
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => k += 1,
            Err(e) => return Err(e),
        }
    }
}

impl Run {
    pub fn start(out: &Path, command: &str, cfg: &ExperimentConfig, seed: u64) -> std::io::Result<Self> {
        let hash = config_hash(cfg, seed);
        let dir = fresh_dir(out, command, &hash)?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg).unwrap_or_default())?;
        Ok(Self {
            dir,
            provenance: Provenance { command: command.into(), config_hash: hash, version: env!("CARGO_PKG_VERSION"), seed },
            warnings: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn hash(&self) -> &str {
        &self.provenance.config_hash
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    /// `{provenance, warnings, result}` as pretty JSON.
    pub fn write_json<T: Serialize>(&self, name: &str, result: &T) -> lmsv_core::error::Result<()> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            provenance: &'a Provenance,
            warnings: &'a [String],
            result: &'a T,
        }
        let doc = Doc { provenance: &self.provenance, warnings: &self.warnings, result };
        std::fs::write(self.path(name), serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }
}

/// Keep file names to `[A-Za-z0-9_-]`.
pub fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
