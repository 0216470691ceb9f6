//! Content-addressed run records. A run is keyed by the SHA-256 of its
//! canonical inputs; a later run with the same key rewrites the recorded
//! outputs byte for byte instead of recomputing them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use pseudorbit::ENGINE_VERSION;

pub const CACHE_DIR: &str = ".pseudorbit-cache";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub hash: String,
    pub command: String,
    pub system: Value,
    pub params: Value,
    pub seed: u64,
    pub engine_version: String,
    /// File name (relative to the output directory) to contents.
    pub outputs: BTreeMap<String, String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// Hash of everything that determines the outputs. The worker count is
/// deliberately absent: outputs do not depend on it.
pub fn content_hash(command: &str, system: &Value, params: &Value, seed: u64) -> String {
    let canonical = json!({
        "command": command,
        "system": system,
        "params": params,
        "seed": seed,
        "engine_version": ENGINE_VERSION,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(out: &Path) -> Self {
        Cache {
            dir: out.join(CACHE_DIR),
        }
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn load(&self, hash: &str) -> Result<Option<RunRecord>> {
        let p = self.path(hash);
        if !p.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        let record: RunRecord =
            serde_json::from_str(&text).with_context(|| format!("corrupt run record {}", p.display()))?;
        anyhow::ensure!(
            record.hash == hash,
            "run record {} has hash {}",
            p.display(),
            record.hash
        );
        Ok(Some(record))
    }

    pub fn store(&self, record: &RunRecord) -> Result<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let p = self.path(&record.hash);
        fs::write(&p, serde_json::to_string_pretty(record)?).with_context(|| format!("writing {}", p.display()))
    }
}

/// Writes every output under `out`.
pub fn write_outputs(out: &Path, outputs: &BTreeMap<String, String>) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (name, contents) in outputs {
        let p = out.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
