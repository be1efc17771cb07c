use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance stamped into every output file.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub command: &'static str,
    pub seed: u64,
    pub config_hash: String,
}

impl Stamp {
    /// Hash of the command arguments, seed and the bytes of every input file.
    /// Output location and thread count do not enter.
    pub fn new<A: Serialize>(command: &'static str, args: &A, seed: u64, inputs: &[(&str, &[u8])]) -> Result<Stamp> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(args)?);
        h.update(seed.to_le_bytes());
        for (name, bytes) in inputs {
            h.update(name.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        Ok(Stamp {
            command,
            seed,
            config_hash: hex::encode(h.finalize()),
        })
    }

    pub fn csv_header(&self, buf: &mut Vec<u8>) {
        let _ = writeln!(buf, "# bichro {} {}", self.command, env!("CARGO_PKG_VERSION"));
        let _ = writeln!(buf, "# seed={}", self.seed);
        let _ = writeln!(buf, "# config_sha256={}", self.config_hash);
    }

    /// `value` with `seed` and `config_sha256` added at the top level.
    pub fn json<T: Serialize>(&self, value: &T) -> Result<Vec<u8>> {
        let mut v = serde_json::to_value(value)?;
        let obj = v.as_object_mut().context("expected a JSON object")?;
        obj.insert("seed".into(), self.seed.into());
        obj.insert("config_sha256".into(), self.config_hash.clone().into());
        let mut out = serde_json::to_vec_pretty(&v)?;
        out.push(b'\n');
        Ok(out)
    }
}

pub fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
