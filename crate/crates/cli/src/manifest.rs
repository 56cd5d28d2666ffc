//! Run manifest: what was run, on what, producing what. Contains no
//! timestamps, so identical runs write identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the effective configuration serialized as JSON.
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    /// Output file name → SHA-256, excluding the manifest itself.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Config hash independent of the directory the config was loaded from.
pub fn config_sha256(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = None;
    c.inputs = Default::default();
    c.displacement.fits = None;
    let json = serde_json::to_vec(&c).expect("config serializes");
    sha256_hex(&json)
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Manifest {
        Manifest {
            toolkit: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: cfg.seed,
            config_sha256: config_sha256(cfg),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<(), Failure> {
        self.inputs.insert(name.to_string(), file_sha256(path)?);
        Ok(())
    }

    /// Hash every regular file under `dir` (recursively, by relative path)
    /// and write the manifest there.
    pub fn write(mut self, dir: &Path) -> Result<(), Failure> {
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let rel = p.strip_prefix(dir).expect("under dir").to_string_lossy().replace('\\', "/");
                    if rel != MANIFEST_FILE {
                        self.outputs.insert(rel, file_sha256(&p)?);
                    }
                }
            }
        }
        let mut json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        json.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), json)?;
        Ok(())
    }
}
