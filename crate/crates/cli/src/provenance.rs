use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to rerun a command: the effective configuration after flag overrides,
/// its hash, the hashes of the files it read, and the versions that produced the output.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub library_version: &'static str,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub parallel_feature: bool,
    pub target: String,
    /// SHA-256 of the effective configuration serialized as compact JSON.
    pub config_sha256: String,
    pub config_file_sha256: Option<String>,
    /// SHA-256 of each input file, keyed by its role.
    pub input_sha256: BTreeMap<String, String>,
    pub effective_config: Value,
}

impl Provenance {
    pub fn new(cfg: &RunConfig, file_sha256: Option<String>, input_sha256: BTreeMap<String, String>) -> Self {
        let effective_config = serde_json::to_value(cfg).expect("config serializes");
        let compact = serde_json::to_string(&effective_config).expect("JSON values serialize");
        Provenance {
            tool: "ballvn",
            version: env!("CARGO_PKG_VERSION"),
            library_version: ballvn::VERSION,
            command: cfg.command.map_or("", |c| c.name()).to_string(),
            seed: cfg.seed,
            threads: cfg.threads,
            parallel_feature: cfg!(feature = "parallel"),
            target: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            config_sha256: sha256_hex(compact.as_bytes()),
            config_file_sha256: file_sha256,
            input_sha256,
            effective_config,
        }
    }
}
