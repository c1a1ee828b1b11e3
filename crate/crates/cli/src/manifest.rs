use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::run::Run;

/// Everything needed to reproduce a run and check its outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// `git describe` of the build.
    pub build: String,
    /// Command line without the program name.
    pub args: Vec<String>,
    /// Parsed configuration, defaults included.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    /// SHA-256 of every file read.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every file written.
    pub outputs: BTreeMap<String, String>,
    pub stdout_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hashes(files: &[(PathBuf, Vec<u8>)]) -> BTreeMap<String, String> {
    files
        .iter()
        .map(|(p, b)| (p.display().to_string(), sha256_hex(b)))
        .collect()
}

pub struct Timing {
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn new(args: Vec<String>, config: serde_json::Value, seed: Option<u64>, run: &Run, timing: Timing) -> Self {
        Manifest {
            tool: "poclab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            build: env!("POCLAB_GIT_DESCRIBE").into(),
            args,
            config,
            seed,
            threads: rayon::current_num_threads(),
            started_unix: timing.started_unix,
            wall_clock_seconds: timing.wall_clock_seconds,
            inputs: hashes(&run.inputs),
            outputs: hashes(&run.files),
            stdout_sha256: sha256_hex(run.stdout.as_bytes()),
        }
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Differences between a manifest and a fresh run; empty when identical.
pub fn compare(manifest: &Manifest, run: &Run) -> Vec<String> {
    let mut problems = Vec::new();
    let fresh = hashes(&run.files);
    for (path, hash) in &manifest.outputs {
        match fresh.get(path) {
            Some(h) if h == hash => {}
            Some(_) => problems.push(format!("{path}: hash differs")),
            None => problems.push(format!("{path}: not produced")),
        }
    }
    for path in fresh.keys().filter(|p| !manifest.outputs.contains_key(*p)) {
        problems.push(format!("{path}: not in the manifest"));
    }
    for (path, hash) in hashes(&run.inputs) {
        if manifest.inputs.get(&path) != Some(&hash) {
            problems.push(format!("input {path} changed since the recorded run"));
        }
    }
    if sha256_hex(run.stdout.as_bytes()) != manifest.stdout_sha256 {
        problems.push("standard output differs".into());
    }
    problems
}
