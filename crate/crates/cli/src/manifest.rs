use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one command invocation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    /// Hash of the arguments that influence results.
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub status: String,
}

/// One file per output directory; a rerun of the same command with the same
/// outputs replaces its earlier entry.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ManifestFile {
    pub runs: Vec<RunManifest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> std::io::Result<InputFile> {
    Ok(InputFile {
        path: path.display().to_string(),
        sha256: sha256_hex(&fs::read(path)?),
    })
}

/// Arguments minus `--threads`, which never changes results.
pub fn config_hash(args: &[String]) -> String {
    let mut kept = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--threads" {
            skip = true;
            continue;
        }
        if a.starts_with("--threads=") {
            continue;
        }
        kept.push(a.as_str());
    }
    sha256_hex(kept.join("\0").as_bytes())
}

pub fn record(dir: &Path, run: RunManifest) -> std::io::Result<PathBuf> {
    let path = dir.join(FILE_NAME);
    let mut file: ManifestFile = fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    file.runs.retain(|r| !(r.command == run.command && r.outputs == run.outputs));
    file.runs.push(run);
    fs::write(&path, serde_json::to_string_pretty(&file)? + "\n")?;
    Ok(path)
}
