//! Content-addressed stage stamps and the run manifest.
//!
//! Each stage records a stamp: its version, a digest of the config slice it
//! depends on, digests of its inputs (keyed by role, not path), and digests
//! of its outputs (keyed by run-dir-relative path). A stage is skipped when
//! a matching stamp exists and every output still hashes to what the stamp
//! recorded. The manifest aggregates all stamps plus the config hash and
//! seeds; it contains no wall-clock data, so identical configs reproduce it
//! byte for byte.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Digest of a file, or of a directory tree: for directories, the sorted
/// list of (relative path, file digest) lines is hashed, so renames and
/// content edits both change the digest.
pub fn path_sha256(path: &Path) -> std::io::Result<String> {
    if !path.is_dir() {
        return file_sha256(path);
    }
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(path)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    let mut hasher = Sha256::new();
    for file in files {
        let rel = file.strip_prefix(path).unwrap_or(&file);
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update(b"\0");
        hasher.update(file_sha256(&file)?.as_bytes());
        hasher.update(b"\n");
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStamp {
    pub stage: String,
    pub stage_version: u32,
    /// Digest of the config fields this stage reads.
    pub config_digest: String,
    /// Input role -> content digest.
    pub inputs: BTreeMap<String, String>,
    /// Output path (relative to the run dir) -> content digest.
    pub outputs: BTreeMap<String, String>,
}

fn stamp_path(run_dir: &Path, stage: &str) -> PathBuf {
    run_dir.join("stamps").join(format!("{stage}.json"))
}

pub fn load_stamp(run_dir: &Path, stage: &str) -> Option<StageStamp> {
    let text = std::fs::read_to_string(stamp_path(run_dir, stage)).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn write_stamp(run_dir: &Path, stamp: &StageStamp) -> std::io::Result<()> {
    let path = stamp_path(run_dir, &stamp.stage);
    std::fs::create_dir_all(path.parent().expect("stamps dir"))?;
    let mut text = serde_json::to_string_pretty(stamp).expect("stamp serializes");
    text.push('\n');
    std::fs::write(path, text)
}

/// True when `stamp` matches the expected header and all recorded outputs
/// still exist with the recorded digests.
fn stamp_is_fresh(
    run_dir: &Path,
    stamp: &StageStamp,
    stage: &str,
    version: u32,
    config_digest: &str,
    inputs: &BTreeMap<String, String>,
) -> bool {
    if stamp.stage != stage
        || stamp.stage_version != version
        || stamp.config_digest != config_digest
        || &stamp.inputs != inputs
    {
        return false;
    }
    stamp.outputs.iter().all(|(rel, digest)| {
        file_sha256(&run_dir.join(rel)).is_ok_and(|h| &h == digest)
    })
}

/// Runs `body` unless a fresh stamp shows identical inputs, config, and
/// outputs. Returns whether the body actually ran.
pub fn run_stage(
    run_dir: &Path,
    stage: &str,
    version: u32,
    config_digest: &str,
    input_paths: &BTreeMap<String, PathBuf>,
    output_rel_paths: &[String],
    body: impl FnOnce() -> Result<(), CliError>,
) -> Result<bool, CliError> {
    let mut inputs = BTreeMap::new();
    for (role, path) in input_paths {
        let digest = path_sha256(path).map_err(|e| CliError::Stage {
            stage: stage.to_string(),
            message: format!("cannot hash input {role} ({}): {e}", path.display()),
        })?;
        inputs.insert(role.clone(), digest);
    }

    if let Some(stamp) = load_stamp(run_dir, stage) {
        if stamp_is_fresh(run_dir, &stamp, stage, version, config_digest, &inputs) {
            return Ok(false);
        }
    }

    body()?;

    let mut outputs = BTreeMap::new();
    for rel in output_rel_paths {
        let digest = file_sha256(&run_dir.join(rel)).map_err(|e| CliError::Stage {
            stage: stage.to_string(),
            message: format!("stage did not produce {rel}: {e}"),
        })?;
        outputs.insert(rel.clone(), digest);
    }
    let stamp = StageStamp {
        stage: stage.to_string(),
        stage_version: version,
        config_digest: config_digest.to_string(),
        inputs,
        outputs,
    };
    write_stamp(run_dir, &stamp).map_err(|e| CliError::Stage {
        stage: stage.to_string(),
        message: format!("cannot write stamp: {e}"),
    })?;
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub stages: BTreeMap<String, StageStamp>,
}

/// Rebuilds the manifest from every stamp on disk and writes manifest.json.
pub fn write_manifest(
    run_dir: &Path,
    run_id: &str,
    config_hash: &str,
    seeds: &BTreeMap<String, u64>,
) -> std::io::Result<RunManifest> {
    let mut stages = BTreeMap::new();
    let stamps_dir = run_dir.join("stamps");
    if stamps_dir.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&stamps_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        entries.sort();
        for path in entries {
            let text = std::fs::read_to_string(&path)?;
            let stamp: StageStamp = serde_json::from_str(&text).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, e)
            })?;
            stages.insert(stamp.stage.clone(), stamp);
        }
    }
    let manifest = RunManifest {
        run_id: run_id.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash.to_string(),
        seeds: seeds.clone(),
        stages,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(run_dir.join("manifest.json"), text)?;
    Ok(manifest)
}
