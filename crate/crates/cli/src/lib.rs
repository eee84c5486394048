//! Library surface of the senselabel pipeline driver. The binary is a thin
//! wrapper so integration tests can run commands in-process.

pub mod config;
pub mod error;
pub mod grid;
pub mod manifest;
pub mod stages;

use std::path::Path;

use config::{Overrides, Resolved};
use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Pretrain,
    Encode,
    Project,
    Annotate,
    Evaluate,
    Grid,
}

/// Loads the config, runs one command (including any prerequisite stages),
/// and rewrites the run manifest. Returns the resolved config so callers can
/// locate the run directory.
pub fn run_command(
    command: Command,
    config_path: &Path,
    overrides: &Overrides,
) -> Result<Resolved, CliError> {
    let resolved = config::load(config_path, overrides)?;
    std::fs::create_dir_all(&resolved.run_dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create run directory {}: {e}",
            resolved.run_dir.display()
        ))
    })?;
    match command {
        Command::Ingest => stages::cmd_ingest(&resolved)?,
        Command::Pretrain => stages::cmd_pretrain(&resolved)?,
        Command::Encode => stages::cmd_encode(&resolved)?,
        Command::Project => stages::cmd_project(&resolved)?,
        Command::Annotate => stages::cmd_annotate(&resolved)?,
        Command::Evaluate => stages::cmd_evaluate(&resolved)?,
        Command::Grid => grid::cmd_grid(&resolved)?,
    }
    manifest::write_manifest(
        &resolved.run_dir,
        &resolved.run_id,
        &resolved.config_hash,
        &resolved.seeds_map(),
    )
    .map_err(|e| CliError::Stage {
        stage: "manifest".into(),
        message: e.to_string(),
    })?;
    Ok(resolved)
}
