//! Errors that map onto the process exit codes.

use senselabel_core::llm::LlmError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config file, bad flag values, missing referenced files. Exit 2.
    #[error("{0}")]
    Config(String),
    /// A pipeline stage failed on valid config. Exit 3.
    #[error("stage {stage}: {message}")]
    Stage { stage: String, message: String },
    /// The annotation backend failed terminally (auth or retries exhausted).
    /// Exit 4.
    #[error("stage {stage}: backend: {message}")]
    Backend { stage: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
            CliError::Backend { .. } => 4,
        }
    }

    fn stage(&self) -> &str {
        match self {
            CliError::Config(_) => "config",
            CliError::Stage { stage, .. } | CliError::Backend { stage, .. } => stage,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            CliError::Stage { message, .. } | CliError::Backend { message, .. } => message.clone(),
        }
    }

    /// Single-line machine-parseable form:
    /// `error code=<n> stage=<name> message="..."`.
    pub fn one_line(&self) -> String {
        let sanitized = self
            .message()
            .replace('\\', "\\\\")
            .replace('"', "\\\"")
            .replace('\n', "; ");
        format!(
            "error code={} stage={} message=\"{}\"",
            self.exit_code(),
            self.stage(),
            sanitized
        )
    }
}

/// Wraps a stage body error; backend failures keep their own exit code.
pub fn stage_error(stage: impl Into<String>, err: impl std::fmt::Display) -> CliError {
    CliError::Stage {
        stage: stage.into(),
        message: err.to_string(),
    }
}

pub fn backend_error(stage: impl Into<String>, err: &LlmError) -> CliError {
    let stage = stage.into();
    match err {
        LlmError::Auth(_) | LlmError::TerminalTransport { .. } => CliError::Backend {
            stage,
            message: err.to_string(),
        },
        other => CliError::Stage {
            stage,
            message: other.to_string(),
        },
    }
}
