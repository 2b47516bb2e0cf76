//! Library half of the `srres` binary: config resolution, CSV reporting,
//! and the five subcommand implementations, kept here so integration tests
//! can drive them in-process.

pub mod commands;
pub mod config;
pub mod report;

use srres_core::SrError;

/// Process exit code for an error:
/// 1 for bad invocations (config or method-name mistakes),
/// 2 for data problems (missing or undecodable files, broken checkpoints),
/// 3 for numeric failure (the training loss left the finite range).
pub fn exit_code(e: &SrError) -> i32 {
    match e {
        SrError::InvalidConfig(_) | SrError::UnknownMethod(_) => 1,
        SrError::NonFiniteLoss { .. } => 3,
        _ => 2,
    }
}
