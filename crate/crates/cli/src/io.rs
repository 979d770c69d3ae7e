//! Input parsing and output formatting shared by the commands.

use std::fmt::Write as _;
use std::path::Path;

use secrecy_core::channel_model::{matrix_from_rows, ChannelJson, ChannelSpec};
use secrecy_core::infoest::{Mixture, MixtureJson};
use secrecy_core::psdcore::{PsdMatrix, Tolerance};
use secrecy_core::rate_eval::CovariancePartition;

/// Command error carrying the process exit code: 2 for malformed input,
/// 1 for everything else that aborts a run.
#[derive(Debug)]
pub struct CmdError {
    message: String,
    exit_code: u8,
}

impl CmdError {
    pub fn malformed(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            exit_code: 2,
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            exit_code: 1,
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.exit_code
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CmdError {}

impl From<secrecy_core::Error> for CmdError {
    fn from(err: secrecy_core::Error) -> Self {
        CmdError::runtime(err.to_string())
    }
}

pub type CmdResult<T> = Result<T, CmdError>;

pub fn read_channel(path: &Path, tol: &Tolerance) -> CmdResult<ChannelSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::malformed(format!("cannot read {}: {e}", path.display())))?;
    let json: ChannelJson = serde_json::from_str(&text)
        .map_err(|e| CmdError::malformed(format!("malformed channel JSON: {e}")))?;
    ChannelSpec::from_json(&json, tol)
        .map_err(|e| CmdError::malformed(format!("invalid channel spec: {e}")))
}

pub fn read_mixture(path: &Path) -> CmdResult<Mixture> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::malformed(format!("cannot read {}: {e}", path.display())))?;
    let json: MixtureJson = serde_json::from_str(&text)
        .map_err(|e| CmdError::malformed(format!("malformed mixture JSON: {e}")))?;
    Mixture::from_json(&json).map_err(|e| CmdError::malformed(format!("invalid mixture: {e}")))
}

pub fn read_partition(path: &Path, tol: &Tolerance) -> CmdResult<CovariancePartition> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::malformed(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<Vec<f64>>> = serde_json::from_str(&text)
        .map_err(|e| CmdError::malformed(format!("malformed partition JSON: {e}")))?;
    let parts = rows
        .iter()
        .map(|m| {
            let mat = matrix_from_rows(m)?;
            PsdMatrix::new(mat, tol)
        })
        .collect::<secrecy_core::Result<Vec<_>>>()
        .map_err(|e| CmdError::malformed(format!("invalid partition: {e}")))?;
    Ok(CovariancePartition::new(parts))
}

/// Inline row-major matrix argument, e.g. `[[1.0,0.0],[0.0,2.0]]`.
pub fn parse_matrix_arg(text: &str, tol: &Tolerance) -> CmdResult<PsdMatrix> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text)
        .map_err(|e| CmdError::malformed(format!("malformed matrix argument: {e}")))?;
    let mat =
        matrix_from_rows(&rows).map_err(|e| CmdError::malformed(format!("bad matrix: {e}")))?;
    PsdMatrix::new(mat, tol).map_err(|e| CmdError::malformed(format!("matrix not PSD: {e}")))
}

pub fn parse_weights(text: &str) -> CmdResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CmdError::malformed(format!("bad weight {s:?}: {e}")))
        })
        .collect()
}

pub fn parse_order(text: &str) -> CmdResult<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CmdError::malformed(format!("bad order entry {s:?}: {e}")))
        })
        .collect()
}

pub fn parse_ladder(text: &str) -> CmdResult<Vec<f64>> {
    let ladder: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CmdError::malformed(format!("bad ladder entry {s:?}: {e}")))
        })
        .collect::<CmdResult<_>>()?;
    if ladder.is_empty() || ladder.iter().any(|a| *a <= 0.0) {
        return Err(CmdError::malformed("alpha ladder must be positive"));
    }
    Ok(ladder)
}

/// Full-precision float formatting: 17 significant digits round-trip f64
/// exactly.
pub fn fmt_f64(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:.17e}").expect("formatting cannot fail");
    s
}

pub fn write_output(out: &Option<std::path::PathBuf>, content: &str) -> CmdResult<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CmdError::runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
