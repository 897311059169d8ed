use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::CliError;
use crate::fitting::report::{TOOL_NAME, TOOL_VERSION};

/// Provenance lines prefixed to every CSV output.
pub(super) struct Provenance {
    pub command: &'static str,
    pub config: String,
    pub seed: u64,
    pub input_sha256: String,
}

impl Provenance {
    pub fn csv_header(&self) -> String {
        format!(
            "# {TOOL_NAME} {TOOL_VERSION}\n# command: {}\n# config: {}\n# seed: {}\n# input_sha256: {}\n",
            self.command, self.config, self.seed, self.input_sha256
        )
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "input_sha256": self.input_sha256,
        })
    }
}

pub(super) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes to `path`, or stdout when `None`.
pub(super) fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}"))),
    }
}

pub(super) fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))
}

pub(super) fn to_json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// CSV float: shortest round-trip form, `inf` and `nan` spelled out.
pub(super) fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
