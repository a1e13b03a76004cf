use serde::Serialize;
use sha2::{Digest as _, Sha256};

use crate::error::Error;

/// SHA-256 of an input.
#[derive(Clone, Debug, Serialize)]
pub struct Digest {
    pub source: String,
    pub sha256: String,
}

impl Digest {
    pub fn of(source: &str, bytes: &[u8]) -> Self {
        let hash = Sha256::digest(bytes);
        Digest { source: source.to_string(), sha256: hash.iter().map(|b| format!("{b:02x}")).collect() }
    }
}

/// JSON summary of one command run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub inputs: Vec<Digest>,
    pub tol: f64,
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Certificate or result summary of the command.
    pub summary: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(command: Vec<String>, tol: f64) -> Self {
        RunReport {
            command,
            inputs: Vec::new(),
            tol,
            outputs: Vec::new(),
            wall_clock_s: 0.0,
            status: "ok".into(),
            exit_code: 0,
            error: None,
            summary: serde_json::Value::Null,
            notes: Vec::new(),
        }
    }

    pub(crate) fn fail(&mut self, e: &Error, code: i32) {
        self.status = "error".into();
        self.exit_code = code;
        self.error = Some(e.to_string());
        if let Error::CertifiedFailure { achieved, tol, .. } = e {
            self.summary = serde_json::json!({ "residual": achieved, "tol": tol });
        }
    }
}
