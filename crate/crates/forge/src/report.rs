use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use gkp_core::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// CLI failure split by exit code: configuration problems (bad flags,
/// unreadable inputs, invalid parameter combinations) exit 2, everything
/// that breaks after a validated start exits 1.
#[derive(Debug)]
pub enum ForgeError {
    Config(String),
    Runtime(String),
}

impl ForgeError {
    pub fn code(&self) -> u8 {
        match self {
            ForgeError::Config(_) => 2,
            ForgeError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for ForgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForgeError::Config(msg) => write!(f, "config: {msg}"),
            ForgeError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CoreError> for ForgeError {
    fn from(err: CoreError) -> ForgeError {
        match err {
            CoreError::Config(msg) => ForgeError::Config(msg),
            other => ForgeError::Runtime(other.to_string()),
        }
    }
}

/// Read a required input file, reporting failures as configuration errors.
pub fn read_input(path: &Path) -> Result<String, ForgeError> {
    std::fs::read_to_string(path)
        .map_err(|err| ForgeError::Config(format!("cannot read {}: {err}", path.display())))
}

/// Comma-separated float list; a single value may be splatted by callers.
pub fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, ForgeError> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| ForgeError::Config(format!("invalid {what} value {tok:?}")))
        })
        .collect()
}

/// One value per mode, accepting a single splatted entry.
pub fn per_mode(values: Vec<f64>, modes: usize, what: &str) -> Result<Vec<f64>, ForgeError> {
    if values.len() == 1 {
        return Ok(vec![values[0]; modes]);
    }
    if values.len() == modes {
        return Ok(values);
    }
    Err(ForgeError::Config(format!(
        "{what} needs 1 or {modes} values, got {}",
        values.len()
    )))
}

pub fn fresh_seed() -> u64 {
    rand::random()
}

// ---------------------------------------------------------------------------
// matrix / vector serialization

pub fn mat_rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn int_rows(m: &IntMatrix) -> Vec<Vec<i64>> {
    (0..m.nrows())
        .map(|i| (0..m.0.ncols()).map(|j| m.0[(i, j)]).collect())
        .collect()
}

pub fn vec_vals(v: &RealVector) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Debug, Serialize)]
pub struct LatticeOut {
    pub modes: usize,
    pub d: u64,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
}

impl LatticeOut {
    pub fn from(lat: &GkpLattice) -> LatticeOut {
        LatticeOut {
            modes: lat.n,
            d: lat.d,
            s: mat_rows(&lat.s),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct OpOut {
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
}

impl OpOut {
    pub fn from(op: &AffineGaussianOp) -> OpOut {
        OpOut {
            m: mat_rows(&op.m),
            lambda: vec_vals(&op.lambda),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EnvelopeOut {
    pub sigma_e: Vec<Vec<f64>>,
    pub mu_e: Vec<f64>,
}

impl EnvelopeOut {
    pub fn from(env: &Envelope) -> EnvelopeOut {
        EnvelopeOut {
            sigma_e: mat_rows(&env.sigma_e),
            mu_e: vec_vals(&env.mu_e),
        }
    }
}

// ---------------------------------------------------------------------------
// output sinks and the run manifest

pub enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    pub fn from_opt(out: &Option<PathBuf>) -> Sink {
        match out {
            Some(path) => Sink::File(path.clone()),
            None => Sink::Stdout,
        }
    }

    pub fn file(path: &Path) -> Sink {
        Sink::File(path.to_path_buf())
    }

    /// Write the payload; file sinks hand back a digest record.
    pub fn write(&self, bytes: &[u8]) -> Result<Option<OutputRecord>, ForgeError> {
        match self {
            Sink::Stdout => {
                std::io::stdout()
                    .write_all(bytes)
                    .map_err(|err| ForgeError::Runtime(format!("cannot write stdout: {err}")))?;
                Ok(None)
            }
            Sink::File(path) => {
                std::fs::write(path, bytes).map_err(|err| {
                    ForgeError::Runtime(format!("cannot write {}: {err}", path.display()))
                })?;
                Ok(Some(OutputRecord::new(path, bytes)))
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

impl OutputRecord {
    fn new(path: &Path, bytes: &[u8]) -> OutputRecord {
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        OutputRecord {
            path: path.display().to_string(),
            bytes: bytes.len(),
            sha256: format!("{:x}", hasher.finalize()),
        }
    }
}

/// Provenance record written next to file outputs: resolved configuration
/// (defaults included), the master seed, and digests of everything written.
/// Reproducible modulo the `created` timestamp.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub created: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputRecord>,
}

impl Manifest {
    pub fn new(command: &'static str, config: serde_json::Value) -> Manifest {
        Manifest {
            tool: "gkp-forge",
            version: env!("CARGO_PKG_VERSION"),
            command,
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: None,
            workers: None,
            config,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, rec: Option<OutputRecord>) {
        if let Some(rec) = rec {
            self.outputs.push(rec);
        }
    }

    /// Write beside the primary output; stdout runs keep no manifest unless
    /// a path was given explicitly.
    pub fn write(
        &self,
        primary: &Sink,
        explicit: &Option<PathBuf>,
    ) -> Result<(), ForgeError> {
        let path = match (explicit, primary) {
            (Some(path), _) => path.clone(),
            (None, Sink::File(out)) => {
                let mut name = out.as_os_str().to_os_string();
                name.push(".manifest.json");
                PathBuf::from(name)
            }
            (None, Sink::Stdout) => return Ok(()),
        };
        let text = to_json(self)?;
        std::fs::write(&path, text).map_err(|err| {
            ForgeError::Runtime(format!("cannot write {}: {err}", path.display()))
        })
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, ForgeError> {
    let mut text = serde_json::to_vec_pretty(value)
        .map_err(|err| ForgeError::Runtime(format!("serialization failed: {err}")))?;
    text.push(b'\n');
    Ok(text)
}
