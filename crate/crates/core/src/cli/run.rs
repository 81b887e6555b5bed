use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    /// Role to path, as given on the command line.
    pub inputs: BTreeMap<String, Vec<String>>,
    pub out: String,
    pub seed: u64,
    pub params: serde_json::Value,
}

/// Byte-identical across reruns with the same inputs and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: String,
    pub version: String,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub result: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: String,
    pub command: String,
    pub created_unix_ms: u128,
    /// Every file the run wrote, the report included.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
    pub report: RunReport,
}

fn display(path: &Path) -> String {
    path.to_string_lossy().replace('\\', "/")
}

/// Fails with an I/O error naming the first path that does not exist.
pub fn require_paths<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for path in paths {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input does not exist"),
            ));
        }
    }
    Ok(())
}

/// Bookkeeping for one command: digests of what it read, files it wrote,
/// warnings it raised.
pub struct Run {
    name: String,
    command: String,
    out: PathBuf,
    seed: u64,
    inputs: BTreeMap<String, Vec<String>>,
    digests: Vec<InputDigest>,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

impl Run {
    pub fn new(command: &str, name: String, out: &Path, seed: u64) -> Self {
        Run {
            name,
            command: command.to_owned(),
            out: out.to_path_buf(),
            seed,
            inputs: BTreeMap::new(),
            digests: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn renamed(mut self, name: String) -> Self {
        self.name = name;
        self
    }

    pub fn read(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.entry(role.to_owned()).or_default().push(display(path));
        self.digests.push(InputDigest {
            role: role.to_owned(),
            path: display(path),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    pub fn read_text(&mut self, role: &str, path: &Path) -> Result<String> {
        let bytes = self.read(role, path)?;
        String::from_utf8(bytes).map_err(|e| Error::format(display(path), e.to_string()))
    }

    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        log::info!("wrote {}", path.display());
        self.outputs.push(rel.to_owned());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn finish(mut self, params: serde_json::Value, result: serde_json::Value) -> Result<RunSummary> {
        let report_rel = format!("{}.report.json", self.name);
        let mut outputs = self.outputs.clone();
        outputs.push(report_rel.clone());
        let report = RunReport {
            run: self.name.clone(),
            version: VERSION.to_owned(),
            config: RunConfig {
                command: self.command.clone(),
                inputs: std::mem::take(&mut self.inputs),
                out: display(&self.out),
                seed: self.seed,
                params,
            },
            inputs: std::mem::take(&mut self.digests),
            outputs: self.outputs.clone(),
            warnings: std::mem::take(&mut self.warnings),
            result,
        };
        let report_path = self.write_json(&report_rel, &report)?;
        let manifest = Manifest {
            run: self.name.clone(),
            command: self.command.clone(),
            created_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
        let manifest_path = self.out.join(format!("{}.manifest.json", self.name));
        fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(RunSummary {
            report_path,
            manifest_path,
            report,
        })
    }
}
