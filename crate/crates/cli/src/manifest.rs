//! Per-run manifest: config echo, timings and digests of every output file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: RunConfig,
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputFile>,
}

/// Collects outputs and stage timings while a command runs.
pub struct Recorder {
    out_dir: PathBuf,
    command: String,
    config: RunConfig,
    started: Instant,
    started_unix: f64,
    stages: Vec<StageTiming>,
    outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl Recorder {
    pub fn new(out_dir: PathBuf, command: &str, config: RunConfig) -> Self {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        Recorder {
            out_dir,
            command: command.to_string(),
            config,
            started: Instant::now(),
            started_unix,
            stages: vec![],
            outputs: vec![],
        }
    }

    /// Run `f` and record its duration under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f()?;
        self.stages.push(StageTiming { name: name.to_string(), seconds: t.elapsed().as_secs_f64() });
        Ok(out)
    }

    /// Write an output file (atomically) and remember its digest.
    pub fn emit(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(rel);
        write_atomic(&path, bytes)?;
        self.outputs.push(OutputFile { path: rel.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn emit_json(&mut self, rel: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.emit(rel, &text)
    }

    /// Write the manifest last, once every output exists.
    pub fn finish(self) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            command: self.command,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            started_unix: self.started_unix,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            stages: self.stages,
            outputs: self.outputs,
        };
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        write_atomic(&self.out_dir.join(MANIFEST_NAME), &text)?;
        Ok(manifest)
    }
}
