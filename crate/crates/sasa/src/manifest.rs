//! Run manifests: enough to rerun a command and get the same output.
//!
//! A file output `out` gets a sidecar `out.manifest.json`. JSON outputs name
//! the sidecar in a top-level `manifest` field and CSV outputs in a leading
//! `# manifest:` comment. Output printed to stdout embeds the manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments as given, without the program name.
    pub argv: Vec<String>,
    /// Every flag after defaults and environment fallbacks are applied.
    pub flags: Value,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub sasa: &'static str,
    pub sasa_core: &'static str,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, flags: Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            argv,
            flags,
            seed,
            versions: Versions {
                sasa: env!("CARGO_PKG_VERSION"),
                sasa_core: sasa_core::VERSION,
            },
            started_unix: now(),
            finished_unix: None,
            inputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> io::Result<()> {
        let bytes = fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(())
    }

    pub fn finish(&mut self) {
        self.finished_unix = Some(now());
    }
}

pub fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn with_manifest(value: Value, manifest: Value) -> Value {
    let mut obj = Map::new();
    obj.insert("manifest".into(), manifest);
    match value {
        Value::Object(inner) => obj.extend(inner),
        other => {
            obj.insert("result".into(), other);
        }
    }
    Value::Object(obj)
}

fn write_sidecar(out: &Path, manifest: &RunManifest) -> io::Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
    fs::write(sidecar(out), text + "\n")
}

/// Writes `value` to `out` with a sidecar manifest, or to stdout with the
/// manifest embedded.
pub fn emit_json(out: Option<&Path>, value: Value, manifest: &mut RunManifest) -> io::Result<()> {
    manifest.finish();
    match out {
        Some(path) => {
            let doc = with_manifest(value, Value::String(file_name(&sidecar(path))));
            let text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
            fs::write(path, text + "\n")?;
            write_sidecar(path, manifest)
        }
        None => {
            let m = serde_json::to_value(&*manifest).map_err(io::Error::other)?;
            let text = serde_json::to_string_pretty(&with_manifest(value, m)).map_err(io::Error::other)?;
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}")
        }
    }
}

/// Writes a JSON document that shares an existing sidecar, such as the
/// summary next to a simulation CSV.
pub fn emit_json_sharing(path: &Path, value: Value, owner: &Path) -> io::Result<()> {
    let doc = with_manifest(value, Value::String(file_name(&sidecar(owner))));
    let text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}

/// Writes CSV text behind a `# manifest:` line and the sidecar itself.
pub fn emit_csv(path: &Path, body: &[u8], manifest: &mut RunManifest) -> io::Result<()> {
    manifest.finish();
    let mut f = fs::File::create(path)?;
    writeln!(f, "# manifest: {}", file_name(&sidecar(path)))?;
    f.write_all(body)?;
    write_sidecar(path, manifest)
}
