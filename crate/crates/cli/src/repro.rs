//! Reproducibility records: config hash, input and output digests.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use wifiprox::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    io::copy(&mut f, &mut h).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", h.finalize()))
}

/// One command invocation. The config holds every parameter that affects
/// the output, but no paths, so the hash is stable across directories.
pub struct Run {
    command: &'static str,
    config: Value,
    config_sha256: String,
    inputs: Vec<(PathBuf, String)>,
}

impl Run {
    pub fn start(command: &'static str, config: &impl Serialize, inputs: &[&Path]) -> Result<Run> {
        let config = serde_json::to_value(config).expect("config serializes");
        let config_sha256 = sha256_hex(config.to_string().as_bytes());
        let inputs = inputs
            .iter()
            .map(|p| Ok((p.to_path_buf(), file_sha256(p)?)))
            .collect::<Result<Vec<_>>>()?;
        let run = Run {
            command,
            config,
            config_sha256,
            inputs,
        };
        run.print_header();
        Ok(run)
    }

    pub fn config_sha256(&self) -> &str {
        &self.config_sha256
    }

    fn print_header(&self) {
        println!("# wifiprox {} {}", env!("CARGO_PKG_VERSION"), self.command);
        if let Some(seed) = self.config.get("seed") {
            println!("# seed {seed}");
        }
        println!("# config sha256 {}", self.config_sha256);
        for (p, d) in &self.inputs {
            println!("# input {} sha256 {d}", p.display());
        }
    }

    /// Writes `<primary>.meta.json` describing the run and its outputs.
    pub fn finish(self, primary: &Path, extra_outputs: &[&Path]) -> Result<()> {
        let mut outputs = Vec::new();
        for p in std::iter::once(primary).chain(extra_outputs.iter().copied()) {
            outputs.push(json!({ "path": p.display().to_string(), "sha256": file_sha256(p)? }));
        }
        let inputs: Vec<Value> = self
            .inputs
            .iter()
            .map(|(p, d)| json!({ "path": p.display().to_string(), "sha256": d }))
            .collect();
        let meta = json!({
            "tool": "wifiprox",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "config_sha256": self.config_sha256,
            "inputs": inputs,
            "outputs": outputs,
        });
        let path = meta_path(primary);
        let mut text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        println!("# wrote {}", path.display());
        Ok(())
    }
}

pub fn meta_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    output.with_file_name(name)
}
