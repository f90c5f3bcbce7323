//! Per-invocation bookkeeping: declared inputs and outputs, and the manifest
//! that pins them.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use tennis_graph::config::Config;

#[derive(Serialize)]
struct FileDigest {
    path: String,
    bytes: u64,
    sha256: String,
}

/// Everything needed to repeat a run: the command line, the fully resolved
/// config (also written beside the manifest) and digests of every file read
/// or written.
#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    argv: &'a [String],
    seed: u64,
    config_file: String,
    config_sha256: String,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

pub struct Run {
    pub command: &'static str,
    pub config: Config,
    pub out: PathBuf,
    argv: Vec<String>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Run {
    pub fn new(command: &'static str, config: Config, argv: Vec<String>) -> anyhow::Result<Self> {
        let out = config.data.output.clone();
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Run {
            command,
            config,
            out,
            argv,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Declares an input; a missing file is reported by name.
    pub fn input(&mut self, path: &Path) -> anyhow::Result<PathBuf> {
        if !path.is_file() {
            return Err(tennis_graph::Error::MissingFile(path.to_path_buf()).into());
        }
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
        Ok(path.to_path_buf())
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Declares an output file written by other code.
    pub fn output(&mut self, path: PathBuf) -> PathBuf {
        if !self.outputs.contains(&path) {
            self.outputs.push(path.clone());
        }
        path
    }

    pub fn create(&mut self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.output(self.artifact(name));
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        let config_name = format!("{}.config.toml", self.command);
        let toml = self.config.to_toml();
        let config_path = self.artifact(&config_name);
        std::fs::write(&config_path, &toml)?;
        let digest = |paths: &[PathBuf]| -> anyhow::Result<Vec<FileDigest>> {
            paths
                .iter()
                .map(|p| {
                    Ok(FileDigest {
                        path: p.display().to_string(),
                        bytes: std::fs::metadata(p)?.len(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        self.outputs.sort();
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            argv: &self.argv,
            seed: self.config.seed,
            config_file: config_path.display().to_string(),
            config_sha256: hex::encode(Sha256::digest(toml.as_bytes())),
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
        };
        let path = self.artifact(&format!("manifest_{}.json", self.command));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}
