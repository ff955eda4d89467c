use crate::error::{CliError, CliResult};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Output directory plus the manifest describing what was written there.
pub struct Output {
    dir: PathBuf,
    manifest: Manifest,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    config_hash: String,
    seed: u64,
    threads: usize,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path, command: &str, config_hash: &str, seed: u64, threads: usize) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config_hash: config_hash.to_string(),
                seed,
                threads,
                files: Vec::new(),
            },
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Opens `name` for writing and records it in the manifest.
    pub fn file(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.path(name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.record(name);
        Ok(BufWriter::new(f))
    }

    pub fn record(&mut self, name: &str) {
        self.manifest.files.push(name.to_string());
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_writer(self.file(name)?);
        for row in rows {
            w.serialize(row).map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    pub fn finish(self) -> CliResult<()> {
        let path = self.path("manifest.toml");
        let text = toml::to_string(&self.manifest).map_err(|e| CliError::Config(e.to_string()))?;
        let mut f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| CliError::io(&path, e))
    }
}
