use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;

/// Output directory that remembers what it wrote, for the metadata sidecar.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Writes `rows` with a header line, also when there are no rows.
    pub fn write_csv<T: Serialize + Default>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        if rows.is_empty() {
            // the header comes from serializing a placeholder row
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(T::default())?;
            let bytes = w.into_inner().map_err(|e| e.into_error())?;
            let header = bytes.split_inclusive(|&b| b == b'\n').next().unwrap_or(&[]);
            std::fs::write(self.path(name), header)?;
        } else {
            let mut w = csv::Writer::from_path(self.path(name))?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        self.files.push(name.to_string());
        log::info!("wrote {} ({} rows)", self.path(name).display(), rows.len());
        Ok(())
    }

    /// `<command>.meta.json`: config echo, version, timestamps, file list and
    /// a command-specific summary.
    pub fn write_metadata(
        &mut self,
        command: &str,
        config: &RunConfig,
        started: DateTime<Utc>,
        summary: serde_json::Value,
    ) -> Result<PathBuf, CliError> {
        let name = format!("{command}.meta.json");
        let meta = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "started": started.to_rfc3339_opts(SecondsFormat::Millis, true),
            "finished": Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            "workers": rayon::current_num_threads(),
            "files": self.files,
            "summary": summary,
            "config": config,
        });
        let path = self.path(&name);
        std::fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
        Ok(path)
    }
}
