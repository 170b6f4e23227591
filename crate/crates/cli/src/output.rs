//! Deterministic CSV and JSON artifact writing with per-run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::RunConfig;

/// Collects the artifacts of a run and writes the manifest alongside them.
pub struct RunOutput {
    dir: PathBuf,
    started: Instant,
    artifacts: Vec<String>,
    pub partial: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    config: &'a RunConfig,
    version: &'a str,
    wall_seconds: f64,
    artifacts: &'a [String],
    partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibrated_constants: Option<serde_json::Value>,
}

impl RunOutput {
    pub fn create(cfg: &RunConfig) -> std::io::Result<Self> {
        let dir = cfg.out.join(&cfg.experiment);
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, started: Instant::now(), artifacts: Vec::new(), partial: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes one CSV with a header; numbers are formatted with full
    /// precision so identical runs produce byte-identical files.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &str,
        rows: &[Vec<f64>],
    ) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(f, "{header}")?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(f, "{}", cells.join(","))?;
        }
        f.flush()?;
        self.artifacts.push(name.to_string());
        Ok(path)
    }

    /// Writes a CSV whose rows mix labels and numbers.
    pub fn write_csv_raw(
        &mut self,
        name: &str,
        header: &str,
        rows: &[String],
    ) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(f, "{header}")?;
        for row in rows {
            writeln!(f, "{row}")?;
        }
        f.flush()?;
        self.artifacts.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).expect("serializable report");
        std::fs::write(&path, text)?;
        self.artifacts.push(name.to_string());
        Ok(path)
    }

    /// Writes the manifest; call last so the wall time and artifact list are
    /// complete. No artifact ships without it.
    pub fn finish(
        &self,
        cfg: &RunConfig,
        calibrated: Option<serde_json::Value>,
    ) -> std::io::Result<()> {
        let manifest = Manifest {
            experiment: &cfg.experiment,
            config: cfg,
            version: env!("CARGO_PKG_VERSION"),
            wall_seconds: self.started.elapsed().as_secs_f64(),
            artifacts: &self.artifacts,
            partial: self.partial,
            calibrated_constants: calibrated,
        };
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())
    }
}
