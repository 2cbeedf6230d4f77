//! `manifest.txt`: what a run did, so identical manifests imply identical outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};

pub struct Manifest {
    command: &'static str,
    config: Option<PathBuf>,
    seed: u64,
    fields: Vec<(String, String)>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl Manifest {
    pub fn new(command: &'static str, config: Option<&Path>, seed: u64) -> Self {
        Manifest {
            command,
            config: config.map(Path::to_path_buf),
            seed,
            fields: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn field(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn input(&mut self, p: impl Into<PathBuf>) -> &mut Self {
        self.inputs.push(p.into());
        self
    }

    pub fn output(&mut self, p: impl Into<PathBuf>) -> &mut Self {
        self.outputs.push(p.into());
        self
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "config={}", self.config.as_ref().map_or("<default>".into(), |p| p.display().to_string()));
        let _ = writeln!(s, "seed={}", self.seed);
        for (k, v) in &self.fields {
            let _ = writeln!(s, "{k}={v}");
        }
        for p in &self.inputs {
            let _ = writeln!(s, "input={}", p.display());
        }
        for p in &self.outputs {
            let _ = writeln!(s, "output={}", p.display());
        }
        let _ = writeln!(s, "wall_ms={:.3}", self.started.elapsed().as_secs_f64() * 1e3);
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.txt");
        std::fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}
