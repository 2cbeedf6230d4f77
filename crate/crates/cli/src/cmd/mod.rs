pub mod audit;
pub mod bench;
pub mod eval;
pub mod features;
pub mod gradcheck;
pub mod infer;
pub mod init;
pub mod synth;

use std::path::Path;

use anyhow::{Context, Result};
use freqatt::model::ModelConfig;

pub fn load_config(path: Option<&Path>) -> Result<ModelConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ModelConfig::parse(&text).with_context(|| format!("config {}", p.display()))
        }
        None => Ok(ModelConfig::default()),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Parses `7` or `7,7,5,...` into one window per class.
pub fn parse_windows(spec: &str, classes: usize) -> Result<Vec<usize>> {
    let v: Vec<usize> = spec
        .split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad median window {s:?}")))
        .collect::<Result<_>>()?;
    match v.len() {
        1 => Ok(vec![v[0]; classes]),
        n if n == classes => Ok(v),
        n => anyhow::bail!("{n} median windows given for {classes} classes"),
    }
}
