use anyhow::{Context, Result};
use clap::Args;
use freqatt::attention::Variant;
use freqatt::model::{build, param_audit};

use super::{ensure_dir, load_config};
use crate::manifest::Manifest;
use crate::{Common, Outcome};

#[derive(Args, Debug)]
pub struct InitArgs {
    /// Overrides the config's attention variant.
    #[arg(long)]
    variant: Option<Variant>,
}

pub fn run(common: &Common, args: InitArgs) -> Result<Outcome> {
    let dir = common.out.as_deref().context("init needs --out")?;
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(v) = args.variant {
        cfg.variant = v;
        cfg.validate()?;
    }
    ensure_dir(dir)?;
    let model = build::<f32>(&cfg, common.seed)?;
    let config_path = dir.join("config.txt");
    std::fs::write(&config_path, cfg.to_string())?;
    let stem = dir.join("weights");
    model.save(&stem)?;
    let audit = param_audit(&cfg)?;
    let mut m = Manifest::new("init", common.config.as_deref(), common.seed);
    m.field("variant", cfg.variant).field("params", audit.total);
    m.output(&config_path).output(stem.with_extension("tnsr")).output(stem.with_extension("manifest"));
    m.write(dir)?;
    println!("variant={} params={} enumerated={} weights={}", cfg.variant, audit.total, model.enumerate_parameters(), stem.display());
    Ok(Outcome::Ok)
}
