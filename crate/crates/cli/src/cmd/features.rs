use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use freqatt::features::{log_mel, read_wav};
use freqatt::tnsr;
use freqatt::Tensor32;

use super::ensure_dir;
use crate::manifest::Manifest;
use crate::{Common, Outcome};

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// 16 kHz mono 16-bit WAV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

pub fn run(common: &Common, args: FeaturesArgs) -> Result<Outcome> {
    let dir = common.out.as_deref().context("features needs --out")?;
    ensure_dir(dir)?;
    let mut m = Manifest::new("features", None, common.seed);
    for input in &args.inputs {
        let clip = read_wav(input).with_context(|| format!("reading {}", input.display()))?;
        let mel: Tensor32 = log_mel(&clip)?;
        let Some(stem) = input.file_stem() else { bail!("no file name in {}", input.display()) };
        let out = dir.join(stem).with_extension("tnsr");
        tnsr::save(&out, &mel)?;
        println!("input={} frames={} output={}", input.display(), mel.dims()[1], out.display());
        m.input(input).output(out);
    }
    m.write(dir)?;
    Ok(Outcome::Ok)
}
