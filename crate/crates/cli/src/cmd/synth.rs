use anyhow::{bail, Context, Result};
use clap::Args;
use freqatt::features::write_wav;
use freqatt::metrics::format_tsv;
use freqatt::synth::synth_corpus;

use super::ensure_dir;
use crate::manifest::Manifest;
use crate::{Common, Outcome};

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    n_clips: usize,
}

pub fn run(common: &Common, args: SynthArgs) -> Result<Outcome> {
    if args.n_clips == 0 {
        bail!("--n-clips must be at least 1");
    }
    let dir = common.out.as_deref().context("synth needs --out")?;
    ensure_dir(dir)?;
    let corpus = synth_corpus(common.seed, args.n_clips)?;
    let mut m = Manifest::new("synth", None, common.seed);
    m.field("n_clips", args.n_clips);
    for clip in &corpus {
        let path = dir.join(&clip.clip_id);
        write_wav(&path, &clip.audio).with_context(|| format!("writing {}", path.display()))?;
        m.output(path);
    }
    let labels: Vec<_> = corpus.iter().map(|c| c.labels.clone()).collect();
    let gt = dir.join("ground_truth.tsv");
    std::fs::write(&gt, format_tsv(&labels))?;
    m.output(&gt);
    m.write(dir)?;
    let events: usize = labels.iter().map(|l| l.events.len()).sum();
    println!("clips={} events={} ground_truth={}", corpus.len(), events, gt.display());
    Ok(Outcome::Ok)
}
