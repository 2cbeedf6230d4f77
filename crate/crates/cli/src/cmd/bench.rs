use anyhow::Result;
use clap::Args;
use freqatt::attention::Variant;
use freqatt::bench::bench_variants;

use super::{ensure_dir, load_config};
use crate::manifest::Manifest;
use crate::{Common, Outcome};

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Input frames (time extent of the mel input).
    #[arg(long, default_value_t = 256)]
    frames: usize,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Comma-separated variants; all when omitted.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<Variant>,
}

pub fn run(common: &Common, args: BenchArgs) -> Result<Outcome> {
    let cfg = load_config(common.config.as_deref())?;
    let variants = if args.variants.is_empty() { Variant::ALL.to_vec() } else { args.variants.clone() };
    let rows = bench_variants(&cfg, &variants, args.batch, args.frames, args.repeats, common.seed)?;
    let mut text = format!("shape={}x1x{}x{} repeats={}\n", args.batch, cfg.n_mels, args.frames, args.repeats);
    for r in &rows {
        text.push_str(&format!(
            "variant={} median_ms={:.3} ratio={:.3}\n",
            r.variant,
            r.median.as_secs_f64() * 1e3,
            r.ratio
        ));
    }
    let mut order: Vec<_> = rows.iter().collect();
    order.sort_by_key(|r| r.median);
    let names: Vec<String> = order.iter().map(|r| r.variant.to_string()).collect();
    text.push_str(&format!("order={}\n", names.join(",")));
    print!("{text}");
    if let Some(dir) = &common.out {
        ensure_dir(dir)?;
        std::fs::write(dir.join("bench.txt"), &text)?;
        let mut m = Manifest::new("bench", common.config.as_deref(), common.seed);
        m.field("repeats", args.repeats).field("frames", args.frames).field("batch", args.batch);
        m.output(dir.join("bench.txt"));
        m.write(dir)?;
    }
    Ok(Outcome::Ok)
}
