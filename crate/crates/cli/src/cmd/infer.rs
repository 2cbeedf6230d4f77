use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use freqatt::features::{self, log_mel, read_wav, HOP, SAMPLE_RATE};
use freqatt::metrics::{decode_events, format_tsv, median_filter, EventList};
use freqatt::model::{build, ModelParams};
use freqatt::{tnsr, Tensor32};

use super::{ensure_dir, load_config, parse_windows};
use crate::manifest::Manifest;
use crate::{Common, Outcome};

#[derive(Args, Debug)]
pub struct InferArgs {
    /// WAV files, or `[128, T]` log-mel tensors (`.tnsr`).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Weight stem written by `init` (without extension). Without it the
    /// model is initialized from `--seed`.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Median window in frames: one value, or one per class.
    #[arg(long, default_value = "7")]
    median: String,
}

fn load_input(path: &Path) -> Result<(Tensor32, f64)> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tnsr")) {
        let mel: Tensor32 = tnsr::load(path)?;
        let [_, t] = mel.dims2()?;
        // centered framing: T frames cover (T - 1) hops
        let duration = ((t - 1) * HOP) as f64 / SAMPLE_RATE as f64;
        Ok((mel, duration))
    } else {
        let clip = read_wav(path)?;
        Ok((log_mel(&clip)?, clip.duration_s()))
    }
}

pub fn run(common: &Common, args: InferArgs) -> Result<Outcome> {
    let dir = common.out.as_deref().context("infer needs --out")?;
    let cfg = load_config(common.config.as_deref())?;
    let model: ModelParams<f32> = match &args.weights {
        Some(stem) => ModelParams::load(&cfg, stem).with_context(|| format!("loading weights {}", stem.display()))?,
        None => {
            log::info!("no --weights given; using a model initialized from seed {}", common.seed);
            build(&cfg, common.seed)?
        }
    };
    let windows = parse_windows(&args.median, cfg.n_classes)?;
    let frame_dur = (cfg.time_reduction() * HOP) as f64 / SAMPLE_RATE as f64;
    let probs_dir = dir.join("probs");
    ensure_dir(&probs_dir)?;
    let mut m = Manifest::new("infer", common.config.as_deref(), common.seed);
    m.field("weights", args.weights.as_ref().map_or("<seeded>".into(), |p| p.display().to_string()));
    m.field("threshold", args.threshold).field("median", &args.median);
    let mut lists = Vec::new();
    for input in &args.inputs {
        let (mel, duration) = load_input(input).with_context(|| format!("reading {}", input.display()))?;
        let out = model.forward(&features::batch(&[mel])?)?;
        let [_, t, k] = out.strong.dims3()?;
        let probs = out.strong.reshape(vec![t, k])?;
        let Some(name) = input.file_name().and_then(|n| n.to_str()) else {
            bail!("unusable file name {}", input.display())
        };
        let clip_id = match input.extension().and_then(|e| e.to_str()) {
            Some("tnsr") => format!("{}.wav", input.file_stem().and_then(|s| s.to_str()).unwrap_or(name)),
            _ => name.to_string(),
        };
        let dump = probs_dir.join(Path::new(&clip_id).with_extension("tnsr"));
        tnsr::save(&dump, &probs)?;
        let smoothed = median_filter(&probs, &windows)?;
        let events: EventList = decode_events(&smoothed, args.threshold, frame_dur, &clip_id, duration)?;
        println!("clip={clip_id} frames={t} events={}", events.events.len());
        m.input(input).output(&dump);
        lists.push(events);
    }
    let events_path = dir.join("events.tsv");
    std::fs::write(&events_path, format_tsv(&lists))?;
    m.output(&events_path);
    m.write(dir)?;
    Ok(Outcome::Ok)
}
