use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use freqatt::metrics::{
    collar_f1, decode_events, median_filter, parse_tsv, psds, psds_from_events, EventList, PsdsConfig,
    DEFAULT_COLLAR, DEFAULT_GRID,
};
use freqatt::model::CLASSES;
use freqatt::synth;
use freqatt::{tnsr, Tensor32};

use super::{ensure_dir, parse_windows};
use crate::manifest::Manifest;
use crate::{Common, Outcome};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Reference events (DESED TSV).
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Estimated events (DESED TSV).
    #[arg(long, conflicts_with = "probs")]
    est: Option<PathBuf>,
    /// Directory of `<clip>.tnsr` `[T, 10]` probability dumps.
    #[arg(long)]
    probs: Option<PathBuf>,
    /// PSDS threshold grid size.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = DEFAULT_COLLAR)]
    collar: f64,
    /// Decision threshold for collar F1 when scoring probabilities.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value = "7")]
    median: String,
    /// Clip duration in seconds.
    #[arg(long, default_value_t = synth::CLIP_SECONDS)]
    duration: f64,
    #[arg(long)]
    frame_dur: Option<f64>,
}

fn fmt_score(v: Option<f64>) -> String {
    v.map_or("nan".into(), |v| format!("{v:.6}"))
}

pub fn run(common: &Common, args: EvalArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&args.reference)
        .with_context(|| format!("reading {}", args.reference.display()))?;
    let reference = parse_tsv(&text, args.duration)?;
    let frame_dur = args.frame_dur.unwrap_or_else(synth::frame_duration);
    let (s1, s2) = (PsdsConfig::scenario1(args.grid), PsdsConfig::scenario2(args.grid));
    let mut m = Manifest::new("eval", None, common.seed);
    m.input(&args.reference);
    let (estimated, psds1, psds2) = match (&args.est, &args.probs) {
        (Some(est), None) => {
            let text = std::fs::read_to_string(est).with_context(|| format!("reading {}", est.display()))?;
            let estimated = parse_tsv(&text, args.duration)?;
            m.input(est);
            let p1 = psds_from_events(&reference, &estimated, &s1)?.score;
            let p2 = psds_from_events(&reference, &estimated, &s2)?.score;
            (estimated, p1, p2)
        }
        (None, Some(dir)) => {
            let windows = parse_windows(&args.median, CLASSES.len())?;
            let mut dataset = Vec::new();
            let mut estimated: Vec<EventList> = Vec::new();
            for r in &reference {
                let path = dir.join(std::path::Path::new(&r.clip_id).with_extension("tnsr"));
                let p: Tensor32 = tnsr::load(&path).with_context(|| format!("reading {}", path.display()))?;
                let p = median_filter(&p, &windows)?;
                estimated.push(decode_events(&p, args.threshold, frame_dur, &r.clip_id, r.duration)?);
                m.input(path);
                dataset.push((r.clone(), p));
            }
            m.field("median", &args.median).field("threshold", args.threshold);
            let p1 = psds(&dataset, frame_dur, &s1)?.score;
            let p2 = psds(&dataset, frame_dur, &s2)?.score;
            (estimated, p1, p2)
        }
        _ => bail!("give exactly one of --est or --probs"),
    };
    let f1 = collar_f1(&reference, &estimated, args.collar)?;
    let mut out = String::new();
    for (c, counts) in f1.per_class.iter().enumerate() {
        out.push_str(&format!(
            "cbf1.{}={} tp={} fp={} fn={}\n",
            CLASSES[c],
            fmt_score(counts.f1()),
            counts.tp,
            counts.fp,
            counts.fn_
        ));
    }
    out.push_str(&format!("cbf1.macro={}\npsds1={psds1:.6}\npsds2={psds2:.6}\n", fmt_score(f1.macro_f1)));
    print!("{out}");
    if let Some(dir) = &common.out {
        ensure_dir(dir)?;
        std::fs::write(dir.join("scores.txt"), &out)?;
        m.field("grid", args.grid).field("collar", args.collar);
        m.output(dir.join("scores.txt"));
        m.write(dir)?;
    }
    Ok(Outcome::Ok)
}
