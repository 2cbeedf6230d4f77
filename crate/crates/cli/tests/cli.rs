use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freqatt::metrics::{format_tsv, parse_tsv, Event, EventList};

fn freqatt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqatt")).args(args).env("RUST_LOG", "error").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.txt");
    fs::write(&path, "# small widths\nchannels=2,2,2,2,2,2,2\ngru_hidden=4\nreduction=1\nc2d_hidden=2\n").unwrap();
    path
}

fn synth(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("synth{seed}"));
    let o = freqatt(&["--seed", &seed.to_string(), "--out", s(&out), "synth", "--n-clips", &n.to_string()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn audit_reports_default_totals_and_passes() {
    let o = freqatt(&["audit"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("variant=baseline total=4427956 "));
    assert!(text.contains("variant=se total=4537012 delta=109056 "));
    assert!(text.contains("variant=fwse total=4438876 delta=10920 "));
    assert!(text.contains("variant=se+tfwse total=4547932 delta=119976 "));
    assert_eq!(value(&text, "audit"), Some("pass"));
    assert!(!text.contains("status=FAIL"));
}

#[test]
fn audit_components_sum_to_totals() {
    let text = stdout(&freqatt(&["audit"]));
    for line in text.lines().filter(|l| l.starts_with("variant=")) {
        let fields: Vec<(&str, usize)> = line
            .split(' ')
            .filter_map(|kv| kv.split_once('='))
            .filter_map(|(k, v)| v.parse().ok().map(|v| (k, v)))
            .collect();
        let total = fields.iter().find(|(k, _)| *k == "total").unwrap().1;
        let parts: usize = fields.iter().filter(|(k, _)| !matches!(*k, "total" | "delta")).map(|(_, v)| v).sum();
        assert_eq!(parts, total, "{line}");
    }
}

#[test]
fn gradcheck_passes_for_attention_blocks() {
    let o = freqatt(&["gradcheck", "--variant", "tfwse+se", "--instances", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(value(&stdout(&o), "gradcheck"), Some("pass"));
}

#[test]
fn bad_usage_exits_with_one() {
    assert_eq!(freqatt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(freqatt(&["gradcheck", "--variant", "nonsense"]).status.code(), Some(1));
    assert_eq!(freqatt(&["--help"]).status.code(), Some(0));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), 3, 4);
    let b = dir.path().join("again");
    fs::create_dir_all(&b).unwrap();
    let o = freqatt(&["--seed", "4", "--out", s(&b), "synth", "--n-clips", "3"]);
    assert!(o.status.success());
    for name in ["ground_truth.tsv", "synth_0000.wav", "synth_0002.wav"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert!(a.join("manifest.txt").exists());
}

#[test]
fn infer_writes_156_frame_probabilities_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let data = synth(dir.path(), 2, 1);
    let wavs = [data.join("synth_0000.wav"), data.join("synth_0001.wav")];
    let run = |out: &Path| {
        let o = freqatt(&["--config", s(&cfg), "--seed", "3", "--out", s(out), "infer", s(&wavs[0]), s(&wavs[1])]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    let p: freqatt::Tensor<f32> = freqatt::tnsr::load(a.join("probs/synth_0000.tnsr")).unwrap();
    assert_eq!(p.dims(), [156, 10]);
    assert!(p.data().iter().all(|v| (0.0..=1.0).contains(v)));
    for f in ["probs/synth_0000.tnsr", "probs/synth_0001.tnsr", "events.tsv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(parse_tsv(&fs::read_to_string(a.join("events.tsv")).unwrap(), 10.0).is_ok());
}

#[test]
fn init_then_infer_with_saved_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let model = dir.path().join("model");
    let o = freqatt(&["--config", s(&cfg), "--seed", "9", "--out", s(&model), "init", "--variant", "fdy"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let data = synth(dir.path(), 1, 2);
    let wav = data.join("synth_0000.wav");
    let with_weights = dir.path().join("w");
    let o = freqatt(&[
        "--config", s(&model.join("config.txt")), "--out", s(&with_weights),
        "infer", s(&wav), "--weights", s(&model.join("weights")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let seeded = dir.path().join("seeded");
    let o = freqatt(&["--config", s(&model.join("config.txt")), "--seed", "9", "--out", s(&seeded), "infer", s(&wav)]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(with_weights.join("probs/synth_0000.tnsr")).unwrap(),
        fs::read(seeded.join("probs/synth_0000.tnsr")).unwrap()
    );
}

fn eval(reference: &Path, estimate: &Path) -> (Option<i32>, String) {
    let o = freqatt(&["eval", "--ref", s(reference), "--est", s(estimate)]);
    (o.status.code(), stdout(&o))
}

fn shifted(lists: &[EventList], amount: f64) -> Vec<EventList> {
    lists
        .iter()
        .map(|l| {
            let events = l
                .events
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let d = if i % 2 == 0 { amount } else { -amount };
                    let onset = (e.onset + d).max(0.0);
                    Event { class: e.class, onset, offset: (e.offset + d).clamp(onset + 0.05, l.duration) }
                })
                .collect();
            EventList::new(l.clip_id.clone(), l.duration, events).unwrap()
        })
        .collect()
}

#[test]
fn eval_scores_perfect_empty_and_jittered_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 10, 0);
    let gt = data.join("ground_truth.tsv");
    let (code, text) = eval(&gt, &gt);
    assert_eq!(code, Some(0));
    assert_eq!(value(&text, "cbf1.macro"), Some("1.000000"));
    assert_eq!(value(&text, "psds1"), Some("1.000000"));
    assert_eq!(value(&text, "psds2"), Some("1.000000"));

    let refs = parse_tsv(&fs::read_to_string(&gt).unwrap(), 10.0).unwrap();
    let empty: Vec<EventList> = refs.iter().map(|r| EventList::empty(r.clip_id.clone(), r.duration)).collect();
    let empty_path = dir.path().join("empty.tsv");
    fs::write(&empty_path, format_tsv(&empty)).unwrap();
    let (_, text) = eval(&gt, &empty_path);
    assert_eq!(value(&text, "cbf1.macro"), Some("0.000000"));
    assert_eq!(value(&text, "psds1"), Some("0.000000"));

    for (amount, perfect) in [(0.1, true), (0.5, false)] {
        let path = dir.path().join(format!("jitter{amount}.tsv"));
        fs::write(&path, format_tsv(&shifted(&refs, amount))).unwrap();
        let (_, text) = eval(&gt, &path);
        let f1: f64 = value(&text, "cbf1.macro").unwrap().parse().unwrap();
        assert_eq!(f1 == 1.0, perfect, "jitter {amount}: {f1}");
    }
}

#[test]
fn eval_from_probability_files_matches_event_scores_on_perfect_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 4, 6);
    let gt = data.join("ground_truth.tsv");
    let refs = parse_tsv(&fs::read_to_string(&gt).unwrap(), 10.0).unwrap();
    let probs = dir.path().join("probs");
    fs::create_dir_all(&probs).unwrap();
    for r in &refs {
        let p = freqatt::synth::indicator_probs(r, 156, freqatt::synth::frame_duration());
        let stem = r.clip_id.trim_end_matches(".wav");
        freqatt::tnsr::save(probs.join(format!("{stem}.tnsr")), &p).unwrap();
    }
    let o = freqatt(&["eval", "--ref", s(&gt), "--probs", s(&probs)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(value(&text, "psds1"), Some("1.000000"));
    assert_eq!(value(&text, "cbf1.macro"), Some("1.000000"));
}

#[test]
fn unknown_class_label_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1, 0);
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "filename\tonset\toffset\tevent_label\nsynth_0000.wav\t1.0\t2.0\tTrombone\n").unwrap();
    let (code, _) = eval(&data.join("ground_truth.tsv"), &bad);
    assert_eq!(code, Some(1));
}

#[test]
fn features_writes_one_mel_per_wav() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1, 0);
    let out = dir.path().join("mel");
    let o = freqatt(&["--out", s(&out), "features", s(&data.join("synth_0000.wav"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mel: freqatt::Tensor<f32> = freqatt::tnsr::load(out.join("synth_0000.tnsr")).unwrap();
    assert_eq!(mel.dims(), [128, 626]);
}

#[test]
fn silent_wav_infers_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let wav = dir.path().join("silence.wav");
    freqatt::features::write_wav(&wav, &freqatt::features::AudioClip::new(vec![0.0; 160_000])).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = freqatt(&["--config", s(&cfg), "--out", s(&out), "infer", s(&wav)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(out.join("events.tsv")).unwrap(), fs::read(out.join("probs/silence.tnsr")).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}
