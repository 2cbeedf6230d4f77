mod common;

use common::*;
use freqatt::attention::{
    c2datt_forward, fdy_forward, fwse_forward, se_forward, tfwse_forward, tse_forward, C2dAttParams,
    ExcitationParams, FdyConv, FdyParams,
};
use freqatt::augment::{filter_augment, frame_shift, mixup, AugmentConfig};
use freqatt::features::{self, hz_to_mel, mel_project, mel_to_hz, AudioClip};
use freqatt::gradcheck::{run_suite, CheckTarget, TOLERANCE};
use freqatt::init;
use freqatt::metrics::{collar_f1, decode_events, median_filter, psds, Event, EventList, PsdsConfig};
use freqatt::ops::{self, Conv2dSpec};
use freqatt::Tensor;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

/// Reorders one axis of a 4-d tensor: `out[.., i, ..] = x[.., perm[i], ..]`.
fn permute(x: &T64, axis: usize, perm: &[usize]) -> T64 {
    let d = x.dims().to_vec();
    let mut out = x.clone();
    for flat in 0..x.len() {
        let mut idx = [flat / (d[1] * d[2] * d[3]), flat / (d[2] * d[3]) % d[1], flat / d[3] % d[2], flat % d[3]];
        let dst = idx;
        idx[axis] = perm[idx[axis]];
        out.set(&dst, x.at(&idx));
    }
    out
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut init::rng(seed));
    p
}

fn close(a: &T64, b: &T64, tol: f64) -> Result<(), TestCaseError> {
    let d = a.max_abs_diff(b).unwrap();
    prop_assert!(d < tol, "max abs diff {d:e}");
    Ok(())
}

fn dims4() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..=3, 1usize..=4, 1usize..=6, 1usize..=6)
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn softmax_sums_to_one(
        dims in (1usize..=4, 1usize..=5, 1usize..=4),
        axis in 0usize..3,
        temp in 0.05f64..20.0,
        seed: u64,
        scale in 0.1f64..500.0,
    ) {
        let x = rand_t(vec![dims.0, dims.1, dims.2], seed).scale(scale);
        let p = ops::softmax(&x, axis, temp).unwrap();
        let d = x.dims().to_vec();
        for a in 0..d[0] {
            for b in 0..d[1] {
                for c in 0..d[2] {
                    let mut idx = [a, b, c];
                    if idx[axis] != 0 {
                        continue;
                    }
                    let total: f64 = (0..d[axis]).map(|i| { idx[axis] = i; p.at(&idx) }).sum();
                    prop_assert!((total - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn sigmoid_stays_open(v in proptest::num::f64::NORMAL | proptest::num::f64::ZERO | proptest::num::f64::SUBNORMAL) {
        let s = ops::sigmoid_scalar(v);
        prop_assert!(s > 0.0 && s < 1.0, "sigmoid({v}) = {s}");
        let s32 = ops::sigmoid_scalar(v as f32);
        if (v as f32).is_finite() {
            prop_assert!(s32 > 0.0 && s32 < 1.0);
        }
    }

    #[test]
    fn conv_equals_loop_oracle(
        (cin, cout, kh, kw) in (1usize..=3, 1usize..=3, 1usize..=3, 1usize..=3),
        (extra_f, extra_t) in (0usize..=5, 0usize..=5),
        stride in (1usize..=2, 1usize..=2),
        bias: bool,
        seed: u64,
    ) {
        let spec = Conv2dSpec {
            in_channels: cin, out_channels: cout, kernel_h: kh, kernel_w: kw,
            stride, padding: (kh / 2, kw / 2), bias,
        };
        let x = rand_t(vec![2, cin, kh + extra_f, kw + extra_t], seed);
        let w = rand_t(spec.weight_dims().to_vec(), seed ^ 1);
        let b = bias.then(|| rand_t(vec![cout], seed ^ 2));
        close(&ops::conv2d(&x, &w, b.as_ref(), &spec).unwrap(), &conv(&x, &w, b.as_ref(), stride, spec.padding), 1e-12)?;
    }

    #[test]
    fn pooling_preserves_window_means((b, c, nf, nt) in dims4(), pf in 1usize..=3, pt in 1usize..=3, seed: u64) {
        let x = rand_t(vec![b, c, nf * pf, nt * pt], seed);
        let y = ops::avg_pool2d(&x, pf, pt).unwrap();
        close(&y, &avg_pool(&x, pf, pt), 1e-12)?;
        prop_assert!((y.mean() - x.mean()).abs() < 1e-12);
    }

    #[test]
    fn se_is_equivariant_to_frequency_and_time_shuffles((b, c, f, t) in dims4(), seed: u64) {
        let x = rand_t(vec![b, c, f, t], seed);
        let p = ExcitationParams::init(c, 1, &mut init::rng(seed ^ 9)).unwrap();
        let (pf, pt) = (shuffled(f, seed ^ 3), shuffled(t, seed ^ 4));
        let y = se_forward(&x, &p).unwrap();
        let shuffled_x = permute(&permute(&x, 2, &pf), 3, &pt);
        close(&se_forward(&shuffled_x, &p).unwrap(), &permute(&permute(&y, 2, &pf), 3, &pt), 1e-12)?;
    }

    #[test]
    fn every_excitation_block_is_time_equivariant((b, c, f, t) in dims4(), seed: u64) {
        let x = rand_t(vec![b, c, f, t], seed);
        let pc = ExcitationParams::init(c, 1, &mut init::rng(seed ^ 5)).unwrap();
        let pf = ExcitationParams::init(f, 1, &mut init::rng(seed ^ 6)).unwrap();
        let c2d = C2dAttParams::init(2, 3, &mut init::rng(seed ^ 7)).unwrap();
        let perm = shuffled(t, seed ^ 8);
        let xp = permute(&x, 3, &perm);
        close(&tse_forward(&xp, &pc).unwrap(), &permute(&tse_forward(&x, &pc).unwrap(), 3, &perm), 1e-12)?;
        close(&fwse_forward(&xp, &pf).unwrap(), &permute(&fwse_forward(&x, &pf).unwrap(), 3, &perm), 1e-12)?;
        close(&tfwse_forward(&xp, &pf).unwrap(), &permute(&tfwse_forward(&x, &pf).unwrap(), 3, &perm), 1e-12)?;
        close(&c2datt_forward(&xp, &c2d).unwrap(), &permute(&c2datt_forward(&x, &c2d).unwrap(), 3, &perm), 1e-12)?;
    }

    #[test]
    fn frame_wise_blocks_reduce_to_clip_wise_on_static_input((b, c, f, t) in dims4(), seed: u64) {
        let col = rand_t(vec![b, c, f, 1], seed);
        let x = Tensor::from_fn(vec![b, c, f, t], |i| col.data()[i / t]);
        let pc = ExcitationParams::init(c, 1, &mut init::rng(seed ^ 1)).unwrap();
        let pf = ExcitationParams::init(f, 1, &mut init::rng(seed ^ 2)).unwrap();
        close(&tse_forward(&x, &pc).unwrap(), &se_forward(&x, &pc).unwrap(), 1e-12)?;
        close(&tfwse_forward(&x, &pf).unwrap(), &fwse_forward(&x, &pf).unwrap(), 1e-12)?;
    }

    #[test]
    fn fdy_weights_are_a_distribution(
        (b, cin, f, t) in dims4(),
        k in 1usize..=5,
        temp in 0.1f64..40.0,
        seed: u64,
    ) {
        let mut p = FdyParams::init(Conv2dSpec::same(cin, 2, 3), k, temp, &mut init::rng(seed)).unwrap();
        p.bn_beta = rand_t(vec![k], seed ^ 3).scale(5.0);
        let x = rand_t(vec![b, cin, f, t], seed ^ 1).scale(10.0);
        let pi = FdyConv { params: p }.attention(&x).unwrap();
        for bi in 0..b {
            for fi in 0..f {
                let s: f64 = (0..k).map(|kk| pi.at(&[bi, kk, fi, 0])).sum();
                prop_assert!((s - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_basis_fdy_is_plain_conv((b, cin, f, t) in dims4(), seed: u64) {
        let p = FdyParams::<f64>::init(Conv2dSpec::same(cin, 2, 3), 1, 31.0, &mut init::rng(seed)).unwrap();
        let x = rand_t(vec![b, cin, f, t], seed ^ 1);
        let w = p.kernel(0);
        let bias = p.kernel_bias(0);
        prop_assert_eq!(fdy_forward(&x, &p).unwrap(), ops::conv2d(&x, &w, bias.as_ref(), &p.spec).unwrap());
    }

    #[test]
    fn frame_count_formula(len in 1usize..20_000) {
        let clip = AudioClip::new((0..len).map(|i| ((i % 97) as f32 / 97.0) - 0.5).collect());
        let mag = features::stft_magnitude::<f32>(&clip).unwrap();
        prop_assert_eq!(mag.dims(), &[1025, len / 256 + 1][..]);
        prop_assert!(mag.is_finite());
    }

    #[test]
    fn mel_scale_is_monotone_and_invertible(a in 0.0f64..8000.0, b in 0.0f64..8000.0) {
        prop_assume!(a < b);
        prop_assert!(hz_to_mel(a) < hz_to_mel(b));
        prop_assert!((mel_to_hz(hz_to_mel(a)) - a).abs() < 1e-8 * a.max(1.0));
    }

    #[test]
    fn mixup_stays_inside_the_input_envelope(lambda in 0.0f64..=1.0, seed: u64) {
        let (x1, x2) = (rand_t(vec![2, 3, 4], seed), rand_t(vec![2, 3, 4], seed ^ 1));
        let (y1, y2) = (rand_t(vec![5], seed ^ 2), rand_t(vec![5], seed ^ 3));
        let (x, y) = mixup(&x1, &x2, &y1, &y2, lambda).unwrap();
        for (out, (a, b)) in [(x, (x1, x2)), (y, (y1, y2))] {
            for i in 0..out.len() {
                let (lo, hi) = (a.data()[i].min(b.data()[i]), a.data()[i].max(b.data()[i]));
                prop_assert!(out.data()[i] >= lo - 1e-15 && out.data()[i] <= hi + 1e-15);
            }
        }
    }

    #[test]
    fn filter_augment_keeps_sign_and_finiteness((b, c, f, t) in (1usize..=3, 1usize..=2, 6usize..=20, 1usize..=5), seed: u64, scale in 1e-3f64..1e30) {
        let x = rand_t(vec![b, c, f, t], seed).scale(scale);
        let cfg = AugmentConfig::default();
        let y = filter_augment(&x, seed, &cfg).unwrap();
        prop_assert!(y.is_finite());
        let (glo, ghi) = (10f64.powf(cfg.filter_db.0 / 20.0), 10f64.powf(cfg.filter_db.1 / 20.0));
        for (a, o) in x.data().iter().zip(y.data()) {
            prop_assert!(a.signum() == o.signum() || *a == 0.0);
            let g = o / a;
            prop_assert!(g >= glo - 1e-12 && g <= ghi + 1e-12);
        }
        prop_assert_eq!(filter_augment(&x, seed, &cfg).unwrap(), y);
    }

    #[test]
    fn frame_shift_is_undone_by_the_opposite_shift(t in 1usize..30, shift in -100i64..100, seed: u64) {
        let x = rand_t(vec![2, 1, 3, t], seed);
        let y = rand_t(vec![2, t, 4], seed ^ 1);
        let (xs, ys) = frame_shift(&x, &y, shift).unwrap();
        let (xb, yb) = frame_shift(&xs, &ys, -shift).unwrap();
        prop_assert_eq!(xb, x);
        prop_assert_eq!(yb, y);
    }

    #[test]
    fn median_three_fixes_binary_runs_of_two_or_more(runs in prop::collection::vec((any::<bool>(), 2usize..6), 1..8), edge_head in 0usize..2) {
        // Runs of length ≥ 2 (single-frame runs only at the edges) are roots.
        let mut seq = Vec::new();
        let mut bit = runs[0].0;
        if edge_head == 1 {
            seq.push(!bit);
        }
        for &(_, len) in &runs {
            seq.extend(std::iter::repeat(bit).take(len));
            bit = !bit;
        }
        let x = Tensor::from_fn(vec![seq.len(), 1], |i| if seq[i] { 1.0f64 } else { 0.0 });
        let once = median_filter(&x, &[3]).unwrap();
        prop_assert_eq!(&once, &x);
    }

    #[test]
    fn median_three_reaches_a_fixed_point(bits in prop::collection::vec(any::<bool>(), 1..40)) {
        let mut x = Tensor::from_fn(vec![bits.len(), 1], |i| if bits[i] { 1.0f64 } else { 0.0 });
        for _ in 0..bits.len() {
            let next = median_filter(&x, &[3]).unwrap();
            if next == x {
                break;
            }
            x = next;
        }
        prop_assert_eq!(median_filter(&x, &[3]).unwrap(), x);
    }

    #[test]
    fn decoded_events_nest_across_thresholds(t in 1usize..60, seed: u64, lo in 0.05f64..0.9, gap in 0.01f64..0.5) {
        let hi = (lo + gap).min(0.99);
        prop_assume!(hi > lo);
        let p = rand_t(vec![t, 3], seed).map(|v| 0.5 + 0.5 * v);
        let strict = decode_events(&p, hi, 0.1, "c", t as f64 * 0.1).unwrap();
        let loose = decode_events(&p, lo, 0.1, "c", t as f64 * 0.1).unwrap();
        for e in &strict.events {
            prop_assert!(loose.events.iter().any(|o| o.class == e.class && o.onset <= e.onset && o.offset >= e.offset));
        }
    }
}

const FD: f64 = 0.064;
const T: usize = 100;

/// One event per class per clip on the frame grid; `(class, start, len)`.
fn frame_events() -> impl Strategy<Value = Vec<Vec<(usize, usize, usize)>>> {
    let clip = subsequence((0..4usize).collect::<Vec<_>>(), 1..=4)
        .prop_flat_map(|classes| {
            let n = classes.len();
            (Just(classes), prop::collection::vec((0usize..80, 3usize..20), n))
        })
        .prop_map(|(classes, spans)| classes.into_iter().zip(spans).map(|(c, (s, l))| (c, s, l)).collect::<Vec<_>>());
    prop::collection::vec(clip, 2..=3)
}

fn to_lists(clips: &[Vec<(usize, usize, usize)>]) -> Vec<EventList> {
    clips
        .iter()
        .enumerate()
        .map(|(i, evs)| {
            let events = evs
                .iter()
                .map(|&(c, s, l)| Event { class: c, onset: s as f64 * FD, offset: ((s + l).min(T)) as f64 * FD })
                .collect();
            EventList::new(format!("clip{i}"), T as f64 * FD, events).unwrap()
        })
        .collect()
}

fn relabel(lists: &[EventList], perm: &[usize]) -> Vec<EventList> {
    lists
        .iter()
        .map(|l| {
            let ev = l.events.iter().map(|e| Event { class: perm[e.class], ..*e }).collect();
            EventList::new(l.clip_id.clone(), l.duration, ev).unwrap()
        })
        .collect()
}

fn noisy(lists: &[EventList], seed: u64) -> Vec<(EventList, T64)> {
    lists
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut p = rand_t(vec![T, 10], seed + i as u64).map(|v| 0.3 + 0.3 * v);
            for e in &l.events {
                for t in (e.onset / FD).round() as usize..(e.offset / FD).round() as usize {
                    p.set(&[t, e.class], (p.at(&[t, e.class]) + 0.4).min(0.99));
                }
            }
            (l.clone(), p)
        })
        .collect()
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn metrics_ignore_clip_order_and_class_names(clips in frame_events(), seed: u64, shift in 1usize..10) {
        let refs = to_lists(&clips);
        let data = noisy(&refs, seed);
        let est: Vec<EventList> = data.iter().map(|(r, p)| decode_events(p, 0.5, FD, &r.clip_id, r.duration).unwrap()).collect();
        let cfg = PsdsConfig::scenario2(10);
        let f1 = collar_f1(&refs, &est, 0.2).unwrap().macro_f1;
        let score = psds(&data, FD, &cfg).unwrap().score;

        let mut rev = data.clone();
        rev.reverse();
        let rev_refs: Vec<EventList> = rev.iter().map(|(r, _)| r.clone()).collect();
        let mut rev_est = est.clone();
        rev_est.reverse();
        prop_assert_eq!(collar_f1(&rev_refs, &rev_est, 0.2).unwrap().macro_f1, f1);
        prop_assert!((psds(&rev, FD, &cfg).unwrap().score - score).abs() < 1e-12);

        let perm: Vec<usize> = (0..10).map(|c| (c + shift) % 10).collect();
        let moved: Vec<(EventList, T64)> = data
            .iter()
            .map(|(r, p)| {
                let mut q = p.clone();
                for t in 0..T {
                    for c in 0..10 {
                        q.set(&[t, perm[c]], p.at(&[t, c]));
                    }
                }
                (relabel(std::slice::from_ref(r), &perm).remove(0), q)
            })
            .collect();
        let f1_moved = collar_f1(&relabel(&refs, &perm), &relabel(&est, &perm), 0.2).unwrap().macro_f1;
        prop_assert!((f1_moved.unwrap() - f1.unwrap()).abs() < 1e-12);
        prop_assert!((psds(&moved, FD, &cfg).unwrap().score - score).abs() < 1e-12);
    }

    #[test]
    fn psds_grows_when_event_frames_are_raised(clips in frame_events(), seed: u64, boost in 0.0f64..1.0) {
        // Frames outside every reference stay below the lowest threshold, so
        // raising probabilities inside references can only add coverage.
        let refs = to_lists(&clips);
        let base: Vec<(EventList, T64)> = refs
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let u = rand_t(vec![T, 10], seed + i as u64).map(|v| 0.5 + 0.5 * v);
                let mut p = Tensor::zeros(vec![T, 10]);
                for e in &l.events {
                    for t in (e.onset / FD).round() as usize..(e.offset / FD).round() as usize {
                        p.set(&[t, e.class], u.at(&[t, e.class]));
                    }
                }
                (l.clone(), p)
            })
            .collect();
        let raised: Vec<(EventList, T64)> = base
            .iter()
            .map(|(l, p)| (l.clone(), p.map(|v| if v > 0.0 { v + boost * (0.999 - v) } else { 0.0 })))
            .collect();
        for cfg in [PsdsConfig::scenario1(20), PsdsConfig::scenario2(20)] {
            let before = psds(&base, FD, &cfg).unwrap().score;
            let after = psds(&raised, FD, &cfg).unwrap().score;
            prop_assert!(after >= before - 1e-12, "{before} -> {after}");
        }
    }
}

proptest! {
    #![proptest_config(cases(6))]

    #[test]
    fn analytic_gradients_match_finite_differences(seed: u64, which in 0usize..12) {
        let target = if which < 6 { CheckTarget::OPS[which] } else { CheckTarget::ATTENTION[which - 6] };
        let report = run_suite(target, seed, 1).unwrap();
        prop_assert!(report.passed(TOLERANCE), "{} max error {:e}", target.name(), report.max_error());
    }
}

#[test]
fn mel_projection_is_monotone_in_power() {
    let mut rng = init::rng(3);
    let a: T64 = Tensor::random_uniform(vec![1025, 4], 0.0, 2.0, &mut rng);
    let bump: T64 = Tensor::random_uniform(vec![1025, 4], 0.0, 0.5, &mut rng);
    let b = a.add(&bump).unwrap();
    let (ma, mb) = (mel_project(&a).unwrap(), mel_project(&b).unwrap());
    assert!(ma.data().iter().zip(mb.data()).all(|(x, y)| x <= y));
}

#[test]
fn alternating_bits_are_not_a_median_three_root() {
    // 01010 → 00100 → 00000: one pass is not always idempotent on binary input.
    let x = Tensor::new(vec![5, 1], vec![0.0f64, 1.0, 0.0, 1.0, 0.0]).unwrap();
    let once = median_filter(&x, &[3]).unwrap();
    assert_eq!(once.data(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    assert_ne!(median_filter(&once, &[3]).unwrap(), once);
}
