//! Straight-loop reference implementations, written against the public data
//! layout only. Nothing here calls library numerics.
#![allow(dead_code)]

use freqatt::attention::{AttentionModule, ExcitationParams, FdyParams, SqueezeMode};
use freqatt::init;
use freqatt::layer::{Conv2d, Linear};
use freqatt::metrics::{Event, EventList, PsdsConfig};
use freqatt::model::{BlockConv, GruCell, ModelParams, CLASSES};
use freqatt::Tensor;

pub type T64 = Tensor<f64>;

pub fn rand_t(dims: Vec<usize>, seed: u64) -> T64 {
    Tensor::random_uniform(dims, -1.0, 1.0, &mut init::rng(seed))
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn d4(t: &T64) -> (usize, usize, usize, usize) {
    let d = t.dims();
    (d[0], d[1], d[2], d[3])
}

/// Zero-padded cross-correlation, one output element at a time.
pub fn conv(x: &T64, w: &T64, b: Option<&T64>, stride: (usize, usize), pad: (usize, usize)) -> T64 {
    let (bn, cin, fi, ti) = d4(x);
    let (cout, _, kh, kw) = d4(w);
    let fo = (fi + 2 * pad.0 - kh) / stride.0 + 1;
    let to = (ti + 2 * pad.1 - kw) / stride.1 + 1;
    let mut y = Tensor::zeros(vec![bn, cout, fo, to]);
    for n in 0..bn {
        for o in 0..cout {
            for f in 0..fo {
                for t in 0..to {
                    let mut acc = b.map_or(0.0, |b| b.data()[o]);
                    for c in 0..cin {
                        for i in 0..kh {
                            for j in 0..kw {
                                let ff = (f * stride.0 + i) as isize - pad.0 as isize;
                                let tt = (t * stride.1 + j) as isize - pad.1 as isize;
                                if ff >= 0 && tt >= 0 && (ff as usize) < fi && (tt as usize) < ti {
                                    acc += w.at(&[o, c, i, j]) * x.at(&[n, c, ff as usize, tt as usize]);
                                }
                            }
                        }
                    }
                    y.set(&[n, o, f, t], acc);
                }
            }
        }
    }
    y
}

pub fn conv_layer(x: &T64, c: &Conv2d<f64>) -> T64 {
    conv(x, &c.weight, c.bias.as_ref(), c.spec.stride, c.spec.padding)
}

/// `y[.., o] = Σ_i w[o, i]·x[.., i] + b[o]`.
pub fn linear(x: &T64, w: &T64, b: Option<&T64>) -> T64 {
    let din = *x.dims().last().unwrap();
    let dout = w.dims()[0];
    let rows = x.len() / din;
    let mut out = Vec::with_capacity(rows * dout);
    for r in 0..rows {
        for o in 0..dout {
            let mut acc = b.map_or(0.0, |b| b.data()[o]);
            for i in 0..din {
                acc += w.at(&[o, i]) * x.data()[r * din + i];
            }
            out.push(acc);
        }
    }
    let mut dims = x.dims().to_vec();
    *dims.last_mut().unwrap() = dout;
    Tensor::new(dims, out).unwrap()
}

pub fn avg_pool(x: &T64, pf: usize, pt: usize) -> T64 {
    let (bn, c, f, t) = d4(x);
    let (fo, to) = (f / pf, t / pt);
    let mut y = Tensor::zeros(vec![bn, c, fo, to]);
    for n in 0..bn {
        for ch in 0..c {
            for i in 0..fo {
                for j in 0..to {
                    let mut s = 0.0;
                    for a in 0..pf {
                        for b in 0..pt {
                            s += x.at(&[n, ch, i * pf + a, j * pt + b]);
                        }
                    }
                    y.set(&[n, ch, i, j], s / (pf * pt) as f64);
                }
            }
        }
    }
    y
}

/// `σ(W₂ relu(W₁ z))`.
pub fn excitation(z: &[f64], w1: &T64, w2: &T64) -> Vec<f64> {
    let (h, d) = (w1.dims()[0], w1.dims()[1]);
    let hidden: Vec<f64> = (0..h).map(|i| relu((0..d).map(|j| w1.at(&[i, j]) * z[j]).sum())).collect();
    (0..d).map(|i| sigmoid((0..h).map(|j| w2.at(&[i, j]) * hidden[j]).sum())).collect()
}

pub fn se(x: &T64, p: &ExcitationParams<f64>) -> T64 {
    let (bn, c, f, t) = d4(x);
    let mut y = x.clone();
    for n in 0..bn {
        let mut z = vec![0.0; c];
        for ch in 0..c {
            for i in 0..f {
                for j in 0..t {
                    z[ch] += x.at(&[n, ch, i, j]);
                }
            }
            z[ch] /= (f * t) as f64;
        }
        let s = excitation(&z, &p.w1, &p.w2);
        for ch in 0..c {
            for i in 0..f {
                for j in 0..t {
                    y.set(&[n, ch, i, j], s[ch] * x.at(&[n, ch, i, j]));
                }
            }
        }
    }
    y
}

pub fn tse(x: &T64, p: &ExcitationParams<f64>) -> T64 {
    let (bn, c, f, t) = d4(x);
    let mut y = x.clone();
    for n in 0..bn {
        for j in 0..t {
            let z: Vec<f64> = (0..c).map(|ch| (0..f).map(|i| x.at(&[n, ch, i, j])).sum::<f64>() / f as f64).collect();
            let s = excitation(&z, &p.w1, &p.w2);
            for ch in 0..c {
                for i in 0..f {
                    y.set(&[n, ch, i, j], s[ch] * x.at(&[n, ch, i, j]));
                }
            }
        }
    }
    y
}

pub fn fwse(x: &T64, p: &ExcitationParams<f64>) -> T64 {
    let (bn, c, f, t) = d4(x);
    let mut y = x.clone();
    for n in 0..bn {
        let mut z = vec![0.0; f];
        for (i, zi) in z.iter_mut().enumerate() {
            for ch in 0..c {
                for j in 0..t {
                    *zi += x.at(&[n, ch, i, j]);
                }
            }
            *zi /= (c * t) as f64;
        }
        let s = excitation(&z, &p.w1, &p.w2);
        for ch in 0..c {
            for i in 0..f {
                for j in 0..t {
                    y.set(&[n, ch, i, j], s[i] * x.at(&[n, ch, i, j]));
                }
            }
        }
    }
    y
}

pub fn tfwse(x: &T64, p: &ExcitationParams<f64>) -> T64 {
    let (bn, c, f, t) = d4(x);
    let mut y = x.clone();
    for n in 0..bn {
        for j in 0..t {
            let z: Vec<f64> = (0..f).map(|i| (0..c).map(|ch| x.at(&[n, ch, i, j])).sum::<f64>() / c as f64).collect();
            let s = excitation(&z, &p.w1, &p.w2);
            for ch in 0..c {
                for i in 0..f {
                    y.set(&[n, ch, i, j], s[i] * x.at(&[n, ch, i, j]));
                }
            }
        }
    }
    y
}

pub fn excite(mode: SqueezeMode, x: &T64, p: &ExcitationParams<f64>) -> T64 {
    match mode {
        SqueezeMode::Channel => se(x, p),
        SqueezeMode::ChannelPerFrame => tse(x, p),
        SqueezeMode::Frequency => fwse(x, p),
        SqueezeMode::FrequencyPerFrame => tfwse(x, p),
    }
}

/// Time-mean map as a one-channel `C × F` image, two same-padded convs,
/// ReLU between, sigmoid after, broadcast over time.
pub fn c2datt(x: &T64, conv1: &Conv2d<f64>, conv2: &Conv2d<f64>) -> T64 {
    let (bn, c, f, t) = d4(x);
    let mut y = x.clone();
    for n in 0..bn {
        let mut m = Tensor::zeros(vec![1, 1, c, f]);
        for ch in 0..c {
            for i in 0..f {
                m.set(&[0, 0, ch, i], (0..t).map(|j| x.at(&[n, ch, i, j])).sum::<f64>() / t as f64);
            }
        }
        let k = conv1.spec.kernel_h;
        let h = conv(&m, &conv1.weight, conv1.bias.as_ref(), (1, 1), (k / 2, k / 2)).map(relu);
        let s = conv(&h, &conv2.weight, conv2.bias.as_ref(), (1, 1), (k / 2, k / 2)).map(sigmoid);
        for ch in 0..c {
            for i in 0..f {
                for j in 0..t {
                    y.set(&[n, ch, i, j], s.at(&[0, 0, ch, i]) * x.at(&[n, ch, i, j]));
                }
            }
        }
    }
    y
}

/// Softmax weights `π[b][k][f]` of the FDY branch.
pub fn fdy_weights(x: &T64, p: &FdyParams<f64>) -> Vec<Vec<Vec<f64>>> {
    let (bn, cin, f, t) = d4(x);
    let kk = p.basis_weight.dims()[0];
    let tau = p.temperature;
    (0..bn)
        .map(|n| {
            let mean = |c: usize, i: isize| -> f64 {
                if i < 0 || i as usize >= f {
                    0.0
                } else {
                    (0..t).map(|j| x.at(&[n, c, i as usize, j])).sum::<f64>() / t as f64
                }
            };
            let logits: Vec<Vec<f64>> = (0..kk)
                .map(|k| {
                    (0..f)
                        .map(|i| {
                            let mut a = 0.0;
                            for c in 0..cin {
                                for d in 0..3 {
                                    a += p.branch_weight.at(&[k, c, d]) * mean(c, i as isize + d as isize - 1);
                                }
                            }
                            let norm = (a - p.bn_mean.data()[k]) / (p.bn_var.data()[k] + 1e-5).sqrt();
                            norm * p.bn_gamma.data()[k] + p.bn_beta.data()[k]
                        })
                        .collect()
                })
                .collect();
            let mut pi = vec![vec![0.0; f]; kk];
            for i in 0..f {
                let mx = (0..kk).map(|k| logits[k][i] / tau).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = (0..kk).map(|k| (logits[k][i] / tau - mx).exp()).sum();
                for k in 0..kk {
                    pi[k][i] = (logits[k][i] / tau - mx).exp() / z;
                }
            }
            pi
        })
        .collect()
}

/// Assembles `Σₖ π[k, f]·Wₖ` for each output row and convolves that row alone.
pub fn fdy(x: &T64, p: &FdyParams<f64>) -> T64 {
    let (bn, cin, f, t) = d4(x);
    let s = &p.spec;
    let kk = p.basis_weight.dims()[0];
    let pi = fdy_weights(x, p);
    let to = (t + 2 * s.padding.1 - s.kernel_w) / s.stride.1 + 1;
    let mut y = Tensor::zeros(vec![bn, s.out_channels, f, to]);
    for n in 0..bn {
        let xn = Tensor::new(vec![1, cin, f, t], x.data()[n * cin * f * t..][..cin * f * t].to_vec()).unwrap();
        for row in 0..f {
            let mut w = Tensor::zeros(vec![s.out_channels, cin, s.kernel_h, s.kernel_w]);
            let mut b = Tensor::zeros(vec![s.out_channels]);
            for k in 0..kk {
                let wk = p.basis_weight.data()[k * w.len()..][..w.len()].to_vec();
                for (dst, v) in w.data_mut().iter_mut().zip(wk) {
                    *dst += pi[n][k][row] * v;
                }
                if let Some(bb) = &p.basis_bias {
                    for o in 0..s.out_channels {
                        b.data_mut()[o] += pi[n][k][row] * bb.at(&[k, o]);
                    }
                }
            }
            let full = conv(&xn, &w, p.basis_bias.as_ref().map(|_| &b), s.stride, s.padding);
            for o in 0..s.out_channels {
                for j in 0..to {
                    y.set(&[n, o, row, j], full.at(&[0, o, row, j]));
                }
            }
        }
    }
    y
}

pub fn attention_module(x: &T64, m: &AttentionModule<f64>) -> T64 {
    match m {
        AttentionModule::Excite(e) => excite(e.mode, x, &e.params),
        AttentionModule::C2d(c) => c2datt(x, &c.params.conv1, &c.params.conv2),
    }
}

/// One GRU step with `[r, z, n]` gate rows.
pub fn gru_step(cell: &GruCell<f64>, x: &[f64], h: &[f64]) -> Vec<f64> {
    let hd = h.len();
    let row = |w: &T64, b: &T64, v: &[f64], r: usize| -> f64 {
        b.data()[r] + (0..v.len()).map(|j| w.at(&[r, j]) * v[j]).sum::<f64>()
    };
    (0..hd)
        .map(|j| {
            let r = sigmoid(row(&cell.w_ih, &cell.b_ih, x, j) + row(&cell.w_hh, &cell.b_hh, h, j));
            let z = sigmoid(row(&cell.w_ih, &cell.b_ih, x, hd + j) + row(&cell.w_hh, &cell.b_hh, h, hd + j));
            let n = (row(&cell.w_ih, &cell.b_ih, x, 2 * hd + j) + r * row(&cell.w_hh, &cell.b_hh, h, 2 * hd + j)).tanh();
            (1.0 - z) * n + z * h[j]
        })
        .collect()
}

/// `seq[t][i]` through a bidirectional stack.
pub fn bigru(model: &freqatt::model::BiGru<f64>, seq: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut cur = seq;
    for layer in &model.layers {
        let hd = layer.forward.w_hh.dims()[1];
        let tn = cur.len();
        let mut fwd = vec![vec![0.0; hd]; tn];
        let mut h = vec![0.0; hd];
        for t in 0..tn {
            h = gru_step(&layer.forward, &cur[t], &h);
            fwd[t] = h.clone();
        }
        let mut bwd = vec![vec![0.0; hd]; tn];
        let mut h = vec![0.0; hd];
        for t in (0..tn).rev() {
            h = gru_step(&layer.backward, &cur[t], &h);
            bwd[t] = h.clone();
        }
        cur = (0..tn).map(|t| fwd[t].iter().chain(&bwd[t]).copied().collect()).collect();
    }
    cur
}

/// Whole-model forward for one `[1, 1, F, T]` example: `(strong[t][k], weak[k])`.
pub fn model_forward(m: &ModelParams<f64>, mel: &T64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut x = mel.clone();
    for block in &m.blocks {
        x = match &block.conv {
            BlockConv::Plain(c) => conv_layer(&x, c),
            BlockConv::Fdy(f) => fdy(&x, &f.params),
        };
        let (_, c, f, t) = d4(&x);
        for ch in 0..c {
            let bn = &block.bn;
            let scale = bn.gamma.data()[ch] / (bn.running_var.data()[ch] + 1e-5).sqrt();
            for i in 0..f {
                for j in 0..t {
                    let v = x.at(&[0, ch, i, j]);
                    x.set(&[0, ch, i, j], (v - bn.running_mean.data()[ch]) * scale + bn.beta.data()[ch]);
                }
            }
        }
        x = match &block.gate {
            None => x.map(relu),
            Some(Linear { weight, bias }) => {
                let mut y = x.clone();
                for i in 0..f {
                    for j in 0..t {
                        for o in 0..c {
                            let mut a = bias.as_ref().map_or(0.0, |b| b.data()[o]);
                            for ci in 0..c {
                                a += weight.at(&[o, ci]) * x.at(&[0, ci, i, j]);
                            }
                            y.set(&[0, o, i, j], x.at(&[0, o, i, j]) * sigmoid(a));
                        }
                    }
                }
                y
            }
        };
        for module in &block.attention.modules {
            x = attention_module(&x, module);
        }
        x = avg_pool(&x, block.pool.0, block.pool.1);
    }
    let (_, c, f, t) = d4(&x);
    let seq: Vec<Vec<f64>> = (0..t)
        .map(|j| {
            let mut v = Vec::with_capacity(c * f);
            for ch in 0..c {
                for i in 0..f {
                    v.push(x.at(&[0, ch, i, j]));
                }
            }
            v
        })
        .collect();
    let h = bigru(&m.gru, seq);
    let head = |lin: &Linear<f64>, v: &[f64]| -> Vec<f64> {
        let w = &lin.weight;
        (0..w.dims()[0])
            .map(|o| lin.bias.as_ref().unwrap().data()[o] + (0..v.len()).map(|i| w.at(&[o, i]) * v[i]).sum::<f64>())
            .collect()
    };
    let strong: Vec<Vec<f64>> = h.iter().map(|v| head(&m.strong, v).into_iter().map(sigmoid).collect()).collect();
    let logits: Vec<Vec<f64>> = h.iter().map(|v| head(&m.weak, v)).collect();
    let k = strong[0].len();
    let weak = (0..k)
        .map(|c| {
            let mx = logits.iter().map(|l| l[c]).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l[c] - mx).exp()).sum();
            (0..strong.len()).map(|t| (logits[t][c] - mx).exp() / z * strong[t][c]).sum()
        })
        .collect();
    (strong, weak)
}

/// Direct DFT magnitude of one centered, reflect-padded, Hamming-windowed frame.
pub fn dft_frame(samples: &[f32], frame: usize, n_fft: usize, hop: usize, bin: usize) -> f64 {
    let n = samples.len() as isize;
    let reflect = |mut i: isize| -> f64 {
        loop {
            if i < 0 {
                i = -i;
            } else if i >= n {
                i = 2 * (n - 1) - i;
            } else {
                return samples[i as usize] as f64;
            }
        }
    };
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..n_fft {
        let w = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / n_fft as f64).cos();
        let v = w * reflect((frame * hop + k) as isize - (n_fft / 2) as isize);
        let ang = -2.0 * std::f64::consts::PI * (bin * k) as f64 / n_fft as f64;
        re += v * ang.cos();
        im += v * ang.sin();
    }
    (re * re + im * im).sqrt()
}

/// Independent PSDS: own decoding, own matching, exact staircase area.
pub fn brute_psds(data: &[(EventList, T64)], frame_dur: f64, cfg: &PsdsConfig) -> f64 {
    let k = CLASSES.len();
    let refs: Vec<&EventList> = data.iter().map(|(r, _)| r).collect();
    let count = |c: usize| refs.iter().flat_map(|r| &r.events).filter(|e| e.class == c).count();
    let ref_hours = |c: usize| refs.iter().flat_map(|r| &r.events).filter(|e| e.class == c).map(|e| e.offset - e.onset).sum::<f64>() / 3600.0;
    let hours = refs.iter().map(|r| r.duration).sum::<f64>() / 3600.0;
    let classes: Vec<usize> = (0..k).filter(|&c| count(c) > 0).collect();
    let ov = |a: &Event, b: &Event| (a.offset.min(b.offset) - a.onset.max(b.onset)).max(0.0);
    let mut curves: Vec<Vec<(f64, f64)>> = vec![Vec::new(); classes.len()];
    for &thr in &cfg.thresholds {
        let mut tp = vec![0usize; k];
        let mut fp = vec![0usize; k];
        let mut ct = vec![vec![0usize; k]; k];
        for (r, p) in data {
            let (t_len, _) = (p.dims()[0], p.dims()[1]);
            let mut dets = Vec::new();
            for c in 0..k {
                let mut start = None;
                for t in 0..=t_len {
                    let on = t < t_len && p.at(&[t, c]) >= thr;
                    match (on, start) {
                        (true, None) => start = Some(t),
                        (false, Some(s)) => {
                            dets.push(ev(c, s as f64 * frame_dur, (t as f64 * frame_dur).min(r.duration)));
                            start = None;
                        }
                        _ => {}
                    }
                }
            }
            let mut good = Vec::new();
            for d in &dets {
                let len = d.offset - d.onset;
                let same: f64 = r.events.iter().filter(|g| g.class == d.class).map(|g| ov(d, g)).sum();
                if same / len >= cfg.dtc {
                    good.push(*d);
                } else {
                    fp[d.class] += 1;
                    for o in 0..k {
                        let other: f64 = r.events.iter().filter(|g| g.class == o).map(|g| ov(d, g)).sum();
                        if o != d.class && other / len >= cfg.cttc {
                            ct[d.class][o] += 1;
                        }
                    }
                }
            }
            for g in &r.events {
                let cov: f64 = good.iter().filter(|d| d.class == g.class).map(|d| ov(d, g)).sum();
                if cov / (g.offset - g.onset) >= cfg.gtc {
                    tp[g.class] += 1;
                }
            }
        }
        for (ci, &c) in classes.iter().enumerate() {
            let others: Vec<usize> = classes.iter().copied().filter(|&o| o != c).collect();
            let ctr = if others.is_empty() {
                0.0
            } else {
                others.iter().map(|&o| ct[c][o] as f64 / ref_hours(o)).sum::<f64>() / others.len() as f64
            };
            curves[ci].push((fp[c] as f64 / hours + cfg.alpha_ct * ctr, tp[c] as f64 / count(c) as f64));
        }
    }
    // Each class curve as a right-continuous staircase of the running max.
    let value_at = |curve: &Vec<(f64, f64)>, e: f64| curve.iter().filter(|p| p.0 <= e).map(|p| p.1).fold(0.0, f64::max);
    let mut xs: Vec<f64> = curves.iter().flatten().map(|p| p.0).filter(|&e| e > 0.0 && e < cfg.e_max).collect();
    xs.extend([0.0, cfg.e_max]);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut area = 0.0;
    for w in xs.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let v: Vec<f64> = curves.iter().map(|c| value_at(c, mid)).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        area += (mean - cfg.alpha_st * std).max(0.0) * (w[1] - w[0]);
    }
    area / cfg.e_max
}

pub fn ev(class: usize, onset: f64, offset: f64) -> Event {
    Event { class, onset, offset }
}

/// Three clips with a few events each, for end-to-end PSDS comparisons.
pub fn three_clip_events() -> Vec<Vec<Event>> {
    vec![
        vec![ev(0, 0.64, 2.56), ev(3, 4.0, 6.4)],
        vec![ev(0, 1.28, 1.92), ev(5, 3.2, 9.6)],
        vec![ev(3, 0.0, 1.6), ev(5, 2.0, 3.0), ev(0, 7.04, 8.32)],
    ]
}

/// `[156, 10]` noise around 0.25 with reference frames raised by 0.5.
pub fn noisy_probs(events: &[Event], fd: f64, seed: u64) -> T64 {
    let mut p = rand_t(vec![156, 10], seed).map(|v| 0.25 + 0.2 * v);
    for e in events {
        for t in (e.onset / fd).floor() as usize..((e.offset / fd).ceil() as usize).min(156) {
            let v = p.at(&[t, e.class]) + 0.5;
            p.set(&[t, e.class], v.min(0.999));
        }
    }
    p
}
