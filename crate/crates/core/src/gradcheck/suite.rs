//! Seeded gradient-check suites over random small instances.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{check_layer, LayerCheck, DEFAULT_EPS};
use crate::attention::{C2dAtt, C2dAttParams, ExcitationParams, FdyConv, FdyParams, SqueezeExcite, SqueezeMode};
use crate::error::{Error, Result};
use crate::init::{rng, ParamRng};
use crate::layer::{Activation, AvgPool2d, Conv2d, Linear};
use crate::ops::Conv2dSpec;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckTarget {
    Conv2d,
    Linear,
    Relu,
    Sigmoid,
    Softmax,
    AvgPool,
    Se,
    Tse,
    FwSe,
    TfwSe,
    C2dAtt,
    Fdy { basis: usize },
}

impl CheckTarget {
    pub const OPS: [CheckTarget; 6] = [
        CheckTarget::Conv2d,
        CheckTarget::Linear,
        CheckTarget::Relu,
        CheckTarget::Sigmoid,
        CheckTarget::Softmax,
        CheckTarget::AvgPool,
    ];

    pub const ATTENTION: [CheckTarget; 6] = [
        CheckTarget::Se,
        CheckTarget::Tse,
        CheckTarget::FwSe,
        CheckTarget::TfwSe,
        CheckTarget::C2dAtt,
        CheckTarget::Fdy { basis: crate::attention::defaults::FDY_BASIS },
    ];

    /// The suites covering a model variant's trainable blocks.
    pub fn for_variant(variant: crate::attention::Variant) -> Vec<CheckTarget> {
        use crate::attention::{Stage, SqueezeMode, Variant};
        if variant == Variant::Baseline {
            return vec![CheckTarget::Conv2d];
        }
        if variant == Variant::Fdy {
            return vec![CheckTarget::Fdy { basis: crate::attention::defaults::FDY_BASIS }];
        }
        variant
            .stages()
            .iter()
            .map(|s| match s {
                Stage::Excite(SqueezeMode::Channel) => CheckTarget::Se,
                Stage::Excite(SqueezeMode::ChannelPerFrame) => CheckTarget::Tse,
                Stage::Excite(SqueezeMode::Frequency) => CheckTarget::FwSe,
                Stage::Excite(SqueezeMode::FrequencyPerFrame) => CheckTarget::TfwSe,
                Stage::C2dAtt => CheckTarget::C2dAtt,
            })
            .collect()
    }

    pub fn name(&self) -> String {
        match self {
            CheckTarget::Conv2d => "conv2d".into(),
            CheckTarget::Linear => "linear".into(),
            CheckTarget::Relu => "relu".into(),
            CheckTarget::Sigmoid => "sigmoid".into(),
            CheckTarget::Softmax => "softmax".into(),
            CheckTarget::AvgPool => "avgpool".into(),
            CheckTarget::Se => "se".into(),
            CheckTarget::Tse => "tse".into(),
            CheckTarget::FwSe => "fwse".into(),
            CheckTarget::TfwSe => "tfwse".into(),
            CheckTarget::C2dAtt => "c2datt".into(),
            CheckTarget::Fdy { basis } => format!("fdy(K={basis})"),
        }
    }
}

impl fmt::Display for CheckTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for CheckTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "conv" | "conv2d" => CheckTarget::Conv2d,
            "linear" | "fc" => CheckTarget::Linear,
            "relu" => CheckTarget::Relu,
            "sigmoid" => CheckTarget::Sigmoid,
            "softmax" => CheckTarget::Softmax,
            "pool" | "avgpool" => CheckTarget::AvgPool,
            "se" => CheckTarget::Se,
            "tse" => CheckTarget::Tse,
            "fwse" => CheckTarget::FwSe,
            "tfwse" => CheckTarget::TfwSe,
            "c2datt" | "c2d" => CheckTarget::C2dAtt,
            "fdy" => CheckTarget::Fdy { basis: crate::attention::defaults::FDY_BASIS },
            other => return Err(Error::invalid(format!("unknown gradient-check target {other:?}"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub target: CheckTarget,
    pub seed: u64,
    /// Worst relative error of each instance.
    pub instance_errors: Vec<f64>,
    /// Worst relative error per tensor name across instances.
    pub tensor_errors: Vec<(String, f64)>,
}

impl SuiteReport {
    pub fn max_error(&self) -> f64 {
        self.instance_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_error() < tolerance
    }
}

fn rand_tensor(dims: Vec<usize>, rng: &mut ParamRng) -> Tensor<f64> {
    Tensor::random_uniform(dims, -1.0, 1.0, rng)
}

fn divisor_of(n: usize, rng: &mut ParamRng) -> usize {
    let divs: Vec<usize> = (1..=n).filter(|d| n % d == 0).collect();
    *divs.choose(rng).expect("1 divides everything")
}

struct ConvDraw {
    x: Tensor<f64>,
    spec: Conv2dSpec,
    weight: Vec<f64>,
    bias: Vec<f64>,
    upstream: Tensor<f64>,
}

/// Shared by the plain-conv and FDY suites so that FDY with one basis kernel
/// sees exactly the plain-conv instance.
fn draw_conv(rng: &mut ParamRng, basis: usize) -> Result<ConvDraw> {
    let b = rng.gen_range(1..=2);
    let cin = rng.gen_range(1..=3);
    let cout = rng.gen_range(1..=3);
    let f = rng.gen_range(3..=6);
    let t = rng.gen_range(3..=6);
    let kernel = *[1usize, 3].choose(rng).expect("non-empty");
    let stride_t = rng.gen_range(1..=2);
    let spec = Conv2dSpec { stride: (1, stride_t), ..Conv2dSpec::same(cin, cout, kernel) };
    let x = rand_tensor(vec![b, cin, f, t], rng);
    let weight = (0..basis * spec.weight_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let bias = (0..basis * cout).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (fo, to) = spec.output_extents(f, t)?;
    let upstream = rand_tensor(vec![b, cout, fo, to], rng);
    Ok(ConvDraw { x, spec, weight, bias, upstream })
}

fn excite_instance(mode: SqueezeMode, rng: &mut ParamRng) -> Result<LayerCheck> {
    let b = rng.gen_range(1..=2);
    let c = rng.gen_range(1..=6);
    let f = rng.gen_range(1..=6);
    let t = rng.gen_range(1..=6);
    let dim = mode.dim(c, f);
    let r = divisor_of(dim, rng);
    let hidden = dim / r;
    let params = ExcitationParams::new(
        rand_tensor(vec![hidden, dim], rng),
        rand_tensor(vec![dim, hidden], rng),
        r,
    )?;
    let x = Tensor::random_uniform(vec![b, c, f, t], -2.0, 2.0, rng);
    let up = rand_tensor(vec![b, c, f, t], rng);
    check_layer(&SqueezeExcite::new(mode, params), &x, &up, DEFAULT_EPS)
}

fn run_instance(target: CheckTarget, rng: &mut ParamRng) -> Result<LayerCheck> {
    match target {
        CheckTarget::Conv2d => {
            let d = draw_conv(rng, 1)?;
            let layer = Conv2d {
                spec: d.spec,
                weight: Tensor::new(d.spec.weight_dims().to_vec(), d.weight)?,
                bias: Some(Tensor::new(vec![d.spec.out_channels], d.bias)?),
            };
            check_layer(&layer, &d.x, &d.upstream, DEFAULT_EPS)
        }
        CheckTarget::Fdy { basis } => {
            let d = draw_conv(rng, basis)?;
            let mut wdims = vec![basis];
            wdims.extend(d.spec.weight_dims());
            let branch = rand_tensor(vec![basis, d.spec.in_channels, 3], rng);
            let mut params = FdyParams::assemble(
                d.spec,
                Tensor::new(wdims, d.weight)?,
                Some(Tensor::new(vec![basis, d.spec.out_channels], d.bias)?),
                branch,
                rng.gen_range(0.5..2.0),
            )?;
            params.bn_gamma = Tensor::random_uniform(vec![basis], 0.5, 1.5, rng);
            params.bn_beta = rand_tensor(vec![basis], rng);
            params.bn_mean = Tensor::random_uniform(vec![basis], -0.2, 0.2, rng);
            params.bn_var = Tensor::random_uniform(vec![basis], 0.5, 1.5, rng);
            check_layer(&FdyConv { params }, &d.x, &d.upstream, DEFAULT_EPS)
        }
        CheckTarget::Linear => {
            let rows = vec![rng.gen_range(1..=3), rng.gen_range(1..=3)];
            let din = rng.gen_range(1..=6);
            let dout = rng.gen_range(1..=6);
            let layer = Linear {
                weight: rand_tensor(vec![dout, din], rng),
                bias: Some(rand_tensor(vec![dout], rng)),
            };
            let x = rand_tensor([rows.clone(), vec![din]].concat(), rng);
            let up = rand_tensor([rows, vec![dout]].concat(), rng);
            check_layer(&layer, &x, &up, DEFAULT_EPS)
        }
        CheckTarget::Relu | CheckTarget::Sigmoid | CheckTarget::Softmax => {
            let rank = rng.gen_range(1..=4);
            let dims: Vec<usize> = (0..rank).map(|_| rng.gen_range(1..=6)).collect();
            let layer = match target {
                CheckTarget::Relu => Activation::Relu,
                CheckTarget::Sigmoid => Activation::Sigmoid,
                _ => Activation::Softmax { axis: rng.gen_range(0..rank), temperature: rng.gen_range(0.5..2.0) },
            };
            let x = Tensor::random_uniform(dims.clone(), -3.0, 3.0, rng);
            let up = rand_tensor(dims, rng);
            check_layer(&layer, &x, &up, DEFAULT_EPS)
        }
        CheckTarget::AvgPool => {
            let pool = AvgPool2d { pool_f: rng.gen_range(1..=3), pool_t: rng.gen_range(1..=3) };
            let dims = vec![
                rng.gen_range(1..=2),
                rng.gen_range(1..=3),
                rng.gen_range(pool.pool_f..=6),
                rng.gen_range(pool.pool_t..=6),
            ];
            let x = rand_tensor(dims.clone(), rng);
            let up = rand_tensor(vec![dims[0], dims[1], dims[2] / pool.pool_f, dims[3] / pool.pool_t], rng);
            check_layer(&pool, &x, &up, DEFAULT_EPS)
        }
        CheckTarget::Se => excite_instance(SqueezeMode::Channel, rng),
        CheckTarget::Tse => excite_instance(SqueezeMode::ChannelPerFrame, rng),
        CheckTarget::FwSe => excite_instance(SqueezeMode::Frequency, rng),
        CheckTarget::TfwSe => excite_instance(SqueezeMode::FrequencyPerFrame, rng),
        CheckTarget::C2dAtt => {
            let dims = vec![rng.gen_range(1..=2), rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=6)];
            let hidden = *[2usize, 8].choose(rng).expect("non-empty");
            let mut params = C2dAttParams::<f64>::zeros(hidden, 3)?;
            for p in [&mut params.conv1, &mut params.conv2] {
                p.weight = rand_tensor(p.weight.dims().to_vec(), rng);
                p.bias = Some(rand_tensor(vec![p.spec.out_channels], rng));
            }
            let x = Tensor::random_uniform(dims.clone(), -2.0, 2.0, rng);
            let up = rand_tensor(dims, rng);
            check_layer(&C2dAtt { params }, &x, &up, DEFAULT_EPS)
        }
    }
}

/// Runs `instances` random checks for `target` from one seed.
pub fn run_suite(target: CheckTarget, seed: u64, instances: usize) -> Result<SuiteReport> {
    if let CheckTarget::Fdy { basis: 0 } = target {
        return Err(Error::invalid("FDY needs at least one basis kernel"));
    }
    let mut instance_errors = Vec::with_capacity(instances);
    let mut tensor_errors: Vec<(String, f64)> = Vec::new();
    for i in 0..instances {
        // Independent stream per instance: FDY draws extra values after the
        // shared conv prefix, which must not shift later instances.
        let mut r = rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
        let check = run_instance(target, &mut r)?;
        instance_errors.push(check.max_error());
        for (name, err) in check.errors {
            match tensor_errors.iter_mut().find(|(n, _)| *n == name) {
                Some((_, e)) => *e = e.max(err),
                None => tensor_errors.push((name, err)),
            }
        }
    }
    Ok(SuiteReport { target, seed, instance_errors, tensor_errors })
}
