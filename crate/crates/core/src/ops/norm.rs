use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;

/// Inference-mode batch normalization along axis 1:
/// `γ·(x − μ)/√(σ² + ε) + β`, one statistic per channel.
pub fn batchnorm_infer<S: Scalar>(
    x: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    mean: &Tensor<S>,
    var: &Tensor<S>,
) -> Result<Tensor<S>> {
    if x.ndim() < 2 {
        return Err(Error::shape("batchnorm input needs a channel axis"));
    }
    let c = x.dims()[1];
    for (name, t) in [("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)] {
        if t.dims() != [c] {
            return Err(Error::shape(format!("batchnorm {name} {:?}, expected [{c}]", t.dims())));
        }
    }
    let inner: usize = x.dims()[2..].iter().product();
    let eps = S::of(BN_EPS);
    let (scale, shift): (Vec<S>, Vec<S>) = (0..c)
        .map(|k| {
            let s = gamma.data()[k] / (var.data()[k] + eps).sqrt();
            (s, beta.data()[k] - s * mean.data()[k])
        })
        .unzip();
    let mut out = x.clone();
    for (i, chunk) in out.data_mut().chunks_exact_mut(inner).enumerate() {
        let k = i % c;
        chunk.iter_mut().for_each(|v| *v = *v * scale[k] + shift[k]);
    }
    Ok(out)
}
