//! Central finite differences in 64-bit precision, and comparison of those
//! estimates against a layer's analytic backward pass.

mod suite;

pub use suite::{run_suite, CheckTarget, SuiteReport};

use crate::error::{Error, Result};
use crate::layer::Layer;
use crate::tensor::Tensor;

/// Default perturbation for [`finite_diff_grad`].
pub const DEFAULT_EPS: f64 = 1e-6;

/// Relative-error bound every analytic backward is held to.
pub const TOLERANCE: f64 = 1e-4;

/// Central-difference gradient `(f(x + ε·eᵢ) − f(x − ε·eᵢ)) / 2ε` of a scalar
/// function, one element at a time.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor<f64>, eps: f64) -> Result<Tensor<f64>>
where
    F: FnMut(&Tensor<f64>) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {eps}")));
    }
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.dims().to_vec());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let hi = f(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let lo = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::NonFinite(format!("finite-difference evaluation at element {i}")));
        }
        grad.data_mut()[i] = (hi - lo) / (2.0 * eps);
    }
    Ok(grad)
}

/// Max-norm relative error `‖a − n‖∞ / max(‖a‖∞, ‖n‖∞, floor)`.
///
/// The floor keeps identically-zero gradients (e.g. a dead ReLU branch) from
/// turning round-off into a large ratio.
pub fn relative_error(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> Result<f64> {
    const FLOOR: f64 = 1e-6;
    let diff = analytic.max_abs_diff(numeric)?;
    Ok(diff / analytic.max_abs().max(numeric.max_abs()).max(FLOOR))
}

/// Per-tensor relative errors of one layer at one point.
#[derive(Clone, Debug)]
pub struct LayerCheck {
    /// `("input", err)` first, then one entry per parameter.
    pub errors: Vec<(String, f64)>,
}

impl LayerCheck {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }
}

/// Compares `layer.backward` against finite differences of
/// `x ↦ Σ upstream ⊙ layer(x)` with respect to the input and every parameter.
pub fn check_layer<L>(layer: &L, x: &Tensor<f64>, upstream: &Tensor<f64>, eps: f64) -> Result<LayerCheck>
where
    L: Layer<f64> + Clone,
{
    let (y, trace) = layer.forward_traced(x)?;
    y.check_same_dims(upstream)?;
    let grads = layer.backward(&trace, upstream)?;

    let mut errors = Vec::new();
    let numeric = finite_diff_grad(|xp| layer.forward(xp)?.dot(upstream), x, eps)?;
    errors.push(("input".to_string(), relative_error(&grads.input, &numeric)?));

    let names: Vec<&'static str> = layer.params().iter().map(|(n, _)| *n).collect();
    if names.len() != grads.params.len() {
        return Err(Error::shape(format!(
            "layer has {} parameters but backward returned {} gradients",
            names.len(),
            grads.params.len()
        )));
    }
    for (p, name) in names.iter().enumerate() {
        let base = layer.params()[p].1.clone();
        let mut probe = layer.clone();
        let numeric = finite_diff_grad(
            |w| {
                *probe.params_mut()[p] = w.clone();
                probe.forward(x)?.dot(upstream)
            },
            &base,
            eps,
        )?;
        errors.push((name.to_string(), relative_error(&grads.params[p], &numeric)?));
    }
    Ok(LayerCheck { errors })
}
