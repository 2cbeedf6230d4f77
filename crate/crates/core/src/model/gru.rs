//! Bidirectional GRU, forward only.
//!
//! Gate rows are stacked `[r, z, n]` and each direction carries separate
//! input and hidden biases:
//!
//! ```text
//! r  = σ(W_ir x + b_ir + W_hr h + b_hr)
//! z  = σ(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::init;
use crate::ops::{self, sigmoid_scalar};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct GruCell<S> {
    /// `[3H, I]`
    pub w_ih: Tensor<S>,
    /// `[3H, H]`
    pub w_hh: Tensor<S>,
    pub b_ih: Tensor<S>,
    pub b_hh: Tensor<S>,
}

impl<S: Scalar> GruCell<S> {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        GruCell {
            w_ih: init::uniform(vec![3 * hidden, input], hidden, rng),
            w_hh: init::uniform(vec![3 * hidden, hidden], hidden, rng),
            b_ih: init::uniform(vec![3 * hidden], hidden, rng),
            b_hh: init::uniform(vec![3 * hidden], hidden, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruCell {
            w_ih: Tensor::zeros(vec![3 * hidden, input]),
            w_hh: Tensor::zeros(vec![3 * hidden, hidden]),
            b_ih: Tensor::zeros(vec![3 * hidden]),
            b_hh: Tensor::zeros(vec![3 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.dims()[1]
    }

    pub fn input(&self) -> usize {
        self.w_ih.dims()[1]
    }

    pub fn count(input: usize, hidden: usize) -> usize {
        3 * hidden * (input + hidden) + 6 * hidden
    }

    pub fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        vec![("w_ih", &self.w_ih), ("w_hh", &self.w_hh), ("b_ih", &self.b_ih), ("b_hh", &self.b_hh)]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.b_ih, &mut self.b_hh]
    }

    /// One step given the precomputed input projection `gi = W_ih x + b_ih`.
    pub fn step(&self, gi: &[S], h: &[S]) -> Vec<S> {
        let hd = self.hidden();
        let whh = self.w_hh.data();
        let bhh = self.b_hh.data();
        let gh: Vec<S> = (0..3 * hd)
            .map(|row| {
                let w = &whh[row * hd..][..hd];
                w.iter().zip(h).fold(bhh[row], |acc, (&a, &b)| acc + a * b)
            })
            .collect();
        (0..hd)
            .map(|j| {
                let r = sigmoid_scalar(gi[j] + gh[j]);
                let z = sigmoid_scalar(gi[hd + j] + gh[hd + j]);
                let n = (gi[2 * hd + j] + r * gh[2 * hd + j]).tanh();
                (S::one() - z) * n + z * h[j]
            })
            .collect()
    }

    /// Runs the recurrence over `[B, T, I]` from a zero state. With `reverse`
    /// the sequence is consumed back to front; outputs stay time-aligned.
    pub fn run(&self, seq: &Tensor<S>, reverse: bool) -> Result<Tensor<S>> {
        let [b, t, i] = seq.dims3()?;
        if i != self.input() {
            return Err(Error::shape(format!("GRU input size {i}, expected {}", self.input())));
        }
        let hd = self.hidden();
        let gi = ops::linear(seq, &self.w_ih, Some(&self.b_ih))?;
        let mut out = vec![S::zero(); b * t * hd];
        for bi in 0..b {
            let mut h = vec![S::zero(); hd];
            let order: Box<dyn Iterator<Item = usize>> =
                if reverse { Box::new((0..t).rev()) } else { Box::new(0..t) };
            for ti in order {
                h = self.step(&gi.data()[(bi * t + ti) * 3 * hd..][..3 * hd], &h);
                out[(bi * t + ti) * hd..][..hd].copy_from_slice(&h);
            }
        }
        Tensor::new(vec![b, t, hd], out)
    }
}

/// One bidirectional layer: forward and backward cells, outputs concatenated.
#[derive(Clone, Debug, PartialEq)]
pub struct BiGruLayer<S> {
    pub forward: GruCell<S>,
    pub backward: GruCell<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiGru<S> {
    pub layers: Vec<BiGruLayer<S>>,
}

impl<S: Scalar> BiGru<S> {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, layers: usize, rng: &mut R) -> Self {
        let layers = (0..layers)
            .map(|l| {
                let i = if l == 0 { input } else { 2 * hidden };
                BiGruLayer { forward: GruCell::init(i, hidden, rng), backward: GruCell::init(i, hidden, rng) }
            })
            .collect();
        BiGru { layers }
    }

    pub fn hidden(&self) -> usize {
        self.layers.first().map_or(0, |l| l.forward.hidden())
    }

    /// Closed-form count for the whole stack.
    pub fn count(input: usize, hidden: usize, layers: usize) -> usize {
        (0..layers)
            .map(|l| 2 * GruCell::<S>::count(if l == 0 { input } else { 2 * hidden }, hidden))
            .sum()
    }
}

/// `[B, T, D] → [B, T, 2H]` through every layer of the stack.
pub fn bigru_forward<S: Scalar>(gru: &BiGru<S>, seq: &Tensor<S>) -> Result<Tensor<S>> {
    let mut cur = seq.clone();
    for layer in &gru.layers {
        let f = layer.forward.run(&cur, false)?;
        let r = layer.backward.run(&cur, true)?;
        let [b, t, h] = f.dims3()?;
        let mut out = Vec::with_capacity(b * t * 2 * h);
        for (fa, ra) in f.data().chunks_exact(h).zip(r.data().chunks_exact(h)) {
            out.extend_from_slice(fa);
            out.extend_from_slice(ra);
        }
        cur = Tensor::new(vec![b, t, 2 * h], out)?;
    }
    Ok(cur)
}
