use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Non-overlapping mean pooling over the frequency and time axes.
///
/// Extents that are not multiples of the window are truncated: trailing rows
/// and columns that do not fill a window are dropped.
pub fn avg_pool2d<S: Scalar>(x: &Tensor<S>, pool_f: usize, pool_t: usize) -> Result<Tensor<S>> {
    if pool_f == 0 || pool_t == 0 {
        return Err(Error::invalid("pool size must be positive"));
    }
    let [b, c, f, t] = x.dims4()?;
    let (fo, to) = (f / pool_f, t / pool_t);
    if fo == 0 || to == 0 {
        return Err(Error::shape(format!("pool ({pool_f},{pool_t}) larger than map ({f},{t})")));
    }
    if pool_f == 1 && pool_t == 1 {
        return Ok(x.clone());
    }
    let norm = S::one() / S::of((pool_f * pool_t) as f64);
    let xd = x.data();
    let mut out = Vec::with_capacity(b * c * fo * to);
    for plane in xd.chunks_exact(f * t) {
        for i in 0..fo {
            for j in 0..to {
                let mut acc = S::zero();
                for di in 0..pool_f {
                    let row = &plane[(i * pool_f + di) * t + j * pool_t..][..pool_t];
                    acc += row.iter().copied().sum::<S>();
                }
                out.push(acc * norm);
            }
        }
    }
    Tensor::new(vec![b, c, fo, to], out)
}

/// Spreads each pooled gradient evenly over its window; truncated cells get zero.
pub fn avg_pool2d_backward<S: Scalar>(
    input_dims: &[usize],
    gy: &Tensor<S>,
    pool_f: usize,
    pool_t: usize,
) -> Result<Tensor<S>> {
    let [b, c, f, t] = match input_dims {
        &[b, c, f, t] => [b, c, f, t],
        _ => return Err(Error::shape("avg_pool2d_backward expects a rank-4 input shape")),
    };
    let (fo, to) = (f / pool_f, t / pool_t);
    if gy.dims() != [b, c, fo, to] {
        return Err(Error::shape(format!("upstream gradient {:?}, expected {:?}", gy.dims(), [b, c, fo, to])));
    }
    let norm = S::one() / S::of((pool_f * pool_t) as f64);
    let mut gx = vec![S::zero(); b * c * f * t];
    for (p, plane) in gx.chunks_exact_mut(f * t).enumerate() {
        let g = &gy.data()[p * fo * to..][..fo * to];
        for i in 0..fo * pool_f {
            for j in 0..to * pool_t {
                plane[i * t + j] = g[(i / pool_f) * to + j / pool_t] * norm;
            }
        }
    }
    Tensor::new(input_dims.to_vec(), gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_pool_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::<f32>::random_uniform(vec![1, 2, 3, 5], -1.0, 1.0, &mut rng);
        assert_eq!(avg_pool2d(&x, 1, 1).unwrap(), x);
    }

    #[test]
    fn constant_stays_constant() {
        let x = Tensor::<f64>::full(vec![2, 3, 8, 6], 1.25);
        let y = avg_pool2d(&x, 2, 3).unwrap();
        assert_eq!(y.dims(), &[2, 3, 4, 2]);
        assert!(y.data().iter().all(|&v| v == 1.25));
    }

    #[test]
    fn odd_extents_truncate() {
        let x = Tensor::<f64>::from_fn(vec![1, 1, 3, 5], |i| i as f64);
        let y = avg_pool2d(&x, 2, 2).unwrap();
        assert_eq!(y.dims(), &[1, 1, 1, 2]);
        // rows 0-1, cols 0-1: 0,1,5,6
        assert_eq!(y.data()[0], 3.0);
        assert!(avg_pool2d(&x, 0, 1).is_err());
    }
}
