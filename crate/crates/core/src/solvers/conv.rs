//! Fully convolutional meta-solver.
//!
//! Each row of `M` is a one-channel signal. A block of size-preserving
//! convolutions (kernel 3, padding 1, LeakyReLU) turns it into a row feature
//! `f_i` of the same length. The mean of `f_i` over rows is stacked with each
//! `f_i` as a second channel, and a final block plus a mean over positions
//! gives one logit per row. Rows are treated independently, so the model is
//! row-permutation equivariant; the convolutions run along columns, so it is
//! not column-permutation invariant.

use super::mean_pool;
use super::params::Blocks;
use crate::real::Real;

pub const KERNEL: usize = 3;
const SLOPE: f64 = 0.01;

/// Same-padded 1-D convolution; `input` is `channels × len`.
fn conv<R: Real>((w, b): (&[R], &[R]), input: &[Vec<R>]) -> Vec<Vec<R>> {
    let channels = input.len();
    let len = input[0].len();
    let out = b.len();
    let fan_in = channels * KERNEL;
    let mut result = vec![Vec::with_capacity(len); out];
    let mut window = vec![R::zero(); fan_in];
    for p in 0..len {
        for (c, signal) in input.iter().enumerate() {
            for k in 0..KERNEL {
                let q = p + k;
                window[c * KERNEL + k] = if q >= 1 && q <= len { signal[q - 1] } else { R::zero() };
            }
        }
        for (o, res) in result.iter_mut().enumerate() {
            res.push(R::dot(&w[o * fan_in..(o + 1) * fan_in], &window) + b[o]);
        }
    }
    result
}

fn leaky<R: Real>(x: Vec<Vec<R>>) -> Vec<Vec<R>> {
    x.into_iter()
        .map(|c| c.into_iter().map(|v| v.leaky_relu(SLOPE)).collect())
        .collect()
}

pub(crate) fn logits<R: Real>(channels: usize, theta: &[R], m: &[Vec<R>]) -> Vec<R> {
    let mut blocks = Blocks::new(theta);
    let a1 = blocks.next(channels, KERNEL);
    let a2 = blocks.next(channels, channels * KERNEL);
    let a3 = blocks.next(1, channels * KERNEL);
    let b1 = blocks.next(channels, 2 * KERNEL);
    let b2 = blocks.next(channels, channels * KERNEL);
    let b3 = blocks.next(1, channels * KERNEL);

    let features: Vec<Vec<R>> = m
        .iter()
        .map(|row| {
            let x = leaky(conv(a1, std::slice::from_ref(row)));
            let x = leaky(conv(a2, &x));
            leaky(conv(a3, &x)).remove(0)
        })
        .collect();
    let global = mean_pool(&features);

    features
        .into_iter()
        .map(|f| {
            let x = leaky(conv(b1, &[f, global.clone()]));
            let x = leaky(conv(b2, &x));
            let out = conv(b3, &x).remove(0);
            R::sum(&out).scale(1.0 / out.len() as f64)
        })
        .collect()
}
