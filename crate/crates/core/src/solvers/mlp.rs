//! Permutation-respecting MLP meta-solver.
//!
//! Each entry `M_ij` is embedded by a two-layer MLP and mean-pooled over
//! columns into a row feature `r_i`. A second MLP on the row features,
//! mean-pooled over rows, gives a global feature `g`. A final MLP maps
//! `[r_i, g]` to the logit of row `i`. Mean pooling makes the output
//! invariant to column permutations and equivariant to row permutations.

use super::params::Blocks;
use super::{dense, mean_pool, relu_all};
use crate::real::Real;

pub(crate) fn logits<R: Real>(h: usize, theta: &[R], m: &[Vec<R>]) -> Vec<R> {
    let mut blocks = Blocks::new(theta);
    let e1 = blocks.next(h, 1);
    let e2 = blocks.next(h, h);
    let r1 = blocks.next(h, h);
    let r2 = blocks.next(h, h);
    let h1 = blocks.next(2 * h, 2 * h);
    let h2 = blocks.next(1, 2 * h);

    let row_features: Vec<Vec<R>> = m
        .iter()
        .map(|row| {
            let encoded: Vec<Vec<R>> = row
                .iter()
                .map(|&x| relu_all(dense(e2, &relu_all(dense(e1, &[x])))))
                .collect();
            mean_pool(&encoded)
        })
        .collect();
    let transformed: Vec<Vec<R>> = row_features
        .iter()
        .map(|r| relu_all(dense(r2, &relu_all(dense(r1, r)))))
        .collect();
    let global = mean_pool(&transformed);

    row_features
        .iter()
        .map(|r| {
            let joint: Vec<R> = r.iter().chain(&global).copied().collect();
            dense(h2, &relu_all(dense(h1, &joint)))[0]
        })
        .collect()
}
