//! GRU meta-solver: an entry MLP, a GRU along each row (over columns), a GRU
//! over the resulting row features, then a row-wise MLP head.

use super::params::Blocks;
use super::{dense, relu_all};
use crate::real::Real;

type Block<'a, R> = (&'a [R], &'a [R]);

fn cell<R: Real>(h: usize, input: Block<'_, R>, hidden: Block<'_, R>, x: &[R], prev: &[R]) -> Vec<R> {
    let gi = dense(input, x);
    let gh = dense(hidden, prev);
    (0..h)
        .map(|k| {
            let r = (gi[k] + gh[k]).sigmoid();
            let z = (gi[h + k] + gh[h + k]).sigmoid();
            let n = (gi[2 * h + k] + r * gh[2 * h + k]).tanh();
            n + z * (prev[k] - n)
        })
        .collect()
}

fn run<R: Real>(h: usize, input: Block<'_, R>, hidden: Block<'_, R>, seq: &[Vec<R>]) -> Vec<R> {
    seq.iter()
        .fold(vec![R::zero(); h], |state, x| cell(h, input, hidden, x, &state))
}

pub(crate) fn logits<R: Real>(h: usize, theta: &[R], m: &[Vec<R>]) -> Vec<R> {
    let mut blocks = Blocks::new(theta);
    let e1 = blocks.next(h, 1);
    let e2 = blocks.next(h, h);
    let ci = blocks.next(3 * h, h);
    let ch = blocks.next(3 * h, h);
    let ri = blocks.next(3 * h, h);
    let rh = blocks.next(3 * h, h);
    let h1 = blocks.next(2 * h, 2 * h);
    let h2 = blocks.next(1, 2 * h);

    let rows: Vec<Vec<R>> = m
        .iter()
        .map(|row| {
            let encoded: Vec<Vec<R>> = row
                .iter()
                .map(|&x| relu_all(dense(e2, &relu_all(dense(e1, &[x])))))
                .collect();
            run(h, ci, ch, &encoded)
        })
        .collect();
    let global = run(h, ri, rh, &rows);
    rows.iter()
        .map(|r| {
            let joint: Vec<R> = r.iter().chain(&global).copied().collect();
            dense(h2, &relu_all(dense(h1, &joint)))[0]
        })
        .collect()
}
