//! Nash equilibria of zero-sum matrix games.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

use crate::error::{Error, Result};
use crate::population::PayoffMatrix;

/// Simultaneous fictitious play for `iters` rounds; returns the empirical
/// row strategy. Cumulative payoffs are updated incrementally, so a round
/// costs `O(rows + cols)`. Ties go to the lowest index.
pub fn fictitious_play(m: &PayoffMatrix, iters: usize) -> Vec<f64> {
    fictitious_play_both(m, iters).0
}

/// As [`fictitious_play`], returning `(row strategy, column strategy)`.
pub fn fictitious_play_both(m: &PayoffMatrix, iters: usize) -> (Vec<f64>, Vec<f64>) {
    let (r, c) = (m.rows(), m.cols());
    // Payoff of each row against the column player's cumulative play, and of
    // each column against the row player's cumulative play.
    let mut row_score = vec![0.0; r];
    let mut col_score = vec![0.0; c];
    let mut row_count = vec![0u64; r];
    let mut col_count = vec![0u64; c];
    for _ in 0..iters.max(1) {
        let i = argmax(&row_score);
        let j = argmin(&col_score);
        row_count[i] += 1;
        col_count[j] += 1;
        for (k, s) in row_score.iter_mut().enumerate() {
            *s += m.get(k, j);
        }
        for (k, s) in col_score.iter_mut().enumerate() {
            *s += m.get(i, k);
        }
    }
    let total = iters.max(1) as f64;
    (
        row_count.iter().map(|&n| n as f64 / total).collect(),
        col_count.iter().map(|&n| n as f64 / total).collect(),
    )
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Maximin row strategy and game value by linear programming.
pub fn lp_nash(m: &PayoffMatrix) -> Result<(Vec<f64>, f64)> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let value = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let x: Vec<_> = (0..m.rows())
        .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
        .collect();
    for j in 0..m.cols() {
        let mut expr: Vec<_> = x.iter().enumerate().map(|(i, &xi)| (xi, m.get(i, j))).collect();
        expr.push((value, -1.0));
        lp.add_constraint(&expr, ComparisonOp::Ge, 0.0);
    }
    let ones: Vec<_> = x.iter().map(|&xi| (xi, 1.0)).collect();
    lp.add_constraint(&ones, ComparisonOp::Eq, 1.0);
    match lp.solve() {
        Ok(SolveOutcome::Solution(sol)) => {
            let mut p: Vec<f64> = x.iter().map(|&xi| sol[xi].max(0.0)).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            Ok((p, sol[value]))
        }
        Ok(SolveOutcome::Interrupted(_)) => Err(Error::Matrix("LP solve interrupted".into())),
        Err(e) => Err(Error::Matrix(format!("LP solve failed: {e}"))),
    }
}

/// `max_i (M π)_i`: the best pure deviation payoff against `π`.
pub fn matrix_exploitability(m: &PayoffMatrix, pi: &[f64]) -> f64 {
    m.apply(pi).into_iter().fold(f64::NEG_INFINITY, f64::max)
}
