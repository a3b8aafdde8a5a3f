//! Populations, meta-game payoff matrices and aggregated opponents.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::exec::Execution;
use crate::games::{GameInstance, Seat};
use crate::seed::Rng;

/// Tolerance for accepting externally supplied meta-distributions.
pub const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Single,
    Row,
    Col,
}

/// Ordered, append-only list of policies.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    members: Vec<Vec<f64>>,
    side: Side,
}

impl Population {
    pub fn new(side: Side, members: Vec<Vec<f64>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        Ok(Self { members, side })
    }

    /// `size` fresh random policies.
    pub fn random(game: &GameInstance, side: Side, size: usize, rng: &mut Rng) -> Result<Self> {
        Self::new(side, (0..size).map(|_| game.random_policy(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &[f64] {
        &self.members[i]
    }

    pub fn refs(&self) -> Vec<&[f64]> {
        self.members.iter().map(Vec::as_slice).collect()
    }

    /// New snapshot with `policy` appended.
    pub fn extend(&self, game: &GameInstance, policy: Vec<f64>) -> Result<Self> {
        game.check_policy(&policy)?;
        let mut members = self.members.clone();
        members.push(policy);
        Ok(Self {
            members,
            side: self.side,
        })
    }
}

/// Dense payoff matrix from the row player's perspective.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        ensure_len(rows * cols, values.len(), "payoff matrix entries")?;
        ensure_finite(&values, "payoff matrix")?;
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Matrix("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// `-Mᵀ`: the same game seen by the column player.
    pub fn negated_transpose(&self) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                values[j * self.rows + i] = -self.get(i, j);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }

    /// `max |M_ij + M_ji|`
    pub fn antisymmetry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows.min(self.cols) {
            for j in 0..=i {
                worst = worst.max((self.get(i, j) + self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `M π`
    pub fn apply(&self, pi: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(pi).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Square, comma-separated, no header; shortest round-trip float format.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Probability vector over population members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDistribution(Vec<f64>);

impl MetaDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_simplex(&weights, SIMPLEX_TOL)?;
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, k: usize) -> Self {
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn check_simplex(w: &[f64], tol: f64) -> Result<()> {
    ensure_finite(w, "meta-distribution")?;
    let sum: f64 = w.iter().sum();
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    if w.is_empty() || (sum - 1.0).abs() > tol || min < -tol {
        return Err(Error::NotSimplex { sum, min });
    }
    Ok(())
}

/// Payoffs between every pair of members of a single population.
pub fn evaluate_meta_game(game: &GameInstance, pop: &Population, exec: Execution) -> Result<PayoffMatrix> {
    evaluate_meta_game_two(game, pop, pop, exec)
}

/// Payoffs of every row member against every column member.
pub fn evaluate_meta_game_two(
    game: &GameInstance,
    rows: &Population,
    cols: &Population,
    exec: Execution,
) -> Result<PayoffMatrix> {
    let (r, c) = (rows.len(), cols.len());
    let values = exec.try_map(r * c, |k| game.payoff(rows.member(k / c), cols.member(k % c)))?;
    PayoffMatrix::new(r, c, values)
}

/// Extends `prev` to cover the members appended to `rows` and `cols` since
/// it was computed; only the new rows and columns are evaluated.
pub fn extend_meta_game_two(
    game: &GameInstance,
    prev: &PayoffMatrix,
    rows: &Population,
    cols: &Population,
    exec: Execution,
) -> Result<PayoffMatrix> {
    let (r, c) = (rows.len(), cols.len());
    if prev.rows > r || prev.cols > c {
        return Err(Error::Dimension {
            expected: r * c,
            got: prev.rows * prev.cols,
            context: "previous meta-game larger than population",
        });
    }
    let fresh: Vec<(usize, usize)> = (0..r)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .filter(|&(i, j)| i >= prev.rows || j >= prev.cols)
        .collect();
    let computed = exec.try_map(fresh.len(), |k| {
        let (i, j) = fresh[k];
        game.payoff(rows.member(i), cols.member(j))
    })?;
    let mut values = vec![0.0; r * c];
    for i in 0..prev.rows {
        values[i * c..i * c + prev.cols].copy_from_slice(prev.row(i));
    }
    for (&(i, j), v) in fresh.iter().zip(computed) {
        values[i * c + j] = v;
    }
    PayoffMatrix::new(r, c, values)
}

pub fn extend_meta_game(
    game: &GameInstance,
    prev: &PayoffMatrix,
    pop: &Population,
    exec: Execution,
) -> Result<PayoffMatrix> {
    extend_meta_game_two(game, prev, pop, pop, exec)
}

/// `𝔐(φ, ⟨π, Φ⟩) = Σ_k π_k 𝔐(φ, φ_k)`
pub fn aggregate_payoff(game: &GameInstance, policy: &[f64], pi: &[f64], pop: &Population) -> Result<f64> {
    aggregate_payoff_seat(game, policy, pi, pop, Seat::Row)
}

/// As [`aggregate_payoff`], for a deviator in the given seat; the column
/// seat receives the negated row payoff.
pub fn aggregate_payoff_seat(
    game: &GameInstance,
    policy: &[f64],
    pi: &[f64],
    pop: &Population,
    seat: Seat,
) -> Result<f64> {
    ensure_len(pop.len(), pi.len(), "meta-distribution vs population")?;
    check_simplex(pi, SIMPLEX_TOL)?;
    game.check_policy(policy)?;
    let members = pop.refs();
    let v = match seat {
        Seat::Row => game.aggregate_payoff_unchecked(policy, pi, &members),
        Seat::Col => {
            let terms: Vec<f64> = members
                .iter()
                .map(|m| -game.payoff_unchecked(m, policy))
                .collect();
            pi.iter().zip(&terms).map(|(w, t)| w * t).sum()
        }
    };
    ensure_finite(&[v], "aggregate payoff")?;
    Ok(v)
}
