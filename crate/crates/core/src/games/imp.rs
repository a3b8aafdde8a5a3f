//! Iterated matching pennies with memory-1 policies.
//!
//! A policy is 5 logits; `sigmoid(logit)` is the probability of playing
//! heads in the states `[start, HH, HT, TH, TT]`, where a memory state lists
//! the player's own previous action first. The column player therefore sees
//! HT and TH swapped relative to the row player.
//!
//! Stage rewards for the row player (the column player receives the
//! negation): HH `+a`, HT `-a`, TH `-b`, TT `+b`. The return is the
//! undiscounted sum over `H` steps.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::real::{sigmoid_f64, Real};
use crate::seed::Rng;
use crate::tape::{Tape, Var};

pub const IMP_POLICY_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Seat {
    Row,
    Col,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImpState {
    Start,
    HH,
    HT,
    TH,
    TT,
}

impl ImpState {
    /// Memory state (row-perspective) after the joint action.
    pub fn after(row_heads: bool, col_heads: bool) -> Self {
        match (row_heads, col_heads) {
            (true, true) => ImpState::HH,
            (true, false) => ImpState::HT,
            (false, true) => ImpState::TH,
            (false, false) => ImpState::TT,
        }
    }

    /// Index into a policy vector for the given seat.
    pub fn policy_index(self, seat: Seat) -> usize {
        match (self, seat) {
            (ImpState::Start, _) => 0,
            (ImpState::HH, _) => 1,
            (ImpState::HT, Seat::Row) | (ImpState::TH, Seat::Col) => 2,
            (ImpState::TH, Seat::Row) | (ImpState::HT, Seat::Col) => 3,
            (ImpState::TT, _) => 4,
        }
    }

    const ALL: [ImpState; 5] = [
        ImpState::Start,
        ImpState::HH,
        ImpState::HT,
        ImpState::TH,
        ImpState::TT,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpTrajectory {
    /// State observed before each step.
    pub states: Vec<ImpState>,
    /// `(row played heads, column played heads)` per step.
    pub actions: Vec<(bool, bool)>,
    /// Row-player reward per step.
    pub rewards: Vec<f64>,
}

impl ImpTrajectory {
    pub fn row_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// `∇_logits log P(own actions)` for the player in `seat`.
    pub fn score(&self, policy: &[f64], seat: Seat) -> [f64; IMP_POLICY_DIM] {
        let mut g = [0.0; IMP_POLICY_DIM];
        for (&s, &(r, c)) in self.states.iter().zip(&self.actions) {
            let i = s.policy_index(seat);
            let h = sigmoid_f64(policy[i]);
            let heads = if seat == Seat::Row { r } else { c };
            g[i] += if heads { 1.0 - h } else { -h };
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpPayload {
    pub a: f64,
    pub b: f64,
    pub horizon: usize,
}

impl ImpPayload {
    pub fn new(a: f64, b: f64, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("IMP horizon must be at least 1".into()));
        }
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite("IMP stage payoffs"));
        }
        Ok(Self { a, b, horizon })
    }

    pub fn sample(horizon: usize, rng: &mut Rng) -> Result<Self> {
        let a = rng.random_range(0.5..=2.0);
        let b = rng.random_range(0.5..=2.0);
        Self::new(a, b, horizon)
    }

    pub fn reward(&self, row_heads: bool, col_heads: bool) -> f64 {
        match (row_heads, col_heads) {
            (true, true) => self.a,
            (true, false) => -self.a,
            (false, true) => -self.b,
            (false, false) => self.b,
        }
    }

    /// Exact expected row return by propagating the state distribution.
    pub fn payoff<R: Real>(&self, row: &[R], col: &[R]) -> R {
        let one = R::cst(1.0);
        let hr: Vec<R> = row.iter().map(|&v| v.sigmoid()).collect();
        let hc: Vec<R> = col.iter().map(|&v| v.sigmoid()).collect();
        let mut dist = [one, R::zero(), R::zero(), R::zero(), R::zero()];
        let mut total = R::zero();
        for step in 0..self.horizon {
            let mut next = [R::zero(); 5];
            for (si, &s) in ImpState::ALL.iter().enumerate() {
                if (step == 0) != (si == 0) {
                    continue;
                }
                let d = dist[si];
                let p = hr[s.policy_index(Seat::Row)];
                let q = hc[s.policy_index(Seat::Col)];
                let joint = [
                    (p * q, true, true),
                    (p * (one - q), true, false),
                    ((one - p) * q, false, true),
                    ((one - p) * (one - q), false, false),
                ];
                for (pr, r, c) in joint {
                    let mass = d * pr;
                    total += mass.scale(self.reward(r, c));
                    next[1 + 2 * usize::from(!r) + usize::from(!c)] += mass;
                }
            }
            dist = next;
        }
        total
    }

    /// Gradient of the seat's own expected return with respect to its
    /// logits, via a scratch tape over the exact DP.
    pub fn grad(&self, row: &[f64], col: &[f64], seat: Seat) -> Vec<f64> {
        let tape = Tape::new();
        let (r, c): (Vec<Var>, Vec<Var>) = match seat {
            Seat::Row => (tape.vars(row), col.iter().map(|&v| Var::constant(v)).collect()),
            Seat::Col => (row.iter().map(|&v| Var::constant(v)).collect(), tape.vars(col)),
        };
        let v = self.payoff(&r, &c);
        match seat {
            Seat::Row => tape.gradient(v, &r),
            Seat::Col => tape.gradient(-v, &c),
        }
    }

    pub fn rollout(&self, row: &[f64], col: &[f64], rng: &mut Rng) -> ImpTrajectory {
        let mut state = ImpState::Start;
        let mut out = ImpTrajectory {
            states: Vec::with_capacity(self.horizon),
            actions: Vec::with_capacity(self.horizon),
            rewards: Vec::with_capacity(self.horizon),
        };
        for _ in 0..self.horizon {
            let p = sigmoid_f64(row[state.policy_index(Seat::Row)]);
            let q = sigmoid_f64(col[state.policy_index(Seat::Col)]);
            let r = rng.random::<f64>() < p;
            let c = rng.random::<f64>() < q;
            out.states.push(state);
            out.actions.push((r, c));
            out.rewards.push(self.reward(r, c));
            state = ImpState::after(r, c);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn uniform_play_in_fair_pennies_has_value_zero() {
        let g = ImpPayload::new(1.0, 1.0, 50).unwrap();
        assert_eq!(g.payoff(&[0.0; 5], &[0.0; 5]), 0.0);
    }

    #[test]
    fn column_view_swaps_mixed_states() {
        assert_eq!(ImpState::HT.policy_index(Seat::Row), 2);
        assert_eq!(ImpState::HT.policy_index(Seat::Col), 3);
        assert_eq!(ImpState::TH.policy_index(Seat::Col), 2);
    }

    #[test]
    fn deterministic_policies_give_zero_variance_return() {
        let g = ImpPayload::new(1.3, 0.7, 20).unwrap();
        let big = 60.0;
        // Row always heads; column: heads at start, then copies the row's last move
        // (from the column's perspective states are (own, other)).
        let row = [big; 5];
        let col = [big, big, -big, big, -big];
        let exact = g.payoff(&row, &col);
        let mut rng = rng_from(&[0]);
        for _ in 0..5 {
            assert_eq!(g.rollout(&row, &col, &mut rng).row_return(), exact);
        }
        assert!((exact - 20.0 * 1.3).abs() < 1e-12);
    }

    #[test]
    fn trajectory_has_horizon_length() {
        let g = ImpPayload::new(1.0, 2.0, 7).unwrap();
        let t = g.rollout(&[0.3; 5], &[-0.1; 5], &mut rng_from(&[1]));
        assert_eq!(t.states.len(), 7);
        assert_eq!(t.actions.len(), 7);
        assert_eq!(t.rewards.len(), 7);
        assert_eq!(t.states[0], ImpState::Start);
    }

    #[test]
    fn column_gradient_is_of_the_negated_payoff() {
        let g = ImpPayload::new(1.2, 0.8, 5).unwrap();
        let row = [0.1, -0.2, 0.3, 0.4, -0.5];
        let col = [0.2, 0.1, -0.3, 0.0, 0.6];
        let gc = g.grad(&row, &col, Seat::Col);
        let h = 1e-6;
        for i in 0..5 {
            let mut p = col;
            let mut m = col;
            p[i] += h;
            m[i] -= h;
            let fd = -(g.payoff(&row, &p) - g.payoff(&row, &m)) / (2.0 * h);
            assert!((gc[i] - fd).abs() < 1e-7);
        }
    }
}
