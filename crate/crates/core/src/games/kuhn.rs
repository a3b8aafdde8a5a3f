//! Kuhn poker with a symmetrised single-population payoff.
//!
//! A policy assigns, at each of the 12 information states, the probability
//! of the aggressive action (bet at an opening decision, call when facing a
//! bet). Information states are ordered lexicographically by
//! (seat, card, history):
//!
//! | index | seat | card | history | aggressive action |
//! |-------|------|------|---------|-------------------|
//! | 0, 1  | 1    | J    | "", "pb" | bet, call |
//! | 2, 3  | 1    | Q    | "", "pb" | bet, call |
//! | 4, 5  | 1    | K    | "", "pb" | bet, call |
//! | 6, 7  | 2    | J    | "b", "p" | call, bet |
//! | 8, 9  | 2    | Q    | "b", "p" | call, bet |
//! | 10, 11| 2    | K    | "b", "p" | call, bet |
//!
//! Every policy plays both seats, and
//! `M(x, y) = ½ [u₁(x as seat 1, y as seat 2) - u₁(y as seat 1, x as seat 2)]`.

use crate::real::Real;

pub const KUHN_POLICY_DIM: usize = 12;
pub const KUHN_INFOSTATES: usize = 12;

/// Per-infostate action values; `[passive, aggressive]`.
pub type InfostateValues = [[f64; 2]; KUHN_INFOSTATES];

const CARDS: [&str; 3] = ["J", "Q", "K"];

pub fn infostate_label(index: usize) -> String {
    let (seat, hist) = if index < 6 {
        (1, ["", "pb"][index % 2])
    } else {
        (2, ["b", "p"][index % 2])
    };
    format!("P{seat}:{}:{hist}", CARDS[(index % 6) / 2])
}

fn open(card: usize) -> usize {
    2 * card
}
fn p1_facing_bet(card: usize) -> usize {
    2 * card + 1
}
fn p2_facing_bet(card: usize) -> usize {
    6 + 2 * card
}
fn p2_after_pass(card: usize) -> usize {
    6 + 2 * card + 1
}

fn deals() -> impl Iterator<Item = (usize, usize, f64)> {
    (0..3).flat_map(|c1| {
        (0..3)
            .filter(move |&c2| c2 != c1)
            .map(move |c2| (c1, c2, if c1 > c2 { 1.0 } else { -1.0 }))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KuhnPayload;

impl KuhnPayload {
    /// Expected seat-1 utility with `p1` in seat 1 and `p2` in seat 2.
    pub fn seat_one_utility<R: Real>(&self, p1: &[R], p2: &[R]) -> R {
        let one = R::cst(1.0);
        let mut total = R::zero();
        for (c1, c2, win) in deals() {
            let bet = p1[open(c1)];
            let call2 = p2[p2_facing_bet(c2)];
            let bet2 = p2[p2_after_pass(c2)];
            let call1 = p1[p1_facing_bet(c1)];
            let after_bet = call2.scale(2.0 * win) + (one - call2);
            let after_raise = call1.scale(2.0 * win) - (one - call1);
            let after_pass = (one - bet2).scale(win) + bet2 * after_raise;
            total += bet * after_bet + (one - bet) * after_pass;
        }
        total.scale(1.0 / 6.0)
    }

    pub fn payoff<R: Real>(&self, row: &[R], col: &[R]) -> R {
        (self.seat_one_utility(row, col) - self.seat_one_utility(col, row)).scale(0.5)
    }

    /// Counterfactual action values for a policy deviating against the
    /// mixture `Σ_k w_k φ_k`, in units of the symmetrised payoff.
    ///
    /// The value of passing at a seat-1 opening depends on the deviator's own
    /// later decision when facing a bet; `continuation` supplies it.
    pub fn action_values(
        &self,
        weights: &[f64],
        members: &[&[f64]],
        continuation: &[f64],
    ) -> InfostateValues {
        let mut v = [[0.0; 2]; KUHN_INFOSTATES];
        let scale = 0.5 / 6.0;
        for (&w, m) in weights.iter().zip(members) {
            for (c1, c2, win) in deals() {
                // Deviator in seat 1 holding c1; opponent k in seat 2 holds c2.
                let call2 = m[p2_facing_bet(c2)];
                let bet2 = m[p2_after_pass(c2)];
                let call1 = continuation[p1_facing_bet(c1)];
                let raise_value = call1 * 2.0 * win - (1.0 - call1);
                v[open(c1)][1] += w * (call2 * 2.0 * win + (1.0 - call2));
                v[open(c1)][0] += w * ((1.0 - bet2) * win + bet2 * raise_value);
                v[p1_facing_bet(c1)][0] -= w * bet2;
                v[p1_facing_bet(c1)][1] += w * bet2 * 2.0 * win;

                // Deviator in seat 2 holding c2 against opponent k in seat 1
                // holding c1; seat 2 receives the negated seat-1 utility.
                let bet1 = m[open(c1)];
                let call1k = m[p1_facing_bet(c1)];
                v[p2_facing_bet(c2)][0] -= w * bet1;
                v[p2_facing_bet(c2)][1] -= w * bet1 * 2.0 * win;
                v[p2_after_pass(c2)][0] -= w * (1.0 - bet1) * win;
                v[p2_after_pass(c2)][1] +=
                    w * (1.0 - bet1) * (-(call1k * 2.0 * win) + (1.0 - call1k));
            }
        }
        for row in &mut v {
            row[0] *= scale;
            row[1] *= scale;
        }
        v
    }

    /// Greedy actions computed bottom-up: the seat-1 responses to a bet are
    /// fixed first and then used as the continuation for the opening.
    /// Returns `(aggressive?, values)`; ties resolve to the passive action.
    pub fn greedy_actions(
        &self,
        weights: &[f64],
        members: &[&[f64]],
    ) -> ([bool; KUHN_INFOSTATES], InfostateValues) {
        let zeros = [0.0; KUHN_POLICY_DIM];
        let first = self.action_values(weights, members, &zeros);
        let mut continuation = [0.0; KUHN_POLICY_DIM];
        for card in 0..3 {
            let i = p1_facing_bet(card);
            continuation[i] = f64::from(u8::from(first[i][1] > first[i][0]));
        }
        let values = self.action_values(weights, members, &continuation);
        let mut aggressive = [false; KUHN_INFOSTATES];
        for (a, v) in aggressive.iter_mut().zip(&values) {
            *a = v[1] > v[0];
        }
        (aggressive, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_the_documented_order() {
        assert_eq!(infostate_label(0), "P1:J:");
        assert_eq!(infostate_label(5), "P1:K:pb");
        assert_eq!(infostate_label(6), "P2:J:b");
        assert_eq!(infostate_label(11), "P2:K:p");
    }

    #[test]
    fn always_bet_and_call_is_a_coin_flip_of_two() {
        let g = KuhnPayload;
        let x = [1.0; 12];
        // Seat 1 always bets, seat 2 always calls: showdown for 2 each deal.
        assert_eq!(g.seat_one_utility(&x, &x), 0.0);
    }

    #[test]
    fn game_value_for_seat_one_is_minus_one_eighteenth() {
        // A member of the equilibrium family with alpha = 0.
        let nash = [
            0.0, 0.0, 0.0, 1.0 / 3.0, 0.0, 1.0, // seat 1
            0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0, 1.0, // seat 2
        ];
        let g = KuhnPayload;
        assert!((g.seat_one_utility(&nash, &nash) + 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn action_values_reproduce_payoff_for_pure_deviation() {
        let g = KuhnPayload;
        let opp = [0.3, 0.6, 0.1, 0.9, 0.5, 0.2, 0.4, 0.7, 0.8, 0.35, 0.25, 0.65];
        let (aggr, values) = g.greedy_actions(&[1.0], &[&opp]);
        let br: Vec<f64> = aggr.iter().map(|&a| f64::from(u8::from(a))).collect();
        // Payoff equals the sum of root values of the chosen actions.
        let root: f64 = [0, 2, 4, 6, 7, 8, 9, 10, 11]
            .iter()
            .map(|&i| values[i][usize::from(aggr[i])])
            .sum();
        let direct = g.payoff(&br, &opp);
        assert!((root - direct).abs() < 1e-12, "{root} vs {direct}");
    }
}
