//! Three-state discrete lattice with uniform transitions, used as an exact hand-checkable fixture
//! for the swap and Bermudan recursions.

use serde::{Deserialize, Serialize};

/// LIBOR fixings per date and state; every state moves to each state of the next date with
/// probability `1 / states`, and each period has unit accrual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyLattice {
    pub libor_today: f64,
    /// `libor[n][state]` for dates `T_1 .. T_N`.
    pub libor: Vec<Vec<f64>>,
    pub notional: f64,
}

impl ToyLattice {
    /// Base tree: `L_1 = {7, 5.5, 4}%`, `L_2 = {8, 6, 4}%`.
    pub fn base() -> Self {
        Self::with(vec![vec![0.07, 0.055, 0.04], vec![0.08, 0.06, 0.04]])
    }

    /// Wider tails, same centre.
    pub fn tree_a() -> Self {
        Self::with(vec![vec![0.0705, 0.055, 0.0395], vec![0.0805, 0.06, 0.0395]])
    }

    /// Wider tails with a shifted centre.
    pub fn tree_b() -> Self {
        Self::with(vec![vec![0.0705, 0.056, 0.0395], vec![0.0805, 0.059, 0.0395]])
    }

    fn with(libor: Vec<Vec<f64>>) -> Self {
        Self { libor_today: 0.055, libor, notional: 10_000.0 }
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Payer swap values per date and state: the coupon fixed now plus the discounted average
    /// of next date's values.
    pub fn swap_tree(&self, strike: f64) -> Vec<Vec<f64>> {
        let n = self.libor.len();
        let mut out = vec![Vec::new(); n];
        for i in (0..n).rev() {
            out[i] = self.libor[i]
                .iter()
                .map(|&l| {
                    let coupon = self.notional * (l - strike);
                    if i + 1 == n {
                        coupon
                    } else {
                        coupon + Self::mean(&out[i + 1]) / (1.0 + l)
                    }
                })
                .collect();
        }
        out
    }

    /// Payer Bermudan exercisable on every date; returns today's value and the option tree.
    pub fn bermudan(&self, strike: f64) -> (f64, Vec<Vec<f64>>) {
        let sv = self.swap_tree(strike);
        let n = self.libor.len();
        let mut v = vec![Vec::new(); n];
        for i in (0..n).rev() {
            v[i] = self.libor[i]
                .iter()
                .zip(&sv[i])
                .map(|(&l, &s)| {
                    let cont = if i + 1 == n { 0.0 } else { Self::mean(&v[i + 1]) / (1.0 + l) };
                    if s > cont {
                        s
                    } else {
                        cont
                    }
                })
                .collect();
        }
        (Self::mean(&v[0]) / (1.0 + self.libor_today), v)
    }
}
