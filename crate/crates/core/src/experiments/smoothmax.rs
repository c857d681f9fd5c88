use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{Cell, Report, Table};
use crate::rng::{mix64, stream, tag};

/// Components of `w` and `y` are drawn uniformly from this half-width.
const RANGE: f64 = 50.0;

/// `F_β(w) = β^{-1} log Σ_j exp(β (w_j - y_j))`, evaluated after shifting by
/// the maximum so no term overflows.
pub fn smooth_max(beta: f64, w: &[f64], y: &[f64]) -> f64 {
    let m = w.iter().zip(y).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = w.iter().zip(y).map(|(a, b)| (beta * ((a - b) - m)).exp()).sum();
    m + s.ln() / beta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothmaxCell {
    pub beta: f64,
    pub p: usize,
    pub trials: usize,
    /// Largest violation of `0 <= F - max <= log(p)/β` in this cell.
    pub max_violation: f64,
    /// Largest observed `F - max`.
    pub max_gap: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothmaxResult {
    pub max_violation: f64,
    pub cells: Vec<SmoothmaxCell>,
    pub seed: u64,
}

impl Report for SmoothmaxResult {
    fn table(&self) -> Option<Table> {
        let mut t = Table::new(vec!["beta", "p", "trials", "max_violation", "max_gap", "bound"]);
        for c in &self.cells {
            t.push(vec![
                c.beta.into(),
                c.p.into(),
                c.trials.into(),
                c.max_violation.into(),
                c.max_gap.into(),
                Cell::Float(c.bound),
            ]);
        }
        Some(t)
    }
}

/// Fixed stress patterns for `w - y`. All-equal entries attain the upper
/// bound. One dominant entry attains the lower bound while the rest underflow.
/// Alternating ±50 sits between the two.
fn adversarial(p: usize) -> Vec<Vec<f64>> {
    let equal = vec![RANGE; p];
    let mut dominant = vec![-RANGE; p];
    dominant[p / 2] = RANGE;
    let alternating = (0..p).map(|j| if j % 2 == 0 { RANGE } else { -RANGE }).collect();
    vec![equal, dominant, alternating]
}

/// Checks the smooth-max sandwich on random and adversarial pairs `(w, y)`
/// for every `β` and `p` in the grids. Each cell runs `trials` random pairs
/// plus the fixed patterns.
pub fn smoothmax_check(beta_grid: &[f64], p_grid: &[usize], trials: usize, seed: u64) -> Result<SmoothmaxResult> {
    if beta_grid.is_empty() || beta_grid.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(Error::param("beta_grid", "must be a nonempty list of positive reals"));
    }
    if p_grid.is_empty() || p_grid.contains(&0) {
        return Err(Error::param("p_grid", "must be a nonempty list of positive integers"));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let base = mix64(seed, tag::SMOOTH);
    let mut cells = Vec::new();
    for (bi, &beta) in beta_grid.iter().enumerate() {
        for (pi, &p) in p_grid.iter().enumerate() {
            let mut rng = stream(mix64(base, ((bi as u64) << 32) | pi as u64));
            let bound = (p as f64).ln() / beta;
            let (mut worst, mut max_gap) = (0.0f64, 0.0f64);
            let zeros = vec![0.0; p];
            let mut check = |w: &[f64], y: &[f64]| {
                let max = w.iter().zip(y).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
                let gap = smooth_max(beta, w, y) - max;
                max_gap = max_gap.max(gap);
                let v = (-gap).max(gap - bound);
                if v > worst {
                    worst = v;
                }
            };
            for pattern in adversarial(p) {
                check(&pattern, &zeros);
            }
            let (mut w, mut y) = (vec![0.0; p], vec![0.0; p]);
            for _ in 0..trials {
                for (a, b) in w.iter_mut().zip(y.iter_mut()) {
                    *a = rng.random_range(-RANGE..=RANGE);
                    *b = rng.random_range(-RANGE..=RANGE);
                }
                check(&w, &y);
            }
            cells.push(SmoothmaxCell {
                beta,
                p,
                trials,
                max_violation: worst,
                max_gap,
                bound,
            });
        }
    }
    let max_violation = cells.iter().map(|c| c.max_violation).fold(0.0, f64::max);
    Ok(SmoothmaxResult { max_violation, cells, seed })
}
