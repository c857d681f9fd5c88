use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::CovModel;
use crate::error::{Error, Result};
use crate::report::{Cell, Report, Table};
use crate::rng::{mix64, tag};
use crate::special::normal_quantile;
use crate::sums::{GaussianLaw, SumSampler, Workspace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NazarovRow {
    pub p: usize,
    pub a: f64,
    /// Anchor `y = Φ^{-1}(u) sqrt(diag Σ)`, labeled by its level `u`.
    pub y_label: String,
    pub u: f64,
    /// `Pr(Y <= y)` estimate.
    pub p_y: f64,
    /// `Pr(Y <= y + a)` estimate.
    pub p_y_plus_a: f64,
    pub diff_hat: f64,
    pub se: f64,
    /// `diff_hat / (a sqrt(log p))`; zero when `a = 0`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NazarovResult {
    pub rows: Vec<NazarovRow>,
    pub max_ratio: f64,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
}

impl NazarovResult {
    /// Largest ratio among rows with dimension `p`.
    pub fn max_ratio_at(&self, p: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.p == p)
            .map(|r| r.ratio)
            .fold(None, |m, x| Some(m.map_or(x, |m: f64| m.max(x))))
    }
}

impl Report for NazarovResult {
    fn table(&self) -> Option<Table> {
        let mut t = Table::new(vec!["p", "a", "y_label", "u", "p_y", "p_y_plus_a", "diff_hat", "se", "ratio"]);
        for r in &self.rows {
            t.push(vec![
                r.p.into(),
                r.a.into(),
                Cell::Text(r.y_label.clone()),
                r.u.into(),
                r.p_y.into(),
                r.p_y_plus_a.into(),
                r.diff_hat.into(),
                r.se.into(),
                r.ratio.into(),
            ]);
        }
        Some(t)
    }
}

/// Estimates `Pr(Y <= y + a) - Pr(Y <= y)` for `Y ~ law` at anchors
/// `y = Φ^{-1}(u_k) sd` with `u_k = k / (y_count + 1)`, `k = 1..=y_count`.
///
/// Both probabilities use the same `R` draws, so the difference is the
/// fraction of draws in the strip `{Y <= y + a} \ {Y <= y}`.
pub fn nazarov_check(law: &GaussianLaw, y_count: usize, a_grid: &[f64], r: usize, seed: u64) -> Result<NazarovResult> {
    let p = law.p();
    if p < 3 {
        return Err(Error::param("p", format!("must be at least 3, got {p}")));
    }
    if y_count == 0 {
        return Err(Error::param("y_count", "must be at least 1"));
    }
    if a_grid.is_empty() || a_grid.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::param("a_grid", "must be a nonempty list of nonnegative reals"));
    }
    if r == 0 {
        return Err(Error::param("R", "must be at least 1"));
    }
    let sd: Vec<f64> = law.covariance_diagonal().iter().map(|v| v.sqrt()).collect();
    if sd.iter().any(|s| *s <= 0.0) {
        return Err(Error::param("sigma", "diagonal must be positive"));
    }
    let levels: Vec<f64> = (1..=y_count).map(|k| k as f64 / (y_count + 1) as f64).collect();
    let t: Vec<f64> = levels.iter().map(|u| normal_quantile(*u)).collect();
    let common_sd = sd.iter().all(|s| *s == sd[0]).then_some(sd[0]);
    let na = a_grid.len();
    let ny = levels.len();
    // counts[k * (na + 1)]: Y <= y_k; counts[k * (na + 1) + 1 + i]: Y <= y_k + a_i.
    let width = na + 1;
    let base = mix64(seed, tag::CHECK);
    let counts = (0..r as u64)
        .into_par_iter()
        .fold(
            || (Workspace::default(), vec![0.0; p], vec![0u64; ny * width]),
            |(mut ws, mut w, mut counts), rep| {
                law.draw(mix64(base, rep), &mut ws, &mut w);
                for (k, tk) in t.iter().enumerate() {
                    // g = max_j (W_j - y_kj): Y <= y + a iff g <= a.
                    let g = match common_sd {
                        Some(s) => w.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x)) - tk * s,
                        None => w.iter().zip(&sd).fold(f64::NEG_INFINITY, |m, (x, s)| m.max(x - tk * s)),
                    };
                    let row = &mut counts[k * width..(k + 1) * width];
                    row[0] += (g <= 0.0) as u64;
                    for (c, a) in row[1..].iter_mut().zip(a_grid) {
                        *c += (g <= *a) as u64;
                    }
                }
                (ws, w, counts)
            },
        )
        .map(|(_, _, c)| c)
        .reduce(
            || vec![0u64; ny * width],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let rf = r as f64;
    let log_p = (p as f64).ln().sqrt();
    let mut rows = Vec::with_capacity(ny * na);
    for (k, u) in levels.iter().enumerate() {
        let row = &counts[k * width..(k + 1) * width];
        for (i, &a) in a_grid.iter().enumerate() {
            let strip = row[1 + i] - row[0];
            let d = strip as f64 / rf;
            rows.push(NazarovRow {
                p,
                a,
                y_label: format!("u={u:.4}"),
                u: *u,
                p_y: row[0] as f64 / rf,
                p_y_plus_a: row[1 + i] as f64 / rf,
                diff_hat: d,
                se: (d * (1.0 - d) / rf).sqrt(),
                ratio: if a > 0.0 { d / (a * log_p) } else { 0.0 },
            });
        }
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(NazarovResult { rows, max_ratio, r, seed })
}

/// [`nazarov_check`] across dimensions for a structured covariance model.
pub fn nazarov_scan(
    model: &CovModel,
    p_grid: &[usize],
    y_count: usize,
    a_grid: &[f64],
    r: usize,
    seed: u64,
) -> Result<NazarovResult> {
    if p_grid.is_empty() {
        return Err(Error::param("p_grid", "must be nonempty"));
    }
    let mut rows = Vec::new();
    for (i, &p) in p_grid.iter().enumerate() {
        let law = GaussianLaw::structured(model.clone(), p)?;
        let res = nazarov_check(&law, y_count, a_grid, r, mix64(seed, i as u64)).map_err(|e| e.at(format!("p={p}")))?;
        rows.extend(res.rows);
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(NazarovResult { rows, max_ratio, r, seed })
}
