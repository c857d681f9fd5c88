use serde::{Deserialize, Serialize};

use crate::bounds::{d_terms, population_bounds, BoundParams};
use crate::datagen::{population_moments, DesignSpec};
use crate::error::{Error, Result};
use crate::geometry::sample_rectangle_family;
use crate::montecarlo::estimate_rho;
use crate::report::{Cell, Report, Table};
use crate::rng::{mix64, tag};

/// How the dimension grows with `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PRule {
    /// Constant `p`.
    Fixed { p: usize },
    /// `p = round(n^c)`.
    Power { c: f64 },
    /// `p = round(exp(n^c))`.
    Exp { c: f64 },
}

impl PRule {
    pub fn p_for(&self, n: usize) -> Result<usize> {
        let p = match *self {
            PRule::Fixed { p } => p as f64,
            PRule::Power { c } => (n as f64).powf(c).round(),
            PRule::Exp { c } => (n as f64).powf(c).exp().round(),
        };
        if !(p >= 3.0) || !p.is_finite() || p > 1e8 {
            return Err(Error::param("p_rule", format!("gives p = {p} at n = {n}; need 3 <= p <= 1e8")));
        }
        Ok(p as usize)
    }
}

/// The finite set family standing in for all hyperrectangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(default = "rectangles")]
    pub kind: String,
    #[serde(rename = "K")]
    pub k: usize,
}

fn rectangles() -> String {
    "rectangles".into()
}

/// Bound constants for a scan; `b` and `B_n` come from the design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanBoundParams {
    #[serde(rename = "K1", default = "one")]
    pub k1: f64,
    #[serde(rename = "K2", default = "one")]
    pub k2: f64,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for ScanBoundParams {
    fn default() -> Self {
        ScanBoundParams {
            k1: 1.0,
            k2: 1.0,
            q: None,
            alpha: None,
        }
    }
}

fn default_m_replications() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    /// Design template; its `p` is replaced by the rule's value at each `n`.
    pub design: DesignSpec,
    pub n_grid: Vec<usize>,
    pub p_rule: PRule,
    pub family: FamilySpec,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
    #[serde(default)]
    pub params: ScanBoundParams,
    /// Replications for the Monte Carlo `M` terms of the main bound.
    #[serde(default = "default_m_replications")]
    pub m_replications: usize,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::param("n_grid", "must be nonempty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("n_grid", "must be strictly increasing"));
        }
        if self.n_grid[0] < 4 {
            return Err(Error::param("n_grid", "all n must be at least 4"));
        }
        if self.family.kind != "rectangles" {
            return Err(Error::param("family.kind", format!("only `rectangles` is supported, got `{}`", self.family.kind)));
        }
        if self.family.k == 0 {
            return Err(Error::param("family.K", "must be at least 1"));
        }
        for &n in &self.n_grid {
            self.p_rule.p_for(n)?;
        }
        if let Some(a) = self.params.alpha {
            crate::bounds::check_alpha(a)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: usize,
    pub p: usize,
    pub rho_hat: f64,
    /// Standard error of the two-sample difference at the maximizing set.
    pub rho_se: f64,
    pub argmax_set_label: String,
    pub noise_floor: f64,
    /// True when `rho_hat <= noise_floor` and the row is left out of the fits.
    pub censored: bool,
    #[serde(rename = "D1")]
    pub d1: f64,
    pub main_bound: f64,
    #[serde(rename = "B_n")]
    pub b_n: f64,
    #[serde(rename = "L_n")]
    pub l_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    /// Least-squares slope of `log rho_hat` on `log n` over uncensored rows.
    pub slope: Option<f64>,
    /// Standard error of `slope` propagated from the Monte Carlo errors.
    pub slope_se: Option<f64>,
    /// Slope of `log rho_hat` on `log log p`, when `p` varies.
    pub slope_log_p: Option<f64>,
    pub spec: ScanSpec,
}

impl Report for ScanResult {
    fn table(&self) -> Option<Table> {
        let mut t = Table::new(vec!["n", "p", "rho_hat", "rho_se", "noise_floor", "censored", "D1", "main_bound"]);
        for r in &self.rows {
            t.push(vec![
                r.n.into(),
                r.p.into(),
                r.rho_hat.into(),
                r.rho_se.into(),
                r.noise_floor.into(),
                Cell::Text(r.censored.to_string()),
                r.d1.into(),
                r.main_bound.into(),
            ]);
        }
        Some(t)
    }
}

/// Simple least squares of `y` on `x` with the slope's standard error from
/// known per-point standard deviations `sd`.
pub(crate) fn ols_slope(x: &[f64], y: &[f64], sd: &[f64]) -> Option<(f64, f64)> {
    let m = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let xbar = x.iter().sum::<f64>() / m;
    let ybar = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = x.iter().zip(y).map(|(a, b)| (a - xbar) * (b - ybar)).sum::<f64>() / sxx;
    let var: f64 = x.iter().zip(sd).map(|(a, s)| ((a - xbar) / sxx).powi(2) * s * s).sum();
    Some((slope, var.sqrt()))
}

/// Runs [`estimate_rho`] and the bound evaluations at each grid point, then
/// fits the decay rate over rows above the noise floor.
pub fn rate_scan(spec: &ScanSpec) -> Result<ScanResult> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.n_grid.len());
    for (i, &n) in spec.n_grid.iter().enumerate() {
        let p = spec.p_rule.p_for(n)?;
        let cell = || format!("n={n}, p={p}");
        let row = (|| -> Result<ScanRow> {
            let mut design = spec.design.clone();
            design.p = p;
            design.validate()?;
            let moments = population_moments(&design)?;
            let sigma = design.covariance_matrix();
            // One family per dimension, so rows sharing p compare the same sets.
            let family = sample_rectangle_family(p, spec.family.k, &sigma.diagonal(), mix64(spec.seed, p as u64))?;
            let est = estimate_rho(&design, n, &sigma, &family, spec.r, mix64(mix64(spec.seed, tag::SCAN), i as u64))?;
            let params = BoundParams {
                k1: spec.params.k1,
                k2: spec.params.k2,
                b: moments.b_lower,
                b_n: moments.b_n,
                q: spec.params.q,
                alpha: spec.params.alpha,
            };
            let bounds = population_bounds(&design, n, &params, spec.m_replications, mix64(spec.seed, n as u64))?;
            let d = d_terms(moments.b_n, p, n, spec.params.q, spec.params.alpha)?;
            let se = est
                .per_set
                .iter()
                .find(|s| s.label == est.argmax_set_label)
                .map_or(0.0, |s| s.se_diff);
            Ok(ScanRow {
                n,
                p,
                rho_hat: est.sup_diff,
                rho_se: se,
                argmax_set_label: est.argmax_set_label.clone(),
                noise_floor: est.noise_floor,
                censored: est.sup_diff <= est.noise_floor,
                d1: d.d1,
                main_bound: bounds.main_bound,
                b_n: moments.b_n,
                l_n: moments.l_n_population,
            })
        })()
        .map_err(|e| e.at(cell()))?;
        rows.push(row);
    }
    let kept: Vec<&ScanRow> = rows.iter().filter(|r| !r.censored).collect();
    let y: Vec<f64> = kept.iter().map(|r| r.rho_hat.ln()).collect();
    let sd: Vec<f64> = kept.iter().map(|r| r.rho_se / r.rho_hat).collect();
    let xn: Vec<f64> = kept.iter().map(|r| (r.n as f64).ln()).collect();
    let fit_n = ols_slope(&xn, &y, &sd);
    let xp: Vec<f64> = kept.iter().map(|r| (r.p as f64).ln().ln()).collect();
    let fit_p = ols_slope(&xp, &y, &sd);
    Ok(ScanResult {
        slope: fit_n.map(|f| f.0),
        slope_se: fit_n.map(|f| f.1),
        slope_log_p: fit_p.map(|f| f.0),
        rows,
        spec: spec.clone(),
    })
}
