//! Error-bound quantities: the moment functionals `L_n` and `M_n(φ)` with
//! their empirical analogs, the scale `φ_n`, the main bound, the rate terms
//! `D1`/`D2q`, covariance discrepancies and the ψ_α Orlicz norm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{population_moments, Dataset, DesignKind, DesignSpec, Marginal, RowSampler, TRUNC_EXP_CUTOFF};
use crate::error::{Error, Result};
use crate::geometry::{SetDescriptor, SetFamily};
use crate::report::{Report, Table};
use crate::rng::{mix64, tag};
use crate::special::bisect_increasing;
use crate::sums::{CovMatrix, GaussianLaw, MultiplierSampler, SumSampler, Workspace};

/// Constants and design parameters entering the bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    #[serde(rename = "K1", default = "one")]
    pub k1: f64,
    #[serde(rename = "K2", default = "one")]
    pub k2: f64,
    pub b: f64,
    #[serde(rename = "B_n")]
    pub b_n: f64,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl BoundParams {
    pub fn new(b: f64, b_n: f64) -> Self {
        BoundParams {
            k1: 1.0,
            k2: 1.0,
            b,
            b_n,
            q: None,
            alpha: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("K1", self.k1), ("K2", self.k2), ("b", self.b), ("B_n", self.b_n)] {
            positive(key, v)?;
        }
        if let Some(q) = self.q {
            check_q(q)?;
        }
        if let Some(a) = self.alpha {
            check_alpha(a)?;
        }
        Ok(())
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(key, format!("must be positive and finite, got {v}")))
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 2.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::param("q", format!("must exceed 2, got {q}")))
    }
}

/// `alpha` must lie in `(0, 1/e)`.
pub fn check_alpha(a: f64) -> Result<()> {
    if a > 0.0 && a < (-1.0f64).exp() {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("must lie in (0, 1/e), got {a}")))
    }
}

fn check_np(n: usize, p: usize) -> Result<()> {
    if p < 3 {
        return Err(Error::param("p", format!("must be at least 3, got {p}")));
    }
    if n < 4 {
        return Err(Error::param("n", format!("must be at least 4, got {n}")));
    }
    Ok(())
}

/// Monte Carlo mean with its standard error. `exact` marks closed-form values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    #[serde(rename = "R")]
    pub r: usize,
    pub exact: bool,
}

impl MeanEstimate {
    pub fn exact(mean: f64) -> Self {
        MeanEstimate {
            mean,
            se: 0.0,
            r: 0,
            exact: true,
        }
    }

    fn from_values(values: &[f64]) -> Self {
        let r = values.len();
        let mean = values.iter().sum::<f64>() / r as f64;
        let var = if r > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1) as f64
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            se: (var / r as f64).sqrt(),
            r,
            exact: false,
        }
    }
}

/// Truncation level `sqrt(n) / (4 φ log p)` in the `M` functionals.
pub fn m_threshold(n: usize, p: usize, phi: f64) -> f64 {
    (n as f64).sqrt() / (4.0 * phi * (p as f64).ln())
}

#[inline]
fn truncated_cube(row: &[f64], threshold: f64) -> f64 {
    let m = row.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m > threshold {
        m * m * m
    } else {
        0.0
    }
}

/// `max_j n^{-1} sum_i |X_ij - mean_j|^3`.
pub fn l_hat(dataset: &Dataset) -> f64 {
    let means = dataset.column_means();
    let mut acc = vec![0.0; dataset.p()];
    for row in dataset.rows() {
        for ((a, x), m) in acc.iter_mut().zip(row).zip(&means) {
            *a += (x - m).abs().powi(3);
        }
    }
    acc.iter().fold(0.0f64, |a, s| a.max(s / dataset.n() as f64))
}

fn check_phi(phi: f64) -> Result<()> {
    if phi >= 1.0 && !phi.is_nan() {
        Ok(())
    } else {
        Err(Error::param("phi", format!("must be at least 1, got {phi}")))
    }
}

/// Empirical `M_{n,X}(φ)` on centered rows.
pub fn m_hat_x(dataset: &Dataset, phi: f64) -> Result<f64> {
    check_phi(phi)?;
    if dataset.p() < 3 {
        return Err(Error::param("p", "must be at least 3"));
    }
    let thr = m_threshold(dataset.n(), dataset.p(), phi);
    let centered = dataset.centered();
    let total: f64 = centered.chunks_exact(dataset.p()).map(|row| truncated_cube(row, thr)).sum();
    Ok(total / dataset.n() as f64)
}

/// Mean of `f(draw)` over `r` draws of `sampler` with replication seeds
/// `mix64(seed, k)`; summation is sequential so results do not depend on the
/// worker count.
fn mc_mean<S: SumSampler + ?Sized, F: Fn(&[f64]) -> f64 + Sync>(sampler: &S, r: usize, seed: u64, f: F) -> MeanEstimate {
    let p = sampler.p();
    let values: Vec<f64> = (0..r as u64)
        .into_par_iter()
        .map_init(
            || (Workspace::default(), vec![0.0; p]),
            |(ws, out), k| {
                sampler.draw(mix64(seed, k), ws, out);
                f(out)
            },
        )
        .collect();
    MeanEstimate::from_values(&values)
}

/// Empirical `M_{n,Y}(φ)`: Monte Carlo over multiplier-bootstrap draws.
pub fn m_hat_y(dataset: &Dataset, phi: f64, r: usize, seed: u64) -> Result<MeanEstimate> {
    check_phi(phi)?;
    if r == 0 {
        return Err(Error::param("R", "must be at least 1"));
    }
    if dataset.p() < 3 {
        return Err(Error::param("p", "must be at least 3"));
    }
    let thr = m_threshold(dataset.n(), dataset.p(), phi);
    let sampler = MultiplierSampler::new(dataset);
    Ok(mc_mean(&sampler, r, mix64(seed, tag::BOOT), |w| truncated_cube(w, thr)))
}

/// Almost-sure bound on `max_j |X_ij|`, when the design is bounded.
fn sup_norm_bound(design: &DesignSpec) -> Option<f64> {
    let worst = (0..design.p)
        .map(|j| design.covariance.coefficients(j).iter().map(|c| c.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    match design.marginal() {
        Marginal::Rademacher => Some(worst),
        Marginal::TruncExp { lambda } => Some(lambda * TRUNC_EXP_CUTOFF * worst),
        Marginal::Uniform { h } => Some(h * worst),
        Marginal::Pareto { .. } | Marginal::Gaussian => None,
    }
}

/// Population `M_{n,X}(φ)` and `M_{n,Y}(φ)` for an i.i.d. design. Bounded
/// designs whose support lies under the threshold give exactly 0 for the X
/// part. Rademacher is evaluated in closed form. Other designs are estimated
/// from `r` fresh draws.
pub fn population_m_terms(
    design: &DesignSpec,
    n: usize,
    phi: f64,
    r: usize,
    seed: u64,
) -> Result<(MeanEstimate, MeanEstimate)> {
    design.validate()?;
    check_phi(phi)?;
    check_np(n, design.p)?;
    if r == 0 {
        return Err(Error::param("R", "must be at least 1"));
    }
    let thr = m_threshold(n, design.p, phi);
    let m_x = match (&design.kind, sup_norm_bound(design)) {
        (DesignKind::Rademacher, _) => MeanEstimate::exact(if 1.0 > thr { 1.0 } else { 0.0 }),
        (_, Some(bound)) if bound <= thr => MeanEstimate::exact(0.0),
        _ => {
            let rows = RowSampler::new(design)?;
            mc_mean(&RowDraw(&rows), r, mix64(seed, tag::X_SIDE), |w| truncated_cube(w, thr))
        }
    };
    let gauss = GaussianLaw::for_design(design)?;
    let m_y = mc_mean(&gauss, r, mix64(seed, tag::Y_SIDE), |w| truncated_cube(w, thr));
    Ok((m_x, m_y))
}

/// One observation of a design as a sampler.
struct RowDraw<'a>(&'a RowSampler);

impl SumSampler for RowDraw<'_> {
    fn p(&self) -> usize {
        self.0.p()
    }

    fn draw(&self, seed: u64, _ws: &mut Workspace, out: &mut [f64]) {
        self.0.row(seed, 0, out);
    }
}

/// `φ_n = K2 (L̄² log⁴p / n)^{-1/6}`.
pub fn phi_n(l_bar: f64, p: usize, n: usize, k2: f64) -> Result<f64> {
    positive("L_bar", l_bar)?;
    positive("K2", k2)?;
    check_np(n, p)?;
    let lp = (p as f64).ln();
    Ok(k2 * (l_bar * l_bar * lp.powi(4) / n as f64).powf(-1.0 / 6.0))
}

/// `K1 [ (L̄² log⁷p / n)^{1/6} + M_n / L̄ ]`.
pub fn clt_bound(l_bar: f64, m_n: f64, p: usize, n: usize, k1: f64) -> Result<f64> {
    positive("L_bar", l_bar)?;
    positive("K1", k1)?;
    if !(m_n >= 0.0) || !m_n.is_finite() {
        return Err(Error::param("M_n", format!("must be finite and nonnegative, got {m_n}")));
    }
    check_np(n, p)?;
    let lp = (p as f64).ln();
    Ok(k1 * ((l_bar * l_bar * lp.powi(7) / n as f64).powf(1.0 / 6.0) + m_n / l_bar))
}

/// Rate terms under the exponential (`D1`) and polynomial (`D2q`) moment
/// conditions, plus their bootstrap versions at confidence level `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DTerms {
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2q")]
    pub d2q: Option<f64>,
    #[serde(rename = "D1_alpha")]
    pub d1_alpha: Option<f64>,
    #[serde(rename = "D2q_alpha")]
    pub d2q_alpha: Option<f64>,
}

pub fn d_terms(b_n: f64, p: usize, n: usize, q: Option<f64>, alpha: Option<f64>) -> Result<DTerms> {
    positive("B_n", b_n)?;
    check_np(n, p)?;
    if let Some(q) = q {
        check_q(q)?;
    }
    if let Some(a) = alpha {
        check_alpha(a)?;
    }
    let nf = n as f64;
    let lpn = (p as f64 * nf).ln();
    let b2 = b_n * b_n;
    let d1 = (b2 * lpn.powi(7) / nf).powf(1.0 / 6.0);
    let d2q = q.map(|q| (b2 * lpn.powi(3) / nf.powf(1.0 - 2.0 / q)).powf(1.0 / 3.0));
    let d1_alpha = alpha.map(|a| (b2 * lpn.powi(5) * (1.0 / a).ln().powi(2) / nf).powf(1.0 / 6.0));
    let d2q_alpha = match (q, alpha) {
        (Some(q), Some(a)) => Some((b2 * lpn.powi(3) / (a.powf(2.0 / q) * nf.powf(1.0 - 2.0 / q))).powf(1.0 / 3.0)),
        _ => None,
    };
    Ok(DTerms {
        d1,
        d2q,
        d1_alpha,
        d2q_alpha,
    })
}

fn check_same_p(a: &CovMatrix, b: &CovMatrix) -> Result<()> {
    if a.p() == b.p() {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: b.p(),
            got: a.p(),
        })
    }
}

/// `max_{j,k} |Σ̂_jk - Σ_jk|`.
pub fn delta_nr(sigma_hat: &CovMatrix, sigma: &CovMatrix) -> Result<f64> {
    check_same_p(sigma_hat, sigma)?;
    Ok(sigma_hat
        .data()
        .iter()
        .zip(sigma.data())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs())))
}

/// Outward normals of a set: polytope facets, or `±e_j` for each finite
/// rectangle side.
fn normals_of(set: &SetDescriptor) -> Result<Vec<Vec<f64>>> {
    match set {
        SetDescriptor::Polytope(poly) => Ok(poly.facets().iter().map(|f| f.v.clone()).collect()),
        SetDescriptor::Rect(r) => {
            let p = r.p();
            let mut out = Vec::new();
            for j in 0..p {
                if r.upper()[j].is_finite() {
                    let mut v = vec![0.0; p];
                    v[j] = 1.0;
                    out.push(v);
                }
                if r.lower()[j].is_finite() {
                    let mut v = vec![0.0; p];
                    v[j] = -1.0;
                    out.push(v);
                }
            }
            Ok(out)
        }
        SetDescriptor::Sparse(_) => Err(Error::Unsupported(
            "covariance discrepancy needs polytope or rectangle members; convert sparse sets first".into(),
        )),
    }
}

/// `sup_A max_{v1,v2} |v1'(Σ̂ - Σ)v2|` over facet normals of each member.
pub fn delta_n_family(sigma_hat: &CovMatrix, sigma: &CovMatrix, family: &SetFamily) -> Result<f64> {
    check_same_p(sigma_hat, sigma)?;
    if family.p() != sigma.p() {
        return Err(Error::Dimension {
            expected: sigma.p(),
            got: family.p(),
        });
    }
    let p = sigma.p();
    let diff: Vec<f64> = sigma_hat.data().iter().zip(sigma.data()).map(|(a, b)| a - b).collect();
    let mut worst = 0.0f64;
    for member in family.sets() {
        let normals = normals_of(&member.set)?;
        let images: Vec<Vec<f64>> = normals
            .iter()
            .map(|v| (0..p).map(|j| (0..p).map(|k| diff[j * p + k] * v[k]).sum()).collect())
            .collect();
        for v1 in &normals {
            for dv2 in &images {
                let s: f64 = v1.iter().zip(dv2).map(|(a, b)| a * b).sum();
                worst = worst.max(s.abs());
            }
        }
    }
    Ok(worst)
}

/// Plug-in ψ_α norm: the `λ` at which the sample mean of
/// `exp((|ξ|/λ)^α) - 1` equals 1, found by bisection to 1e-9 relative accuracy.
pub fn orlicz_norm(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::param("samples", "must be nonempty"));
    }
    positive("alpha", alpha)?;
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("samples", "must be finite"));
    }
    let top = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if top == 0.0 {
        return Ok(0.0);
    }
    let scaled: Vec<f64> = samples.iter().map(|x| x.abs() / top).collect();
    // Work with t = 1/λ (in units of the largest sample), where the mean is increasing.
    let mean_psi = |t: f64| scaled.iter().map(|x| ((x * t).powf(alpha)).exp_m1()).sum::<f64>() / scaled.len() as f64;
    // At t = (ln 2)^{1/α} every term is at most 1; at t_hi the largest term alone exceeds len.
    let lo = 2f64.ln().powf(1.0 / alpha);
    let hi = (1.0 + scaled.len() as f64).ln().powf(1.0 / alpha) * 1.0001;
    let t = bisect_increasing(mean_psi, 1.0, lo, hi.max(lo));
    Ok(top / t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Population,
    Empirical,
}

/// Every bound quantity for one `(n, p)` configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "L_n")]
    pub l_n: f64,
    #[serde(rename = "M_x")]
    pub m_x: f64,
    #[serde(rename = "M_y")]
    pub m_y: f64,
    pub m_x_se: f64,
    pub m_y_se: f64,
    pub phi_n: f64,
    /// The `φ` at which the `M` terms are evaluated: `max(φ_n, 1)`.
    pub phi_eval: f64,
    pub main_bound: f64,
    #[serde(rename = "D1")]
    pub d1: Option<f64>,
    #[serde(rename = "D2q")]
    pub d2q: Option<f64>,
    #[serde(rename = "D1_alpha")]
    pub d1_alpha: Option<f64>,
    #[serde(rename = "D2q_alpha")]
    pub d2q_alpha: Option<f64>,
    pub delta_nr: Option<f64>,
    pub params: BoundParams,
    pub provenance: Provenance,
    pub n: usize,
    pub p: usize,
    #[serde(rename = "R")]
    pub r: usize,
}

impl Report for BoundReport {
    fn table(&self) -> Option<Table> {
        let mut t = Table::new(vec!["quantity", "value"]);
        let rows: [(&str, Option<f64>); 13] = [
            ("L_n", Some(self.l_n)),
            ("M_x", Some(self.m_x)),
            ("M_y", Some(self.m_y)),
            ("M_x_se", Some(self.m_x_se)),
            ("M_y_se", Some(self.m_y_se)),
            ("phi_n", Some(self.phi_n)),
            ("phi_eval", Some(self.phi_eval)),
            ("main_bound", Some(self.main_bound)),
            ("D1", self.d1),
            ("D2q", self.d2q),
            ("D1_alpha", self.d1_alpha),
            ("D2q_alpha", self.d2q_alpha),
            ("delta_nr", self.delta_nr),
        ];
        for (k, v) in rows {
            t.push(vec![k.into(), v.into()]);
        }
        Some(t)
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    l_n: f64,
    m: (MeanEstimate, MeanEstimate),
    phi: f64,
    phi_eval: f64,
    params: &BoundParams,
    provenance: Provenance,
    n: usize,
    p: usize,
    r: usize,
    delta: Option<f64>,
) -> Result<BoundReport> {
    let main = clt_bound(l_n, m.0.mean + m.1.mean, p, n, params.k1)?;
    let d = d_terms(params.b_n, p, n, params.q, params.alpha)?;
    Ok(BoundReport {
        l_n,
        m_x: m.0.mean,
        m_y: m.1.mean,
        m_x_se: m.0.se,
        m_y_se: m.1.se,
        phi_n: phi,
        phi_eval,
        main_bound: main,
        d1: Some(d.d1),
        d2q: d.d2q,
        d1_alpha: d.d1_alpha,
        d2q_alpha: d.d2q_alpha,
        delta_nr: delta,
        params: params.clone(),
        provenance,
        n,
        p,
        r,
    })
}

/// Bounds from population moments of `design` at sample size `n`.
/// `L̄_n` is taken equal to the population `L_n`.
pub fn population_bounds(design: &DesignSpec, n: usize, params: &BoundParams, r: usize, seed: u64) -> Result<BoundReport> {
    params.validate()?;
    check_np(n, design.p)?;
    let moments = population_moments(design)?;
    let l_n = moments.l_n_population;
    let phi = phi_n(l_n, design.p, n, params.k2)?;
    let phi_eval = phi.max(1.0);
    let m = population_m_terms(design, n, phi_eval, r, seed)?;
    assemble(l_n, m, phi, phi_eval, params, Provenance::Population, n, design.p, r, None)
}

/// Bounds from a fixed dataset: `L̂_n`, `M̂_{n,X}`, and Monte Carlo `M̂_{n,Y}`.
/// When `sigma` is given, `Δ_{n,r}` against it is reported.
pub fn empirical_bounds(
    dataset: &Dataset,
    params: &BoundParams,
    sigma: Option<&CovMatrix>,
    r: usize,
    seed: u64,
) -> Result<BoundReport> {
    params.validate()?;
    let (n, p) = (dataset.n(), dataset.p());
    check_np(n, p)?;
    let l_n = l_hat(dataset);
    if l_n <= 0.0 {
        return Err(Error::Numerical("empirical third moment is zero; data are constant".into()));
    }
    let phi = phi_n(l_n, p, n, params.k2)?;
    let phi_eval = phi.max(1.0);
    let m_x = MeanEstimate::exact(m_hat_x(dataset, phi_eval)?);
    let m_y = m_hat_y(dataset, phi_eval, r, seed)?;
    let delta = match sigma {
        Some(s) => Some(delta_nr(&crate::sums::empirical_covariance(dataset)?, s)?),
        None => None,
    };
    assemble(l_n, (m_x, m_y), phi, phi_eval, params, Provenance::Empirical, n, p, r, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Facet, Hyperrectangle, Polytope};
    use crate::sums::CovFlavor;
    use proptest::prelude::*;

    fn ds(n: usize, p: usize, v: Vec<f64>) -> Dataset {
        Dataset::from_rows(n, p, v).unwrap()
    }

    #[test]
    fn l_hat_examples() {
        assert_eq!(l_hat(&ds(2, 1, vec![1.0, -1.0])), 1.0);
        assert_eq!(l_hat(&ds(2, 1, vec![2.0, 0.0])), 1.0);
        assert_eq!(l_hat(&ds(2, 2, vec![1.0, 2.0, -1.0, -2.0])), 8.0);
    }

    #[test]
    fn m_hat_x_examples() {
        // n=4, p=3: threshold sqrt(4)/(4 log 3) = 0.455 at phi=1.
        let small = ds(4, 3, vec![0.1, -0.1, 0.0, -0.1, 0.1, 0.0, 0.1, 0.1, 0.0, -0.1, -0.1, 0.0]);
        assert_eq!(m_hat_x(&small, 1.0).unwrap(), 0.0);
        // Centered column (10, -10/3, -10/3, -10/3): every row clears the
        // threshold, since centering forces the other rows to absorb -10.
        let mut v = vec![0.0; 12];
        v[0] = 10.0;
        for i in 1..4 {
            v[3 * i] = -10.0 / 3.0;
        }
        let big = ds(4, 3, v);
        let c = big.centered();
        assert!((c[0] - 10.0).abs() < 1e-12);
        let hand = (1000.0 + 3.0 * 1000.0 / 27.0) / 4.0;
        assert!((m_hat_x(&big, 1.0).unwrap() - hand).abs() < 1e-9);
        // Huge phi: every row counts.
        let full: f64 = c.chunks(3).map(|r| r.iter().fold(0.0f64, |a, x| a.max(x.abs())).powi(3)).sum::<f64>() / 4.0;
        assert!((m_hat_x(&big, 1e12).unwrap() - full).abs() < 1e-9);
        assert!(m_hat_x(&big, 0.5).is_err());
    }

    #[test]
    fn m_hat_y_identical_rows_is_zero() {
        let d = ds(3, 3, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let e = m_hat_y(&d, 1.0, 500, 1).unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn m_hat_y_untruncated_matches_brute_force_oracle() {
        // Standardized data; threshold ~0 so the functional is E max_j |S_j|^3
        // with S ~ N(0, Σ̂). The oracle draws N(0, Σ̂) directly.
        let design = DesignSpec::new(DesignKind::GaussianExact, 3);
        let d = crate::datagen::sample_dataset(&design, 400, 5).unwrap();
        let est = m_hat_y(&d, 1e12, 40_000, 9).unwrap();
        let sigma_hat = crate::sums::empirical_covariance(&d).unwrap();
        let law = GaussianLaw::from_cov(&sigma_hat, 1e-12).unwrap();
        let oracle = mc_mean(&law, 2_000_000, 77, |w| w.iter().fold(0.0f64, |a, x| a.max(x.abs())).powi(3));
        assert!((est.mean - oracle.mean).abs() < 5.0 * (est.se + oracle.se), "{est:?} {oracle:?}");
    }

    #[test]
    fn m_hat_y_consistent_across_r() {
        let design = DesignSpec::new(DesignKind::GaussianExact, 5);
        let d = crate::datagen::sample_dataset(&design, 200, 1).unwrap();
        let a = m_hat_y(&d, 1.0, 5_000, 3).unwrap();
        let b = m_hat_y(&d, 1.0, 10_000, 3).unwrap();
        assert!((a.mean - b.mean).abs() < 6.0 * (a.se + b.se));
    }

    #[test]
    fn phi_and_clt_worked_values() {
        // Reference values from a 30-digit evaluation of the closed forms.
        let v = phi_n(1.0, 3, 64, 1.0).unwrap();
        assert!((v - 1.878_453_118_453_997_9).abs() < 1e-12, "{v}");
        assert!((phi_n(1.0, 3, 64, 2.0).unwrap() - 2.0 * v).abs() < 1e-12);
        assert!((phi_n(1.0, 3, 64 * 64, 1.0).unwrap() - 2.0 * v).abs() < 1e-12);
        let c = clt_bound(1.0, 0.0, 3, 1000, 1.0).unwrap();
        assert!((c - 0.352_900_164_930_219_86).abs() < 1e-12, "{c}");
        assert!((clt_bound(1.0, 1.0, 3, 1000, 1.0).unwrap() - (c + 1.0)).abs() < 1e-12);
        assert!((clt_bound(1.0, 0.0, 3, 1000, 3.0).unwrap() - 3.0 * c).abs() < 1e-12);
        assert!(phi_n(1.0, 2, 64, 1.0).is_err());
        assert!(clt_bound(1.0, 0.0, 3, 3, 1.0).is_err());
    }

    #[test]
    fn d_term_worked_values() {
        let d = d_terms(1.0, 100, 1000, Some(4.0), Some(0.05)).unwrap();
        assert!((d.d1 - 5.470_789_128_291_795).abs() < 1e-12, "{}", d.d1);
        assert!((d.d2q.unwrap() - 3.640_706_700_105_900_5).abs() < 1e-12);
        assert!((d.d2q_alpha.unwrap() - 5.998_242_582_722_42).abs() < 1e-12);
        assert!(d.d1_alpha.is_some());
        let bare = d_terms(1.0, 100, 1000, None, None).unwrap();
        assert!(bare.d2q.is_none() && bare.d1_alpha.is_none() && bare.d2q_alpha.is_none());
        assert!(d_terms(1.0, 100, 1000, Some(2.0), None).is_err());
        assert!(d_terms(1.0, 100, 1000, None, Some(0.5)).is_err());
    }

    #[test]
    fn d1_scales_with_b_n() {
        let a = d_terms(1.3, 50, 500, None, None).unwrap().d1;
        let b = d_terms(2.6, 50, 500, None, None).unwrap().d1;
        assert!((b / a - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn delta_examples() {
        let id = CovMatrix::identity(3);
        assert_eq!(delta_nr(&id, &id).unwrap(), 0.0);
        let mut data = id.data().to_vec();
        data[1] += 0.3;
        data[3] += 0.3;
        let pert = CovMatrix::new(3, data, CovFlavor::Empirical).unwrap();
        assert!((delta_nr(&pert, &id).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(delta_nr(&id.scaled(2.0), &id).unwrap(), 1.0);
        assert!(delta_nr(&CovMatrix::identity(2), &id).is_err());
    }

    #[test]
    fn delta_family_examples() {
        let zero = CovMatrix::new(2, vec![0.0; 4], CovFlavor::Population).unwrap();
        let off = CovMatrix::new(2, vec![0.0, 0.2, 0.2, 0.0], CovFlavor::Empirical).unwrap();
        let poly = Polytope::new(vec![Facet::new(vec![1.0, 0.0], 1.0), Facet::new(vec![0.0, 1.0], 1.0)]).unwrap();
        let fam = SetFamily::from_sets(vec![SetDescriptor::Polytope(poly)]).unwrap();
        assert!((delta_n_family(&off, &zero, &fam).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(delta_n_family(&zero, &zero, &fam).unwrap(), 0.0);

        // Axis-aligned normals reduce to the entrywise difference on used coordinates.
        let s = CovMatrix::identity(3);
        let sh = CovMatrix::new(3, vec![1.0, 0.1, 0.5, 0.1, 1.3, 0.0, 0.5, 0.0, 1.0], CovFlavor::Empirical).unwrap();
        let rect = Hyperrectangle::new(vec![f64::NEG_INFINITY; 3], vec![1.0, 1.0, f64::INFINITY]).unwrap();
        let fam = SetFamily::from_sets(vec![SetDescriptor::Rect(rect)]).unwrap();
        assert!((delta_n_family(&sh, &s, &fam).unwrap() - 0.3).abs() < 1e-12);
        // A difference supported off the used coordinates is invisible.
        let rect = Hyperrectangle::new(vec![f64::NEG_INFINITY; 3], vec![f64::INFINITY, f64::INFINITY, 0.0]).unwrap();
        let only_third = SetFamily::from_sets(vec![SetDescriptor::Rect(rect)]).unwrap();
        let sh2 = CovMatrix::new(3, vec![1.5, 0.1, 0.0, 0.1, 1.0, 0.0, 0.0, 0.0, 1.0], CovFlavor::Empirical).unwrap();
        assert_eq!(delta_n_family(&sh2, &s, &only_third).unwrap(), 0.0);
    }

    #[test]
    fn orlicz_examples() {
        assert_eq!(orlicz_norm(&[0.0, 0.0], 1.0).unwrap(), 0.0);
        let a1 = orlicz_norm(&[1.0; 5], 1.0).unwrap();
        assert!((a1 - 1.0 / 2f64.ln()).abs() < 1e-8);
        let a2 = orlicz_norm(&[1.0; 5], 2.0).unwrap();
        assert!((a2 - 1.0 / 2f64.ln().sqrt()).abs() < 1e-8);
        assert!(orlicz_norm(&[], 1.0).is_err());
    }

    #[test]
    fn population_rademacher_bounds_are_closed_form() {
        let design = DesignSpec::new(DesignKind::Rademacher, 10);
        let params = BoundParams::new(1.0, 1.0);
        let rep = population_bounds(&design, 100, &params, 1000, 1).unwrap();
        assert_eq!(rep.l_n, 1.0);
        // threshold 10/(4 φ log 10) with φ = (log⁴10/100)^{-1/6} is 0.88 < 1, so M_x = 1.
        assert_eq!(rep.m_x, 1.0);
        assert_eq!(rep.m_x_se, 0.0);
        // At n = 10⁴ the threshold is about 4.1 and every entry sits below it.
        let large = population_bounds(&design, 10_000, &params, 1000, 1).unwrap();
        assert_eq!(large.m_x, 0.0);
        assert!(rep.m_y > 0.0);
        let expect = clt_bound(1.0, rep.m_x + rep.m_y, 10, 100, 1.0).unwrap();
        assert_eq!(rep.main_bound, expect);
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["L_n", "M_x", "M_y", "phi_n", "main_bound", "D1", "D2q", "D1_alpha", "D2q_alpha", "delta_nr", "params", "provenance"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["params"]["K1"], 1.0);
        assert_eq!(json["provenance"], "population");
    }

    #[test]
    fn empirical_bounds_report_delta() {
        let design = DesignSpec::new(DesignKind::GaussianExact, 4);
        let d = crate::datagen::sample_dataset(&design, 300, 2).unwrap();
        let mut params = BoundParams::new(1.0, 2.0);
        params.alpha = Some(0.05);
        params.q = Some(6.0);
        let rep = empirical_bounds(&d, &params, Some(&CovMatrix::identity(4)), 500, 1).unwrap();
        assert_eq!(rep.provenance, Provenance::Empirical);
        assert!(rep.delta_nr.unwrap() > 0.0 && rep.delta_nr.unwrap() < 0.5);
        assert!(rep.d2q_alpha.is_some());
        assert_eq!(rep.l_n, l_hat(&d));
        let mut bad = params.clone();
        bad.alpha = Some(0.5);
        assert!(empirical_bounds(&d, &bad, None, 10, 1).is_err());
    }

    proptest! {
        #[test]
        fn phi_identity(l in 0.1f64..10.0, p in 3usize..5000, n in 4usize..100_000, k2 in 0.1f64..5.0) {
            let v = phi_n(l, p, n, k2).unwrap();
            let lp = (p as f64).ln();
            let back = v * (l * l * lp.powi(4) / n as f64).powf(1.0 / 6.0);
            prop_assert!((back - k2).abs() < 1e-12 * k2.max(1.0));
        }

        #[test]
        fn l_and_m_invariant_under_row_permutation(vals in proptest::collection::vec(-5.0f64..5.0, 24), shift in 0usize..6) {
            let d = ds(6, 4, vals.clone());
            let mut rotated = vals[shift * 4..].to_vec();
            rotated.extend_from_slice(&vals[..shift * 4]);
            let e = ds(6, 4, rotated);
            prop_assert!((l_hat(&d) - l_hat(&e)).abs() < 1e-9);
            prop_assert!((m_hat_x(&d, 1.3).unwrap() - m_hat_x(&e, 1.3).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn m_hat_x_nondecreasing_in_phi(vals in proptest::collection::vec(-5.0f64..5.0, 30), a in 1.0f64..5.0, b in 0.0f64..5.0) {
            let d = ds(10, 3, vals);
            prop_assert!(m_hat_x(&d, a).unwrap() <= m_hat_x(&d, a + b).unwrap());
        }

        #[test]
        fn orlicz_homogeneous(vals in proptest::collection::vec(-3.0f64..3.0, 1..20), c in 0.1f64..10.0, alpha in 0.5f64..2.5) {
            prop_assume!(vals.iter().any(|x| x.abs() > 1e-3));
            let base = orlicz_norm(&vals, alpha).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|x| c * x).collect();
            let s = orlicz_norm(&scaled, alpha).unwrap();
            prop_assert!((s - c * base).abs() <= 1e-8 * c * base);
        }
    }
}
