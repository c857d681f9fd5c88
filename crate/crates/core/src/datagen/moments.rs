//! Analytic population moments of the designs and the moment conditions
//! built on them.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{trunc_exp_moment, DesignKind, DesignSpec, Marginal, TRUNC_EXP_CUTOFF};
use crate::error::{Error, Result};
use crate::rng::{substream, tag};
use crate::special::{bisect_increasing, integrate, ln_gamma, normal_cdf};
use crate::sums::CovMatrix;

/// Margin used when scaling the heavy-tailed design against the polynomial tail condition:
/// `E[(max_j |X_ij| / B_n)^q'] = 0.9 * 2`.
pub const TAIL_MARGIN: f64 = 0.9;

/// Exhaustive sparse eigenvalue checks are used up to this many coordinate subsets.
pub const SUBSET_EXHAUSTIVE_LIMIT: u128 = 100_000;
/// Number of random subsets inspected beyond the exhaustive limit.
pub const SUBSET_SAMPLE_COUNT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Holds,
    Fails,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub status: ConditionStatus,
    /// The achieved constant (b for lower-bound conditions, B for upper-bound ones).
    pub constant: Option<f64>,
    /// True when the check inspected a random sample rather than every case.
    #[serde(default)]
    pub sampled: bool,
}

impl ConditionCheck {
    fn holds(constant: f64) -> Self {
        ConditionCheck {
            status: ConditionStatus::Holds,
            constant: Some(constant),
            sampled: false,
        }
    }

    fn fails(constant: Option<f64>) -> Self {
        ConditionCheck {
            status: ConditionStatus::Fails,
            constant,
            sampled: false,
        }
    }

    fn not_applicable() -> Self {
        ConditionCheck {
            status: ConditionStatus::NotApplicable,
            constant: None,
            sampled: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// `min_j E[X_ij^2]`.
    pub b_lower: f64,
    /// Smallest `B` with `E|X_ij|^3 <= B` and `E[X_ij^4] <= B^2`, raised where
    /// needed so the design's own tail condition (subexponential or polynomial) holds at `B`.
    #[serde(rename = "B_n")]
    pub b_n: f64,
    #[serde(rename = "L_n_population")]
    pub l_n_population: f64,
    pub sigma: CovMatrix,
    pub condition_flags: BTreeMap<String, ConditionCheck>,
    /// `E|X_ij|^3` per coordinate.
    pub third_moments: Vec<f64>,
    /// `E[X_ij^4]` per coordinate.
    pub fourth_moments: Vec<f64>,
    /// Moment order used for the polynomial tail condition, when the design is heavy tailed.
    pub tail_moment_order: Option<f64>,
    pub notes: Vec<String>,
}

/// Third absolute moment of a symmetric law from its log characteristic function:
/// `E|X|^3 = (12/pi) * int_0^inf (phi(t) - 1 + var t^2 / 2) / t^4 dt`.
///
/// `excess(t)` must return `phi(t) - 1 + var t^2/2` accurately for small `t`.
fn third_moment_from_cf<F: Fn(f64) -> f64>(excess: F, var: f64, upper: f64) -> f64 {
    let panels = (upper / 0.25).ceil() as usize;
    let body = integrate(|t| excess(t) / t.powi(4), 0.0, upper, panels);
    let tail = var / (2.0 * upper) - 1.0 / (3.0 * upper.powi(3));
    12.0 / std::f64::consts::PI * (body + tail)
}

/// `ln(sin x / x)`, accurate near zero.
fn ln_sinc(x: f64) -> f64 {
    let x2 = x * x;
    if x.abs() < 0.2 {
        -x2 * (1.0 / 6.0
            + x2 * (1.0 / 180.0 + x2 * (1.0 / 2835.0 + x2 * (1.0 / 37800.0 + x2 / 467775.0))))
    } else {
        (x.sin() / x).abs().ln()
    }
}

/// `expm1(l) - l`, without cancellation for small `l`.
fn expm1_minus_linear(l: f64) -> f64 {
    if l.abs() < 0.5 {
        let mut term = l;
        let mut sum = 0.0;
        for k in 2..=24 {
            term *= l / k as f64;
            sum += term;
        }
        sum
    } else {
        l.exp_m1() - l
    }
}

/// `E|sum_k w_k U_k|^3` for independent `U_k` uniform on `[-h, h]`.
pub(crate) fn uniform_sum_third_moment(weights: &[f64], h: f64) -> f64 {
    if weights.len() == 1 {
        return (h * weights[0]).abs().powi(3) / 4.0;
    }
    let var: f64 = weights.iter().map(|w| w * w).sum::<f64>() * h * h / 3.0;
    let wmax = weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let excess = |t: f64| {
        if h * wmax * t < 0.2 {
            // all factors in the series regime: split ln phi = -var t^2/2 + rest
            let lphi: f64 = weights.iter().map(|w| ln_sinc(h * w * t)).sum();
            let rest = lphi + var * t * t / 2.0;
            expm1_minus_linear(lphi) + rest
        } else {
            let phi: f64 = weights
                .iter()
                .map(|w| {
                    let x = h * w * t;
                    x.sin() / x
                })
                .product();
            phi - 1.0 + var * t * t / 2.0
        }
    };
    let upper = 400.0 / (h * wmax);
    third_moment_from_cf(excess, var, upper)
}

/// `E[X^4]` for `X = sum_k w_k U_k`, `U_k` uniform on `[-h, h]`.
fn uniform_sum_fourth_moment(weights: &[f64], h: f64) -> f64 {
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    let s4: f64 = weights.iter().map(|w| w.powi(4)).sum();
    let var1 = h * h / 3.0;
    let kappa4 = h.powi(4) / 5.0 - 3.0 * var1 * var1;
    3.0 * (s2 * var1).powi(2) + kappa4 * s4
}

struct Coordinate {
    m2: f64,
    m3: f64,
    m4: f64,
    /// Smallest B with E[exp(|X|/B)] <= 2, when finite; `exact` is false for a
    /// sufficient (not minimal) constant.
    subexp: Option<(f64, bool)>,
}

fn coordinate_moments(marginal: Marginal, weights: &[f64]) -> Coordinate {
    match marginal {
        Marginal::Rademacher => Coordinate {
            m2: 1.0,
            m3: 1.0,
            m4: 1.0,
            subexp: Some((1.0 / std::f64::consts::LN_2, true)),
        },
        Marginal::TruncExp { lambda } => {
            let mass = -(-TRUNC_EXP_CUTOFF).exp_m1();
            // E[exp(c T) | T <= cutoff] for T ~ Exp(1)
            let mgf = |c: f64| {
                let d = c - 1.0;
                if d.abs() < 1e-9 {
                    TRUNC_EXP_CUTOFF / mass
                } else {
                    (d * TRUNC_EXP_CUTOFF).exp_m1() / (d * mass)
                }
            };
            let c = bisect_increasing(mgf, 2.0, 1e-12, 1.0);
            Coordinate {
                m2: lambda.powi(2) * trunc_exp_moment(2),
                m3: lambda.powi(3) * trunc_exp_moment(3),
                m4: lambda.powi(4) * trunc_exp_moment(4),
                subexp: Some((lambda / c, true)),
            }
        }
        Marginal::Pareto { xm, q } => Coordinate {
            m2: xm.powi(2) * q / (q - 2.0),
            m3: xm.powi(3) * q / (q - 3.0),
            m4: xm.powi(4) * q / (q - 4.0),
            subexp: None,
        },
        Marginal::Gaussian => {
            let var: f64 = weights.iter().map(|w| w * w).sum();
            let sd = var.sqrt();
            // E[exp(s|Z|)] = 2 exp(s^2/2) Phi(s)
            let s = bisect_increasing(|s| 2.0 * (s * s / 2.0).exp() * normal_cdf(s), 2.0, 1e-12, 2.0);
            Coordinate {
                m2: var,
                m3: 2.0 * (2.0 / std::f64::consts::PI).sqrt() * var * sd,
                m4: 3.0 * var * var,
                subexp: Some((sd / s, true)),
            }
        }
        Marginal::Uniform { h } => {
            let var: f64 = weights.iter().map(|w| w * w).sum::<f64>() * h * h / 3.0;
            let subexp = if weights.len() == 1 {
                // E[exp(|U|/B)] = (e^s - 1)/s with s = h|w|/B
                let s = bisect_increasing(|s| s.exp_m1() / s, 2.0, 1e-12, 5.0);
                (h * weights[0].abs() / s, true)
            } else {
                let bound: f64 = weights.iter().map(|w| w.abs()).sum::<f64>() * h;
                (bound / std::f64::consts::LN_2, false)
            };
            Coordinate {
                m2: var,
                m3: uniform_sum_third_moment(weights, h),
                m4: uniform_sum_fourth_moment(weights, h),
                subexp: Some(subexp),
            }
        }
    }
}

/// Per-coordinate weights, truncated; the sequence stops early once it stabilizes.
fn coordinate_table(design: &DesignSpec) -> Vec<Coordinate> {
    let marginal = design.marginal();
    let mut out: Vec<Coordinate> = Vec::with_capacity(design.p);
    let mut last_weights: Option<Vec<f64>> = None;
    for j in 0..design.p {
        let mut w = design.covariance.coefficients(j);
        let wmax = w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        w.retain(|x| x.abs() > 1e-13 * wmax);
        if last_weights.as_ref() == Some(&w) {
            let prev = out.last().expect("previous coordinate");
            let copy = Coordinate {
                m2: prev.m2,
                m3: prev.m3,
                m4: prev.m4,
                subexp: prev.subexp,
            };
            out.push(copy);
            continue;
        }
        out.push(coordinate_moments(marginal, &w));
        last_weights = Some(w);
    }
    out
}

/// Analytic moments and condition flags for `design`.
pub fn population_moments(design: &DesignSpec) -> Result<MomentReport> {
    design.validate()?;
    let table = coordinate_table(design);
    let b_lower = table.iter().map(|c| c.m2).fold(f64::INFINITY, f64::min);
    let l_n = table.iter().map(|c| c.m3).fold(0.0, f64::max);
    let m4_max = table.iter().map(|c| c.m4).fold(0.0, f64::max);
    let mut b_n = l_n.max(m4_max.sqrt());

    let mut flags = BTreeMap::new();
    let mut notes = Vec::new();
    let mut tail_moment_order = None;

    // Subexponential constant: the largest per-coordinate minimum.
    let subexp = table
        .iter()
        .map(|c| c.subexp)
        .try_fold((0.0f64, true), |acc, e| e.map(|(b, exact)| (acc.0.max(b), acc.1 && exact)));

    match design.kind {
        DesignKind::TruncatedExponential { .. } => {
            let (b1, _) = subexp.expect("truncated exponential has finite exponential moments");
            b_n = b_n.max(b1);
        }
        DesignKind::HeavyTail { q, .. } => {
            let Marginal::Pareto { xm, .. } = design.marginal() else {
                unreachable!("heavy tail design has a Pareto marginal")
            };
            let order = (q + 4.0) / 2.0;
            let p = design.p as f64;
            // E[max_j |X_j|^s] = xm^s p B(1 - s/q, p)
            let s = order / q;
            let ln_beta = ln_gamma(1.0 - s) + ln_gamma(p) - ln_gamma(p + 1.0 - s);
            let e_max = xm.powf(order) * p * ln_beta.exp();
            let b2 = (e_max / (2.0 * TAIL_MARGIN)).powf(1.0 / order);
            b_n = b_n.max(b2);
            tail_moment_order = Some(order);
            notes.push(format!(
                "the polynomial tail condition is exemplified by a symmetrized Pareto design with tail index {q}; \
                 its moment order is (q + 4)/2 = {order} because moments of order q are infinite"
            ));
        }
        _ => {}
    }

    flags.insert(
        "min_variance".to_string(),
        if b_lower > 0.0 {
            ConditionCheck::holds(b_lower)
        } else {
            ConditionCheck::fails(Some(b_lower))
        },
    );
    flags.insert("moment_growth".to_string(), ConditionCheck::holds(b_n));
    flags.insert(
        "subexponential".to_string(),
        match subexp {
            Some((b1, exact)) => {
                let mut c = if b1 <= b_n * (1.0 + 1e-12) {
                    ConditionCheck::holds(b1)
                } else {
                    ConditionCheck::fails(Some(b1))
                };
                if !exact {
                    notes.push("subexponential constant is a sufficient bound from bounded support".into());
                }
                c.sampled = false;
                c
            }
            None => ConditionCheck::fails(None),
        },
    );
    flags.insert(
        "polynomial_tail".to_string(),
        match tail_moment_order {
            Some(_) => ConditionCheck::holds(b_n),
            None => ConditionCheck::not_applicable(),
        },
    );

    Ok(MomentReport {
        b_lower,
        b_n,
        l_n_population: l_n,
        sigma: design.covariance_matrix(),
        condition_flags: flags,
        third_moments: table.iter().map(|c| c.m3).collect(),
        fourth_moments: table.iter().map(|c| c.m4).collect(),
        tail_moment_order,
        notes,
    })
}

fn binomial(p: usize, s: usize) -> u128 {
    let s = s.min(p - s);
    let mut c: u128 = 1;
    for i in 0..s {
        c = c * (p - i) as u128 / (i + 1) as u128;
        if c > u128::MAX / 1_000_000 {
            return u128::MAX;
        }
    }
    c
}

fn min_eigen_of_subset(sigma: &CovMatrix, subset: &[usize]) -> f64 {
    let s = subset.len();
    let m = DMatrix::from_fn(s, s, |a, b| sigma.get(subset[a], subset[b]));
    m.symmetric_eigenvalues().min()
}

/// Advances `idx` to the next s-combination of `0..p` in lexicographic order.
fn next_combination(idx: &mut [usize], p: usize) -> bool {
    let s = idx.len();
    for pos in (0..s).rev() {
        if idx[pos] < p - s + pos {
            idx[pos] += 1;
            for k in pos + 1..s {
                idx[k] = idx[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Copies the variance floor and moment growth flags, then adds the sparse
/// eigenvalue condition for `s`-sparse directions under `"sparse_eigenvalue"`.
///
/// The sparse eigenvalue constant is the minimum eigenvalue over every `s x s` principal submatrix of
/// `Sigma`. When there are more than `SUBSET_EXHAUSTIVE_LIMIT` subsets,
/// `SUBSET_SAMPLE_COUNT` subsets drawn uniformly from the fixed stream
/// `substream(0, SUBSETS)` are inspected and the flag is marked `sampled`.
pub fn verify_conditions(report: &MomentReport, s: usize) -> Result<BTreeMap<String, ConditionCheck>> {
    let p = report.sigma.p();
    if s < 1 || s > p {
        return Err(Error::param("s", format!("must satisfy 1 <= s <= p = {p}, got {s}")));
    }
    let mut out = BTreeMap::new();
    for key in ["min_variance", "moment_growth"] {
        if let Some(c) = report.condition_flags.get(key) {
            out.insert(key.to_string(), c.clone());
        }
    }
    let scale = (0..p).map(|j| report.sigma.get(j, j).abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale;

    let total = binomial(p, s);
    let (min_eig, sampled) = if total <= SUBSET_EXHAUSTIVE_LIMIT {
        let mut idx: Vec<usize> = (0..s).collect();
        let mut best = f64::INFINITY;
        loop {
            best = best.min(min_eigen_of_subset(&report.sigma, &idx));
            if !next_combination(&mut idx, p) {
                break;
            }
        }
        (best, false)
    } else {
        let mut rng = substream(0, tag::SUBSETS);
        let mut best = f64::INFINITY;
        for _ in 0..SUBSET_SAMPLE_COUNT {
            let mut idx = index::sample(&mut rng, p, s).into_vec();
            idx.sort_unstable();
            best = best.min(min_eigen_of_subset(&report.sigma, &idx));
        }
        (best, true)
    };
    let mut check = if min_eig > tol {
        ConditionCheck::holds(min_eig)
    } else {
        ConditionCheck::fails(Some(min_eig))
    };
    check.sampled = sampled;
    out.insert("sparse_eigenvalue".to_string(), check);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_dataset, CovModel, LogConcaveBase};
    use crate::sums::CovFlavor;

    #[test]
    fn rademacher_moments_are_all_one() {
        let r = population_moments(&DesignSpec::new(DesignKind::Rademacher, 3)).unwrap();
        assert_eq!(r.b_lower, 1.0);
        assert_eq!(r.b_n, 1.0);
        assert_eq!(r.l_n_population, 1.0);
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(r.sigma.get(j, k), if j == k { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(r.condition_flags["polynomial_tail"].status, ConditionStatus::NotApplicable);
    }

    #[test]
    fn gaussian_third_moment_matches_quadrature_oracle() {
        // oracle: 2 * int_0^inf x^3 phi(x) dx by brute-force trapezoid
        let h = 1e-4;
        let mut acc = 0.0;
        let mut x = 0.0;
        while x < 20.0 {
            let f = |x: f64| x.powi(3) * (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            acc += 0.5 * h * (f(x) + f(x + h));
            x += h;
        }
        let oracle = 2.0 * acc;
        let r = population_moments(&DesignSpec::new(DesignKind::GaussianExact, 3)).unwrap();
        assert!((r.l_n_population - oracle).abs() < 1e-7);
        assert!((r.l_n_population - 1.595_769_121_605_731).abs() < 1e-12);
    }

    #[test]
    fn equicorrelated_sigma_entries() {
        let d = DesignSpec::new(DesignKind::GaussianExact, 3)
            .with_covariance(CovModel::Equicorrelated { r: 0.5 });
        let r = population_moments(&d).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(r.sigma.get(j, k), if j == k { 1.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn cf_route_reproduces_closed_forms() {
        // Gaussian: excess = exp(-t^2/2) - 1 + t^2/2
        let g = third_moment_from_cf(|t| expm1_minus_linear(-t * t / 2.0), 1.0, 60.0);
        assert!((g - 2.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-9, "{g}");
        // single uniform on [-1,1] via the CF path (two half-weight copies would differ)
        let h = 1.0;
        let excess = |t: f64| {
            let l = ln_sinc(h * t);
            if h * t < 0.2 {
                expm1_minus_linear(l) + (l + t * t / 6.0)
            } else {
                (h * t).sin() / (h * t) - 1.0 + t * t / 6.0
            }
        };
        let u = third_moment_from_cf(excess, 1.0 / 3.0, 400.0);
        assert!((u - 0.25).abs() < 1e-6, "{u}");
    }

    #[test]
    fn uniform_pair_matches_trapezoid_density_oracle() {
        // X = a U1 + b U2, U uniform [-1,1]; density is a trapezoid.
        let (a, b) = (0.8f64, 0.6f64);
        let (lo, hi) = ((a - b).abs(), a + b);
        let height = 1.0 / (2.0 * a.max(b));
        let dens = |x: f64| {
            let x = x.abs();
            if x <= lo {
                height
            } else if x <= hi {
                height * (hi - x) / (hi - lo)
            } else {
                0.0
            }
        };
        let steps = 2_000_000;
        let dx = hi / steps as f64;
        let mut oracle = 0.0;
        for i in 0..steps {
            let x = (i as f64 + 0.5) * dx;
            oracle += 2.0 * x.powi(3) * dens(x) * dx;
        }
        let cf = uniform_sum_third_moment(&[a, b], 1.0);
        assert!((cf - oracle).abs() < 1e-6, "cf {cf} oracle {oracle}");
    }

    #[test]
    fn verify_sparse_eigenvalue_condition() {
        let id = population_moments(&DesignSpec::new(DesignKind::Rademacher, 3)).unwrap();
        let f = verify_conditions(&id, 2).unwrap();
        assert_eq!(f["sparse_eigenvalue"].status, ConditionStatus::Holds);
        assert!((f["sparse_eigenvalue"].constant.unwrap() - 1.0).abs() < 1e-12);

        let eq = population_moments(
            &DesignSpec::new(DesignKind::GaussianExact, 3)
                .with_covariance(CovModel::Equicorrelated { r: 0.5 }),
        )
        .unwrap();
        let f = verify_conditions(&eq, 2).unwrap();
        assert!((f["sparse_eigenvalue"].constant.unwrap() - 0.5).abs() < 1e-12);
        assert!(!f["sparse_eigenvalue"].sampled);

        let mut singular = eq.clone();
        singular.sigma = CovMatrix::from_parts(3, vec![1.0; 9], CovFlavor::Population);
        let f = verify_conditions(&singular, 2).unwrap();
        assert_eq!(f["sparse_eigenvalue"].status, ConditionStatus::Fails);

        assert!(verify_conditions(&eq, 0).is_err());
        assert!(verify_conditions(&eq, 4).is_err());
    }

    #[test]
    fn large_subset_counts_are_sampled() {
        let d = DesignSpec::new(DesignKind::GaussianExact, 60)
            .with_covariance(CovModel::Ar1 { r: 0.3 });
        let r = population_moments(&d).unwrap();
        let f = verify_conditions(&r, 4).unwrap();
        assert!(f["sparse_eigenvalue"].sampled);
        assert_eq!(f["sparse_eigenvalue"].status, ConditionStatus::Holds);
    }

    #[test]
    fn truncated_exponential_satisfies_e1_empirically() {
        let d = DesignSpec::new(DesignKind::TruncatedExponential { scale: 1.0 }, 3).standardized();
        let r = population_moments(&d).unwrap();
        assert_eq!(r.condition_flags["subexponential"].status, ConditionStatus::Holds);
        let n = 100_000;
        let ds = sample_dataset(&d, n, 9).unwrap();
        let vals: Vec<f64> = ds.values().iter().map(|x| (x.abs() / r.b_n).exp()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        let se = (var / vals.len() as f64).sqrt();
        assert!(mean <= 2.0 + 5.0 * se, "mean {mean}");
    }

    #[test]
    fn heavy_tail_max_moment_respects_reported_scale() {
        let d = DesignSpec::new(DesignKind::HeavyTail { q: 5.0, scale: 1.0 }, 3);
        let r = population_moments(&d).unwrap();
        let order = r.tail_moment_order.unwrap();
        assert_eq!(order, 4.5);
        assert!(!r.notes.is_empty());
        let n = 100_000;
        let ds = sample_dataset(&d, n, 2).unwrap();
        let vals: Vec<f64> = ds
            .rows()
            .map(|row| row.iter().fold(0.0f64, |a, x| a.max(x.abs())).powf(order))
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt() / mean;
        assert!(mean <= 2.0 * r.b_n.powf(order) * (1.0 + 5.0 * se), "{mean}");
    }

    #[test]
    fn heavy_tail_max_moment_matches_quadrature_oracle() {
        // E[M^s] = int_0^inf s x^(s-1) P(M > x) dx with P(M <= x) = (1 - x^-q)^p
        let (q, p, s) = (6.0f64, 3.0f64, 5.0f64);
        let f = |x: f64| {
            if x < 1.0 {
                s * x.powf(s - 1.0)
            } else {
                s * x.powf(s - 1.0) * -(p * (-x.powf(-q)).ln_1p()).exp_m1()
            }
        };
        // substitute x = 1/u on the tail to get a finite interval
        let head = integrate(f, 0.0, 1.0, 50);
        let tail = integrate(|u: f64| f(1.0 / u) / (u * u), 1e-12, 1.0, 20_000);
        let oracle = head + tail;
        let sratio = s / q;
        let closed = p * (ln_gamma(1.0 - sratio) + ln_gamma(p) - ln_gamma(p + 1.0 - sratio)).exp();
        assert!((closed - oracle).abs() / oracle < 1e-4, "{closed} vs {oracle}");
    }

    #[test]
    fn ar1_uniform_design_moments_stabilize() {
        let d = DesignSpec::new(
            DesignKind::LogConcave {
                base: LogConcaveBase::UniformCube,
            },
            300,
        )
        .with_covariance(CovModel::Ar1 { r: 0.5 })
        .standardized();
        let r = population_moments(&d).unwrap();
        assert!((r.b_lower - 1.0).abs() < 1e-12);
        // between a single uniform (3 sqrt3 / 4) and a Gaussian
        assert!(r.l_n_population > 1.299 && r.l_n_population < 1.5958);
        assert_eq!(r.third_moments.len(), 300);
    }
}
