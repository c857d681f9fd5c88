//! Monte Carlo estimation of hitting probabilities and of the sup-distances
//! between the law of a sum (or a bootstrap/interpolated version of it) and
//! its Gaussian analog over a finite set family.
//!
//! Replication `k` of a side draws with seed `mix64(side_seed, k)`, and hits
//! are accumulated as integers, so results are identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, DesignSpec};
use crate::error::{Error, Result};
use crate::geometry::{FamilyGenerator, SetDescriptor, SetFamily};
use crate::report::{Cell, Report, Table};
use crate::rng::{mix64, tag};
use crate::sums::{
    CovMatrix, EmpiricalBootSampler, GaussianLaw, InterpolatedSampler, MultiplierSampler, NormalizedSumSampler,
    SumSampler, Workspace,
};

/// Jitter base used when factoring a supplied covariance.
pub const COV_JITTER: f64 = 1e-12;
const MIN_R_PROB: usize = 100;
const MIN_R_RHO: usize = 1000;

/// Upper 0.999 quantile of `max_k |p̂1 - p̂2|` over `k` sets when both sides
/// share a law: `4.5 sqrt(0.5 / R) sqrt(ln K + 1)`.
pub fn noise_floor(r: usize, k: usize) -> f64 {
    4.5 * (0.5 / r as f64).sqrt() * ((k.max(1) as f64).ln() + 1.0).sqrt()
}

/// Binomial estimate of a single probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub p_hat: f64,
    #[serde(rename = "R")]
    pub r: usize,
    pub se: f64,
    pub seed: u64,
    pub hits: u64,
}

impl MCEstimate {
    fn new(hits: u64, r: usize, seed: u64) -> Self {
        let p_hat = hits as f64 / r as f64;
        MCEstimate {
            p_hat,
            r,
            se: (p_hat * (1.0 - p_hat) / r as f64).sqrt(),
            seed,
            hits,
        }
    }
}

/// A family prepared for fast membership tests. Rectangles keep only their
/// bounded coordinates.
enum Compiled<'a> {
    Rect(Vec<(usize, f64, f64)>),
    General(&'a SetDescriptor),
}

impl Compiled<'_> {
    #[inline]
    fn hit(&self, w: &[f64]) -> bool {
        match self {
            Compiled::Rect(sides) => sides.iter().all(|&(j, a, b)| a <= w[j] && w[j] <= b),
            Compiled::General(s) => s.contains_unchecked(w),
        }
    }
}

fn compile(family: &SetFamily) -> Vec<Compiled<'_>> {
    family
        .sets()
        .iter()
        .map(|m| match &m.set {
            SetDescriptor::Rect(r) => {
                let mut sides: Vec<(usize, f64, f64)> = r
                    .lower()
                    .iter()
                    .zip(r.upper())
                    .enumerate()
                    .filter(|(_, (a, b))| a.is_finite() || b.is_finite())
                    .map(|(j, (a, b))| (j, *a, *b))
                    .collect();
                // Empty sides first so empty rectangles reject immediately.
                sides.sort_by_key(|&(_, a, b)| a <= b);
                Compiled::Rect(sides)
            }
            other => Compiled::General(other),
        })
        .collect()
}

/// Hit counts of `r` draws of `sampler` for each member of `family`.
pub fn hit_counts<S: SumSampler + ?Sized>(sampler: &S, family: &SetFamily, r: usize, seed: u64) -> Result<Vec<u64>> {
    if sampler.p() != family.p() {
        return Err(Error::Dimension {
            expected: family.p(),
            got: sampler.p(),
        });
    }
    let sets = compile(family);
    let k = sets.len();
    let p = sampler.p();
    let counts = (0..r as u64)
        .into_par_iter()
        .fold(
            || (Workspace::default(), vec![0.0; p], vec![0u64; k]),
            |(mut ws, mut out, mut counts), rep| {
                sampler.draw(mix64(seed, rep), &mut ws, &mut out);
                for (c, s) in counts.iter_mut().zip(&sets) {
                    *c += s.hit(&out) as u64;
                }
                (ws, out, counts)
            },
        )
        .map(|(_, _, counts)| counts)
        .reduce(
            || vec![0u64; k],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts)
}

/// Fraction of `r` draws of `sampler` landing in `set`.
pub fn estimate_prob<S: SumSampler + ?Sized>(sampler: &S, set: &SetDescriptor, r: usize, seed: u64) -> Result<MCEstimate> {
    if r < MIN_R_PROB {
        return Err(Error::param("R", format!("must be at least {MIN_R_PROB}, got {r}")));
    }
    let family = SetFamily::from_sets(vec![set.clone()])?;
    let hits = hit_counts(sampler, &family, r, seed)?;
    Ok(MCEstimate::new(hits[0], r, seed))
}

/// One family member's two-sample comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetDiff {
    pub label: String,
    pub p_x: f64,
    pub p_y: f64,
    pub diff: f64,
    pub se_diff: f64,
}

/// Estimated sup-distance over a finite family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub sup_diff: f64,
    pub argmax_set_label: String,
    pub per_set: Vec<SetDiff>,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub noise_floor: f64,
    pub seed: u64,
    pub family_generator: Option<FamilyGenerator>,
}

impl RhoEstimate {
    /// Assembles the comparison from hit counts of the two sides.
    pub fn from_counts(family: &SetFamily, x_hits: &[u64], y_hits: &[u64], r: usize, seed: u64) -> Self {
        let rf = r as f64;
        let per_set: Vec<SetDiff> = family
            .labels()
            .zip(x_hits.iter().zip(y_hits))
            .map(|(label, (&hx, &hy))| {
                let (px, py) = (hx as f64 / rf, hy as f64 / rf);
                SetDiff {
                    label: label.to_string(),
                    p_x: px,
                    p_y: py,
                    diff: (px - py).abs(),
                    se_diff: ((px * (1.0 - px) + py * (1.0 - py)) / rf).sqrt(),
                }
            })
            .collect();
        // First maximal entry wins ties, keeping the label deterministic.
        let best = per_set
            .iter()
            .enumerate()
            .fold(0, |b, (i, s)| if s.diff > per_set[b].diff { i } else { b });
        RhoEstimate {
            sup_diff: per_set[best].diff,
            argmax_set_label: per_set[best].label.clone(),
            r,
            k: per_set.len(),
            noise_floor: noise_floor(r, per_set.len()),
            per_set,
            seed,
            family_generator: family.generator().cloned(),
        }
    }
}

impl Report for RhoEstimate {
    fn table(&self) -> Option<Table> {
        let mut t = Table::new(vec!["label", "p_x", "p_y", "diff", "se_diff"]);
        for s in &self.per_set {
            t.push(vec![
                Cell::Text(s.label.clone()),
                s.p_x.into(),
                s.p_y.into(),
                s.diff.into(),
                s.se_diff.into(),
            ]);
        }
        Some(t)
    }
}

fn check_rho_inputs(family: &SetFamily, r: usize) -> Result<()> {
    if r < MIN_R_RHO {
        return Err(Error::param("R", format!("must be at least {MIN_R_RHO}, got {r}")));
    }
    if family.is_empty() {
        return Err(Error::param("family", "must be nonempty"));
    }
    Ok(())
}

/// Compares any two samplers over `family`, using independent streams.
pub fn compare_samplers<X, Y>(x: &X, y: &Y, family: &SetFamily, r: usize, seed: u64) -> Result<RhoEstimate>
where
    X: SumSampler + ?Sized,
    Y: SumSampler + ?Sized,
{
    check_rho_inputs(family, r)?;
    let hx = hit_counts(x, family, r, mix64(seed, tag::X_SIDE))?;
    let hy = hit_counts(y, family, r, mix64(seed, tag::Y_SIDE))?;
    Ok(RhoEstimate::from_counts(family, &hx, &hy, r, seed))
}

/// `N(0, sigma)`, using the design's O(p) structured sampler when `sigma`
/// is exactly the design's own covariance.
pub fn gaussian_for(design: Option<&DesignSpec>, sigma: &CovMatrix) -> Result<GaussianLaw> {
    if let Some(d) = design {
        if d.p == sigma.p() && d.covariance_matrix().data() == sigma.data() {
            return GaussianLaw::for_design(d);
        }
    }
    GaussianLaw::from_cov(sigma, COV_JITTER)
}

/// `sup_A |Pr(S_n^X ∈ A) - Pr(N(0, sigma) ∈ A)|` over the family.
pub fn estimate_rho(
    design: &DesignSpec,
    n: usize,
    sigma: &CovMatrix,
    family: &SetFamily,
    r: usize,
    seed: u64,
) -> Result<RhoEstimate> {
    check_rho_inputs(family, r)?;
    let x = NormalizedSumSampler::new(design, n)?;
    let y = gaussian_for(Some(design), sigma)?;
    compare_samplers(&x, &y, family, r, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootMode {
    #[serde(rename = "MB", alias = "mb")]
    Multiplier,
    #[serde(rename = "EB", alias = "eb")]
    Empirical,
}

/// Bootstrap analog of [`estimate_rho`], conditional on `dataset`.
pub fn estimate_rho_boot(
    dataset: &Dataset,
    sigma: &CovMatrix,
    family: &SetFamily,
    r: usize,
    seed: u64,
    mode: BootMode,
) -> Result<RhoEstimate> {
    check_rho_inputs(family, r)?;
    let y = gaussian_for(dataset.design(), sigma)?;
    let seed_mode = mix64(seed, tag::BOOT);
    match mode {
        BootMode::Multiplier => compare_samplers(&MultiplierSampler::new(dataset), &y, family, r, seed_mode),
        BootMode::Empirical => compare_samplers(&EmpiricalBootSampler::new(dataset), &y, family, r, seed_mode),
    }
    .map(|mut est| {
        est.seed = seed;
        est
    })
}

/// Interpolation sup-distance over a grid of `v` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarrhoEstimate {
    pub sup_diff: f64,
    pub argmax_v: f64,
    pub argmax_set_label: String,
    /// Floor for `K * |v_grid|` comparisons.
    pub noise_floor: f64,
    pub per_v: Vec<VarrhoRow>,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarrhoRow {
    pub v: f64,
    pub estimate: RhoEstimate,
}

impl Report for VarrhoEstimate {
    fn table(&self) -> Option<Table> {
        let mut t = Table::new(vec!["v", "label", "p_x", "p_y", "diff", "se_diff"]);
        for row in &self.per_v {
            for s in &row.estimate.per_set {
                t.push(vec![
                    row.v.into(),
                    Cell::Text(s.label.clone()),
                    s.p_x.into(),
                    s.p_y.into(),
                    s.diff.into(),
                    s.se_diff.into(),
                ]);
            }
        }
        Some(t)
    }
}

/// For each `v`, compares `sqrt(v) S^X + sqrt(1-v) S^Y` against `S^Y` over a
/// family of lower orthants. The Gaussian side is drawn once and shared.
pub fn estimate_varrho(
    design: &DesignSpec,
    n: usize,
    sigma: &CovMatrix,
    family: &SetFamily,
    v_grid: &[f64],
    r: usize,
    seed: u64,
) -> Result<VarrhoEstimate> {
    check_rho_inputs(family, r)?;
    if v_grid.is_empty() {
        return Err(Error::param("v_grid", "must be nonempty"));
    }
    if let Some(v) = v_grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::param("v_grid", format!("entries must lie in [0, 1], got {v}")));
    }
    if !family.all_lower_orthants() {
        return Err(Error::param("family", "interpolation distance uses lower orthants {w <= y} only"));
    }
    let gauss = gaussian_for(Some(design), sigma)?;
    let hy = hit_counts(&gauss, family, r, mix64(seed, tag::Y_SIDE))?;
    let x_base = mix64(seed, tag::X_SIDE);
    let mut per_v = Vec::with_capacity(v_grid.len());
    for (i, &v) in v_grid.iter().enumerate() {
        let sampler = InterpolatedSampler::new(NormalizedSumSampler::new(design, n)?, gauss.clone(), v)?;
        let hx = hit_counts(&sampler, family, r, mix64(x_base, i as u64))?;
        per_v.push(VarrhoRow {
            v,
            estimate: RhoEstimate::from_counts(family, &hx, &hy, r, seed),
        });
    }
    let best = per_v
        .iter()
        .enumerate()
        .fold(0, |b, (i, row)| if row.estimate.sup_diff > per_v[b].estimate.sup_diff { i } else { b });
    Ok(VarrhoEstimate {
        sup_diff: per_v[best].estimate.sup_diff,
        argmax_v: per_v[best].v,
        argmax_set_label: per_v[best].estimate.argmax_set_label.clone(),
        noise_floor: noise_floor(r, family.len() * v_grid.len()),
        per_v,
        r,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{CovModel, DesignKind};
    use crate::geometry::{sample_rectangle_family, Hyperrectangle, LabeledSet};
    use crate::special::normal_cdf;

    fn rect(lower: Vec<f64>, upper: Vec<f64>) -> SetDescriptor {
        SetDescriptor::Rect(Hyperrectangle::new(lower, upper).unwrap())
    }

    fn std_normal(p: usize) -> GaussianLaw {
        GaussianLaw::structured(CovModel::Identity, p).unwrap()
    }

    #[test]
    fn trivial_sets() {
        let law = std_normal(3);
        let all = rect(vec![f64::NEG_INFINITY; 3], vec![f64::INFINITY; 3]);
        assert_eq!(estimate_prob(&law, &all, 1000, 1).unwrap().p_hat, 1.0);
        let empty = rect(vec![1.0, f64::NEG_INFINITY, f64::NEG_INFINITY], vec![0.0, f64::INFINITY, f64::INFINITY]);
        let e = estimate_prob(&law, &empty, 1000, 1).unwrap();
        assert_eq!((e.p_hat, e.se), (0.0, 0.0));
        assert!(estimate_prob(&law, &all, 99, 1).is_err());
    }

    #[test]
    fn one_dimensional_interval_matches_quadrature() {
        let law = std_normal(1);
        let set = rect(vec![-1.96], vec![1.96]);
        let e = estimate_prob(&law, &set, 1_000_000, 3).unwrap();
        let truth = normal_cdf(1.96) - normal_cdf(-1.96);
        assert!((truth - 0.950_004_2).abs() < 1e-7);
        assert!((e.p_hat - truth).abs() <= 3.0 * e.se, "{e:?}");
    }

    #[test]
    fn binomial_coverage_over_seeds() {
        let law = std_normal(1);
        let set = rect(vec![f64::NEG_INFINITY], vec![0.5]);
        let truth = normal_cdf(0.5);
        let covered = (0..200u64)
            .filter(|&s| {
                let e = estimate_prob(&law, &set, 2000, s).unwrap();
                (e.p_hat - truth).abs() <= 3.0 * e.se
            })
            .count();
        assert!(covered >= 198, "{covered}/200");
    }

    #[test]
    fn identical_laws_stay_under_noise_floor() {
        let p = 4;
        let design = DesignSpec::new(DesignKind::GaussianExact, p);
        let family = sample_rectangle_family(p, 20, &vec![1.0; p], 8).unwrap();
        let sigma = CovMatrix::identity(p);
        let exceed = (0..200u64)
            .filter(|&s| {
                let est = estimate_rho(&design, 1, &sigma, &family, 2000, s).unwrap();
                est.sup_diff > est.noise_floor
            })
            .count();
        assert!(exceed <= 2, "{exceed}/200 above the floor");
    }

    #[test]
    fn doubling_r_shrinks_median_by_about_root_two() {
        let p = 3;
        let law = std_normal(p);
        let family = sample_rectangle_family(p, 10, &vec![1.0; p], 2).unwrap();
        let median = |r: usize| {
            let mut v: Vec<f64> = (0..200u64)
                .map(|s| compare_samplers(&law, &law, &family, r, s).unwrap().sup_diff)
                .collect();
            v.sort_by(f64::total_cmp);
            0.5 * (v[99] + v[100])
        };
        let ratio = median(2000) / median(4000);
        assert!((1.2..=1.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn single_set_diff_matches_binomial_arithmetic() {
        // n = 1 Rademacher: P(S_1 <= 0.5) = 1/2 exactly, against Φ(0.5) ≈ 0.69 on the Gaussian side.
        let design = DesignSpec::new(DesignKind::Rademacher, 3);
        let set = LabeledSet {
            label: "first-coordinate".into(),
            set: rect(vec![f64::NEG_INFINITY; 3], vec![0.5, f64::INFINITY, f64::INFINITY]),
        };
        let family = SetFamily::new(vec![set]).unwrap();
        let est = estimate_rho(&design, 1, &CovMatrix::identity(3), &family, 20_000, 4).unwrap();
        let s = &est.per_set[0];
        assert!((s.diff - (0.5 - s.p_y).abs()).abs() <= 3.0 * s.se_diff, "{s:?}");
        assert!((s.p_y - normal_cdf(0.5)).abs() <= 3.0 * s.se_diff);
    }

    #[test]
    fn estimates_do_not_depend_on_worker_count() {
        let design = DesignSpec::new(DesignKind::Rademacher, 70);
        let family = sample_rectangle_family(70, 15, &[1.0; 70], 1).unwrap();
        let sigma = CovMatrix::identity(70);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_rho(&design, 30, &sigma, &family, 3000, 5).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(3));
        assert_eq!(a, run(8));
    }

    #[test]
    fn bootstrap_of_constant_rows_hits_sets_around_zero() {
        let ds = Dataset::from_rows(3, 2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        let family = SetFamily::from_sets(vec![
            rect(vec![-1.0, -1.0], vec![1.0, 1.0]),
            rect(vec![0.5, f64::NEG_INFINITY], vec![f64::INFINITY, f64::INFINITY]),
        ])
        .unwrap();
        for mode in [BootMode::Multiplier, BootMode::Empirical] {
            let est = estimate_rho_boot(&ds, &CovMatrix::identity(2), &family, 1000, 1, mode).unwrap();
            assert_eq!(est.per_set[0].p_x, 1.0);
            assert_eq!(est.per_set[1].p_x, 0.0);
        }
    }

    #[test]
    fn varrho_identical_law_cases() {
        let p = 5;
        let fam = {
            let sets = (0..8)
                .map(|k| rect(vec![f64::NEG_INFINITY; p], vec![-1.0 + 0.3 * k as f64; p]))
                .collect();
            SetFamily::from_sets(sets).unwrap()
        };
        let sigma = CovMatrix::identity(p);
        let rad = DesignSpec::new(DesignKind::Rademacher, p);
        let at_zero = estimate_varrho(&rad, 10, &sigma, &fam, &[0.0], 4000, 3).unwrap();
        assert!(at_zero.sup_diff <= at_zero.noise_floor);
        let gauss = DesignSpec::new(DesignKind::GaussianExact, p);
        let g = estimate_varrho(&gauss, 10, &sigma, &fam, &[0.0, 0.3, 1.0], 4000, 3).unwrap();
        assert!(g.sup_diff <= g.noise_floor);
        let non_orthant = SetFamily::from_sets(vec![rect(vec![0.0; p], vec![1.0; p])]).unwrap();
        assert!(estimate_varrho(&rad, 10, &sigma, &non_orthant, &[0.5], 4000, 3).is_err());
    }

    #[test]
    fn varrho_is_largest_at_the_non_gaussian_end() {
        // Small n Rademacher sums are far from Gaussian on lower orthants.
        let p = 3;
        let sets = (0..10)
            .map(|k| rect(vec![f64::NEG_INFINITY; p], vec![-0.9 + 0.2 * k as f64; p]))
            .collect();
        let fam = SetFamily::from_sets(sets).unwrap();
        let rad = DesignSpec::new(DesignKind::Rademacher, p);
        let est = estimate_varrho(&rad, 4, &CovMatrix::identity(p), &fam, &[0.5, 1.0], 20_000, 11).unwrap();
        let (half, full) = (est.per_v[0].estimate.sup_diff, est.per_v[1].estimate.sup_diff);
        assert!(full >= half - 2.0 * est.noise_floor, "{full} vs {half}");
    }

    #[test]
    fn rho_csv_columns_are_fixed() {
        let law = std_normal(2);
        let family = sample_rectangle_family(2, 3, &[1.0; 2], 0).unwrap();
        let est = compare_samplers(&law, &law, &family, 1000, 1).unwrap();
        let csv = est.table().unwrap().to_csv().unwrap();
        assert!(csv.starts_with("label,p_x,p_y,diff,se_diff\n"));
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(est.family_generator.as_ref().unwrap().k, 3);
    }

    #[test]
    fn noise_floor_formula() {
        assert!((noise_floor(200_000, 100) - 4.5 * (0.5f64 / 200_000.0).sqrt() * (100f64.ln() + 1.0).sqrt()).abs() < 1e-15);
        assert!(noise_floor(400_000, 100) < noise_floor(200_000, 100));
    }
}
