//! Normalized sums with their Gaussian analogs. Interpolated and bootstrap
//! draws are built on the same samplers.
//!
//! Every draw is a pure function of its inputs and a seed. The samplers used
//! by the Monte Carlo layer implement [`SumSampler`]; replication `r` of a run
//! with seed `s` calls `draw(mix64(s, r), ..)`.

mod cov;

pub use cov::{cholesky_psd, CholFactor, CovFlavor, CovMatrix, CHOLESKY_RETRIES};

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datagen::{CovModel, Dataset, DesignSpec, RowSampler};
use crate::error::{Error, Result};
use crate::rng::{mix64, stream, substream, tag, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SumKind {
    X,
    Y,
    Interpolated { v: f64 },
    MultiplierBoot,
    EmpiricalBoot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumVector {
    pub values: Vec<f64>,
    pub kind: SumKind,
}

/// Reusable scratch space for draws.
#[derive(Default, Debug)]
pub struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
    bits: Vec<u64>,
}

fn sized<T: Clone + Default>(v: &mut Vec<T>, len: usize) -> &mut [T] {
    if v.len() < len {
        v.resize(len, T::default());
    }
    &mut v[..len]
}

/// A random vector in `R^p` that can be drawn reproducibly from a seed.
pub trait SumSampler: Sync {
    fn p(&self) -> usize;

    /// Writes one draw into `out`; the result depends only on `seed`.
    fn draw(&self, seed: u64, ws: &mut Workspace, out: &mut [f64]);
}

/// `S_n^X` for a fresh dataset of `n` rows: the draw with seed `s` equals
/// `normalized_sum(sample_dataset(design, n, s))` bit for bit.
#[derive(Clone, Debug)]
pub struct NormalizedSumSampler {
    rows: RowSampler,
    n: usize,
}

impl NormalizedSumSampler {
    pub fn new(design: &DesignSpec, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::param("n", "must be positive"));
        }
        Ok(NormalizedSumSampler {
            rows: RowSampler::new(design)?,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Rademacher rows: per-coordinate counts of +1 kept in bit-sliced
    /// counters, one plane per bit of the count.
    fn draw_rademacher(&self, seed: u64, ws: &mut Workspace, out: &mut [f64]) {
        let p = self.rows.p();
        let words = p.div_ceil(64);
        let planes = (usize::BITS - self.n.leading_zeros()) as usize;
        let counters = sized(&mut ws.bits, words * planes);
        counters.iter_mut().for_each(|c| *c = 0);
        for i in 0..self.n {
            let mut rng = substream(seed, i as u64);
            for w in 0..words {
                let mut carry = rng.next_u64();
                for plane in &mut counters[w * planes..(w + 1) * planes] {
                    let next = *plane & carry;
                    *plane ^= carry;
                    carry = next;
                    if carry == 0 {
                        break;
                    }
                }
            }
        }
        let n = self.n as i64;
        let root = (self.n as f64).sqrt();
        for (j, o) in out.iter_mut().enumerate() {
            let (w, bit) = (j / 64, j % 64);
            let mut count = 0i64;
            for (b, plane) in counters[w * planes..(w + 1) * planes].iter().enumerate() {
                count |= (((plane >> bit) & 1) as i64) << b;
            }
            *o = (2 * count - n) as f64 / root;
        }
    }
}

impl SumSampler for NormalizedSumSampler {
    fn p(&self) -> usize {
        self.rows.p()
    }

    fn draw(&self, seed: u64, ws: &mut Workspace, out: &mut [f64]) {
        if self.rows.is_rademacher() {
            return self.draw_rademacher(seed, ws, out);
        }
        let p = self.rows.p();
        let scratch_len = self.rows.scratch_len();
        let row = sized(&mut ws.a, p);
        let scratch = sized(&mut ws.b, scratch_len);
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n {
            let mut rng = substream(seed, i as u64);
            self.rows.fill_row(&mut rng, scratch, row);
            for (o, x) in out.iter_mut().zip(row.iter()) {
                *o += x;
            }
        }
        let root = (self.n as f64).sqrt();
        out.iter_mut().for_each(|o| *o /= root);
    }
}

/// Exact sampler for a centered Gaussian law on `R^p`.
#[derive(Clone, Debug)]
pub enum GaussianLaw {
    /// `sd * M xi` with `M` the structured map of a [`CovModel`]; O(p) per draw.
    Structured { model: CovModel, sd: f64, p: usize },
    /// `L z` with `L` a Cholesky factor.
    Factor(CholFactor),
}

impl GaussianLaw {
    /// The law of `S_n^Y` for a design: `N(0, Sigma)` with `Sigma = E[X_i X_i']`.
    pub fn for_design(design: &DesignSpec) -> Result<Self> {
        design.validate()?;
        Ok(GaussianLaw::Structured {
            model: design.covariance.clone(),
            sd: design.marginal().variance().sqrt(),
            p: design.p,
        })
    }

    pub fn structured(model: CovModel, p: usize) -> Result<Self> {
        model.validate()?;
        Ok(GaussianLaw::Structured { model, sd: 1.0, p })
    }

    pub fn from_cov(cov: &CovMatrix, base_jitter: f64) -> Result<Self> {
        Ok(GaussianLaw::Factor(cholesky_psd(cov, base_jitter)?))
    }

    pub fn covariance(&self) -> CovMatrix {
        match self {
            GaussianLaw::Structured { model, sd, p } => model.matrix(*p, sd * sd),
            GaussianLaw::Factor(f) => f.reconstruct(),
        }
    }

    /// Diagonal of the covariance, without forming the full matrix.
    pub fn covariance_diagonal(&self) -> Vec<f64> {
        match self {
            GaussianLaw::Structured { model, sd, p } => (0..*p).map(|j| model.entry(j, j) * sd * sd).collect(),
            GaussianLaw::Factor(f) => (0..f.p()).map(|j| (0..=j).map(|k| f.get(j, k).powi(2)).sum()).collect(),
        }
    }

    fn fill(&self, rng: &mut StreamRng, ws: &mut Workspace, out: &mut [f64]) {
        match self {
            GaussianLaw::Structured { model, sd, p } => {
                let z = sized(&mut ws.b, p + model.extra_inputs());
                for x in z.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
                model.apply(z, out);
                if *sd != 1.0 {
                    out.iter_mut().for_each(|o| *o *= sd);
                }
            }
            GaussianLaw::Factor(f) => {
                let z = sized(&mut ws.b, f.p());
                for x in z.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
                f.apply(z, out);
            }
        }
    }
}

impl SumSampler for GaussianLaw {
    fn p(&self) -> usize {
        match self {
            GaussianLaw::Structured { p, .. } => *p,
            GaussianLaw::Factor(f) => f.p(),
        }
    }

    fn draw(&self, seed: u64, ws: &mut Workspace, out: &mut [f64]) {
        let mut rng = stream(seed);
        self.fill(&mut rng, ws, out);
    }
}

/// `sqrt(v) S^X + sqrt(1 - v) S^Y` with independent parts.
#[derive(Clone, Debug)]
pub struct InterpolatedSampler {
    x: NormalizedSumSampler,
    y: GaussianLaw,
    v: f64,
}

impl InterpolatedSampler {
    pub fn new(x: NormalizedSumSampler, y: GaussianLaw, v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param("v", format!("must lie in [0, 1], got {v}")));
        }
        if x.p() != y.p() {
            return Err(Error::Dimension {
                expected: x.p(),
                got: y.p(),
            });
        }
        Ok(InterpolatedSampler { x, y, v })
    }
}

impl SumSampler for InterpolatedSampler {
    fn p(&self) -> usize {
        self.x.p()
    }

    fn draw(&self, seed: u64, ws: &mut Workspace, out: &mut [f64]) {
        let (wx, wy) = (self.v.sqrt(), (1.0 - self.v).sqrt());
        if wy == 0.0 {
            return self.x.draw(mix64(seed, tag::X_SIDE), ws, out);
        }
        let mut gauss = vec![0.0; self.p()];
        self.y.draw(mix64(seed, tag::INTERP_GAUSS), ws, &mut gauss);
        if wx == 0.0 {
            out.copy_from_slice(&gauss);
            return;
        }
        self.x.draw(mix64(seed, tag::X_SIDE), ws, out);
        for (o, g) in out.iter_mut().zip(&gauss) {
            *o = wx * *o + wy * g;
        }
    }
}

/// Conditional draws of `S_n^{eX} = n^{-1/2} sum_i e_i (X_i - X̄)`, `e_i ~ N(0,1)`.
#[derive(Clone, Debug)]
pub struct MultiplierSampler {
    centered: Vec<f64>,
    n: usize,
    p: usize,
}

impl MultiplierSampler {
    pub fn new(dataset: &Dataset) -> Self {
        MultiplierSampler {
            centered: dataset.centered(),
            n: dataset.n(),
            p: dataset.p(),
        }
    }
}

impl SumSampler for MultiplierSampler {
    fn p(&self) -> usize {
        self.p
    }

    fn draw(&self, seed: u64, _ws: &mut Workspace, out: &mut [f64]) {
        let mut rng = stream(seed);
        out.iter_mut().for_each(|o| *o = 0.0);
        for row in self.centered.chunks_exact(self.p) {
            let e: f64 = rng.sample(StandardNormal);
            for (o, x) in out.iter_mut().zip(row) {
                *o += e * x;
            }
        }
        let root = (self.n as f64).sqrt();
        out.iter_mut().for_each(|o| *o /= root);
    }
}

/// Conditional draws of `S_n^{X*} = n^{-1/2} sum_i (X_i^* - X̄)` with rows
/// resampled uniformly with replacement.
#[derive(Clone, Debug)]
pub struct EmpiricalBootSampler {
    centered: Vec<f64>,
    n: usize,
    p: usize,
}

impl EmpiricalBootSampler {
    pub fn new(dataset: &Dataset) -> Self {
        EmpiricalBootSampler {
            centered: dataset.centered(),
            n: dataset.n(),
            p: dataset.p(),
        }
    }
}

impl SumSampler for EmpiricalBootSampler {
    fn p(&self) -> usize {
        self.p
    }

    fn draw(&self, seed: u64, _ws: &mut Workspace, out: &mut [f64]) {
        let mut rng = stream(seed);
        out.iter_mut().for_each(|o| *o = 0.0);
        for _ in 0..self.n {
            let i = rng.random_range(0..self.n);
            let row = &self.centered[i * self.p..(i + 1) * self.p];
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        let root = (self.n as f64).sqrt();
        out.iter_mut().for_each(|o| *o /= root);
    }
}

fn one_draw<S: SumSampler + ?Sized>(s: &S, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; s.p()];
    s.draw(seed, &mut Workspace::default(), &mut out);
    out
}

/// `S_n^X = n^{-1/2} sum_i X_i`.
pub fn normalized_sum(dataset: &Dataset) -> SumVector {
    let mut sums = vec![0.0; dataset.p()];
    for row in dataset.rows() {
        for (s, x) in sums.iter_mut().zip(row) {
            *s += x;
        }
    }
    let root = (dataset.n() as f64).sqrt();
    sums.iter_mut().for_each(|s| *s /= root);
    SumVector {
        values: sums,
        kind: SumKind::X,
    }
}

/// `Sigma_hat = n^{-1} sum_i (X_i - X̄)(X_i - X̄)'` (divisor `n`).
pub fn empirical_covariance(dataset: &Dataset) -> Result<CovMatrix> {
    let (n, p) = (dataset.n(), dataset.p());
    if n < 2 {
        return Err(Error::param("n", "empirical covariance needs n >= 2"));
    }
    let centered = dataset.centered();
    let mut data = vec![0.0; p * p];
    for row in centered.chunks_exact(p) {
        for j in 0..p {
            let a = row[j];
            if a == 0.0 {
                continue;
            }
            let dst = &mut data[j * p..j * p + j + 1];
            for (d, b) in dst.iter_mut().zip(&row[..=j]) {
                *d += a * b;
            }
        }
    }
    let nf = n as f64;
    for j in 0..p {
        for k in 0..=j {
            let v = data[j * p + k] / nf;
            data[j * p + k] = v;
            data[k * p + j] = v;
        }
    }
    Ok(CovMatrix::from_parts(p, data, CovFlavor::Empirical))
}

/// One draw of `L z`, `z` standard normal from the seed's stream.
pub fn gaussian_sum_draw(chol: &CholFactor, seed: u64) -> SumVector {
    let law = GaussianLaw::Factor(chol.clone());
    SumVector {
        values: one_draw(&law, seed),
        kind: SumKind::Y,
    }
}

/// `sqrt(v) S^X + sqrt(1-v) S^Y` with a fresh dataset and an independent Gaussian part.
pub fn interpolated_draw(
    design: &DesignSpec,
    n: usize,
    chol: &CholFactor,
    v: f64,
    seed: u64,
) -> Result<SumVector> {
    let sampler = InterpolatedSampler::new(
        NormalizedSumSampler::new(design, n)?,
        GaussianLaw::Factor(chol.clone()),
        v,
    )?;
    Ok(SumVector {
        values: one_draw(&sampler, seed),
        kind: SumKind::Interpolated { v },
    })
}

pub fn multiplier_draw(dataset: &Dataset, seed: u64) -> SumVector {
    SumVector {
        values: one_draw(&MultiplierSampler::new(dataset), seed),
        kind: SumKind::MultiplierBoot,
    }
}

pub fn empirical_resample_draw(dataset: &Dataset, seed: u64) -> SumVector {
    SumVector {
        values: one_draw(&EmpiricalBootSampler::new(dataset), seed),
        kind: SumKind::EmpiricalBoot,
    }
}

/// Seed of replication `r` in a run seeded with `seed`.
#[inline]
pub fn replication_seed(seed: u64, r: u64) -> u64 {
    mix64(seed, r)
}
