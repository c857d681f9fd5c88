use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovFlavor {
    #[default]
    Population,
    Empirical,
}

#[derive(Deserialize)]
struct RawCov {
    p: usize,
    data: Vec<f64>,
}

/// A symmetric `p x p` covariance matrix, row-major.
///
/// JSON form: `{"p": 3, "data": [row-major entries]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCov")]
pub struct CovMatrix {
    p: usize,
    data: Vec<f64>,
    #[serde(skip)]
    flavor: CovFlavor,
}

impl TryFrom<RawCov> for CovMatrix {
    type Error = Error;
    fn try_from(raw: RawCov) -> Result<Self> {
        CovMatrix::new(raw.p, raw.data, CovFlavor::Population)
    }
}

impl CovMatrix {
    /// Validates symmetry (to 1e-12 relative) and a nonnegative diagonal.
    pub fn new(p: usize, data: Vec<f64>, flavor: CovFlavor) -> Result<Self> {
        if p == 0 {
            return Err(Error::param("sigma.p", "must be positive"));
        }
        if data.len() != p * p {
            return Err(Error::Dimension {
                expected: p * p,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("sigma.data", "entries must be finite"));
        }
        for j in 0..p {
            if data[j * p + j] < 0.0 {
                return Err(Error::param("sigma.data", format!("negative diagonal entry at {j}")));
            }
            for k in 0..j {
                let (a, b) = (data[j * p + k], data[k * p + j]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::param(
                        "sigma.data",
                        format!("not symmetric at ({j}, {k}): {a} vs {b}"),
                    ));
                }
            }
        }
        Ok(CovMatrix { p, data, flavor })
    }

    pub(crate) fn from_parts(p: usize, data: Vec<f64>, flavor: CovFlavor) -> Self {
        debug_assert_eq!(data.len(), p * p);
        CovMatrix { p, data, flavor }
    }

    pub fn identity(p: usize) -> Self {
        let mut data = vec![0.0; p * p];
        for j in 0..p {
            data[j * p + j] = 1.0;
        }
        CovMatrix::from_parts(p, data, CovFlavor::Population)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn flavor(&self) -> CovFlavor {
        self.flavor
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.p + k]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.p).map(|j| self.get(j, j)).collect()
    }

    pub fn scaled(&self, c: f64) -> CovMatrix {
        CovMatrix::from_parts(self.p, self.data.iter().map(|v| v * c).collect(), self.flavor)
    }

    /// `v1' M v2`.
    pub fn bilinear(&self, v1: &[f64], v2: &[f64]) -> f64 {
        let mut total = 0.0;
        for (j, a) in v1.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            let row = &self.data[j * self.p..(j + 1) * self.p];
            total += a * row.iter().zip(v2).map(|(m, b)| m * b).sum::<f64>();
        }
        total
    }
}

/// Lower-triangular factor `L` with `L L' ≈ Sigma + jitter I`.
#[derive(Clone, Debug, PartialEq)]
pub struct CholFactor {
    p: usize,
    lower: Vec<f64>,
    jitter_used: f64,
}

/// Jitter retries performed by [`cholesky_psd`] after the plain attempt.
pub const CHOLESKY_RETRIES: u32 = 21;

impl CholFactor {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.lower[j * self.p + k]
    }

    /// `out = L z`.
    #[inline]
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.lower[j * self.p..j * self.p + j + 1];
            *o = row.iter().zip(z).map(|(l, z)| l * z).sum();
        }
    }

    /// `L L'`, for reconstruction checks.
    pub fn reconstruct(&self) -> CovMatrix {
        let p = self.p;
        let mut data = vec![0.0; p * p];
        for j in 0..p {
            for k in 0..=j {
                let s: f64 = (0..=k).map(|m| self.get(j, m) * self.get(k, m)).sum();
                data[j * p + k] = s;
                data[k * p + j] = s;
            }
        }
        CovMatrix::from_parts(p, data, CovFlavor::Population)
    }
}

/// Cholesky factorization with diagonal jitter on failure.
///
/// Tries the plain factorization first; on failure adds `base_jitter * 2^k`
/// to the diagonal for `k = 0..=20` and retries.
pub fn cholesky_psd(cov: &CovMatrix, base_jitter: f64) -> Result<CholFactor> {
    let p = cov.p();
    let base = DMatrix::from_row_slice(p, p, cov.data());
    let attempt = |jitter: f64| {
        let mut m = base.clone();
        for j in 0..p {
            m[(j, j)] += jitter;
        }
        m.cholesky().map(|c| c.unpack())
    };
    let zero_diag = (0..p).all(|j| cov.get(j, j) == 0.0);
    let mut found = if zero_diag {
        // the zero matrix has the zero factor
        cov.data()
            .iter()
            .all(|v| *v == 0.0)
            .then(|| DMatrix::zeros(p, p))
            .map(|l| (l, 0.0))
    } else {
        attempt(0.0).map(|l| (l, 0.0))
    };
    if found.is_none() && base_jitter > 0.0 {
        for k in 0..CHOLESKY_RETRIES {
            let jitter = base_jitter * 2f64.powi(k as i32);
            if let Some(l) = attempt(jitter) {
                found = Some((l, jitter));
                break;
            }
        }
    }
    let (l, jitter_used) = found.ok_or(Error::NotPsd {
        attempts: CHOLESKY_RETRIES,
    })?;
    let mut lower = vec![0.0; p * p];
    for j in 0..p {
        for k in 0..=j {
            lower[j * p + k] = l[(j, k)];
        }
    }
    Ok(CholFactor {
        p,
        lower,
        jitter_used,
    })
}
