use serde::{Deserialize, Serialize};

use super::check_dim;
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-12;

/// Halfspace `{w : w'v <= c}` with `|v| = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub v: Vec<f64>,
    pub c: f64,
}

impl Facet {
    pub fn new(v: Vec<f64>, c: f64) -> Self {
        Facet { v, c }
    }

    /// Indices with nonzero normal weight.
    pub fn support(&self) -> Vec<usize> {
        self.v
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    #[inline]
    pub(crate) fn value(&self, w: &[f64]) -> f64 {
        self.v.iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

#[derive(Deserialize)]
struct RawPolytope {
    facets: Vec<Facet>,
    #[serde(default)]
    eps: f64,
}

/// Intersection of `m` halfspaces, optionally expanded: membership means
/// `w'v_k <= c_k + eps` for every facet. The base offsets and the expansion
/// are stored separately so repeated expansion composes exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolytope")]
pub struct Polytope {
    facets: Vec<Facet>,
    #[serde(skip_serializing_if = "is_zero")]
    eps: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl TryFrom<RawPolytope> for Polytope {
    type Error = Error;
    fn try_from(raw: RawPolytope) -> Result<Self> {
        let poly = Polytope::new(raw.facets)?;
        expand_polytope(&poly, raw.eps)
    }
}

impl Polytope {
    pub fn new(facets: Vec<Facet>) -> Result<Self> {
        let Some(first) = facets.first() else {
            return Err(Error::param("polytope.facets", "needs at least one facet"));
        };
        let p = first.v.len();
        if p == 0 {
            return Err(Error::param("polytope.facets", "normals must be nonempty"));
        }
        for (k, f) in facets.iter().enumerate() {
            if f.v.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    got: f.v.len(),
                });
            }
            if !f.c.is_finite() || f.v.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("polytope.facets", format!("facet {k} is not finite")));
            }
            let norm = f.v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::param(
                    "polytope.facets",
                    format!("facet {k} normal has norm {norm}, expected 1"),
                ));
            }
        }
        Ok(Polytope { facets, eps: 0.0 })
    }

    pub fn p(&self) -> usize {
        self.facets[0].v.len()
    }

    /// Facet count `m`.
    pub fn m(&self) -> usize {
        self.facets.len()
    }

    /// Facets with their unexpanded offsets.
    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Effective offsets `c_k + eps`.
    pub fn offsets(&self) -> Vec<f64> {
        self.facets.iter().map(|f| f.c + self.eps).collect()
    }

    /// Largest normal support size, i.e. the sparsity level of the facets.
    pub fn max_support(&self) -> usize {
        self.facets.iter().map(|f| f.support().len()).max().unwrap_or(0)
    }

    #[inline]
    pub fn contains_unchecked(&self, w: &[f64]) -> bool {
        self.facets.iter().all(|f| f.value(w) <= f.c + self.eps)
    }

    pub fn contains(&self, w: &[f64]) -> Result<bool> {
        check_dim(self.p(), w)?;
        Ok(self.contains_unchecked(w))
    }

    pub(crate) fn concat(parts: Vec<Polytope>) -> Result<Polytope> {
        let mut facets = Vec::new();
        for part in parts {
            let eps = part.eps;
            facets.extend(part.facets.into_iter().map(|f| Facet::new(f.v, f.c + eps)));
        }
        Polytope::new(facets)
    }
}

/// `A^{m,eps}`: every offset raised by `eps`.
pub fn expand_polytope(poly: &Polytope, eps: f64) -> Result<Polytope> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", format!("must be finite and nonnegative, got {eps}")));
    }
    Ok(Polytope {
        facets: poly.facets.clone(),
        eps: poly.eps + eps,
    })
}
