//! Set classes: hyperrectangles, m-generated polytopes with ε-expansions,
//! and s-sparsely convex sets, plus the constructive polytope approximation
//! of coordinate-sparse balls.
//!
//! All sets are closed: boundary points are members.
//!
//! JSON descriptors:
//!
//! ```text
//! {"kind":"rect","lower":[...],"upper":[...]}           // "-inf"/"inf" sentinels allowed
//! {"kind":"polytope","facets":[{"v":[...],"c":...}],"eps":0.0}
//! {"kind":"sparse","p":...,"s":...,"pieces":[
//!     {"type":"halfspace","v":[...],"c":...},
//!     {"type":"ball","J":[...],"center":[...],"radius":...}]}
//! ```

mod approx;
mod family;
mod polytope;
mod rect;
mod sparse;

pub use approx::{approximate_sparse_ball, sandwich_check, sparsify_to_polytope};
pub use family::{sample_rectangle_family, FamilyGenerator, LabeledSet, SetFamily};
pub use polytope::{expand_polytope, Facet, Polytope};
pub use rect::Hyperrectangle;
pub use sparse::{Piece, SparseConvexSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Any supported set, tagged by kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetDescriptor {
    Rect(Hyperrectangle),
    Polytope(Polytope),
    Sparse(SparseConvexSet),
}

impl SetDescriptor {
    pub fn p(&self) -> usize {
        match self {
            SetDescriptor::Rect(r) => r.p(),
            SetDescriptor::Polytope(q) => q.p(),
            SetDescriptor::Sparse(s) => s.p(),
        }
    }

    /// Membership without the dimension check; `w` must have length `p()`.
    #[inline]
    pub fn contains_unchecked(&self, w: &[f64]) -> bool {
        match self {
            SetDescriptor::Rect(r) => r.contains_unchecked(w),
            SetDescriptor::Polytope(q) => q.contains_unchecked(w),
            SetDescriptor::Sparse(s) => s.contains_unchecked(w),
        }
    }

    pub fn contains(&self, w: &[f64]) -> Result<bool> {
        check_dim(self.p(), w)?;
        Ok(self.contains_unchecked(w))
    }
}

pub(crate) fn check_dim(p: usize, w: &[f64]) -> Result<()> {
    if w.len() == p {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: p,
            got: w.len(),
        })
    }
}

/// Serde helper for vectors that may hold ±∞, written as `"inf"` / `"-inf"`.
pub(crate) mod inf_vec {
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = v
            .iter()
            .map(|x| {
                if *x == f64::INFINITY {
                    Entry::Text("inf".into())
                } else if *x == f64::NEG_INFINITY {
                    Entry::Text("-inf".into())
                } else {
                    Entry::Num(*x)
                }
            })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        entries
            .into_iter()
            .map(|e| match e {
                Entry::Num(x) => Ok(x),
                Entry::Text(t) => match t.as_str() {
                    "inf" | "+inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    other => Err(D::Error::custom(format!("`{other}` is not a number or ±inf sentinel"))),
                },
            })
            .collect()
    }
}
