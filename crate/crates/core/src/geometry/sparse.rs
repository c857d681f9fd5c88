use serde::{Deserialize, Serialize};

use super::check_dim;
use crate::error::{Error, Result};

/// One constituent of an s-sparsely convex set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Piece {
    /// `{w : w'v <= c}`, `v` a full-length vector with at most `s` nonzeros.
    Halfspace { v: Vec<f64>, c: f64 },
    /// `{w : sum_{j in J} (w_j - center_j)^2 <= radius^2}`.
    Ball {
        #[serde(rename = "J")]
        coords: Vec<usize>,
        center: Vec<f64>,
        radius: f64,
    },
}

impl Piece {
    pub fn halfspace(v: Vec<f64>, c: f64) -> Self {
        Piece::Halfspace { v, c }
    }

    pub fn ball(coords: Vec<usize>, center: Vec<f64>, radius: f64) -> Self {
        Piece::Ball { coords, center, radius }
    }

    /// Number of coordinates the indicator depends on.
    pub fn sparsity(&self) -> usize {
        match self {
            Piece::Halfspace { v, .. } => v.iter().filter(|x| **x != 0.0).count(),
            Piece::Ball { coords, .. } => coords.len(),
        }
    }

    #[inline]
    fn holds(&self, w: &[f64]) -> bool {
        match self {
            Piece::Halfspace { v, c } => v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() <= *c,
            Piece::Ball { coords, center, radius } => {
                let d2: f64 = coords
                    .iter()
                    .zip(center)
                    .map(|(&j, m)| (w[j] - m) * (w[j] - m))
                    .sum();
                d2 <= radius * radius
            }
        }
    }

    fn validate(&self, p: usize, s: usize) -> Result<()> {
        match self {
            Piece::Halfspace { v, c } => {
                if v.len() != p {
                    return Err(Error::Dimension { expected: p, got: v.len() });
                }
                if !c.is_finite() || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::param("sparse.pieces", "halfspace entries must be finite"));
                }
                if v.iter().all(|x| *x == 0.0) {
                    return Err(Error::param("sparse.pieces", "halfspace normal must be nonzero"));
                }
            }
            Piece::Ball { coords, center, radius } => {
                if coords.is_empty() || coords.len() != center.len() {
                    return Err(Error::param("sparse.pieces", "ball needs J and center of equal nonzero length"));
                }
                if let Some(&j) = coords.iter().find(|&&j| j >= p) {
                    return Err(Error::param("sparse.pieces", format!("ball coordinate {j} out of range for p={p}")));
                }
                let mut sorted = coords.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != coords.len() {
                    return Err(Error::param("sparse.pieces", "ball coordinates must be distinct"));
                }
                if !(*radius > 0.0 && radius.is_finite()) || center.iter().any(|x| !x.is_finite()) {
                    return Err(Error::param("sparse.pieces", "ball needs a finite center and positive radius"));
                }
            }
        }
        if self.sparsity() > s {
            return Err(Error::param(
                "sparse.pieces",
                format!("piece depends on {} coordinates, more than s={s}", self.sparsity()),
            ));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawSparse {
    p: usize,
    s: usize,
    pieces: Vec<Piece>,
}

/// Intersection of `Q` pieces, each depending on at most `s` coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSparse")]
pub struct SparseConvexSet {
    p: usize,
    s: usize,
    pieces: Vec<Piece>,
}

impl TryFrom<RawSparse> for SparseConvexSet {
    type Error = Error;
    fn try_from(raw: RawSparse) -> Result<Self> {
        SparseConvexSet::new(raw.p, raw.s, raw.pieces)
    }
}

impl SparseConvexSet {
    pub fn new(p: usize, s: usize, pieces: Vec<Piece>) -> Result<Self> {
        if p == 0 || s == 0 {
            return Err(Error::param("sparse", "p and s must be positive"));
        }
        if pieces.is_empty() {
            return Err(Error::param("sparse.pieces", "needs at least one piece"));
        }
        for piece in &pieces {
            piece.validate(p, s)?;
        }
        Ok(SparseConvexSet { p, s, pieces })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Piece count `Q`.
    pub fn q(&self) -> usize {
        self.pieces.len()
    }

    #[inline]
    pub fn contains_unchecked(&self, w: &[f64]) -> bool {
        self.pieces.iter().all(|piece| piece.holds(w))
    }

    pub fn contains(&self, w: &[f64]) -> Result<bool> {
        check_dim(self.p, w)?;
        Ok(self.contains_unchecked(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_and_halfspace() -> SparseConvexSet {
        SparseConvexSet::new(
            3,
            2,
            vec![
                Piece::ball(vec![0, 1], vec![0.0, 0.0], 1.0),
                Piece::halfspace(vec![0.0, 0.0, 1.0], 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn membership_requires_every_piece() {
        let set = disk_and_halfspace();
        assert!(set.contains(&[0.6, 0.8, -1.0]).unwrap());
        assert!(!set.contains(&[0.6, 0.81, -1.0]).unwrap());
        assert!(!set.contains(&[0.0, 0.0, 0.5]).unwrap());
        assert!(set.contains(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn sparsity_is_enforced() {
        let dense = Piece::halfspace(vec![1.0, 1.0, 1.0], 0.0);
        assert!(SparseConvexSet::new(3, 2, vec![dense]).is_err());
        let out_of_range = Piece::ball(vec![0, 3], vec![0.0, 0.0], 1.0);
        assert!(SparseConvexSet::new(3, 2, vec![out_of_range]).is_err());
        let repeated = Piece::ball(vec![1, 1], vec![0.0, 0.0], 1.0);
        assert!(SparseConvexSet::new(3, 2, vec![repeated]).is_err());
        assert!(SparseConvexSet::new(3, 2, vec![]).is_err());
    }
}
