use serde::{Deserialize, Serialize};

use super::{check_dim, inf_vec};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct RawRect {
    #[serde(with = "inf_vec")]
    lower: Vec<f64>,
    #[serde(with = "inf_vec")]
    upper: Vec<f64>,
}

/// `{w : lower_j <= w_j <= upper_j for all j}`. Sides may be infinite; a
/// rectangle with some `lower_j > upper_j` is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRect")]
pub struct Hyperrectangle {
    #[serde(with = "inf_vec")]
    lower: Vec<f64>,
    #[serde(with = "inf_vec")]
    upper: Vec<f64>,
}

impl TryFrom<RawRect> for Hyperrectangle {
    type Error = Error;
    fn try_from(raw: RawRect) -> Result<Self> {
        Hyperrectangle::new(raw.lower, raw.upper)
    }
}

impl Hyperrectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::param("rect", "needs at least one coordinate"));
        }
        if lower.iter().any(|a| a.is_nan() || *a == f64::INFINITY) {
            return Err(Error::param("rect.lower", "entries must lie in [-inf, inf)"));
        }
        if upper.iter().any(|b| b.is_nan() || *b == f64::NEG_INFINITY) {
            return Err(Error::param("rect.upper", "entries must lie in (-inf, inf]"));
        }
        Ok(Hyperrectangle { lower, upper })
    }

    /// The whole space `R^p`.
    pub fn full(p: usize) -> Self {
        Hyperrectangle {
            lower: vec![f64::NEG_INFINITY; p],
            upper: vec![f64::INFINITY; p],
        }
    }

    /// Lower orthant `{w : w <= y}`.
    pub fn lower_orthant(y: Vec<f64>) -> Result<Self> {
        let lower = vec![f64::NEG_INFINITY; y.len()];
        Hyperrectangle::new(lower, y)
    }

    pub fn p(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_lower_orthant(&self) -> bool {
        self.lower.iter().all(|a| *a == f64::NEG_INFINITY)
    }

    #[inline]
    pub fn contains_unchecked(&self, w: &[f64]) -> bool {
        w.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    pub fn contains(&self, w: &[f64]) -> Result<bool> {
        check_dim(self.p(), w)?;
        Ok(self.contains_unchecked(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_membership() {
        let r = Hyperrectangle::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(r.contains(&[0.5, -0.2]).unwrap());
        assert!(r.contains(&[1.0, -1.0]).unwrap());
        assert!(!r.contains(&[1.0 + 1e-15, 0.0]).unwrap());
    }

    #[test]
    fn infinite_and_empty_sides() {
        let full = Hyperrectangle::full(3);
        assert!(full.contains(&[1e300, -1e300, 0.0]).unwrap());
        let empty = Hyperrectangle::new(vec![1.0, f64::NEG_INFINITY], vec![0.0, f64::INFINITY]).unwrap();
        assert!(!empty.contains(&[0.5, 0.0]).unwrap());
        assert!(Hyperrectangle::new(vec![f64::INFINITY], vec![1.0]).is_err());
        assert!(Hyperrectangle::new(vec![0.0], vec![f64::NAN]).is_err());
    }
}
