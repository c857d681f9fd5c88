use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Hyperrectangle, SetDescriptor};
use crate::error::{Error, Result};
use crate::rng::{mix64, substream, tag};
use crate::special::normal_quantile;

/// Probability that a generated rectangle side is unbounded.
const UNBOUNDED_PROB: f64 = 0.5;
const U_LOW: f64 = 0.05;
const U_HIGH: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub label: String,
    #[serde(flatten)]
    pub set: SetDescriptor,
}

/// How a family was generated, kept for provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyGenerator {
    pub kind: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
}

#[derive(Deserialize)]
struct RawFamily {
    sets: Vec<LabeledSet>,
    #[serde(default)]
    generator: Option<FamilyGenerator>,
}

/// A finite, labeled collection of sets of a common dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily")]
pub struct SetFamily {
    sets: Vec<LabeledSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<FamilyGenerator>,
}

impl TryFrom<RawFamily> for SetFamily {
    type Error = Error;
    fn try_from(raw: RawFamily) -> Result<Self> {
        let mut family = SetFamily::new(raw.sets)?;
        family.generator = raw.generator;
        Ok(family)
    }
}

impl SetFamily {
    pub fn new(sets: Vec<LabeledSet>) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::param("family", "needs at least one set"));
        };
        let p = first.set.p();
        if let Some(bad) = sets.iter().find(|s| s.set.p() != p) {
            return Err(Error::Dimension {
                expected: p,
                got: bad.set.p(),
            });
        }
        Ok(SetFamily { sets, generator: None })
    }

    /// Wraps unlabeled sets with labels `set-0`, `set-1`, ...
    pub fn from_sets(sets: Vec<SetDescriptor>) -> Result<Self> {
        SetFamily::new(
            sets.into_iter()
                .enumerate()
                .map(|(k, set)| LabeledSet { label: format!("set-{k}"), set })
                .collect(),
        )
    }

    pub fn p(&self) -> usize {
        self.sets[0].set.p()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[LabeledSet] {
        &self.sets
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.sets.iter().map(|s| s.label.as_str())
    }

    pub fn generator(&self) -> Option<&FamilyGenerator> {
        self.generator.as_ref()
    }

    /// True when every member is a lower orthant `{w <= y}`.
    pub fn all_lower_orthants(&self) -> bool {
        self.sets.iter().all(|s| matches!(&s.set, SetDescriptor::Rect(r) if r.is_lower_orthant()))
    }
}

/// `K` random rectangles scaled by `sqrt(sigma_diag)`. Each side is unbounded
/// with probability 1/2 and otherwise sits at `σ_j Φ^{-1}(u)`, `u ~ U(0.05, 0.95)`.
/// The last member is the max-type orthant `{w : w_j <= σ_j t}` with
/// `t = Φ^{-1}(u^{1/p})`, which has Gaussian probability about `u` under
/// independent coordinates.
pub fn sample_rectangle_family(p: usize, k: usize, sigma_diag: &[f64], seed: u64) -> Result<SetFamily> {
    if k == 0 {
        return Err(Error::param("K", "must be at least 1"));
    }
    if p == 0 || sigma_diag.len() != p {
        return Err(Error::Dimension {
            expected: p,
            got: sigma_diag.len(),
        });
    }
    if sigma_diag.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::param("sigma_diag", "entries must be finite and nonnegative"));
    }
    let sd: Vec<f64> = sigma_diag.iter().map(|s| s.sqrt()).collect();
    let base = mix64(seed, tag::FAMILY);
    let mut sets = Vec::with_capacity(k);
    for idx in 0..k - 1 {
        let mut rng = substream(base, idx as u64);
        let mut lower = vec![f64::NEG_INFINITY; p];
        let mut upper = vec![f64::INFINITY; p];
        for j in 0..p {
            let endpoint = |rng: &mut crate::rng::StreamRng| {
                if rng.random::<f64>() < UNBOUNDED_PROB {
                    None
                } else {
                    Some(sd[j] * normal_quantile(rng.random_range(U_LOW..U_HIGH)))
                }
            };
            let a = endpoint(&mut rng);
            let b = endpoint(&mut rng);
            match (a, b) {
                (Some(a), Some(b)) => {
                    lower[j] = a.min(b);
                    upper[j] = a.max(b);
                }
                (Some(a), None) => lower[j] = a,
                (None, Some(b)) => upper[j] = b,
                (None, None) => {}
            }
        }
        sets.push(LabeledSet {
            label: format!("rect-{idx}"),
            set: SetDescriptor::Rect(Hyperrectangle::new(lower, upper)?),
        });
    }
    let mut rng = substream(base, (k - 1) as u64);
    let u: f64 = rng.random_range(U_LOW..U_HIGH);
    let t = normal_quantile(u.powf(1.0 / p as f64));
    let upper = sd.iter().map(|s| s * t).collect();
    sets.push(LabeledSet {
        label: "max-type".into(),
        set: SetDescriptor::Rect(Hyperrectangle::lower_orthant(upper)?),
    });
    let mut family = SetFamily::new(sets)?;
    family.generator = Some(FamilyGenerator {
        kind: "rectangles".into(),
        k,
        seed,
    });
    Ok(family)
}
