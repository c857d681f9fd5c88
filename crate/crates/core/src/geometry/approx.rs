use std::f64::consts::PI;

use rand::Rng;

use super::{expand_polytope, Facet, Piece, Polytope, SparseConvexSet};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Polytope `A^m` with normals supported on `coords` such that
/// `A^m ⊆ Ball(center, radius) ⊆ A^{m,eps}` inside `R^p`.
///
/// Two coordinates: `m` equiangular normals with offsets `r cos(π/m)`.
/// Three coordinates: spherical Fibonacci normals whose covering angle is
/// bounded from above on a cube-sphere mesh; `m` grows until the bound
/// satisfies `r (1 - cos θ) <= eps`, and offsets are `r cos θ`.
pub fn approximate_sparse_ball(
    p: usize,
    coords: &[usize],
    center: &[f64],
    radius: f64,
    eps: f64,
) -> Result<Polytope> {
    if coords.len() != center.len() {
        return Err(Error::Dimension {
            expected: coords.len(),
            got: center.len(),
        });
    }
    if let Some(&j) = coords.iter().find(|&&j| j >= p) {
        return Err(Error::param("J", format!("coordinate {j} out of range for p={p}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param("radius", "must be positive and finite"));
    }
    if !(eps > 0.0 && eps < radius) {
        return Err(Error::param("eps", format!("need 0 < eps < r, got eps={eps}, r={radius}")));
    }
    let (normals, h) = match coords.len() {
        2 => polygon_normals(radius, eps),
        3 => sphere_normals(radius, eps),
        k => return Err(Error::Unsupported(format!("ball approximation for |J|={k}; only 2 and 3 are supported"))),
    };
    let facets = normals
        .into_iter()
        .map(|u| {
            let mut v = vec![0.0; p];
            let mut shift = 0.0;
            for ((&j, &uj), &cj) in coords.iter().zip(&u).zip(center) {
                v[j] = uj;
                shift += uj * cj;
            }
            Facet::new(v, h + shift)
        })
        .collect();
    Polytope::new(facets)
}

/// Facet count for the two-coordinate construction.
pub(crate) fn polygon_facets(radius: f64, eps: f64) -> usize {
    let x = PI / (1.0 - eps / radius).acos();
    // Guard against x landing a hair above an integer through rounding.
    let m = (x - 1e-9 * x).ceil() as usize;
    m.max(3)
}

/// Fraction of the angular step by which both constructions are rotated, so
/// no normal lands on a coordinate axis and every normal uses all of `J`.
const PHASE: f64 = std::f64::consts::SQRT_2 - 1.0;

fn polygon_normals(radius: f64, eps: f64) -> (Vec<Vec<f64>>, f64) {
    let m = polygon_facets(radius, eps);
    let normals = (0..m)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + PHASE) / m as f64;
            let (s, c) = t.sin_cos();
            let n = (c * c + s * s).sqrt();
            vec![c / n, s / n]
        })
        .collect();
    (normals, radius * (PI / m as f64).cos())
}

fn fibonacci_sphere(m: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    // Tilt about the x axis so no point lies on a coordinate plane.
    let (ts, tc) = (PHASE).sin_cos();
    (0..m)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / m as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = ((k as f64 + PHASE) * golden).sin_cos();
            let (x, y) = (rho * c, rho * s);
            normalize([x, tc * y - ts * z, ts * y + tc * z])
        })
        .collect()
}

fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    d.acos()
}

fn normalize(x: [f64; 3]) -> [f64; 3] {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    [x[0] / n, x[1] / n, x[2] / n]
}

/// Maps gnomonic coordinates on cube face `f` to a unit direction.
fn face_point(f: usize, a: f64, b: f64) -> [f64; 3] {
    let raw = match f {
        0 => [1.0, a, b],
        1 => [-1.0, a, b],
        2 => [a, 1.0, b],
        3 => [a, -1.0, b],
        4 => [a, b, 1.0],
        _ => [a, b, -1.0],
    };
    normalize(raw)
}

/// Upper bound on `max_{x in S^2} min_k angle(x, normals_k)`.
///
/// Every point of the sphere lies in some mesh cell; its angle to the nearest
/// normal is at most the cell center's nearest-normal angle plus the cell's
/// angular radius (the largest center-to-corner angle, the cells being
/// geodesically convex).
pub(crate) fn covering_angle_bound(normals: &[[f64; 3]], cells: usize) -> f64 {
    let step = 2.0 / cells as f64;
    let mut worst = 0.0f64;
    for f in 0..6 {
        for i in 0..cells {
            for k in 0..cells {
                let (a0, b0) = (-1.0 + i as f64 * step, -1.0 + k as f64 * step);
                let c = face_point(f, a0 + 0.5 * step, b0 + 0.5 * step);
                let radius = [(0.0, 0.0), (step, 0.0), (0.0, step), (step, step)]
                    .iter()
                    .map(|(da, db)| angle(&c, &face_point(f, a0 + da, b0 + db)))
                    .fold(0.0f64, f64::max);
                let nearest = normals
                    .iter()
                    .map(|u| u[0] * c[0] + u[1] * c[1] + u[2] * c[2])
                    .fold(f64::NEG_INFINITY, f64::max)
                    .clamp(-1.0, 1.0)
                    .acos();
                worst = worst.max(nearest + radius);
            }
        }
    }
    worst
}

fn sphere_normals(radius: f64, eps: f64) -> (Vec<Vec<f64>>, f64) {
    let target = (1.0 - eps / radius).acos();
    // Cell radius is about 1.41/cells; keep it near a fifth of the target.
    let cells = ((7.0 / target).ceil() as usize).max(16);
    let mut m = ((4.837 / (target * target)).ceil() as usize).max(8);
    loop {
        let normals = fibonacci_sphere(m);
        let theta = covering_angle_bound(&normals, cells);
        if theta < PI / 2.0 && radius * (1.0 - theta.cos()) <= eps {
            let h = radius * theta.cos();
            return (normals.into_iter().map(|u| u.to_vec()).collect(), h);
        }
        m = (m as f64 * 1.1).ceil() as usize;
    }
}

/// Replaces each ball piece by its polytope approximation and normalizes
/// halfspace pieces, so the result `P` satisfies `P ⊆ A ⊆ P^eps`.
pub fn sparsify_to_polytope(set: &SparseConvexSet, eps: f64) -> Result<Polytope> {
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive"));
    }
    let p = set.p();
    let mut parts = Vec::with_capacity(set.q());
    for piece in set.pieces() {
        match piece {
            Piece::Halfspace { v, c } => {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let unit: Vec<f64> = v.iter().map(|x| x / n).collect();
                parts.push(Polytope::new(vec![Facet::new(unit, c / n)])?);
            }
            Piece::Ball { coords, center, radius } => {
                parts.push(approximate_sparse_ball(p, coords, center, *radius, eps)?);
            }
        }
    }
    Polytope::concat(parts)
}

/// Counts uniform points of `[-h, h]^p` breaking `inner ⊆ set ⊆ inner^eps`.
pub fn sandwich_check(
    inner: &Polytope,
    set: &SparseConvexSet,
    eps: f64,
    trials: usize,
    box_halfwidth: f64,
    seed: u64,
) -> Result<usize> {
    if inner.p() != set.p() {
        return Err(Error::Dimension {
            expected: set.p(),
            got: inner.p(),
        });
    }
    let outer = expand_polytope(inner, eps)?;
    let mut rng = stream(seed);
    let mut w = vec![0.0; set.p()];
    let mut violations = 0;
    for _ in 0..trials {
        for x in w.iter_mut() {
            *x = rng.random_range(-box_halfwidth..=box_halfwidth);
        }
        let in_set = set.contains_unchecked(&w);
        if (inner.contains_unchecked(&w) && !in_set) || (in_set && !outer.contains_unchecked(&w)) {
            violations += 1;
        }
    }
    Ok(violations)
}
