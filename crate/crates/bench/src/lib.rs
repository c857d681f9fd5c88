//! Fixtures shared by the throughput benchmarks.

use hdclt_core::datagen::{sample_dataset, CovModel, Dataset, DesignKind, DesignSpec};
use hdclt_core::geometry::{sample_rectangle_family, Piece, SetFamily, SparseConvexSet};
use hdclt_core::sums::CovMatrix;

pub const SEED: u64 = 0x5eed;

pub struct RhoFixture {
    pub design: DesignSpec,
    pub n: usize,
    pub sigma: CovMatrix,
    pub family: SetFamily,
}

/// A design of dimension `p` at sample size `n` with a `k`-member rectangle family.
pub fn rho_fixture(kind: DesignKind, p: usize, n: usize, k: usize) -> RhoFixture {
    let design = DesignSpec::new(kind, p);
    let sigma = design.covariance_matrix();
    let family = sample_rectangle_family(p, k, &sigma.diagonal(), SEED).expect("valid family");
    RhoFixture { design, n, sigma, family }
}

/// Gaussian AR(1) dataset for the bootstrap benchmarks.
pub fn ar1_dataset(p: usize, n: usize) -> Dataset {
    let design = DesignSpec::new(DesignKind::GaussianExact, p).with_covariance(CovModel::Ar1 { r: 0.5 });
    sample_dataset(&design, n, SEED).expect("valid design")
}

pub fn unit_disk() -> SparseConvexSet {
    SparseConvexSet::new(2, 2, vec![Piece::ball(vec![0, 1], vec![0.0, 0.0], 1.0)]).expect("valid disk")
}

pub fn unit_ball3() -> SparseConvexSet {
    SparseConvexSet::new(3, 3, vec![Piece::ball(vec![0, 1, 2], vec![0.0, 0.0, 0.0], 1.0)]).expect("valid ball")
}
