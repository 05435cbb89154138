//! Fixtures shared by the benchmarks.

use bandclt::{sample_matrix, DenseMatrix, EntryDistribution, MatrixSpec, RngStream};

/// Gaussian band matrix of size `n`, bandwidth `b`, drawn from stream 0 of seed 1.
pub fn gaussian_band(n: usize, b: usize) -> DenseMatrix {
    let spec = MatrixSpec::new(n, b, EntryDistribution::gaussian(), 1).expect("valid spec");
    sample_matrix(&spec, &mut RngStream::new(spec.seed, 0)).expect("sample")
}
