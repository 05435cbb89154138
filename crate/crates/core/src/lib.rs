//! Linear eigenvalue statistics of periodic random band matrices.
//!
//! The crate has two halves that are meant to be checked against each other:
//!
//! * a Monte Carlo side ([`ensemble`], [`spectra`], [`harness`], [`stats`],
//!   [`semicircle`]) that samples symmetric band matrices with circular
//!   bandwidth `b`, computes `N_n(φ) = Σ φ(λ_i)` and studies the fluctuations
//!   of `√(b/n)·N_n(φ)`;
//! * a limit-object side ([`combinatorics`], [`chebyshev`], [`quadrature`])
//!   that evaluates the limiting bilinear form `⟨f, g⟩`, the two-point kernel
//!   `F(x, y)` and the three terms of the limiting variance `V(φ)`, each by two
//!   independent routes.
//!
//! Everything is deterministic given its inputs; the Monte Carlo harness keys
//! one counter-based random stream per sample so results do not depend on the
//! number of worker threads.

pub mod chebyshev;
pub mod combinatorics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod quadrature;
pub mod semicircle;
pub mod spectra;
pub mod stats;
pub mod testfn;

pub use chebyshev::{bilinear_form, kernel_series, semicircle_coeff, u_poly, ChebSeries, KernelSeries};
pub use combinatorics::{c_lm, dyck_count, gamma, gamma_by_quadrature, monomial_inner, ExactRational};
pub use ensemble::{
    circ_distance, sample_matrix, semicircle_density, BandIndexSet, DenseMatrix, DistKind, EntryDistribution,
    MatrixSpec, RngStream,
};
pub use error::{Error, Result};
pub use harness::{run_ensemble, Bandwidth, RunConfig, RunSummary, SampleRecord};
pub use quadrature::{kernel_integral, stieltjes_f, variance_total, KernelGrid, VarianceBreakdown, VarianceVariant};
pub use spectra::{eigen, linear_statistic, matrix_function, normalized_statistic, resolvent_trace, Spectrum};
pub use stats::{jarque_bera, ks_normal, moment_summary, NormalityReport};
pub use testfn::TestFunction;

pub use num_complex::Complex64;

/// Library version embedded in every output document.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `2√2`, the edge of the limiting spectrum.
pub const EDGE: f64 = 2.0 * std::f64::consts::SQRT_2;
