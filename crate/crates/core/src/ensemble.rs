//! Periodic symmetric random band matrices.
//!
//! `m_jk = m_kj = w_jk / √b` when the circular distance `d_n(j, k) ≤ b`,
//! otherwise zero. Off-diagonal `w_jk` have mean 0 and variance 1, diagonal
//! `w_jj` have mean 0 and variance `σ²`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::EDGE;

/// Circular distance `min(|j−k|, n−|j−k|)` between 1-based indices.
pub fn circ_distance(j: usize, k: usize, n: usize) -> Result<usize> {
    if j == 0 || k == 0 || j > n || k > n {
        return Err(Error::arg(format!("indices ({j}, {k}) outside 1..={n}")));
    }
    Ok(circ_distance0(j - 1, k - 1, n))
}

#[inline]
pub(crate) fn circ_distance0(j: usize, k: usize, n: usize) -> usize {
    let d = j.abs_diff(k);
    d.min(n - d)
}

/// Limiting spectral density `√(8−x²)/(4π)` on `[−2√2, 2√2]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= EDGE {
        0.0
    } else {
        (8.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistKind {
    Gaussian,
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// Symmetric ±1.
    Rademacher,
}

impl DistKind {
    /// Fourth moment of the unit-variance off-diagonal law.
    pub fn mu4(self) -> f64 {
        match self {
            DistKind::Gaussian => 3.0,
            DistKind::Uniform => 9.0 / 5.0,
            DistKind::Rademacher => 1.0,
        }
    }

    fn draw_unit<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            DistKind::Gaussian => rng.sample(StandardNormal),
            DistKind::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            DistKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistKind::Gaussian => "gaussian",
            DistKind::Uniform => "uniform",
            DistKind::Rademacher => "rademacher",
        })
    }
}

impl FromStr for DistKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(DistKind::Gaussian),
            "uniform" => Ok(DistKind::Uniform),
            "rademacher" | "sign" => Ok(DistKind::Rademacher),
            other => Err(Error::arg(format!("unknown entry distribution '{other}'"))),
        }
    }
}

/// Entry law: off-diagonal entries have unit variance and fourth moment fixed
/// by `kind`; diagonal entries are the same law scaled to variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryDistribution {
    pub kind: DistKind,
    pub sigma2: f64,
}

impl EntryDistribution {
    pub fn new(kind: DistKind, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::arg(format!("diagonal variance must be finite and nonnegative, got {sigma2}")));
        }
        Ok(Self { kind, sigma2 })
    }

    pub fn gaussian() -> Self {
        Self { kind: DistKind::Gaussian, sigma2: 1.0 }
    }

    pub fn mu4(&self) -> f64 {
        self.kind.mu4()
    }

    /// Fourth cumulant `μ4 − 3`.
    pub fn kappa4(&self) -> f64 {
        self.kind.mu4() - 3.0
    }
}

impl Default for EntryDistribution {
    fn default() -> Self {
        Self::gaussian()
    }
}

/// Everything needed to define one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub n: usize,
    pub b: usize,
    pub dist: EntryDistribution,
    pub seed: u64,
}

impl MatrixSpec {
    pub fn new(n: usize, b: usize, dist: EntryDistribution, seed: u64) -> Result<Self> {
        let spec = Self { n, b, dist, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::arg(format!("dimension must be at least 2, got {}", self.n)));
        }
        if self.b < 1 || 2 * self.b + 1 > self.n {
            return Err(Error::arg(format!(
                "bandwidth must satisfy 1 <= b <= (n-1)/2, got n={} b={}",
                self.n, self.b
            )));
        }
        self.dist.validate()
    }

    pub fn index_set(&self) -> BandIndexSet {
        BandIndexSet { n: self.n, b: self.b }
    }

    /// `√(b/n)`, the normalization of the linear statistic.
    pub fn scale(&self) -> f64 {
        (self.b as f64 / self.n as f64).sqrt()
    }
}

impl EntryDistribution {
    fn validate(&self) -> Result<()> {
        Self::new(self.kind, self.sigma2).map(|_| ())
    }
}

/// Membership predicates for `I_n`, `I_n^+` and `I_1` (1-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandIndexSet {
    pub n: usize,
    pub b: usize,
}

impl BandIndexSet {
    /// `(j, k) ∈ I_n`.
    pub fn contains(&self, j: usize, k: usize) -> bool {
        circ_distance(j, k, self.n).is_ok_and(|d| d <= self.b)
    }

    /// `(j, k) ∈ I_n^+`.
    pub fn contains_upper(&self, j: usize, k: usize) -> bool {
        j <= k && self.contains(j, k)
    }

    /// `I_1 = {1 < j ≤ n : (1, j) ∈ I_n}`, 1-based and ascending.
    pub fn i1(&self) -> Vec<usize> {
        (2..=self.n).filter(|&j| self.contains(1, j)).collect()
    }

    /// `I_1` as 0-based row indices.
    pub fn i1_zero_based(&self) -> Vec<usize> {
        self.i1().into_iter().map(|j| j - 1).collect()
    }
}

/// Counter-based random stream: a ChaCha8 key derived from the seed plus a
/// 64-bit stream id. Distinct ids give statistically independent sequences and
/// any stream can be reconstructed without replaying others.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(0);
        Self { rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |m_jk − m_kj|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &bv) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * bv;
                }
            }
        }
        out
    }

    /// `max |a_ij − b_ij|`.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Draws one matrix of the ensemble from `stream`.
///
/// Draw order is fixed: rows ascending, then circular offsets `0..=b`, so the
/// result is a pure function of `(spec, stream)`.
pub fn sample_matrix(spec: &MatrixSpec, stream: &mut RngStream) -> Result<DenseMatrix> {
    spec.validate()?;
    let MatrixSpec { n, b, dist, .. } = *spec;
    let inv_sqrt_b = 1.0 / (b as f64).sqrt();
    let sigma = dist.sigma2.sqrt();
    let rng = stream.rng();
    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        m[(i, i)] = sigma * dist.kind.draw_unit(rng) * inv_sqrt_b;
        for offset in 1..=b {
            let j = (i + offset) % n;
            let v = dist.kind.draw_unit(rng) * inv_sqrt_b;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}
