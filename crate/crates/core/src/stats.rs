//! Normality diagnostics on fluctuation samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample mean, unbiased variance and standardized central moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (`n − 1`) variance.
    pub variance: f64,
    /// `m3 / m2^{3/2}` with population central moments.
    pub skewness: f64,
    /// `m4 / m2²`; 3 for a Gaussian.
    pub kurtosis_ratio: f64,
}

impl MomentSummary {
    pub fn excess_kurtosis(&self) -> f64 {
        self.kurtosis_ratio - 3.0
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }

    /// Standard error of the unbiased variance, `√((m4 − m2²(n−3)/(n−1))/n)`.
    pub fn variance_std_error(&self) -> f64 {
        let n = self.count as f64;
        let m2 = self.variance * (n - 1.0) / n;
        let m4 = self.kurtosis_ratio * m2 * m2;
        ((m4 - self.variance * self.variance * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
    }
}

/// Two-pass central moments. Needs at least 4 samples and positive variance.
pub fn moment_summary(samples: &[f64]) -> Result<MomentSummary> {
    if samples.len() < 4 {
        return Err(Error::arg(format!("moment summary needs at least 4 samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite sample"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if !(m2 > 0.0) || m2 <= 1e-28 * mean * mean {
        return Err(Error::numeric("degenerate sample: variance is zero"));
    }
    Ok(MomentSummary {
        count: samples.len(),
        mean,
        variance: m2 * n / (n - 1.0),
        skewness: m3 / m2.powf(1.5),
        kurtosis_ratio: m4 / (m2 * m2),
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation polished by two
/// Newton steps on `normal_cdf`.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let lo = 0.02425;
    let mut x = if p < lo {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p > 1.0 - lo {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf > 0.0 {
            x -= (normal_cdf(x) - p) / pdf;
        }
    }
    x
}

/// `(n/6)(S² + K²/4)` and its χ²(2) tail probability `exp(−x/2)`.
pub fn jarque_bera(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 20 {
        return Err(Error::arg(format!("Jarque–Bera needs at least 20 samples, got {}", samples.len())));
    }
    let m = moment_summary(samples)?;
    let stat = jarque_bera_from_moments(samples.len(), m.skewness, m.excess_kurtosis());
    Ok((stat, chi2_2_tail(stat)))
}

pub fn jarque_bera_from_moments(n: usize, skewness: f64, excess_kurtosis: f64) -> f64 {
    n as f64 / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0)
}

pub fn chi2_2_tail(x: f64) -> f64 {
    (-0.5 * x.max(0.0)).exp()
}

/// Sup distance between the empirical CDF and the normal with the sample's
/// own mean and standard deviation.
pub fn ks_normal(samples: &[f64]) -> Result<f64> {
    if samples.len() < 20 {
        return Err(Error::arg(format!("KS needs at least 20 samples, got {}", samples.len())));
    }
    let m = moment_summary(samples)?;
    let sd = m.variance.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ks_sorted(&sorted, |x| normal_cdf((x - m.mean) / sd)))
}

/// KS distance of a sorted sample to a continuous CDF.
pub(crate) fn ks_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        // Step over ties so the jump is taken in one piece.
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let f = cdf(sorted[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    d.min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub sample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub n_samples: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_ratio: f64,
    pub jarque_bera_stat: f64,
    pub jarque_bera_pvalue: f64,
    /// Against the fitted normal; descriptive only.
    pub ks_stat: f64,
    /// Sorted samples against normal quantiles at `(i + 1/2)/n`.
    pub qq: Vec<QqPoint>,
}

impl NormalityReport {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let m = moment_summary(samples)?;
        let (jb, p) = jarque_bera(samples)?;
        let ks = ks_normal(samples)?;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let qq = sorted
            .iter()
            .enumerate()
            .map(|(i, &s)| QqPoint { theoretical: normal_quantile((i as f64 + 0.5) / n), sample: s })
            .collect();
        Ok(Self {
            n_samples: samples.len(),
            skewness: m.skewness,
            excess_kurtosis: m.excess_kurtosis(),
            kurtosis_ratio: m.kurtosis_ratio,
            jarque_bera_stat: jb,
            jarque_bera_pvalue: p,
            ks_stat: ks,
            qq,
        })
    }

    pub fn qq_csv(&self) -> String {
        let mut s = String::from("theoretical,sample\n");
        for q in &self.qq {
            s.push_str(&format!("{},{}\n", q.theoretical, q.sample));
        }
        s
    }
}
