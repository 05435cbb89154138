//! Empirical spectral distribution against the semicircle law on `[−2√2, 2√2]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::Spectrum;
use crate::stats::ks_sorted;
use crate::EDGE;

/// `1/2 + x√(8−x²)/(8π) + arcsin(x/2√2)/π` inside the support.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -EDGE {
        return 0.0;
    }
    if x >= EDGE {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    let v = 0.5 + x * (8.0 - x * x).sqrt() / (8.0 * pi) + (x / EDGE).asin() / pi;
    v.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    /// `count / (total · width)`.
    pub density: f64,
}

/// Equal-width bins spanning `[lo, hi]`; the top edge is closed.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::arg(format!("histogram needs bins > 0 and lo < hi, got {bins} bins on [{lo}, {hi}]")));
    }
    if values.is_empty() {
        return Err(Error::arg("histogram of an empty sample"));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= lo && v <= hi {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    let total = values.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            left: lo + k as f64 * width,
            right: if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width },
            count,
            density: count as f64 / (total * width),
        })
        .collect())
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut s = String::from("bin_left,bin_right,count,density\n");
    for b in bins {
        s.push_str(&format!("{},{},{},{}\n", b.left, b.right, b.count, b.density));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsdReport {
    pub n_eigenvalues: usize,
    pub histogram: Vec<HistogramBin>,
    pub ks: f64,
    pub outside_fraction: f64,
}

/// Histogram over the range covering both the support and the spectrum, so
/// the densities always integrate to 1.
pub fn esd_report(spectrum: &Spectrum, bins: usize) -> Result<EsdReport> {
    if spectrum.is_empty() {
        return Err(Error::arg("empty spectrum"));
    }
    let mut sorted = spectrum.eigenvalues.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite eigenvalue"));
    }
    let lo = sorted[0].min(-EDGE);
    let hi = sorted[sorted.len() - 1].max(EDGE);
    let outside = sorted.iter().filter(|x| x.abs() > EDGE).count();
    Ok(EsdReport {
        n_eigenvalues: sorted.len(),
        histogram: histogram(&sorted, lo, hi, bins)?,
        ks: ks_sorted(&sorted, semicircle_cdf),
        outside_fraction: outside as f64 / sorted.len() as f64,
    })
}
