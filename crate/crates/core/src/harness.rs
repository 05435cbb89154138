//! Reproducible parallel Monte Carlo over the band ensemble.
//!
//! Sample `i` of a run always draws from the stream `(master_seed, i)`, and
//! results are reduced in index order, so every output is independent of the
//! worker count.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_matrix, EntryDistribution, MatrixSpec, RngStream};
use crate::error::{Error, Result};
use crate::quadrature::stieltjes_f;
use crate::semicircle::{histogram, histogram_csv};
use crate::spectra::{eigen, linear_statistic_real, matrix_function_block, resolvent_trace};
use crate::stats::{moment_summary, NormalityReport};
use crate::testfn::{support_extension_count, TestFunction};
use crate::VERSION;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
const LOCK_FILE: &str = ".lock";

/// Bandwidth either given directly or as `b = round(n^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    Fixed(usize),
    Exponent(f64),
}

impl Bandwidth {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            Bandwidth::Fixed(b) => Ok(b),
            Bandwidth::Exponent(a) if a.is_finite() && a > 0.0 && a < 1.0 => Ok((n as f64).powf(a).round() as usize),
            Bandwidth::Exponent(a) => Err(Error::arg(format!("bandwidth exponent must lie in (0, 1), got {a}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub bandwidth: Bandwidth,
    pub dist: EntryDistribution,
    pub phi: TestFunction,
    pub reps: usize,
    pub master_seed: u64,
    pub workers: usize,
    /// Directory for records, summary and histogram; nothing is written when
    /// absent.
    pub output: Option<PathBuf>,
    /// Store per-sample wall time in the records. With `false` every `ms` is
    /// 0 and record files are byte-reproducible.
    pub record_timing: bool,
    /// Test hook: draw every sample from this one stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_stream: Option<u64>,
}

impl RunConfig {
    pub fn new(n: usize, bandwidth: Bandwidth, phi: TestFunction, reps: usize, master_seed: u64) -> Self {
        Self {
            n,
            bandwidth,
            dist: EntryDistribution::gaussian(),
            phi,
            reps,
            master_seed,
            workers: 1,
            output: None,
            record_timing: true,
            fixed_stream: None,
        }
    }

    /// Matrix spec with the resolved bandwidth; fails on invalid combinations.
    pub fn matrix_spec(&self) -> Result<MatrixSpec> {
        let b = self.bandwidth.resolve(self.n)?;
        MatrixSpec::new(self.n, b, self.dist, self.master_seed)
    }

    pub fn validate(&self) -> Result<MatrixSpec> {
        if self.reps < 2 {
            return Err(Error::arg(format!("reps must be at least 2, got {}", self.reps)));
        }
        if self.workers == 0 {
            return Err(Error::arg("workers must be positive"));
        }
        if !self.phi.is_real() {
            return Err(Error::arg(format!("run_ensemble needs a real test function, got '{}'", self.phi)));
        }
        self.matrix_spec()
    }

    fn stream(&self, index: usize) -> RngStream {
        RngStream::new(self.master_seed, self.fixed_stream.unwrap_or(index as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    /// Raw `N_n(φ)`; `null` when the sample failed.
    pub stat: Option<f64>,
    pub ms: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub failed: bool,
}

/// One-pass central moments up to order four (Pébay's update).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StreamingMoments {
    pub count: usize,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl StreamingMoments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    /// Unbiased variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn skewness(&self) -> Option<f64> {
        let n = self.count as f64;
        (self.m2 > 0.0).then(|| (self.m3 / n) / (self.m2 / n).powf(1.5))
    }

    pub fn kurtosis_ratio(&self) -> Option<f64> {
        let n = self.count as f64;
        (self.m2 > 0.0).then(|| n * self.m4 / (self.m2 * self.m2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub b: usize,
    pub count: usize,
    pub failures: usize,
    pub mean: f64,
    /// Unbiased variance of the raw statistic.
    pub variance: f64,
    /// `(b/n)·variance`: variance of the normalized fluctuation.
    pub normalized_variance: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub kurtosis_ratio: Option<f64>,
    /// Normality diagnostics of the centered normalized samples (needs at
    /// least 20 samples and positive variance).
    pub normality: Option<NormalityReport>,
    pub centering: String,
    /// Evaluations of a compactly supported φ outside its support.
    pub support_extensions: u64,
    pub version: String,
    pub wall_time_s: f64,
    /// Raw statistics of the successful samples in index order.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl RunSummary {
    /// `√(b/n)(N_i − mean)`.
    pub fn centered_normalized(&self) -> Vec<f64> {
        let s = (self.b as f64 / self.config.n as f64).sqrt();
        self.samples.iter().map(|x| s * (x - self.mean)).collect()
    }

    /// Recomputes the summary from records with a two-pass algorithm.
    pub fn from_records(config: &RunConfig, records: &[SampleRecord]) -> Result<Self> {
        let spec = config.matrix_spec()?;
        let summary = summarize(config, spec.b, records, 0, 0.0)?;
        Ok(summary)
    }
}

fn summarize(
    config: &RunConfig,
    b: usize,
    records: &[SampleRecord],
    support_extensions: u64,
    wall_time_s: f64,
) -> Result<RunSummary> {
    let samples: Vec<f64> = records.iter().filter_map(|r| r.stat).collect();
    let failures = records.len() - samples.len();
    let mut stream = StreamingMoments::default();
    for &x in &samples {
        stream.push(x);
    }
    let kr = stream.kurtosis_ratio();
    let mut summary = RunSummary {
        config: config.clone(),
        b,
        count: samples.len(),
        failures,
        mean: stream.mean,
        variance: stream.variance(),
        normalized_variance: stream.variance() * b as f64 / config.n as f64,
        skewness: stream.skewness(),
        excess_kurtosis: kr.map(|k| k - 3.0),
        kurtosis_ratio: kr,
        normality: None,
        centering: "sample mean of the run".into(),
        support_extensions,
        version: VERSION.into(),
        wall_time_s,
        samples,
    };
    if summary.count >= 20 && summary.variance > 0.0 {
        summary.normality = NormalityReport::from_samples(&summary.centered_normalized()).ok();
    }
    Ok(summary)
}

/// Streamed and two-pass moments must agree to `1e−9` relative.
fn verify_two_pass(summary: &RunSummary) -> Result<()> {
    if summary.count < 4 || summary.variance <= 0.0 {
        return Ok(());
    }
    let batch = moment_summary(&summary.samples)?;
    let sd = summary.variance.sqrt();
    let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-9 * scale.max(a.abs()).max(b.abs());
    let ok = close(summary.mean, batch.mean, sd)
        && close(summary.variance, batch.variance, 0.0)
        && close(summary.skewness.unwrap_or(0.0), batch.skewness, 1.0)
        && close(summary.kurtosis_ratio.unwrap_or(0.0), batch.kurtosis_ratio, 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::numeric(format!(
            "streamed moments disagree with two-pass moments: mean {} vs {}, variance {} vs {}",
            summary.mean, batch.mean, summary.variance, batch.variance
        )))
    }
}

pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::arg("workers must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::State(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Per-sample statistics for several test functions from the same spectra.
fn sample_statistics(config: &RunConfig, spec: &MatrixSpec, phis: &[TestFunction]) -> Result<Vec<(Vec<Option<f64>>, f64)>> {
    with_pool(config.workers, || {
        (0..config.reps)
            .into_par_iter()
            .map(|i| {
                let start = Instant::now();
                let mut stream = config.stream(i);
                let stats = sample_matrix(spec, &mut stream)
                    .and_then(|m| eigen(&m, false))
                    .map(|s| phis.iter().map(|phi| linear_statistic_real(&s, phi)).collect::<Vec<_>>());
                let stats = match stats {
                    Ok(v) if v.iter().all(|x| x.is_finite()) => v.into_iter().map(Some).collect(),
                    _ => vec![None; phis.len()],
                };
                let ms = if config.record_timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
                (stats, ms)
            })
            .collect()
    })
}

fn records_for(outcomes: &[(Vec<Option<f64>>, f64)], k: usize) -> Vec<SampleRecord> {
    outcomes
        .iter()
        .enumerate()
        .map(|(index, (stats, ms))| SampleRecord { index, stat: stats[k], ms: *ms, failed: stats[k].is_none() })
        .collect()
}

/// Exclusive claim on an output directory, released on drop.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::State(format!("output directory {} is in use (lock file present)", dir.display())))
            }
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

pub fn write_records(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<SampleRecord> = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    for (i, r) in out.iter().enumerate() {
        if r.index != i {
            return Err(Error::State(format!("{}: record {} has index {}", path.display(), i, r.index)));
        }
    }
    Ok(out)
}

pub fn write_histogram(path: &Path, summary: &RunSummary, bins: usize) -> Result<()> {
    let centered = summary.centered_normalized();
    if centered.is_empty() {
        return Ok(());
    }
    let lo = centered.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = centered.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let csv = histogram_csv(&histogram(&centered, lo, hi, bins)?);
    fs::write(path, csv).map_err(|e| Error::io(path, e))
}

fn persist(dir: &Path, records: &[SampleRecord], summary: &RunSummary) -> Result<()> {
    let final_path = dir.join(RECORDS_FILE);
    let partial = dir.join(format!("{RECORDS_FILE}.partial"));
    write_records(&partial, records)?;
    // Check what was written, not what is in memory.
    let reread = read_records(&partial)?;
    let from_disk = summarize(&summary.config, summary.b, &reread, 0, 0.0)?;
    verify_two_pass(&from_disk)?;
    if from_disk.samples != summary.samples {
        return Err(Error::State("persisted records differ from computed samples".into()));
    }
    fs::rename(&partial, &final_path).map_err(|e| Error::io(&final_path, e))?;
    let summary_path = dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;
    write_histogram(&dir.join(HISTOGRAM_FILE), summary, 30)
}

/// Samples `reps` matrices, evaluates `N_n(φ)` on each and summarizes the
/// fluctuations. Failed eigensolves are recorded, counted and excluded.
pub fn run_ensemble(config: &RunConfig) -> Result<RunSummary> {
    let spec = config.validate()?;
    let _lock = config.output.as_deref().map(DirLock::acquire).transpose()?;
    let start = Instant::now();
    let ext0 = support_extension_count();
    let outcomes = sample_statistics(config, &spec, std::slice::from_ref(&config.phi))?;
    let records = records_for(&outcomes, 0);
    let summary = summarize(config, spec.b, &records, support_extension_count() - ext0, start.elapsed().as_secs_f64())?;
    verify_two_pass(&summary)?;
    if let Some(dir) = &config.output {
        persist(dir, &records, &summary)?;
    }
    Ok(summary)
}

/// Like [`run_ensemble`] for several test functions sharing the same samples;
/// `config.phi` is ignored and nothing is persisted.
pub fn run_ensemble_multi(config: &RunConfig, phis: &[TestFunction]) -> Result<Vec<RunSummary>> {
    let spec = config.validate()?;
    if let Some(p) = phis.iter().find(|p| !p.is_real()) {
        return Err(Error::arg(format!("run_ensemble needs a real test function, got '{p}'")));
    }
    let start = Instant::now();
    let outcomes = sample_statistics(config, &spec, phis)?;
    let wall = start.elapsed().as_secs_f64();
    phis.iter()
        .enumerate()
        .map(|(k, phi)| {
            let cfg = RunConfig { phi: phi.clone(), output: None, ..config.clone() };
            let s = summarize(&cfg, spec.b, &records_for(&outcomes, k), 0, wall)?;
            verify_two_pass(&s)?;
            Ok(s)
        })
        .collect()
}

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
    pub failures: usize,
}

impl Estimate {
    fn from_values(values: &[f64], failures: usize) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, std_error: (var / n).sqrt(), reps: values.len(), failures }
    }

    /// `|mean − target|` in standard errors (0 when both vanish).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// `(1/b) Σ_{i,j∈I_1} f(M)_{ij} g(M)_{ji}` for one spectrum.
fn inner_product_sample(spectrum: &crate::spectra::Spectrum, f: &TestFunction, g: &TestFunction, rows: &[usize], b: usize) -> Result<f64> {
    let r = rows.len();
    let fb = matrix_function_block(spectrum, f, rows)?;
    let gb = if f == g { fb.clone() } else { matrix_function_block(spectrum, g, rows)? };
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..r {
        for j in 0..r {
            acc += fb[i * r + j] * gb[j * r + i];
        }
    }
    Ok(acc.re / b as f64)
}

/// Estimates `⟨f, g⟩_n` for several pairs from the same samples. Pairs whose
/// members are both constant are computed without an eigensolve.
pub fn empirical_inner_products(
    pairs: &[(TestFunction, TestFunction)],
    spec: &MatrixSpec,
    reps: usize,
    workers: usize,
) -> Result<Vec<Estimate>> {
    spec.validate()?;
    if reps < 2 {
        return Err(Error::arg(format!("reps must be at least 2, got {reps}")));
    }
    let rows = spec.index_set().i1_zero_based();
    let needs_vectors = pairs.iter().any(|(f, g)| f.as_constant().is_none() || g.as_constant().is_none());
    let per_sample: Vec<Option<Vec<f64>>> = with_pool(workers, || {
        (0..reps)
            .into_par_iter()
            .map(|i| {
                let spectrum = if needs_vectors {
                    let mut stream = RngStream::new(spec.seed, i as u64);
                    Some(sample_matrix(spec, &mut stream).and_then(|m| eigen(&m, true)).ok()?)
                } else {
                    None
                };
                pairs
                    .iter()
                    .map(|(f, g)| match (f.as_constant(), g.as_constant()) {
                        (Some(a), Some(c)) => Some(a * c * rows.len() as f64 / spec.b as f64),
                        _ => inner_product_sample(spectrum.as_ref()?, f, g, &rows, spec.b).ok(),
                    })
                    .collect::<Option<Vec<f64>>>()
            })
            .collect()
    })?;
    let ok: Vec<&Vec<f64>> = per_sample.iter().flatten().collect();
    let failures = reps - ok.len();
    if ok.len() < 2 {
        return Err(Error::numeric(format!("only {} of {reps} samples succeeded", ok.len())));
    }
    Ok((0..pairs.len())
        .map(|k| Estimate::from_values(&ok.iter().map(|v| v[k]).collect::<Vec<_>>(), failures))
        .collect())
}

/// `⟨f, g⟩_n` with Gaussian entries and unit diagonal variance.
pub fn empirical_inner_product(f: &TestFunction, g: &TestFunction, n: usize, b: usize, reps: usize, seed: u64) -> Result<Estimate> {
    let spec = MatrixSpec::new(n, b, EntryDistribution::gaussian(), seed)?;
    let workers = rayon::current_num_threads();
    Ok(empirical_inner_products(&[(f.clone(), g.clone())], &spec, reps, workers)?[0])
}

fn trace_samples(spec: &MatrixSpec, zs: &[Complex64], reps: usize, stream_base: u64, workers: usize) -> Result<Vec<Vec<Complex64>>> {
    if let Some(z) = zs.iter().find(|z| z.im == 0.0) {
        return Err(Error::arg(format!("resolvent needs Im z != 0, got z = {z}")));
    }
    let out: Vec<Option<Vec<Complex64>>> = with_pool(workers, || {
        (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut stream = RngStream::new(spec.seed, stream_base + i as u64);
                let s = sample_matrix(spec, &mut stream).and_then(|m| eigen(&m, false)).ok()?;
                zs.iter().map(|&z| resolvent_trace(&s, z).ok()).collect()
            })
            .collect()
    })?;
    let ok: Vec<Vec<Complex64>> = out.into_iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::numeric(format!("only {} of {reps} samples succeeded", ok.len())));
    }
    Ok(ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventCell {
    pub n: usize,
    pub b: usize,
    /// `E|Tr G − E Tr G|²`, sample estimate.
    pub variance: f64,
    pub std_error: f64,
    /// `variance · b / n`.
    pub ratio: f64,
    pub ratio_std_error: f64,
    pub reps: usize,
}

/// Empirical `Var(Tr G(z))` over the grid `n_list × b_list`.
pub fn resolvent_variance_scan(
    n_list: &[usize],
    b_list: &[usize],
    z: Complex64,
    reps: usize,
    dist: EntryDistribution,
    seed: u64,
    workers: usize,
) -> Result<Vec<ResolventCell>> {
    if z.im == 0.0 {
        return Err(Error::arg(format!("resolvent needs Im z != 0, got z = {z}")));
    }
    if reps < 2 {
        return Err(Error::arg(format!("reps must be at least 2, got {reps}")));
    }
    let specs: Vec<MatrixSpec> = n_list
        .iter()
        .flat_map(|&n| b_list.iter().map(move |&b| (n, b)))
        .map(|(n, b)| MatrixSpec::new(n, b, dist, seed))
        .collect::<Result<_>>()?;
    specs
        .iter()
        .enumerate()
        .map(|(cell, spec)| {
            let t: Vec<Complex64> = trace_samples(spec, &[z], reps, (cell as u64) << 32, workers)?
                .into_iter()
                .map(|v| v[0])
                .collect();
            let m = t.len() as f64;
            let mean: Complex64 = t.iter().sum::<Complex64>() / m;
            let dev: Vec<f64> = t.iter().map(|x| (x - mean).norm_sqr()).collect();
            let variance = dev.iter().sum::<f64>() / (m - 1.0);
            let dm = dev.iter().sum::<f64>() / m;
            let sd = (dev.iter().map(|d| (d - dm).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
            let std_error = sd / m.sqrt();
            let scale = spec.b as f64 / spec.n as f64;
            Ok(ResolventCell {
                n: spec.n,
                b: spec.b,
                variance,
                std_error,
                ratio: variance * scale,
                ratio_std_error: std_error * scale,
                reps: t.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesComparison {
    pub z: Complex64,
    /// Sample mean of `Tr G(z)/n`.
    pub empirical: Complex64,
    pub limit: Complex64,
    pub deviation: f64,
    /// Standard error of `empirical` (modulus).
    pub std_error: f64,
    /// `1/b`.
    pub reference_scale: f64,
}

/// `|mean Tr G(z)/n − f(z)|` for each `z`, all from the same samples.
pub fn stieltjes_compare(spec: &MatrixSpec, zs: &[Complex64], reps: usize, workers: usize) -> Result<Vec<StieltjesComparison>> {
    spec.validate()?;
    if reps < 2 {
        return Err(Error::arg(format!("reps must be at least 2, got {reps}")));
    }
    let t = trace_samples(spec, zs, reps, 0, workers)?;
    let m = t.len() as f64;
    let n = spec.n as f64;
    zs.iter()
        .enumerate()
        .map(|(k, &z)| {
            let vals: Vec<Complex64> = t.iter().map(|v| v[k] / n).collect();
            let mean: Complex64 = vals.iter().sum::<Complex64>() / m;
            let var = vals.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (m - 1.0);
            let limit = stieltjes_f(z)?;
            Ok(StieltjesComparison {
                z,
                empirical: mean,
                limit,
                deviation: (mean - limit).norm(),
                std_error: (var / m).sqrt(),
                reference_scale: 1.0 / spec.b as f64,
            })
        })
        .collect()
}
