//! Direct quadrature for the kernel `F(x, y)`, the three terms of the limiting
//! variance `V(φ)`, and the limiting Stieltjes transform.

use std::cell::Cell;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebyshev::kernel_series;
use crate::combinatorics::gamma_f64;
use crate::error::{Error, Result};
use crate::testfn::TestFunction;
use crate::EDGE;

const PI: f64 = std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for j in 0..7 {
        let dx = h * GK_NODES[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kronrod += GK_WEIGHTS[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += G7_WEIGHTS[j / 2] * (f1 + f2);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15): the interval with the largest
/// error estimate is bisected until the summed estimate drops below `tol` or
/// `max_intervals` is reached. Returns the integral and the error estimate.
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_intervals: usize) -> (f64, f64) {
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut err = e;
    while err > tol && parts.len() < max_intervals.max(1) {
        let (k, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = parts.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
        err = parts.iter().map(|p| p.3).sum();
    }
    (parts.iter().map(|p| p.2).sum(), err)
}

/// Which closed form the `s`-integrand takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelIntegrand {
    /// `(u² − u⁴)/D(u)`, `u = sin s / s`: the generating function of the
    /// Chebyshev series weighted by `γ_{k+1}`.
    Generating,
    /// `(u − u³)/D(u)`, one power of `u` lower; sums the series with weights
    /// `γ_k` instead of `γ_{k+1}`.
    Printed,
}

impl KernelIntegrand {
    fn power(self) -> i32 {
        match self {
            KernelIntegrand::Generating => 2,
            KernelIntegrand::Printed => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// End of the numerically integrated range; the tail beyond is analytic.
    pub s_max: f64,
    /// Absolute tolerance for the panel integrals.
    pub tol: f64,
    pub integrand: KernelIntegrand,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { s_max: 400.0, tol: 1e-11, integrand: KernelIntegrand::Generating }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    pub error: f64,
}

/// `1 − sin s / s`, without cancellation near 0.
fn one_minus_sinc(s: f64) -> f64 {
    if s.abs() < 0.5 {
        let s2 = s * s;
        // s²/3! − s⁴/5! + s⁶/7! − …
        let mut term = s2 / 6.0;
        let mut acc = term;
        let mut k = 3.0;
        while term.abs() > 1e-18 * acc.abs() {
            term *= -s2 / ((2.0 * k - 2.0) * (2.0 * k - 1.0));
            acc += term;
            k += 1.0;
        }
        acc
    } else {
        1.0 - s.sin() / s
    }
}

/// `F(x, y) = 2 ∫_ℝ (u^p − u^{p+2}) / D(u) ds`, `u = sin s / s`,
/// `D(u) = 2(1−u²)² − u(1+u²)xy + u²(x²+y²)`.
///
/// The integrand is even in `s`. The first three terms of its expansion in
/// powers of `u` are integrated in closed form over `[0, ∞)` (their integrals
/// are `π γ_{j−1}/2`), so only a remainder of order `s^{−(p+3)}` is integrated
/// numerically over `[0, s_max]`, panel by panel between multiples of `π`.
pub fn kernel_integral(x: f64, y: f64, opts: &KernelOptions) -> Result<KernelValue> {
    if !(x.abs() < EDGE && y.abs() < EDGE) {
        return Err(Error::arg(format!("kernel needs |x|, |y| < 2√2, got ({x}, {y})")));
    }
    if x == y {
        return Err(Error::numeric(format!("kernel integral diverges at s = 0 on the diagonal x = y = {x}")));
    }
    if !(opts.s_max > PI) {
        return Err(Error::arg("s_max must exceed π"));
    }
    let p = opts.integrand.power();
    let a = x * y;
    let r2 = x * x + y * y;
    let diff2 = (x - y) * (x - y);
    let c1 = a / 2.0;
    let c2 = a * a / 4.0 - (r2 - 4.0) / 2.0 - 1.0;
    let bad: Cell<Option<(f64, f64)>> = Cell::new(None);

    let remainder = |s: f64| -> f64 {
        let w = one_minus_sinc(s);
        let u = 1.0 - w;
        let one_minus_u2 = w * (2.0 - w);
        // D in powers of w = 1 − u: for u ≥ 0 and |xy| < 8 both terms are nonnegative,
        // so nothing cancels near s = 0 or on the diagonal.
        let d = w * w * (2.0 * (2.0 - w) * (2.0 - w) - u * a) + u * u * diff2;
        if !(d > 0.0) && bad.get().is_none() {
            bad.set(Some((s, d)));
        }
        let up = u.powi(p);
        let g = up * one_minus_u2 / d;
        g - 0.5 * up * (1.0 + u * (c1 + u * c2))
    };

    let mut total = 0.0;
    let mut err = 0.0;
    let mut lo = 0.0;
    let mut panel = 0usize;
    while lo < opts.s_max {
        let hi = ((panel + 1) as f64 * PI).min(opts.s_max);
        let (v, e) = adaptive_gk(&remainder, lo, hi, opts.tol * PI / opts.s_max, 200);
        total += v;
        err += e;
        lo = hi;
        panel += 1;
    }
    if let Some((s, d)) = bad.get() {
        return Err(Error::numeric(format!(
            "kernel denominator changes sign: D = {d:e} at x={x}, y={y}, s={s}"
        )));
    }
    // Tail past s_max: the remainder is O(u^{p+3}); calibrate the constant on
    // the last panel.
    let mut k_tail = 0.0f64;
    for i in 0..16 {
        let s = opts.s_max - PI * (i as f64 + 0.5) / 16.0;
        k_tail = k_tail.max(remainder(s).abs() * s.powi(p + 3));
    }
    let tail = k_tail * opts.s_max.powi(-(p + 2)) / (p + 2) as f64;

    let closed = 0.25
        * PI
        * (gamma_f64((p - 1) as usize) + c1 * gamma_f64(p as usize) + c2 * gamma_f64((p + 1) as usize));
    Ok(KernelValue { value: 4.0 * (total + closed), error: 4.0 * (err + tail) })
}

/// How a kernel grid cell was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    Series,
    Integral,
}

impl std::fmt::Display for KernelMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelMethod::Series => "series",
            KernelMethod::Integral => "integral",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelCell {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub error: f64,
    pub method: KernelMethod,
}

/// Tabulated `F(x, y)`. Diagonal cells are never evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct KernelGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over `(xs, ys)`, one entry per requested method; cells with
    /// `x = y` are absent.
    pub cells: Vec<KernelCell>,
}

/// Requested evaluation route(s) for a kernel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMethod {
    Series,
    Integral,
    Both,
}

/// Fills a grid in parallel; output order is deterministic (row-major, series
/// before integral). A series cell whose error estimate exceeds `tol` (slow
/// convergence near the spectral edge) is evaluated by the integral instead.
pub fn kernel_grid(
    xs: &[f64],
    ys: &[f64],
    method: GridMethod,
    series_order: usize,
    opts: &KernelOptions,
    tol: f64,
) -> Result<KernelGrid> {
    let pairs: Vec<(f64, f64)> =
        xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).filter(|(x, y)| x != y).collect();
    let cells: Vec<Vec<KernelCell>> = pairs
        .par_iter()
        .map(|&(x, y)| -> Result<Vec<KernelCell>> {
            let mut out = Vec::with_capacity(2);
            let integral = || -> Result<KernelCell> {
                let v = kernel_integral(x, y, opts)?;
                Ok(KernelCell { x, y, value: v.value, error: v.error, method: KernelMethod::Integral })
            };
            if matches!(method, GridMethod::Series | GridMethod::Both) {
                let s = kernel_series(x, y, series_order)?;
                if s.error_estimate <= tol {
                    out.push(KernelCell { x, y, value: s.value, error: s.error_estimate, method: KernelMethod::Series });
                } else if method == GridMethod::Series {
                    out.push(integral()?);
                }
            }
            if matches!(method, GridMethod::Integral | GridMethod::Both) {
                out.push(integral()?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(KernelGrid { xs: xs.to_vec(), ys: ys.to_vec(), cells: cells.into_iter().flatten().collect() })
}

/// `f(z) = (−z + √(z²−8))/4`, the branch with `f(z) ~ −1/z` at infinity.
///
/// Evaluated as `−2/(z + √(z²−8))` (the two roots multiply to 1/2), which
/// avoids cancellation for large `|z|`.
pub fn stieltjes_f(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re.abs() <= EDGE {
        return Err(Error::arg(format!("z = {z} lies on the branch cut [-2√2, 2√2]")));
    }
    let root = (z - EDGE).sqrt() * (z + EDGE).sqrt();
    Ok(-2.0 / (z + root))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceVariant {
    /// Third term exactly as displayed: both inner denominators in `x`, the
    /// second squared (a Hadamard finite part).
    Printed,
    /// Hypothesis: second inner factor in `y` to the first power, with the
    /// `1/(8π³)` normalization of the bilinear form. Experimental.
    Symmetrized,
}

impl std::str::FromStr for VarianceVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" => Ok(VarianceVariant::Printed),
            "symmetrized" => Ok(VarianceVariant::Symmetrized),
            other => Err(Error::arg(format!("unknown variance variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceOptions {
    /// First-kind Gauss–Chebyshev nodes for the one-dimensional integrals.
    pub quad_order: usize,
    /// Second-kind Gauss–Chebyshev nodes along `x` for the outer integral of
    /// the kernel term; the inner integral is adaptive.
    pub grid_order: usize,
    pub kernel: KernelOptions,
    /// Relative size of the last Chebyshev coefficient of `μφ(μ)` above which
    /// the principal-value expansion is declared unconverged.
    pub pv_tol: f64,
}

impl Default for VarianceOptions {
    fn default() -> Self {
        Self {
            quad_order: 256,
            grid_order: 24,
            kernel: KernelOptions { tol: 1e-9, ..KernelOptions::default() },
            pv_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceMetadata {
    pub quad_order: usize,
    pub grid_order: usize,
    pub s_max: f64,
    pub kappa_error: f64,
    pub sigma_error: f64,
    pub kernel_error: f64,
    /// Kernel term from the Chebyshev-series route, for comparison.
    pub kernel_series_reference: f64,
    pub experimental: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceBreakdown {
    pub kappa_term: f64,
    pub sigma_term: f64,
    pub kernel_term: f64,
    pub total: f64,
    pub variant: VarianceVariant,
    pub metadata: VarianceMetadata,
}

/// First-kind Gauss–Chebyshev points on `[−2√2, 2√2]`, generated in mirrored
/// pairs so odd and even integrands cancel exactly.
fn cheb1_points(q: usize) -> Vec<f64> {
    let mut pts = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let x = EDGE * ((2 * i + 1) as f64 * PI / (2 * q) as f64).cos();
        pts[i] = x;
        pts[q - 1 - i] = -x;
    }
    if q % 2 == 1 {
        pts[q / 2] = 0.0;
    }
    pts
}

/// `∫ w(μ) φ(μ) / √(8−μ²) dμ` at `q` nodes.
fn cheb1_integral(phi: &TestFunction, weight: impl Fn(f64) -> f64, q: usize) -> f64 {
    let pts = cheb1_points(q);
    // Sum mirrored pairs together so odd integrands cancel to exactly zero.
    let mut acc = 0.0;
    for i in 0..q / 2 {
        let (x, mx) = (pts[i], pts[q - 1 - i]);
        acc += weight(x) * phi.eval_real(x) + weight(mx) * phi.eval_real(mx);
    }
    if q % 2 == 1 {
        acc += weight(0.0) * phi.eval_real(0.0);
    }
    PI / q as f64 * acc
}

fn require_real(phi: &TestFunction) -> Result<()> {
    if phi.is_real() {
        Ok(())
    } else {
        Err(Error::arg(format!("variance terms need a real test function, got '{phi}'")))
    }
}

fn check_order(q: usize) -> Result<()> {
    if q < 4 {
        return Err(Error::arg("quadrature order must be at least 4"));
    }
    Ok(())
}

/// `(κ4/16π²) (∫ (4−μ²) φ(μ)/√(8−μ²) dμ)²`.
pub fn variance_kappa_term(phi: &TestFunction, kappa4: f64, quad_order: usize) -> Result<f64> {
    Ok(kappa_term_with_error(phi, kappa4, quad_order)?.0)
}

fn kappa_term_with_error(phi: &TestFunction, kappa4: f64, q: usize) -> Result<(f64, f64)> {
    require_real(phi)?;
    check_order(q)?;
    let w = |m: f64| 4.0 - m * m;
    let term = |i: f64| kappa4 / (16.0 * PI * PI) * i * i;
    let fine = term(cheb1_integral(phi, w, q));
    let coarse = term(cheb1_integral(phi, w, q / 2));
    Ok((fine, (fine - coarse).abs()))
}

/// `(σ²/16π²) (∫ μ φ(μ)/√(8−μ²) dμ)²`.
pub fn variance_sigma_term(phi: &TestFunction, sigma2: f64, quad_order: usize) -> Result<f64> {
    Ok(sigma_term_with_error(phi, sigma2, quad_order)?.0)
}

fn sigma_term_with_error(phi: &TestFunction, sigma2: f64, q: usize) -> Result<(f64, f64)> {
    require_real(phi)?;
    check_order(q)?;
    let w = |m: f64| m;
    let term = |i: f64| sigma2 / (16.0 * PI * PI) * i * i;
    let fine = term(cheb1_integral(phi, w, q));
    let coarse = term(cheb1_integral(phi, w, q / 2));
    Ok((fine, (fine - coarse).abs()))
}

/// Principal-value transforms of `g(μ) = μφ(μ)` against `1/√(8−μ²)`:
/// `A(x) = PV ∫ g(μ)/((x−μ)√(8−μ²)) dμ` and its finite-part derivative
/// `B(x) = FP ∫ g(μ)/((x−μ)²√(8−μ²)) dμ = −A'(x)`.
///
/// With `μ = 2√2 t` and `g = Σ c_n T_n(t)`, the identity
/// `PV ∫ T_n(t)/((t−s)√(1−t²)) dt = π U_{n−1}(s)` gives both in closed form.
#[derive(Debug, Clone)]
pub struct PvTransform {
    /// First-kind Chebyshev coefficients of `μφ(μ)` in `t = μ/(2√2)`.
    pub coeffs: Vec<f64>,
}

impl PvTransform {
    pub fn new(phi: &TestFunction, q: usize, pv_tol: f64) -> Result<Self> {
        require_real(phi)?;
        check_order(q)?;
        let samples: Vec<(f64, f64)> = (0..q)
            .map(|i| {
                let th = (2 * i + 1) as f64 * PI / (2 * q) as f64;
                let mu = EDGE * th.cos();
                (th, mu * phi.eval_real(mu))
            })
            .collect();
        let mut coeffs: Vec<f64> = (0..q)
            .map(|n| {
                let s: f64 = samples.iter().map(|&(th, g)| g * (n as f64 * th).cos()).sum();
                s * if n == 0 { 1.0 } else { 2.0 } / q as f64
            })
            .collect();
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale > 0.0 {
            let tail = coeffs[q - 2..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if tail > pv_tol * scale {
                return Err(Error::numeric(format!(
                    "principal-value expansion of '{phi}' did not converge: trailing Chebyshev coefficient {tail:e} \
                     relative to {scale:e} at order {q}"
                )));
            }
            for c in coeffs.iter_mut() {
                if c.abs() <= 1e-15 * scale {
                    *c = 0.0;
                }
            }
        }
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Ok(Self { coeffs })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// `(A(x), B(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let s = x / EDGE;
        // Standard U_{n−1}(s) and derivative by recurrence.
        let (mut u_prev, mut u) = (0.0, 1.0);
        let (mut du_prev, mut du) = (0.0, 0.0);
        let (mut a, mut b) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1) {
            a += c * u;
            b += c * du;
            let u_next = 2.0 * s * u - u_prev;
            let du_next = 2.0 * u + 2.0 * s * du - du_prev;
            u_prev = u;
            u = u_next;
            du_prev = du;
            du = du_next;
        }
        (-PI / EDGE * a, PI / 8.0 * b)
    }

    /// Rescaled-`U` coefficients of `A`: `A = Σ_k a_k U_k`.
    pub fn a_coefficients(&self) -> Vec<f64> {
        self.coeffs.iter().skip(1).map(|c| -PI / EDGE * c).collect()
    }
}

/// Second-kind Gauss–Chebyshev rule for `∫ √(8−x²) h(x) dx`.
fn cheb2_rule(q: usize) -> Vec<(f64, f64)> {
    (1..=q)
        .map(|i| {
            let th = i as f64 * PI / (q + 1) as f64;
            (EDGE * th.cos(), 8.0 * PI / (q + 1) as f64 * th.sin().powi(2))
        })
        .collect()
}

/// `∫ √(8−y²) F(x, y) h(y) dy` for fixed `x`.
///
/// `F` has an integrable `|x − y|^{−1/2}` singularity on the diagonal. With
/// `y = 2√2 cos θ` the range splits at `θ_x`, and `θ = θ_x ± c t²` on each side
/// turns the singularity into a bounded integrand in `t`.
pub fn kernel_row_integral(x: f64, h: impl Fn(f64) -> f64, kernel: &KernelOptions, tol: f64) -> Result<(f64, f64)> {
    if !(x.abs() < EDGE) {
        return Err(Error::arg(format!("kernel needs |x| < 2√2, got {x}")));
    }
    let theta_x = (x / EDGE).acos();
    let failure: Cell<Option<Error>> = Cell::new(None);
    let mut total = 0.0;
    let mut err = 0.0;
    for (len, sign) in [(theta_x, -1.0), (PI - theta_x, 1.0)] {
        if len <= 0.0 {
            continue;
        }
        let f = |t: f64| -> f64 {
            let th = theta_x + sign * len * t * t;
            let y = EDGE * th.cos();
            if y == x || !(y.abs() < EDGE) {
                return 0.0;
            }
            match kernel_integral(x, y, kernel) {
                Ok(v) => 8.0 * th.sin().powi(2) * v.value * h(y) * 2.0 * len * t,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            }
        };
        let (v, e) = adaptive_gk(&f, 0.0, 1.0, 0.5 * tol, 400);
        total += v;
        err += e;
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((total, err))
}

fn kernel_double_integral(
    pv: &PvTransform,
    variant: VarianceVariant,
    q: usize,
    kernel: &KernelOptions,
) -> Result<f64> {
    let xr = cheb2_rule(q);
    // Inner tolerance relative to the size of the inner integrand.
    let a_max = xr.iter().fold(1.0f64, |m, &(x, _)| m.max(pv.eval(x).0.abs()));
    let tol = 1e-10 * 4.0 * PI * PI * a_max;
    let rows: Vec<f64> = xr
        .par_iter()
        .map(|&(x, wx)| -> Result<f64> {
            let (a_x, b_x) = pv.eval(x);
            let value = match variant {
                VarianceVariant::Printed => a_x * b_x * kernel_row_integral(x, |_| 1.0, kernel, tol)?.0,
                VarianceVariant::Symmetrized => a_x * kernel_row_integral(x, |y| pv.eval(y).0, kernel, tol)?.0,
            };
            Ok(wx * value)
        })
        .collect::<Result<_>>()?;
    let sum: f64 = rows.iter().sum();
    Ok(match variant {
        VarianceVariant::Printed => sum,
        VarianceVariant::Symmetrized => sum / (8.0 * PI.powi(3)),
    })
}

/// Kernel term via the series route: the `y`-integral of `√(8−y²) F(x, y)` is
/// `4π²` by orthogonality (printed), and the symmetrized form is `⟨A, A⟩`.
fn kernel_term_series(pv: &PvTransform, variant: VarianceVariant, q: usize) -> f64 {
    match variant {
        VarianceVariant::Printed => {
            4.0 * PI * PI
                * cheb2_rule(q).iter().map(|&(x, w)| {
                    let (a, b) = pv.eval(x);
                    w * a * b
                }).sum::<f64>()
        }
        VarianceVariant::Symmetrized => pv
            .a_coefficients()
            .iter()
            .enumerate()
            .map(|(k, a)| 2.0 * gamma_f64(k + 1) * a * a)
            .sum(),
    }
}

/// Third term of `V(φ)` by direct quadrature, with error estimate from a
/// doubled grid and the series-route reference value.
pub fn variance_kernel_term(
    phi: &TestFunction,
    variant: VarianceVariant,
    opts: &VarianceOptions,
) -> Result<(f64, f64, f64)> {
    let pv = PvTransform::new(phi, opts.quad_order, opts.pv_tol)?;
    let reference = kernel_term_series(&pv, variant, opts.quad_order);
    let vanishes = match variant {
        VarianceVariant::Printed => pv.is_zero() || pv.coeffs.len() <= 1,
        VarianceVariant::Symmetrized => pv.is_zero() || pv.coeffs.len() <= 1,
    };
    if vanishes {
        return Ok((0.0, 0.0, reference));
    }
    let coarse = kernel_double_integral(&pv, variant, opts.grid_order, &opts.kernel)?;
    let fine = kernel_double_integral(&pv, variant, 2 * opts.grid_order, &opts.kernel)?;
    Ok((fine, (fine - coarse).abs(), reference))
}

/// All three terms of `V(φ)`.
pub fn variance_total(
    phi: &TestFunction,
    kappa4: f64,
    sigma2: f64,
    variant: VarianceVariant,
    opts: &VarianceOptions,
) -> Result<VarianceBreakdown> {
    let (kappa_term, kappa_error) = kappa_term_with_error(phi, kappa4, opts.quad_order)?;
    let (sigma_term, sigma_error) = sigma_term_with_error(phi, sigma2, opts.quad_order)?;
    let (kernel_term, kernel_error, reference) = variance_kernel_term(phi, variant, opts)?;
    Ok(VarianceBreakdown {
        kappa_term,
        sigma_term,
        kernel_term,
        total: kappa_term + sigma_term + kernel_term,
        variant,
        metadata: VarianceMetadata {
            quad_order: opts.quad_order,
            grid_order: opts.grid_order,
            s_max: opts.kernel.s_max,
            kappa_error,
            sigma_error,
            kernel_error,
            kernel_series_reference: reference,
            experimental: variant == VarianceVariant::Symmetrized,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::kernel_series_offset;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m14: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(7);
        let m12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((m12 - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let f = |x: f64| 1e-3 / (x * x + 1e-6);
        let (v, e) = adaptive_gk(&f, -1.0, 1.0, 1e-10, 500);
        let exact = 2.0 * (1e3f64).atan();
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}, est {e}");
    }

    #[test]
    fn kernel_symmetric() {
        let o = KernelOptions::default();
        let a = kernel_integral(0.4, -1.7, &o).unwrap().value;
        let b = kernel_integral(-1.7, 0.4, &o).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn kernel_positive_on_interior_grid() {
        let o = KernelOptions::default();
        let axis: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
        for &x in &axis {
            for &y in axis.iter().filter(|&&y| y != x) {
                let v = kernel_integral(x, y, &o).unwrap().value;
                assert!(v > 0.0, "F({x}, {y}) = {v}");
            }
        }
    }

    #[test]
    fn kernel_matches_series() {
        let v = kernel_integral(1.0, -1.0, &KernelOptions::default()).unwrap();
        let s = kernel_series(1.0, -1.0, 200).unwrap();
        assert!((v.value - s.value).abs() < 1e-5, "{} vs {}", v.value, s.value);
    }

    #[test]
    fn kernel_truncation_sweep() {
        let vals: Vec<f64> = [200.0, 400.0, 800.0]
            .iter()
            .map(|&s_max| kernel_integral(0.5, 2.0, &KernelOptions { s_max, ..Default::default() }).unwrap().value)
            .collect();
        assert!((vals[0] - vals[1]).abs() < 1e-6 && (vals[1] - vals[2]).abs() < 1e-6, "{vals:?}");
    }

    #[test]
    fn printed_integrand_sums_shifted_weights() {
        let o = KernelOptions { integrand: KernelIntegrand::Printed, ..Default::default() };
        for &(x, y) in &[(1.0, -1.0), (0.0, 1.5), (-2.0, 0.5)] {
            let printed = kernel_integral(x, y, &o).unwrap().value;
            let shifted = kernel_series_offset(x, y, 300, 0).unwrap().value;
            let standard = kernel_series(x, y, 300).unwrap().value;
            assert!((printed - shifted).abs() < 1e-5, "({x},{y}) {printed} vs {shifted}");
            assert!((printed - standard).abs() > 0.1);
        }
    }

    #[test]
    fn kernel_domain_errors() {
        let o = KernelOptions::default();
        assert!(matches!(kernel_integral(3.0, 0.0, &o), Err(Error::Argument(_))));
        assert!(matches!(kernel_integral(1.0, 1.0, &o), Err(Error::Numeric(_))));
    }

    #[test]
    fn stieltjes_examples() {
        let z = c(1.0, 1.0);
        let f = stieltjes_f(z).unwrap();
        assert!((2.0 * f * f + z * f + 1.0).norm() < 1e-12);
        let f = stieltjes_f(c(0.0, 1e-9)).unwrap();
        assert!((f - c(0.0, std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-8);
        let z = c(0.0, 1e6);
        let f = stieltjes_f(z).unwrap();
        assert!((f + z.inv()).norm() <= 3.0 / z.norm().powi(3));
        assert!(stieltjes_f(c(1.0, 0.0)).is_err());
        assert!(stieltjes_f(c(5.0, 0.0)).is_ok());
    }

    #[test]
    fn stieltjes_maps_upper_half_plane_into_itself() {
        for i in 0..10 {
            for j in 0..10 {
                let z = c(-6.0 + 12.0 * i as f64 / 9.0, 0.01 + 4.0 * j as f64 / 9.0);
                let f = stieltjes_f(z).unwrap();
                assert!(f.im > 0.0, "z = {z}: f = {f}");
                assert!((2.0 * f * f + z * f + 1.0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kappa_and_sigma_closed_forms() {
        let q = 256;
        assert!(variance_kappa_term(&TestFunction::constant(1.0), 1.0, q).unwrap().abs() < 1e-10);
        assert!((variance_kappa_term(&TestFunction::Monomial(2), 1.0, q).unwrap() - 4.0).abs() < 1e-8);
        assert_eq!(variance_kappa_term(&TestFunction::Identity, 1.0, q).unwrap(), 0.0);
        assert_eq!(variance_sigma_term(&TestFunction::Gauss, 1.0, q).unwrap(), 0.0);
        assert!((variance_sigma_term(&TestFunction::Identity, 1.0, q).unwrap() - 1.0).abs() < 1e-8);
        assert!((variance_sigma_term(&TestFunction::Monomial(3), 2.0, q).unwrap() - 72.0).abs() < 1e-8);
        assert!(variance_sigma_term(&TestFunction::Resolvent { mu: 0.0, eta: 1.0 }, 1.0, q).is_err());
    }

    /// `∫_0^π cos^{2j}t dt = π (2j)! / (4^j (j!)²)`.
    fn cos_moment(j: u32) -> f64 {
        let mut v = PI;
        for i in 1..=j {
            v *= (2 * i - 1) as f64 / (2 * i) as f64;
        }
        v
    }

    #[test]
    fn monomial_closed_forms_up_to_degree_six() {
        let r8 = 8f64.sqrt();
        for d in 0..=6u32 {
            let phi = TestFunction::Monomial(d);
            // μ = 2√2 cos t: ∫(4−μ²)μ^d/√(8−μ²) dμ = ∫_0^π (4 − 8cos²t)(2√2 cos t)^d dt.
            let (i_kappa, i_sigma) = if d % 2 == 0 {
                let j = d / 2;
                (r8.powi(d as i32) * (4.0 * cos_moment(j) - 8.0 * cos_moment(j + 1)), 0.0)
            } else {
                (0.0, r8.powi(d as i32 + 1) * cos_moment(d.div_ceil(2)))
            };
            let want_k = i_kappa * i_kappa / (16.0 * PI * PI);
            let want_s = i_sigma * i_sigma / (16.0 * PI * PI);
            let got_k = variance_kappa_term(&phi, 1.0, 128).unwrap();
            let got_s = variance_sigma_term(&phi, 1.0, 128).unwrap();
            assert!((got_k - want_k).abs() < 1e-8 * (1.0 + want_k), "d={d}: {got_k} vs {want_k}");
            assert!((got_s - want_s).abs() < 1e-8 * (1.0 + want_s), "d={d}: {got_s} vs {want_s}");
        }
    }

    #[test]
    fn pv_transform_identity() {
        let pv = PvTransform::new(&TestFunction::Identity, 64, 1e-10).unwrap();
        for &x in &[-2.0, -0.5, 0.0, 1.3] {
            let (a, b) = pv.eval(x);
            assert!((a + PI * x).abs() < 1e-12, "A({x}) = {a}");
            assert!((b - PI).abs() < 1e-12, "B({x}) = {b}");
        }
    }

    #[test]
    fn pv_transform_matches_excised_quadrature() {
        // Independent route: PV by symmetric excision around the pole in θ.
        let phi = TestFunction::Gauss;
        let pv = PvTransform::new(&phi, 128, 1e-10).unwrap();
        let x = 0.9;
        let g = |mu: f64| mu * phi.eval_real(mu);
        // μ = 2√2 cos θ, dμ/√(8−μ²) = dθ; subtract the pole's residue-like part.
        let gx = g(x);
        let f = |th: f64| {
            let mu = EDGE * th.cos();
            if (x - mu).abs() < 1e-12 {
                0.0
            } else {
                (g(mu) - gx) / (x - mu)
            }
        };
        let (smooth, _) = adaptive_gk(&f, 0.0, PI, 1e-13, 500);
        // PV ∫_0^π dθ /(x − 2√2 cos θ) = 0 for |x| < 2√2.
        let (a, _) = pv.eval(x);
        assert!((a - smooth).abs() < 1e-9, "{a} vs {smooth}");
    }

    #[test]
    fn pv_rejects_unresolved_functions() {
        let phi = TestFunction::Resolvent { mu: 0.0, eta: 1.0 };
        assert!(PvTransform::new(&phi, 64, 1e-10).is_err());
        let spiky = TestFunction::Poly((0..60).map(|i| if i == 59 { 1.0 } else { 0.0 }).collect());
        assert!(matches!(PvTransform::new(&spiky, 32, 1e-10), Err(Error::Numeric(_))));
    }

    #[test]
    fn variance_total_examples() {
        let opts = VarianceOptions { grid_order: 8, ..Default::default() };
        for variant in [VarianceVariant::Printed, VarianceVariant::Symmetrized] {
            let zero = variance_total(&TestFunction::constant(0.0), 1.0, 1.0, variant, &opts).unwrap();
            assert_eq!((zero.kappa_term, zero.sigma_term, zero.kernel_term, zero.total), (0.0, 0.0, 0.0, 0.0));
        }
        let sq = variance_total(&TestFunction::Monomial(2), 0.0, 0.0, VarianceVariant::Printed, &opts).unwrap();
        assert_eq!(sq.kappa_term, 0.0);
        assert_eq!(sq.sigma_term, 0.0);
        assert_eq!(sq.total, sq.kernel_term);
        let id = variance_total(&TestFunction::Identity, 2.5, 1.0, VarianceVariant::Printed, &opts).unwrap();
        assert_eq!(id.kappa_term, 0.0);
        assert!((id.sigma_term - 1.0).abs() < 1e-8);
        assert!(id.metadata.kernel_series_reference.abs() < 1e-9);
        assert!(id.kernel_term.abs() <= id.metadata.kernel_error.max(1e-8) * 10.0);
        assert!(!id.metadata.experimental);
    }

    #[test]
    fn symmetrized_quadrature_tracks_series_reference() {
        let opts = VarianceOptions { grid_order: 16, ..Default::default() };
        let (quad, err, reference) =
            variance_kernel_term(&TestFunction::Identity, VarianceVariant::Symmetrized, &opts).unwrap();
        // ⟨A, A⟩ with A = −πx is 3π².
        assert!((reference - 3.0 * PI * PI).abs() < 1e-9);
        assert!((quad - reference).abs() < 1e-4 * reference, "{quad} vs {reference} (est {err})");
    }

    #[test]
    fn row_integral_matches_orthogonality() {
        // ∫ √(8−y²) F(x, y) dy = 4π² for every x.
        for &x in &[-2.5, -0.3, 0.0, 1.1, 2.7] {
            let (v, _) = kernel_row_integral(x, |_| 1.0, &KernelOptions::default(), 1e-9).unwrap();
            assert!((v - 4.0 * PI * PI).abs() < 1e-5, "x={x}: {v}");
        }
    }

    #[test]
    fn grid_skips_diagonal_and_is_symmetric() {
        let axis = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let g = kernel_grid(&axis, &axis, GridMethod::Both, 200, &KernelOptions::default(), 1e-8).unwrap();
        assert_eq!(g.cells.len(), 2 * 20);
        assert!(g.cells.iter().all(|c| c.x != c.y));
        for cell in &g.cells {
            let mirror = g.cells.iter().find(|o| o.x == cell.y && o.y == cell.x && o.method == cell.method).unwrap();
            assert!((cell.value - mirror.value).abs() < 1e-6);
        }
    }
}
