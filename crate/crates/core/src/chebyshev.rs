//! Rescaled Chebyshev polynomials of the second kind on `[−2√2, 2√2]`.
//!
//! `U_k(x) = sin((k+1)θ)/sin θ` with `x = 2√2 cos θ`; these are orthonormal
//! under the semicircle weight `√(8−x²)/(4π)` and diagonalize the limiting
//! bilinear form: `⟨U_j, U_k⟩ = 2 δ_jk γ_{k+1}`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::combinatorics::{binomial, c_lm, gamma_f64, gamma_with_zero, monomial_inner, ExactRational};
use crate::error::{Error, Result};
use crate::EDGE;

const PI: f64 = std::f64::consts::PI;

/// `U_k(x)` by the three-term recurrence `U_{k+1} = (x/√2) U_k − U_{k−1}`.
pub fn u_poly(k: usize, x: f64) -> f64 {
    let t = x / std::f64::consts::SQRT_2;
    let (mut prev, mut cur) = (1.0, t);
    if k == 0 {
        return 1.0;
    }
    for _ in 1..k {
        let next = t * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `U_k(x)` through `sin((k+1)θ)/sin θ`; only valid for `|x| < 2√2`.
pub fn u_poly_trig(k: usize, x: f64) -> f64 {
    let theta = (x / EDGE).acos();
    ((k + 1) as f64 * theta).sin() / theta.sin()
}

/// Coefficients of `x^p`, `p = 0..=n`, in `U_n`:
/// `U_n(x) = Σ_i (−1)^i C(n−i, i) (x/√2)^{n−2i}`.
pub fn u_monomial_coeffs(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 0..=n / 2 {
        let p = n - 2 * i;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let c = binomial((n - i) as i64, i as i64).to_f64().unwrap_or(f64::NAN);
        out[p] = sign * c * std::f64::consts::FRAC_1_SQRT_2.powi(p as i32);
    }
    out
}

/// `⟨U_j, U_k⟩` expanded over monomials through `C_{p,q}`, in exact
/// arithmetic (the powers of `√2` cancel term by term).
pub fn u_inner_exact(j: usize, k: usize) -> ExactRational {
    let mut acc = ExactRational::zero();
    for i in 0..=j / 2 {
        for i2 in 0..=k / 2 {
            let (p, q) = (j - 2 * i, k - 2 * i2);
            if (p + q) % 2 == 1 {
                continue;
            }
            let coef: BigInt = BigInt::from(binomial((j - i) as i64, i as i64))
                * BigInt::from(binomial((k - i2) as i64, i2 as i64))
                * 2;
            let signed = if (i + i2) % 2 == 0 { coef } else { -coef };
            acc = &acc + &(&ExactRational::from_integer(signed) * &c_lm(p, q));
        }
    }
    acc
}

/// `⟨f, g⟩` for polynomials given by ascending coefficients, through the
/// monomial inner products.
pub fn bilinear_form_poly(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 && (i + j) % 2 == 0 {
                acc += ai * bj * monomial_inner(i, j);
            }
        }
    }
    acc
}

/// Semicircle-weight coefficients `f_0 … f_K` of a function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebSeries {
    pub coefficients: Vec<Complex64>,
    pub order: usize,
    pub quad_order: usize,
}

impl ChebSeries {
    pub fn eval(&self, x: f64) -> Complex64 {
        self.coefficients.iter().enumerate().map(|(k, c)| c * u_poly(k, x)).sum()
    }

    /// Largest imaginary part among the coefficients.
    pub fn imaginary_residue(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.im.abs()))
    }
}

/// Gauss–Chebyshev (second kind) nodes `θ_i = iπ/(Q+1)`, `i = 1..=Q`.
fn gauss_cheb2_angles(q: usize) -> impl Iterator<Item = f64> {
    (1..=q).map(move |i| i as f64 * PI / (q + 1) as f64)
}

/// `f_k = (1/4π) ∫ f(x) U_k(x) √(8−x²) dx` for `k = 0..=order`, with `quad_order`
/// second-kind Gauss–Chebyshev nodes; exact for polynomial `f` of degree
/// `≤ 2·quad_order − 1 − order`.
pub fn semicircle_coeffs<F>(f: F, order: usize, quad_order: usize) -> Result<ChebSeries>
where
    F: Fn(f64) -> Complex64,
{
    if quad_order < order + 1 {
        return Err(Error::arg(format!(
            "quadrature order {quad_order} cannot resolve coefficient {order}; need at least {}",
            order + 1
        )));
    }
    let scale = 2.0 / (quad_order + 1) as f64;
    let samples: Vec<(f64, Complex64)> = gauss_cheb2_angles(quad_order).map(|th| (th, f(EDGE * th.cos()))).collect();
    let coefficients = (0..=order)
        .map(|k| {
            let kk = (k + 1) as f64;
            samples.iter().map(|&(th, fx)| fx * (th.sin() * (kk * th).sin())).sum::<Complex64>() * scale
        })
        .collect();
    Ok(ChebSeries { coefficients, order, quad_order })
}

/// Single coefficient `f_k`.
pub fn semicircle_coeff<F>(f: F, k: usize, quad_order: usize) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    if quad_order < k + 1 {
        return Err(Error::arg(format!("quadrature order {quad_order} cannot resolve coefficient {k}")));
    }
    let scale = 2.0 / (quad_order + 1) as f64;
    let kk = (k + 1) as f64;
    Ok(gauss_cheb2_angles(quad_order)
        .map(|th| f(EDGE * th.cos()) * (th.sin() * (kk * th).sin()))
        .sum::<Complex64>()
        * scale)
}

/// Per-`k` contributions `2 γ_{k+1} f_k g_k`, `k = 0..=order`.
pub fn bilinear_form_terms<F, G>(f: F, g: G, order: usize, quad_order: usize) -> Result<Vec<Complex64>>
where
    F: Fn(f64) -> Complex64,
    G: Fn(f64) -> Complex64,
{
    let fs = semicircle_coeffs(f, order, quad_order)?;
    let gs = semicircle_coeffs(g, order, quad_order)?;
    Ok(fs
        .coefficients
        .iter()
        .zip(&gs.coefficients)
        .enumerate()
        .map(|(k, (fk, gk))| fk * gk * (2.0 * gamma_f64(k + 1)))
        .collect())
}

/// `⟨f, g⟩ ≈ Σ_{k=0}^{K} 2 γ_{k+1} f_k g_k` (bilinear, no conjugation).
pub fn bilinear_form<F, G>(f: F, g: G, order: usize, quad_order: usize) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
    G: Fn(f64) -> Complex64,
{
    Ok(bilinear_form_terms(f, g, order, quad_order)?.into_iter().sum())
}

/// Default quadrature order used with a series truncated at `order`.
pub fn default_quad_order(order: usize) -> usize {
    (2 * order + 64).max(128)
}

/// `F(x, y) = π Σ_k U_k(x) U_k(y) γ_{k+1}` evaluated through order `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSeries {
    /// Partial sum plus the summed tail.
    pub value: f64,
    /// Plain partial sum through `k = order`.
    pub partial_sum: f64,
    /// Tail `k > order` from repeated summation by parts.
    pub tail: f64,
    /// Size of the last retained summation-by-parts term.
    pub error_estimate: f64,
    pub order: usize,
}

/// `π Σ_k U_k(x) U_k(y) γ_{k+1}`.
///
/// The coefficients decay only like `k^{-1/2}`, so plain partial sums
/// oscillate with amplitude `~K^{-1/2}`. Writing
/// `U_k(x)U_k(y) = [cos((k+1)(θ−φ)) − cos((k+1)(θ+φ))] / (2 sin θ sin φ)`, each
/// tail `Σ_{k>K} γ_{k+1} e^{i(k+1)ψ}` is summed by parts repeatedly, using
/// exact forward differences of `γ`.
pub fn kernel_series(x: f64, y: f64, order: usize) -> Result<KernelSeries> {
    kernel_series_offset(x, y, order, 1)
}

/// Same series with weights `γ_{k+offset}` (`γ_0 = 1`).
pub(crate) fn kernel_series_offset(x: f64, y: f64, order: usize, offset: usize) -> Result<KernelSeries> {
    if !(x.abs() < EDGE && y.abs() < EDGE) {
        return Err(Error::arg(format!("kernel series needs |x|, |y| < 2√2, got ({x}, {y})")));
    }
    if x == y {
        return Err(Error::arg(format!("kernel diverges on the diagonal x = y = {x}")));
    }
    let t1 = (x / EDGE).acos();
    let t2 = (y / EDGE).acos();
    let denom = 2.0 * t1.sin() * t2.sin();
    let mut partial = 0.0;
    for k in 0..=order {
        let kk = (k + 1) as f64;
        partial += ((kk * t1).sin() * (kk * t2).sin()) * gamma_f64(k + offset);
    }
    partial /= t1.sin() * t2.sin();

    let first = order + 1;
    let diffs = forward_differences(first + offset, TAIL_TERMS);
    let (tail_minus, err_minus) = oscillatory_tail(&diffs, first, t1 - t2);
    let (tail_plus, err_plus) = oscillatory_tail(&diffs, first, t1 + t2);
    let tail = (tail_minus - tail_plus) / denom;
    let error_estimate = PI * (err_minus + err_plus) / denom.abs();
    Ok(KernelSeries { value: PI * (partial + tail), partial_sum: PI * partial, tail: PI * tail, error_estimate, order })
}

const TAIL_TERMS: usize = 10;

/// `Δ^m γ_start`, `m = 0..terms`, computed exactly.
fn forward_differences(start: usize, terms: usize) -> Vec<f64> {
    let mut row: Vec<ExactRational> = (0..terms).map(|i| gamma_with_zero(start + i)).collect();
    let mut out = Vec::with_capacity(terms);
    while !row.is_empty() {
        out.push(row[0].to_f64());
        row = row.windows(2).map(|w| &w[1] - &w[0]).collect();
    }
    out
}

/// `Re Σ_{k≥first} a_k e^{i(k+1)ψ}` where `a_{first+j}` has forward
/// differences `diffs`. Returns the value and the magnitude of the smallest
/// retained term.
fn oscillatory_tail(diffs: &[f64], first: usize, psi: f64) -> (f64, f64) {
    let z = Complex64::from_polar(1.0, psi);
    let one_minus = Complex64::new(1.0, 0.0) - z;
    let ratio = z / one_minus;
    let mut factor = z.powu(first as u32 + 1) / one_minus;
    let mut acc = Complex64::zero();
    let mut last = f64::INFINITY;
    for &d in diffs {
        let term = factor * d;
        let size = term.norm();
        if size > last {
            break;
        }
        acc += term;
        last = size;
        if size < 1e-17 {
            break;
        }
        factor *= ratio;
    }
    (acc.re, last)
}
