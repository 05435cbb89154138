//! Exact limit objects of the bilinear form: `γ_k`, midpoint-constrained Dyck
//! path counts, `C_{l,m}` and the monomial inner products `⟨x^l, x^m⟩`.
//!
//! `γ_k = P(|T_1 + … + T_k| ≤ 1/2)` for iid `T_i ~ U[−1/2, 1/2]`. The
//! alternating Irwin–Hall sum for it loses all precision in `f64` beyond
//! `k ≈ 25`, so it is evaluated in exact rational arithmetic and only
//! converted to floating point at the boundary.

use std::fmt;
use std::sync::{OnceLock, RwLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Reduced fraction with a positive denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "RationalRepr", try_from = "RationalRepr")]
pub struct ExactRational(BigRational);

#[derive(Serialize, Deserialize)]
struct RationalRepr {
    numerator: String,
    denominator: String,
}

impl From<ExactRational> for RationalRepr {
    fn from(r: ExactRational) -> Self {
        RationalRepr { numerator: r.numer().to_string(), denominator: r.denom().to_string() }
    }
}

impl TryFrom<RationalRepr> for ExactRational {
    type Error = String;

    fn try_from(r: RationalRepr) -> std::result::Result<Self, String> {
        let n: BigInt = r.numerator.parse().map_err(|e| format!("numerator: {e}"))?;
        let d: BigInt = r.denominator.parse().map_err(|e| format!("denominator: {e}"))?;
        if d.is_zero() {
            return Err("zero denominator".into());
        }
        Ok(ExactRational(BigRational::new(n, d)))
    }
}

impl ExactRational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Self {
        ExactRational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn zero() -> Self {
        ExactRational(BigRational::zero())
    }

    pub fn from_integer(v: impl Into<BigInt>) -> Self {
        ExactRational(BigRational::from_integer(v.into()))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Nearest `f64`, robust to numerators and denominators beyond `f64` range.
    pub fn to_f64(&self) -> f64 {
        if let (Some(n), Some(d)) = (self.numer().to_f64(), self.denom().to_f64()) {
            if n.is_finite() && d.is_finite() && d != 0.0 {
                return n / d;
            }
        }
        // Shift both to ~60 significant bits before dividing.
        let nb = self.numer().bits() as i64;
        let db = self.denom().bits() as i64;
        let shift_n = (nb - 60).max(0);
        let shift_d = (db - 60).max(0);
        let n = (self.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
        let d = (self.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
        n / d * 2f64.powi((shift_n - shift_d) as i32)
    }
}

impl From<BigRational> for ExactRational {
    fn from(r: BigRational) -> Self {
        ExactRational(r)
    }
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom().is_one() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl std::ops::Add for &ExactRational {
    type Output = ExactRational;
    fn add(self, rhs: &ExactRational) -> ExactRational {
        ExactRational(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &ExactRational {
    type Output = ExactRational;
    fn sub(self, rhs: &ExactRational) -> ExactRational {
        ExactRational(&self.0 - &rhs.0)
    }
}

impl std::ops::Mul for &ExactRational {
    type Output = ExactRational;
    fn mul(self, rhs: &ExactRational) -> ExactRational {
        ExactRational(&self.0 * &rhs.0)
    }
}

/// `C(n, k)`, zero outside `0 ≤ k ≤ n`.
pub fn binomial(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

struct GammaTable {
    exact: Vec<ExactRational>,
    float: Vec<f64>,
}

fn table() -> &'static RwLock<GammaTable> {
    static TABLE: OnceLock<RwLock<GammaTable>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(GammaTable { exact: Vec::new(), float: Vec::new() }))
}

/// Irwin–Hall alternating sum:
/// `γ_k = Σ_{s=0}^{⌊k/2⌋} (−1)^s C(k+1, s) (k+1−2s)^k / (2^k k!)`.
fn gamma_uncached(k: u64) -> ExactRational {
    let mut num = BigInt::zero();
    for s in 0..=k / 2 {
        let base = BigInt::from(k + 1 - 2 * s);
        let term = BigInt::from(binomial(k as i64 + 1, s as i64)) * num_traits::pow(base, k as usize);
        if s.is_odd() {
            num -= term;
        } else {
            num += term;
        }
    }
    let den = BigInt::from(factorial(k) << k as usize);
    ExactRational::new(num, den)
}

fn ensure_table(k: usize) {
    if table().read().expect("gamma table poisoned").exact.len() > k {
        return;
    }
    let mut t = table().write().expect("gamma table poisoned");
    while t.exact.len() <= k {
        let j = t.exact.len() as u64;
        // Index 0 holds the empty-sum convention γ_0 = 1.
        let g = if j == 0 { ExactRational::from_integer(1) } else { gamma_uncached(j) };
        let f = g.to_f64();
        t.exact.push(g);
        t.float.push(f);
    }
}

/// Exact `γ_k` for `k ≥ 1`.
pub fn gamma(k: usize) -> Result<ExactRational> {
    if k == 0 {
        return Err(Error::arg("gamma is defined for k >= 1"));
    }
    Ok(gamma_with_zero(k))
}

/// `γ_k` including the convention `γ_0 = 1`.
pub(crate) fn gamma_with_zero(k: usize) -> ExactRational {
    ensure_table(k);
    table().read().expect("gamma table poisoned").exact[k].clone()
}

/// `γ_k` as `f64` (with `γ_0 = 1`), cached.
pub fn gamma_f64(k: usize) -> f64 {
    ensure_table(k);
    table().read().expect("gamma table poisoned").float[k]
}

/// `γ_k` through the characteristic function of the uniform sum:
/// `γ_k = (2/π) ∫_0^∞ (sin s / s)^{k+1} ds`, integrated panel-by-panel over
/// `[jπ, (j+1)π]` with `order`-point Gauss–Legendre.
pub fn gamma_by_quadrature(k: usize, order: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::arg("gamma is defined for k >= 1"));
    }
    if order < 2 {
        return Err(Error::arg("quadrature order must be at least 2"));
    }
    let p = (k + 1) as i32;
    let pi = std::f64::consts::PI;
    // Odd powers of sin have zero mean, so the tail past S decays like S^{-p};
    // even powers leave a mean part handled in closed form below.
    let target: f64 = 1e-13;
    let s_end = target.powf(-1.0 / p as f64).max(64.0 * pi);
    let panels = (s_end / pi).ceil() as usize;
    let s_end = panels as f64 * pi;
    let (nodes, weights) = gauss_legendre(order);
    let half = 0.5 * pi;
    let mut total = 0.0;
    for j in 0..panels {
        let mid = (j as f64 + 0.5) * pi;
        let mut panel = 0.0;
        for (&t, &w) in nodes.iter().zip(&weights) {
            let s = mid + half * t;
            let v = (s.sin() / s).powi(p);
            panel += w * v;
        }
        total += half * panel;
    }
    if p % 2 == 0 {
        let mean = binomial(p as i64, p as i64 / 2).to_f64().unwrap_or(f64::INFINITY) / 2f64.powi(p);
        total += mean * s_end.powi(1 - p) / (p - 1) as f64;
    }
    Ok(2.0 / pi * total)
}

/// Catalan number `C_n`.
pub fn catalan(n: usize) -> BigUint {
    binomial(2 * n as i64, n as i64) / (n as u64 + 1)
}

/// Number of nonnegative ±1 paths from height 0 to height `k` in `l` steps.
fn ballot(l: u64, k: u64) -> BigUint {
    if k > l || (l - k) % 2 == 1 {
        return BigUint::zero();
    }
    // (k+1)/(l+1) · C(l+1, (l+k+2)/2), an exact division.
    let c = binomial(l as i64 + 1, ((l + k + 2) / 2) as i64);
    c * (k + 1) / (l + 1)
}

/// Dyck paths of length `l + m` with height `k` after `l` steps.
pub fn dyck_count(l: usize, m: usize, k: usize) -> Result<BigUint> {
    if (l + m) % 2 == 1 {
        return Err(Error::arg(format!("Dyck paths need even length, got l+m = {}", l + m)));
    }
    Ok(ballot(l as u64, k as u64) * ballot(m as u64, k as u64))
}

/// `C_{l,m} = Σ_k #Dyck(l, m, k) · γ_{k+1}`; zero for odd `l + m`.
pub fn c_lm(l: usize, m: usize) -> ExactRational {
    if (l + m) % 2 == 1 {
        return ExactRational::zero();
    }
    let mut acc = BigRational::zero();
    let top = l.min(m);
    let mut k = l % 2;
    while k <= top {
        let count = BigInt::from(ballot(l as u64, k as u64) * ballot(m as u64, k as u64));
        acc += BigRational::from_integer(count) * gamma_with_zero(k + 1).inner();
        k += 2;
    }
    ExactRational(acc)
}

/// `⟨x^l, x^m⟩ = (√2)^{l+m+2} C_{l,m}` as an exact rational (zero for odd `l+m`).
pub fn monomial_inner_exact(l: usize, m: usize) -> ExactRational {
    if (l + m) % 2 == 1 {
        return ExactRational::zero();
    }
    let pow2 = BigInt::one() << ((l + m + 2) / 2);
    ExactRational(c_lm(l, m).0 * BigRational::from_integer(pow2))
}

/// `⟨x^l, x^m⟩` as `f64`.
pub fn monomial_inner(l: usize, m: usize) -> f64 {
    monomial_inner_exact(l, m).to_f64()
}

/// Sign of an exact rational, for invariant checks.
pub fn is_positive(r: &ExactRational) -> bool {
    r.0.is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> ExactRational {
        ExactRational::new(n, d)
    }

    /// Irwin–Hall CDF `P(X_k ≤ x)` for a sum of `k` standard uniforms, evaluated
    /// at a half-integer `x = h/2`. This is a different alternating sum than the one
    /// under test.
    fn irwin_hall_cdf_half(k: u64, h: u64) -> BigRational {
        let x = BigRational::new(BigInt::from(h), BigInt::from(2));
        let mut acc = BigRational::zero();
        let mut i = 0u64;
        while BigRational::from_integer(BigInt::from(i)) <= x {
            let term = num_traits::pow(&x - BigRational::from_integer(BigInt::from(i)), k as usize)
                * BigRational::from_integer(BigInt::from(binomial(k as i64, i as i64)));
            if i % 2 == 1 {
                acc -= term;
            } else {
                acc += term;
            }
            i += 1;
        }
        acc / BigRational::from_integer(BigInt::from(factorial(k)))
    }

    #[test]
    fn gamma_small_values() {
        assert_eq!(gamma(1).unwrap(), r(1, 1));
        assert_eq!(gamma(2).unwrap(), r(3, 4));
        assert_eq!(gamma(3).unwrap(), r(2, 3));
        assert!(gamma(0).is_err());
    }

    #[test]
    fn gamma_matches_irwin_hall_cdf() {
        for k in 1..=30u64 {
            let oracle = irwin_hall_cdf_half(k, k + 1) - irwin_hall_cdf_half(k, k - 1);
            assert_eq!(gamma(k as usize).unwrap().inner(), &oracle, "k = {k}");
        }
    }

    #[test]
    fn gamma_strictly_decreasing() {
        let mut prev = gamma(1).unwrap();
        for k in 2..=60 {
            let g = gamma(k).unwrap();
            assert!(is_positive(&g) && g < prev, "k = {k}");
            prev = g;
        }
    }

    #[test]
    fn gamma_local_clt_band() {
        for k in 30..=60 {
            let scaled = gamma_f64(k) * (std::f64::consts::PI * (k as f64 + 2.0) / 6.0).sqrt();
            assert!((0.9..=1.1).contains(&scaled), "k = {k}: {scaled}");
        }
    }

    #[test]
    fn gamma_quadrature_examples() {
        assert!((gamma_by_quadrature(1, 16).unwrap() - 1.0).abs() < 1e-8);
        assert!((gamma_by_quadrature(2, 16).unwrap() - 0.75).abs() < 1e-8);
        assert!((gamma_by_quadrature(20, 16).unwrap() - gamma(20).unwrap().to_f64()).abs() < 1e-8);
    }

    #[test]
    fn to_f64_handles_huge_parts() {
        let huge = BigInt::one() << 3000usize;
        let x = ExactRational::new(huge.clone() * 3, huge * 4);
        assert_eq!(x.to_f64(), 0.75);
        let big = ExactRational::new(BigInt::from(3) << 2000usize, (BigInt::one() << 2000usize) + 1);
        assert!((big.to_f64() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn dyck_examples() {
        assert_eq!(dyck_count(1, 1, 1).unwrap(), BigUint::from(1u32));
        assert_eq!(dyck_count(2, 2, 0).unwrap(), BigUint::from(1u32));
        assert_eq!(dyck_count(2, 2, 2).unwrap(), BigUint::from(1u32));
        assert_eq!(dyck_count(2, 2, 1).unwrap(), BigUint::zero());
        assert_eq!(dyck_count(3, 1, 3).unwrap(), BigUint::zero());
        assert!(dyck_count(1, 2, 1).is_err());
    }

    #[test]
    fn dyck_ballot_difference_form() {
        // [C(l,(l−k)/2) − C(l,(l−k−2)/2)]·[C(m,(m−k)/2) − C(m,(m−k−2)/2)]
        let diff = |l: i64, k: i64| -> BigInt {
            BigInt::from(binomial(l, (l - k) / 2)) - BigInt::from(binomial(l, (l - k - 2) / 2))
        };
        for l in 0..=14i64 {
            for m in 0..=14i64 {
                if (l + m) % 2 == 1 {
                    continue;
                }
                for k in 0..=l.min(m) {
                    if (l - k) % 2 != 0 {
                        continue;
                    }
                    let expected = diff(l, k) * diff(m, k);
                    let got = BigInt::from(dyck_count(l as usize, m as usize, k as usize).unwrap());
                    assert_eq!(got, expected, "l={l} m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn c_lm_examples() {
        assert_eq!(c_lm(0, 0), r(1, 1));
        assert_eq!(c_lm(1, 1), r(3, 4));
        assert_eq!(c_lm(1, 2), ExactRational::zero());
        assert_eq!(c_lm(2, 2), r(5, 3));
        for l in 0..8 {
            for m in 0..8 {
                assert_eq!(c_lm(l, m), c_lm(m, l));
            }
        }
    }

    #[test]
    fn monomial_inner_examples() {
        assert_eq!(monomial_inner(0, 0), 2.0);
        assert_eq!(monomial_inner(1, 1), 3.0);
        assert_eq!(monomial_inner(0, 1), 0.0);
        assert!((monomial_inner(2, 2) - 40.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn band_pair_count_oracle_for_x_x() {
        // (1/b²)·#{(i,j) ∈ I_1², |i−j| ≤ b} → ⟨x, x⟩ as b → ∞.
        let b = 4000i64;
        let set: Vec<i64> = (-b..=b).filter(|&i| i != 0).collect();
        let mut count = 0i64;
        for &i in &set {
            let lo = (i - b).max(-b);
            let hi = (i + b).min(b);
            count += hi - lo + 1 - if lo <= 0 && 0 <= hi { 1 } else { 0 };
        }
        let limit = count as f64 / (b * b) as f64;
        assert!((limit - monomial_inner(1, 1)).abs() < 2.0 / b as f64, "{limit}");
    }

    #[test]
    fn rational_serde() {
        let g = gamma(4).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"numerator":"115","denominator":"192"}"#);
        let back: ExactRational = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
