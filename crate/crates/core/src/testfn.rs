//! Test functions `φ` for linear statistics, addressed by string id.
//!
//! | id                | φ(x)                                   |
//! |-------------------|----------------------------------------|
//! | `semicircle16`    | `√(16 − x²)`, extended by 0 for `|x|>4` |
//! | `gauss`           | `exp(−x²)`                             |
//! | `identity`        | `x`                                    |
//! | `poly:c0,c1,…`    | `Σ c_i x^i`                            |
//! | `mono:l`          | `x^l`                                  |
//! | `chebU:k`         | rescaled Chebyshev `U_k` on `[−2√2,2√2]` |
//! | `resolvent:μ,η`   | `1/(x − (μ + iη))`                     |

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::chebyshev::u_poly;
use crate::error::{Error, Result};

static SUPPORT_EXTENSIONS: AtomicU64 = AtomicU64::new(0);

/// Number of times `semicircle16` has been evaluated outside `[−4, 4]` in this
/// process (where it is extended by zero).
pub fn support_extension_count() -> u64 {
    SUPPORT_EXTENSIONS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Semicircle16,
    Gauss,
    Identity,
    /// Coefficients in ascending powers.
    Poly(Vec<f64>),
    Monomial(u32),
    ChebU(usize),
    Resolvent { mu: f64, eta: f64 },
}

impl TestFunction {
    pub fn parse(id: &str) -> Result<Self> {
        id.parse()
    }

    pub fn constant(c: f64) -> Self {
        TestFunction::Poly(vec![c])
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            TestFunction::Resolvent { mu, eta } => Complex64::new(1.0, 0.0) / Complex64::new(x - mu, -eta),
            other => Complex64::new(other.eval_real(x), 0.0),
        }
    }

    /// Real part of `φ(x)`; exact for the real-valued built-ins.
    pub fn eval_real(&self, x: f64) -> f64 {
        match self {
            TestFunction::Semicircle16 => {
                if x.abs() <= 4.0 {
                    (16.0 - x * x).sqrt()
                } else {
                    SUPPORT_EXTENSIONS.fetch_add(1, Ordering::Relaxed);
                    0.0
                }
            }
            TestFunction::Gauss => (-x * x).exp(),
            TestFunction::Identity => x,
            TestFunction::Poly(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            TestFunction::Monomial(l) => x.powi(*l as i32),
            TestFunction::ChebU(k) => u_poly(*k, x),
            TestFunction::Resolvent { .. } => self.eval(x).re,
        }
    }

    pub fn is_real(&self) -> bool {
        !matches!(self, TestFunction::Resolvent { .. })
    }

    /// `Some(c)` when `φ ≡ c`.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            TestFunction::Poly(c) if c.iter().skip(1).all(|&v| v == 0.0) => Some(c.first().copied().unwrap_or(0.0)),
            TestFunction::Monomial(0) | TestFunction::ChebU(0) => Some(1.0),
            _ => None,
        }
    }

    /// Odd symmetry `φ(−x) = −φ(x)`, when known structurally.
    pub fn is_odd(&self) -> bool {
        match self {
            TestFunction::Identity => true,
            TestFunction::Monomial(l) => l % 2 == 1,
            TestFunction::ChebU(k) => k % 2 == 1,
            TestFunction::Poly(c) => c.iter().step_by(2).all(|&v| v == 0.0),
            _ => false,
        }
    }

    /// Even symmetry `φ(−x) = φ(x)`, when known structurally.
    pub fn is_even(&self) -> bool {
        match self {
            TestFunction::Semicircle16 | TestFunction::Gauss => true,
            TestFunction::Monomial(l) => l % 2 == 0,
            TestFunction::ChebU(k) => k % 2 == 0,
            TestFunction::Poly(c) => c.iter().skip(1).step_by(2).all(|&v| v == 0.0),
            _ => false,
        }
    }

    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Semicircle16 => f.write_str("semicircle16"),
            TestFunction::Gauss => f.write_str("gauss"),
            TestFunction::Identity => f.write_str("identity"),
            TestFunction::Poly(c) => {
                f.write_str("poly:")?;
                for (i, v) in c.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            TestFunction::Monomial(l) => write!(f, "mono:{l}"),
            TestFunction::ChebU(k) => write!(f, "chebU:{k}"),
            TestFunction::Resolvent { mu, eta } => write!(f, "resolvent:{mu},{eta}"),
        }
    }
}

fn parse_f64(s: &str, id: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::arg(format!("bad number '{s}' in test function '{id}'")))
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(id: &str) -> Result<Self> {
        let (head, args) = match id.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (id, None),
        };
        match (head, args) {
            ("semicircle16", None) => Ok(TestFunction::Semicircle16),
            ("gauss", None) => Ok(TestFunction::Gauss),
            ("identity", None) => Ok(TestFunction::Identity),
            ("poly", Some(a)) => {
                let coeffs = a.split(',').map(|s| parse_f64(s, id)).collect::<Result<Vec<_>>>()?;
                Ok(TestFunction::Poly(coeffs))
            }
            ("mono", Some(a)) => a
                .trim()
                .parse()
                .map(TestFunction::Monomial)
                .map_err(|_| Error::arg(format!("bad degree in '{id}'"))),
            ("chebU", Some(a)) => a
                .trim()
                .parse()
                .map(TestFunction::ChebU)
                .map_err(|_| Error::arg(format!("bad degree in '{id}'"))),
            ("resolvent", Some(a)) => {
                let parts: Vec<&str> = a.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::arg(format!("'{id}' needs two parameters mu,eta")));
                }
                let (mu, eta) = (parse_f64(parts[0], id)?, parse_f64(parts[1], id)?);
                if eta == 0.0 {
                    return Err(Error::arg("resolvent test function needs eta != 0"));
                }
                Ok(TestFunction::Resolvent { mu, eta })
            }
            _ => Err(Error::arg(format!("unknown test function '{id}'"))),
        }
    }
}

impl Serialize for TestFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TestFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for id in ["semicircle16", "gauss", "identity", "poly:1,0,-2.5", "mono:3", "chebU:4", "resolvent:0.5,1"] {
            let f: TestFunction = id.parse().unwrap();
            assert_eq!(f.to_string(), id);
        }
        assert!("nope".parse::<TestFunction>().is_err());
        assert!("resolvent:1,0".parse::<TestFunction>().is_err());
        assert!("poly:1,x".parse::<TestFunction>().is_err());
    }

    #[test]
    fn values() {
        assert_eq!(TestFunction::Semicircle16.eval_real(0.0), 4.0);
        assert_eq!(TestFunction::Semicircle16.eval_real(4.5), 0.0);
        assert!(support_extension_count() >= 1);
        assert_eq!(TestFunction::Poly(vec![1.0, 2.0, 3.0]).eval_real(2.0), 17.0);
        assert_eq!(TestFunction::Monomial(3).eval_real(-2.0), -8.0);
        let r = TestFunction::Resolvent { mu: 0.0, eta: 1.0 }.eval(0.0);
        assert!((r - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn symmetry_flags() {
        assert!(TestFunction::Identity.is_odd());
        assert!(TestFunction::Gauss.is_even());
        assert!(TestFunction::Poly(vec![0.0, 1.0, 0.0, 2.0]).is_odd());
        assert_eq!(TestFunction::constant(2.0).as_constant(), Some(2.0));
        assert_eq!(TestFunction::Identity.as_constant(), None);
    }
}
