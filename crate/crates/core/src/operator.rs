//! The spatial operator `L = Σ α_{2l} ∂_x^{2l}` on `[0, π]` with Dirichlet
//! boundary conditions and its sine-mode spectrum
//! `λ(k) = Σ_l (-1)^l α_{2l} k^{2l}`.
//!
//! Coefficients are held as exact rationals, so `λ(k)` and the gaps
//! `δ_k = λ(k) - λ(k+1)` are exact and monotonicity checks never fail on
//! rounding.

use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Admissible constant-coefficient operator of order `2N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorSpec {
    coeffs: Vec<Rational>,
}

/// Spectral gap between consecutive modes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralGap {
    pub k: u64,
    pub delta: Rational,
}

impl SpectralGap {
    pub fn to_f64(&self) -> f64 {
        self.delta.to_f64()
    }
}

/// Validate `α_2, α_4, ..., α_{2N}`: `α_{2l} > 0` for odd `l`, `< 0` for even `l`.
pub fn validate_coefficients(coeffs: &[Rational]) -> Result<OperatorSpec> {
    if coeffs.is_empty() {
        return Err(Error::EmptyCoefficients);
    }
    for (i, a) in coeffs.iter().enumerate() {
        let l = i + 1;
        let ok = if l % 2 == 1 { *a > 0 } else { *a < 0 };
        if !ok {
            return Err(Error::SignPatternViolation(l));
        }
    }
    Ok(OperatorSpec { coeffs: coeffs.to_vec() })
}

impl OperatorSpec {
    pub fn new(coeffs: Vec<Rational>) -> Result<Self> {
        validate_coefficients(&coeffs)
    }

    /// Coefficients given as doubles are taken at their exact binary value.
    pub fn from_f64(coeffs: &[f64]) -> Result<Self> {
        let mut exact = Vec::with_capacity(coeffs.len());
        for (i, &a) in coeffs.iter().enumerate() {
            let r = Rational::from_f64(a)
                .ok_or_else(|| Error::InvalidArgument(format!("coefficient {} is not finite", i + 1)))?;
            exact.push(r);
        }
        validate_coefficients(&exact)
    }

    /// The heat operator `∂_x^2`.
    pub fn heat() -> Self {
        OperatorSpec { coeffs: vec![Rational::from(1)] }
    }

    /// `N`, half the spatial order.
    pub fn order_half(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Exact eigenvalue on mode `k ≥ 1`.
    pub fn lambda(&self, k: u64) -> Rational {
        assert!(k >= 1, "modes are indexed from 1");
        let k = Integer::from(k);
        let k2 = Integer::from(&k * &k);
        let mut power = k2.clone();
        let mut acc = Rational::new();
        for (i, a) in self.coeffs.iter().enumerate() {
            let term = Rational::from(a * &power);
            if i % 2 == 0 {
                acc -= term;
            } else {
                acc += term;
            }
            power *= &k2;
        }
        acc
    }

    pub fn lambda_f64(&self, k: u64) -> f64 {
        self.lambda(k).to_f64()
    }

    /// `λ(k)` rounded to `prec` bits.
    pub fn lambda_float(&self, k: u64, prec: u32) -> Float {
        Float::with_val(prec, &self.lambda(k))
    }

    pub fn spectral_gap(&self, k: u64) -> SpectralGap {
        SpectralGap { k, delta: self.lambda(k) - self.lambda(k + 1) }
    }

    /// `Δ = min_{k ≤ m} δ_k`.
    pub fn min_gap(&self, m: u64) -> Rational {
        assert!(m >= 1, "min_gap needs m >= 1");
        (1..=m).map(|k| self.spectral_gap(k).delta).min().expect("non-empty range")
    }

    /// Lower bound `2N ln 2` that the geometric ratio must exceed.
    pub fn rho_threshold(&self) -> f64 {
        rho_threshold(self.order_half())
    }

    /// `max_{1 ≤ j < k ≤ n} ((λ(j) - λ(k+1)) / δ_j)^{1/(k-j)}`.
    ///
    /// The bound `|c_k - c̄_k| ≤ A₀ 2^k e^{-δ_k t_{n-k+1}}` propagates through
    /// the recursion when `ρ^{k-j} δ_j ≥ λ(j) - λ(k+1)` for every such pair,
    /// i.e. when `ρ` is at least this value. For the heat operator it is `8/3`
    /// from `n = 2` on; in general `ln` of it is `max g ≤ 2N ln 2`.
    pub fn induction_rho(&self, n: usize) -> f64 {
        let mut best = 0.0f64;
        for k in 2..=n as u64 {
            for j in 1..k {
                let ratio = (self.lambda(j) - self.lambda(k + 1)) / self.spectral_gap(j).delta;
                best = best.max(ratio.to_f64().powf(1.0 / (k - j) as f64));
            }
        }
        best
    }

    /// First pair `(k, j)` with `ρ^{k-j} δ_j < λ(j) - λ(k+1)`, compared exactly.
    pub fn induction_violation(&self, rho: &Rational, n: usize) -> Option<(u64, u64)> {
        for k in 2..=n as u64 {
            for j in 1..k {
                let mut lhs = self.spectral_gap(j).delta;
                for _ in 0..k - j {
                    lhs *= rho;
                }
                if lhs < self.lambda(j) - self.lambda(k + 1) {
                    return Some((k, j));
                }
            }
        }
        None
    }
}

/// `2N ln 2`; depends only on the order, never on coefficient values.
pub fn rho_threshold(order_half: usize) -> f64 {
    2.0 * order_half as f64 * std::f64::consts::LN_2
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L = ")?;
        for (i, a) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({a}) d^{}", 2 * (i + 1))?;
        }
        Ok(())
    }
}

/// A coefficient as written in a config: a number, or a string holding a
/// fraction (`"1/3"`) or an exact decimal (`"0.1"`, `"2.5e-3"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientLiteral {
    Number(f64),
    Text(String),
}

impl CoefficientLiteral {
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            CoefficientLiteral::Number(x) => {
                Rational::from_f64(*x).ok_or_else(|| Error::InvalidArgument(format!("coefficient {x} is not finite")))
            }
            CoefficientLiteral::Text(s) => parse_rational(s),
        }
    }
}

/// Parse a fraction or a decimal literal exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not an exact rational literal: {s:?}"));
    if s.contains('/') {
        return Rational::from_str(s).map_err(|_| bad());
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let num = Integer::from_str(if all.is_empty() { "0" } else { &all }).map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = Integer::from(10);
    let mut r = Rational::from(num);
    if scale >= 0 {
        r *= ten.pow(scale as u32);
    } else {
        r /= ten.pow((-scale) as u32);
    }
    if neg {
        r = -r;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(c: &[f64]) -> OperatorSpec {
        OperatorSpec::from_f64(c).unwrap()
    }

    #[test]
    fn induction_ratio_heat() {
        let heat = OperatorSpec::heat();
        assert_eq!(heat.induction_rho(1), 0.0);
        // (λ(1) - λ(3)) / δ_1 = 8/3 dominates every other pair
        assert!((heat.induction_rho(12) - 8.0 / 3.0).abs() < 1e-15);
        let r = |p: i32, q: i32| Rational::from((p, q));
        assert_eq!(heat.induction_violation(&r(8, 3), 12), None);
        assert_eq!(heat.induction_violation(&r(799, 300), 12), Some((2, 1)));
        let default = Rational::from_f64(1.05 * 2.0 * std::f64::consts::LN_2).unwrap();
        assert_eq!(heat.induction_violation(&default, 4), Some((2, 1)));
        assert_eq!(heat.induction_violation(&default, 1), None);
    }

    #[test]
    fn induction_ratio_biharmonic() {
        // λ(k) = -k² - k⁴: only the pair (2, 1) at n = 2, (λ(1) - λ(3)) / δ_1 = 88/18
        let bi = spec(&[1.0, -1.0]);
        assert!((bi.induction_rho(2) - 88.0 / 18.0).abs() < 1e-14);
        assert!(bi.induction_rho(6) >= bi.induction_rho(2));
        // still below e^{2N ln 2} = 16
        assert!(bi.induction_rho(30) < 16.0);
    }

    #[test]
    fn validation_examples() {
        let heat = spec(&[1.0]);
        assert_eq!(heat.lambda(3), -9);
        let bi = spec(&[1.0, -1.0]);
        assert_eq!(bi.lambda(2), -20);
        assert_eq!(OperatorSpec::from_f64(&[-1.0]), Err(Error::SignPatternViolation(1)));
        assert_eq!(OperatorSpec::from_f64(&[]), Err(Error::EmptyCoefficients));
        assert_eq!(OperatorSpec::from_f64(&[1.0, 1.0]), Err(Error::SignPatternViolation(2)));
        assert_eq!(OperatorSpec::from_f64(&[1.0, -1.0, 0.0]), Err(Error::SignPatternViolation(3)));
        assert!(OperatorSpec::from_f64(&[f64::NAN]).is_err());
        assert_eq!(spec(&[2.0]).lambda(5), -50);
    }

    #[test]
    fn gaps() {
        let heat = OperatorSpec::heat();
        assert_eq!(heat.spectral_gap(1).delta, 3);
        assert_eq!(heat.min_gap(10), 3);
        assert_eq!(spec(&[1.0, -1.0]).spectral_gap(2).delta, 70);
    }

    #[test]
    fn thresholds() {
        assert!((rho_threshold(1) - 1.386294).abs() < 1e-6);
        assert!((rho_threshold(2) - 2.772589).abs() < 1e-6);
        assert!((rho_threshold(3) - 4.158883).abs() < 1e-6);
        assert_eq!(spec(&[3.0, -0.25]).rho_threshold(), spec(&[1.0, -1.0]).rho_threshold());
    }

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("0.1").unwrap(), Rational::from((1, 10)));
        assert_eq!(parse_rational("-2.5e-3").unwrap(), Rational::from((-1, 400)));
        assert_eq!(parse_rational("1/3").unwrap(), Rational::from((1, 3)));
        assert_eq!(parse_rational("7").unwrap(), 7);
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
        let lit: CoefficientLiteral = serde_json::from_str("\"-1/7\"").unwrap();
        assert_eq!(lit.to_rational().unwrap(), Rational::from((-1, 7)));
    }

    #[test]
    fn exact_lambda_with_tiny_rational_coefficients() {
        // A double-precision evaluation would round λ(k+1) and λ(k) together here.
        let s = OperatorSpec::new(vec![Rational::from((1, 1_000_000_000_000i64)), Rational::from((-1, 3))]).unwrap();
        for k in 1..200u64 {
            assert!(s.lambda(k + 1) < s.lambda(k));
        }
    }
}
