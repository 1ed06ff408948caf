//! Working-precision policy and small helpers around MPFR floats.
//!
//! Recovery multiplies samples by `e^{-λ(k) t}`, so every sample has to carry
//! enough significant bits to survive that amplification. The helpers here
//! turn an exponent budget into a mantissa width, and carry certified absolute
//! error bounds next to values.

use std::f64::consts::LN_2;

use rug::float::{Constant, Round};
use rug::Float;

use crate::error::{Error, Result};

/// Extra bits kept on top of the exponent budget.
pub const GUARD_BITS: u32 = 64;

/// Precision of bound bookkeeping (error terms are not needed to many digits).
pub const BOUND_BITS: u32 = 64;

/// Default ceiling on working precision; override with [`PRECISION_CEILING_ENV`].
pub const DEFAULT_PRECISION_CEILING: u32 = 1 << 22;

pub const PRECISION_CEILING_ENV: &str = "DYNSAMPLE_MAX_BITS";

/// Minimum mantissa width ever used; keeps f64 inputs exact.
pub const MIN_BITS: u32 = 64;

/// Precision ceiling, read from the environment when set.
pub fn precision_ceiling() -> u32 {
    std::env::var(PRECISION_CEILING_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u32>().ok())
        .filter(|&v| v >= MIN_BITS)
        .unwrap_or(DEFAULT_PRECISION_CEILING)
}

/// Bits needed to represent `e^{exponent}` amplification plus `guard` bits.
pub fn bits_for_exponent(exponent: f64, guard: u32) -> u32 {
    let e = if exponent.is_finite() { exponent.max(0.0) } else { 0.0 };
    ((e / LN_2).ceil() as u32).saturating_add(guard).max(MIN_BITS)
}

/// An absolute tolerance, possibly far below the f64 range.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct Tolerance(Float);

impl Tolerance {
    /// `tol` must be positive and finite.
    pub fn new(tol: f64) -> Result<Self> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        Ok(Tolerance(Float::with_val(BOUND_BITS, tol)))
    }

    /// The tolerance `2^{-bits}`.
    pub fn pow2_neg(bits: u32) -> Self {
        let one = Float::with_val(BOUND_BITS, 1);
        Tolerance(one >> bits)
    }

    pub fn from_float(tol: &Float) -> Result<Self> {
        if !(tol.is_finite() && tol.is_sign_positive() && !tol.is_zero()) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(Tolerance(Float::with_val(BOUND_BITS, tol)))
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn log2(&self) -> f64 {
        log2_abs(&self.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Tolerance(Float::with_val(BOUND_BITS, &self.0 * factor))
    }
}

/// A value with a certified absolute error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Certified {
    pub value: Float,
    pub error: Float,
}

impl Certified {
    pub fn exact(value: Float) -> Self {
        Certified { value, error: Float::new(BOUND_BITS) }
    }

    /// Upper end of the enclosing interval.
    pub fn upper(&self) -> Float {
        let p = self.value.prec();
        Float::with_val_round(p, &self.value + &self.error, Round::Up).0
    }

    /// Lower end of the enclosing interval.
    pub fn lower(&self) -> Float {
        let p = self.value.prec();
        Float::with_val_round(p, &self.value - &self.error, Round::Down).0
    }
}

/// `log2 |x|`, finite even for values that underflow f64. Zero maps to -inf.
pub fn log2_abs(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (m, e) = x.to_f64_exp();
    m.abs().log2() + e as f64
}

/// `2^{-bits}` as a bound-precision float.
pub fn ulp_factor(bits: u32) -> Float {
    Float::with_val(BOUND_BITS, 1) >> bits
}

/// Round a non-negative bound up by a relative safety margin so that the
/// 64-bit arithmetic used for bound bookkeeping never undercuts the truth.
pub fn inflate(bound: Float) -> Float {
    Float::with_val_round(BOUND_BITS, &bound * 1.0001f64, Round::Up).0
}

/// π at the given precision.
pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

/// Full-precision decimal representation that parses back to the same value.
pub fn to_decimal(x: &Float) -> String {
    x.to_string_radix(10, None)
}

pub fn from_decimal(s: &str, prec: u32) -> Result<Float> {
    let parsed = Float::parse(s.trim()).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
    Ok(Float::with_val(prec, parsed))
}
