//! Time-dependent diffusivity `α(t)` for `u_t = α(t) u_xx` and its
//! accumulated form `b(t) = ∫_0^t α(s) ds`.
//!
//! Every profile carries a user-supplied lower bound `m > 0` with
//! `α(t) ≥ m` for all `t ≥ 0`; construction checks it against the profile
//! parameters.

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{inflate, ulp_factor, Certified, BOUND_BITS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileKind {
    /// `α(t) = c`.
    Constant { c: f64 },
    /// `α(t) = a + b t`, `b ≥ 0`.
    Affine { a: f64, b: f64 },
    /// `α(t) = a + b sin(ω t)` with `a > |b|`.
    Sinusoidal { a: f64, b: f64, omega: f64 },
    /// Piecewise-linear through `(times[i], values[i])`, `times[0] = 0`,
    /// held constant after the last node.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusivityProfile {
    pub kind: ProfileKind,
    pub lower_bound: f64,
}

impl DiffusivityProfile {
    pub fn new(kind: ProfileKind, lower_bound: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        if !(lower_bound.is_finite() && lower_bound > 0.0) {
            return bad(format!("lower bound must be positive, got {lower_bound}"));
        }
        let m = lower_bound;
        match &kind {
            ProfileKind::Constant { c } => {
                if !(c.is_finite() && *c >= m) {
                    return bad(format!("constant {c} is below the lower bound {m}"));
                }
            }
            ProfileKind::Affine { a, b } => {
                if !(a.is_finite() && b.is_finite()) || *b < 0.0 || *a < m {
                    return bad(format!("affine profile {a} + {b} t needs b >= 0 and a >= {m}"));
                }
            }
            ProfileKind::Sinusoidal { a, b, omega } => {
                if !(a.is_finite() && b.is_finite() && omega.is_finite()) || *omega <= 0.0 {
                    return bad("sinusoidal profile needs finite a, b and omega > 0".into());
                }
                if a - b.abs() < m {
                    return bad(format!("a - |b| = {} is below the lower bound {m}", a - b.abs()));
                }
            }
            ProfileKind::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return bad("tabulated profile needs matching non-empty times/values".into());
                }
                if times[0] != 0.0 {
                    return bad("tabulated profile must start at t = 0".into());
                }
                if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return bad("tabulated times must be strictly increasing".into());
                }
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= m)) {
                    return bad(format!("tabulated value {v} is below the lower bound {m}"));
                }
            }
        }
        Ok(DiffusivityProfile { kind, lower_bound })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(ProfileKind::Constant { c }, c)
    }

    pub fn sinusoidal(a: f64, b: f64, omega: f64) -> Result<Self> {
        Self::new(ProfileKind::Sinusoidal { a, b, omega }, a - b.abs())
    }

    /// `α(t)`.
    pub fn alpha(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Constant { c } => *c,
            ProfileKind::Affine { a, b } => a + b * t,
            ProfileKind::Sinusoidal { a, b, omega } => a + b * (omega * t).sin(),
            ProfileKind::Tabulated { times, values } => {
                let i = times.partition_point(|&s| s <= t);
                if i >= times.len() {
                    return *values.last().unwrap();
                }
                let i = i.max(1) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// `b(t)` at `prec` bits with a certified absolute error.
    pub fn accumulated(&self, t: &Float, prec: u32) -> Certified {
        let t = Float::with_val(prec, t);
        let eps = |scale: Float, ulps: u32| -> Float {
            inflate(Float::with_val(BOUND_BITS, scale.abs() * ulp_factor(prec.saturating_sub(ulps))))
        };
        match &self.kind {
            ProfileKind::Constant { c } => {
                let value = Float::with_val(prec, &t * *c);
                let error = eps(Float::with_val(BOUND_BITS, &value), 1);
                Certified { value, error }
            }
            ProfileKind::Affine { a, b } => {
                let lin = Float::with_val(prec, &t * *a);
                let quad = Float::with_val(prec, t.square_ref()) * (*b / 2.0);
                let scale = Float::with_val(BOUND_BITS, lin.abs_ref()) + Float::with_val(BOUND_BITS, quad.abs_ref());
                let value = lin + quad;
                Certified { value, error: eps(scale, 3) }
            }
            ProfileKind::Sinusoidal { a, b, omega } => {
                let lin = Float::with_val(prec, &t * *a);
                let wt = Float::with_val(prec, &t * *omega);
                let amp = Float::with_val(prec, *b) / *omega;
                let osc = Float::with_val(prec, 1 - wt.clone().cos()) * &amp;
                let amp_abs = Float::with_val(BOUND_BITS, amp.abs_ref());
                let scale = Float::with_val(BOUND_BITS, lin.abs_ref())
                    + amp_abs * (2 + Float::with_val(BOUND_BITS, wt.abs_ref()));
                let value = lin + osc;
                Certified { value, error: eps(scale, 4) }
            }
            ProfileKind::Tabulated { times, values } => {
                // Trapezoid areas are exact for the piecewise-linear interpolant.
                let mut acc = Float::with_val(prec, 0);
                let mut ops = 0u32;
                for i in 0..times.len() {
                    let left = Float::with_val(prec, times[i]);
                    if t <= left {
                        break;
                    }
                    if i + 1 == times.len() {
                        let dt = Float::with_val(prec, &t - &left);
                        acc += dt * values[i];
                        ops += 3;
                        break;
                    }
                    let right = Float::with_val(prec, times[i + 1]);
                    let end = if t < right { t.clone() } else { right.clone() };
                    let slope =
                        Float::with_val(prec, values[i + 1] - values[i]) / Float::with_val(prec, &right - &left);
                    let dt = Float::with_val(prec, &end - &left);
                    let alpha_end = Float::with_val(prec, &slope * &dt) + values[i];
                    let area = Float::with_val(prec, alpha_end + values[i]) * dt / 2;
                    acc += area;
                    ops += 8;
                    if t < right {
                        break;
                    }
                }
                let bits = 32 - ops.max(1).leading_zeros() + 2;
                let error = eps(Float::with_val(BOUND_BITS, &acc), bits);
                Certified { value: acc, error }
            }
        }
    }

    /// Closed-form `b(t)` in double precision, where one exists.
    pub fn accumulated_f64(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Constant { c } => c * t,
            ProfileKind::Affine { a, b } => a * t + b * t * t / 2.0,
            ProfileKind::Sinusoidal { a, b, omega } => a * t + b / omega * (1.0 - (omega * t).cos()),
            ProfileKind::Tabulated { .. } => self.accumulated(&Float::with_val(64, t), 64).value.to_f64(),
        }
    }
}
