//! Grid verification of the power inequalities and the `g(x, y) ≤ 2N ln 2`
//! bound behind the sampling-ratio threshold.
//!
//! These are scans, not proofs. They guard the implementation of `g` and of
//! the spectrum against regressions.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::operator::rho_threshold;

const LOG_BITS: u32 = 128;

/// `g(x, y) = ln( ((x+1)^{2N} - y^{2N}) / ((y+1)^{2N} - y^{2N}) ) / (x - y)`.
pub fn g_value(order_half: u32, x: u64, y: u64) -> f64 {
    g_float(order_half, x, y).to_f64()
}

fn g_float(order_half: u32, x: u64, y: u64) -> Float {
    assert!(y >= 1 && x > y, "g is evaluated on 1 <= y < x");
    let p = 2 * order_half;
    let yp = Integer::from(y).pow(p);
    let num = Integer::from(x + 1).pow(p) - &yp;
    let den = Integer::from(y + 1).pow(p) - &yp;
    let ratio = Rational::from((num, den));
    let ln = Float::with_val(LOG_BITS, &ratio).ln();
    ln / (x - y) as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct GBoundReport {
    pub order_half: u32,
    pub x_max: u64,
    pub max_value: f64,
    pub argmax: (u64, u64),
    pub min_value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Scan `2 ≤ x ≤ x_max`, `1 ≤ y ≤ x-1` against `2N ln 2`.
pub fn check_g_bound(order_half: u32, x_max: u64) -> GBoundReport {
    check_g_bound_against(order_half, x_max, rho_threshold(order_half as usize))
}

/// Same scan against an arbitrary threshold (negative controls use this).
pub fn check_g_bound_against(order_half: u32, x_max: u64, threshold: f64) -> GBoundReport {
    assert!(order_half >= 1 && x_max >= 2);
    let (max_value, argmax, min_value) = (2..=x_max)
        .into_par_iter()
        .map(|x| {
            let mut best = (f64::NEG_INFINITY, (x, 1), f64::INFINITY);
            for y in 1..x {
                let g = g_value(order_half, x, y);
                if g > best.0 {
                    best.0 = g;
                    best.1 = (x, y);
                }
                best.2 = best.2.min(g);
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, (0, 0), f64::INFINITY),
            |a, b| {
                // ties resolve to the lexicographically smaller point
                let pick = if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b.1 } else { a.1 };
                (a.0.max(b.0), pick, a.2.min(b.2))
            },
        );
    GBoundReport {
        order_half,
        x_max,
        max_value,
        argmax,
        min_value,
        threshold,
        passed: min_value > 0.0 && max_value < threshold,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerCounterexample {
    /// `b^l - a^l > b^j - a^j` failed.
    Difference { a: u64, b: u64, l: u32, j: u32 },
    /// The ratio inequality failed at `(k, j, l, m)`.
    Ratio { k: u64, j: u64, l: u32, m: u32 },
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub k_max: u64,
    pub l_max: u32,
    pub checked: u64,
    pub passed: bool,
    pub counterexample: Option<PowerCounterexample>,
}

/// `b^l - a^l > b^j - a^j` for `l > j ≥ 1`.
pub fn difference_holds(a: u64, b: u64, l: u32, j: u32) -> bool {
    let (a, b) = (Integer::from(a), Integer::from(b));
    let lhs = b.clone().pow(l) - a.clone().pow(l);
    let rhs = b.clone().pow(j) - a.clone().pow(j);
    lhs > rhs
}

/// `((k+1)^l - j^l)/((j+1)^l - j^l) ≥ ((k+1)^m - j^m)/((j+1)^m - j^m) > 0`.
pub fn ratio_holds(k: u64, j: u64, l: u32, m: u32) -> bool {
    let num = |p: u32| Integer::from(k + 1).pow(p) - Integer::from(j).pow(p);
    let den = |p: u32| Integer::from(j + 1).pow(p) - Integer::from(j).pow(p);
    let (nl, dl, nm, dm) = (num(l), den(l), num(m), den(m));
    if nm <= 0 || dm <= 0 || dl <= 0 {
        return false;
    }
    Integer::from(&nl * &dm) >= Integer::from(&nm * &dl)
}

pub fn check_power_inequalities(k_max: u64, l_max: u32) -> PowerReport {
    assert!(k_max >= 3 && l_max >= 2);
    let mut checked = 0u64;
    let mut fail = None;
    'diff: for b in 2..=k_max {
        for a in 1..b {
            for l in 2..=l_max {
                for j in 1..l {
                    checked += 1;
                    if !difference_holds(a, b, l, j) {
                        fail = Some(PowerCounterexample::Difference { a, b, l, j });
                        break 'diff;
                    }
                }
            }
        }
    }
    if fail.is_none() {
        'ratio: for k in 2..=k_max {
            for j in 1..k {
                for l in 2..=l_max {
                    for m in 1..l {
                        checked += 1;
                        if !ratio_holds(k, j, l, m) {
                            fail = Some(PowerCounterexample::Ratio { k, j, l, m });
                            break 'ratio;
                        }
                    }
                }
            }
        }
    }
    PowerReport { k_max, l_max, checked, passed: fail.is_none(), counterexample: fail }
}
