//! Sampling plans: the spatial point `x0` with its empirical constant `d0`,
//! geometric times `t_j = ρ^{j-1} t_1`, and the rescaled times of the
//! time-dependent heat equation with `b(t_j) ≥ ρ^{j-1} b(t_1)`.

use rayon::prelude::*;
use rug::float::Round;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::parse_real_expr;
use crate::operator::{rho_threshold, OperatorSpec};
use crate::precision::{self, Certified, MIN_BITS};
use crate::profile::DiffusivityProfile;

pub const DEFAULT_X0_EXPR: &str = "pi*(sqrt(5)-1)/2";
pub const DEFAULT_K_SCAN: u64 = 1_000_000;
/// Default ρ is this multiple of `2N ln 2`.
pub const DEFAULT_RHO_MARGIN: f64 = 1.05;
/// Root-finding gives up past this time.
pub const ROOT_HORIZON: f64 = 1e15;

/// Result of scanning `k |sin(k x0)|` over `k ≤ k_scan`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointScan {
    pub d0: f64,
    pub argmin: u64,
    pub k_scan: u64,
}

/// `d0 = min_{k ≤ k_scan} k |sin(k x0)|`.
///
/// Fails with `ResonantPoint(k)` at the smallest `k` for which `sin(k x0)` is
/// indistinguishable from zero at the scan precision.
pub fn scan_sampling_point(x0: &Float, k_scan: u64) -> Result<PointScan> {
    if k_scan == 0 {
        return Err(Error::InvalidArgument("k_scan must be at least 1".into()));
    }
    let pi = precision::pi(x0.prec().max(64));
    if !(*x0 > 0 && *x0 < pi) {
        return Err(Error::InvalidArgument(format!("x0 = {} is not in (0, pi)", x0.to_f64())));
    }
    let prec = 128 + 64 - k_scan.leading_zeros();
    let x = Float::with_val(prec, x0);
    let x_abs = x.to_f64();
    // |error of sin(k x)| ≤ (k |x| + 1) 2^{1-prec}; a value below that may be a true zero
    let slack = |k: u64| (k as f64 * x_abs + 1.0) * 2f64.powi(4 - prec as i32);

    let (d0, argmin, resonant) = (1..k_scan as usize + 1)
        .into_par_iter()
        .with_min_len(4096)
        .map(|k| {
            let k = k as u64;
            let s = Float::with_val(prec, &x * k).sin().abs();
            let sf = s.to_f64();
            let resonant = if sf <= slack(k) { Some(k) } else { None };
            (k as f64 * sf, k, resonant)
        })
        .reduce(
            || (f64::INFINITY, 0, None),
            |a, b| {
                let (d, arg) = if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { (b.0, b.1) } else { (a.0, a.1) };
                let res = match (a.2, b.2) {
                    (Some(p), Some(q)) => Some(p.min(q)),
                    (p, q) => p.or(q),
                };
                (d, arg, res)
            },
        );
    if let Some(k) = resonant {
        return Err(Error::ResonantPoint(k));
    }
    Ok(PointScan { d0, argmin, k_scan })
}

/// A sampling point given by an expression, so it can be re-evaluated at any precision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingPoint {
    pub expr: String,
    pub scan: PointScan,
}

impl SamplingPoint {
    pub fn from_expr(expr: &str, k_scan: u64) -> Result<Self> {
        let prec = 128 + 64 - k_scan.max(1).leading_zeros();
        let x0 = parse_real_expr(expr, prec)?;
        let scan = scan_sampling_point(&x0, k_scan)?;
        Ok(SamplingPoint { expr: expr.to_string(), scan })
    }

    pub fn x0(&self, prec: u32) -> Float {
        parse_real_expr(&self.expr, prec).expect("expression parsed at construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanMode {
    Autonomous,
    /// Physical times with certified accumulated times `b(t_j)`.
    Rescaled {
        profile: DiffusivityProfile,
        accumulated: Vec<Certified>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub x0: Float,
    pub point: SamplingPoint,
    pub t1: Float,
    pub rho: Float,
    pub n: usize,
    pub times: Vec<Float>,
    pub mode: PlanMode,
    /// Working precision of every quantity in the plan.
    pub precision: u32,
}

/// `t_j = ρ^{j-1} t_1` for `j = 1..n`, each step rounded once.
pub fn geometric_times(t1: &Float, rho: &Float, n: usize, spec: &OperatorSpec) -> Result<Vec<Float>> {
    check_times_args(t1, rho, n, spec.rho_threshold())?;
    let prec = t1.prec().max(rho.prec());
    let mut times = Vec::with_capacity(n);
    let mut t = Float::with_val(prec, t1);
    for _ in 0..n {
        let next = Float::with_val(prec, &t * rho);
        times.push(t);
        t = next;
    }
    Ok(times)
}

fn check_times_args(t1: &Float, rho: &Float, n: usize, threshold: f64) -> Result<()> {
    if !(t1.is_finite() && *t1 > 0) {
        return Err(Error::InvalidArgument("t1 must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let r = rho.to_f64();
    if !(r > threshold) {
        return Err(Error::RhoBelowThreshold { rho: r, threshold });
    }
    Ok(())
}

/// Physical times with `b(t_j) ≥ ρ^{j-1} b(t_1)` guaranteed by the `b` certificates.
///
/// Each `t_j` is the smallest float (to one ulp) whose certified lower value of
/// `b` reaches the certified upper value of `ρ^{j-1} b(t_1)`.
pub fn rescaled_times(
    profile: &DiffusivityProfile,
    t1: &Float,
    rho: &Float,
    n: usize,
    prec: u32,
) -> Result<(Vec<Float>, Vec<Certified>)> {
    check_times_args(t1, rho, n, rho_threshold(1))?;
    let prec = prec.max(MIN_BITS);
    let t1 = Float::with_val(prec, t1);
    let b1 = profile.accumulated(&t1, prec);
    let mut target = b1.upper();
    let mut times = vec![t1];
    let mut acc = vec![b1];
    for _ in 1..n {
        target = Float::with_val_round(prec, &target * rho, Round::Up).0;
        let lo = times.last().unwrap().clone();
        let t = invert_accumulated(profile, &target, lo, prec)?;
        acc.push(profile.accumulated(&t, prec));
        times.push(t);
    }
    Ok((times, acc))
}

fn invert_accumulated(profile: &DiffusivityProfile, target: &Float, lo: Float, prec: u32) -> Result<Float> {
    let reaches = |t: &Float| profile.accumulated(t, prec).lower() >= *target;
    let mut lo = lo;
    let mut hi = Float::with_val(prec, &lo * 2u32);
    while !reaches(&hi) {
        lo = hi.clone();
        hi *= 2u32;
        if hi > ROOT_HORIZON {
            return Err(Error::RootBracketFailure { target: target.to_f64(), horizon: ROOT_HORIZON });
        }
    }
    loop {
        let mid = Float::with_val(prec, &lo + &hi) / 2u32;
        if mid <= lo || mid >= hi {
            return Ok(hi);
        }
        if reaches(&mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// ρ = margin · threshold, the default rule.
pub fn default_rho(order_half: usize) -> f64 {
    DEFAULT_RHO_MARGIN * rho_threshold(order_half)
}

impl SamplingPlan {
    /// Geometric plan for the autonomous problem.
    pub fn autonomous(
        spec: &OperatorSpec,
        point: &SamplingPoint,
        t1: f64,
        rho: f64,
        n: usize,
        prec: u32,
    ) -> Result<Self> {
        let prec = prec.max(MIN_BITS);
        let t1 = Float::with_val(prec, t1);
        let rho = Float::with_val(prec, rho);
        let times = geometric_times(&t1, &rho, n, spec)?;
        Self::assemble(point, t1, rho, n, times, PlanMode::Autonomous, prec)
    }

    /// Rescaled plan for `u_t = α(t) u_xx`.
    pub fn rescaled(
        profile: &DiffusivityProfile,
        point: &SamplingPoint,
        t1: f64,
        rho: f64,
        n: usize,
        prec: u32,
    ) -> Result<Self> {
        let prec = prec.max(MIN_BITS);
        let t1 = Float::with_val(prec, t1);
        let rho = Float::with_val(prec, rho);
        let (times, accumulated) = rescaled_times(profile, &t1, &rho, n, prec)?;
        let mode = PlanMode::Rescaled { profile: profile.clone(), accumulated };
        Self::assemble(point, t1, rho, n, times, mode, prec)
    }

    fn assemble(
        point: &SamplingPoint,
        t1: Float,
        rho: Float,
        n: usize,
        times: Vec<Float>,
        mode: PlanMode,
        precision: u32,
    ) -> Result<Self> {
        let m = n.div_ceil(2) as u64;
        if point.scan.k_scan < m {
            return Err(Error::InvalidArgument(format!(
                "sampling point scanned only to k = {}, but {m} modes are reconstructed",
                point.scan.k_scan
            )));
        }
        Ok(SamplingPlan { x0: point.x0(precision), point: point.clone(), t1, rho, n, times, mode, precision })
    }

    /// `m = ⌈n/2⌉`, the number of reconstructed modes.
    pub fn m(&self) -> usize {
        self.n.div_ceil(2)
    }

    /// Times at which samples are values of `F(T) = Σ c_k e^{λ(k) T}`.
    pub fn model_times(&self) -> Vec<Float> {
        match &self.mode {
            PlanMode::Autonomous => self.times.clone(),
            PlanMode::Rescaled { accumulated, .. } => accumulated.iter().map(|c| c.value.clone()).collect(),
        }
    }

    /// ρ threshold that applies to this plan.
    pub fn threshold(&self, spec: &OperatorSpec) -> f64 {
        match self.mode {
            PlanMode::Autonomous => spec.rho_threshold(),
            PlanMode::Rescaled { .. } => rho_threshold(1),
        }
    }

    /// `sin(k x0)` at plan precision.
    pub fn sin_kx0(&self, k: u64) -> Float {
        Float::with_val(self.precision, &self.x0 * k).sin()
    }

    /// Re-check `b(t_j) ≥ ρ^{j-1} b(t_1)` from the stored certificates.
    pub fn rescaled_inequality_holds(&self) -> bool {
        let PlanMode::Rescaled { accumulated, .. } = &self.mode else {
            return true;
        };
        let mut target = accumulated[0].upper();
        for b in &accumulated[1..] {
            target = Float::with_val_round(self.precision, &target * &self.rho, Round::Up).0;
            if b.lower() < target {
                return false;
            }
        }
        true
    }
}

/// Model times in double precision, before a plan exists; used to size precision.
pub fn model_times_estimate(profile: Option<&DiffusivityProfile>, t1: f64, rho: f64, n: usize) -> Vec<f64> {
    let base = match profile {
        None => t1,
        Some(p) => p.accumulated_f64(t1),
    };
    (0..n).map(|j| base * rho.powi(j as i32)).collect()
}
