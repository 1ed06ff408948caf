//! Back-substitution recovery of `c_k = f̂_k sin(k x0)` from samples of
//! `F(t) = Σ c_k e^{λ(k) t}`, reconstruction of the first `⌈n/2⌉` modes, and
//! the a-priori bounds `|c_k - c̄_k| ≤ A₀(t₁) 2^k e^{-δ_k t_{n-k+1}}`.
//!
//! Mode `k` is recovered from sample `n-k+1`: the latest sample isolates the
//! slowest mode, and each earlier sample removes the modes already found.

use std::f64::consts::{LN_2, PI};

use rug::{Float, Rational};
use serde::Serialize;

use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::forward::Trace;
use crate::operator::OperatorSpec;
use crate::precision::{self, inflate, ulp_factor, Certified, Tolerance, BOUND_BITS, MIN_BITS};
use crate::schedule::SamplingPlan;

/// Mantissa width below which the recursion refuses to run:
/// `max_k |λ(k)| T_{n-k+1} / ln 2 + 64`.
pub fn precision_gate(spec: &OperatorSpec, model_times: &[f64]) -> u32 {
    let n = model_times.len();
    let e = (1..=n).map(|k| spec.lambda_f64(k as u64).abs() * model_times[n - k]).fold(0.0, f64::max);
    precision::bits_for_exponent(e, precision::GUARD_BITS)
}

/// Per-sample tolerances and working precision for a recovery job.
#[derive(Debug, Clone)]
pub struct SamplingPolicy {
    /// Tolerance of sample `i`, which feeds mode `k = n - i + 1`.
    pub tolerances: Vec<Tolerance>,
    pub bits: u32,
    /// `max_k |λ(k+1)| T_{n-k+1}`: the largest decay that must stay resolvable.
    pub exponent: f64,
}

/// Size sample `n-k+1`'s tolerance as `2^{-guard} e^{λ(k+1) T_{n-k+1}}`, so its
/// amplified error stays `2^{-guard}` below `bound_k`; the working precision
/// resolves the widest of those.
pub fn sampling_policy(spec: &OperatorSpec, f: &InitialDatum, model_times: &[f64], guard: u32) -> SamplingPolicy {
    let n = model_times.len();
    let tol_bits: Vec<u32> = (0..n)
        .map(|i| {
            let k = (n - i) as u64;
            (spec.lambda_f64(k + 1).abs() * model_times[i] / LN_2).ceil() as u32 + guard
        })
        .collect();
    let exponent = (0..n).map(|i| spec.lambda_f64((n - i) as u64 + 1).abs() * model_times[i]).fold(0.0, f64::max);
    let s = f.l1_norm().max(1.0);
    let k = f.support_len().max(1) as f64;
    let extra = (s.log2() + (k * k * 32.0 + 64.0).log2()).ceil() as u32 + 16;
    let widest = tol_bits.iter().copied().max().unwrap_or(0);
    let bits = (widest + extra).max(precision_gate(spec, model_times)).max(MIN_BITS);
    SamplingPolicy { tolerances: tol_bits.into_iter().map(Tolerance::pow2_neg).collect(), bits, exponent }
}

/// `A₀(t₁) = Σ_{j≥2} e^{-(λ(2) - λ(j)) t₁}` with a certified truncation error.
///
/// Summation stops once the geometric tail bound drops below
/// `tol · partial · 10^{-2}`.
pub fn a0_constant(spec: &OperatorSpec, t1: &Float, tol: f64) -> Result<Certified> {
    if !(t1.is_finite() && *t1 > 0) {
        return Err(Error::InvalidArgument("t1 must be positive".into()));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("A0 tolerance must be positive, got {tol}")));
    }
    let prec = t1.prec().max(MIN_BITS + (-tol.log2()).max(0.0).ceil() as u32);
    let lam2 = spec.lambda(2);
    let mut sum = Float::with_val(prec, 1);
    let mut rounding = Float::with_val(BOUND_BITS, 0);
    let mut j = 3u64;
    loop {
        let diff = spec.lambda(j) - &lam2;
        let e = Float::with_val(prec, &diff) * t1;
        let term = e.clone().exp();
        // Terms shrink by at least e^{-δ_j t₁} from here on.
        let q = Float::with_val(BOUND_BITS, -(Float::with_val(BOUND_BITS, &spec.spectral_gap(j).delta) * t1)).exp();
        let tail = inflate(Float::with_val(BOUND_BITS, &term) / (1 - q));
        let cutoff = Float::with_val(BOUND_BITS, &sum) * (tol * 1e-2);
        if tail < cutoff {
            let err = inflate(tail + rounding + Float::with_val(BOUND_BITS, &sum) * ulp_factor(prec - 2) * (j as f64));
            return Ok(Certified { value: sum, error: err });
        }
        rounding += Float::with_val(BOUND_BITS, &term)
            * (Float::with_val(BOUND_BITS, e.abs_ref()) + 4u32)
            * ulp_factor(prec - 1);
        sum += term;
        j += 1;
    }
}

/// Recovered `c̄_k` with propagated numeric budgets `β_k`.
#[derive(Debug, Clone)]
pub struct CoefficientRecovery {
    pub c_bar: Vec<Float>,
    /// Bound on `|c̄_k - ĉ_k|`, where `ĉ_k` is the recursion evaluated in
    /// exact arithmetic on the exact samples.
    pub budget: Vec<Float>,
}

/// The recursion, returning only the coefficients.
pub fn recover_coefficients(trace: &Trace, spec: &OperatorSpec) -> Result<Vec<Float>> {
    Ok(recover_with_budget(trace, spec)?.c_bar)
}

/// `c̄_k = e^{-λ(k) T} F(T) - Σ_{j<k} c̄_j e^{(λ(j) - λ(k)) T}`, `T = T_{n-k+1}`.
pub fn recover_with_budget(trace: &Trace, spec: &OperatorSpec) -> Result<CoefficientRecovery> {
    let n = trace.len();
    if n == 0 {
        return Err(Error::InvalidArgument("trace is empty".into()));
    }
    let times = trace.model_times();
    let times_f64: Vec<f64> = times.iter().map(Float::to_f64).collect();
    let need = precision_gate(spec, &times_f64);
    if trace.mantissa_bits < need {
        return Err(Error::PrecisionInsufficient { have: trace.mantissa_bits, need });
    }
    let p = trace.mantissa_bits;
    let u = ulp_factor(p - 1);
    let lambdas: Vec<Rational> = (1..=n as u64).map(|k| spec.lambda(k)).collect();

    let mut c_bar: Vec<Float> = Vec::with_capacity(n);
    let mut budget: Vec<Float> = Vec::with_capacity(n);
    for k in 1..=n {
        let i = n - k;
        let t = &times[i];
        let e_k = Float::with_val(p, &lambdas[k - 1]) * t;
        let amp = Float::with_val(p, -&e_k).exp();
        let lead = Float::with_val(p, &amp * &trace.samples[i]);

        let mut acc = lead.clone();
        let mut magnitude = Float::with_val(BOUND_BITS, lead.abs_ref());
        let mut propagated = Float::with_val(BOUND_BITS, &amp) * &trace.truncation_errors[i];
        let mut max_exp = Float::with_val(BOUND_BITS, e_k.abs_ref());
        for j in 1..k {
            let diff = Rational::from(&lambdas[j - 1] - &lambdas[k - 1]);
            let e = Float::with_val(p, &diff) * t;
            let factor = Float::with_val(p, e.exp_ref());
            let sub = Float::with_val(p, &c_bar[j - 1] * &factor);
            magnitude += Float::with_val(BOUND_BITS, sub.abs_ref());
            propagated += Float::with_val(BOUND_BITS, &budget[j - 1] * &factor);
            if Float::with_val(BOUND_BITS, e.abs_ref()) > max_exp {
                max_exp = Float::with_val(BOUND_BITS, e.abs_ref());
            }
            acc -= sub;
        }
        // exponent rounding (|E| u per exponential), products and k subtractions
        let rel = (max_exp + (2 * k + 8) as u32) * &u;
        let rounding = magnitude * rel * 2u32;
        budget.push(inflate(propagated + rounding));
        c_bar.push(acc);
    }
    Ok(CoefficientRecovery { c_bar, budget })
}

/// `A₀(T₁)` together with `bound_k = A₀ 2^k e^{-δ_k T_{n-k+1}}`, `k = 1..n`.
#[derive(Debug, Clone)]
pub struct AprioriBounds {
    pub a0: Certified,
    pub bounds: Vec<Float>,
}

/// A-priori bounds for a plan. Rescaled plans use the heat spectrum on
/// `T_j = b(t_j)`, i.e. `A₀ 2^k e^{-(2k+1) b(t_{n-k+1})}`.
pub fn apriori_error_bounds(spec: &OperatorSpec, plan: &SamplingPlan, a0_tol: f64) -> Result<AprioriBounds> {
    let heat;
    let spec = match plan.mode {
        crate::schedule::PlanMode::Autonomous => spec,
        crate::schedule::PlanMode::Rescaled { .. } => {
            heat = OperatorSpec::heat();
            &heat
        }
    };
    let threshold = plan.threshold(spec);
    let rho = plan.rho.to_f64();
    if !(rho > threshold) {
        return Err(Error::RhoBelowThreshold { rho, threshold });
    }
    let times = plan.model_times();
    let a0 = a0_constant(spec, &times[0], a0_tol)?;
    let bounds = bounds_from(spec, &a0, &times);
    Ok(AprioriBounds { a0, bounds })
}

fn bounds_from(spec: &OperatorSpec, a0: &Certified, times: &[Float]) -> Vec<Float> {
    let n = times.len();
    let a0_up = Float::with_val(BOUND_BITS, a0.upper());
    (1..=n)
        .map(|k| {
            let delta = Float::with_val(BOUND_BITS, &spec.spectral_gap(k as u64).delta);
            let decay = Float::with_val(BOUND_BITS, -(delta * &times[n - k])).exp();
            inflate(Float::with_val(BOUND_BITS, &a0_up * decay) << (k as u32))
        })
        .collect()
}

/// The reconstruction `f_n = Σ_{k ≤ m} f̄_k sin(kx)` in working precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub coeffs: Vec<Float>,
}

impl Reconstruction {
    pub fn m(&self) -> usize {
        self.coeffs.len()
    }

    /// `‖f_n - f‖_{L²}` via Parseval, in working precision.
    pub fn l2_distance_to(&self, f: &InitialDatum) -> Float {
        let prec = self.coeffs.first().map_or(MIN_BITS, Float::prec);
        let len = self.coeffs.len().max(f.support_len());
        let mut s = Float::with_val(prec, 0);
        for k in 1..=len {
            let mut d = Float::with_val(prec, f.coefficient(k));
            if let Some(c) = self.coeffs.get(k - 1) {
                d -= c;
            }
            s += d.square();
        }
        (s * precision::pi(prec) / 2u32).sqrt()
    }

    /// Rounds to doubles; precision below `2^{-53}` relative is lost.
    pub fn to_datum(&self, r: f64) -> Result<InitialDatum> {
        InitialDatum::new(r, self.coeffs.iter().map(Float::to_f64).collect())
    }
}

/// `f̄_k = c̄_k / sin(k x0)` for `k ≤ m = ⌈n/2⌉`.
pub fn reconstruct(c_bar: &[Float], plan: &SamplingPlan) -> Reconstruction {
    let m = c_bar.len().div_ceil(2);
    let coeffs = (1..=m)
        .map(|k| Float::with_val(plan.precision.max(c_bar[k - 1].prec()), &c_bar[k - 1] / plan.sin_kx0(k as u64)))
        .collect();
    Reconstruction { coeffs }
}

/// Full output of one recovery job.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub c_bar: Vec<Float>,
    pub reconstruction: Reconstruction,
    pub m: usize,
    pub a0: Certified,
    pub apriori_bounds: Vec<Float>,
    pub numeric_budget: Vec<Float>,
    /// `|c_k - c̄_k|` when the truth is known.
    pub coefficient_errors: Option<Vec<Float>>,
    pub l2_error: Option<Float>,
    /// Numeric part of the `L²` error: `(π/2 Σ_{k≤m} (β_k / |sin k x0|)²)^{1/2}`.
    pub l2_budget: Float,
    pub mantissa_bits: u32,
    /// First pair `(k, j)` at which the plan's ratio is too small for the
    /// bounds to propagate (see [`OperatorSpec::induction_violation`]).
    pub induction_violation: Option<(u64, u64)>,
}

impl RecoveryResult {
    pub fn f_bar(&self) -> &[Float] {
        &self.reconstruction.coeffs
    }

    /// `max_k (|c_k - c̄_k| - bound_k)`; non-positive when every bound holds.
    pub fn max_bound_violation(&self) -> Option<Float> {
        let errs = self.coefficient_errors.as_ref()?;
        errs.iter()
            .zip(&self.apriori_bounds)
            .map(|(e, b)| Float::with_val(e.prec().max(BOUND_BITS), e - b))
            .max_by(|a, b| a.partial_cmp(b).expect("finite"))
    }

    pub fn bounds_hold(&self) -> Option<bool> {
        self.max_bound_violation().map(|v| v <= 0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let dec = |v: &[Float]| v.iter().map(precision::to_decimal).collect::<Vec<_>>();
        let ledger: Vec<_> = (0..self.c_bar.len())
            .map(|i| {
                serde_json::json!({
                    "k": i + 1,
                    "c_bar": precision::to_decimal(&self.c_bar[i]),
                    "apriori_bound": precision::to_decimal(&self.apriori_bounds[i]),
                    "numeric_budget": precision::to_decimal(&self.numeric_budget[i]),
                    "error": self.coefficient_errors.as_ref().map(|e| precision::to_decimal(&e[i])),
                })
            })
            .collect();
        serde_json::json!({
            "m": self.m,
            "mantissa_bits": self.mantissa_bits,
            "a0": precision::to_decimal(&self.a0.value),
            "a0_error": precision::to_decimal(&self.a0.error),
            "c_bar": dec(&self.c_bar),
            "f_bar": dec(&self.reconstruction.coeffs),
            "l2_error": self.l2_error.as_ref().map(precision::to_decimal),
            "l2_budget": precision::to_decimal(&self.l2_budget),
            "max_bound_violation": self.max_bound_violation().as_ref().map(precision::to_decimal),
            "bounds_guaranteed": self.induction_violation.is_none(),
            "induction_violation": self.induction_violation.map(|(k, j)| serde_json::json!({ "k": k, "j": j })),
            "bounds": ledger,
        })
    }
}

/// Truth `c_k = f̂_k sin(k x0)` for `k = 1..n` at plan precision.
pub fn true_coefficients(f: &InitialDatum, plan: &SamplingPlan, n: usize) -> Vec<Float> {
    (1..=n as u64).map(|k| plan.sin_kx0(k) * f.coefficient(k as usize)).collect()
}

/// Recursion, reconstruction, bounds and (with a known truth) error accounting.
pub fn recover(
    spec: &OperatorSpec,
    plan: &SamplingPlan,
    trace: &Trace,
    truth: Option<&InitialDatum>,
    a0_tol: f64,
) -> Result<RecoveryResult> {
    if trace.len() != plan.n {
        return Err(Error::InvalidArgument(format!(
            "trace has {} samples but the plan has n = {}",
            trace.len(),
            plan.n
        )));
    }
    let spec = match plan.mode {
        crate::schedule::PlanMode::Autonomous => spec.clone(),
        crate::schedule::PlanMode::Rescaled { .. } => OperatorSpec::heat(),
    };
    let apriori = apriori_error_bounds(&spec, plan, a0_tol)?;
    let CoefficientRecovery { c_bar, budget } = recover_with_budget(trace, &spec)?;
    let reconstruction = reconstruct(&c_bar, plan);
    let m = reconstruction.m();

    let mut l2b = Float::with_val(BOUND_BITS, 0);
    for k in 1..=m {
        let s = Float::with_val(BOUND_BITS, plan.sin_kx0(k as u64).abs());
        l2b += Float::with_val(BOUND_BITS, &budget[k - 1] / s).square();
    }
    let l2_budget = inflate((l2b * (PI / 2.0)).sqrt());

    let (coefficient_errors, l2_error) = match truth {
        Some(f) => {
            let c = true_coefficients(f, plan, plan.n);
            let errs =
                c.iter().zip(&c_bar).map(|(a, b)| Float::with_val(a.prec().max(b.prec()), a - b).abs()).collect();
            (Some(errs), Some(reconstruction.l2_distance_to(f)))
        }
        None => (None, None),
    };
    Ok(RecoveryResult {
        c_bar,
        reconstruction,
        m,
        a0: apriori.a0,
        apriori_bounds: apriori.bounds,
        numeric_budget: budget,
        coefficient_errors,
        l2_error,
        l2_budget,
        mantissa_bits: trace.mantissa_bits,
        induction_violation: spec.induction_violation(&plan.rho.to_rational().expect("finite ratio"), plan.n),
    })
}

/// Two coefficients from a single heat-equation sample.
#[derive(Debug, Clone, Serialize)]
pub struct OneSampleEstimate {
    pub c1: f64,
    pub c2: f64,
    pub bound1: f64,
    pub bound2: f64,
}

/// `c̄₁ = e^{t₁} F(t₁)`, `c̿₂ = e^{4t₁} F(t₁) - c̄₁ e^{3t₁}` with the bounds
/// `E₁ ≤ 1/(2^r e^{3t₁}(1-e^{-t₁}))` and `E₂ ≤ (1 + e^{-5t₁})/(2^r(1-e^{-t₁}))`.
///
/// In exact arithmetic `c̿₂` vanishes identically; the second estimate is
/// the zero approximation and its bound is the prior `|c₂| ≤ 2^{-r}`
/// sharpened to the displayed form.
pub fn one_sample_two_coeffs(u1: &Float, t1: &Float, r: f64) -> Result<OneSampleEstimate> {
    if !(t1.is_finite() && *t1 > 0) {
        return Err(Error::InvalidArgument("t1 must be positive".into()));
    }
    let p = u1.prec().max(t1.prec()).max(MIN_BITS);
    let c1 = Float::with_val(p, t1.exp_ref()) * u1;
    let c2 = Float::with_val(p, Float::with_val(p, 4 * t1.clone()).exp() * u1)
        - Float::with_val(p, Float::with_val(p, 3 * t1.clone()).exp() * &c1);
    let t = t1.to_f64();
    let denom = 2f64.powf(r) * (1.0 - (-t).exp());
    let bound1 = 1.0 / (denom * (3.0 * t).exp());
    let bound2 = (1.0 + (-5.0 * t).exp()) / denom;
    Ok(OneSampleEstimate { c1: c1.to_f64(), c2: c2.to_f64(), bound1, bound2 })
}
