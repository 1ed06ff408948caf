//! Certified evaluation of the series solution
//! `u(x, t) = Σ f̂_k e^{λ(k) t} sin(kx)` (and `e^{-b(t) k²}` for the
//! time-dependent heat equation), and assembly of sampling traces.

use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::operator::OperatorSpec;
use crate::precision::{
    self, inflate, log2_abs, precision_ceiling, ulp_factor, Certified, Tolerance, BOUND_BITS, MIN_BITS,
};
use crate::profile::DiffusivityProfile;
use crate::schedule::{PlanMode, SamplingPlan};

/// Which evolution produced a trace.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Autonomous(OperatorSpec),
    Rescaled(DiffusivityProfile),
}

impl Dynamics {
    /// The operator whose spectrum governs recovery: the heat operator for
    /// rescaled profiles.
    pub fn recovery_operator(&self) -> OperatorSpec {
        match self {
            Dynamics::Autonomous(spec) => spec.clone(),
            Dynamics::Rescaled(_) => OperatorSpec::heat(),
        }
    }
}

/// Mode decay exponents at one time: `λ(k) t` or `-k² b`.
enum Rates<'a> {
    Spectrum { spec: &'a OperatorSpec, t: &'a Float },
    Accumulated { b: &'a Certified },
}

impl Rates<'_> {
    /// Exponent of mode `k` at `prec` bits and an absolute bound on its error.
    fn exponent(&self, k: u64, prec: u32) -> (Float, Float) {
        match self {
            Rates::Spectrum { spec, t } => {
                let e = spec.lambda_float(k, prec) * *t;
                let err = inflate(Float::with_val(BOUND_BITS, e.abs_ref()) * ulp_factor(prec - 2));
                (e, err)
            }
            Rates::Accumulated { b } => {
                let k2 = (k as f64) * (k as f64);
                let e = Float::with_val(prec, &b.value * -k2);
                let err = Float::with_val(BOUND_BITS, &b.error * k2)
                    + Float::with_val(BOUND_BITS, e.abs_ref()) * ulp_factor(prec - 2);
                (e, inflate(err))
            }
        }
    }

    /// `log2` of the first mode's decay factor, an upper bound for all modes.
    fn lead_log2(&self) -> f64 {
        let e = match self {
            Rates::Spectrum { spec, t } => spec.lambda_f64(1) * t.to_f64(),
            Rates::Accumulated { b } => -b.value.to_f64(),
        };
        e / std::f64::consts::LN_2
    }
}

/// One attempt at `prec` bits. Returns the value and its certificate.
fn modal_sum(f: &InitialDatum, x: &Float, rates: &Rates<'_>, prec: u32, tol: &Tolerance) -> Certified {
    let coeffs = &f.coeffs;
    let k_max = coeffs.len();
    let mut suffix_max = vec![0.0f64; k_max + 1];
    for i in (0..k_max).rev() {
        suffix_max[i] = suffix_max[i + 1].max(coeffs[i].abs());
    }
    let x = Float::with_val(prec, x);
    let x_abs = x.to_f64().abs();
    let u = ulp_factor(prec - 1);
    let tail_budget = Float::with_val(BOUND_BITS, tol.as_float() / 8u32);

    let mut sum = Float::with_val(prec, 0);
    let mut term_err = Float::with_val(BOUND_BITS, 0);
    let mut abs_sum = Float::with_val(BOUND_BITS, 0);
    let mut tail = Float::with_val(BOUND_BITS, 0);
    let mut used = 0u32;

    for k in 1..=k_max as u64 {
        let i = (k - 1) as usize;
        if suffix_max[i] == 0.0 {
            break;
        }
        let (e, e_err) = rates.exponent(k, prec);
        // Every later term is at most suffix_max · e^{E_k}: exponents decrease in k.
        let envelope = Float::with_val(BOUND_BITS, &e + &e_err).exp();
        let remaining = (k_max - i) as f64;
        let tail_bound = inflate(envelope.clone() * suffix_max[i] * remaining);
        if tail_bound < tail_budget {
            tail = tail_bound;
            break;
        }
        let fk = coeffs[i];
        if fk == 0.0 {
            continue;
        }
        used += 1;
        let decay = e.exp();
        let s = Float::with_val(prec, &x * k).sin();
        let term = Float::with_val(prec, &decay * &s) * fk;

        // sin(kx): rounding x to prec and of kx (≤ 2k|x| u) plus rounding of sin (≤ u)
        let sin_err = Float::with_val(BOUND_BITS, (2.0 * k as f64 * x_abs + 1.0) * 1.0001) * &u;
        // e^E: exponent error δ gives relative error ≤ δ(1 + δ) for δ ≤ 1
        let d = Float::with_val(BOUND_BITS, &e_err);
        let exp_rel = Float::with_val(BOUND_BITS, &d * (Float::with_val(BOUND_BITS, 1) + &d)) + &u;
        let mag = Float::with_val(BOUND_BITS, fk.abs()) * Float::with_val(BOUND_BITS, &decay);
        let s_abs = Float::with_val(BOUND_BITS, s.abs_ref()) + &sin_err;
        let term_abs = Float::with_val(BOUND_BITS, term.abs_ref());
        term_err += mag * (s_abs * exp_rel + &sin_err) + Float::with_val(BOUND_BITS, &term_abs * &u) * 2u32;
        abs_sum += &term_abs;
        sum += &term;
        if d > 1 {
            // first-order bound no longer valid; force a retry at higher precision
            term_err = Float::with_val(BOUND_BITS, rug::float::Special::Infinity);
        }
    }
    let summation = abs_sum * &u * (used.max(1) as f64);
    let error = inflate(term_err + summation + tail);
    Certified { value: sum, error }
}

/// Bits for relative accuracy `tol / envelope`, where `2^{lead_log2} Σ|f̂_k|`
/// bounds every term.
fn initial_precision(f: &InitialDatum, tol: &Tolerance, lead_log2: f64, min_bits: u32) -> u32 {
    let s = f.l1_norm().max(f64::MIN_POSITIVE);
    let k = f.support_len().max(1) as f64;
    let need = -tol.log2() + lead_log2 + s.log2().max(0.0) + (k * k * 32.0 + 64.0).log2() + 16.0;
    (need.ceil() as u32).max(min_bits).max(MIN_BITS)
}

fn evaluate_with(f: &InitialDatum, x: &Float, rates: &Rates<'_>, tol: &Tolerance, min_bits: u32) -> Result<Certified> {
    let ceiling = precision_ceiling();
    let mut prec = initial_precision(f, tol, rates.lead_log2(), min_bits);
    loop {
        if prec > ceiling {
            return Err(Error::TolUnachievable { tol_log2: tol.log2(), ceiling });
        }
        let c = modal_sum(f, x, rates, prec, tol);
        if c.error <= *tol.as_float() {
            return Ok(c);
        }
        prec = prec.saturating_add(prec / 2 + 32);
    }
}

/// `u(x, t)` for the autonomous problem with certified absolute error `≤ tol`.
pub fn evaluate_solution(
    spec: &OperatorSpec,
    f: &InitialDatum,
    x: &Float,
    t: &Float,
    tol: &Tolerance,
) -> Result<Certified> {
    evaluate_solution_with(spec, f, x, t, tol, MIN_BITS)
}

/// As [`evaluate_solution`], never working below `min_bits`.
pub fn evaluate_solution_with(
    spec: &OperatorSpec,
    f: &InitialDatum,
    x: &Float,
    t: &Float,
    tol: &Tolerance,
    min_bits: u32,
) -> Result<Certified> {
    check_point(x, t)?;
    evaluate_with(f, x, &Rates::Spectrum { spec, t }, tol, min_bits)
}

/// `u(x, t) = Σ f̂_k e^{-b(t) k²} sin(kx)` for `u_t = α(t) u_xx`.
///
/// The certificate of `b(t)` is carried through the exponentials.
pub fn evaluate_nonautonomous(
    profile: &DiffusivityProfile,
    f: &InitialDatum,
    x: &Float,
    t: &Float,
    tol: &Tolerance,
) -> Result<Certified> {
    check_point(x, t)?;
    let ceiling = precision_ceiling();
    let lead = -profile.accumulated_f64(t.to_f64()) / std::f64::consts::LN_2;
    let mut prec = initial_precision(f, tol, lead, MIN_BITS);
    loop {
        if prec > ceiling {
            return Err(Error::TolUnachievable { tol_log2: tol.log2(), ceiling });
        }
        let b = profile.accumulated(t, prec);
        let c = modal_sum(f, x, &Rates::Accumulated { b: &b }, prec, tol);
        if c.error <= *tol.as_float() {
            return Ok(c);
        }
        prec = prec.saturating_add(prec / 2 + 32);
    }
}

/// Heat-series value at an accumulated time `b` known to within `b.error`.
pub fn evaluate_accumulated(
    f: &InitialDatum,
    x: &Float,
    b: &Certified,
    tol: &Tolerance,
    min_bits: u32,
) -> Result<Certified> {
    evaluate_with(f, x, &Rates::Accumulated { b }, tol, min_bits)
}

fn check_point(x: &Float, t: &Float) -> Result<()> {
    let pi = precision::pi(x.prec().max(64));
    if x.is_nan() || *x < 0 || *x > pi {
        return Err(Error::InvalidArgument(format!("x = {} is outside [0, pi]", x.to_f64())));
    }
    if !(t.is_finite() && *t > 0) {
        return Err(Error::InvalidArgument(format!("t = {} must be positive", t.to_f64())));
    }
    Ok(())
}

/// Bound on `Σ_{k>K} k^{-r} e^{λ(k) t}`, the contribution of unknown modes of
/// an `F_r` member beyond its stored support. Uses the monotone gaps:
/// consecutive terms shrink by at least `e^{-δ_{K+1} t}`.
pub fn ball_tail_bound(spec: &OperatorSpec, r: f64, support: u64, t: &Float) -> Float {
    let k = support + 1;
    let lam = spec.lambda_float(k, BOUND_BITS);
    let first = Float::with_val(BOUND_BITS, lam * t).exp() * (k as f64).powf(-r);
    let gap = Float::with_val(BOUND_BITS, &spec.spectral_gap(k).delta);
    let ratio = Float::with_val(BOUND_BITS, -(gap * t)).exp();
    inflate(first / (1 - ratio))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub magnitude: f64,
    pub seed: u64,
}

/// Samples `u_j = u(x0, t_j)` with per-sample certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub x0: Float,
    pub times: Vec<Float>,
    /// Accumulated times `b(t_j)` for rescaled plans.
    pub effective_times: Option<Vec<Float>>,
    pub samples: Vec<Float>,
    /// Certified absolute error of each sample (rounding plus truncation).
    pub truncation_errors: Vec<Float>,
    pub mantissa_bits: u32,
    pub noise: Option<NoiseRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Times at which the samples are values of the modal sum `F(T) = Σ c_k e^{λ(k) T}`.
    pub fn model_times(&self) -> &[Float] {
        self.effective_times.as_deref().unwrap_or(&self.times)
    }

    /// Add seeded uniform noise in `[-magnitude, magnitude]` to every sample.
    /// Certificates keep describing the noiseless values; the noise is recorded.
    pub fn inject_noise(&mut self, magnitude: f64, seed: u64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for s in &mut self.samples {
            let eps: f64 = rng.gen_range(-1.0..=1.0);
            *s += eps * magnitude;
        }
        self.noise = Some(NoiseRecord { magnitude, seed });
    }

    pub fn to_json(&self) -> String {
        let wire = TraceWire {
            x0: precision::to_decimal(&self.x0),
            times: self.times.iter().map(precision::to_decimal).collect(),
            effective_times: self.effective_times.as_ref().map(|v| v.iter().map(precision::to_decimal).collect()),
            samples: self.samples.iter().map(precision::to_decimal).collect(),
            truncation_errors: self.truncation_errors.iter().map(precision::to_decimal).collect(),
            mantissa_bits: self.mantissa_bits,
            noise: self.noise.clone(),
        };
        serde_json::to_string_pretty(&wire).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: TraceWire = serde_json::from_str(text)?;
        let p = wire.mantissa_bits.max(MIN_BITS);
        let parse = |v: &[String], prec: u32| -> Result<Vec<Float>> {
            v.iter().map(|s| precision::from_decimal(s, prec)).collect()
        };
        let times = parse(&wire.times, p)?;
        let samples = parse(&wire.samples, p)?;
        if times.len() != samples.len() {
            return Err(Error::Parse("trace times and samples differ in length".into()));
        }
        let truncation_errors = if wire.truncation_errors.is_empty() {
            vec![Float::new(BOUND_BITS); samples.len()]
        } else {
            parse(&wire.truncation_errors, BOUND_BITS)?
        };
        Ok(Trace {
            x0: precision::from_decimal(&wire.x0, p)?,
            times,
            effective_times: wire.effective_times.as_deref().map(|v| parse(v, p)).transpose()?,
            samples,
            truncation_errors,
            mantissa_bits: p,
            noise: wire.noise,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TraceWire {
    x0: String,
    times: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    effective_times: Option<Vec<String>>,
    samples: Vec<String>,
    #[serde(default)]
    truncation_errors: Vec<String>,
    mantissa_bits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseRecord>,
}

/// Sample `u(x0, t_j)` along `plan`, each value certified to `tol`.
pub fn sample_trace(dynamics: &Dynamics, f: &InitialDatum, plan: &SamplingPlan, tol: &Tolerance) -> Result<Trace> {
    sample_trace_with(dynamics, f, plan, &vec![tol.clone(); plan.times.len()])
}

/// As [`sample_trace`] with a separate tolerance per sample. Each sample is
/// evaluated at the precision its own tolerance needs; the trace carries the
/// widest of those and the plan's.
pub fn sample_trace_with(
    dynamics: &Dynamics,
    f: &InitialDatum,
    plan: &SamplingPlan,
    tols: &[Tolerance],
) -> Result<Trace> {
    if plan.times.is_empty() {
        return Err(Error::InvalidArgument("plan has no sampling times".into()));
    }
    if tols.len() != plan.times.len() {
        return Err(Error::InvalidArgument(format!(
            "{} tolerances for {} sampling times",
            tols.len(),
            plan.times.len()
        )));
    }
    match (dynamics, &plan.mode) {
        (Dynamics::Autonomous(_), PlanMode::Autonomous) => {}
        (Dynamics::Rescaled(p), PlanMode::Rescaled { profile, .. }) if p == profile => {}
        _ => return Err(Error::InvalidArgument("plan mode does not match the dynamics being sampled".into())),
    }
    let min_bits = plan.precision;
    let values: Vec<Certified> = (0..plan.times.len())
        .into_par_iter()
        .map(|j| match (&plan.mode, dynamics) {
            (PlanMode::Autonomous, Dynamics::Autonomous(spec)) => {
                evaluate_solution_with(spec, f, &plan.x0, &plan.times[j], &tols[j], MIN_BITS)
            }
            (PlanMode::Rescaled { accumulated, .. }, _) => {
                evaluate_accumulated(f, &plan.x0, &accumulated[j], &tols[j], MIN_BITS)
            }
            _ => unreachable!("checked above"),
        })
        .collect::<Result<_>>()?;
    let bits = values.iter().map(|c| c.value.prec()).max().unwrap_or(min_bits).max(min_bits);
    let (samples, truncation_errors) = values.into_iter().map(|c| (Float::with_val(bits, c.value), c.error)).unzip();
    let effective_times = match &plan.mode {
        PlanMode::Autonomous => None,
        PlanMode::Rescaled { accumulated, .. } => {
            Some(accumulated.iter().map(|b| Float::with_val(bits, &b.value)).collect())
        }
    };
    Ok(Trace {
        x0: Float::with_val(bits, &plan.x0),
        times: plan.times.iter().map(|t| Float::with_val(bits, t)).collect(),
        effective_times,
        samples,
        truncation_errors,
        mantissa_bits: bits,
        noise: None,
    })
}

/// Magnitude of `Σ|f̂_k| e^{λ(1) t}`, the dominant-mode envelope of `|u(x, t)|`.
pub fn decay_envelope(spec: &OperatorSpec, f: &InitialDatum, t: &Float) -> Float {
    let lam = spec.lambda_float(1, BOUND_BITS);
    Float::with_val(BOUND_BITS, lam * t).exp() * f.l1_norm()
}

/// `log2` of the largest sample magnitude; handy for diagnostics.
pub fn sample_scale_log2(trace: &Trace) -> f64 {
    trace.samples.iter().map(log2_abs).fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fl(x: f64) -> Float {
        Float::with_val(128, x)
    }

    #[test]
    fn single_mode_heat() {
        let f = InitialDatum::new(1.0, vec![1.0]).unwrap();
        let x = precision::pi(200) / 2u32;
        let tol = Tolerance::new(1e-40).unwrap();
        let u = evaluate_solution(&OperatorSpec::heat(), &f, &x, &fl(1.0), &tol).unwrap();
        let expected = Float::with_val(200, -1).exp();
        assert!(Float::with_val(200, &u.value - &expected).abs() <= 1e-40);
        assert!(u.error <= 1e-40);
        assert!((u.value.to_f64() - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn boundary_values_vanish() {
        let f = InitialDatum::new(1.0, vec![0.3, -0.2, 0.1]).unwrap();
        let tol = Tolerance::new(1e-30).unwrap();
        let spec = OperatorSpec::heat();
        let u0 = evaluate_solution(&spec, &f, &fl(0.0), &fl(0.2), &tol).unwrap();
        assert_eq!(u0.value, 0);
        let pi = precision::pi(256);
        let upi = evaluate_solution(&spec, &f, &pi, &fl(0.2), &tol).unwrap();
        assert!(upi.value.clone().abs() <= 1e-30);
    }

    #[test]
    fn two_term_biharmonic() {
        let spec = OperatorSpec::from_f64(&[1.0, -1.0]).unwrap();
        let f = InitialDatum::new(1.0, vec![1.0, 0.3]).unwrap();
        let tol = Tolerance::new(1e-50).unwrap();
        let u = evaluate_solution(&spec, &f, &fl(1.0), &fl(0.1), &tol).unwrap();
        // independent evaluation (t and 0.3 as doubles): e^{-2t} sin 1 + 0.3 e^{-20t} sin 2 at 300 bits
        let p = 300;
        let t = Float::with_val(p, 0.1f64);
        let a = Float::with_val(p, -2 * t.clone()).exp() * Float::with_val(p, 1).sin();
        let b = Float::with_val(p, -20 * t).exp() * Float::with_val(p, 2).sin() * 0.3f64;
        let expected = a + b;
        let diff = Float::with_val(p, &u.value - &expected);
        assert!(diff.clone().abs() <= 1e-50, "{} vs {} diff {}", u.value, expected, diff);
    }

    #[test]
    fn nonautonomous_examples() {
        let f = InitialDatum::new(1.0, vec![1.0]).unwrap();
        let x = precision::pi(200) / 2u32;
        let tol = Tolerance::new(1e-40).unwrap();
        let two = DiffusivityProfile::constant(2.0).unwrap();
        let u = evaluate_nonautonomous(&two, &f, &x, &fl(0.5), &tol).unwrap();
        assert!((u.value.to_f64() - (-1f64).exp()).abs() < 1e-15);

        let s = DiffusivityProfile::sinusoidal(1.0, 0.5, 1.0).unwrap();
        let u = evaluate_nonautonomous(&s, &f, &x, &fl(1.0), &tol).unwrap();
        let p = 200;
        let one = Float::with_val(p, 1);
        let b = Float::with_val(p, &one + (1 - one.clone().cos()) / 2u32);
        let expected = Float::with_val(p, -b).exp();
        assert!(Float::with_val(p, &u.value - &expected).abs() <= 1e-40);
    }

    #[test]
    fn certified_tolerance_is_met() {
        let f = crate::datum::random_ball_member(1.0, 200, 0.9, 5).unwrap();
        let x = fl(PI / 3.0 + 0.01);
        for &tol in &[1e-10, 1e-60, 1e-200] {
            let tol = Tolerance::new(tol).unwrap();
            let u = evaluate_solution(&OperatorSpec::heat(), &f, &x, &fl(0.05), &tol).unwrap();
            assert!(u.error <= *tol.as_float());
        }
    }

    #[test]
    fn precision_ceiling_is_enforced() {
        let f = InitialDatum::new(1.0, vec![1.0]).unwrap();
        let tol = Tolerance::pow2_neg(precision::DEFAULT_PRECISION_CEILING + 10);
        let err = evaluate_solution(&OperatorSpec::heat(), &f, &fl(1.0), &fl(1.0), &tol);
        assert!(matches!(err, Err(Error::TolUnachievable { .. })));
    }

    #[test]
    fn ball_tail_is_an_upper_bound() {
        let spec = OperatorSpec::heat();
        let t = fl(0.3);
        let bound = ball_tail_bound(&spec, 1.0, 5, &t);
        let direct: f64 = (6..400).map(|k| (k as f64).powf(-1.0) * (-(k * k) as f64 * 0.3).exp()).sum();
        assert!(bound.to_f64() >= direct);
        assert!(bound.to_f64() < 2.0 * direct);
    }

    #[test]
    fn rejects_bad_points() {
        let f = InitialDatum::new(1.0, vec![1.0]).unwrap();
        let tol = Tolerance::new(1e-10).unwrap();
        let spec = OperatorSpec::heat();
        assert!(evaluate_solution(&spec, &f, &fl(4.0), &fl(1.0), &tol).is_err());
        assert!(evaluate_solution(&spec, &f, &fl(1.0), &fl(0.0), &tol).is_err());
    }
}
