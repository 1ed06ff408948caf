use dynsample::config::safe_rho;
use dynsample::datum::random_ball_member;
use dynsample::forward::{sample_trace, Trace};
use dynsample::oracle::{oracle_recover, oracle_solve};
use dynsample::pipeline::{run_job, JobOutput, JobSettings};
use dynsample::precision::{Tolerance, BOUND_BITS};
use dynsample::recovery::{
    a0_constant, apriori_error_bounds, one_sample_two_coeffs, reconstruct, recover_coefficients, recover_with_budget,
};
use dynsample::schedule::{default_rho, DEFAULT_X0_EXPR};
use dynsample::{DiffusivityProfile, Dynamics, InitialDatum, OperatorSpec, SamplingPlan, SamplingPoint};
use rug::Float;

fn point() -> SamplingPoint {
    SamplingPoint::from_expr(DEFAULT_X0_EXPR, 10_000).unwrap()
}

fn heat_job(f: &InitialDatum, t1: f64, rho: f64, n: usize) -> JobOutput {
    run_job(&Dynamics::Autonomous(OperatorSpec::heat()), f, &point(), &JobSettings::new(t1, rho, n)).unwrap()
}

fn abs_diff(a: &Float, b: &Float) -> Float {
    Float::with_val(a.prec().max(b.prec()), a - b).abs()
}

#[test]
fn single_mode_truth() {
    let f = InitialDatum::new(2.0, vec![1.0]).unwrap();
    let out = heat_job(&f, 0.5, default_rho(1), 6);
    let r = &out.result;
    let sin_x0 = out.plan.sin_kx0(1);
    assert!(abs_diff(&r.c_bar[0], &sin_x0) <= r.numeric_budget[0]);
    for k in 1..6 {
        assert!(Float::with_val(BOUND_BITS, r.c_bar[k].abs_ref()) <= r.apriori_bounds[k], "k = {}", k + 1);
    }
    assert!(r.bounds_hold().unwrap());
}

#[test]
fn zero_trace_gives_zero_coefficients() {
    let f = InitialDatum::zero(1.0, 10);
    let out = heat_job(&f, 0.5, default_rho(1), 5);
    assert!(out.trace.samples.iter().all(|s| s.is_zero()));
    assert!(out.result.c_bar.iter().all(|c| c.is_zero()));
    assert!(out.result.f_bar().iter().all(|c| c.is_zero()));
    assert_eq!(out.result.l2_error.as_ref().unwrap().to_f64(), 0.0);
}

#[test]
fn reconstruction_mode_count() {
    let f = random_ball_member(1.0, 20, 0.9, 3).unwrap();
    for (n, m) in [(1, 1), (2, 1), (7, 4), (8, 4)] {
        let out = heat_job(&f, 0.5, default_rho(1), n);
        assert_eq!(out.result.m, m);
        assert_eq!(out.result.f_bar().len(), m);
    }
    let out = heat_job(&f, 0.5, default_rho(1), 1);
    let expected = Float::with_val(out.trace.mantissa_bits, &out.result.c_bar[0] / out.plan.sin_kx0(1));
    assert_eq!(out.result.f_bar()[0], expected);
    let zeros = vec![Float::with_val(128, 0); 7];
    let rec = reconstruct(&zeros, &out.plan);
    assert_eq!(rec.m(), 4);
    assert!(rec.coeffs.iter().all(|c| c.is_zero()));
}

#[test]
fn two_modes_match_dense_solve() {
    let f = InitialDatum::new(2.0, vec![0.6, -0.2]).unwrap();
    let spec = OperatorSpec::heat();
    let out = heat_job(&f, 0.5, safe_rho(&spec, 2), 2);
    let oracle = oracle_solve(&out.trace, &spec, 2).unwrap();
    for k in 0..2 {
        let allowed = Float::with_val(BOUND_BITS, &out.result.apriori_bounds[k])
            + &out.result.numeric_budget[k]
            + &oracle.budget[k];
        assert!(abs_diff(&out.result.c_bar[k], &oracle.c[k]) <= allowed, "k = {}", k + 1);
    }
    // the dense solve is exact for data supported on the modelled modes
    let truth = [out.plan.sin_kx0(1) * 0.6, out.plan.sin_kx0(2) * -0.2];
    for k in 0..2 {
        assert!(abs_diff(&oracle.c[k], &truth[k]) <= oracle.budget[k]);
    }
}

#[test]
fn oracle_one_sample_is_the_recursion() {
    let f = random_ball_member(2.0, 30, 0.9, 11).unwrap();
    let out = heat_job(&f, 0.5, default_rho(1), 1);
    let spec = OperatorSpec::heat();
    let o = oracle_recover(&out.trace, &spec, 1).unwrap();
    let direct = Float::with_val(4 * out.trace.mantissa_bits, out.trace.times[0].exp_ref()) * &out.trace.samples[0];
    let r = recover_coefficients(&out.trace, &spec).unwrap();
    assert!(abs_diff(&o[0], &direct) < 1e-30);
    assert!(abs_diff(&r[0], &direct) <= out.result.numeric_budget[0]);
}

#[test]
fn oracle_exact_on_three_modes() {
    let spec = OperatorSpec::heat();
    let f = random_ball_member(2.0, 3, 0.9, 5).unwrap();
    let out = heat_job(&f, 0.5, safe_rho(&spec, 3), 3);
    let sol = oracle_solve(&out.trace, &spec, 3).unwrap();
    for k in 0..3 {
        let truth = out.plan.sin_kx0(k as u64 + 1) * f.coefficient(k + 1);
        assert!(abs_diff(&sol.c[k], &truth) <= sol.budget[k]);
        let err = abs_diff(&out.result.c_bar[k], &truth);
        assert!(err <= Float::with_val(BOUND_BITS, &out.result.apriori_bounds[k] + &out.result.numeric_budget[k]));
    }
}

#[test]
fn oracle_with_unmodelled_tail() {
    let spec = OperatorSpec::heat();
    let f = random_ball_member(2.0, 12, 0.9, 9).unwrap();
    let n = 5;
    let out = heat_job(&f, 0.5, safe_rho(&spec, n), n);
    let sol = oracle_solve(&out.trace, &spec, n).unwrap();
    // sample contributions of modes 6..12, bounded term by term
    let tails: Vec<Float> = out
        .trace
        .times
        .iter()
        .map(|t| {
            let mut s = Float::with_val(BOUND_BITS, 0);
            for j in n + 1..=12 {
                let decay = Float::with_val(BOUND_BITS, -(spec.lambda_float(j as u64, BOUND_BITS) * t).abs()).exp();
                s += decay * f.coefficient(j).abs();
            }
            s
        })
        .collect();
    let tail = sol.tail_budget(&tails);
    for k in 0..n {
        let allowed = Float::with_val(BOUND_BITS, &sol.budget[k])
            + &tail[k]
            + &out.result.apriori_bounds[k]
            + &out.result.numeric_budget[k];
        assert!(abs_diff(&out.result.c_bar[k], &sol.c[k]) <= allowed, "k = {}", k + 1);
    }
}

#[test]
fn apriori_bound_formula() {
    let spec = OperatorSpec::heat();
    let plan = SamplingPlan::autonomous(&spec, &point(), 1.0, 1.5, 5, 128).unwrap();
    let b = apriori_error_bounds(&spec, &plan, 1e-15).unwrap();
    let a0: f64 = (2..30).map(|j: i32| (-((j * j - 4) as f64)).exp()).sum();
    let t5 = 1.5f64.powi(4);
    // bounds are rounded outward by a relative 1e-4
    let close = |got: f64, want: f64| (1.0..1.0002).contains(&(got / want));
    assert!(close(b.bounds[0].to_f64(), 2.0 * a0 * (-3.0 * t5).exp()));
    // k = n uses the first sample time
    let gap = 2.0 * 5.0 + 1.0;
    assert!(close(b.bounds[4].to_f64(), 32.0 * a0 * (-gap * 1.0f64).exp()));
}

#[test]
fn rescaled_unit_diffusivity_equals_heat() {
    let profile = DiffusivityProfile::constant(1.0).unwrap();
    let f = random_ball_member(1.0, 40, 0.9, 2).unwrap();
    let s = JobSettings::new(0.5, default_rho(1), 6);
    let a = run_job(&Dynamics::Rescaled(profile), &f, &point(), &s).unwrap();
    let b = run_job(&Dynamics::Autonomous(OperatorSpec::heat()), &f, &point(), &s).unwrap();
    for k in 0..6 {
        let ratio = Float::with_val(BOUND_BITS, &a.result.apriori_bounds[k] / &b.result.apriori_bounds[k]).to_f64();
        assert!((ratio - 1.0).abs() < 1e-12, "bound {k}: ratio {ratio}");
        let slack = Float::with_val(BOUND_BITS, &a.result.numeric_budget[k] + &b.result.numeric_budget[k]);
        assert!(abs_diff(&a.result.c_bar[k], &b.result.c_bar[k]) <= slack);
    }
}

#[test]
fn one_sample_estimates() {
    let t = Float::with_val(256, 1);
    let zero = one_sample_two_coeffs(&Float::with_val(256, 0), &t, 2.0).unwrap();
    assert_eq!((zero.c1, zero.c2), (0.0, 0.0));

    let x0 = point().x0(256);
    let sin_x0 = Float::with_val(256, x0.sin_ref());
    let u = Float::with_val(256, &sin_x0 * Float::with_val(256, (-t.clone()).exp_ref()));
    let est = one_sample_two_coeffs(&u, &t, 2.0).unwrap();
    assert!((est.c1 - sin_x0.to_f64()).abs() < 1e-15);
    assert!(est.c2.abs() < 1e-60);
    assert!(one_sample_two_coeffs(&u, &Float::with_val(64, 0), 2.0).is_err());
}

#[test]
fn certified_samples_at_requested_tolerance() {
    let spec = OperatorSpec::heat();
    let f = random_ball_member(1.0, 200, 0.9, 4).unwrap();
    let plan = SamplingPlan::autonomous(&spec, &point(), 0.5, default_rho(1), 6, 128).unwrap();
    let tol = Tolerance::new(1e-30).unwrap();
    let trace = sample_trace(&Dynamics::Autonomous(spec), &f, &plan, &tol).unwrap();
    assert_eq!(trace.len(), 6);
    assert!(trace.truncation_errors.iter().all(|e| *e <= 1e-30));
}

#[test]
fn single_mode_samples_decrease() {
    let spec = OperatorSpec::heat();
    let f = InitialDatum::new(1.0, vec![0.7]).unwrap();
    let plan = SamplingPlan::autonomous(&spec, &point(), 0.5, default_rho(1), 5, 128).unwrap();
    let trace = sample_trace(&Dynamics::Autonomous(spec), &f, &plan, &Tolerance::new(1e-40).unwrap()).unwrap();
    let sin_x0 = plan.sin_kx0(1).to_f64();
    for (s, t) in trace.samples.iter().zip(&trace.times) {
        let expected = 0.7 * sin_x0 * (-t.to_f64()).exp();
        assert!((s.to_f64() - expected).abs() <= 1e-15 * expected.abs());
    }
    assert!(trace.samples.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn recursion_refuses_short_precision() {
    let f = random_ball_member(2.0, 30, 0.9, 1).unwrap();
    let out = heat_job(&f, 0.5, 2.8, 8);
    let mut trace: Trace = out.trace.clone();
    trace.mantissa_bits = 64;
    assert!(matches!(
        recover_with_budget(&trace, &OperatorSpec::heat()),
        Err(dynsample::Error::PrecisionInsufficient { .. })
    ));
}

#[test]
fn trace_json_round_trip() {
    let f = random_ball_member(2.0, 30, 0.9, 1).unwrap();
    let out = heat_job(&f, 0.5, default_rho(1), 4);
    let back = Trace::from_json(&out.trace.to_json()).unwrap();
    assert_eq!(back, out.trace);
    let again = recover_coefficients(&back, &OperatorSpec::heat()).unwrap();
    assert_eq!(again, out.result.c_bar);
}

#[test]
fn a0_biharmonic_leading_term() {
    let spec = OperatorSpec::from_f64(&[1.0, -1.0]).unwrap();
    let a0 = a0_constant(&spec, &Float::with_val(128, 0.5), 1e-18).unwrap();
    let direct: f64 = (2..8).map(|j: i32| (-(((j * j + j.pow(4)) - 20) as f64) * 0.5).exp()).sum();
    assert!((a0.value.to_f64() - direct).abs() < 1e-15);
}

#[test]
fn noisy_trace_is_seeded() {
    let f = random_ball_member(2.0, 30, 0.9, 1).unwrap();
    let mut s = JobSettings::new(0.5, default_rho(1), 4);
    s.noise = Some((1e-8, 42));
    let dynamics = Dynamics::Autonomous(OperatorSpec::heat());
    let a = run_job(&dynamics, &f, &point(), &s).unwrap();
    let b = run_job(&dynamics, &f, &point(), &s).unwrap();
    assert_eq!(a.trace, b.trace);
    let clean = heat_job(&f, 0.5, default_rho(1), 4);
    for (x, y) in a.trace.samples.iter().zip(&clean.trace.samples) {
        assert!(abs_diff(x, y) <= 1e-8);
    }
}
