use std::ffi::{CStr, CString};
use std::ptr;

use dynsample_ffi::*;

fn last_error() -> String {
    let p = ds_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn heat() -> *mut DsOperator {
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { ds_operator_heat(&mut op) }, DsStatus::Ok);
    op
}

#[test]
fn operator_queries() {
    let alpha = [1.0, -1.0];
    let mut op = ptr::null_mut();
    unsafe {
        assert_eq!(ds_operator_new(alpha.as_ptr(), 2, &mut op), DsStatus::Ok);
        let mut v = 0.0;
        assert_eq!(ds_operator_lambda(op, 2, &mut v), DsStatus::Ok);
        assert_eq!(v, -20.0);
        assert_eq!(ds_operator_rho_threshold(op, &mut v), DsStatus::Ok);
        assert!((v - 4.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(ds_operator_lambda(op, 0, &mut v), DsStatus::InvalidArgument);
        ds_operator_free(op);

        let h = heat();
        assert_eq!(ds_operator_induction_rho(h, 4, &mut v), DsStatus::Ok);
        assert!((v - 8.0 / 3.0).abs() < 1e-12);
        ds_operator_free(h);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = [-1.0];
    let mut op = ptr::null_mut();
    unsafe {
        assert_eq!(ds_operator_new(bad.as_ptr(), 1, &mut op), DsStatus::SignPattern);
        assert!(op.is_null());
        assert!(last_error().contains("sign pattern"));
        assert_eq!(ds_operator_new(ptr::null(), 1, &mut op), DsStatus::NullPointer);
        assert_eq!(ds_operator_new(bad.as_ptr(), 0, &mut op), DsStatus::SignPattern);
        let h = heat();
        assert!(ds_last_error().is_null());
        let mut d = ptr::null_mut();
        assert_eq!(ds_datum_random(2.0, 20, 0.9, 7, &mut d), DsStatus::Ok);
        let x0 = CString::new("pi*(sqrt(5)-1)/2").unwrap();
        let mut job = ptr::null_mut();
        assert_eq!(ds_job_run(h, d, x0.as_ptr(), 1000, 0.5, 1.0, 4, &mut job), DsStatus::RhoBelowThreshold);
        assert!(last_error().contains("threshold"));
        let resonant = CString::new("pi/2").unwrap();
        assert_eq!(ds_job_run(h, d, resonant.as_ptr(), 10, 0.5, 2.8, 4, &mut job), DsStatus::ResonantPoint);
        let junk = CString::new("pi/").unwrap();
        assert_eq!(ds_job_run(h, d, junk.as_ptr(), 10, 0.5, 2.8, 4, &mut job), DsStatus::Parse);
        assert!(job.is_null());
        ds_datum_free(d);
        ds_operator_free(h);
    }
}

#[test]
fn job_round_trip() {
    unsafe {
        let h = heat();
        let mut d = ptr::null_mut();
        assert_eq!(ds_datum_random(2.0, 50, 0.9, 7, &mut d), DsStatus::Ok);
        let mut norm = 0.0;
        ds_datum_ball_norm(d, &mut norm);
        assert!((norm - 0.9).abs() < 1e-12);
        let x0 = CString::new("pi*(sqrt(5)-1)/2").unwrap();
        let mut job = ptr::null_mut();
        assert_eq!(ds_job_run(h, d, x0.as_ptr(), 1000, 0.5, 2.8, 6, &mut job), DsStatus::Ok);

        let mut len = 0usize;
        assert_eq!(ds_job_coefficients(job, ptr::null_mut(), 0, &mut len), DsStatus::BufferTooSmall);
        assert_eq!(len, 6);
        let mut c = vec![0.0; len];
        assert_eq!(ds_job_coefficients(job, c.as_mut_ptr(), c.len(), &mut len), DsStatus::Ok);
        let mut f = vec![0.0; 3];
        assert_eq!(ds_job_reconstruction(job, f.as_mut_ptr(), 3, &mut len), DsStatus::Ok);
        assert_eq!(len, 3);
        let mut b = vec![0.0; 6];
        assert_eq!(ds_job_bounds(job, b.as_mut_ptr(), 6, &mut len), DsStatus::Ok);
        let mut hold = -1;
        assert_eq!(ds_job_bounds_hold(job, &mut hold), DsStatus::Ok);
        assert_eq!(hold, 1);
        let mut err = 0.0;
        ds_job_l2_error(job, &mut err);
        assert!(err > 0.0 && err < 0.1);

        let mut s = ptr::null_mut();
        assert_eq!(ds_job_result_json(job, &mut s), DsStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(s).to_str().unwrap()).unwrap();
        assert_eq!(v["m"], 3);
        ds_string_free(s);

        // recovering from the exported trace reproduces the coefficients
        let mut t = ptr::null_mut();
        assert_eq!(ds_job_trace_json(job, &mut t), DsStatus::Ok);
        let mut again = vec![0.0; 6];
        assert_eq!(ds_recover_trace_json(h, t, again.as_mut_ptr(), 6, &mut len), DsStatus::Ok);
        assert_eq!(again, c);
        ds_string_free(t);

        ds_job_free(job);
        ds_datum_free(d);
        ds_operator_free(h);
    }
}

#[test]
fn explicit_datum_and_null_frees() {
    unsafe {
        let coeffs = [0.5];
        let mut d = ptr::null_mut();
        assert_eq!(ds_datum_new(2.0, coeffs.as_ptr(), 1, &mut d), DsStatus::Ok);
        ds_datum_free(d);
        ds_datum_free(ptr::null_mut());
        ds_job_free(ptr::null_mut());
        ds_operator_free(ptr::null_mut());
        ds_string_free(ptr::null_mut());
        let v = CStr::from_ptr(ds_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}
