use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use imputation_audit::simlab::fixtures;
use imputation_audit_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ia_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

fn population(pop: &imputation_audit::FinitePopulation) -> *mut IaPopulation {
    let json = c(&pop.to_json_string().unwrap());
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { ia_population_from_json(json.as_ptr(), &mut handle) },
        IaStatus::Ok
    );
    assert!(!handle.is_null());
    handle
}

fn table(csv: &str, config: &str) -> (tempfile::TempDir, *mut IaTable) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    std::fs::write(&path, csv).unwrap();
    let path = c(path.to_str().unwrap());
    let config = c(config);
    let mut handle = ptr::null_mut();
    let status = unsafe { ia_table_from_csv(path.as_ptr(), config.as_ptr(), &mut handle) };
    assert_eq!(status, IaStatus::Ok, "{}", last_error());
    (dir, handle)
}

const OUTCOME_CONFIG: &str = r#"{"outcome": "y", "binary": true, "x": ["group"]}"#;

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ia_version()) };
    assert_eq!(v.to_str().unwrap(), imputation_audit::VERSION);
}

#[test]
fn outcome_interval_from_population() {
    let pop = population(&fixtures::mnar_outcome_population());
    let xi = c("group=a");
    let mut out = IaInterval {
        lo: f64::NAN,
        hi: f64::NAN,
    };
    assert_eq!(unsafe { ia_outcome_interval(pop, xi.as_ptr(), &mut out) }, IaStatus::Ok);
    assert!(
        (out.lo - 0.35).abs() < 1e-12 && (out.hi - 0.85).abs() < 1e-12,
        "{out:?}"
    );
    unsafe { ia_population_free(pop) };
}

#[test]
fn sample_interval_and_midpoint() {
    let (_dir, t) = table("y,group\n1,a\n0,a\n1,a\n1,a\n,a\n", OUTCOME_CONFIG);
    let xi = c("group=a");
    let mut len = 0usize;
    let mut iv = IaInterval { lo: 0.0, hi: 0.0 };
    let mut mid = 0.0;
    unsafe {
        assert_eq!(ia_table_len(t, &mut len), IaStatus::Ok);
        assert_eq!(ia_sample_interval(t, xi.as_ptr(), &mut iv), IaStatus::Ok);
        assert_eq!(ia_midpoint_estimate(t, xi.as_ptr(), &mut mid), IaStatus::Ok);
        ia_table_free(t);
    }
    assert_eq!(len, 5);
    assert!((iv.lo - 0.6).abs() < 1e-12 && (iv.hi - 0.8).abs() < 1e-12, "{iv:?}");
    assert!((mid - 0.7).abs() < 1e-12);
}

#[test]
fn binary_bounds_agree_across_entry_points() {
    let pop = population(&fixtures::covariate_population());
    let (xi, omega) = (c("group=a"), c("geno=p"));
    let mut closed = IaInterval { lo: 0.0, hi: 0.0 };
    let mut oracle = closed;
    unsafe {
        assert_eq!(
            ia_binary_bounds_population(pop, xi.as_ptr(), omega.as_ptr(), &mut closed),
            IaStatus::Ok
        );
        assert_eq!(
            ia_binary_bounds_oracle(pop, xi.as_ptr(), omega.as_ptr(), &mut oracle),
            IaStatus::Ok
        );
        ia_population_free(pop);
    }
    assert!(
        (closed.lo - 0.5).abs() < 1e-12 && (closed.hi - 5.0 / 6.0).abs() < 1e-12,
        "{closed:?}"
    );
    assert!((closed.lo - oracle.lo).abs() < 1e-9 && (closed.hi - oracle.hi).abs() < 1e-9);
}

#[test]
fn binary_bounds_from_sample() {
    let csv = "y,group,geno\n1,a,p\n1,a,p\n1,a,p\n0,a,p\n1,a,\n0,a,\n";
    let config = r#"{"outcome": "y", "binary": true, "x": ["group"], "w": ["geno"]}"#;
    let (_dir, t) = table(csv, config);
    let (xi, omega) = (c("group=a"), c("geno=p"));
    let mut iv = IaInterval { lo: 0.0, hi: 0.0 };
    unsafe {
        assert_eq!(
            ia_binary_bounds_sample(t, xi.as_ptr(), omega.as_ptr(), &mut iv),
            IaStatus::Ok
        );
        ia_table_free(t);
    }
    // 3 of 4 observed p-records have y=1; one missing y=1 and one missing y=0
    assert!(
        (iv.lo - 3.0 / 5.0).abs() < 1e-12 && (iv.hi - 4.0 / 5.0).abs() < 1e-12,
        "{iv:?}"
    );
}

#[test]
fn duncan_davis_example_and_guard() {
    let mut iv = IaInterval { lo: 0.0, hi: 0.0 };
    assert_eq!(unsafe { ia_duncan_davis(0.6, 0.5, &mut iv) }, IaStatus::Ok);
    assert!((iv.lo - 0.2).abs() < 1e-12 && (iv.hi - 1.0).abs() < 1e-12, "{iv:?}");
    assert_eq!(unsafe { ia_duncan_davis(0.6, 0.0, &mut iv) }, IaStatus::GuardError);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { ia_duncan_davis(1.5, 0.5, &mut iv) }, IaStatus::GuardError);
    assert!(last_error().contains("1.5"));
}

#[test]
fn bias_gap_for_both_regimes() {
    let pop = population(&fixtures::mnar_outcome_population());
    let (model, xi) = (c("mar"), c("group=a"));
    let mut out = std::mem::MaybeUninit::<IaBiasGap>::uninit();
    assert_eq!(
        unsafe { ia_bias_gap(pop, model.as_ptr(), xi.as_ptr(), ptr::null(), out.as_mut_ptr()) },
        IaStatus::Ok
    );
    let r = unsafe { out.assume_init() };
    assert!((r.plim - 0.7).abs() < 1e-12 && (r.truth - 0.8).abs() < 1e-12);
    assert!(!r.conditions_hold && r.truth_covered && r.imputation_point_in_interval);
    unsafe { ia_population_free(pop) };

    let pop = population(&fixtures::ecological_population());
    let (model, omega) = (c("ecological"), c("geno=p"));
    let mut out = std::mem::MaybeUninit::<IaBiasGap>::uninit();
    let status = unsafe { ia_bias_gap(pop, model.as_ptr(), xi.as_ptr(), omega.as_ptr(), out.as_mut_ptr()) };
    assert_eq!(status, IaStatus::Ok, "{}", last_error());
    let r = unsafe { out.assume_init() };
    assert!(
        (r.plim - 0.55).abs() < 1e-12 && (r.gap - (0.55 - 0.8)).abs() < 1e-12,
        "{r:?}"
    );
    unsafe { ia_population_free(pop) };
}

#[test]
fn multiple_imputation_is_seeded() {
    let (_dir, t) = table("y,group\n1,a\n0,a\n1,a\n1,a\n,a\n,a\n", OUTCOME_CONFIG);
    let (model, xi) = (c("mar"), c("group=a"));
    let run = |seed| {
        let mut out = IaPooled {
            pooled_mean: 0.0,
            pooled_dispersion: 0.0,
            m: 0,
        };
        let status = unsafe { ia_multiple_imputation(t, model.as_ptr(), xi.as_ptr(), ptr::null(), 50, seed, &mut out) };
        assert_eq!(status, IaStatus::Ok, "{}", last_error());
        out
    };
    let (a, b) = (run(7), run(7));
    assert_eq!(a, b);
    assert_eq!(a.m, 50);
    assert!((0.0..=1.0).contains(&a.pooled_mean));
    unsafe { ia_table_free(t) };
}

#[test]
fn null_and_utf8_arguments() {
    let mut iv = IaInterval { lo: 0.0, hi: 0.0 };
    let xi = c("group=a");
    assert_eq!(
        unsafe { ia_outcome_interval(ptr::null(), xi.as_ptr(), &mut iv) },
        IaStatus::NullPointer
    );
    assert!(last_error().contains("pop"));
    assert_eq!(
        unsafe { ia_duncan_davis(0.5, 0.5, ptr::null_mut()) },
        IaStatus::NullPointer
    );

    let bad = [0xffu8, 0xfe, 0];
    let mut handle = ptr::null_mut();
    let status = unsafe { ia_population_from_json(bad.as_ptr().cast(), &mut handle) };
    assert_eq!(status, IaStatus::InvalidUtf8);
    assert!(handle.is_null());

    unsafe {
        ia_population_free(ptr::null_mut());
        ia_table_free(ptr::null_mut());
    }
}

#[test]
fn data_errors_report_messages() {
    let mut handle = ptr::null_mut();
    let json = c("{\"not\": \"a population\"}");
    assert_eq!(
        unsafe { ia_population_from_json(json.as_ptr(), &mut handle) },
        IaStatus::DataError
    );
    assert!(handle.is_null());
    assert!(!last_error().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "y,group\n2,a\n").unwrap();
    let (path, config) = (c(path.to_str().unwrap()), c(OUTCOME_CONFIG));
    let mut t = ptr::null_mut();
    assert_eq!(
        unsafe { ia_table_from_csv(path.as_ptr(), config.as_ptr(), &mut t) },
        IaStatus::DataError
    );
    assert!(last_error().contains('2'), "{}", last_error());

    let pop = population(&fixtures::mnar_outcome_population());
    let mut iv = IaInterval { lo: 0.0, hi: 0.0 };
    let unknown = c("group=zzz");
    assert_eq!(
        unsafe { ia_outcome_interval(pop, unknown.as_ptr(), &mut iv) },
        IaStatus::DataError
    );
    unsafe { ia_population_free(pop) };
}

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("imputation_audit.h").exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        r#"#include "imputation_audit.h"
int probe(void) {
    IaInterval iv;
    IaStatus s = ia_duncan_davis(0.6, 0.5, &iv);
    return s == IA_STATUS_OK && ia_version() != NULL ? 0 : 1;
}
"#,
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let result = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output();
    match result {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("skipping header check, no C compiler ({cc}): {e}"),
    }
}
