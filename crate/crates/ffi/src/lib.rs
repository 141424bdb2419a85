//! C ABI for `imputation-audit`.
//!
//! Populations and tables are opaque handles created by `ia_*_from_*` and
//! released with the matching `ia_*_free`. Every fallible function returns
//! an [`IaStatus`]; on failure `ia_last_error_message` describes the error
//! for the calling thread. Outputs are written through pointers only on
//! success. Selectors are `name=level[,name=level...]` strings; `omega` may
//! be null where it is optional.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use imputation_audit::cli::{ingest_csv, DataConfig};
use imputation_audit::ecological::{duncan_davis_bounds, ShortDistributions};
use imputation_audit::missing_covariate::{binary_bounds_closed_form, binary_bounds_oracle, BoundsSource};
use imputation_audit::missing_outcome::{identification_interval_pop, midpoint_estimate, sample_interval};
use imputation_audit::rmi::{fit_model, run_multiple_imputation_fitted, Estimator};
use imputation_audit::simlab::{bias_gap, ModelSpec};
use imputation_audit::{CellSelector, CovariateSpace, Error, FinitePopulation, Interval, ObservationTable, Regime};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed input data or configuration.
    DataError = 3,
    /// A mathematical guard failed (empty cell, zero denominator, ...).
    GuardError = 4,
    /// The library panicked; this is a bug.
    Panic = 5,
}

/// Closed interval `[lo, hi]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl From<Interval> for IaInterval {
    fn from(i: Interval) -> Self {
        Self { lo: i.lo, hi: i.hi }
    }
}

/// Exact probability limit of an imputation estimate against the truth.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IaBiasGap {
    pub plim: f64,
    pub truth: f64,
    pub gap: f64,
    pub interval: IaInterval,
    pub truth_covered: bool,
    pub imputation_point_in_interval: bool,
    pub conditions_hold: bool,
}

/// Pooled result of multiple imputation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IaPooled {
    pub pooled_mean: f64,
    pub pooled_dispersion: f64,
    pub m: usize,
}

/// Opaque finite population.
pub struct IaPopulation(FinitePopulation);

/// Opaque observation table.
pub struct IaTable(ObservationTable);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Utf8(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IaStatus {
    let status = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return IaStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            IaStatus::NullPointer
        }
        Ok(Err(Failure::Utf8(what))) => {
            set_last_error(&format!("invalid UTF-8 in {what}"));
            IaStatus::InvalidUtf8
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            if e.is_data_error() {
                IaStatus::DataError
            } else {
                IaStatus::GuardError
            }
        }
        Err(_) => {
            set_last_error("internal panic");
            IaStatus::Panic
        }
    };
    status
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(what))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn opt_str_arg<'a>(p: *const c_char, what: &'static str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

/// # Safety
/// `p` must be null or valid for reads.
unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

/// # Safety
/// `p` must be null or valid for writes.
unsafe fn write_out<T>(p: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    p.write(value);
    Ok(())
}

fn selector(x: &CovariateSpace, w: &CovariateSpace, xi: &str, omega: Option<&str>) -> Result<CellSelector, Error> {
    let xi = x.parse(xi)?;
    Ok(match omega {
        Some(o) => CellSelector::long(xi, w.parse(o)?),
        None => CellSelector::at(xi),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ia_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Message for the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ia_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a population from its JSON representation.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_population_from_json(json: *const c_char, out: *mut *mut IaPopulation) -> IaStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let pop = FinitePopulation::from_json_str(text)?;
        write_out(out, Box::into_raw(Box::new(IaPopulation(pop))), "out")
    })
}

/// Releases a population handle. Null is ignored.
///
/// # Safety
/// `pop` must be null or a handle from `ia_population_from_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ia_population_free(pop: *mut IaPopulation) {
    if !pop.is_null() {
        drop(Box::from_raw(pop));
    }
}

/// Reads a CSV file using a JSON data configuration.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_table_from_csv(
    path: *const c_char,
    config_json: *const c_char,
    out: *mut *mut IaTable,
) -> IaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let cfg = DataConfig::from_json_str(str_arg(config_json, "config_json")?)?;
        let table = ingest_csv(Path::new(path), &cfg)?;
        write_out(out, Box::into_raw(Box::new(IaTable(table))), "out")
    })
}

/// Releases a table handle. Null is ignored.
///
/// # Safety
/// `table` must be null or a handle from `ia_table_from_csv` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ia_table_free(table: *mut IaTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of records in a table.
///
/// # Safety
/// `table` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_table_len(table: *const IaTable, out: *mut usize) -> IaStatus {
    guard(|| {
        let t = ref_arg(table, "table")?;
        write_out(out, t.0.len(), "out")
    })
}

/// Assumption-free identification interval for `E(y | x = xi)` over the
/// population's outcome domain.
///
/// # Safety
/// `pop` must be a live handle, `xi` a valid string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_outcome_interval(
    pop: *const IaPopulation,
    xi: *const c_char,
    out: *mut IaInterval,
) -> IaStatus {
    guard(|| {
        let p = &ref_arg(pop, "pop")?.0;
        let sel = selector(p.x_space(), p.w_space(), str_arg(xi, "xi")?, None)?;
        write_out(out, identification_interval_pop(p, &sel, p.domain())?.into(), "out")
    })
}

/// Sample analog of the identification interval for `E(y | x = xi)`.
///
/// # Safety
/// `table` must be a live handle, `xi` a valid string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_sample_interval(
    table: *const IaTable,
    xi: *const c_char,
    out: *mut IaInterval,
) -> IaStatus {
    guard(|| {
        let t = &ref_arg(table, "table")?.0;
        let sel = selector(t.x_space(), t.w_space(), str_arg(xi, "xi")?, None)?;
        write_out(out, sample_interval(t, &sel)?.into(), "out")
    })
}

/// Midpoint of the sample interval for `E(y | x = xi)`.
///
/// # Safety
/// `table` must be a live handle, `xi` a valid string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_midpoint_estimate(table: *const IaTable, xi: *const c_char, out: *mut f64) -> IaStatus {
    guard(|| {
        let t = &ref_arg(table, "table")?.0;
        let sel = selector(t.x_space(), t.w_space(), str_arg(xi, "xi")?, None)?;
        write_out(out, midpoint_estimate(t, &sel)?, "out")
    })
}

/// Sample bounds on `E(y | x = xi, w = omega)` for a binary outcome.
///
/// # Safety
/// `table` must be a live handle, `xi`/`omega` valid strings and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_binary_bounds_sample(
    table: *const IaTable,
    xi: *const c_char,
    omega: *const c_char,
    out: *mut IaInterval,
) -> IaStatus {
    guard(|| {
        let t = &ref_arg(table, "table")?.0;
        let sel = selector(
            t.x_space(),
            t.w_space(),
            str_arg(xi, "xi")?,
            Some(str_arg(omega, "omega")?),
        )?;
        write_out(
            out,
            binary_bounds_closed_form(BoundsSource::Sample(t), &sel)?.into(),
            "out",
        )
    })
}

/// Closed-form population bounds on `E(y | x = xi, w = omega)`.
///
/// # Safety
/// `pop` must be a live handle, `xi`/`omega` valid strings and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_binary_bounds_population(
    pop: *const IaPopulation,
    xi: *const c_char,
    omega: *const c_char,
    out: *mut IaInterval,
) -> IaStatus {
    guard(|| {
        let p = &ref_arg(pop, "pop")?.0;
        let sel = selector(
            p.x_space(),
            p.w_space(),
            str_arg(xi, "xi")?,
            Some(str_arg(omega, "omega")?),
        )?;
        write_out(
            out,
            binary_bounds_closed_form(BoundsSource::Population(p), &sel)?.into(),
            "out",
        )
    })
}

/// The same bounds by exhaustive enumeration of missing-covariate allocations.
///
/// # Safety
/// `pop` must be a live handle, `xi`/`omega` valid strings and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_binary_bounds_oracle(
    pop: *const IaPopulation,
    xi: *const c_char,
    omega: *const c_char,
    out: *mut IaInterval,
) -> IaStatus {
    guard(|| {
        let p = &ref_arg(pop, "pop")?.0;
        let sel = selector(
            p.x_space(),
            p.w_space(),
            str_arg(xi, "xi")?,
            Some(str_arg(omega, "omega")?),
        )?;
        write_out(out, binary_bounds_oracle(p, &sel)?.into(), "out")
    })
}

/// Bounds on `P(y = 1 | x, w = omega)` from `P(y = 1 | x)` and `P(w = omega | x)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_duncan_davis(p_y1: f64, p_w: f64, out: *mut IaInterval) -> IaStatus {
    guard(|| {
        let sd = ShortDistributions::new(p_y1, p_w)?;
        write_out(out, duncan_davis_bounds(&sd).into(), "out")
    })
}

/// Exact bias gap of imputing under `model` (`mar`, `marcov`, `ecological`,
/// `true`, `q:FILE`). `omega` null selects the missing-outcome analysis.
///
/// # Safety
/// `pop` must be a live handle, strings valid (`omega` may be null) and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_bias_gap(
    pop: *const IaPopulation,
    model: *const c_char,
    xi: *const c_char,
    omega: *const c_char,
    out: *mut IaBiasGap,
) -> IaStatus {
    guard(|| {
        let p = &ref_arg(pop, "pop")?.0;
        let sel = selector(
            p.x_space(),
            p.w_space(),
            str_arg(xi, "xi")?,
            opt_str_arg(omega, "omega")?,
        )?;
        let spec: ModelSpec = str_arg(model, "model")?.parse()?;
        let model = spec.resolve(p.regime(), p.x_space(), p.w_space(), Some(p), None, Path::new("."))?;
        let r = bias_gap(p, &model, &sel)?;
        let out_value = IaBiasGap {
            plim: r.plim,
            truth: r.truth,
            gap: r.gap,
            interval: r.interval.into(),
            truth_covered: r.truth_covered,
            imputation_point_in_interval: r.imputation_point_in_interval,
            conditions_hold: r.conditions_hold,
        };
        write_out(out, out_value, "out")
    })
}

/// Multiple imputation with `m` draws under `model`; `omega` null selects
/// the missing-outcome analysis.
///
/// # Safety
/// `table` must be a live handle, strings valid (`omega` may be null) and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ia_multiple_imputation(
    table: *const IaTable,
    model: *const c_char,
    xi: *const c_char,
    omega: *const c_char,
    m: usize,
    seed: u64,
    out: *mut IaPooled,
) -> IaStatus {
    guard(|| {
        let t = &ref_arg(table, "table")?.0;
        let omega = opt_str_arg(omega, "omega")?;
        let sel = selector(t.x_space(), t.w_space(), str_arg(xi, "xi")?, omega)?;
        let regime = if omega.is_some() {
            Regime::Covariate
        } else {
            Regime::Outcome
        };
        let spec: ModelSpec = str_arg(model, "model")?.parse()?;
        let model = spec.resolve(regime, t.x_space(), t.w_space(), None, None, Path::new("."))?;
        let fitted = fit_model(&model, t)?;
        let r = run_multiple_imputation_fitted(t, &fitted, m, Estimator::for_regime(regime), &sel, seed)?;
        write_out(
            out,
            IaPooled {
                pooled_mean: r.pooled_mean,
                pooled_dispersion: r.pooled_dispersion,
                m: r.m,
            },
            "out",
        )
    })
}
