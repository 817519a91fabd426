//! C ABI for the `wittenlap` pipeline.
//!
//! The interface follows the usual opaque-handle pattern: `wl_solve_*`
//! parses a JSON model description, runs the full pipeline (ingredients →
//! transfer matrix → quantization condition → branch solve) and returns an
//! opaque [`WlPipeline`].  Accessors expose solution counts, exponential
//! types, numeric eigenvalue predictions at finite h, and the transseries /
//! eigenfunction tables as JSON strings.
//!
//! Conventions:
//! - every fallible call returns a [`WlStatus`]; `WL_OK` is zero;
//! - on failure a thread-local message is retrievable with
//!   [`wl_last_error_message`];
//! - strings returned through out-pointers are owned by the caller and must
//!   be released with [`wl_string_free`]; handles with [`wl_pipeline_free`];
//! - all functions are panic-safe: a caught panic reports
//!   `WL_STATUS_INTERNAL_ERROR` instead of unwinding across the boundary.
//!
//! The matching header is generated by cbindgen into
//! `include/wittenlap.h` at build time and committed.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wittenlap::eigenfun::build_table;
use wittenlap::ingredients::IngredientSet;
use wittenlap::quantize::{
    build_condition, build_g0, default_depth, newton_polygon, solve_condition,
    EigenvalueSolution, TransferMatrixData,
};
use wittenlap::transseries::TruncationPolicy;
use wittenlap::trigpoly::{CriticalData, TrigPoly};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum WlStatus {
    /// Success.
    WlStatusOk = 0,
    /// A required pointer argument was null.
    WlStatusNullArgument = 1,
    /// An input string was not valid UTF-8.
    WlStatusInvalidUtf8 = 2,
    /// The model JSON could not be parsed.
    WlStatusParseError = 3,
    /// The pipeline failed (degenerate data, truncation breakdown, ...).
    WlStatusComputeError = 4,
    /// A solution index was out of range.
    WlStatusIndexOutOfRange = 5,
    /// The requested quantity is undefined for this branch.
    WlStatusNotAvailable = 6,
    /// An internal invariant failed; see `wl_last_error_message`.
    WlStatusInternalError = 7,
}

use WlStatus::*;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: WlStatus, msg: impl Into<Vec<u8>>) -> WlStatus {
    set_error(msg);
    status
}

/// Opaque handle to a solved model.
pub struct WlPipeline {
    ing: IngredientSet,
    tm: TransferMatrixData,
    policy: TruncationPolicy,
    solutions: Vec<EigenvalueSolution>,
}

impl WlPipeline {
    fn solution(&self, index: usize) -> Result<&EigenvalueSolution, WlStatus> {
        self.solutions.get(index).ok_or_else(|| {
            fail(
                WlStatusIndexOutOfRange,
                format!("solution index {index} out of range 0..{}", self.solutions.len()),
            )
        })
    }
}

fn guarded(body: impl FnOnce() -> WlStatus) -> WlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => fail(WlStatusInternalError, "internal panic in wittenlap"),
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, WlStatus> {
    if ptr.is_null() {
        return Err(fail(WlStatusNullArgument, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| fail(WlStatusInvalidUtf8, e.to_string()))
}

fn solve(
    ing: IngredientSet,
    policy: TruncationPolicy,
) -> Result<Box<WlPipeline>, WlStatus> {
    let tm = build_g0(&ing).map_err(|e| fail(WlStatusComputeError, e.to_string()))?;
    let cond = build_condition(&tm, &ing.one_plus_er_kappa, &policy)
        .map_err(|e| fail(WlStatusComputeError, e.to_string()))?;
    let depth = default_depth(&newton_polygon(&cond.series));
    let solutions = solve_condition(&cond, depth, &policy)
        .map_err(|e| fail(WlStatusComputeError, e.to_string()))?;
    Ok(Box::new(WlPipeline { ing, tm, policy, solutions }))
}

/// Parses a trigonometric-polynomial model
/// `{"constant": c0, "cos": [...], "sin": [...]}` and solves its spectrum.
/// `epsilon` is the connection-point offset (0.02 is a good default).
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_solve_potential(
    json: *const c_char,
    epsilon: f64,
    out: *mut *mut WlPipeline,
) -> WlStatus {
    guarded(|| {
        if out.is_null() {
            return fail(WlStatusNullArgument, "null out pointer");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let f: TrigPoly = match serde_json::from_str(text) {
            Ok(f) => f,
            Err(e) => return fail(WlStatusParseError, e.to_string()),
        };
        let data = match f.critical_data() {
            Ok(d) => d,
            Err(e) => return fail(WlStatusComputeError, e.to_string()),
        };
        let policy = TruncationPolicy::for_action_gap(data.max_action_gap());
        let ing = match IngredientSet::derive(&f, &data, epsilon, &policy) {
            Ok(i) => i,
            Err(e) => return fail(WlStatusComputeError, e.to_string()),
        };
        match solve(ing, policy) {
            Ok(p) => {
                *out = Box::into_raw(p);
                WlStatusOk
            }
            Err(s) => s,
        }
    })
}

/// Parses abstract critical data
/// `{"points": [{"q": .., "value": .., "curvature": ..}, ...]}` and solves
/// the model's exponential types.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_solve_abstract(
    json: *const c_char,
    out: *mut *mut WlPipeline,
) -> WlStatus {
    guarded(|| {
        if out.is_null() {
            return fail(WlStatusNullArgument, "null out pointer");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let data = match CriticalData::from_abstract_json(text) {
            Ok(d) => d,
            Err(e) => return fail(WlStatusParseError, e.to_string()),
        };
        let policy = TruncationPolicy::for_action_gap(data.max_action_gap());
        let ing = match IngredientSet::abstract_model(&data, &policy) {
            Ok(i) => i,
            Err(e) => return fail(WlStatusComputeError, e.to_string()),
        };
        match solve(ing, policy) {
            Ok(p) => {
                *out = Box::into_raw(p);
                WlStatusOk
            }
            Err(s) => s,
        }
    })
}

/// Releases a pipeline handle.  Null is ignored.
///
/// # Safety
/// `pipeline` must be null or a pointer obtained from `wl_solve_*`, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn wl_pipeline_free(pipeline: *mut WlPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// Number of solved eigenvalue branches (including the exact zero branch).
///
/// # Safety
/// `pipeline` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wl_solution_count(
    pipeline: *const WlPipeline,
    out: *mut usize,
) -> WlStatus {
    guarded(|| {
        if pipeline.is_null() || out.is_null() {
            return fail(WlStatusNullArgument, "null argument");
        }
        *out = (*pipeline).solutions.len();
        WlStatusOk
    })
}

/// Whether branch `index` is the exact zero eigenvalue.
///
/// # Safety
/// `pipeline` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wl_solution_is_zero(
    pipeline: *const WlPipeline,
    index: usize,
    out: *mut i32,
) -> WlStatus {
    guarded(|| {
        if pipeline.is_null() || out.is_null() {
            return fail(WlStatusNullArgument, "null argument");
        }
        match (*pipeline).solution(index) {
            Ok(sol) => {
                *out = sol.is_zero_branch() as i32;
                WlStatusOk
            }
            Err(s) => s,
        }
    })
}

/// Exponential type of branch `index`: the rate c of its leading e^{c/h}.
/// The zero branch has no type (`WL_STATUS_NOT_AVAILABLE`).
///
/// # Safety
/// `pipeline` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wl_solution_exponential_type(
    pipeline: *const WlPipeline,
    index: usize,
    out: *mut f64,
) -> WlStatus {
    guarded(|| {
        if pipeline.is_null() || out.is_null() {
            return fail(WlStatusNullArgument, "null argument");
        }
        match (*pipeline).solution(index) {
            Ok(sol) => match sol.er.exponential_type() {
                Some(t) => {
                    *out = t;
                    WlStatusOk
                }
                None => fail(WlStatusNotAvailable, "zero branch carries no exponential type"),
            },
            Err(s) => s,
        }
    })
}

/// Numeric value of the eigenvalue prediction h·E_r(h) at a concrete h.
///
/// # Safety
/// `pipeline` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wl_solution_eigenvalue_at(
    pipeline: *const WlPipeline,
    index: usize,
    h: f64,
    out: *mut f64,
) -> WlStatus {
    guarded(|| {
        if pipeline.is_null() || out.is_null() {
            return fail(WlStatusNullArgument, "null argument");
        }
        if !(h > 0.0) {
            return fail(WlStatusComputeError, "h must be positive");
        }
        match (*pipeline).solution(index) {
            Ok(sol) => {
                *out = wittenlap::oracle::eval_prediction(&sol.er, h);
                WlStatusOk
            }
            Err(s) => s,
        }
    })
}

fn export_string(out: *mut *mut c_char, text: String) -> WlStatus {
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            WlStatusOk
        }
        Err(e) => fail(WlStatusInternalError, e.to_string()),
    }
}

/// Serializes branch `index`'s reduced energy E_r(h) as a JSON array of
/// monomial records `{c, m, k, l, re, im}`.  Free with `wl_string_free`.
///
/// # Safety
/// `pipeline` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wl_solution_terms_json(
    pipeline: *const WlPipeline,
    index: usize,
    out: *mut *mut c_char,
) -> WlStatus {
    guarded(|| {
        if pipeline.is_null() || out.is_null() {
            return fail(WlStatusNullArgument, "null argument");
        }
        match (*pipeline).solution(index) {
            Ok(sol) => match serde_json::to_string(&sol.er) {
                Ok(text) => export_string(out, text),
                Err(e) => fail(WlStatusInternalError, e.to_string()),
            },
            Err(s) => s,
        }
    })
}

/// Builds the per-interval eigenfunction coefficient table for branch
/// `index` and serializes it as JSON
/// `[{"interval": j, "D_plus": [...], "D_minus": [...]}, ...]`.
/// Coefficients are normalized so the leading coefficient of the base-point
/// minus component is −1.  Free with `wl_string_free`.
///
/// # Safety
/// `pipeline` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wl_eigenfunction_table_json(
    pipeline: *const WlPipeline,
    index: usize,
    out: *mut *mut c_char,
) -> WlStatus {
    guarded(|| {
        if pipeline.is_null() || out.is_null() {
            return fail(WlStatusNullArgument, "null argument");
        }
        let p = &*pipeline;
        let sol = match p.solution(index) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let table = match build_table(&p.ing, &p.tm, &sol.er, None, &p.policy) {
            Ok(t) => t,
            Err(e) => return fail(WlStatusComputeError, e.to_string()),
        };
        let rows: Vec<serde_json::Value> = table
            .dtilde
            .iter()
            .enumerate()
            .map(|(i, (dp, dm))| {
                serde_json::json!({
                    "interval": i + 1,
                    "D_plus": dp,
                    "D_minus": dm,
                })
            })
            .collect();
        match serde_json::to_string(&rows) {
            Ok(text) => export_string(out, text),
            Err(e) => fail(WlStatusInternalError, e.to_string()),
        }
    })
}

/// Returns the last error message on this thread (caller frees with
/// `wl_string_free`), or null if no error has occurred.
#[no_mangle]
pub extern "C" fn wl_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(c) => c.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Releases a string returned by this library.  Null is ignored.
///
/// # Safety
/// `s` must be null or an unfreed string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn wl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn example1_json() -> CString {
        let c = 1.0 / (2.0 * PI);
        let s = 1.0 / 2.0f64.sqrt();
        CString::new(
            serde_json::json!({
                "constant": 0.0,
                "cos": [c * s, 0.0],
                "sin": [c * s, -c],
            })
            .to_string(),
        )
        .unwrap()
    }

    fn solve_example1() -> *mut WlPipeline {
        let mut p: *mut WlPipeline = ptr::null_mut();
        let st = unsafe { wl_solve_potential(example1_json().as_ptr(), 0.02, &mut p) };
        assert_eq!(st, WlStatusOk);
        assert!(!p.is_null());
        p
    }

    #[test]
    fn full_round_trip() {
        let p = solve_example1();
        unsafe {
            let mut n = 0usize;
            assert_eq!(wl_solution_count(p, &mut n), WlStatusOk);
            assert_eq!(n, 2);

            let mut is_zero = -1i32;
            assert_eq!(wl_solution_is_zero(p, 0, &mut is_zero), WlStatusOk);
            assert_eq!(is_zero, 1);

            let mut t = 0.0f64;
            assert_eq!(wl_solution_exponential_type(p, 0, &mut t), WlStatusNotAvailable);
            assert_eq!(wl_solution_exponential_type(p, 1, &mut t), WlStatusOk);
            assert!((t + 9.0 / (8.0 * PI)).abs() < 1e-9);

            // Numeric prediction at h = 0.1 is close to 6√5·h·e^{-9/(8πh)}.
            let mut e = 0.0f64;
            assert_eq!(wl_solution_eigenvalue_at(p, 1, 0.1, &mut e), WlStatusOk);
            let lead = 6.0 * 5.0f64.sqrt() * 0.1 * (-9.0 / (8.0 * PI * 0.1)).exp();
            assert!((e / lead - 1.0).abs() < 0.2, "prediction {e} vs leading {lead}");

            let mut s: *mut c_char = ptr::null_mut();
            assert_eq!(wl_solution_terms_json(p, 1, &mut s), WlStatusOk);
            let text = CStr::from_ptr(s).to_str().unwrap();
            let records: serde_json::Value = serde_json::from_str(text).unwrap();
            assert!(records.as_array().unwrap().len() > 3);
            wl_string_free(s);

            let mut ef: *mut c_char = ptr::null_mut();
            assert_eq!(wl_eigenfunction_table_json(p, 1, &mut ef), WlStatusOk);
            let rows: serde_json::Value =
                serde_json::from_str(CStr::from_ptr(ef).to_str().unwrap()).unwrap();
            assert_eq!(rows.as_array().unwrap().len(), 4);
            wl_string_free(ef);

            wl_pipeline_free(p);
        }
    }

    #[test]
    fn abstract_model() {
        let json = CString::new(
            r#"{"points":[
                {"q":0.05,"value":0.0,"curvature":6.0},
                {"q":0.30,"value":0.5,"curvature":-7.0},
                {"q":0.55,"value":0.15,"curvature":9.0},
                {"q":0.80,"value":0.2,"curvature":-8.0}
            ]}"#,
        )
        .unwrap();
        let mut p: *mut WlPipeline = ptr::null_mut();
        unsafe {
            assert_eq!(wl_solve_abstract(json.as_ptr(), &mut p), WlStatusOk);
            let mut t = 0.0f64;
            assert_eq!(wl_solution_exponential_type(p, 1, &mut t), WlStatusOk);
            assert!((t + 0.1).abs() < 1e-9, "type {t}");
            wl_pipeline_free(p);
        }
    }

    #[test]
    fn error_paths() {
        unsafe {
            let mut p: *mut WlPipeline = ptr::null_mut();
            assert_eq!(
                wl_solve_potential(ptr::null(), 0.02, &mut p),
                WlStatusNullArgument
            );
            let bad = CString::new("{not json").unwrap();
            assert_eq!(wl_solve_potential(bad.as_ptr(), 0.02, &mut p), WlStatusParseError);
            let msg = wl_last_error_message();
            assert!(!msg.is_null());
            wl_string_free(msg);

            let p = solve_example1();
            let mut t = 0.0;
            assert_eq!(
                wl_solution_exponential_type(p, 99, &mut t),
                WlStatusIndexOutOfRange
            );
            wl_pipeline_free(p);
        }
    }
}
