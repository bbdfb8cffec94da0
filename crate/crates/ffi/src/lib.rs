//! C ABI over the analysis pipeline.
//!
//! Fallible calls return an [`McStatus`]. On failure a message is stored for
//! the calling thread and read with [`mc_last_error`]. Fields and reports are
//! opaque handles released by their `_free` function; strings handed out by
//! the library are released with [`mc_string_free`]. Configuration is passed
//! as JSON (missing keys take their defaults) or as `NULL` for the defaults.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use milnor_cycles::analysis::{compare, morsify, AnalysisReport, Verdict};
use milnor_cycles::critfind::find_critical_points;
use milnor_cycles::polyalg::parse_vector_field;
use milnor_cycles::{Config, VectorField};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    CritFailure = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Outcome of comparing the detected cycle count with the bound. The values
/// equal the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McVerdict {
    InequalityHolds = 0,
    InequalityViolated = 2,
    Inconclusive = 3,
}

impl From<Verdict> for McVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::InequalityHolds => Self::InequalityHolds,
            Verdict::InequalityViolated => Self::InequalityViolated,
            Verdict::Inconclusive => Self::Inconclusive,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct McCritPoint {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Jacobian determinant at the point.
    pub det: f64,
    /// Poincaré index.
    pub index: i32,
    pub nondegenerate: bool,
    /// Existence and uniqueness proven on the isolating box.
    pub certified: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McSummary {
    /// Number of critical points found.
    pub critical_points: usize,
    /// Sum of the vanishing-cycle counts over stable points.
    pub bound: usize,
    /// Number of confirmed limit cycles.
    pub detected: usize,
    pub verdict: McVerdict,
}

/// Opaque planar polynomial vector field.
pub struct McField(VectorField);

/// Opaque analysis report.
pub struct McReport(AnalysisReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (McStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording its failure message and turning panics into
/// [`McStatus::Internal`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> McStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => McStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            McStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    (McStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (McStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn config_arg(p: *const c_char) -> Result<Config, Failure> {
    if p.is_null() {
        return Ok(Config::default());
    }
    let text = str_arg(p, "config_json")?;
    let cfg: Config =
        serde_json::from_str(text).map_err(|e| (McStatus::InvalidArgument, format!("config_json: {e}")))?;
    cfg.validate().map_err(|e| (McStatus::InvalidArgument, e.to_string()))?;
    Ok(cfg)
}

fn string_out(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| (McStatus::Internal, e.to_string()))
}

/// Message of the most recent failing call on this thread, or `NULL`. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. `NULL` is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a field from the text of a `.vf` file (`P = …`, `Q = …`, optional
/// `box = [x0, x1] x [y0, y1]` and `name = …`).
///
/// # Safety
/// `src` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_field_parse(src: *const c_char, out: *mut *mut McField) -> McStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(src, "src")?;
        let v = parse_vector_field(text).map_err(|e| (McStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(McField(v)));
        Ok(())
    })
}

/// Writes the field as JSON (`p`, `q`, `box`, `name`) to `*out`.
///
/// # Safety
/// `field` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_field_json(field: *const McField, out: *mut *mut c_char) -> McStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&f.0).map_err(|e| (McStatus::Internal, e.to_string()))?;
        *out = string_out(json)?;
        Ok(())
    })
}

/// Releases a field. `NULL` is ignored.
///
/// # Safety
/// `field` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mc_field_free(field: *mut McField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Finds the critical points of `field`, sorted by `(x, y)`.
///
/// `*len` receives the number of points. If it exceeds `cap` nothing is
/// written to `buf` and [`McStatus::BufferTooSmall`] is returned, so a call
/// with `cap = 0` and `buf = NULL` queries the size.
///
/// # Safety
/// `field` must be a live handle, `config_json` `NULL` or a NUL-terminated
/// string, `buf` valid for `cap` writes and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn mc_critpoints(
    field: *const McField,
    config_json: *const c_char,
    buf: *mut McCritPoint,
    cap: usize,
    len: *mut usize,
) -> McStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        if len.is_null() {
            return Err(null("len"));
        }
        let cfg = config_arg(config_json)?;
        let cps = find_critical_points(&f.0, &cfg.solve).map_err(|e| (McStatus::CritFailure, e.to_string()))?;
        *len = cps.len();
        if cps.len() > cap {
            return Err((
                McStatus::BufferTooSmall,
                format!("{} critical points, buffer holds {cap}", cps.len()),
            ));
        }
        if !cps.is_empty() && buf.is_null() {
            return Err(null("buf"));
        }
        for (k, c) in cps.iter().enumerate() {
            *buf.add(k) = McCritPoint {
                id: c.id,
                x: c.location.x,
                y: c.location.y,
                det: c.det,
                index: c.index,
                nondegenerate: c.nondegenerate,
                certified: c.certified,
            };
        }
        Ok(())
    })
}

/// Runs the full pipeline and stores the report in `*out`. A failure to
/// isolate the critical points is not an error here: the report carries an
/// inconclusive verdict and the reason.
///
/// # Safety
/// `field` must be a live handle, `config_json` `NULL` or a NUL-terminated
/// string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_analyze(
    field: *const McField,
    config_json: *const c_char,
    out: *mut *mut McReport,
) -> McStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config_arg(config_json)?;
        *out = Box::into_raw(Box::new(McReport(compare(&f.0, &cfg))));
        Ok(())
    })
}

/// Copies the headline numbers of a report into `*out`.
///
/// # Safety
/// `report` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_report_summary(report: *const McReport, out: *mut McSummary) -> McStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = McSummary {
            critical_points: r.critical_points.len(),
            bound: r.bound,
            detected: r.detected.len(),
            verdict: r.verdict.into(),
        };
        Ok(())
    })
}

/// Writes the full report as JSON to `*out`. With `with_timestamp` false the
/// timestamp is blank and the output is identical across runs with the same
/// input and configuration.
///
/// # Safety
/// `report` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_report_json(
    report: *const McReport,
    with_timestamp: bool,
    out: *mut *mut c_char,
) -> McStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = if with_timestamp {
            r.to_json()
        } else {
            r.to_json_without_timestamp()
        };
        *out = string_out(json)?;
        Ok(())
    })
}

/// Releases a report. `NULL` is ignored.
///
/// # Safety
/// `report` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mc_report_free(report: *mut McReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Stores `V + s·A` in `*out`, where `A` is an affine field drawn from a
/// generator seeded with `seed`. `s = 0` copies the field.
///
/// # Safety
/// `field` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_morsify(field: *const McField, s: f64, seed: u64, out: *mut *mut McField) -> McStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let w = morsify(&f.0, s, seed).map_err(|e| (McStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(McField(w)));
        Ok(())
    })
}
