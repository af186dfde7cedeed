//! C interface to the benchmarking toolkit.
//!
//! Corpora and reports are opaque heap handles created and released through
//! this API. Every fallible function returns a [`PebStatus`]; on failure a
//! description is available from [`peb_last_error`] on the same thread.
//! Strings returned to the caller are NUL-terminated UTF-8 and must be
//! released with [`peb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pebench::report::{build_report, render, ComparisonReport, Format, ReportConfig, Resources};
use pebench::simulator::{generate_corpus, SimParams};
use pebench::stats::mann_whitney_u;
use pebench::transcript::{parse_corpus_str, read_corpus_file, write_corpus, Corpus, CorpusLabel};
use pebench::Error;

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PebStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The transcript input violates the record schema.
    ParseError = 3,
    /// A parameter or configuration value is invalid.
    InvalidArgument = 4,
    /// A corpus has too few sessions for the requested analysis.
    CorpusTooSmall = 5,
    /// Reading or writing a file failed.
    IoError = 6,
    /// An internal invariant was violated.
    Internal = 7,
    /// The library panicked; the call had no effect.
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PebCorpusLabel {
    Real = 0,
    Synthetic = 1,
    Other = 2,
}

impl From<PebCorpusLabel> for CorpusLabel {
    fn from(l: PebCorpusLabel) -> Self {
        match l {
            PebCorpusLabel::Real => CorpusLabel::Real,
            PebCorpusLabel::Synthetic => CorpusLabel::Synthetic,
            PebCorpusLabel::Other => CorpusLabel::Other,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PebFormat {
    Json = 0,
    Csv = 1,
    Markdown = 2,
}

impl From<PebFormat> for Format {
    fn from(f: PebFormat) -> Self {
        match f {
            PebFormat::Json => Format::Json,
            PebFormat::Csv => Format::Csv,
            PebFormat::Markdown => Format::Markdown,
        }
    }
}

/// A parsed transcript corpus.
pub struct PebCorpus(Corpus);

/// A real-versus-synthetic comparison report.
pub struct PebReport(ComparisonReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PebStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::MalformedLine { .. }
            | Error::UnknownSpeaker { .. }
            | Error::EmptyTurns { .. }
            | Error::DuplicateSession { .. }
            | Error::InvalidTurn { .. }
            | Error::EmptyAfterNormalization(_) => PebStatus::ParseError,
            Error::CorpusTooSmall(_) | Error::EmptyCorpus => PebStatus::CorpusTooSmall,
            Error::Io { .. } => PebStatus::IoError,
            Error::Invariant(_) => PebStatus::Internal,
            _ => PebStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PebStatus::NullArgument, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PebStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PebStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            PebStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(PebStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// # Safety
/// `out` must be null or valid for writes.
unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn to_c_string(bytes: Vec<u8>) -> Result<*mut c_char, Failure> {
    CString::new(bytes)
        .map(CString::into_raw)
        .map_err(|_| Failure(PebStatus::Internal, "output contains a NUL byte".into()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn peb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn peb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse a JSONL transcript held in memory.
///
/// # Safety
/// `jsonl` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn peb_corpus_parse(
    jsonl: *const c_char,
    label: PebCorpusLabel,
    out: *mut *mut PebCorpus,
) -> PebStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(jsonl, "jsonl")?;
        let corpus = parse_corpus_str(text, label.into())?;
        write_out(out, PebCorpus(corpus));
        Ok(())
    })
}

/// Parse a JSONL transcript file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn peb_corpus_read_file(
    path: *const c_char,
    label: PebCorpusLabel,
    out: *mut *mut PebCorpus,
) -> PebStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let corpus = read_corpus_file(path.as_ref(), label.into())?;
        write_out(out, PebCorpus(corpus));
        Ok(())
    })
}

/// Generate a synthetic corpus. `params_json` holds simulator parameters
/// (any subset; missing fields take their defaults) or is null for all defaults.
///
/// # Safety
/// `params_json` must be null or NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn peb_simulate(params_json: *const c_char, out: *mut *mut PebCorpus) -> PebStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params: SimParams = if params_json.is_null() {
            SimParams::default()
        } else {
            serde_json::from_str(str_arg(params_json, "params_json")?).map_err(Error::from)?
        };
        let corpus = generate_corpus(&params)?;
        write_out(out, PebCorpus(corpus));
        Ok(())
    })
}

/// Number of sessions in the corpus; 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn peb_corpus_session_count(corpus: *const PebCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// Serialize the corpus back to JSONL.
///
/// # Safety
/// `corpus` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn peb_corpus_to_jsonl(corpus: *const PebCorpus, out: *mut *mut c_char) -> PebStatus {
    guard(|| {
        let corpus = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut buf = Vec::new();
        write_corpus(&corpus.0, &mut buf)?;
        *out = to_c_string(buf)?;
        Ok(())
    })
}

/// Release a corpus handle. Null is ignored.
///
/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn peb_corpus_free(corpus: *mut PebCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Compare a real and a synthetic corpus with the bundled lexicon and rules.
/// `config_json` holds report settings (`seed`, `exact_threshold`,
/// `importance`, `metrics`) or is null for defaults.
///
/// # Safety
/// Both corpora must be live handles; `config_json` null or NUL-terminated;
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn peb_compare(
    real: *const PebCorpus,
    synth: *const PebCorpus,
    config_json: *const c_char,
    out: *mut *mut PebReport,
) -> PebStatus {
    guard(|| {
        let real = real.as_ref().ok_or_else(|| null("real"))?;
        let synth = synth.as_ref().ok_or_else(|| null("synth"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config: ReportConfig = if config_json.is_null() {
            ReportConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(Error::from)?
        };
        let report = build_report(&real.0, &synth.0, &Resources::default(), &config, None)?;
        write_out(out, PebReport(report));
        Ok(())
    })
}

/// Render a report as JSON, CSV or Markdown.
///
/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn peb_report_render(
    report: *const PebReport,
    format: PebFormat,
    out: *mut *mut c_char,
) -> PebStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(render(&report.0, format.into())?)?;
        Ok(())
    })
}

/// p-value of the named metric, looked up among system and PE metrics.
/// Writes NaN when the metric was skipped.
///
/// # Safety
/// `report` must be a live handle, `metric` NUL-terminated, `p_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn peb_report_p_value(
    report: *const PebReport,
    metric: *const c_char,
    p_out: *mut f64,
) -> PebStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        let name = str_arg(metric, "metric")?;
        if p_out.is_null() {
            return Err(null("p_out"));
        }
        let block = report
            .0
            .metric_blocks
            .iter()
            .chain(&report.0.pe_blocks)
            .find(|b| b.metric_name == name)
            .ok_or_else(|| Failure(PebStatus::InvalidArgument, format!("unknown metric {name:?}")))?;
        *p_out = block.p_value.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Release a report handle. Null is ignored.
///
/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn peb_report_free(report: *mut PebReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn peb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Two-sided Mann-Whitney U test of `a` against `b`. Writes U for `a` and the p-value.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` doubles; `u_out` and `p_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn peb_mann_whitney_u(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    u_out: *mut f64,
    p_out: *mut f64,
) -> PebStatus {
    guard(|| {
        if a.is_null() || b.is_null() || u_out.is_null() || p_out.is_null() {
            return Err(null("sample or output pointer"));
        }
        let a = std::slice::from_raw_parts(a, na);
        let b = std::slice::from_raw_parts(b, nb);
        let r = mann_whitney_u(a, b)?;
        *u_out = r.u_statistic;
        *p_out = r.p_value;
        Ok(())
    })
}
