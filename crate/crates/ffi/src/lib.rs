//! C ABI over rootprobe.
//!
//! Conventions:
//! * Every fallible function returns an [`RpStatus`]; on anything but
//!   `RP_STATUS_OK` a message is available from [`rp_last_error_message`]
//!   on the same thread.
//! * Objects are opaque handles created by `*_new`/`rp_analyze` and released
//!   with the matching `*_free`. Passing NULL to a `*_free` is a no-op.
//! * Strings returned through `char **` out-parameters are owned by the
//!   caller and must be released with [`rp_string_free`].
//! * Panics never cross the boundary; they surface as `RP_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rootprobe::analysis::{analyze_example, AnalysisOptions};
use rootprobe::dataset::{Answer, QaExample};
use rootprobe::models::{answer_matches, AnswerPrediction, AnswererHandle};
use rootprobe::reducer::{ReduceOptions, ReductionTrace, RootQuestion};
use rootprobe::surrogate::SurrogateConfig;
use rootprobe::{Error, ModelError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Model = 4,
    Protocol = 5,
    TargetNotFound = 6,
    Io = 7,
    Internal = 8,
}

/// Surrogate and reduction settings for [`rp_analyze`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpAnalysisConfig {
    pub n_samples: usize,
    pub kernel_width: f64,
    pub ridge_alpha: f64,
    pub seed: u64,
    pub recompute_coefficients: bool,
}

/// Opaque answerer handle.
pub struct RpAnswerer {
    handle: AnswererHandle,
}

/// Opaque reduction trace with its root question.
pub struct RpTrace {
    trace: ReductionTrace,
    root: RootQuestion,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(RpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Model(ModelError::Protocol { .. }) => RpStatus::Protocol,
            Error::Model(ModelError::Config(_)) | Error::Config(_) | Error::Contract(_) => {
                RpStatus::InvalidArgument
            }
            Error::Model(_) | Error::Sample { .. } | Error::PartialTrace { .. } => RpStatus::Model,
            Error::TargetNotFound(_) => RpStatus::TargetNotFound,
            Error::Io { .. } | Error::Parse { .. } => RpStatus::Io,
            Error::Singular(_) | Error::Json(_) | Error::Csv(_) => RpStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Error::Model(e).into()
    }
}

/// Runs `body`, turning errors and panics into a status plus last-error text.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            clear_last_error();
            RpStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            RpStatus::Internal
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(RpStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RpStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn check_out<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(RpStatus::NullPointer, format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(RpStatus::NullPointer, format!("{name} is NULL")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(RpStatus::Internal, "string contains NUL".into()))
}

/// Defaults: 1000 samples, kernel width 25, ridge alpha 1, seed 0, frozen order.
#[no_mangle]
pub extern "C" fn rp_analysis_config_default() -> RpAnalysisConfig {
    let s = SurrogateConfig::default();
    RpAnalysisConfig {
        n_samples: s.n_samples,
        kernel_width: s.kernel_width,
        ridge_alpha: s.ridge_alpha,
        seed: s.seed,
        recompute_coefficients: false,
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next rootprobe call on the same thread.
#[no_mangle]
pub extern "C" fn rp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn rp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates an answerer from a model spec: `builtin`,
/// `oracle:<keyword>:<target>`, `scripted:<path>` or `http:<url>`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_answerer_new(
    spec: *const c_char,
    max_inflight: usize,
    out: *mut *mut RpAnswerer,
) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let spec = read_str(spec, "spec")?;
        if max_inflight == 0 {
            return Err(Failure(
                RpStatus::InvalidArgument,
                "max_inflight must be at least 1".into(),
            ));
        }
        let handle = AnswererHandle::from_spec(spec, max_inflight)?;
        *out = Box::into_raw(Box::new(RpAnswerer { handle }));
        Ok(())
    })
}

/// # Safety
/// `answerer` must be NULL or a handle from [`rp_answerer_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn rp_answerer_free(answerer: *mut RpAnswerer) {
    if !answerer.is_null() {
        drop(Box::from_raw(answerer));
    }
}

/// Health check; always OK for local answerers.
///
/// # Safety
/// `answerer` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_answerer_health(answerer: *const RpAnswerer) -> RpStatus {
    guard(|| {
        let a = deref(answerer, "answerer")?;
        a.handle.health()?;
        Ok(())
    })
}

/// Asks one question and writes the validated prediction as JSON
/// (`answer_text`, `start_token`, `end_token`, `context_tokens`,
/// `start_distribution`) to `*out_json`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rp_predict_json(
    answerer: *const RpAnswerer,
    question: *const c_char,
    context: *const c_char,
    out_json: *mut *mut c_char,
) -> RpStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        let a = deref(answerer, "answerer")?;
        let question = read_str(question, "question")?;
        let context = read_str(context, "context")?;
        let prediction = a.handle.predict(question, context)?;
        let json = serde_json::to_string(&prediction).map_err(Error::from)?;
        *out_json = into_c_string(json)?;
        Ok(())
    })
}

/// Explains and reduces one question. `answer_start` is the character offset
/// of `answer` in `context`, or -1 when unknown.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated; `config` may be NULL for
/// defaults.
#[no_mangle]
pub unsafe extern "C" fn rp_analyze(
    answerer: *const RpAnswerer,
    id: *const c_char,
    question: *const c_char,
    context: *const c_char,
    answer: *const c_char,
    answer_start: i64,
    config: *const RpAnalysisConfig,
    out: *mut *mut RpTrace,
) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let a = deref(answerer, "answerer")?;
        let config = config
            .as_ref()
            .copied()
            .unwrap_or_else(|| rp_analysis_config_default());
        let answer_start = match answer_start {
            -1 => None,
            s => Some(usize::try_from(s).map_err(|_| {
                Failure(
                    RpStatus::InvalidArgument,
                    format!("answer_start {s} is negative"),
                )
            })?),
        };
        let example = QaExample {
            id: read_str(id, "id")?.to_string(),
            question: read_str(question, "question")?.to_string(),
            context: read_str(context, "context")?.to_string(),
            answers: vec![Answer {
                text: read_str(answer, "answer")?.to_string(),
                answer_start,
            }],
        };
        let surrogate = SurrogateConfig {
            n_samples: config.n_samples,
            kernel_width: config.kernel_width,
            ridge_alpha: config.ridge_alpha,
            seed: config.seed,
        };
        surrogate.validate()?;
        let options = AnalysisOptions {
            surrogate,
            reduce: ReduceOptions {
                recompute_coefficients: config.recompute_coefficients,
            },
        };
        let trace = analyze_example(&example, &a.handle, &options)?;
        let root = trace.root()?;
        *out = Box::into_raw(Box::new(RpTrace { trace, root }));
        Ok(())
    })
}

/// # Safety
/// `trace` must be NULL or a handle from [`rp_analyze`], freed once.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_free(trace: *mut RpTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of words in the original question; 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_word_count(trace: *const RpTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.n_words())
}

/// Number of words in the root question; 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_root_word_count(trace: *const RpTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.root.word_count)
}

/// Fraction of question words removed in the root question; NaN for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_percent_removed(trace: *const RpTrace) -> f64 {
    trace.as_ref().map_or(f64::NAN, |t| t.root.percent_removed)
}

/// Copies up to `len` per-word coefficients into `buf` and returns the total
/// number of coefficients, so a call with `len = 0` sizes the buffer.
///
/// # Safety
/// `buf` must have room for `len` doubles (may be NULL when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn rp_trace_coefficients(
    trace: *const RpTrace,
    buf: *mut f64,
    len: usize,
) -> usize {
    let Some(t) = trace.as_ref() else {
        return 0;
    };
    let coefs = &t.trace.explanation.coefficients;
    if !buf.is_null() {
        let n = len.min(coefs.len());
        ptr::copy_nonoverlapping(coefs.as_ptr(), buf, n);
    }
    coefs.len()
}

/// Root question text (words joined by single spaces).
///
/// # Safety
/// `trace` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_root_text(
    trace: *const RpTrace,
    out: *mut *mut c_char,
) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let t = deref(trace, "trace")?;
        *out = into_c_string(t.root.text())?;
        Ok(())
    })
}

/// Full trace as JSON, the same document the CLI writes per example.
///
/// # Safety
/// `trace` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_to_json(
    trace: *const RpTrace,
    out: *mut *mut c_char,
) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let t = deref(trace, "trace")?;
        let json = serde_json::to_string(&t.trace).map_err(Error::from)?;
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// Whether `answer` counts as a correct answer for `truth`.
///
/// # Safety
/// Strings must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_answer_matches(
    answer: *const c_char,
    truth: *const c_char,
    out: *mut bool,
) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let answer = read_str(answer, "answer")?;
        let truth = read_str(truth, "truth")?;
        let prediction = AnswerPrediction {
            answer_text: answer.to_string(),
            start_token: 0,
            end_token: 0,
            context_tokens: vec![answer.to_string()],
            start_distribution: vec![1.0],
        };
        *out = answer_matches(&prediction, &[truth]);
        Ok(())
    })
}
