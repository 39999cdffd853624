//! C ABI over the veriforge core. Every fallible call returns a `VfStatus`;
//! on failure, `vf_last_error` describes the most recent error on the
//! calling thread. Handles are opaque and released with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::time::Duration;

use veriforge::adaptive::{plan_for, Difficulty, HeuristicClassifier, PromptMode};
use veriforge::dedup::{deduplicate, Combine, NgramHashEmbedder, SimilarityConfig};
use veriforge::evalkit::pass_at_k;
use veriforge::quality::{compression_ratio, Field};
use veriforge::verify::{
    verify_corpus, IcarusBackend, MockBackend, SimulatorBackend, VerificationStatus, VerifyConfig,
};
use veriforge::{load_corpus, save_corpus, Corpus, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Integrity = 5,
    Config = 6,
    Backend = 7,
    Transport = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfBackend {
    Mock = 0,
    Iverilog = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfDifficulty {
    Easy = 0,
    Medium = 1,
    Hard = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfPromptMode {
    Direct = 0,
    StandardReasoning = 1,
    ExtendedReasoning = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VfPlan {
    pub difficulty: VfDifficulty,
    pub prompt_mode: VfPromptMode,
    pub max_new_tokens: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VfVerifySummary {
    pub total: usize,
    pub passed: usize,
    pub compile_fail: usize,
    pub sim_fail: usize,
    pub timeout: usize,
    pub tool_missing: usize,
    pub rejection_rate: f64,
}

/// Opaque corpus handle.
pub struct VfCorpus {
    inner: Corpus,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: VfStatus, msg: impl Into<String>) -> VfStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> VfStatus {
    match e {
        Error::Parse { .. } => VfStatus::Parse,
        Error::Integrity(_) => VfStatus::Integrity,
        Error::Argument(_) => VfStatus::InvalidArgument,
        Error::Config(_) => VfStatus::Config,
        Error::Io { .. } => VfStatus::Io,
        Error::Transport(_) => VfStatus::Transport,
        Error::Embedding { .. } | Error::Backend(_) | Error::Generation { .. } => VfStatus::Backend,
    }
}

fn from_error(e: Error) -> VfStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f`, turning panics into `VfStatus::Panic`.
fn guard(f: impl FnOnce() -> Result<(), VfStatus>) -> VfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VfStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(VfStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, VfStatus> {
    Ok(PathBuf::from(str_arg(p, name)?))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, VfStatus> {
    if p.is_null() {
        return Err(fail(VfStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(VfStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn corpus_arg<'a>(c: *const VfCorpus) -> Result<&'a Corpus, VfStatus> {
    c.as_ref()
        .map(|c| &c.inner)
        .ok_or_else(|| fail(VfStatus::NullArgument, "corpus is null"))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), VfStatus> {
    if p.is_null() {
        Err(fail(VfStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn into_handle(c: Corpus) -> *mut VfCorpus {
    Box::into_raw(Box::new(VfCorpus { inner: c }))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn vf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a JSONL corpus into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_corpus_load(path: *const c_char, out: *mut *mut VfCorpus) -> VfStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = path_arg(path, "path")?;
        let c = load_corpus(&path).map_err(from_error)?;
        *out = into_handle(c);
        Ok(())
    })
}

/// # Safety
/// `corpus` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vf_corpus_save(corpus: *const VfCorpus, path: *const c_char) -> VfStatus {
    guard(|| {
        let c = corpus_arg(corpus)?;
        let path = path_arg(path, "path")?;
        save_corpus(c, &path).map_err(from_error)
    })
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vf_corpus_len(corpus: *const VfCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.len())
}

/// # Safety
/// `corpus` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vf_corpus_free(corpus: *mut VfCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Stage log of the corpus as a JSON array; free with `vf_string_free`.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_corpus_stage_log_json(corpus: *const VfCorpus, out: *mut *mut c_char) -> VfStatus {
    guard(|| {
        out_arg(out, "out")?;
        let c = corpus_arg(corpus)?;
        let json = serde_json::to_string(c.stage_log()).map_err(|e| fail(VfStatus::Integrity, e.to_string()))?;
        *out = CString::new(json).expect("json has no NUL").into_raw();
        Ok(())
    })
}

/// Near-duplicate removal within each domain. `combine_and` selects the
/// conjunction of the problem and solution similarities instead of the
/// disjunction.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_corpus_dedup(
    corpus: *const VfCorpus,
    threshold: f64,
    combine_and: bool,
    out: *mut *mut VfCorpus,
) -> VfStatus {
    guard(|| {
        out_arg(out, "out")?;
        let c = corpus_arg(corpus)?;
        let cfg = SimilarityConfig {
            threshold,
            combine: if combine_and { Combine::And } else { Combine::Or },
        };
        let d = deduplicate(c, &NgramHashEmbedder::default(), cfg).map_err(from_error)?;
        *out = into_handle(d);
        Ok(())
    })
}

/// gzip compression ratio of the concatenated solutions and of their
/// token-class sequence.
///
/// # Safety
/// `corpus` must be a live handle; `cr` and `cr_pos` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_corpus_compression(corpus: *const VfCorpus, cr: *mut f64, cr_pos: *mut f64) -> VfStatus {
    guard(|| {
        out_arg(cr, "cr")?;
        out_arg(cr_pos, "cr_pos")?;
        let c = corpus_arg(corpus)?;
        let r = compression_ratio(c, &[Field::Solution]).map_err(from_error)?;
        *cr = r.cr;
        *cr_pos = r.cr_pos;
        Ok(())
    })
}

/// Simulates every sample against its testbench and stores the passing
/// ones in `*out`. `summary` may be NULL.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable; `summary` must be
/// NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn vf_corpus_verify(
    corpus: *const VfCorpus,
    backend: VfBackend,
    workers: usize,
    timeout_ms: u64,
    out: *mut *mut VfCorpus,
    summary: *mut VfVerifySummary,
) -> VfStatus {
    guard(|| {
        out_arg(out, "out")?;
        let c = corpus_arg(corpus)?;
        if workers == 0 || timeout_ms == 0 {
            return Err(fail(
                VfStatus::InvalidArgument,
                "workers and timeout_ms must be positive",
            ));
        }
        let b: Box<dyn SimulatorBackend> = match backend {
            VfBackend::Mock => Box::new(MockBackend::new()),
            VfBackend::Iverilog => Box::new(IcarusBackend::from_env()),
        };
        let cfg = VerifyConfig::default().with_timeout(Duration::from_millis(timeout_ms));
        let v = verify_corpus(c, b.as_ref(), workers, &cfg).map_err(from_error)?;
        if let Some(s) = summary.as_mut() {
            let n = |st| v.summary.counts.get(&st).copied().unwrap_or(0);
            *s = VfVerifySummary {
                total: v.summary.total,
                passed: v.summary.passed,
                compile_fail: n(VerificationStatus::CompileFail),
                sim_fail: n(VerificationStatus::SimFail),
                timeout: n(VerificationStatus::Timeout),
                tool_missing: n(VerificationStatus::ToolMissing),
                rejection_rate: v.summary.rejection_rate,
            };
        }
        *out = into_handle(v.corpus);
        Ok(())
    })
}

/// Unbiased pass@k for `c` correct out of `n` samples.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_pass_at_k(n: u64, c: u64, k: u64, out: *mut f64) -> VfStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = pass_at_k(n, c, k).map_err(from_error)?;
        Ok(())
    })
}

fn difficulty(d: VfDifficulty) -> Difficulty {
    match d {
        VfDifficulty::Easy => Difficulty::Easy,
        VfDifficulty::Medium => Difficulty::Medium,
        VfDifficulty::Hard => Difficulty::Hard,
    }
}

fn vf_difficulty(d: Difficulty) -> VfDifficulty {
    match d {
        Difficulty::Easy => VfDifficulty::Easy,
        Difficulty::Medium => VfDifficulty::Medium,
        Difficulty::Hard => VfDifficulty::Hard,
    }
}

/// Prompt mode and token budget for a difficulty label.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_plan_for(d: VfDifficulty, out: *mut VfPlan) -> VfStatus {
    guard(|| {
        out_arg(out, "out")?;
        let p = plan_for(difficulty(d));
        *out = VfPlan {
            difficulty: vf_difficulty(p.difficulty),
            prompt_mode: match p.prompt_mode {
                PromptMode::Direct => VfPromptMode::Direct,
                PromptMode::StandardReasoning => VfPromptMode::StandardReasoning,
                PromptMode::ExtendedReasoning => VfPromptMode::ExtendedReasoning,
            },
            max_new_tokens: p.max_new_tokens,
        };
        Ok(())
    })
}

/// Difficulty from the shipped keyword and length heuristic.
///
/// # Safety
/// `problem` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_classify_difficulty(problem: *const c_char, out: *mut VfDifficulty) -> VfStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(problem, "problem")?;
        *out = vf_difficulty(HeuristicClassifier::default().label(text));
        Ok(())
    })
}
