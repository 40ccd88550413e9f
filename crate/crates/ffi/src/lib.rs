//! C ABI for the mclner tagger.
//!
//! Models are opaque handles created by [`mcl_model_load`] and released with
//! [`mcl_model_free`]. Every fallible function returns an [`MclStatus`]; on
//! failure [`mcl_last_error_message`] describes the most recent error on the
//! calling thread. No function unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mclner::archive::ModelArchive;
use mclner::cli::{evaluate_files, CliError, EXIT_USAGE};
use mclner::corpus::{MorphBits, Schema, Sentence, Token};
use mclner::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MclStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Archive = 6,
    ArchiveVersion = 7,
    Alignment = 8,
    InvalidTag = 9,
    Shape = 10,
    Panic = 11,
    Other = 12,
}

/// Chunk-level scores in percent plus token accuracy.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MclScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub gold_chunks: usize,
    pub predicted_chunks: usize,
    pub correct_chunks: usize,
}

/// A loaded model. Opaque to C callers.
pub struct MclModel {
    archive: ModelArchive,
    tag_names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(message).expect("no interior NUL")));
}

fn status_of(e: &Error) -> MclStatus {
    match e {
        Error::Io { .. } => MclStatus::Io,
        Error::Parse { .. } | Error::Schema(_) => MclStatus::Parse,
        Error::Archive(_) => MclStatus::Archive,
        Error::ArchiveVersion { .. } => MclStatus::ArchiveVersion,
        Error::Alignment { .. } => MclStatus::Alignment,
        Error::InvalidTag(_) => MclStatus::InvalidTag,
        Error::Shape(_) | Error::DimensionMismatch { .. } | Error::OutOfRange { .. } => MclStatus::Shape,
        Error::Config(_) => MclStatus::InvalidArgument,
        _ => MclStatus::Other,
    }
}

fn fail(status: MclStatus, message: impl Into<String>) -> MclStatus {
    set_error(message);
    status
}

fn fail_core(e: Error) -> MclStatus {
    let status = status_of(&e);
    fail(status, e.to_string())
}

fn fail_cli(e: CliError) -> MclStatus {
    let status = match (&e.source, e.code) {
        (Some(err), _) => status_of(err),
        (None, EXIT_USAGE) => MclStatus::InvalidArgument,
        (None, _) => MclStatus::Parse,
    };
    fail(status, e.message)
}

/// Runs `f`, turning panics into [`MclStatus::Panic`].
fn guarded(f: impl FnOnce() -> MclStatus) -> MclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == MclStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(MclStatus::Panic, format!("internal panic: {message}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, MclStatus> {
    if p.is_null() {
        return Err(fail(MclStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MclStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Loads a model archive. On success `*out` receives a handle that must be
/// released with [`mcl_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mcl_model_load(path: *const c_char, out: *mut *mut MclModel) -> MclStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MclStatus::NullPointer, "out is NULL");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let archive = match ModelArchive::load(Path::new(path)) {
            Ok(a) => a,
            Err(e) => return fail_core(e),
        };
        let tag_names = archive
            .model
            .vocab
            .tags
            .names()
            .iter()
            .map(|n| CString::new(n.as_str()).expect("tags contain no NUL"))
            .collect();
        *out = Box::into_raw(Box::new(MclModel { archive, tag_names }));
        MclStatus::Ok
    })
}

/// Releases a model handle. Passing NULL is a no-op.
///
/// # Safety
/// `model` must be NULL or a handle from [`mcl_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mcl_model_free(model: *mut MclModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of tags the model predicts. Tag ids run from 0 to this value
/// minus one; id 0 is `O`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mcl_model_num_tags(model: *const MclModel, out: *mut usize) -> MclStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return fail(MclStatus::NullPointer, "model or out is NULL");
        }
        *out = (&*model).tag_names.len();
        MclStatus::Ok
    })
}

/// Name of tag `id`. The string is owned by the model and lives until the
/// handle is freed.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mcl_model_tag_name(
    model: *const MclModel,
    id: usize,
    out: *mut *const c_char,
) -> MclStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return fail(MclStatus::NullPointer, "model or out is NULL");
        }
        let names = &(&*model).tag_names;
        match names.get(id) {
            Some(name) => {
                *out = name.as_ptr();
                MclStatus::Ok
            }
            None => fail(
                MclStatus::InvalidArgument,
                format!("tag id {id} out of range for {} tags", names.len()),
            ),
        }
    })
}

/// Tags one sentence of `len` tokens and writes tag ids into `out_tags`.
/// `roots` and `morphs` may be NULL; missing roots default to the
/// lowercased surface and missing morphology bits to all zeros. Morphology
/// strings are six characters of `0`/`1`.
///
/// # Safety
/// `surfaces` (and `roots`/`morphs` when non-NULL) must point to `len`
/// NUL-terminated strings; `out_tags` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn mcl_model_tag(
    model: *const MclModel,
    surfaces: *const *const c_char,
    roots: *const *const c_char,
    morphs: *const *const c_char,
    len: usize,
    out_tags: *mut usize,
) -> MclStatus {
    guarded(|| {
        if model.is_null() {
            return fail(MclStatus::NullPointer, "model is NULL");
        }
        if len == 0 {
            return MclStatus::Ok;
        }
        if surfaces.is_null() || out_tags.is_null() {
            return fail(MclStatus::NullPointer, "surfaces or out_tags is NULL");
        }
        let mut tokens = Vec::with_capacity(len);
        for i in 0..len {
            let surface = match str_arg(*surfaces.add(i), "surface") {
                Ok(s) => s,
                Err(st) => return st,
            };
            let mut token = Token::new(surface);
            if !roots.is_null() {
                match str_arg(*roots.add(i), "root") {
                    Ok(r) => token = token.with_root(r),
                    Err(st) => return st,
                }
            }
            if !morphs.is_null() {
                let raw = match str_arg(*morphs.add(i), "morph") {
                    Ok(m) => m,
                    Err(st) => return st,
                };
                match raw.parse::<MorphBits>() {
                    Ok(m) => token = token.with_morph(m),
                    Err(e) => return fail(MclStatus::Parse, format!("token {}: {e}", i + 1)),
                }
            }
            tokens.push(token);
        }
        let model = &(&*model).archive.model;
        match model.decode(&Sentence::new(tokens), false) {
            Ok(ids) => {
                std::slice::from_raw_parts_mut(out_tags, len).copy_from_slice(&ids);
                MclStatus::Ok
            }
            Err(e) => fail_core(e),
        }
    })
}

/// Scores a predicted file against a gold corpus with chunk-level
/// semantics. The gold file has columns `surface root morph tag` (root and
/// morph optional); the predicted tag is the last column of each line.
///
/// # Safety
/// `gold` and `predicted` must be NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mcl_evaluate_files(
    gold: *const c_char,
    predicted: *const c_char,
    out: *mut MclScores,
) -> MclStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MclStatus::NullPointer, "out is NULL");
        }
        let (gold, predicted) = match (str_arg(gold, "gold"), str_arg(predicted, "predicted")) {
            (Ok(g), Ok(p)) => (g, p),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match evaluate_files(Path::new(gold), Path::new(predicted), &Schema::default(), false) {
            Ok(report) => {
                *out = MclScores {
                    precision: report.overall.precision(),
                    recall: report.overall.recall(),
                    f1: report.f1(),
                    accuracy: report.accuracy(),
                    gold_chunks: report.overall.gold,
                    predicted_chunks: report.overall.predicted,
                    correct_chunks: report.overall.correct,
                };
                MclStatus::Ok
            }
            Err(e) => fail_cli(e),
        }
    })
}

/// Message for the last failure on this thread, or NULL if the last call
/// succeeded. Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn mcl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mcl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
