//! C ABI over the reinflect toolkit.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns a
//! [`ReinflectStatus`]; on failure [`reinflect_last_error`] describes the
//! problem for the calling thread. Strings returned through `char **` out
//! parameters are NUL-terminated UTF-8 and must be released with
//! [`reinflect_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use reinflect::actions::{derive_oracle, format_actions, parse_actions, run};
use reinflect::alignment::align;
use reinflect::corpus::DEFAULT_GAP;
use reinflect::model::{load_checkpoint, DecodeOptions, Reinflector};
use reinflect::patches::{default_table, PatchTable};
use reinflect::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReinflectStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    Io = 5,
    Parse = 6,
    Checkpoint = 7,
    Internal = 8,
}

/// Immutable patch lookup table.
pub struct ReinflectPatchTable {
    table: PatchTable,
}

/// A trained model with its vocabularies and patch table.
pub struct ReinflectModel {
    model: Reinflector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    let c = CString::new(text).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> ReinflectStatus {
    match err {
        Error::Io { .. } => ReinflectStatus::Io,
        Error::Parse { .. } | Error::Decode(_) => ReinflectStatus::Parse,
        Error::Checkpoint(_) => ReinflectStatus::Checkpoint,
        Error::Stage { source, .. } => status_of(source),
        _ => ReinflectStatus::InvalidArgument,
    }
}

struct Failure(ReinflectStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status plus the
/// thread-local message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ReinflectStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ReinflectStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("internal error: {msg}"));
            ReinflectStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ReinflectStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ReinflectStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String, what: &str) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(ReinflectStatus::Internal, "string contains NUL".into()))?;
    write_out(out, c.into_raw(), what)
}

fn symbol(cp: u32) -> Result<char, Failure> {
    char::from_u32(cp).ok_or_else(|| Failure(ReinflectStatus::InvalidArgument, format!("{cp:#X} is not a Unicode scalar")))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn reinflect_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn reinflect_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The table for the embedded font and default Unicode ranges.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn reinflect_patch_table_default(out: *mut *mut ReinflectPatchTable) -> ReinflectStatus {
    guard(|| {
        let handle = Box::new(ReinflectPatchTable { table: default_table().clone() });
        write_out(out, Box::into_raw(handle), "out")
    })
}

/// Parses `symbol<TAB>id<TAB>result` rows.
///
/// # Safety
/// `tsv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reinflect_patch_table_from_tsv(
    tsv: *const c_char,
    out: *mut *mut ReinflectPatchTable,
) -> ReinflectStatus {
    guard(|| {
        let table = PatchTable::from_tsv(text(tsv, "tsv")?)?;
        write_out(out, Box::into_raw(Box::new(ReinflectPatchTable { table })), "out")
    })
}

/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reinflect_patch_table_to_tsv(
    table: *const ReinflectPatchTable,
    out: *mut *mut c_char,
) -> ReinflectStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        write_string(out, t.table.to_tsv(), "out")
    })
}

/// Number of patch classes; 0 for NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn reinflect_patch_table_class_count(table: *const ReinflectPatchTable) -> u32 {
    table.as_ref().map_or(0, |t| t.table.class_count())
}

/// Applies patch `patch_id` to `symbol`. Returns `NotFound` when the patch
/// is undefined for that symbol.
///
/// # Safety
/// `table` must be a live handle; `out_symbol` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reinflect_patch_table_apply(
    table: *const ReinflectPatchTable,
    symbol_cp: u32,
    patch_id: u32,
    out_symbol: *mut u32,
) -> ReinflectStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        let c = symbol(symbol_cp)?;
        let r = t
            .table
            .apply(c, patch_id)
            .ok_or_else(|| Failure(ReinflectStatus::NotFound, format!("patch {patch_id} undefined for {c:?}")))?;
        write_out(out_symbol, r as u32, "out_symbol")
    })
}

/// Patch id turning `a` into `b`, or `NotFound`.
///
/// # Safety
/// `table` must be a live handle; `out_id` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reinflect_patch_table_find(
    table: *const ReinflectPatchTable,
    a: u32,
    b: u32,
    out_id: *mut u32,
) -> ReinflectStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        let (a, b) = (symbol(a)?, symbol(b)?);
        let k = t
            .table
            .find_patch(a, b)
            .ok_or_else(|| Failure(ReinflectStatus::NotFound, format!("no patch from {a:?} to {b:?}")))?;
        write_out(out_id, k, "out_id")
    })
}

/// # Safety
/// `table` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn reinflect_patch_table_free(table: *mut ReinflectPatchTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

unsafe fn table_or_empty(table: *const ReinflectPatchTable, empty: &PatchTable) -> &PatchTable {
    match table.as_ref() {
        Some(t) => &t.table,
        None => empty,
    }
}

/// Patch-aware alignment as `lemma_aligned<TAB>target_aligned<TAB>cost`,
/// with `#` marking gaps. A NULL table means no patches.
///
/// # Safety
/// String arguments must be NUL-terminated; `table` NULL or live; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn reinflect_align(
    table: *const ReinflectPatchTable,
    lemma: *const c_char,
    target: *const c_char,
    out: *mut *mut c_char,
) -> ReinflectStatus {
    guard(|| {
        let empty = PatchTable::empty();
        let t = table_or_empty(table, &empty);
        let a = align(text(lemma, "lemma")?, text(target, "target")?, t, DEFAULT_GAP)?;
        write_string(out, format!("{}\t{}\t{}", a.lemma_string(), a.target_string(), a.cost), "out")
    })
}

/// Gold action sequence as space-separated tokens (`COPY`, `PATCH:3`, ...).
///
/// # Safety
/// As for [`reinflect_align`].
#[no_mangle]
pub unsafe extern "C" fn reinflect_oracle(
    table: *const ReinflectPatchTable,
    lemma: *const c_char,
    target: *const c_char,
    out: *mut *mut c_char,
) -> ReinflectStatus {
    guard(|| {
        let empty = PatchTable::empty();
        let t = table_or_empty(table, &empty);
        let aligned = align(text(lemma, "lemma")?, text(target, "target")?, t, DEFAULT_GAP)?;
        write_string(out, format_actions(&derive_oracle(&aligned, t)), "out")
    })
}

/// Runs a space-separated action sequence over `lemma`.
///
/// # Safety
/// As for [`reinflect_align`].
#[no_mangle]
pub unsafe extern "C" fn reinflect_run(
    table: *const ReinflectPatchTable,
    lemma: *const c_char,
    actions: *const c_char,
    out: *mut *mut c_char,
) -> ReinflectStatus {
    guard(|| {
        let empty = PatchTable::empty();
        let t = table_or_empty(table, &empty);
        let acts = parse_actions(text(actions, "actions")?)?;
        write_string(out, run(text(lemma, "lemma")?, &acts, t)?, "out")
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reinflect_model_load(path: *const c_char, out: *mut *mut ReinflectModel) -> ReinflectStatus {
    guard(|| {
        let model = load_checkpoint(Path::new(text(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(ReinflectModel { model })), "out")
    })
}

/// Predicts the form of `lemma` for `features` (`;`-separated tags) with
/// beam search of width `beam_size`. `out_log_likelihood` may be NULL.
///
/// # Safety
/// `model` must be live; strings NUL-terminated; `out_form` writable.
#[no_mangle]
pub unsafe extern "C" fn reinflect_model_predict(
    model: *const ReinflectModel,
    lemma: *const c_char,
    features: *const c_char,
    beam_size: u32,
    out_form: *mut *mut c_char,
    out_log_likelihood: *mut f64,
) -> ReinflectStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let tags: Vec<String> = text(features, "features")?
            .split(';')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        let opts = DecodeOptions {
            beam_size: beam_size as usize,
            ..DecodeOptions::default()
        };
        let decoded = m.model.predict(text(lemma, "lemma")?, &tags, &opts)?;
        if !out_log_likelihood.is_null() {
            out_log_likelihood.write(decoded.log_likelihood);
        }
        write_string(out_form, decoded.output, "out_form")
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn reinflect_model_free(model: *mut ReinflectModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
