//! C ABI over the vector store, the hashing embedder and the margin function.
//!
//! Conventions:
//! - every fallible function returns a [`DaStatus`]; details of the last
//!   failure on the calling thread come from [`da_last_error_message`];
//! - handles are opaque and must be released with their `_free` function;
//! - output values go through caller-provided pointers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use densaug::embed::{hash_embed, Embedding};
use densaug::theory::normalized_margin;
use densaug::vdb::{VectorEntry, VectorStore};
use densaug::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Io = 4,
    CorruptIndex = 5,
    MissingArtifact = 6,
    Backend = 7,
    /// A caller-provided buffer is too small; the needed size was reported.
    BufferTooSmall = 8,
    Internal = 9,
}

/// A flat exact-search vector store.
pub struct DaStore {
    inner: VectorStore,
}

/// The deterministic feature-hashing embedder.
pub struct DaEmbedder {
    dim: usize,
    seed: u64,
}

/// One search result: position of the entry in insertion order, and score.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaHit {
    pub entry: u64,
    pub score: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DaStatus {
    match e {
        Error::InvalidArgument(_) | Error::Precondition(_) => DaStatus::InvalidArgument,
        Error::Validation(_) | Error::Parse { .. } | Error::Structured(_) | Error::ConfigMismatch { .. } => {
            DaStatus::Validation
        }
        Error::Io { .. } => DaStatus::Io,
        Error::CorruptIndex { .. } => DaStatus::CorruptIndex,
        Error::MissingArtifact { .. } => DaStatus::MissingArtifact,
        Error::Transport(_) | Error::Backend { .. } | Error::EmptyOutput => DaStatus::Backend,
        Error::Serde(_) => DaStatus::Internal,
    }
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), (DaStatus, String)>) -> DaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DaStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DaStatus::Internal
        }
    }
}

fn core(e: Error) -> (DaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DaStatus, String) {
    (DaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (DaStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (DaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (DaStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn da_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn da_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `<q, v1 - v2> / (|q| |v1 - v2|)` over `dim`-element arrays.
///
/// # Safety
/// `q`, `v1` and `v2` must point to `dim` doubles; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn da_normalized_margin(
    q: *const f64,
    v1: *const f64,
    v2: *const f64,
    dim: usize,
    out: *mut f64,
) -> DaStatus {
    guard(|| {
        let q = slice_arg(q, dim, "q")?;
        let v1 = slice_arg(v1, dim, "v1")?;
        let v2 = slice_arg(v2, dim, "v2")?;
        let out = out_arg(out, "out")?;
        *out = normalized_margin(q, v1, v2).map_err(core)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer; the handle it receives must be freed with
/// [`da_embedder_free`].
#[no_mangle]
pub unsafe extern "C" fn da_hash_embedder_new(dim: usize, seed: u64, out: *mut *mut DaEmbedder) -> DaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if dim == 0 {
            return Err((DaStatus::InvalidArgument, "dimension must be positive".into()));
        }
        *out = Box::into_raw(Box::new(DaEmbedder { dim, seed }));
        Ok(())
    })
}

/// # Safety
/// `embedder` must come from [`da_hash_embedder_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn da_embedder_free(embedder: *mut DaEmbedder) {
    if !embedder.is_null() {
        drop(Box::from_raw(embedder));
    }
}

/// Writes the unit-length embedding of `text` into `out[0..dim]`.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must have room for `dim` floats.
#[no_mangle]
pub unsafe extern "C" fn da_embedder_embed(
    embedder: *const DaEmbedder,
    text: *const c_char,
    out: *mut f32,
    dim: usize,
) -> DaStatus {
    guard(|| {
        let e = embedder.as_ref().ok_or_else(|| null("embedder"))?;
        let text = str_arg(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if dim != e.dim {
            return Err((DaStatus::InvalidArgument, format!("buffer holds {dim} floats, embedder emits {}", e.dim)));
        }
        let v = hash_embed(text, e.dim, e.seed).map_err(core)?;
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(v.values());
        Ok(())
    })
}

/// # Safety
/// `out` must be valid; free the handle with [`da_store_free`].
#[no_mangle]
pub unsafe extern "C" fn da_store_new(dim: usize, out: *mut *mut DaStore) -> DaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if dim == 0 {
            return Err((DaStatus::InvalidArgument, "dimension must be positive".into()));
        }
        *out = Box::into_raw(Box::new(DaStore {
            inner: VectorStore::new(dim),
        }));
        Ok(())
    })
}

/// Loads a store written by [`da_store_persist`] (or the CLI's index stage).
///
/// # Safety
/// `dir` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn da_store_load(dir: *const c_char, out: *mut *mut DaStore) -> DaStatus {
    guard(|| {
        let dir = PathBuf::from(str_arg(dir, "dir")?);
        let out = out_arg(out, "out")?;
        let inner = VectorStore::load(&dir).map_err(core)?;
        *out = Box::into_raw(Box::new(DaStore { inner }));
        Ok(())
    })
}

/// # Safety
/// `store` must be a live handle; `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn da_store_persist(store: *const DaStore, dir: *const c_char) -> DaStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| null("store"))?;
        let dir = PathBuf::from(str_arg(dir, "dir")?);
        s.inner.persist(&dir).map_err(core)
    })
}

/// # Safety
/// `store` must come from a `da_store_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn da_store_free(store: *mut DaStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Number of entries; 0 for a null handle.
///
/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn da_store_len(store: *const DaStore) -> usize {
    store.as_ref().map_or(0, |s| s.inner.len())
}

/// Adds an original-document vector. Values are stored as given; search
/// scores are cosines, so they need not be normalized.
///
/// # Safety
/// `doc_id` must be NUL-terminated and `values` must hold `dim` floats.
#[no_mangle]
pub unsafe extern "C" fn da_store_add_document(
    store: *mut DaStore,
    doc_id: *const c_char,
    values: *const f32,
    dim: usize,
) -> DaStatus {
    guard(|| {
        let s = store.as_mut().ok_or_else(|| null("store"))?;
        let doc_id = str_arg(doc_id, "doc_id")?;
        let values = slice_arg(values, dim, "values")?;
        s.inner
            .insert(VectorEntry::original(doc_id, Embedding::new(values.to_vec())))
            .map_err(core)
    })
}

/// Exact top-`k` search. Writes up to `k` hits, best first, and their number
/// to `out_len`. `hits` must have room for `k` entries.
///
/// # Safety
/// `query` must hold `dim` floats, `hits` room for `k` [`DaHit`]s.
#[no_mangle]
pub unsafe extern "C" fn da_store_search(
    store: *const DaStore,
    query: *const f32,
    dim: usize,
    k: usize,
    hits: *mut DaHit,
    out_len: *mut usize,
) -> DaStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| null("store"))?;
        let query = slice_arg(query, dim, "query")?;
        let out_len = out_arg(out_len, "out_len")?;
        if hits.is_null() {
            return Err(null("hits"));
        }
        let found = s.inner.search(&Embedding::new(query.to_vec()), k).map_err(core)?;
        let index: std::collections::HashMap<&str, usize> = s
            .inner
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| (e.vector_id.as_str(), i))
            .collect();
        let out = std::slice::from_raw_parts_mut(hits, k);
        for (slot, h) in out.iter_mut().zip(&found) {
            *slot = DaHit {
                entry: index[h.vector_id.as_str()] as u64,
                score: h.score,
            };
        }
        *out_len = found.len();
        Ok(())
    })
}

/// Copies the document id of entry `entry` into `buf` with a trailing NUL.
/// `needed` always receives the required buffer size; a short buffer gives
/// [`DaStatus::BufferTooSmall`].
///
/// # Safety
/// `buf` must have room for `cap` bytes (or be null with `cap == 0`).
#[no_mangle]
pub unsafe extern "C" fn da_store_doc_id(
    store: *const DaStore,
    entry: u64,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> DaStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| null("store"))?;
        let needed = out_arg(needed, "needed")?;
        let e = s
            .inner
            .entries()
            .get(entry as usize)
            .ok_or_else(|| (DaStatus::InvalidArgument, format!("no entry {entry}")))?;
        let bytes = e.doc_id.as_bytes();
        *needed = bytes.len() + 1;
        if cap < bytes.len() + 1 || buf.is_null() {
            return Err((DaStatus::BufferTooSmall, format!("doc id needs {} bytes", bytes.len() + 1)));
        }
        let dst = std::slice::from_raw_parts_mut(buf.cast::<u8>(), cap);
        dst[..bytes.len()].copy_from_slice(bytes);
        dst[bytes.len()] = 0;
        Ok(())
    })
}
