//! C ABI over the outlink library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns an
//! [`OutlinkStatus`]; on failure [`outlink_last_error`] describes the cause.
//! Strings are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use outlink::ingest::{load_series_dir, IngestOptions};
use outlink::pipeline::{run_experiment, train_repetition, Dataset, ExperimentConfig, ModelBundle};
use outlink::synthetic::{generate, GeneratorConfig};
use outlink::{CrawlSeries, Error};

/// Result of every fallible call. Codes 2 to 4 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlinkStatus {
    Ok = 0,
    /// A required pointer was NULL or a string was not UTF-8.
    NullArgument = 1,
    /// Invalid argument, config or schema.
    InvalidArgument = 2,
    /// Input data or I/O failure.
    DataError = 3,
    NonConvergence = 4,
    /// Output buffer too small; the required length is still reported.
    BufferTooSmall = 5,
    /// A panic was caught at the boundary.
    Internal = 6,
}

/// A loaded or generated crawl series.
pub struct OutlinkSeries {
    inner: CrawlSeries,
}

/// A series with its link history and neighbour index.
pub struct OutlinkDataset {
    inner: Dataset,
}

/// A trained model bundle.
pub struct OutlinkModel {
    inner: ModelBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(OutlinkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            2 => OutlinkStatus::InvalidArgument,
            4 => OutlinkStatus::NonConvergence,
            _ => OutlinkStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OutlinkStatus::NullArgument, format!("{what} is NULL"))
}

/// Runs `f`, records any failure and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OutlinkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OutlinkStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside outlink");
            OutlinkStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(OutlinkStatus::NullArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn outlink_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn outlink_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads every `crawl_*.jsonl` file of `dir`.
///
/// # Safety
/// `dir` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn outlink_series_load(dir: *const c_char, out: *mut *mut OutlinkSeries) -> OutlinkStatus {
    guard(|| {
        let dir = text(dir, "dir")?;
        let (inner, _) = load_series_dir(Path::new(dir), &IngestOptions::default())?;
        put(out, OutlinkSeries { inner })
    })
}

/// Generates a synthetic series from a generator config in TOML; NULL
/// selects the defaults.
///
/// # Safety
/// `config_toml` must be NULL or a valid C string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn outlink_series_generate(
    config_toml: *const c_char,
    out: *mut *mut OutlinkSeries,
) -> OutlinkStatus {
    guard(|| {
        let cfg = if config_toml.is_null() {
            GeneratorConfig::default()
        } else {
            GeneratorConfig::from_toml(text(config_toml, "config")?)?
        };
        let (inner, _) = generate(&cfg)?;
        put(out, OutlinkSeries { inner })
    })
}

/// # Safety
/// `series` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn outlink_series_shape(
    series: *const OutlinkSeries,
    n_pages: *mut usize,
    n_crawls: *mut usize,
) -> OutlinkStatus {
    guard(|| {
        let s = &handle(series, "series")?.inner;
        if n_pages.is_null() || n_crawls.is_null() {
            return Err(null("output pointer"));
        }
        *n_pages = s.n_pages();
        *n_crawls = s.n_crawls();
        Ok(())
    })
}

/// # Safety
/// `series` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn outlink_series_free(series: *mut OutlinkSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Builds a dataset over a copy of `series` with `neighbors` related pages.
///
/// # Safety
/// `series` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn outlink_dataset_new(
    series: *const OutlinkSeries,
    neighbors: usize,
    out: *mut *mut OutlinkDataset,
) -> OutlinkStatus {
    guard(|| {
        let s = handle(series, "series")?.inner.clone();
        put(out, OutlinkDataset {
            inner: Dataset::new(s, neighbors)?,
        })
    })
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn outlink_dataset_free(dataset: *mut OutlinkDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Trains the model of an experiment config (TOML) on its first split.
///
/// # Safety
/// `dataset` must be a live handle, `config_toml` a valid C string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn outlink_model_train(
    dataset: *const OutlinkDataset,
    config_toml: *const c_char,
    out: *mut *mut OutlinkModel,
) -> OutlinkStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.inner;
        let cfg = ExperimentConfig::from_toml(text(config_toml, "config")?)?;
        let inner = train_repetition(ds, &cfg, &cfg.features, 0)?;
        put(out, OutlinkModel { inner })
    })
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn outlink_model_read(path: *const c_char, out: *mut *mut OutlinkModel) -> OutlinkStatus {
    guard(|| {
        let inner = ModelBundle::read(Path::new(text(path, "path")?))?;
        put(out, OutlinkModel { inner })
    })
}

/// # Safety
/// `model` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn outlink_model_write(model: *const OutlinkModel, path: *const c_char) -> OutlinkStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        m.write(Path::new(text(path, "path")?))?;
        Ok(())
    })
}

/// Predicts every page of `dataset` into `values` (length `capacity`).
/// `written` receives the number of pages even when the buffer is too small.
///
/// # Safety
/// Handles must be live; `values` must hold `capacity` doubles (or be NULL
/// with `capacity` 0); `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn outlink_model_predict(
    model: *const OutlinkModel,
    dataset: *const OutlinkDataset,
    values: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> OutlinkStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let ds = &handle(dataset, "dataset")?.inner;
        if written.is_null() {
            return Err(null("written"));
        }
        let n = ds.n_pages();
        *written = n;
        if capacity < n {
            return Err(Failure(
                OutlinkStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, need {n}"),
            ));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        let pages: Vec<usize> = (0..n).collect();
        let pred = m.predict_pages(ds, &pages)?;
        ptr::copy_nonoverlapping(pred.as_ptr(), values, n);
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn outlink_model_free(model: *mut OutlinkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs a full experiment from a TOML config, writing its artifacts.
///
/// # Safety
/// `config_toml` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn outlink_run_experiment(config_toml: *const c_char) -> OutlinkStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_toml(text(config_toml, "config")?)?;
        run_experiment(&cfg)?;
        Ok(())
    })
}
