//! C ABI over the poqlab experiment runner.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns a [`PoqStatus`]; on a
//! nonzero status, [`poq_last_error`] describes the failure for the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::OnceLock;

use poqlab::error::Error;
use poqlab::experiments::{catalog, run_experiment, write_outputs, Config, Table};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    UnknownExperiment = 3,
    Config = 4,
    CapViolation = 5,
    Io = 6,
    Failed = 7,
    Panic = 8,
}

/// Experiment parameter overrides.
pub struct PoqConfig(Config);

/// Result table of one experiment run.
pub struct PoqTable {
    table: Table,
    config: Config,
    seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PoqStatus, msg: impl Into<String>) -> PoqStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> PoqStatus {
    match e {
        Error::UnknownExperiment(_) => PoqStatus::UnknownExperiment,
        Error::Config(_) | Error::Parse { .. } => PoqStatus::Config,
        Error::CapViolation(_) | Error::LayoutTooLarge { .. } | Error::FamilyTooLarge { .. } => PoqStatus::CapViolation,
        Error::Io(_) => PoqStatus::Io,
        _ => PoqStatus::Failed,
    }
}

fn guard(f: impl FnOnce() -> PoqStatus) -> PoqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(PoqStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, PoqStatus> {
    if p.is_null() {
        return Err(fail(PoqStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PoqStatus::InvalidUtf8, "argument is not UTF-8"))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn poq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Empty configuration (all defaults).
#[no_mangle]
pub extern "C" fn poq_config_new() -> *mut PoqConfig {
    Box::into_raw(Box::new(PoqConfig(Config::default())))
}

/// Parses a flat `key = value` file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn poq_config_load(path: *const c_char, out: *mut *mut PoqConfig) -> PoqStatus {
    guard(|| {
        if out.is_null() {
            return fail(PoqStatus::NullPointer, "null output pointer");
        }
        let path = match text(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Config::load(Path::new(path)) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(PoqConfig(c)));
                PoqStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Sets one override.
///
/// # Safety
/// `config` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn poq_config_set(config: *mut PoqConfig, key: *const c_char, value: *const c_char) -> PoqStatus {
    guard(|| {
        let Some(cfg) = config.as_mut() else {
            return fail(PoqStatus::NullPointer, "null config");
        };
        match (text(key), text(value)) {
            (Ok(k), Ok(v)) => {
                cfg.0.set(k, v);
                PoqStatus::Ok
            }
            (Err(s), _) | (_, Err(s)) => s,
        }
    })
}

/// # Safety
/// `config` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn poq_config_free(config: *mut PoqConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

fn names() -> &'static [CString] {
    static NAMES: OnceLock<Vec<CString>> = OnceLock::new();
    NAMES.get_or_init(|| catalog().iter().map(|e| CString::new(e.name).expect("plain name")).collect())
}

/// Number of catalog entries.
#[no_mangle]
pub extern "C" fn poq_experiment_count() -> usize {
    catalog().len()
}

/// Name of catalog entry `i` (static storage), or null past the end.
#[no_mangle]
pub extern "C" fn poq_experiment_name(i: usize) -> *const c_char {
    names().get(i).map_or(ptr::null(), |c| c.as_ptr())
}

/// Runs `name` with `config` (null for defaults) and stores the table in `*out`.
///
/// # Safety
/// `name` must be NUL-terminated, `config` null or from this library, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn poq_run(
    name: *const c_char,
    config: *const PoqConfig,
    seed: u64,
    out: *mut *mut PoqTable,
) -> PoqStatus {
    guard(|| {
        if out.is_null() {
            return fail(PoqStatus::NullPointer, "null output pointer");
        }
        let name = match text(name) {
            Ok(n) => n,
            Err(s) => return s,
        };
        let config = config.as_ref().map_or_else(Config::default, |c| c.0.clone());
        match run_experiment(name, &config, seed) {
            Ok(table) => {
                *out = Box::into_raw(Box::new(PoqTable { table, config, seed }));
                PoqStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `table` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn poq_table_free(table: *mut PoqTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Row count; 0 for null.
///
/// # Safety
/// `table` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn poq_table_rows(table: *const PoqTable) -> usize {
    table.as_ref().map_or(0, |t| t.table.rows.len())
}

/// Rows failing an exact check.
///
/// # Safety
/// `table` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn poq_table_hard_failures(table: *const PoqTable) -> usize {
    table.as_ref().map_or(0, |t| t.table.hard_failures())
}

/// Rows outside their 3σ band.
///
/// # Safety
/// `table` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn poq_table_statistical_failures(table: *const PoqTable) -> usize {
    table.as_ref().map_or(0, |t| t.table.statistical_failures())
}

/// The table as CSV; release with [`poq_string_free`]. Null on a null table.
///
/// # Safety
/// `table` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn poq_table_csv(table: *const PoqTable) -> *mut c_char {
    table.as_ref().map_or(ptr::null_mut(), |t| {
        CString::new(t.table.to_csv()).map_or(ptr::null_mut(), CString::into_raw)
    })
}

/// Writes the CSV to `path` and its metadata to `path.meta`.
///
/// # Safety
/// `table` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn poq_table_write(table: *const PoqTable, path: *const c_char) -> PoqStatus {
    guard(|| {
        let Some(t) = table.as_ref() else {
            return fail(PoqStatus::NullPointer, "null table");
        };
        let path = match text(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match write_outputs(&t.table, &t.config, t.seed, Path::new(path)) {
            Ok(()) => PoqStatus::Ok,
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be null or come from [`poq_table_csv`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn poq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
