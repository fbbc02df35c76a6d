//! C ABI over the experiment runner: opaque handles, integer status
//! codes, caller-freed strings.
//!
//! The lifecycle is parse → (optionally reseed) → run → export/query →
//! free. Every function that can fail returns an [`OhmicStatus`] and, when
//! a message pointer is supplied, a heap-allocated error string the caller
//! releases with [`ohmic_string_free`]. Handles are created and destroyed
//! here only; passing a handle to the wrong `_free` or using it after
//! free is undefined behavior, as usual for C interfaces.
//!
//! Status codes match the CLI exit codes: 0 ok, 2 config error,
//! 3 numerical-contract violation, 4 I/O failure.

use ohmic::experiment::{
    export_results, parse_config, run_experiment, ExperimentConfig, ExperimentError, RunRecord,
};
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum OhmicStatus {
    Ok = 0,
    NullArgument = 1,
    ConfigError = 2,
    NumericalError = 3,
    IoError = 4,
    Utf8Error = 5,
    NotFound = 6,
}

/// Opaque parsed configuration.
pub struct OhmicConfig {
    inner: ExperimentConfig,
}

/// Opaque run record with aggregates and output writers.
pub struct OhmicRunRecord {
    inner: RunRecord,
}

fn set_message(out: *mut *mut c_char, message: &str) {
    if out.is_null() {
        return;
    }
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    unsafe { *out = c.into_raw() };
}

fn experiment_status(e: &ExperimentError) -> OhmicStatus {
    match e {
        ExperimentError::Config(_) => OhmicStatus::ConfigError,
        ExperimentError::Io { .. } => OhmicStatus::IoError,
        _ => OhmicStatus::NumericalError,
    }
}

/// Version string of the underlying library; static, do not free.
#[no_mangle]
pub extern "C" fn ohmic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a flat key-value configuration. Returns a handle through
/// `config_out` on success; on failure writes a message listing every
/// problem.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `config_out` must be a
/// valid pointer; `message_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn ohmic_config_parse(
    text: *const c_char,
    config_out: *mut *mut OhmicConfig,
    message_out: *mut *mut c_char,
) -> OhmicStatus {
    if text.is_null() || config_out.is_null() {
        set_message(message_out, "null argument");
        return OhmicStatus::NullArgument;
    }
    let text = match CStr::from_ptr(text).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_message(message_out, "config text is not valid UTF-8");
            return OhmicStatus::Utf8Error;
        }
    };
    match parse_config(text) {
        Ok(inner) => {
            *config_out = Box::into_raw(Box::new(OhmicConfig { inner }));
            OhmicStatus::Ok
        }
        Err(errors) => {
            set_message(message_out, &errors.to_string());
            OhmicStatus::ConfigError
        }
    }
}

/// Reads a configuration file and parses it.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `config_out` must be a
/// valid pointer; `message_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn ohmic_config_load(
    path: *const c_char,
    config_out: *mut *mut OhmicConfig,
    message_out: *mut *mut c_char,
) -> OhmicStatus {
    if path.is_null() || config_out.is_null() {
        set_message(message_out, "null argument");
        return OhmicStatus::NullArgument;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p,
        Err(_) => {
            set_message(message_out, "path is not valid UTF-8");
            return OhmicStatus::Utf8Error;
        }
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            set_message(message_out, &format!("cannot read {path}: {e}"));
            return OhmicStatus::IoError;
        }
    };
    let c_text = match CString::new(text) {
        Ok(c) => c,
        Err(_) => {
            set_message(message_out, "config contains interior NUL bytes");
            return OhmicStatus::Utf8Error;
        }
    };
    ohmic_config_parse(c_text.as_ptr(), config_out, message_out)
}

/// Hash of the canonicalized config, hex, caller-freed.
///
/// # Safety
/// `config` must be a live handle from `ohmic_config_parse`/`_load`.
#[no_mangle]
pub unsafe extern "C" fn ohmic_config_hash(config: *const OhmicConfig) -> *mut c_char {
    if config.is_null() {
        return ptr::null_mut();
    }
    CString::new((*config).inner.hash())
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Replaces the config's base seed, mirroring the CLI --seed-override.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ohmic_config_set_seed(config: *mut OhmicConfig, seed: u64) {
    if let Some(config) = config.as_mut() {
        config.inner.seed_base = seed;
    }
}

/// Runs the configured experiment; `workers = 0` keeps the default pool.
///
/// # Safety
/// `config` must be a live handle; `record_out` must be a valid pointer;
/// `message_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn ohmic_run(
    config: *const OhmicConfig,
    workers: usize,
    record_out: *mut *mut OhmicRunRecord,
    message_out: *mut *mut c_char,
) -> OhmicStatus {
    if config.is_null() || record_out.is_null() {
        set_message(message_out, "null argument");
        return OhmicStatus::NullArgument;
    }
    let workers = if workers == 0 { None } else { Some(workers) };
    match run_experiment(&(*config).inner, workers) {
        Ok(inner) => {
            *record_out = Box::into_raw(Box::new(OhmicRunRecord { inner }));
            OhmicStatus::Ok
        }
        Err(e) => {
            let status = experiment_status(&e);
            set_message(message_out, &e.to_string());
            status
        }
    }
}

/// Number of named aggregate scalars on the record.
///
/// # Safety
/// `record` must be a live handle from `ohmic_run`.
#[no_mangle]
pub unsafe extern "C" fn ohmic_record_aggregate_count(record: *const OhmicRunRecord) -> usize {
    record.as_ref().map_or(0, |r| r.inner.aggregates.len())
}

/// Name of aggregate `index`, caller-freed; null when out of range.
///
/// # Safety
/// `record` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ohmic_record_aggregate_name(
    record: *const OhmicRunRecord,
    index: usize,
) -> *mut c_char {
    let Some(record) = record.as_ref() else {
        return ptr::null_mut();
    };
    match record.inner.aggregates.get(index) {
        Some((name, _, _)) => CString::new(name.as_str())
            .map(CString::into_raw)
            .unwrap_or(ptr::null_mut()),
        None => ptr::null_mut(),
    }
}

/// Looks up an aggregate scalar by name; writes mean and standard error.
///
/// # Safety
/// `record` and `name` must be valid; out pointers may be null when the
/// caller does not need that component.
#[no_mangle]
pub unsafe extern "C" fn ohmic_record_scalar(
    record: *const OhmicRunRecord,
    name: *const c_char,
    mean_out: *mut f64,
    stderr_out: *mut f64,
) -> OhmicStatus {
    if record.is_null() || name.is_null() {
        return OhmicStatus::NullArgument;
    }
    let Ok(name) = CStr::from_ptr(name).to_str() else {
        return OhmicStatus::Utf8Error;
    };
    match (*record)
        .inner
        .aggregates
        .iter()
        .find(|(n, _, _)| n == name)
    {
        Some((_, mean, stderr)) => {
            if !mean_out.is_null() {
                *mean_out = *mean;
            }
            if !stderr_out.is_null() {
                *stderr_out = *stderr;
            }
            OhmicStatus::Ok
        }
        None => OhmicStatus::NotFound,
    }
}

/// Config hash the record was produced from, hex, caller-freed.
///
/// # Safety
/// `record` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ohmic_record_hash(record: *const OhmicRunRecord) -> *mut c_char {
    record.as_ref().map_or(ptr::null_mut(), |r| {
        CString::new(r.inner.config_hash.as_str())
            .map(CString::into_raw)
            .unwrap_or(ptr::null_mut())
    })
}

/// Writes summary, histograms and series files into `dir`.
///
/// # Safety
/// `record` must be a live handle, `dir` a valid NUL-terminated path;
/// `message_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn ohmic_record_export(
    record: *const OhmicRunRecord,
    dir: *const c_char,
    message_out: *mut *mut c_char,
) -> OhmicStatus {
    if record.is_null() || dir.is_null() {
        set_message(message_out, "null argument");
        return OhmicStatus::NullArgument;
    }
    let Ok(dir) = CStr::from_ptr(dir).to_str() else {
        set_message(message_out, "path is not valid UTF-8");
        return OhmicStatus::Utf8Error;
    };
    match export_results(&(*record).inner, Path::new(dir)) {
        Ok(_) => OhmicStatus::Ok,
        Err(e) => {
            let status = experiment_status(&e);
            set_message(message_out, &e.to_string());
            status
        }
    }
}

/// Releases a config handle.
///
/// # Safety
/// `config` must be a handle from this library, not yet freed; null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn ohmic_config_free(config: *mut OhmicConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Releases a run record.
///
/// # Safety
/// `record` must be a handle from this library, not yet freed; null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn ohmic_record_free(record: *mut OhmicRunRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// Releases any string returned by this library.
///
/// # Safety
/// `s` must originate from this library and not have been freed; null is
/// a no-op.
#[no_mangle]
pub unsafe extern "C" fn ohmic_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    unsafe fn take_string(ptr: *mut c_char) -> String {
        assert!(!ptr.is_null());
        let s = CStr::from_ptr(ptr).to_string_lossy().into_owned();
        ohmic_string_free(ptr);
        s
    }

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { CStr::from_ptr(ohmic_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn parse_run_query_export_lifecycle() {
        let text =
            CString::new("kind = measure\nsites = 6\nn_realizations = 2\n").unwrap();
        let mut config: *mut OhmicConfig = ptr::null_mut();
        let mut message: *mut c_char = ptr::null_mut();
        let status = unsafe { ohmic_config_parse(text.as_ptr(), &mut config, &mut message) };
        assert!(matches!(status, OhmicStatus::Ok));
        assert!(message.is_null());

        unsafe { ohmic_config_set_seed(config, 99) };
        let hash = unsafe { take_string(ohmic_config_hash(config)) };
        assert_eq!(hash.len(), 16);

        let mut record: *mut OhmicRunRecord = ptr::null_mut();
        let status = unsafe { ohmic_run(config, 2, &mut record, &mut message) };
        assert!(matches!(status, OhmicStatus::Ok), "run failed");

        assert!(unsafe { ohmic_record_aggregate_count(record) } > 0);
        let name = unsafe { take_string(ohmic_record_aggregate_name(record, 0)) };
        assert!(!name.is_empty());

        let mut mean = f64::NAN;
        let key = CString::new("mu_total_mass").unwrap();
        let status =
            unsafe { ohmic_record_scalar(record, key.as_ptr(), &mut mean, ptr::null_mut()) };
        assert!(matches!(status, OhmicStatus::Ok));
        assert!(mean > 0.0);

        let dir = std::env::temp_dir().join(format!("ohmic-ffi-{}", std::process::id()));
        let dir_c = CString::new(dir.to_str().unwrap()).unwrap();
        let status = unsafe { ohmic_record_export(record, dir_c.as_ptr(), &mut message) };
        assert!(matches!(status, OhmicStatus::Ok));
        assert!(dir.join("summary.txt").exists());
        std::fs::remove_dir_all(&dir).ok();

        unsafe {
            ohmic_record_free(record);
            ohmic_config_free(config);
        }
    }

    #[test]
    fn config_errors_come_back_as_messages() {
        let text = CString::new("kind = bogus\nlambda = -1\n").unwrap();
        let mut config: *mut OhmicConfig = ptr::null_mut();
        let mut message: *mut c_char = ptr::null_mut();
        let status = unsafe { ohmic_config_parse(text.as_ptr(), &mut config, &mut message) };
        assert!(matches!(status, OhmicStatus::ConfigError));
        assert!(config.is_null());
        let text = unsafe { take_string(message) };
        assert!(text.contains("lambda"));
        assert!(text.contains("kind"));
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut config: *mut OhmicConfig = ptr::null_mut();
        let status =
            unsafe { ohmic_config_parse(ptr::null(), &mut config, ptr::null_mut()) };
        assert!(matches!(status, OhmicStatus::NullArgument));
        let status = unsafe { ohmic_run(ptr::null(), 0, ptr::null_mut(), ptr::null_mut()) };
        assert!(matches!(status, OhmicStatus::NullArgument));
        unsafe {
            ohmic_config_free(ptr::null_mut());
            ohmic_record_free(ptr::null_mut());
            ohmic_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn missing_scalar_reports_not_found() {
        let text = CString::new("kind = measure\nsites = 5\n").unwrap();
        let mut config: *mut OhmicConfig = ptr::null_mut();
        unsafe { ohmic_config_parse(text.as_ptr(), &mut config, ptr::null_mut()) };
        let mut record: *mut OhmicRunRecord = ptr::null_mut();
        unsafe { ohmic_run(config, 1, &mut record, ptr::null_mut()) };
        let key = CString::new("no_such_scalar").unwrap();
        let status = unsafe {
            ohmic_record_scalar(record, key.as_ptr(), ptr::null_mut(), ptr::null_mut())
        };
        assert!(matches!(status, OhmicStatus::NotFound));
        unsafe {
            ohmic_record_free(record);
            ohmic_config_free(config);
        }
    }
}
