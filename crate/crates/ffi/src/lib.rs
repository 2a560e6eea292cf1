//! C ABI over the unmixing pipeline: opaque handles, integer status codes,
//! and a thread-local last-error message. The header in `include/hmua.h` is
//! generated from this file at build time.
//!
//! Every entry point catches panics and turns them into
//! [`HmuaStatus::Panic`], so no unwinding ever crosses the FFI boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hmua_core::pipeline::{self, PipelineConfig, UnmixOutput};
use hmua_core::types::AbundanceMap;
use hmua_core::{io, synth, Error};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmuaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    IoError = 4,
    ParseError = 5,
    DimensionMismatch = 6,
    NumericError = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> HmuaStatus {
    match err {
        Error::Io { .. } | Error::SizeMismatch { .. } => HmuaStatus::IoError,
        Error::Parse(_) | Error::RaggedRows { .. } => HmuaStatus::ParseError,
        Error::DimensionMismatch(_) => HmuaStatus::DimensionMismatch,
        Error::NonFinite(_) | Error::ZeroSignal => HmuaStatus::NumericError,
        _ => HmuaStatus::InvalidArgument,
    }
}

fn catch(f: impl FnOnce() -> HmuaStatus) -> HmuaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            HmuaStatus::Panic
        }
    }
}

/// Cube handle. Create with [`hmua_cube_read`], release with
/// [`hmua_cube_free`].
pub struct HmuaCube(hmua_core::HyperCube);

/// Library handle. Create with [`hmua_library_read_csv`], release with
/// [`hmua_library_free`].
pub struct HmuaLibrary(hmua_core::SpectralLibrary);

/// Result handle produced by [`hmua_unmix_run`].
pub struct HmuaResult {
    output: UnmixOutput,
    diagnostics_json: CString,
}

unsafe fn cstr_to_path<'a>(ptr: *const c_char) -> Result<&'a Path, HmuaStatus> {
    if ptr.is_null() {
        set_error("null path pointer");
        return Err(HmuaStatus::NullPointer);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(HmuaStatus::InvalidUtf8)
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hmua_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the last error message of this thread into `buf` (truncating to
/// `cap - 1` bytes, always NUL-terminated). Returns the full message length.
#[no_mangle]
pub extern "C" fn hmua_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Load a cube from a JSON header and a raw band-sequential data file.
///
/// # Safety
/// `header_path` and `data_path` must be NUL-terminated strings; `out` must
/// be a valid pointer. On success `*out` owns the cube.
#[no_mangle]
pub unsafe extern "C" fn hmua_cube_read(
    header_path: *const c_char,
    data_path: *const c_char,
    out: *mut *mut HmuaCube,
) -> HmuaStatus {
    catch(|| {
        if out.is_null() {
            set_error("null output pointer");
            return HmuaStatus::NullPointer;
        }
        let header = match unsafe { cstr_to_path(header_path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        let data = match unsafe { cstr_to_path(data_path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match io::read_cube(header, data) {
            Ok(cube) => {
                unsafe { *out = Box::into_raw(Box::new(HmuaCube(cube))) };
                HmuaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Spatial and spectral dimensions of a cube.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hmua_cube_dims(
    cube: *const HmuaCube,
    rows: *mut usize,
    cols: *mut usize,
    bands: *mut usize,
) -> HmuaStatus {
    catch(|| {
        if cube.is_null() || rows.is_null() || cols.is_null() || bands.is_null() {
            set_error("null pointer");
            return HmuaStatus::NullPointer;
        }
        let cube = unsafe { &(*cube).0 };
        unsafe {
            *rows = cube.rows();
            *cols = cube.cols();
            *bands = cube.bands();
        }
        HmuaStatus::Ok
    })
}

/// Release a cube handle. Accepts NULL.
///
/// # Safety
/// `cube` must come from [`hmua_cube_read`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hmua_cube_free(cube: *mut HmuaCube) {
    if !cube.is_null() {
        drop(unsafe { Box::from_raw(cube) });
    }
}

/// Load a spectral library from CSV (name row, then one row per band).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hmua_library_read_csv(
    path: *const c_char,
    out: *mut *mut HmuaLibrary,
) -> HmuaStatus {
    catch(|| {
        if out.is_null() {
            set_error("null output pointer");
            return HmuaStatus::NullPointer;
        }
        let path = match unsafe { cstr_to_path(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match io::read_library(path) {
            Ok(lib) => {
                unsafe { *out = Box::into_raw(Box::new(HmuaLibrary(lib))) };
                HmuaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Band and signature counts of a library.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hmua_library_dims(
    lib: *const HmuaLibrary,
    bands: *mut usize,
    count: *mut usize,
) -> HmuaStatus {
    catch(|| {
        if lib.is_null() || bands.is_null() || count.is_null() {
            set_error("null pointer");
            return HmuaStatus::NullPointer;
        }
        let lib = unsafe { &(*lib).0 };
        unsafe {
            *bands = lib.bands();
            *count = lib.count();
        }
        HmuaStatus::Ok
    })
}

/// Release a library handle. Accepts NULL.
///
/// # Safety
/// `lib` must come from [`hmua_library_read_csv`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hmua_library_free(lib: *mut HmuaLibrary) {
    if !lib.is_null() {
        drop(unsafe { Box::from_raw(lib) });
    }
}

/// Run the unmixing pipeline described by a JSON config (the same schema the
/// CLI consumes) and hand back a result handle.
///
/// # Safety
/// `cube` and `lib` must be live handles; `config_json` must be a
/// NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hmua_unmix_run(
    cube: *const HmuaCube,
    lib: *const HmuaLibrary,
    config_json: *const c_char,
    out: *mut *mut HmuaResult,
) -> HmuaStatus {
    catch(|| {
        if cube.is_null() || lib.is_null() || out.is_null() || config_json.is_null() {
            set_error("null pointer");
            return HmuaStatus::NullPointer;
        }
        let config_text = match unsafe { CStr::from_ptr(config_json) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("config is not valid UTF-8");
                return HmuaStatus::InvalidUtf8;
            }
        };
        let config: PipelineConfig = match serde_json::from_str(config_text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("config: {e}"));
                return HmuaStatus::ParseError;
            }
        };
        let cube = unsafe { &(*cube).0 };
        let lib = unsafe { &(*lib).0 };
        match pipeline::hmua_unmix(cube, lib, &config) {
            Ok(output) => {
                let diag = serde_json::to_string(&output.diagnostics).unwrap_or_default();
                let handle = HmuaResult {
                    output,
                    diagnostics_json: CString::new(diag).unwrap_or_default(),
                };
                unsafe { *out = Box::into_raw(Box::new(handle)) };
                HmuaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Shape of the estimated abundance matrix.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hmua_result_abundance_dims(
    result: *const HmuaResult,
    endmembers: *mut usize,
    pixels: *mut usize,
) -> HmuaStatus {
    catch(|| {
        if result.is_null() || endmembers.is_null() || pixels.is_null() {
            set_error("null pointer");
            return HmuaStatus::NullPointer;
        }
        let map = unsafe { &(*result).output.abundances };
        unsafe {
            *endmembers = map.endmembers();
            *pixels = map.pixels();
        }
        HmuaStatus::Ok
    })
}

/// Copy the abundance matrix into `buf` in row-major order. `len` must be
/// exactly `endmembers * pixels`.
///
/// # Safety
/// `buf` must point to at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hmua_result_abundance_copy(
    result: *const HmuaResult,
    buf: *mut f64,
    len: usize,
) -> HmuaStatus {
    catch(|| {
        if result.is_null() || buf.is_null() {
            set_error("null pointer");
            return HmuaStatus::NullPointer;
        }
        let map = unsafe { &(*result).output.abundances };
        let needed = map.endmembers() * map.pixels();
        if len != needed {
            set_error(&format!("buffer holds {len} values, need {needed}"));
            return HmuaStatus::DimensionMismatch;
        }
        let dst = unsafe { std::slice::from_raw_parts_mut(buf, len) };
        for (slot, &v) in dst.iter_mut().zip(map.data().iter()) {
            *slot = v;
        }
        HmuaStatus::Ok
    })
}

/// Run diagnostics as a JSON string owned by the result handle. Valid until
/// [`hmua_result_free`].
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hmua_result_diagnostics_json(
    result: *const HmuaResult,
) -> *const c_char {
    if result.is_null() {
        return std::ptr::null();
    }
    unsafe { (*result).diagnostics_json.as_ptr() }
}

/// Number of superpixels in the final segmentation.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hmua_result_superpixel_count(
    result: *const HmuaResult,
    count: *mut usize,
) -> HmuaStatus {
    catch(|| {
        if result.is_null() || count.is_null() {
            set_error("null pointer");
            return HmuaStatus::NullPointer;
        }
        unsafe { *count = (*result).output.segmentation.label_count() };
        HmuaStatus::Ok
    })
}

/// Release a result handle. Accepts NULL.
///
/// # Safety
/// `result` must come from [`hmua_unmix_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hmua_result_free(result: *mut HmuaResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Signal-to-reconstruction error in dB between two row-major
/// `endmembers x pixels` abundance buffers. Writes +inf for an exact match.
///
/// # Safety
/// `truth` and `estimate` must point to `endmembers * pixels` doubles each.
#[no_mangle]
pub unsafe extern "C" fn hmua_sre(
    endmembers: usize,
    pixels: usize,
    truth: *const f64,
    estimate: *const f64,
    out: *mut f64,
) -> HmuaStatus {
    catch(|| {
        if truth.is_null() || estimate.is_null() || out.is_null() {
            set_error("null pointer");
            return HmuaStatus::NullPointer;
        }
        if endmembers == 0 || pixels == 0 {
            set_error("dimensions must be positive");
            return HmuaStatus::InvalidArgument;
        }
        let len = endmembers * pixels;
        let truth = unsafe { std::slice::from_raw_parts(truth, len) };
        let estimate = unsafe { std::slice::from_raw_parts(estimate, len) };
        let to_map = |values: &[f64]| -> Result<AbundanceMap, Error> {
            AbundanceMap::new(
                ndarray_from_slice(endmembers, pixels, values),
            )
        };
        let (t, e) = match (to_map(truth), to_map(estimate)) {
            (Ok(t), Ok(e)) => (t, e),
            (Err(err), _) | (_, Err(err)) => {
                set_error(&err.to_string());
                return status_for(&err);
            }
        };
        match synth::sre(&t, &e) {
            Ok(v) => {
                unsafe { *out = v };
                HmuaStatus::Ok
            }
            Err(err) => {
                set_error(&err.to_string());
                status_for(&err)
            }
        }
    })
}

fn ndarray_from_slice(rows: usize, cols: usize, values: &[f64]) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_vec((rows, cols), values.to_vec())
        .expect("length checked by caller")
}

// ndarray comes in through hmua-core; re-declare the path for the helper.
use hmua_core::ndarray;
