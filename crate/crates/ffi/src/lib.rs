//! C interface to `sicnet`.
//!
//! Datasets and models cross the boundary as opaque handles created by
//! `*_generate`, `*_build` or `*_read` and released with the matching
//! `*_free`. Every fallible call returns a [`SicStatus`]; on failure a
//! message for the calling thread is available from
//! [`sic_last_error_message`]. Complex samples are exchanged as interleaved
//! `(re, im)` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use sicnet::cxnn::Role;
use sicnet::dataset::{generate, read_dataset, write_dataset, Dataset, GenerationRequest, SystemKind, Taxonomy};
use sicnet::models::{adapt, evaluate, fit, memory_poly_fit, read_model, write_model, Model, ModelKind, ModelSpec, TrainConfig};
use sicnet::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Format = 4,
    Io = 5,
    Numeric = 6,
    Divergence = 7,
    Unsupported = 8,
    Calibration = 9,
    Config = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Opaque dataset handle.
pub struct SicDataset(Dataset);

/// Opaque model handle.
pub struct SicModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SicStatus {
    match e {
        Error::Shape(_) => SicStatus::Shape,
        Error::InvalidArgument(_) | Error::Degenerate(_) => SicStatus::InvalidArgument,
        Error::Calibration { .. } | Error::Generation { .. } => SicStatus::Calibration,
        Error::Format { .. } => SicStatus::Format,
        Error::Divergence { .. } => SicStatus::Divergence,
        Error::Numeric(_) => SicStatus::Numeric,
        Error::Unsupported(_) => SicStatus::Unsupported,
        Error::Io { .. } => SicStatus::Io,
        Error::Config(_) => SicStatus::Config,
    }
}

struct Fail(SicStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SicStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SicStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SicStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SicStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SicStatus::InvalidArgument, "path is not utf-8".into()))?;
    Ok(PathBuf::from(s))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(SicStatus::InvalidArgument, msg.into())
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// including the terminator, 0 when there is no message.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sic_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generate a dataset. `system`: 0 Hammerstein, 1 Wiener. `taxonomy`:
/// 0 invNL+invSI, 1 invNL+varSI, 2 varNL+varSI.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn sic_dataset_generate(
    system: u8,
    taxonomy: u8,
    si_sdr0_db: f64,
    master_seed: u64,
    system_seed: u64,
    out: *mut *mut SicDataset,
) -> SicStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let system = SystemKind::from_code(system).ok_or_else(|| invalid(format!("unknown system code {system}")))?;
        let taxonomy =
            Taxonomy::from_code(taxonomy).ok_or_else(|| invalid(format!("unknown taxonomy code {taxonomy}")))?;
        let req = GenerationRequest::new(system, taxonomy, si_sdr0_db, master_seed).with_system_seed(system_seed);
        *out = Box::into_raw(Box::new(SicDataset(generate(&req)?)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sic_dataset_read(path: *const c_char, out: *mut *mut SicDataset) -> SicStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(SicDataset(read_dataset(&path_arg(path)?)?)));
        Ok(())
    })
}

/// Write the dataset and its sidecar description.
///
/// # Safety
/// `ds` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sic_dataset_write(ds: *const SicDataset, path: *const c_char) -> SicStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        write_dataset(&ds.0, &path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle and the out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn sic_dataset_shape(ds: *const SicDataset, records: *mut usize, samples: *mut usize) -> SicStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        *deref_mut(records, "records")? = ds.0.records.len();
        *deref_mut(samples, "samples")? = ds.0.samples_per_record();
        Ok(())
    })
}

/// Copy the input (`output == 0`) or output signal of one record into
/// `buf` as `samples` interleaved pairs, `2 * samples` doubles.
///
/// # Safety
/// `ds` must be a live handle and `buf` hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sic_dataset_copy_signal(
    ds: *const SicDataset,
    record: usize,
    output: i32,
    buf: *mut f64,
    capacity: usize,
) -> SicStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        let rec = ds
            .0
            .records
            .get(record)
            .ok_or_else(|| invalid(format!("record {record} out of range")))?;
        let sig = if output != 0 { &rec.output } else { &rec.input };
        let s = sig.samples();
        if capacity < 2 * s.len() {
            return Err(Fail(
                SicStatus::BufferTooSmall,
                format!("need {} doubles, got {capacity}", 2 * s.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, 2 * s.len());
        for (d, v) in dst.chunks_exact_mut(2).zip(s) {
            d[0] = v.re;
            d[1] = v.im;
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sic_dataset_free(ds: *mut SicDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Build a neural model. `kind`: 0 global, 1 adaptive, 2 parallel.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sic_model_build(
    kind: u8,
    nonlinear_order: usize,
    linear_order: usize,
    num_signals: usize,
    init_seed: u64,
    out: *mut *mut SicModel,
) -> SicStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let kind = ModelKind::from_code(kind).ok_or_else(|| invalid(format!("unknown model kind {kind}")))?;
        let spec = ModelSpec::new(kind)
            .with_orders(nonlinear_order, linear_order)
            .with_signals(num_signals)
            .with_seed(init_seed);
        *out = Box::into_raw(Box::new(SicModel(Model::build(spec)?)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sic_model_read(path: *const c_char, out: *mut *mut SicModel) -> SicStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(SicModel(read_model(&path_arg(path)?)?)));
        Ok(())
    })
}

/// Write the snapshot and its parameter manifest.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sic_model_write(model: *const SicModel, path: *const c_char) -> SicStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write_model(&m.0, &path_arg(path)?)?;
        Ok(())
    })
}

/// Complex weight count; `role` -1 for all, 0 shared, 1 adaptive.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sic_model_weight_count(model: *const SicModel, role: i32, out: *mut usize) -> SicStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let role = match role {
            -1 => None,
            r => Some(
                u8::try_from(r)
                    .ok()
                    .and_then(Role::from_code)
                    .ok_or_else(|| invalid(format!("unknown role {r}")))?,
            ),
        };
        *deref_mut(out, "out")? = m.0.weight_count(role);
        Ok(())
    })
}

fn train_config(epochs: usize, lr: f64, log_every: usize) -> TrainConfig {
    TrainConfig { epochs, lr, log_every }
}

/// Full-batch training; `final_db` receives the last training MSE in dB.
///
/// # Safety
/// Handles must be live and `final_db` valid.
#[no_mangle]
pub unsafe extern "C" fn sic_model_fit(
    model: *mut SicModel,
    ds: *const SicDataset,
    epochs: usize,
    lr: f64,
    log_every: usize,
    final_db: *mut f64,
) -> SicStatus {
    guard(|| {
        let m = deref_mut(model, "model")?;
        let ds = deref(ds, "dataset")?;
        let out = deref_mut(final_db, "final_db")?;
        let trace = fit(&mut m.0, &ds.0, &train_config(epochs, lr, log_every))?;
        *out = trace.final_train().unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Test-time adaptation with shared weights frozen; `final_db` receives
/// the last test MSE in dB.
///
/// # Safety
/// Handles must be live and `final_db` valid.
#[no_mangle]
pub unsafe extern "C" fn sic_model_adapt(
    model: *mut SicModel,
    ds: *const SicDataset,
    epochs: usize,
    lr: f64,
    log_every: usize,
    final_db: *mut f64,
) -> SicStatus {
    guard(|| {
        let m = deref_mut(model, "model")?;
        let ds = deref(ds, "dataset")?;
        let out = deref_mut(final_db, "final_db")?;
        let trace = adapt(&mut m.0, &ds.0, &train_config(epochs, lr, log_every))?;
        *out = trace.final_test().unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// Handles must be live and `out_db` valid.
#[no_mangle]
pub unsafe extern "C" fn sic_model_evaluate(model: *const SicModel, ds: *const SicDataset, out_db: *mut f64) -> SicStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let ds = deref(ds, "dataset")?;
        *deref_mut(out_db, "out_db")? = evaluate(&m.0, &ds.0)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sic_model_free(model: *mut SicModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Least-squares memory polynomial; `order` 1 gives the linear FIR.
///
/// # Safety
/// `ds` must be a live handle and `out_db` valid.
#[no_mangle]
pub unsafe extern "C" fn sic_memory_poly_fit(ds: *const SicDataset, order: usize, memory: usize, out_db: *mut f64) -> SicStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        *deref_mut(out_db, "out_db")? = memory_poly_fit(&ds.0, order, memory)?.mse_db;
        Ok(())
    })
}
