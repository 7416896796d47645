//! C ABI over `dlnlab`.
//!
//! Every fallible call returns a [`DlnStatus`]; on failure a message is kept
//! per thread and can be copied out with [`dln_last_error`]. Handles are
//! opaque and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dlnlab::dataset::{self, Dataset};
use dlnlab::metrics;
use dlnlab::network::{self, Activation, Architecture, InitMode, Network};
use dlnlab::training::{self, TrainConfig};
use dlnlab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    Numerical = 4,
    Diverged = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlnActivation {
    Linear = 0,
    Relu = 1,
}

pub struct DlnDataset(Dataset);
pub struct DlnNetwork(Network);

pub struct DlnTrainResult {
    net: Network,
    final_loss: f64,
    iters: usize,
    converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> DlnStatus {
    match err {
        Error::Stage { source, .. } => status_of(source),
        Error::Dimension { .. } | Error::Layout { .. } | Error::Domain(_) => DlnStatus::InvalidArgument,
        Error::Parse { .. } | Error::UnknownKey { .. } | Error::Unsupported(_) => DlnStatus::InvalidArgument,
        Error::Precondition(_) | Error::AuditUnsupported { .. } => DlnStatus::Precondition,
        Error::Divergence { .. } => DlnStatus::Diverged,
        Error::Io(_) | Error::Json(_) | Error::Format(_) => DlnStatus::Io,
        _ => DlnStatus::Numerical,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), (DlnStatus, String)>>(f: F) -> DlnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DlnStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DlnStatus::Panic
        }
    }
}

fn lift<T>(r: dlnlab::Result<T>) -> Result<T, (DlnStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (DlnStatus, String) {
    (DlnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (DlnStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), (DlnStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dln_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Generate a near-orthonormal dataset with `k` classes of `n` samples in
/// dimension `d`. `noise` is the Frobenius norm of the perturbation.
///
/// # Safety
/// `out` must be valid for a single pointer write.
#[no_mangle]
pub unsafe extern "C" fn dln_dataset_generate(
    d: usize,
    k: usize,
    n: usize,
    seed: u64,
    noise: f64,
    out: *mut *mut DlnDataset,
) -> DlnStatus {
    guard(|| {
        let ds = lift(dataset::generate_with_noise(d, k, n, seed, noise))?;
        emit(out, DlnDataset(ds))
    })
}

/// Measured near-orthonormality level of a dataset.
///
/// # Safety
/// `ds` must be a live dataset handle; `theta` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dln_dataset_theta(ds: *const DlnDataset, theta: *mut f64) -> DlnStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        if theta.is_null() {
            return Err(null("theta"));
        }
        *theta = dataset::measure_theta(&ds.0).theta_hat;
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from [`dln_dataset_generate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dln_dataset_free(ds: *mut DlnDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Orthogonal initialization with scale `xi`.
///
/// # Safety
/// `out` must be valid for a single pointer write.
#[no_mangle]
pub unsafe extern "C" fn dln_network_init(
    layers: usize,
    width: usize,
    classes: usize,
    activation: DlnActivation,
    xi: f64,
    seed: u64,
    out: *mut *mut DlnNetwork,
) -> DlnStatus {
    guard(|| {
        let act = match activation {
            DlnActivation::Linear => Activation::Linear,
            DlnActivation::Relu => Activation::Relu,
        };
        let arch = lift(Architecture::new(layers, width, classes, act))?;
        let net = lift(network::init(arch, InitMode::Orthogonal, xi, seed))?;
        emit(out, DlnNetwork(net))
    })
}

/// # Safety
/// `net` must be null or a handle from [`dln_network_init`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dln_network_free(net: *mut DlnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Full-batch gradient descent from `net` (left untouched) on `ds`.
///
/// # Safety
/// `net` and `ds` must be live handles; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dln_train(
    net: *const DlnNetwork,
    ds: *const DlnDataset,
    eta: f64,
    tol: f64,
    max_iters: usize,
    out: *mut *mut DlnTrainResult,
) -> DlnStatus {
    guard(|| {
        let net = deref(net, "network")?;
        let ds = deref(ds, "dataset")?;
        let cfg = TrainConfig {
            eta,
            tol,
            max_iters,
            ..TrainConfig::default()
        };
        let res = lift(training::train(net.0.clone(), &ds.0, &cfg))?;
        emit(
            out,
            DlnTrainResult {
                net: res.net,
                final_loss: res.final_loss,
                iters: res.iters,
                converged: res.converged,
            },
        )
    })
}

/// # Safety
/// `res` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn dln_result_final_loss(res: *const DlnTrainResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.final_loss)
}

/// # Safety
/// `res` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn dln_result_iters(res: *const DlnTrainResult) -> usize {
    res.as_ref().map_or(0, |r| r.iters)
}

/// # Safety
/// `res` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn dln_result_converged(res: *const DlnTrainResult) -> bool {
    res.as_ref().is_some_and(|r| r.converged)
}

/// Per-layer compression and discrimination of the trained network on `ds`.
/// `compression` and `discrimination` must each hold `capacity` doubles;
/// `layers_out` receives the number of layers (L). If `capacity < L`,
/// nothing is written and `BufferTooSmall` is returned.
///
/// # Safety
/// Pointers must be live handles / valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn dln_result_metrics(
    res: *const DlnTrainResult,
    ds: *const DlnDataset,
    compression: *mut f64,
    discrimination: *mut f64,
    capacity: usize,
    layers_out: *mut usize,
) -> DlnStatus {
    guard(|| {
        let res = deref(res, "result")?;
        let ds = deref(ds, "dataset")?;
        if compression.is_null() || discrimination.is_null() || layers_out.is_null() {
            return Err(null("output buffer"));
        }
        let rows = lift(metrics::layer_sweep(&res.net, &ds.0))?;
        *layers_out = rows.len();
        if capacity < rows.len() {
            return Err((
                DlnStatus::BufferTooSmall,
                format!("need {} entries, got {capacity}", rows.len()),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            *compression.add(i) = row.compression;
            *discrimination.add(i) = row.discrimination;
        }
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a handle from [`dln_train`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dln_result_free(res: *mut DlnTrainResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
