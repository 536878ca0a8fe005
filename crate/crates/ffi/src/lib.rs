//! C interface to the engagement models.
//!
//! Every fallible function returns an [`RgStatus`]. On failure the message is
//! kept per thread and can be read with [`rg_last_error`]. Handles are opaque
//! and must be released with their `_free` function. Panics never cross the
//! boundary; they surface as [`RgStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rgnet::pipeline::{Pipeline, PipelineConfig, Stage, TrainedModel};
use rgnet::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    ShapeMismatch = 6,
    MissingArtifact = 7,
    Numeric = 8,
    Unsupported = 9,
    Panic = 10,
}

/// Model family of a loaded checkpoint.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgModelKind {
    Rgnet = 0,
    Newtonian = 1,
    Logreg = 2,
}

/// A trained model loaded from a checkpoint.
pub struct RgModel {
    inner: TrainedModel,
}

/// A pipeline bound to one configuration.
pub struct RgPipeline {
    inner: Pipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(RgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => RgStatus::Io,
            Error::Parse { .. } | Error::Json(_) => RgStatus::Parse,
            Error::InvalidArgument(_) => RgStatus::InvalidArgument,
            Error::ShapeMismatch { .. } => RgStatus::ShapeMismatch,
            Error::NonFinite(_) | Error::NoValidSteps => RgStatus::Numeric,
            Error::MissingArtifact { .. } => RgStatus::MissingArtifact,
        };
        Fail(status, e.to_string())
    }
}

fn fail(status: RgStatus, msg: impl Into<String>) -> Fail {
    Fail(status, msg.into())
}

/// Runs `f`, recording any error or panic for [`rg_last_error`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RgStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(RgStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RgStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(RgStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn rows_arg(p: *const f64, rows: usize, cols: usize, name: &str) -> Result<Vec<Vec<f64>>, Fail> {
    let flat = slice_arg(p, rows * cols, name)?;
    Ok(flat.chunks(cols.max(1)).take(rows).map(<[f64]>::to_vec).collect())
}

unsafe fn model_ref<'a>(m: *const RgModel) -> Result<&'a RgModel, Fail> {
    m.as_ref().ok_or_else(|| fail(RgStatus::NullPointer, "model is null"))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint written by the `train` stage.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rg_model_load(path: *const c_char, out: *mut *mut RgModel) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(RgStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let text = std::fs::read_to_string(Path::new(path)).map_err(|e| fail(RgStatus::Io, format!("{path}: {e}")))?;
        let (inner, _) = TrainedModel::from_checkpoint(&text)?;
        *out = Box::into_raw(Box::new(RgModel { inner }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`rg_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_model_free(model: *mut RgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Model family and cluster count of a loaded model.
///
/// # Safety
/// `model` must be a live handle; `kind` and `clusters` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn rg_model_info(model: *const RgModel, kind: *mut RgModelKind, clusters: *mut usize) -> RgStatus {
    guard(|| {
        let m = model_ref(model)?;
        if kind.is_null() || clusters.is_null() {
            return Err(fail(RgStatus::NullPointer, "output pointer is null"));
        }
        let (k, n) = match &m.inner {
            TrainedModel::Rgnet(r) => (RgModelKind::Rgnet, r.config.clusters),
            TrainedModel::Newton(r) => (RgModelKind::Newtonian, r.config.clusters),
            TrainedModel::LogReg(r) => (RgModelKind::Logreg, r.config.outputs),
        };
        *kind = k;
        *clusters = n;
        Ok(())
    })
}

fn rgnet_of(m: &RgModel) -> Result<&rgnet::model::Rgnet, Fail> {
    match &m.inner {
        TrainedModel::Rgnet(r) => Ok(r),
        other => Err(fail(
            RgStatus::Unsupported,
            format!("{} checkpoints do not support this call", other.kind()),
        )),
    }
}

/// Temporal prediction from a post and the windows observed so far.
///
/// `windows` holds `n_windows` rows of `window_width` values, `centers`
/// holds `n_centers` rows of `dim` values, and `y1` receives `n_centers`
/// probabilities. `tau` is the time coordinate of the step.
///
/// # Safety
/// Every pointer must reference at least the number of values stated by its
/// companion lengths.
#[no_mangle]
pub unsafe extern "C" fn rg_predict_temporal(
    model: *const RgModel,
    post: *const f64,
    post_len: usize,
    windows: *const f64,
    n_windows: usize,
    window_width: usize,
    tau: f64,
    centers: *const f64,
    n_centers: usize,
    dim: usize,
    y1: *mut f64,
    y2: *mut f64,
) -> RgStatus {
    guard(|| {
        let m = rgnet_of(model_ref(model)?)?;
        if y1.is_null() || y2.is_null() {
            return Err(fail(RgStatus::NullPointer, "output pointer is null"));
        }
        if n_centers != m.config.clusters {
            return Err(fail(
                RgStatus::ShapeMismatch,
                format!("model has {} clusters, got {n_centers} centers", m.config.clusters),
            ));
        }
        let post = slice_arg(post, post_len, "post")?;
        let windows = rows_arg(windows, n_windows, window_width, "windows")?;
        let centers = rows_arg(centers, n_centers, dim, "centers")?;
        let out = m.predict_temporal(post, &windows, tau, &centers)?;
        std::slice::from_raw_parts_mut(y1, n_centers).copy_from_slice(&out.y1);
        *y2 = out.y2;
        Ok(())
    })
}

/// One-shot attraction probability of a post; `attract` receives 1 when
/// `y3 > 0.5`.
///
/// # Safety
/// As for [`rg_predict_temporal`].
#[no_mangle]
pub unsafe extern "C" fn rg_predict_nontemporal(
    model: *const RgModel,
    post: *const f64,
    post_len: usize,
    centers: *const f64,
    n_centers: usize,
    dim: usize,
    y3: *mut f64,
    attract: *mut i32,
) -> RgStatus {
    guard(|| {
        let m = rgnet_of(model_ref(model)?)?;
        if y3.is_null() || attract.is_null() {
            return Err(fail(RgStatus::NullPointer, "output pointer is null"));
        }
        let post = slice_arg(post, post_len, "post")?;
        let centers = rows_arg(centers, n_centers, dim, "centers")?;
        let (p, yes) = m.predict_nontemporal(post, &centers)?;
        *y3 = p;
        *attract = i32::from(yes);
        Ok(())
    })
}

/// Distance under the diagonal metric whose inverse is `g_inv`.
///
/// # Safety
/// `g_inv`, `x` and `y` must each hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_metric_distance(g_inv: *const f64, x: *const f64, y: *const f64, len: usize, out: *mut f64) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(RgStatus::NullPointer, "out is null"));
        }
        let g = slice_arg(g_inv, len, "g_inv")?;
        if g.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
            return Err(fail(RgStatus::InvalidArgument, "g_inv components must lie in (0, 1]"));
        }
        *out = rgnet::model::metric_distance(g, slice_arg(x, len, "x")?, slice_arg(y, len, "y")?);
        Ok(())
    })
}

/// Creates a pipeline from a JSON configuration object.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_pipeline_new(config_json: *const c_char, out: *mut *mut RgPipeline) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(RgStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let cfg = PipelineConfig::from_json(str_arg(config_json, "config_json")?)?;
        let inner = Pipeline::new(cfg)?;
        *out = Box::into_raw(Box::new(RgPipeline { inner }));
        Ok(())
    })
}

/// Runs one stage by name (`ingest`, `train`, `synth`, ...).
///
/// # Safety
/// `pipeline` must be a live handle and `stage` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rg_pipeline_run_stage(pipeline: *const RgPipeline, stage: *const c_char) -> RgStatus {
    guard(|| {
        let p = pipeline
            .as_ref()
            .ok_or_else(|| fail(RgStatus::NullPointer, "pipeline is null"))?;
        let stage: Stage = str_arg(stage, "stage")?.parse()?;
        p.inner.run_stage(stage)?;
        Ok(())
    })
}

/// Releases a pipeline. Null is ignored.
///
/// # Safety
/// `pipeline` must come from [`rg_pipeline_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_pipeline_free(pipeline: *mut RgPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}
