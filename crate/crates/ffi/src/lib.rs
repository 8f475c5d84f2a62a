//! C ABI over the painmeter engine.
//!
//! Every fallible function returns a [`PmStatus`]. On failure the message
//! is kept per thread and read with [`pm_last_error_message`]. Models and
//! recordings are opaque handles that the caller releases with the matching
//! `*_free` function. Grids are passed row-major as `rows × cols` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use painmeter::consensus::consensus_predict;
use painmeter::nn::{checkpoint, Architecture, Grid2D, ModelParams, ProbVector};
use painmeter::ordinal::{ordinal_loss, OrdinalTarget};
use painmeter::signal_store::{load_recording, Recording};
use painmeter::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Format = 3,
    Data = 4,
    Manifest = 5,
    Shape = 6,
    Usage = 7,
    Length = 8,
    Training = 9,
    Checkpoint = 10,
    Io = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// A trained or freshly initialized network.
pub struct PmModel {
    params: ModelParams,
}

/// One loaded recording.
pub struct PmRecording {
    rec: Recording,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PmStatus {
    match e {
        Error::Format { .. } => PmStatus::Format,
        Error::Data { .. } => PmStatus::Data,
        Error::Manifest(_) => PmStatus::Manifest,
        Error::Shape(_) => PmStatus::Shape,
        Error::Usage(_) => PmStatus::Usage,
        Error::Length(_) => PmStatus::Length,
        Error::Training { .. } => PmStatus::Training,
        Error::Checkpoint(_) => PmStatus::Checkpoint,
        Error::Io { .. } => PmStatus::Io,
    }
}

struct Fail(PmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PmStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PmStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PmStatus::InvalidUtf8, "path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn grid_arg(values: *const f64, rows: usize, cols: usize) -> Result<Grid2D, Fail> {
    if values.is_null() {
        return Err(null("values"));
    }
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Fail(PmStatus::Shape, "rows × cols overflows".into()))?;
    let data = std::slice::from_raw_parts(values, n).to_vec();
    Ok(Grid2D::from_vec(rows, cols, data)?)
}

unsafe fn model_ref<'a>(m: *const PmModel) -> Result<&'a PmModel, Fail> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn out_buf<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Fail(
            PmStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, null-terminated version string.
#[no_mangle]
pub extern "C" fn pm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file into a new model handle.
///
/// # Safety
/// `path` must be a null-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_model_load(path: *const c_char, out: *mut *mut PmModel) -> PmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = checkpoint::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(PmModel { params }));
        Ok(())
    })
}

/// Creates a randomly initialized default CNN.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_model_new_cnn(
    channels: usize,
    seq_len: usize,
    num_categories: usize,
    seed: u64,
    out: *mut *mut PmModel,
) -> PmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ModelParams::init(Architecture::cnn(channels, seq_len, num_categories), seed)?;
        *out = Box::into_raw(Box::new(PmModel { params }));
        Ok(())
    })
}

/// Writes the model to a checkpoint file.
///
/// # Safety
/// `model` must be a live handle; `path` a null-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pm_model_save(model: *const PmModel, path: *const c_char) -> PmStatus {
    guard(|| {
        let m = model_ref(model)?;
        checkpoint::save(&m.params, path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pm_model_free(model: *mut PmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input shape and category count of a model.
///
/// # Safety
/// `model` must be a live handle; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn pm_model_shape(
    model: *const PmModel,
    channels: *mut usize,
    seq_len: *mut usize,
    num_categories: *mut usize,
) -> PmStatus {
    guard(|| {
        let a = model_ref(model)?.params.architecture();
        if channels.is_null() || seq_len.is_null() || num_categories.is_null() {
            return Err(null("shape output"));
        }
        *channels = a.input_channels;
        *seq_len = a.seq_len;
        *num_categories = a.num_categories;
        Ok(())
    })
}

/// Softmax probabilities for one `channels × seq_len` slice.
///
/// # Safety
/// `values` must hold `rows * cols` doubles and `probs_out` `probs_len`.
#[no_mangle]
pub unsafe extern "C" fn pm_model_predict(
    model: *const PmModel,
    values: *const f64,
    rows: usize,
    cols: usize,
    probs_out: *mut f64,
    probs_len: usize,
) -> PmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let g = grid_arg(values, rows, cols)?;
        let p = m.params.predict(&g)?;
        out_buf(probs_out, probs_len, p.len(), "probs_out")?.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// Plurality vote over `k` random slices of a longer unit. Writes the vote
/// count per category and the winning category (lowest index on ties).
///
/// # Safety
/// `values` must hold `rows * cols` doubles, `counts_out` `counts_len`
/// entries, and `category_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_model_consensus(
    model: *const PmModel,
    values: *const f64,
    rows: usize,
    cols: usize,
    k: usize,
    seed: u64,
    counts_out: *mut usize,
    counts_len: usize,
    category_out: *mut usize,
) -> PmStatus {
    guard(|| {
        let m = model_ref(model)?;
        if category_out.is_null() {
            return Err(null("category_out"));
        }
        let g = grid_arg(values, rows, cols)?;
        let seq_len = m.params.architecture().seq_len;
        let (winner, tally) = consensus_predict(&m.params, &g, k, seq_len, seed)?;
        out_buf(counts_out, counts_len, tally.counts().len(), "counts_out")?
            .copy_from_slice(tally.counts());
        *category_out = winner;
        Ok(())
    })
}

/// Distance-weighted ordinal cross-entropy of a probability vector.
///
/// # Safety
/// `probs` must hold `num_categories` doubles; `loss_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_ordinal_loss(
    probs: *const f64,
    num_categories: usize,
    true_index: usize,
    loss_out: *mut f64,
) -> PmStatus {
    guard(|| {
        if probs.is_null() || loss_out.is_null() {
            return Err(null("probs or loss_out"));
        }
        let p = ProbVector::new(std::slice::from_raw_parts(probs, num_categories).to_vec())?;
        let t = OrdinalTarget::new(true_index, num_categories)?;
        *loss_out = ordinal_loss(&p, &t)?;
        Ok(())
    })
}

/// Index of the largest count, lowest index on ties.
///
/// # Safety
/// `counts` must hold `len` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_plurality(counts: *const usize, len: usize, out: *mut usize) -> PmStatus {
    guard(|| {
        if counts.is_null() || out.is_null() {
            return Err(null("counts or out"));
        }
        if len == 0 {
            return Err(Fail(PmStatus::Usage, "no categories".into()));
        }
        *out = painmeter::consensus::plurality(std::slice::from_raw_parts(counts, len));
        Ok(())
    })
}

/// Loads a recording file.
///
/// # Safety
/// `path` must be a null-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_recording_load(
    path: *const c_char,
    out: *mut *mut PmRecording,
) -> PmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let rec = load_recording(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(PmRecording { rec }));
        Ok(())
    })
}

/// Channel count, timestep count and pain score of a recording.
///
/// # Safety
/// `rec` must be a live handle; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn pm_recording_info(
    rec: *const PmRecording,
    channels: *mut usize,
    timesteps: *mut usize,
    pain_score: *mut u8,
) -> PmStatus {
    guard(|| {
        let r = &rec.as_ref().ok_or_else(|| null("recording"))?.rec;
        if channels.is_null() || timesteps.is_null() || pain_score.is_null() {
            return Err(null("info output"));
        }
        *channels = r.num_channels();
        *timesteps = r.num_timesteps();
        *pain_score = r.pain_score;
        Ok(())
    })
}

/// Row-major channel × timestep values, owned by the handle. Null for a
/// null handle.
///
/// # Safety
/// `rec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_recording_values(rec: *const PmRecording) -> *const f64 {
    rec.as_ref().map_or(ptr::null(), |r| r.rec.values.as_slice().as_ptr())
}

/// Releases a recording handle. Null is ignored.
///
/// # Safety
/// `rec` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pm_recording_free(rec: *mut PmRecording) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}
