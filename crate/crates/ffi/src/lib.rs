//! C ABI over the word-learning simulator.
//!
//! Every fallible function returns an [`XslStatus`]; on failure the message
//! is kept per thread and can be read with [`xsl_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//! Matrices are passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use xsl::error::Error;
use xsl::eval::{recall_at_k, semtest_from_scores, spearman_with};
use xsl::experiment::ExperimentConfig;
use xsl::learner::{checkpoint, infonce_from_similarities, similarity, LearnerState, ModelConfig};
use xsl::naming_stats::{target_counts, CategoryInventory, Condition};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XslStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    BadConfig = 3,
    Io = 4,
    Format = 5,
    Numeric = 6,
    Insufficient = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XslCondition {
    Natural = 0,
    Uniform = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct XslRecall {
    pub speech_to_image: f64,
    pub image_to_speech: f64,
    pub mean: f64,
}

/// Category statistics table.
pub struct XslInventory {
    inner: CategoryInventory,
}

/// Learner parameters.
pub struct XslLearner {
    inner: LearnerState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: XslStatus,
    message: String,
}

impl Failure {
    fn new(status: XslStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn null(what: &str) -> Self {
        Self::new(XslStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::BadConfig(_) | Error::ConfigMismatch(_) | Error::UnknownLayer(_) => XslStatus::BadConfig,
            Error::Io(_) | Error::MissingCheckpoint(_) | Error::MissingArtifact(_) | Error::Locked(_) => XslStatus::Io,
            Error::BadMagic { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Truncated { .. }
            | Error::TrailingBytes { .. }
            | Error::Malformed { .. }
            | Error::Json(_) => XslStatus::Format,
            Error::NonFiniteGradient(_) | Error::GradientCheck(_) => XslStatus::Numeric,
            Error::InsufficientPool { .. } | Error::InsufficientData(_) => XslStatus::Insufficient,
            _ => XslStatus::InvalidInput,
        };
        Self::new(status, e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> XslStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            XslStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("panic inside xsl");
            XslStatus::Panic
        }
    }
}

unsafe fn view<'a, T>(data: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn view_mut<'a, T>(data: *mut T, len: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(Failure::null(what));
    }
    Ok(slice::from_raw_parts_mut(data, len))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(XslStatus::InvalidInput, format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn rows(data: *const f64, n_rows: usize, n_cols: usize, what: &str) -> FfiResult<Vec<Vec<f64>>> {
    let len = n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| Failure::new(XslStatus::InvalidInput, format!("{what} is too large")))?;
    let flat = view(data, len, what)?;
    Ok(flat.chunks(n_cols.max(1)).take(n_rows).map(<[f64]>::to_vec).collect())
}

unsafe fn model_config(config_path: *const c_char) -> FfiResult<ModelConfig> {
    if config_path.is_null() {
        return Ok(ExperimentConfig::default().model);
    }
    let path = path_arg(config_path, "config_path")?;
    Ok(ExperimentConfig::load(&path)?.model)
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

// ---- errors ---------------------------------------------------------------

/// Length in bytes of the last error message on this thread, including the
/// terminating NUL; 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn xsl_last_error_length() -> usize {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(0, |c| c.as_bytes_with_nul().len()))
}

/// Copy the last error message into `buf`, truncating to `len - 1` bytes
/// and always NUL terminating. Returns the number of bytes written,
/// excluding the NUL.
///
/// # Safety
/// `buf` must be valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn xsl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let bytes = slot.as_ref().map_or(&[][..], |c| c.as_bytes());
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
        buf.add(n).write(0);
        n
    })
}

// ---- inventory ------------------------------------------------------------

/// The shipped 80-category table.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn xsl_inventory_coco80(out: *mut *mut XslInventory) -> XslStatus {
    guard(|| write_out(out, boxed(XslInventory { inner: CategoryInventory::coco80() }), "out"))
}

/// Synthetic inventory with daily rates `base_rate / rank^exponent`.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn xsl_inventory_synthetic_zipf(
    n_categories: usize,
    exponent: f64,
    base_rate: f64,
    seed: u64,
    out: *mut *mut XslInventory,
) -> XslStatus {
    guard(|| {
        let inner = CategoryInventory::synthetic_zipf(n_categories, exponent, base_rate, seed)?;
        write_out(out, boxed(XslInventory { inner }), "out")
    })
}

/// Load an inventory from a JSON-lines table.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsl_inventory_load(path: *const c_char, out: *mut *mut XslInventory) -> XslStatus {
    guard(|| {
        let inner = CategoryInventory::load(path_arg(path, "path")?)?;
        write_out(out, boxed(XslInventory { inner }), "out")
    })
}

/// Number of categories; 0 for a null handle.
///
/// # Safety
/// `inventory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xsl_inventory_len(inventory: *const XslInventory) -> usize {
    inventory.as_ref().map_or(0, |inv| inv.inner.len())
}

/// # Safety
/// `inventory` must be null or a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsl_inventory_daily_rate(
    inventory: *const XslInventory,
    category: usize,
    out: *mut f64,
) -> XslStatus {
    guard(|| {
        let inv = inventory.as_ref().ok_or_else(|| Failure::null("inventory"))?;
        let rec = inv
            .inner
            .get(category)
            .ok_or_else(|| Failure::new(XslStatus::InvalidInput, format!("category {category} out of range")))?;
        write_out(out, rec.daily_rate, "out")
    })
}

/// Per-category target counts for an age bin. `out_len` must equal the
/// number of categories.
///
/// # Safety
/// `inventory` must be null or a live handle; `out` valid for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn xsl_target_counts(
    inventory: *const XslInventory,
    duration_days: u32,
    condition: XslCondition,
    out: *mut u64,
    out_len: usize,
) -> XslStatus {
    guard(|| {
        let inv = inventory.as_ref().ok_or_else(|| Failure::null("inventory"))?;
        if out_len != inv.inner.len() {
            return Err(Error::LengthMismatch(out_len, inv.inner.len()).into());
        }
        let condition = match condition {
            XslCondition::Natural => Condition::Natural,
            XslCondition::Uniform => Condition::Uniform,
        };
        let targets = target_counts(&inv.inner, duration_days, condition);
        view_mut(out, out_len, "out")?.copy_from_slice(&targets.per_category);
        Ok(())
    })
}

/// # Safety
/// `inventory` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xsl_inventory_free(inventory: *mut XslInventory) {
    if !inventory.is_null() {
        drop(Box::from_raw(inventory));
    }
}

// ---- learner --------------------------------------------------------------

/// Randomly initialized learner. A null `config_path` uses the default
/// model dimensions; otherwise the `[model]` table of an experiment config.
///
/// # Safety
/// `config_path` must be null or NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsl_learner_new(
    config_path: *const c_char,
    seed: u64,
    out: *mut *mut XslLearner,
) -> XslStatus {
    guard(|| {
        let inner = LearnerState::new(model_config(config_path)?, seed)?;
        write_out(out, boxed(XslLearner { inner }), "out")
    })
}

/// Load a checkpoint written by the `train` command.
///
/// # Safety
/// Strings must be NUL-terminated (`config_path` may be null); `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsl_learner_load(
    config_path: *const c_char,
    checkpoint_path: *const c_char,
    out: *mut *mut XslLearner,
) -> XslStatus {
    guard(|| {
        let config = model_config(config_path)?;
        let inner = checkpoint::load(&path_arg(checkpoint_path, "checkpoint_path")?, &config)?;
        write_out(out, boxed(XslLearner { inner }), "out")
    })
}

/// # Safety
/// `learner` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn xsl_learner_save(learner: *const XslLearner, path: *const c_char) -> XslStatus {
    guard(|| {
        let l = learner.as_ref().ok_or_else(|| Failure::null("learner"))?;
        checkpoint::save(&l.inner, &path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Shared embedding dimension; 0 for a null handle.
///
/// # Safety
/// `learner` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xsl_learner_embed_dim(learner: *const XslLearner) -> usize {
    learner.as_ref().map_or(0, |l| l.inner.config.embed_dim)
}

/// Per-frame input dimension; 0 for a null handle.
///
/// # Safety
/// `learner` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xsl_learner_phone_dim(learner: *const XslLearner) -> usize {
    learner.as_ref().map_or(0, |l| l.inner.config.phone_dim)
}

/// Per-object input dimension; 0 for a null handle.
///
/// # Safety
/// `learner` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xsl_learner_visual_dim(learner: *const XslLearner) -> usize {
    learner.as_ref().map_or(0, |l| l.inner.config.visual_dim)
}

/// Utterance embedding of `n_frames × phone_dim` frames.
///
/// # Safety
/// `frames` must hold `n_frames * phone_dim` values; `out` `out_len` slots.
#[no_mangle]
pub unsafe extern "C" fn xsl_learner_embed_audio(
    learner: *const XslLearner,
    frames: *const f64,
    n_frames: usize,
    out: *mut f64,
    out_len: usize,
) -> XslStatus {
    guard(|| {
        let l = learner.as_ref().ok_or_else(|| Failure::null("learner"))?;
        let frames = view(frames, n_frames * l.inner.config.phone_dim, "frames")?;
        let enc = l.inner.encode_frames(frames, n_frames)?;
        copy_embedding(&enc.embedding, out, out_len)
    })
}

/// Scene embedding of `n_objects × visual_dim` features.
///
/// # Safety
/// `features` must hold `n_objects * visual_dim` values; `out` `out_len` slots.
#[no_mangle]
pub unsafe extern "C" fn xsl_learner_embed_scene(
    learner: *const XslLearner,
    features: *const f64,
    n_objects: usize,
    out: *mut f64,
    out_len: usize,
) -> XslStatus {
    guard(|| {
        let l = learner.as_ref().ok_or_else(|| Failure::null("learner"))?;
        let features = view(features, n_objects * l.inner.config.visual_dim, "features")?;
        let emb = l.inner.encode_objects(features, n_objects)?;
        copy_embedding(&emb, out, out_len)
    })
}

unsafe fn copy_embedding(emb: &[f64], out: *mut f64, out_len: usize) -> FfiResult<()> {
    if out_len != emb.len() {
        return Err(Error::DimMismatch { expected: emb.len(), got: out_len }.into());
    }
    view_mut(out, out_len, "out")?.copy_from_slice(emb);
    Ok(())
}

/// # Safety
/// `learner` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xsl_learner_free(learner: *mut XslLearner) {
    if !learner.is_null() {
        drop(Box::from_raw(learner));
    }
}

// ---- metrics --------------------------------------------------------------

/// Dot-product similarity of two `dim`-vectors.
///
/// # Safety
/// `a` and `b` must hold `dim` values; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsl_similarity(a: *const f64, b: *const f64, dim: usize, out: *mut f64) -> XslStatus {
    guard(|| {
        let s = similarity(view(a, dim, "a")?, view(b, dim, "b")?)?;
        write_out(out, s, "out")
    })
}

/// Bidirectional InfoNCE over an `n × n` similarity matrix whose diagonal
/// holds the true pairs.
///
/// # Safety
/// `similarities` must hold `n * n` values; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsl_infonce(similarities: *const f64, n: usize, temperature: f64, out: *mut f64) -> XslStatus {
    guard(|| {
        let s = rows(similarities, n, n, "similarities")?;
        write_out(out, infonce_from_similarities(&s, temperature)?, "out")
    })
}

/// Recall@k in both retrieval directions over an `n × n` matrix
/// (rows: utterances, columns: scenes).
///
/// # Safety
/// `similarities` must hold `n * n` values; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsl_recall_at_k(
    similarities: *const f64,
    n: usize,
    k: usize,
    out: *mut XslRecall,
) -> XslStatus {
    guard(|| {
        let s = rows(similarities, n, n, "similarities")?;
        let r = recall_at_k(&s, k)?;
        write_out(
            out,
            XslRecall { speech_to_image: r.speech_to_image, image_to_speech: r.image_to_speech, mean: r.mean },
            "out",
        )
    })
}

/// Spearman correlation with a two-sided permutation p-value.
///
/// # Safety
/// `x` and `y` must hold `n` values; `rho` and `p` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn xsl_spearman(
    x: *const f64,
    y: *const f64,
    n: usize,
    n_permutations: usize,
    seed: u64,
    rho: *mut f64,
    p: *mut f64,
) -> XslStatus {
    guard(|| {
        let r = spearman_with(view(x, n, "x")?, view(y, n, "y")?, n_permutations, seed)?;
        write_out(rho, r.rho, "rho")?;
        write_out(p, r.p, "p")
    })
}

/// Mean two-alternative forced-choice score in percent, from an
/// `n_words × n_objects` score matrix.
///
/// # Safety
/// Label arrays must hold `n_words` and `n_objects` values, `scores`
/// `n_words * n_objects`; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsl_semtest(
    word_labels: *const u32,
    n_words: usize,
    object_labels: *const u32,
    n_objects: usize,
    scores: *const f64,
    out: *mut f64,
) -> XslStatus {
    guard(|| {
        let words = view(word_labels, n_words, "word_labels")?;
        let objects = view(object_labels, n_objects, "object_labels")?;
        let s = rows(scores, n_words, n_objects, "scores")?;
        write_out(out, semtest_from_scores(words, objects, &s)?.mean, "out")
    })
}
