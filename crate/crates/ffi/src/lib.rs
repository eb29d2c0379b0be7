//! C ABI over the eol-mistrust pipeline.
//!
//! Datasets and models are opaque handles created by `em_*_load`,
//! `em_dataset_synth` or `em_model_train` and released with the matching
//! `em_*_free`. Every fallible call returns an [`EmStatus`]; on failure the
//! message is available from [`em_last_error_message`] on the same thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use eol_mistrust::analysis::{run_pipeline, score_all, train, write_report, PipelineConfig};
use eol_mistrust::data_model::{load_dataset, EhrDataset, LoadOptions};
use eol_mistrust::sparse_logreg::{write_scores_csv, FitConfig, MistrustModel};
use eol_mistrust::stats::{mann_whitney_with, MannWhitneyOptions};
use eol_mistrust::synth::{generate, SynthConfig};
use eol_mistrust::treatments::{admission_duration, DurationOptions, Span};
use eol_mistrust::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    /// Malformed input data: schema, row or referential errors.
    InvalidData = 4,
    InvalidArgument = 5,
    /// Degenerate statistics: single-class labels, empty or constant samples.
    Degenerate = 6,
    Panic = 7,
}

/// Opaque loaded or generated dataset.
pub struct EmDataset {
    inner: EhrDataset,
}

/// Opaque fitted mistrust model.
pub struct EmModel {
    inner: MistrustModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> EmStatus {
    match err {
        Error::Io { .. } | Error::Csv { .. } => EmStatus::Io,
        Error::Schema { .. } | Error::Row { .. } | Error::Referential { .. } | Error::MissingSeverity(_) => {
            EmStatus::InvalidData
        }
        Error::SingleClass { .. }
        | Error::EmptySample(_)
        | Error::ConstantSample(_)
        | Error::NonFinite(_)
        | Error::UntreatedGroup { .. } => EmStatus::Degenerate,
        _ => EmStatus::InvalidArgument,
    }
}

struct Failure(EmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            EmStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure(EmStatus::NullPointer, format!("{what} is null")));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(EmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(EmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(EmStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(EmStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn em_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Loads the CSV tables in `dir`. With `strict` nonzero the first malformed
/// row is an error, otherwise malformed rows are skipped.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn em_dataset_load(dir: *const c_char, strict: i32, out: *mut *mut EmDataset) -> EmStatus {
    guard(|| {
        out_arg(out, "out")?;
        let dir = path_arg(dir, "dir")?;
        let loaded = load_dataset(&dir, LoadOptions { strict: strict != 0 })?;
        *out = Box::into_raw(Box::new(EmDataset { inner: loaded.dataset }));
        Ok(())
    })
}

/// Generates a synthetic dataset with default settings apart from size and seed.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn em_dataset_synth(n_admissions: usize, seed: u64, out: *mut *mut EmDataset) -> EmStatus {
    guard(|| {
        out_arg(out, "out")?;
        let cfg = SynthConfig {
            n_admissions,
            seed,
            ..SynthConfig::default()
        };
        let (ds, _) = generate(&cfg)?;
        *out = Box::into_raw(Box::new(EmDataset { inner: ds }));
        Ok(())
    })
}

/// Number of admissions in the dataset, 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn em_dataset_admission_count(ds: *const EmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.admissions().len())
}

/// # Safety
/// `ds` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn em_dataset_free(ds: *mut EmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fits the mistrust model on the notes population with default cohort,
/// label and feature settings.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn em_model_train(
    ds: *const EmDataset,
    c: f64,
    tol: f64,
    max_iter: usize,
    out: *mut *mut EmModel,
) -> EmStatus {
    guard(|| {
        out_arg(out, "out")?;
        let ds = ref_arg(ds, "ds")?;
        let cfg = PipelineConfig {
            fit: FitConfig {
                c,
                tol,
                max_iter,
                ..FitConfig::default()
            },
            ..PipelineConfig::default()
        };
        let trained = train(&ds.inner, &cfg)?;
        *out = Box::into_raw(Box::new(EmModel { inner: trained.model }));
        Ok(())
    })
}

/// Reads a model CSV written by the CLI or [`em_model_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn em_model_load(path: *const c_char, out: *mut *mut EmModel) -> EmStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = path_arg(path, "path")?;
        let model = MistrustModel::read_csv(&path)?;
        *out = Box::into_raw(Box::new(EmModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn em_model_save(model: *const EmModel, path: *const c_char) -> EmStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let path = path_arg(path, "path")?;
        model.inner.write_csv(&path)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn em_model_free(model: *mut EmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of feature weights, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn em_model_n_features(model: *const EmModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_features())
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn em_model_intercept(model: *const EmModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.inner.intercept)
}

/// 1 if the solver reached its tolerance, 0 otherwise or for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn em_model_converged(model: *const EmModel) -> i32 {
    model.as_ref().map_or(0, |m| m.inner.converged as i32)
}

/// Probabilities for `n_rows` dense rows stored row-major in `x`, each of
/// length [`em_model_n_features`]. Results go to `out[0..n_rows]`.
///
/// # Safety
/// `x` must hold `n_rows * n_features` doubles and `out` room for `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn em_model_predict(
    model: *const EmModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> EmStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.inner;
        if n_cols != model.n_features() {
            return Err(Error::DimensionMismatch {
                expected: model.n_features(),
                found: n_cols,
            }
            .into());
        }
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Failure(EmStatus::InvalidArgument, "n_rows * n_cols overflows".into()))?;
        let x = slice_arg(x, len, "x")?;
        if n_rows > 0 {
            out_arg(out, "out")?;
        }
        for r in 0..n_rows {
            let row = if n_cols == 0 { &[][..] } else { &x[r * n_cols..(r + 1) * n_cols] };
            *out.add(r) = model.predict_proba(row)?;
        }
        Ok(())
    })
}

/// Scores every admission of `ds` and writes `admission_id,score` rows to `path`.
///
/// # Safety
/// Handles must be live and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn em_score_to_csv(model: *const EmModel, ds: *const EmDataset, path: *const c_char) -> EmStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let ds = ref_arg(ds, "ds")?;
        let path = path_arg(path, "path")?;
        write_scores_csv(&path, &score_all(&ds.inner, &model.inner))?;
        Ok(())
    })
}

/// Runs the full pipeline with default settings and writes the report files into `out_dir`.
///
/// # Safety
/// `ds` must be a live handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn em_pipeline_run(ds: *const EmDataset, out_dir: *const c_char) -> EmStatus {
    guard(|| {
        let ds = ref_arg(ds, "ds")?;
        let dir = path_arg(out_dir, "out_dir")?;
        let output = run_pipeline(&ds.inner, &PipelineConfig::default())?;
        write_report(&output.analysis.report, &dir)?;
        Ok(())
    })
}

/// Two-sided Mann-Whitney U test. `u` receives U for the first sample
/// (pairs with a > b, ties counting half). Exact when `nx + ny <= exact_max_total`.
///
/// # Safety
/// `x` and `y` must hold `nx` and `ny` doubles; `u` and `p` must be valid.
#[no_mangle]
pub unsafe extern "C" fn em_mann_whitney(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    exact_max_total: usize,
    continuity_correction: i32,
    u: *mut f64,
    p: *mut f64,
) -> EmStatus {
    guard(|| {
        out_arg(u, "u")?;
        out_arg(p, "p")?;
        let x = slice_arg(x, nx, "x")?;
        let y = slice_arg(y, ny, "y")?;
        let opts = MannWhitneyOptions {
            exact_max_total,
            continuity_correction: continuity_correction != 0,
        };
        let r = mann_whitney_with(x, y, &opts)?;
        *u = r.u_statistic;
        *p = r.p_two_sided;
        Ok(())
    })
}

/// Total treatment minutes of one admission's spans after merging gaps of
/// at most `max_gap` minutes. With `count_gaps` zero, absorbed gaps are not counted.
///
/// # Safety
/// `starts` and `ends` must hold `n` values each; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn em_merged_duration(
    starts: *const i64,
    ends: *const i64,
    n: usize,
    max_gap: i64,
    count_gaps: i32,
    out: *mut i64,
) -> EmStatus {
    guard(|| {
        out_arg(out, "out")?;
        let starts = slice_arg(starts, n, "starts")?;
        let ends = slice_arg(ends, n, "ends")?;
        let spans: Vec<Span> = starts.iter().zip(ends).map(|(&s, &e)| Span::new(s, e)).collect();
        let opts = DurationOptions {
            max_gap_minutes: max_gap,
            count_gaps: count_gaps != 0,
        };
        *out = admission_duration(&spans, &opts)?;
        Ok(())
    })
}
