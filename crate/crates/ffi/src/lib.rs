//! C ABI over the core pipeline, for bindings from other languages.
//!
//! Conventions:
//! - Opaque handles (`AlignDataset`) own Rust data; free them with the
//!   matching `*_free` function exactly once.
//! - Functions return [`AlignStatus`]; `ALIGN_OK` is 0. On any other
//!   status, `align_last_error()` returns a thread-local message valid
//!   until the next failing call on the same thread.
//! - Strings returned through out-parameters are NUL-terminated UTF-8
//!   owned by Rust; release them with `align_string_free`.
//!
//! The matching header at `include/align.h` is generated from this file by
//! cbindgen during the build.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use libc::{c_char, c_double, c_ulonglong};

use align_core::data::{load_course, CourseDataset, StudentId};
use align_core::evaluation::{f1_from_pr, metrics, ConfusionMatrix};
use align_core::proficiency::{identify_gaps, vector_for_student, BandConfig};
use align_core::simulation::{generate_cohort, SimConfig};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignStatus {
    Ok = 0,
    InvalidArgument = 1,
    ParseError = 2,
    ValidationError = 3,
    IoError = 4,
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: AlignStatus, message: &str) -> AlignStatus {
    set_last_error(message);
    status
}

/// Last error message for the current thread. Never NULL; empty when no
/// error has occurred. The pointer stays valid until the next failing call
/// on this thread.
#[no_mangle]
pub extern "C" fn align_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string; do not free.
#[no_mangle]
pub extern "C" fn align_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned through an out-parameter of
/// this library (or NULL), not yet freed.
#[no_mangle]
pub unsafe extern "C" fn align_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opaque handle to a validated course dataset.
pub struct AlignDataset {
    inner: CourseDataset,
}

unsafe fn read_path(raw: *const c_char) -> Result<PathBuf, AlignStatus> {
    if raw.is_null() {
        set_last_error("path argument is NULL");
        return Err(AlignStatus::InvalidArgument);
    }
    match CStr::from_ptr(raw).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_last_error("path argument is not valid UTF-8");
            Err(AlignStatus::InvalidArgument)
        }
    }
}

fn string_out(out: *mut *mut c_char, value: String) -> AlignStatus {
    let sanitized = value.replace('\0', " ");
    match CString::new(sanitized) {
        Ok(cstring) => {
            unsafe { *out = cstring.into_raw() };
            AlignStatus::Ok
        }
        Err(_) => fail(AlignStatus::InternalError, "string contained interior NUL"),
    }
}

/// Load and cross-validate a course bundle from its `course.json` manifest.
/// On success `*out` owns the dataset; free it with `align_dataset_free`.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string and `out` a valid
/// pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn align_dataset_load(
    manifest_path: *const c_char,
    out: *mut *mut AlignDataset,
) -> AlignStatus {
    if out.is_null() {
        return fail(AlignStatus::InvalidArgument, "out pointer is NULL");
    }
    *out = std::ptr::null_mut();
    let path = match read_path(manifest_path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let result = catch_unwind(AssertUnwindSafe(|| load_course(Path::new(&path))));
    match result {
        Ok(Ok(dataset)) => {
            *out = Box::into_raw(Box::new(AlignDataset { inner: dataset }));
            AlignStatus::Ok
        }
        Ok(Err(align_core::data::CourseLoadError::Invalid(report))) => {
            fail(AlignStatus::ValidationError, &report.to_string())
        }
        Ok(Err(e)) => fail(AlignStatus::ParseError, &e.to_string()),
        Err(_) => fail(AlignStatus::InternalError, "panic while loading course"),
    }
}

/// # Safety
/// `dataset` must come from `align_dataset_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn align_dataset_free(dataset: *mut AlignDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be a live handle from `align_dataset_load`.
#[no_mangle]
pub unsafe extern "C" fn align_dataset_student_count(
    dataset: *const AlignDataset,
) -> c_ulonglong {
    if dataset.is_null() {
        return 0;
    }
    (*dataset).inner.students.len() as c_ulonglong
}

/// # Safety
/// `dataset` must be a live handle from `align_dataset_load`.
#[no_mangle]
pub unsafe extern "C" fn align_dataset_question_count(
    dataset: *const AlignDataset,
) -> c_ulonglong {
    if dataset.is_null() {
        return 0;
    }
    (*dataset).inner.questions.len() as c_ulonglong
}

/// # Safety
/// `dataset` must be a live handle from `align_dataset_load`.
#[no_mangle]
pub unsafe extern "C" fn align_dataset_topic_count(dataset: *const AlignDataset) -> c_ulonglong {
    if dataset.is_null() {
        return 0;
    }
    (*dataset).inner.topics().len() as c_ulonglong
}

/// Compute per-student proficiency vectors and skill gaps; `*out_json`
/// receives a JSON document equivalent to the CLI's `proficiency.json`.
///
/// # Safety
/// `dataset` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn align_proficiency_json(
    dataset: *const AlignDataset,
    tau: c_double,
    high_min: c_double,
    medium_min: c_double,
    include_exams: bool,
    out_json: *mut *mut c_char,
) -> AlignStatus {
    if dataset.is_null() || out_json.is_null() {
        return fail(AlignStatus::InvalidArgument, "NULL argument");
    }
    *out_json = std::ptr::null_mut();
    let dataset = &(*dataset).inner;

    if !(0.0..=1.0).contains(&tau) {
        return fail(
            AlignStatus::InvalidArgument,
            &format!("tau must lie in [0,1], got {tau}"),
        );
    }
    let bands = match BandConfig::new(high_min, medium_min) {
        Ok(b) => b,
        Err(e) => return fail(AlignStatus::InvalidArgument, &e.to_string()),
    };

    let result = catch_unwind(AssertUnwindSafe(|| -> Result<String, String> {
        let mut students = serde_json::Map::new();
        for student in &dataset.students {
            let vector = vector_for_student(dataset, student, &bands, include_exams)
                .map_err(|e| e.to_string())?;
            let gaps = identify_gaps(&vector, tau).map_err(|e| e.to_string())?;
            let proficiency: Vec<serde_json::Value> = vector
                .entries
                .values()
                .map(|p| {
                    serde_json::json!({
                        "topic": p.topic,
                        "rho": format!("{:.6}", p.rho),
                        "band": p.band.name(),
                        "evidence_count": p.evidence_count,
                    })
                })
                .collect();
            let gaps: Vec<serde_json::Value> = gaps
                .iter()
                .map(|g| {
                    serde_json::json!({
                        "topic": g.topic,
                        "rho": format!("{:.6}", g.rho),
                        "rank": g.rank,
                    })
                })
                .collect();
            students.insert(
                student.to_string(),
                serde_json::json!({"proficiency": proficiency, "gaps": gaps}),
            );
        }
        let doc = serde_json::json!({
            "course_id": dataset.course_id,
            "tau": tau,
            "bands": {"high_min": bands.high_min, "medium_min": bands.medium_min},
            "include_exams": include_exams,
            "students": students,
        });
        serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())
    }));
    match result {
        Ok(Ok(json)) => string_out(out_json, json),
        Ok(Err(message)) => fail(AlignStatus::InternalError, &message),
        Err(_) => fail(AlignStatus::InternalError, "panic while computing proficiency"),
    }
}

/// Harmonic F1 from precision and recall; 0 when both are 0. NaN when an
/// argument falls outside the unit interval.
#[no_mangle]
pub extern "C" fn align_f1_from_pr(precision: c_double, recall: c_double) -> c_double {
    if !(0.0..=1.0).contains(&precision) || !(0.0..=1.0).contains(&recall) {
        return f64::NAN;
    }
    f1_from_pr(precision, recall)
}

/// Metrics over a square confusion matrix given in row-major order (rows =
/// truth, columns = prediction). `class_names` holds `n_classes`
/// NUL-terminated strings. `*out_json` receives the metrics report.
///
/// # Safety
/// `counts` must point to `n_classes * n_classes` values, `class_names` to
/// `n_classes` valid C strings, and `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn align_metrics_json(
    counts: *const c_ulonglong,
    class_names: *const *const c_char,
    n_classes: c_ulonglong,
    out_json: *mut *mut c_char,
) -> AlignStatus {
    if counts.is_null() || class_names.is_null() || out_json.is_null() {
        return fail(AlignStatus::InvalidArgument, "NULL argument");
    }
    *out_json = std::ptr::null_mut();
    let n = n_classes as usize;
    if n == 0 {
        return fail(AlignStatus::InvalidArgument, "n_classes must be >= 1");
    }

    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let raw = *class_names.add(i);
        if raw.is_null() {
            return fail(AlignStatus::InvalidArgument, "class name is NULL");
        }
        match CStr::from_ptr(raw).to_str() {
            Ok(s) => classes.push(s.to_string()),
            Err(_) => {
                return fail(AlignStatus::InvalidArgument, "class name is not UTF-8");
            }
        }
    }

    let mut matrix = ConfusionMatrix::new(classes);
    for i in 0..n {
        for j in 0..n {
            let value = *counts.add(i * n + j) as usize;
            matrix.counts[i][j] = value;
        }
    }
    if matrix.total() == 0 {
        return fail(AlignStatus::InvalidArgument, "confusion matrix is empty");
    }

    let report = metrics(&matrix);
    match serde_json::to_string_pretty(&report) {
        Ok(json) => string_out(out_json, json),
        Err(e) => fail(AlignStatus::InternalError, &e.to_string()),
    }
}

/// Exam-band ground truth for one dataset as JSON
/// `{student: {topic: band}}`.
///
/// # Safety
/// `dataset` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn align_ground_truth_json(
    dataset: *const AlignDataset,
    high_min: c_double,
    medium_min: c_double,
    out_json: *mut *mut c_char,
) -> AlignStatus {
    if dataset.is_null() || out_json.is_null() {
        return fail(AlignStatus::InvalidArgument, "NULL argument");
    }
    *out_json = std::ptr::null_mut();
    let bands = match BandConfig::new(high_min, medium_min) {
        Ok(b) => b,
        Err(e) => return fail(AlignStatus::InvalidArgument, &e.to_string()),
    };
    match align_core::evaluation::derive_ground_truth(&(*dataset).inner, &bands) {
        Ok(truth) => {
            let mut doc: BTreeMap<String, BTreeMap<String, &str>> = BTreeMap::new();
            for (student, topics) in &truth.bands {
                doc.insert(
                    student.to_string(),
                    topics.iter().map(|(t, b)| (t.clone(), b.name())).collect(),
                );
            }
            match serde_json::to_string_pretty(&doc) {
                Ok(json) => string_out(out_json, json),
                Err(e) => fail(AlignStatus::InternalError, &e.to_string()),
            }
        }
        Err(e) => fail(AlignStatus::ValidationError, &e.to_string()),
    }
}

/// Generate a deterministic synthetic course bundle into `out_dir`,
/// exactly like `align simulate`.
///
/// # Safety
/// `out_dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn align_simulate(
    seed: c_ulonglong,
    n_students: c_ulonglong,
    n_topics: c_ulonglong,
    questions_per_topic: c_ulonglong,
    exam_questions_per_topic: c_ulonglong,
    noise: c_double,
    out_dir: *const c_char,
) -> AlignStatus {
    let dir = match read_path(out_dir) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let config = SimConfig {
        seed,
        n_students: n_students as usize,
        n_topics: n_topics as usize,
        questions_per_topic: questions_per_topic as usize,
        noise,
        exam_questions_per_topic: exam_questions_per_topic as usize,
        ..SimConfig::new(seed)
    };
    let (dataset, _) = match generate_cohort(&config) {
        Ok(pair) => pair,
        Err(e) => return fail(AlignStatus::InvalidArgument, &e.to_string()),
    };
    match align_core::data::save_course(&dataset, Path::new(&dir)) {
        Ok(()) => AlignStatus::Ok,
        Err(e) => fail(AlignStatus::IoError, &e.to_string()),
    }
}

/// Convenience accessor used by binding smoke tests: the roster as a
/// newline-joined string.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn align_dataset_students(
    dataset: *const AlignDataset,
    out: *mut *mut c_char,
) -> AlignStatus {
    if dataset.is_null() || out.is_null() {
        return fail(AlignStatus::InvalidArgument, "NULL argument");
    }
    let names: Vec<&str> = (*dataset)
        .inner
        .students
        .iter()
        .map(StudentId::as_str)
        .collect();
    string_out(out, names.join("\n"))
}
