//! Python bindings. Structured results come back as plain Python objects
//! (dicts and lists) decoded from the library's JSON forms.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use readtrace::detector::IssueStatus;
use readtrace::evaluator::{self, SyntheticSpec};
use readtrace::ingest::{parse_course_outline_reader, parse_log_reader, write_log_csv};
use readtrace::tasks::{NewTask, TaskPatch};
use readtrace::{report, AnalysisConfig, Error};

create_exception!(pyreadtrace, ReadtraceError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NotFound(_) => PyKeyError::new_err(e.to_string()),
        Error::Validation(_) | Error::Outline(_) | Error::Format(_) => PyValueError::new_err(e.to_string()),
        _ => ReadtraceError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes `value` and decodes it with Python's `json` module.
fn pyobj<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(json_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(json_err)
}

fn config(mad_cutoff: f64, page_threshold_s: f64, session_threshold_s: f64) -> AnalysisConfig {
    AnalysisConfig { mad_cutoff, page_threshold_s, session_threshold_s }
}

/// Splits `values` into `(retained, removed)` with Peirce's criterion.
#[pyfunction]
fn peirce_filter(values: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let out = readtrace::sessionizer::peirce_filter(&values);
    (out.retained, out.removed)
}

/// Peirce's maximum deviation ratio for `n_obs` observations and
/// `n_doubtful` doubtful ones, or None when undefined.
#[pyfunction]
fn peirce_ratio(n_obs: usize, n_doubtful: usize) -> Option<f64> {
    readtrace::sessionizer::peirce_ratio(n_obs, n_doubtful)
}

/// Robust z-scores of a column; None for missing cells and short columns.
#[pyfunction]
fn modified_z_scores(values: Vec<Option<f64>>) -> Vec<Option<f64>> {
    readtrace::detector::modified_z_scores(&values)
}

/// Runs the whole analysis on an outline (JSON text) and a log (CSV text)
/// without touching disk. Returns the snapshot as a dict.
#[pyfunction]
#[pyo3(signature = (outline_json, log_csv, mad_cutoff=3.5, page_threshold_s=600.0, session_threshold_s=1800.0))]
fn analyze<'py>(
    py: Python<'py>,
    outline_json: &str,
    log_csv: &str,
    mad_cutoff: f64,
    page_threshold_s: f64,
    session_threshold_s: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let course = parse_course_outline_reader(outline_json.as_bytes()).map_err(to_py)?;
    let (events, _) = parse_log_reader(log_csv.as_bytes(), &course).map_err(to_py)?;
    let cfg = config(mad_cutoff, page_threshold_s, session_threshold_s);
    let snapshot = readtrace::analyze(&course, &events, &cfg).map_err(to_py)?;
    pyobj(py, &snapshot)
}

/// Generates the synthetic fixture. Returns `(outline_json, log_csv)`.
#[pyfunction]
#[pyo3(signature = (learners=None, seed=None))]
fn generate_synthetic(learners: Option<usize>, seed: Option<u64>) -> PyResult<(String, String)> {
    let defaults = SyntheticSpec::default();
    let spec = SyntheticSpec {
        n_actors: learners.unwrap_or(defaults.n_actors),
        seed: seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let log = evaluator::generate_synthetic(&spec).map_err(to_py)?;
    let outline = serde_json::to_string_pretty(&log.course).map_err(json_err)?;
    let mut csv = Vec::new();
    write_log_csv(&mut csv, &log.events).map_err(to_py)?;
    Ok((outline, String::from_utf8(csv).expect("CSV writer emits UTF-8")))
}

/// A file-backed course store.
#[pyclass(module = "pyreadtrace")]
struct Store {
    inner: readtrace::Store,
}

#[pymethods]
impl Store {
    #[new]
    #[pyo3(signature = (data_dir, mad_cutoff=3.5, page_threshold_s=600.0, session_threshold_s=1800.0))]
    fn new(data_dir: PathBuf, mad_cutoff: f64, page_threshold_s: f64, session_threshold_s: f64) -> PyResult<Self> {
        let cfg = config(mad_cutoff, page_threshold_s, session_threshold_s);
        Ok(Store { inner: readtrace::Store::open(data_dir, cfg).map_err(to_py)? })
    }

    fn courses(&self) -> Vec<String> {
        self.inner.courses().map(|r| r.course_id().to_owned()).collect()
    }

    /// Registers an outline given as JSON text; returns the course id.
    fn register(&mut self, outline_json: &str) -> PyResult<String> {
        let course = parse_course_outline_reader(outline_json.as_bytes()).map_err(to_py)?;
        Ok(self.inner.register(course).map_err(to_py)?.course_id().to_owned())
    }

    /// Loads a CSV batch; returns the cleaning report.
    fn ingest<'py>(&mut self, py: Python<'py>, course_id: &str, log_csv: &str) -> PyResult<Bound<'py, PyAny>> {
        let report = self.inner.ingest(course_id, log_csv.as_bytes()).map_err(to_py)?;
        pyobj(py, &report)
    }

    fn analyze<'py>(&mut self, py: Python<'py>, course_id: &str) -> PyResult<Bound<'py, PyAny>> {
        self.inner.reanalyze(course_id).map_err(to_py)?;
        let summary = report::summary(self.inner.record(course_id).map_err(to_py)?).map_err(to_py)?;
        pyobj(py, &summary)
    }

    /// The report as text: `format` is "json" (the exact bytes the CLI and
    /// service emit) or "text".
    #[pyo3(signature = (course_id, format="json"))]
    fn report(&self, course_id: &str, format: &str) -> PyResult<String> {
        let record = self.inner.record(course_id).map_err(to_py)?;
        match format {
            "json" | "structured" => report::render_json(record).map_err(to_py),
            "text" => report::render_text(record).map_err(to_py),
            other => Err(PyValueError::new_err(format!("unknown format {other:?}"))),
        }
    }

    fn issues<'py>(&self, py: Python<'py>, course_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let record = self.inner.record(course_id).map_err(to_py)?;
        let issues = record.snapshot.as_ref().map(|s| s.issues.clone()).unwrap_or_default();
        pyobj(py, &issues)
    }

    fn suggestions<'py>(&self, py: Python<'py>, course_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let record = self.inner.record(course_id).map_err(to_py)?;
        let suggestions = record.snapshot.as_ref().map(|s| s.suggestions.clone()).unwrap_or_default();
        pyobj(py, &suggestions)
    }

    fn set_issue_status<'py>(&mut self, py: Python<'py>, issue_id: &str, status: &str) -> PyResult<Bound<'py, PyAny>> {
        let status: IssueStatus = serde_json::from_value(status.into()).map_err(json_err)?;
        let issue = self.inner.set_issue_status(issue_id, status).map_err(to_py)?;
        pyobj(py, &issue)
    }

    fn tasks<'py>(&self, py: Python<'py>, course_id: &str) -> PyResult<Bound<'py, PyAny>> {
        pyobj(py, &self.inner.tasks(course_id).map_err(to_py)?)
    }

    /// Creates a task from a dict shaped like the service's request body.
    fn create_task<'py>(&mut self, py: Python<'py>, course_id: &str, request: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let req: NewTask = from_py(request)?;
        pyobj(py, &self.inner.create_task(course_id, req).map_err(to_py)?)
    }

    fn update_task<'py>(&mut self, py: Python<'py>, task_id: &str, patch: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let patch: TaskPatch = from_py(patch)?;
        pyobj(py, &self.inner.update_task(task_id, &patch).map_err(to_py)?)
    }

    fn delete_task(&mut self, task_id: &str) -> PyResult<()> {
        self.inner.delete_task(task_id).map_err(to_py)
    }
}

#[pymodule]
fn pyreadtrace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ReadtraceError", m.py().get_type::<ReadtraceError>())?;
    m.add_function(wrap_pyfunction!(peirce_filter, m)?)?;
    m.add_function(wrap_pyfunction!(peirce_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(modified_z_scores, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_class::<Store>()?;
    Ok(())
}
