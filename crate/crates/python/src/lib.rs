//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists: requests use the same JSON shapes as the HTTP API, and results are
//! the serialized Rust types.

use std::path::PathBuf;

use bronchial_dx::cdamm::{kronecker, InconclusivePolicy, Memory, RetrievalMode};
use bronchial_dx::cohort::{generate, CohortConfig};
use bronchial_dx::imaging::{
    extract_features, iterative_threshold, Connectivity, GlcmOptions, GrayImage, ImagingConfig,
};
use bronchial_dx::metrics::{summarize as summarize_tally, ConfusionTally};
use bronchial_dx::questionnaire::{compute_score, ResponseSet};
use bronchial_dx_service::engine::{bootstrap_memory, run_evaluation};
use bronchial_dx_service::payload::{parse_diagnose, EvaluateRequest};
use bronchial_dx_service::{Engine, ServiceError};
use ndarray::Array2;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;
use serde_json::Value;

create_exception!(
    bronchial_dx_py,
    ValidationError,
    PyValueError,
    "Request failed field validation; `fields` lists (path, message) pairs."
);

fn service_err(e: ServiceError) -> PyErr {
    match e {
        ServiceError::Validation(fields) => Python::attach(|py| {
            let err = ValidationError::new_err(ServiceError::Validation(fields.clone()).to_string());
            let pairs: Vec<(String, String)> = fields.into_iter().map(|f| (f.field, f.message)).collect();
            if let Err(set) = err.value(py).setattr("fields", pairs) {
                return set;
            }
            err
        }),
        ServiceError::BadRequest(m) | ServiceError::NotFound(m) | ServiceError::Conflict(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn core_err(e: bronchial_dx::Error) -> PyErr {
    service_err(e.into())
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_mode(mode: &str) -> PyResult<RetrievalMode> {
    serde_json::from_value(Value::String(mode.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown mode `{mode}`; expected sequential or summed")))
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows must have equal length"));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Associative memory linking disease codes to sign codes.
#[pyclass(name = "Memory", module = "bronchial_dx_py", skip_from_py_object)]
#[derive(Clone)]
struct PyMemory {
    inner: Memory,
}

#[pymethods]
impl PyMemory {
    /// Memory trained on the default synthetic cohort.
    #[staticmethod]
    fn bootstrap(py: Python<'_>) -> PyResult<Self> {
        let enc = bronchial_dx::encoder::Encoder::default();
        let inner = py.detach(|| bootstrap_memory(&enc)).map_err(service_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Memory::from_json(text).map(|inner| Self { inner }).map_err(core_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn version(&self) -> u64 {
        self.inner.version()
    }

    #[getter]
    fn diseases(&self) -> Vec<String> {
        self.inner.diseases().ids().to_vec()
    }

    #[getter]
    fn signs(&self) -> Vec<String> {
        self.inner.signs().ids().to_vec()
    }

    #[getter]
    fn psi(&self) -> Vec<Vec<f64>> {
        rows(self.inner.psi())
    }

    fn associations(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.associations())
    }

    fn case_counts(&self) -> std::collections::BTreeMap<String, u64> {
        self.inner.case_counts()
    }

    #[pyo3(signature = (signs, min_top = 0.5, min_gap = 0.1, mode = "sequential"))]
    fn diagnose(
        &self,
        py: Python<'_>,
        signs: Vec<String>,
        min_top: f64,
        min_gap: f64,
        mode: &str,
    ) -> PyResult<Py<PyAny>> {
        let policy = InconclusivePolicy { min_top, min_gap, ..Default::default() };
        let d = self.inner.diagnose(&signs, &policy, parse_mode(mode)?).map_err(core_err)?;
        to_py(py, &d)
    }

    /// Adds any new (disease, sign) associations and counts one case.
    fn learn_case(&mut self, disease: &str, signs: Vec<String>) -> PyResult<()> {
        self.inner.learn_case(disease, &signs).map_err(core_err)
    }

    fn __len__(&self) -> usize {
        self.inner.diseases().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Memory(diseases={}, signs={}, version={})",
            self.inner.diseases().len(),
            self.inner.signs().len(),
            self.inner.version()
        )
    }
}

/// Encoder, decision policy and any loaded baseline models.
#[pyclass(name = "Engine", module = "bronchial_dx_py")]
struct PyEngine {
    inner: Engine,
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (min_top = 0.5, min_gap = 0.1, mode = "sequential", phi = None, model_dir = None))]
    fn new(min_top: f64, min_gap: f64, mode: &str, phi: Option<u32>, model_dir: Option<PathBuf>) -> PyResult<Self> {
        let mut inner = Engine {
            policy: InconclusivePolicy { min_top, min_gap, ..Default::default() },
            mode: parse_mode(mode)?,
            ..Engine::default()
        };
        if let Some(phi) = phi {
            inner.threshold_phi = phi;
        }
        if let Some(dir) = model_dir {
            inner.load_models(&dir).map_err(service_err)?;
        }
        Ok(Self { inner })
    }

    /// Question definitions, `core` or `professional`.
    #[pyo3(signature = (name = "core"))]
    fn questionnaire(&self, py: Python<'_>, name: &str) -> PyResult<Py<PyAny>> {
        match name {
            "core" => to_py(py, &self.inner.encoder.core),
            "professional" => to_py(py, &self.inner.encoder.professional),
            _ => Err(PyValueError::new_err(format!("unknown questionnaire `{name}`"))),
        }
    }

    /// Weighted core score of a complete `{id: 0|1}` answer map.
    fn score(&self, answers: &Bound<'_, PyAny>) -> PyResult<u32> {
        let map: std::collections::BTreeMap<String, i64> = answers.extract()?;
        let def = &self.inner.encoder.core;
        let r = ResponseSet::new(def, &map).map_err(core_err)?;
        compute_score(def, &r).map_err(core_err)
    }

    /// Reflective input vector for a diagnose payload.
    fn encode(&self, payload: &Bound<'_, PyAny>) -> PyResult<Vec<f64>> {
        let req = parse_diagnose(&from_py(payload)?, &self.inner.encoder, &self.inner.imaging).map_err(service_err)?;
        Ok(self.inner.encoder.encode(&req.input).map_err(core_err)?.as_slice().to_vec())
    }

    /// Signs the memory would be shown for a diagnose payload, in order.
    fn signs(&self, payload: &Bound<'_, PyAny>) -> PyResult<Vec<String>> {
        let req = parse_diagnose(&from_py(payload)?, &self.inner.encoder, &self.inner.imaging).map_err(service_err)?;
        Ok(self.inner.signs(&req.input))
    }

    /// Diagnoses one payload with the algorithm it names (default `cdamm`).
    fn diagnose(&self, py: Python<'_>, memory: &PyMemory, payload: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let req = parse_diagnose(&from_py(payload)?, &self.inner.encoder, &self.inner.imaging).map_err(service_err)?;
        let out = self.inner.run(&memory.inner, &req.input, req.algo).map_err(service_err)?;
        to_py(py, &out)
    }

    /// Trains and tests one learner; accepts the evaluate request body.
    #[pyo3(signature = (request = None))]
    fn evaluate(&self, py: Python<'_>, request: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
        let body = match request {
            Some(r) => from_py(r)?,
            None => Value::Object(Default::default()),
        };
        let req = EvaluateRequest::parse(&body).map_err(service_err)?;
        let enc = self.inner.encoder.clone();
        let report = py.detach(move || run_evaluation(&req, &enc, None)).map_err(service_err)?;
        to_py(py, &report)
    }
}

/// Metrics for a binary confusion tally.
#[pyfunction]
#[pyo3(signature = (tp, fp, tn, fn_, inconclusive = 0))]
fn summarize(py: Python<'_>, tp: u64, fp: u64, tn: u64, fn_: u64, inconclusive: u64) -> PyResult<Py<PyAny>> {
    to_py(py, &summarize_tally(&ConfusionTally::new(tp, fp, tn, fn_, inconclusive)))
}

/// Synthetic patients from a preset name or an inline config dict.
#[pyfunction]
#[pyo3(signature = (cohort = None, size = None, seed = None))]
fn generate_cohort(
    py: Python<'_>,
    cohort: Option<&Bound<'_, PyAny>>,
    size: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Py<PyAny>> {
    let mut cfg = match cohort {
        None => CohortConfig::default_preset(),
        Some(c) => match c.extract::<String>() {
            Ok(name) => CohortConfig::preset(&name).map_err(core_err)?,
            Err(_) => serde_json::from_value(from_py(c)?).map_err(|e| PyValueError::new_err(e.to_string()))?,
        },
    };
    if let Some(n) = size {
        cfg.size = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let enc = bronchial_dx::encoder::Encoder::default();
    let records = py.detach(|| generate(&cfg, &enc)).map_err(core_err)?;
    to_py(py, &records)
}

/// Threshold, segmentation and features of a row-major 8-bit image.
#[pyfunction]
#[pyo3(signature = (width, height, pixels, levels = 8, offset = (1, 0), symmetric = false, epsilon = 0.5, eight = false))]
#[allow(clippy::too_many_arguments)]
fn roi_features(
    py: Python<'_>,
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    levels: usize,
    offset: (i32, i32),
    symmetric: bool,
    epsilon: f64,
    eight: bool,
) -> PyResult<Py<PyAny>> {
    let img = GrayImage::new(width, height, pixels).map_err(core_err)?;
    let cfg = ImagingConfig {
        epsilon,
        connectivity: if eight { Connectivity::Eight } else { Connectivity::Four },
        glcm: GlcmOptions { levels, offset, symmetric },
    };
    let t = iterative_threshold(&img, epsilon).map_err(core_err)?;
    let features = extract_features(&img, &cfg).map_err(core_err)?;
    let out = PyDict::new(py);
    out.set_item("threshold", to_py(py, &t)?)?;
    out.set_item("features", to_py(py, &features)?)?;
    Ok(out.into_any().unbind())
}

/// Kronecker product of two matrices given as lists of rows.
#[pyfunction(name = "kronecker")]
fn kronecker_py(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&kronecker(&matrix(a)?, &matrix(b)?)))
}

#[pymodule]
pub fn bronchial_dx_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMemory>()?;
    m.add_class::<PyEngine>()?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(generate_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(roi_features, m)?)?;
    m.add_function(wrap_pyfunction!(kronecker_py, m)?)?;
    m.add("ValidationError", m.py().get_type::<ValidationError>())?;
    m.add("DISEASES", bronchial_dx::cdamm::DISEASES.to_vec())?;
    Ok(())
}
