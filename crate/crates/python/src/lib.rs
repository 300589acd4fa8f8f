//! Python bindings: the pipeline stages plus a few grid utilities.

use std::path::PathBuf;

use gridrisk::gnn::Head;
use gridrisk::grid::{compute_ptdf, parse_case};
use gridrisk::pipeline::{Pipeline, PipelineConfig};
use gridrisk::risk::{MetricKind, Source};
use gridrisk::scuc::{LabelOptions, LabelStatus};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: gridrisk::Error) -> PyErr {
    match e {
        gridrisk::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn source(name: &str) -> PyResult<Source> {
    match name {
        "milp" => Ok(Source::Milp),
        "gnn" => Ok(Source::Gnn),
        _ => Err(PyValueError::new_err(format!("unknown source `{name}` (milp, gnn)"))),
    }
}

/// One experiment loaded from a TOML config.
#[pyclass(name = "Pipeline", frozen)]
struct PyPipeline {
    inner: Pipeline,
}

#[pymethods]
impl PyPipeline {
    #[new]
    #[pyo3(signature = (config, overrides = Vec::new(), output = None))]
    fn new(config: PathBuf, overrides: Vec<String>, output: Option<PathBuf>) -> PyResult<Self> {
        let mut cfg = PipelineConfig::load_with_overrides(&config, &overrides).map_err(to_py)?;
        if let Some(o) = output {
            cfg.output = o;
        }
        Ok(Self { inner: Pipeline::new(cfg).map_err(to_py)? })
    }

    /// Hashes stamped on the scenario, label, model and report artifacts.
    #[getter]
    fn config_hashes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let h = &self.inner.hashes;
        let d = PyDict::new(py);
        d.set_item("scenarios", &h.scenarios)?;
        d.set_item("labels", &h.labels)?;
        d.set_item("models", &h.models)?;
        d.set_item("reports", &h.reports)?;
        Ok(d)
    }

    #[getter]
    fn output(&self) -> PathBuf {
        self.inner.config.output.clone()
    }

    /// Draws the scenarios; returns their count.
    fn sample(&self) -> PyResult<usize> {
        Ok(self.inner.sample().map_err(to_py)?.n)
    }

    /// Labels every scenario; returns counts by solver status.
    #[pyo3(signature = (workers = 1))]
    fn label<'py>(&self, py: Python<'py>, workers: usize) -> PyResult<Bound<'py, PyDict>> {
        let opts = LabelOptions { workers, ..LabelOptions::default() };
        let labels = self.inner.label(&opts).map_err(to_py)?;
        let count = |s: LabelStatus| labels.records.iter().filter(|r| r.status == s).count();
        let d = PyDict::new(py);
        d.set_item("optimal", count(LabelStatus::Optimal))?;
        d.set_item("gap_limited", count(LabelStatus::GapLimited))?;
        d.set_item("failed", count(LabelStatus::Failed))?;
        Ok(d)
    }

    /// Trains one head (`generation`, `shedding` or `branch-flow`); returns
    /// the best epoch and the test-set MRE table.
    fn train<'py>(&self, py: Python<'py>, head: &str) -> PyResult<Bound<'py, PyDict>> {
        let head: Head = head.parse().map_err(to_py)?;
        let (_, report, mre) = self.inner.train(head).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("best_epoch", report.best_epoch)?;
        d.set_item("epochs", report.epochs.len())?;
        d.set_item("best_val_loss", report.best_val_loss)?;
        let table = PyDict::new(py);
        for (name, row) in mre.names.iter().zip(&mre.values) {
            table.set_item(name, row.clone())?;
        }
        d.set_item("mre", table)?;
        Ok(d)
    }

    /// Writes the risk report of `milp` or `gnn`; returns the JSON path.
    fn assess(&self, source_name: &str) -> PyResult<PathBuf> {
        let s = source(source_name)?;
        self.inner.assess(s).map_err(to_py)?;
        Ok(self.inner.report_path(s, "json"))
    }

    /// Compares the GNN report with the MILP report.
    fn compare<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let div = self.inner.compare().map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("rows", div.rows.len())?;
        d.set_item("exceeded", div.rows.iter().filter(|r| r.exceeds).count())?;
        d.set_item("max_probability_diff", div.max_abs(MetricKind::Probability))?;
        d.set_item("max_risk_relative_diff", div.max_rel())?;
        Ok(d)
    }

    /// Writes the per-figure CSVs; returns their paths.
    fn report(&self) -> PyResult<Vec<PathBuf>> {
        self.inner.report().map_err(to_py)
    }
}

/// PTDF matrix (branches × buses) of a case file's text.
#[pyfunction]
fn ptdf(case_text: &str) -> PyResult<Vec<Vec<f64>>> {
    let grid = parse_case(case_text).map_err(to_py)?;
    let m = compute_ptdf(&grid).map_err(to_py)?;
    Ok(m.entries.rows().into_iter().map(|r| r.to_vec()).collect())
}

#[pymodule]
fn gridrisk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPipeline>()?;
    m.add_function(wrap_pyfunction!(ptdf, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
