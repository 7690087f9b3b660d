//! Python bindings: molecules, similarity, surrogate properties, campaigns,
//! trajectory buffers and metric reports.
//!
//! Campaign results cross the boundary as JSON strings (one object per
//! campaign, the same records the CLI writes).

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use leadopt::buffer::BufferHandle;
use leadopt::fingerprint::FingerprintParams;

pub mod api;

fn err(e: String) -> PyErr {
    PyValueError::new_err(e)
}

/// Canonical SMILES of a molecule.
#[pyfunction]
fn canonical_form(smiles: &str) -> PyResult<String> {
    api::canonical(smiles).map_err(err)
}

/// `(valid, violations)` for a SMILES string.
#[pyfunction]
fn validate(smiles: &str) -> (bool, Vec<String>) {
    api::validity(smiles)
}

/// Tanimoto similarity of two molecules on default Morgan fingerprints.
#[pyfunction]
fn tanimoto(a: &str, b: &str) -> PyResult<f64> {
    api::similarity(a, b).map_err(err)
}

/// Builtin surrogate value of `property` for a molecule.
#[pyfunction]
fn evaluate(property: &str, smiles: &str) -> PyResult<f64> {
    api::property_value(property, smiles).map_err(err)
}

/// Seeded disjoint train/test leads from the synthetic analog series.
#[pyfunction]
fn lead_split(seed: u64, n_train: usize, n_test: usize) -> (Vec<String>, Vec<String>) {
    leadopt::testbed::lead_split(seed, n_train, n_test)
}

/// Metric table for a list of campaign JSON records.
#[pyfunction]
fn report(results: Vec<String>) -> PyResult<String> {
    api::report_table(&results).map_err(err)
}

#[pyclass(frozen)]
struct Buffer {
    inner: Arc<BufferHandle>,
}

#[pymethods]
impl Buffer {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Buffer> {
        let inner = BufferHandle::load(path.as_ref(), FingerprintParams::default()).map_err(|e| err(e.to_string()))?;
        Ok(Buffer { inner: Arc::new(inner) })
    }

    /// Parallel-mode campaigns over `leads`; each success becomes a record.
    #[staticmethod]
    #[pyo3(signature = (leads, property, seed=0, steps=3))]
    fn build(py: Python<'_>, leads: Vec<String>, property: &str, seed: u64, steps: usize) -> PyResult<Buffer> {
        let inner = py.detach(|| api::build_buffer(&leads, property, seed, steps)).map_err(err)?;
        Ok(Buffer { inner: Arc::new(inner) })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.flush(path.as_ref()).map_err(|e| err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(lead, similarity, [(tool_id, prompt_index), ...])` of the closest record.
    fn top1_similar(&self, smiles: &str, property: &str) -> PyResult<Option<api::Hit>> {
        api::top1(&self.inner, smiles, property).map_err(err)
    }
}

#[pyclass(frozen)]
struct Campaign {
    config: leadopt::orchestrate::RunConfig,
}

#[pymethods]
impl Campaign {
    #[new]
    #[pyo3(signature = (property, mode="online", steps=3, tau=0.5, seed=0, retry=true, buffer=None))]
    fn new(
        property: &str,
        mode: &str,
        steps: usize,
        tau: f64,
        seed: u64,
        retry: bool,
        buffer: Option<PyRef<'_, Buffer>>,
    ) -> PyResult<Campaign> {
        let settings = api::Settings {
            mode: mode.to_string(),
            property: property.to_string(),
            steps,
            tau,
            seed,
            retry,
        };
        let config = api::config(&settings, buffer.map(|b| b.inner.clone())).map_err(err)?;
        Ok(Campaign { config })
    }

    /// One campaign from `lead`, as a JSON record.
    fn run(&self, py: Python<'_>, lead: &str) -> PyResult<String> {
        py.detach(|| api::campaign_json(&self.config, lead)).map_err(err)
    }

    fn run_many(&self, py: Python<'_>, leads: Vec<String>) -> PyResult<Vec<String>> {
        py.detach(|| leads.iter().map(|l| api::campaign_json(&self.config, l)).collect::<Result<Vec<_>, _>>())
            .map_err(err)
    }
}

#[pymodule]
fn leadopt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(canonical_form, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(tanimoto, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(lead_split, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_class::<Buffer>()?;
    m.add_class::<Campaign>()?;
    Ok(())
}
