//! Python bindings: count tables, analysis configuration, the Sparse SSRV
//! analysis and its baselines, the synthetic generator, and the KDE mode
//! utilities.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sparse_ssrv::baselines::DEFAULT_INFORMED_GAMMA2;
use sparse_ssrv::inference::benjamini_hochberg as bh;
use sparse_ssrv::io::{self as sio, LogBase, TableFormat};
use sparse_ssrv::kde::{self, KdeSpec, ModeSearch};
use sparse_ssrv::sim::{self, Scenario};
use sparse_ssrv::{ConditionLabels, Error, ScalePrior};

fn to_py(err: Error) -> PyErr {
    if err.is_io() {
        PyOSError::new_err(err.to_string())
    } else {
        PyValueError::new_err(err.to_string())
    }
}

fn labels_from(values: Vec<bool>) -> PyResult<ConditionLabels> {
    ConditionLabels::new(values).map_err(to_py)
}

/// Features × samples table of non-negative integer counts.
#[pyclass(name = "CountTable", module = "sparse_ssrv", from_py_object)]
#[derive(Clone)]
struct PyCountTable {
    inner: sparse_ssrv::CountTable,
}

#[pymethods]
impl PyCountTable {
    /// `counts[d][n]` is the count of feature `d` in sample `n`.
    #[new]
    #[pyo3(signature = (counts, feature_ids=None, sample_ids=None))]
    fn new(counts: Vec<Vec<u64>>, feature_ids: Option<Vec<String>>, sample_ids: Option<Vec<String>>) -> PyResult<Self> {
        let d = counts.len();
        let n = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|row| row.len() != n) {
            return Err(PyValueError::new_err("every row of counts must have the same length"));
        }
        let flat: Vec<u64> = counts.into_iter().flatten().collect();
        let array = ndarray::Array2::from_shape_vec((d, n), flat).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let feature_ids = feature_ids.unwrap_or_else(|| (1..=d).map(|i| format!("f{i}")).collect());
        let sample_ids = sample_ids.unwrap_or_else(|| (1..=n).map(|i| format!("s{i}")).collect());
        let inner = sparse_ssrv::CountTable::new(feature_ids, sample_ids, array).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Reads a delimited count table (features as rows unless `transpose`).
    #[staticmethod]
    #[pyo3(signature = (path, transpose=false, delimiter=None))]
    fn read(path: &str, transpose: bool, delimiter: Option<char>) -> PyResult<Self> {
        let format = TableFormat {
            delimiter: delimiter.map(|c| c as u8),
            transpose,
        };
        Ok(Self {
            inner: sio::read_count_table(path, &format).map_err(to_py)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        sio::write_count_table(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.num_features()
    }

    #[getter]
    fn num_samples(&self) -> usize {
        self.inner.num_samples()
    }

    #[getter]
    fn feature_ids(&self) -> Vec<String> {
        self.inner.feature_ids().to_vec()
    }

    #[getter]
    fn sample_ids(&self) -> Vec<String> {
        self.inner.sample_ids().to_vec()
    }

    #[getter]
    fn depths(&self) -> Vec<u64> {
        self.inner.depths().to_vec()
    }

    fn counts(&self) -> Vec<Vec<u64>> {
        self.inner.counts().outer_iter().map(|row| row.to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "CountTable({} features x {} samples)",
            self.inner.num_features(),
            self.inner.num_samples()
        )
    }
}

/// Settings for one analysis run.
#[pyclass(name = "AnalysisConfig", module = "sparse_ssrv", from_py_object)]
#[derive(Clone)]
struct PyAnalysisConfig {
    inner: sparse_ssrv::AnalysisConfig,
}

#[pymethods]
impl PyAnalysisConfig {
    #[new]
    #[pyo3(signature = (
        alpha_prior=0.5, num_draws=128, seed=0, target_fdr=0.05, kde_grid_size=512,
        filter_min_mean_count=0.0, filter_min_prevalence=0.0, mode_search_interval=None,
        collect_diagnostics=true
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        alpha_prior: f64,
        num_draws: usize,
        seed: u64,
        target_fdr: f64,
        kde_grid_size: usize,
        filter_min_mean_count: f64,
        filter_min_prevalence: f64,
        mode_search_interval: Option<(f64, f64)>,
        collect_diagnostics: bool,
    ) -> PyResult<Self> {
        let inner = sparse_ssrv::AnalysisConfig {
            alpha_prior,
            num_draws,
            seed,
            target_fdr,
            mode_search_interval,
            kde_grid_size,
            filter_min_mean_count,
            filter_min_prevalence,
            collect_diagnostics,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn num_draws(&self) -> usize {
        self.inner.num_draws
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn target_fdr(&self) -> f64 {
        self.inner.target_fdr
    }

    #[getter]
    fn alpha_prior(&self) -> f64 {
        self.inner.alpha_prior
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "AnalysisConfig(num_draws={}, seed={}, target_fdr={})",
            self.inner.num_draws, self.inner.seed, self.inner.target_fdr
        )
    }
}

/// Per-feature posterior summaries of one analysis.
#[pyclass(name = "Report", module = "sparse_ssrv")]
struct PyReport {
    inner: sparse_ssrv::DaReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn method(&self) -> String {
        self.inner.method.clone()
    }

    #[getter]
    fn feature_ids(&self) -> Vec<String> {
        self.inner.feature_ids.clone()
    }

    #[getter]
    fn scale_model(&self) -> &'static str {
        self.inner.scale_model_kind.as_str()
    }

    #[getter]
    fn scale_variance(&self) -> f64 {
        self.inner.scale_variance
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn num_significant(&self) -> usize {
        self.inner.num_significant()
    }

    fn significant_ids(&self) -> Vec<String> {
        self.inner.significant_ids().into_iter().map(String::from).collect()
    }

    /// One dict per feature with mean_lfc, sd_lfc, ci_low, ci_high, tail_p,
    /// q_value and significant.
    fn summaries<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .feature_ids
            .iter()
            .zip(&self.inner.summaries)
            .map(|(id, s)| {
                let d = PyDict::new(py);
                d.set_item("feature_id", id)?;
                d.set_item("mean_lfc", s.mean_lfc)?;
                d.set_item("sd_lfc", s.sd_lfc)?;
                d.set_item("ci_low", s.ci_low)?;
                d.set_item("ci_high", s.ci_high)?;
                d.set_item("tail_p", s.tail_p)?;
                d.set_item("q_value", s.q_value)?;
                d.set_item("significant", s.significant)?;
                Ok(d)
            })
            .collect()
    }

    /// results.tsv content as a string.
    #[pyo3(signature = (log_base="e"))]
    fn results_tsv(&self, log_base: &str) -> PyResult<String> {
        Ok(sio::results_tsv(&self.inner, LogBase::parse(log_base).map_err(to_py)?))
    }

    /// Writes results.tsv, manifest.json and diagnostics into `dir`.
    #[pyo3(signature = (dir, log_base="e"))]
    fn write(&self, dir: &str, log_base: &str) -> PyResult<Vec<String>> {
        let paths = sio::write_report(&self.inner, dir, LogBase::parse(log_base).map_err(to_py)?).map_err(to_py)?;
        Ok(paths.into_iter().map(|p| p.display().to_string()).collect())
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.summaries.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(method={:?}, features={}, significant={})",
            self.inner.method,
            self.inner.summaries.len(),
            self.inner.num_significant()
        )
    }
}

/// Runs an analysis. `labels[n]` is true (or 1) for case samples. `method`
/// is one of sparse-ssrv, clr, gaussian-clr, informed; informed needs
/// `loads`.
#[pyfunction]
#[pyo3(signature = (table, labels, config=None, method="sparse-ssrv", gamma2=None, loads=None))]
fn analyze(
    py: Python<'_>,
    table: &PyCountTable,
    labels: Vec<bool>,
    config: Option<PyAnalysisConfig>,
    method: &str,
    gamma2: Option<f64>,
    loads: Option<Vec<f64>>,
) -> PyResult<PyReport> {
    let labels = labels_from(labels)?;
    let config = config.map(|c| c.inner).unwrap_or_default();
    let gamma2 = gamma2.unwrap_or(DEFAULT_INFORMED_GAMMA2);
    let prior = match method {
        "sparse-ssrv" => None,
        "clr" => Some(ScalePrior::ClrDegenerate),
        "gaussian-clr" => Some(ScalePrior::GaussianClr { gamma2 }),
        "informed" => Some(ScalePrior::InformedLoad {
            loads: loads.ok_or_else(|| PyValueError::new_err("the informed method needs loads"))?,
            gamma2,
        }),
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    let table = &table.inner;
    let report = py
        .detach(|| match &prior {
            None => sparse_ssrv::run_sparse_ssrv(table, &labels, &config),
            Some(prior) => sparse_ssrv::run_baseline(table, &labels, &config, prior),
        })
        .map_err(to_py)?;
    Ok(PyReport { inner: report })
}

fn generator_spec(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<sparse_ssrv::GeneratorSpec> {
    let mut value = serde_json::to_value(sparse_ssrv::GeneratorSpec::default())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    if let Some(kwargs) = kwargs {
        let obj = value.as_object_mut().expect("spec serializes to an object");
        for (k, v) in kwargs.iter() {
            let key: String = k.extract()?;
            if !obj.contains_key(&key) {
                return Err(PyValueError::new_err(format!("unknown generator setting '{key}'")));
            }
            let json = if let Ok(b) = v.extract::<bool>() {
                serde_json::Value::from(b)
            } else if let Ok(i) = v.extract::<u64>() {
                serde_json::Value::from(i)
            } else {
                serde_json::Value::from(v.extract::<f64>()?)
            };
            obj.insert(key, json);
        }
    }
    serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Generates a synthetic dataset. Keyword arguments override generator
/// settings (num_features, num_samples, depth, prop_relevant, pos_frac,
/// base_log_mean, base_log_sd, load_sd, poisson_depth, case_load_multiplier,
/// seed). Returns a dict with table, labels, truth, true_loads, warnings.
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn simulate<'py>(py: Python<'py>, kwargs: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let spec = generator_spec(kwargs)?;
    let data = sparse_ssrv::generate(&spec).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("labels", data.labels.assignment().to_vec())?;
    out.set_item("truth", data.truth.clone())?;
    out.set_item("true_loads", data.true_loads.clone())?;
    out.set_item("warnings", data.warnings.clone())?;
    out.set_item("table", PyCountTable { inner: data.table }.into_pyobject(py)?)?;
    Ok(out)
}

/// Scores methods over replicated synthetic datasets of one scenario.
/// Returns one dict per method with fdr, tpr, f_half, discovery_fraction
/// and failures.
#[pyfunction]
#[pyo3(signature = (methods, replicates=20, num_draws=1000, seed=0, gamma2=None, **kwargs))]
fn benchmark<'py>(
    py: Python<'py>,
    methods: Vec<String>,
    replicates: usize,
    num_draws: usize,
    seed: u64,
    gamma2: Option<f64>,
    kwargs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = generator_spec(kwargs)?;
    let methods = methods
        .iter()
        .map(|m| sim::Method::parse(m, gamma2))
        .collect::<sparse_ssrv::Result<Vec<_>>>()
        .map_err(to_py)?;
    let config = sparse_ssrv::AnalysisConfig::default().with_draws(num_draws).with_seed(seed);
    let scenario = Scenario {
        name: "scenario".into(),
        spec,
    };
    let result = py
        .detach(|| sim::run_benchmark(&[scenario], &methods, replicates, &config))
        .map_err(to_py)?;
    result
        .scores
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("method", &s.method)?;
            d.set_item("fdr", s.fdr)?;
            d.set_item("tpr", s.tpr)?;
            d.set_item("f_half", s.f_half)?;
            d.set_item("discovery_fraction", s.discovery_fraction)?;
            d.set_item("replicates", s.replicates)?;
            d.set_item("failures", s.failures)?;
            Ok(d)
        })
        .collect()
}

fn spec_for(values: &[f64], bandwidth: Option<f64>, interval: Option<(f64, f64)>, grid_size: usize) -> PyResult<KdeSpec> {
    let (auto, _) = ModeSearch { interval, grid_size }.spec_for(values);
    match bandwidth {
        None => Ok(auto),
        Some(h) => KdeSpec::new(h, auto.eval_interval, grid_size).map_err(to_py),
    }
}

fn check_values(values: &[f64]) -> PyResult<()> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(PyValueError::new_err("values must be a non-empty list of finite numbers"));
    }
    Ok(())
}

/// Silverman bandwidth `0.9 min(sd, IQR/1.34) n^(-1/5)`.
#[pyfunction]
fn default_bandwidth(values: Vec<f64>) -> PyResult<f64> {
    kde::default_bandwidth(&values).map_err(to_py)
}

/// Gaussian KDE of `values` evaluated at `t`.
#[pyfunction]
#[pyo3(signature = (values, t, bandwidth=None))]
fn kde_density(values: Vec<f64>, t: f64, bandwidth: Option<f64>) -> PyResult<f64> {
    check_values(&values)?;
    let spec = spec_for(&values, bandwidth, None, 512)?;
    Ok(kde::kde_density(&values, &spec, t))
}

/// Argmax of the Gaussian KDE over `interval` (default
/// `[min - 3h, max + 3h]`).
#[pyfunction]
#[pyo3(signature = (values, bandwidth=None, interval=None, grid_size=512))]
fn parzen_mode(values: Vec<f64>, bandwidth: Option<f64>, interval: Option<(f64, f64)>, grid_size: usize) -> PyResult<f64> {
    check_values(&values)?;
    let spec = spec_for(&values, bandwidth, interval, grid_size)?;
    Ok(kde::parzen_mode(&values, &spec))
}

/// Benjamini–Hochberg adjusted p-values, in input order.
#[pyfunction]
fn benjamini_hochberg(p_values: Vec<f64>) -> Vec<f64> {
    bh(&p_values)
}

#[pymodule]
#[pyo3(name = "sparse_ssrv")]
fn sparse_ssrv_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", sparse_ssrv::inference::SOFTWARE_VERSION)?;
    m.add_class::<PyCountTable>()?;
    m.add_class::<PyAnalysisConfig>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(default_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(kde_density, m)?)?;
    m.add_function(wrap_pyfunction!(parzen_mode, m)?)?;
    m.add_function(wrap_pyfunction!(benjamini_hochberg, m)?)?;
    Ok(())
}
