//! Python bindings: graphs, parameters, the encoder, scoring, decoding and the
//! oracle check.

use mhgrn::pathreason::{count_paths, decode_path};
use mhgrn::qa::{self, QaInstance};
use mhgrn::{encode as encode_graph, synth, DenseMatrix, EncoderConfig, Error, ModelDims, ModelParams, MultiRelGraph, RelationVocab};
use pyo3::exceptions::{PyLookupError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NoPath(_) | Error::NoTriples | Error::NoAnswerNodes => PyLookupError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn config_for(params: &ModelParams, ablate: Option<&str>) -> PyResult<EncoderConfig> {
    let config = EncoderConfig::for_params(params);
    match ablate {
        Some(flags) => config.ablate(flags).map_err(to_py),
        None => Ok(config),
    }
}

#[pyclass(name = "RelationVocab", module = "mhgrn_py", frozen)]
struct PyVocab {
    inner: RelationVocab,
}

#[pymethods]
impl PyVocab {
    #[new]
    fn new() -> Self {
        Self { inner: RelationVocab::conceptnet() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: RelationVocab::from_json(text).map_err(to_py)? })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    fn merge_relation(&self, raw: &str) -> PyResult<usize> {
        self.inner.merge_relation(raw).map_err(to_py)
    }

    fn reverse(&self, r: usize) -> usize {
        self.inner.reverse(r)
    }

    fn name(&self, r: usize) -> String {
        self.inner.name(r)
    }
}

#[pyclass(name = "Graph", module = "mhgrn_py", frozen)]
struct PyGraph {
    inner: MultiRelGraph,
}

#[pymethods]
impl PyGraph {
    /// `phi` holds "q", "a" or "o" per node; edges are `(source, relation, target)`.
    #[new]
    #[pyo3(signature = (phi, m, edges))]
    fn new(phi: Vec<String>, m: usize, edges: Vec<(usize, usize, usize)>) -> PyResult<Self> {
        let phi = phi.iter().map(|t| mhgrn::NodeType::from_tag(t)).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
        Ok(Self { inner: MultiRelGraph::new(phi, None, m, edges).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (text, m=None))]
    fn from_json(text: &str, m: Option<usize>) -> PyResult<Self> {
        Ok(Self { inner: MultiRelGraph::from_json(text, m).map_err(to_py)? })
    }

    /// `complete:n`, `chain:n` or `erdos:n:deg:m[:seed]`
    #[staticmethod]
    fn synthetic(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: synth::parse(spec).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn phi(&self) -> Vec<&'static str> {
        self.inner.phi().iter().map(|t| t.tag()).collect()
    }

    fn edges(&self) -> Vec<(usize, usize, usize)> {
        self.inner.triples().collect()
    }

    /// Walk counts for lengths `1..=k`.
    fn count_paths(&self, k: usize) -> PyResult<Vec<u64>> {
        count_paths(&self.inner, k).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={}, edges={})", self.inner.n(), self.inner.m(), self.inner.num_edges())
    }
}

#[pyclass(name = "Params", module = "mhgrn_py", frozen)]
struct PyParams {
    inner: ModelParams,
}

#[pymethods]
impl PyParams {
    #[staticmethod]
    #[pyo3(signature = (d_in, d, d_out, d_s, k, m, seed=13, h_att=16, rho_hidden=32))]
    #[allow(clippy::too_many_arguments)]
    fn random(d_in: usize, d: usize, d_out: usize, d_s: usize, k: usize, m: usize, seed: u64, h_att: usize, rho_hidden: usize) -> Self {
        let dims = ModelDims { d_in, d, d_out, d_s, k, m, h_att, rho_hidden, seed, ..Default::default() };
        Self { inner: ModelParams::random(dims) }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: ModelParams::load(path).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ModelParams::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[getter]
    fn num_scalars(&self) -> usize {
        self.inner.num_scalars()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.dims().k
    }

    #[getter]
    fn d_s(&self) -> usize {
        self.inner.dims().d_s
    }
}

/// Runs the encoder. Returns a dict with the pooled vector `g`, per-node hop
/// weights and answer pooling weights.
#[pyfunction]
#[pyo3(signature = (graph, features, s, params, ablate=None))]
fn encode<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    features: Vec<Vec<f64>>,
    s: Vec<f64>,
    params: &PyParams,
    ablate: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let h = DenseMatrix::from_rows(&features).map_err(to_py)?;
    let config = config_for(&params.inner, ablate)?;
    let out = encode_graph(&graph.inner, &h, &s, &params.inner, &config).map_err(to_py)?;
    let plausibility = qa::plausibility(&s, &out.g_vec, &params.inner).map_err(to_py)?;
    let dict = PyDict::new(py);
    dict.set_item("g", out.g_vec)?;
    dict.set_item("hop_weights", out.hop_weights.to_rows())?;
    dict.set_item("pool_weights", out.pool_weights)?;
    dict.set_item("plausibility", plausibility)?;
    Ok(dict)
}

/// Per-option plausibility for an instance file.
#[pyfunction]
#[pyo3(signature = (params, instance_path, ablate=None))]
fn score(params: &PyParams, instance_path: &str, ablate: Option<&str>) -> PyResult<Vec<f64>> {
    let config = config_for(&params.inner, ablate)?;
    let instance = QaInstance::load(instance_path, Some(params.inner.dims().m)).map_err(to_py)?;
    qa::option_scores(&instance, &params.inner, &config).map_err(to_py)
}

/// Best reasoning path, as JSON, for the highest scoring option of an instance.
#[pyfunction]
#[pyo3(signature = (params, instance_path, ablate=None))]
fn decode(params: &PyParams, instance_path: &str, ablate: Option<&str>) -> PyResult<String> {
    let p = &params.inner;
    let config = config_for(p, ablate)?;
    let instance = QaInstance::load(instance_path, Some(p.dims().m)).map_err(to_py)?;
    let scores = qa::option_scores(&instance, p, &config).map_err(to_py)?;
    let option = &instance.options()[qa::argmax(&scores)];
    let out = encode_graph(&option.graph, &option.features, &option.s, p, &config).map_err(to_py)?;
    let path = decode_path(&option.graph, &out, &option.s, p, &config).map_err(to_py)?;
    let vocab = RelationVocab::conceptnet();
    let names = (p.dims().m == vocab.m()).then_some(&vocab);
    Ok(path.to_json(names).to_string())
}

#[pyfunction]
fn qa_loss(scores: Vec<f64>, correct: usize) -> PyResult<f64> {
    qa::qa_loss(&scores, correct).map_err(to_py)
}

/// Largest DP-vs-enumeration difference over `trials` random graphs.
#[pyfunction]
#[pyo3(signature = (seed=13, n=8, m=3, k=3, trials=20))]
fn oracle_check(seed: u64, n: usize, m: usize, k: usize, trials: u64) -> PyResult<f64> {
    if n > 12 {
        return Err(PyValueError::new_err("n is capped at 12"));
    }
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        worst = worst.max(oracle_trial(seed.wrapping_add(t), n, m, k).map_err(to_py)?);
    }
    Ok(worst)
}

fn oracle_trial(seed: u64, n: usize, m: usize, k: usize) -> mhgrn::Result<f64> {
    use mhgrn::encoder::{multihop_pass, type_transform};
    use mhgrn::pathreason::brute_force_zk;
    let mut rng = mhgrn::Rng::new(seed);
    let graph = synth::bernoulli(n, m, 0.25, &mut rng);
    let dims = ModelDims { d_in: 3, d: 3, d_out: 3, d_s: 2, k, m, h_att: 3, rho_hidden: 2, seed, ..Default::default() };
    let params = ModelParams::random(dims);
    let h = mhgrn::numkit::glorot_init(n, 3, &mut rng);
    let s = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
    let x = type_transform(&h, graph.phi(), &params, &EncoderConfig::for_params(&params))?;
    let dp = multihop_pass(&x, &graph, &s, &params, k)?;
    let mut worst: f64 = 0.0;
    for hop in 1..=k {
        let (z, _) = brute_force_zk(&graph, &x, &s, &params, hop, k)?;
        worst = worst.max(dp.z[hop - 1].max_abs_diff(&z));
    }
    Ok(worst)
}

#[pymodule]
fn mhgrn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVocab>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(qa_loss, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    Ok(())
}
