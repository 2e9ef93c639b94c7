//! Python bindings for `canon_gnn`.
//!
//! Graphs and datasets are wrapped as classes; structured results (reports,
//! verdicts, alignments) come back as plain dicts built from their JSON form.

use canon_gnn::mpnn::{prepare_inputs, save_checkpoint, stratified_folds, train as train_model, Split, TrainOptions};
use canon_gnn::{
    apply_permutation, build_universe, canonical_form, graph_distance, isomorphic, probe, ugc, validate_ugc, wl,
    ColoredGraph, DistanceMode, GraphDataset, LabelUniverse, MpnnConfig, PeKind, Permutation, Readout,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

fn err(e: canon_gnn::Error) -> PyErr {
    match e {
        canon_gnn::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = canon_gnn::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Undirected graph with integer node colours and optional node labels.
#[pyclass(name = "Graph", module = "canon_gnn", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGraph {
    inner: ColoredGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n, edges, colors=None, id="g", labels=None))]
    fn new(
        n: usize,
        edges: Vec<(usize, usize)>,
        colors: Option<Vec<u32>>,
        id: &str,
        labels: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let g = ColoredGraph::new(id, n, &edges, colors.unwrap_or_else(|| vec![0; n])).map_err(err)?;
        let inner = match labels {
            Some(l) => g.with_labels(l).map_err(err)?,
            None => g,
        };
        Ok(PyGraph { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn colors(&self) -> Vec<u32> {
        self.inner.colors().to_vec()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<String>> {
        self.inner.labels().map(<[String]>::to_vec)
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.inner.n() && v < self.inner.n() && self.inner.has_edge(u, v)
    }

    fn degree(&self, v: usize) -> PyResult<usize> {
        if v >= self.inner.n() {
            return Err(PyValueError::new_err(format!("node {v} out of range")));
        }
        Ok(self.inner.degree(v))
    }

    fn with_color(&self, v: usize, color: u32) -> PyResult<Self> {
        Ok(PyGraph { inner: self.inner.with_color(v, color).map_err(err)? })
    }

    fn with_edge(&self, u: usize, v: usize, present: bool) -> PyResult<Self> {
        Ok(PyGraph { inner: self.inner.with_edge(u, v, present).map_err(err)? })
    }

    fn with_id(&self, id: &str) -> Self {
        PyGraph { inner: self.inner.clone().with_id(id) }
    }

    /// Relabel nodes: node `i` becomes node `mapping[i]`.
    fn permuted(&self, mapping: Vec<usize>) -> PyResult<Self> {
        let p = Permutation::new(mapping).map_err(err)?;
        Ok(PyGraph { inner: apply_permutation(&self.inner, &p).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(id={:?}, n={}, edges={})", self.inner.id(), self.inner.n(), self.inner.edge_count())
    }
}

/// A collection of graphs with unique ids, as read from the dataset JSON format.
#[pyclass(name = "Dataset", module = "canon_gnn", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: GraphDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(graphs: Vec<PyRef<'_, PyGraph>>) -> PyResult<Self> {
        let graphs = graphs.iter().map(|g| g.inner.clone()).collect();
        Ok(PyDataset { inner: GraphDataset::new(graphs).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: canon_gnn::load_dataset(path).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: GraphDataset::from_json(text).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        canon_gnn::save_dataset(&self.inner, path).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn graphs(&self) -> Vec<PyGraph> {
        self.inner.graphs().iter().map(|g| PyGraph { inner: g.clone() }).collect()
    }

    fn get(&self, id: &str) -> PyResult<PyGraph> {
        Ok(PyGraph { inner: self.inner.require(id).map_err(err)?.clone() })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(graphs={})", self.inner.len())
    }
}

/// Canonical ranks (1-based) and certificate bytes of a graph.
#[pyfunction(name = "canonical_form")]
fn canonical_form_of<'py>(py: Python<'py>, g: &PyGraph) -> PyResult<(Vec<usize>, Bound<'py, PyBytes>)> {
    let r = py.detach(|| canonical_form(&g.inner)).map_err(err)?;
    Ok((r.colouring.ranks().to_vec(), PyBytes::new(py, r.certificate.as_bytes())))
}

#[pyfunction(name = "isomorphic")]
fn is_isomorphic(py: Python<'_>, a: &PyGraph, b: &PyGraph) -> PyResult<bool> {
    py.detach(|| isomorphic(&a.inner, &b.inner)).map_err(err)
}

/// Alignment distance; `mode` is "auto", "exact" or "heuristic".
#[pyfunction]
#[pyo3(signature = (a, b, mode="auto"))]
fn distance<'py>(py: Python<'py>, a: &PyGraph, b: &PyGraph, mode: &str) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "exact" => DistanceMode::Exact,
        "heuristic" => DistanceMode::Heuristic,
        "auto" if a.inner.n() <= canon_gnn::distance::EXACT_LIMIT => DistanceMode::Exact,
        "auto" => DistanceMode::Heuristic,
        other => return Err(PyValueError::new_err(format!("unknown distance mode `{other}`"))),
    };
    let r = py.detach(|| graph_distance(&a.inner, &b.inner, mode)).map_err(err)?;
    to_py(py, &r)
}

/// Colour refinement on a pair with an optional positional encoding
/// ("none", "gc" or "ugc"; ugc needs `universe`).
#[pyfunction]
#[pyo3(signature = (a, b, pe="gc", universe=None))]
fn wl_test<'py>(
    py: Python<'py>,
    a: &PyGraph,
    b: &PyGraph,
    pe: &str,
    universe: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let pe: PeKind = parse(pe)?;
    let u = universe.map(LabelUniverse::from_labels);
    let v = py.detach(|| wl::wl_test(&a.inner, &b.inner, pe, u.as_ref())).map_err(err)?;
    to_py(py, &v)
}

/// Sorted label universe of a dataset.
#[pyfunction]
fn label_universe(d: &PyDataset) -> PyResult<Vec<String>> {
    Ok(build_universe(&d.inner).map_err(err)?.labels().to_vec())
}

/// UGC ranks (1-based positions in the sorted universe) of a labelled graph.
#[pyfunction]
fn ugc_ranks(g: &PyGraph, universe: Vec<String>) -> PyResult<Vec<usize>> {
    let u = LabelUniverse::from_labels(universe);
    Ok(ugc::ugc_colouring(&g.inner, &u).map_err(err)?.ranks().to_vec())
}

#[pyfunction]
fn validate<'py>(py: Python<'py>, d: &PyDataset) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| build_universe(&d.inner).and_then(|u| validate_ugc(&d.inner, &u)))
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
fn gen_csl(n: usize, skip: usize) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: wl::gen_csl(n, skip).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (n=wl::DEFAULT_CSL_N, skips=wl::DEFAULT_CSL_SKIPS.to_vec(), copies=wl::DEFAULT_CSL_COPIES, seed=0))]
fn csl_benchmark(n: usize, skips: Vec<usize>, copies: usize, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset { inner: wl::csl_benchmark(n, &skips, copies, seed).map_err(err)? })
}

#[pyfunction]
fn gen_wl_hard_pair(m: usize) -> PyResult<(PyGraph, PyGraph)> {
    let (a, b) = wl::gen_wl_hard_pair(m).map_err(err)?;
    Ok((PyGraph { inner: a }, PyGraph { inner: b }))
}

/// A pair differing in one node colour whose canonical ranks all disagree.
#[pyfunction]
#[pyo3(signature = (n, seed=0))]
fn gen_counterexample(n: usize, seed: u64) -> PyResult<(PyGraph, PyGraph)> {
    let cx = probe::gen_counterexample(n, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(err)?;
    Ok((PyGraph { inner: cx.g1 }, PyGraph { inner: cx.g2 }))
}

#[pyfunction]
#[pyo3(signature = (sizes=vec![6, 8, 10, 12], trials=20, seed=0))]
fn run_probe<'py>(py: Python<'py>, sizes: Vec<usize>, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| probe::run_probe(&sizes, trials, seed)).map_err(err)?;
    to_py(py, &r)
}

/// Train a classifier on one stratified fold of a class-labelled dataset.
/// Returns the training report; `checkpoint` writes the kept parameters.
#[pyfunction]
#[pyo3(signature = (
    d, pe="gc", readout="mean", layers=3, dim=32, lr=1e-3, epochs=300, patience=10,
    folds=5, fold=0, seed=0, checkpoint=None
))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    d: &PyDataset,
    pe: &str,
    readout: &str,
    layers: usize,
    dim: usize,
    lr: f64,
    epochs: usize,
    patience: usize,
    folds: usize,
    fold: usize,
    seed: u64,
    checkpoint: Option<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let pe: PeKind = parse(pe)?;
    let readout: Readout = parse(readout)?;
    if fold >= folds {
        return Err(PyValueError::new_err(format!("fold {fold} is out of range for {folds} folds")));
    }
    let report = py
        .detach(|| {
            let data = prepare_inputs(&d.inner, pe, readout, None)?;
            let ids = data.ids();
            let (tr, te) = stratified_folds(&data.targets(), folds, seed)?.swap_remove(fold);
            let split = Split {
                train_ids: tr.iter().map(|&i| ids[i].clone()).collect(),
                test_ids: te.iter().map(|&i| ids[i].clone()).collect(),
            };
            let config = MpnnConfig::new(data.input_width(), data.num_classes)
                .with_layers(layers)
                .with_hidden_dim(dim)
                .with_readout(readout)
                .with_seed(seed);
            let opts = TrainOptions {
                learning_rate: lr,
                max_epochs: epochs,
                patience,
                ..TrainOptions::default()
            };
            let (model, report) = train_model(&config, &opts, &data, &split)?;
            if let Some(p) = &checkpoint {
                save_checkpoint(&model, p)?;
            }
            Ok::<_, canon_gnn::Error>(report)
        })
        .map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn canon_gnn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(canonical_form_of, m)?)?;
    m.add_function(wrap_pyfunction!(is_isomorphic, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(wl_test, m)?)?;
    m.add_function(wrap_pyfunction!(label_universe, m)?)?;
    m.add_function(wrap_pyfunction!(ugc_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(gen_csl, m)?)?;
    m.add_function(wrap_pyfunction!(csl_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(gen_wl_hard_pair, m)?)?;
    m.add_function(wrap_pyfunction!(gen_counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(run_probe, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
