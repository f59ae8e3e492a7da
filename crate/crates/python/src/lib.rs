//! Python bindings: planning, building, template realisation, balance
//! checks and tree metrics.

use std::path::PathBuf;

use fairgram::dataset::{read_jsonl, InstanceRecord, PipelineConfig};
use fairgram::demo::demo_selection;
use fairgram::eval::{self, Prediction, ProductionOptions, ProductionSet, Setting};
use fairgram::lexicon::{read_clusters, select_clusters};
use fairgram::planner::{instantiate, plan_inventory};
use fairgram::realize::template_batch;
use fairgram::tree::{partition, InstanceTree};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn load_config(config: Option<PathBuf>, seed: Option<u64>) -> PyResult<PipelineConfig> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::from_path(&p).map_err(err)?,
        None => PipelineConfig::desk(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn options(include_intents: bool, multiset: bool) -> ProductionOptions {
    ProductionOptions { include_intents, multiset }
}

fn production_set(bracket: &str, post: Option<&str>, opts: ProductionOptions) -> PyResult<ProductionSet> {
    let tree = fairgram::tree::parse_bracket(bracket).map_err(err)?;
    Ok(eval::productions(&tree, post, opts))
}

/// A built instance tree.
#[pyclass(frozen, from_py_object, module = "fairgram_py")]
#[derive(Clone)]
struct Tree {
    inner: InstanceTree,
}

#[pymethods]
impl Tree {
    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    /// Fine-grained class of the instance.
    #[getter]
    fn intent(&self) -> String {
        self.inner.class().to_string()
    }

    #[getter]
    fn binary(&self) -> String {
        self.inner.binary.to_string()
    }

    /// Binary label with all injected subtrees removed.
    #[getter]
    fn binary_without_injections(&self) -> String {
        self.inner.binary_without_injections().to_string()
    }

    #[getter]
    fn has_injections(&self) -> bool {
        self.inner.has_injections()
    }

    #[getter]
    fn bracket(&self) -> String {
        self.inner.to_bracket().to_string()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Tree({}, {})", self.inner.id, self.inner.to_bracket())
    }
}

fn unwrap_trees(trees: &[Tree]) -> Vec<InstanceTree> {
    trees.iter().map(|t| t.inner.clone()).collect()
}

/// Plan summary: totals, per-kind pair and class counts, issues.
#[pyfunction]
#[pyo3(signature = (config=None, seed=None))]
fn plan<'py>(py: Python<'py>, config: Option<PathBuf>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = load_config(config, seed)?;
    let plan = plan_inventory(&cfg.planner()).map_err(err)?;
    to_py(py, &plan)
}

/// Instantiate the configured plan. Uses the built-in lexicon unless a
/// clusters file is given.
#[pyfunction]
#[pyo3(signature = (config=None, seed=None, clusters=None))]
fn build(config: Option<PathBuf>, seed: Option<u64>, clusters: Option<PathBuf>) -> PyResult<Vec<Tree>> {
    let cfg = load_config(config, seed)?;
    let plan = plan_inventory(&cfg.planner()).map_err(err)?;
    plan.require_feasible().map_err(err)?;
    let sel = match clusters {
        Some(p) => select_clusters(&read_clusters(&p).map_err(err)?, &cfg.clusters),
        None => demo_selection(&cfg.clusters, 2),
    };
    let flat = instantiate(&plan, &sel, cfg.seed).map_err(err)?;
    flat.iter().map(|f| partition(f).map(|inner| Tree { inner }).map_err(err)).collect()
}

/// Template posts for the given trees.
#[pyfunction]
#[pyo3(signature = (trees, seed=0))]
fn realize<'py>(py: Python<'py>, trees: Vec<Tree>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &template_batch(&unwrap_trees(&trees), seed))
}

/// Balance report over the given trees.
#[pyfunction]
fn verify_balance<'py>(py: Python<'py>, trees: Vec<Tree>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &fairgram::planner::verify_balance(&unwrap_trees(&trees), None))
}

/// Canonical form of a bracketed tree.
#[pyfunction]
fn parse_bracket(text: &str) -> PyResult<String> {
    Ok(fairgram::tree::parse_bracket(text).map_err(err)?.to_string())
}

type ProductionRow = (String, String, Option<usize>, usize);

/// `(label, token, position, count)` tuples of a bracketed tree.
#[pyfunction]
#[pyo3(signature = (bracket, post=None, include_intents=true, multiset=false))]
fn productions(
    bracket: &str,
    post: Option<&str>,
    include_intents: bool,
    multiset: bool,
) -> PyResult<Vec<ProductionRow>> {
    let set = production_set(bracket, post, options(include_intents, multiset))?;
    Ok(set.iter().map(|(p, n)| (p.label.clone(), p.token.clone(), p.index, n)).collect())
}

#[pyfunction]
#[pyo3(signature = (predicted, gold, post=None, include_intents=true, multiset=false))]
fn pf1(predicted: &str, gold: &str, post: Option<&str>, include_intents: bool, multiset: bool) -> PyResult<f64> {
    let opts = options(include_intents, multiset);
    Ok(eval::pf1(&production_set(predicted, post, opts)?, &production_set(gold, post, opts)?))
}

#[pyfunction]
#[pyo3(signature = (predicted, gold, post=None, include_intents=true, multiset=false))]
fn ema(predicted: &str, gold: &str, post: Option<&str>, include_intents: bool, multiset: bool) -> PyResult<f64> {
    let opts = options(include_intents, multiset);
    Ok(eval::ema(&production_set(predicted, post, opts)?, &production_set(gold, post, opts)?))
}

/// None when a score is zero or the list is empty.
#[pyfunction]
fn geometric_mean(scores: Vec<f64>) -> Option<f64> {
    eval::geometric_mean(&scores).value
}

/// Score a predictions file against a gold records file.
#[pyfunction]
#[pyo3(signature = (gold, predictions, setting="icsf", include_intents=true, multiset=false))]
fn evaluate<'py>(
    py: Python<'py>,
    gold: PathBuf,
    predictions: PathBuf,
    setting: &str,
    include_intents: bool,
    multiset: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let setting = match setting {
        "cls" => Setting::Cls,
        "icsf" => Setting::Icsf,
        other => return Err(err(format!("unknown setting {other:?}; use cls or icsf"))),
    };
    let gold: Vec<InstanceRecord> = read_jsonl(&gold).map_err(err)?;
    let gold: Vec<_> = gold.iter().map(InstanceRecord::to_gold).collect();
    let preds: Vec<Prediction> = read_jsonl(&predictions).map_err(err)?;
    to_py(py, &eval::evaluate(&gold, &preds, setting, options(include_intents, multiset)))
}

#[pymodule]
fn fairgram_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Tree>()?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(build, m)?)?;
    m.add_function(wrap_pyfunction!(realize, m)?)?;
    m.add_function(wrap_pyfunction!(verify_balance, m)?)?;
    m.add_function(wrap_pyfunction!(parse_bracket, m)?)?;
    m.add_function(wrap_pyfunction!(productions, m)?)?;
    m.add_function(wrap_pyfunction!(pf1, m)?)?;
    m.add_function(wrap_pyfunction!(ema, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_mean, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
