//! Python bindings for the wlsh library: datasets, weighted distances,
//! planning, index build, and search.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use wlsh::bench;
use wlsh::bounds::{BoundSpec, Relaxation};
use wlsh::data::{Dataset, Point, WeightVector};
use wlsh::index::{build_index, BuildConfig, IndexFile};
use wlsh::metric::Metric;
use wlsh::params::SolverContext;
use wlsh::partition;
use wlsh::query::{search, SearchOptions};

fn err(e: wlsh::Error) -> PyErr {
    match &e {
        wlsh::Error::Io(_) | wlsh::Error::Format(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_metric(name: &str, p: f64) -> PyResult<Metric> {
    let metric = match name {
        "lp" => Metric::Lp(p),
        "hamming" => Metric::Hamming,
        "angular" => Metric::Angular,
        other => return Err(PyValueError::new_err(format!("unknown metric {other:?}"))),
    };
    metric.validate().map_err(err)?;
    Ok(metric)
}

fn weight_vector(id: u32, weights: Vec<f64>) -> PyResult<WeightVector> {
    WeightVector::new(id, weights).map_err(err)
}

fn weight_set(weights: Vec<Vec<f64>>) -> PyResult<Vec<WeightVector>> {
    weights
        .into_iter()
        .enumerate()
        .map(|(i, w)| weight_vector(i as u32, w))
        .collect()
}

fn relaxation(relax: Option<(usize, usize)>) -> Option<Relaxation> {
    relax.map(|(v, v_prime)| Relaxation { v, v_prime })
}

/// Integer-valued dataset with a declared value range.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Uniform synthetic dataset.
    #[staticmethod]
    #[pyo3(signature = (n, d, lo=0, hi=10_000, seed=42))]
    fn generate(n: usize, d: usize, lo: i32, hi: i32, seed: u64) -> PyResult<Self> {
        Ok(PyDataset { inner: bench::gen_synthetic_dataset(n, d, (lo, hi), seed).map_err(err)? })
    }

    #[staticmethod]
    fn from_rows(rows: Vec<Vec<i32>>, lo: i32, hi: i32) -> PyResult<Self> {
        Ok(PyDataset { inner: Dataset::from_rows(rows, (lo, hi)).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: Dataset::load(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn value_range(&self) -> (i32, i32) {
        self.inner.value_range()
    }

    fn point(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n() {
            return Err(PyValueError::new_err(format!("point {i} out of range")));
        }
        Ok(self.inner.point(i).coords)
    }

    fn digest(&self) -> String {
        self.inner.digest().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A built index over one dataset and one weight-vector set.
#[pyclass(name = "Index")]
struct PyIndex {
    inner: IndexFile,
}

#[pymethods]
impl PyIndex {
    /// Plans the partition and builds the hash tables.
    #[staticmethod]
    #[pyo3(signature = (dataset, weights, p=2.0, c=3, tau=None, relax=None, reduction=false, seed=42))]
    #[allow(clippy::too_many_arguments)]
    fn build(
        dataset: &PyDataset,
        weights: Vec<Vec<f64>>,
        p: f64,
        c: u32,
        tau: Option<u32>,
        relax: Option<(usize, usize)>,
        reduction: bool,
        seed: u64,
    ) -> PyResult<Self> {
        let s = weight_set(weights)?;
        let ctx = SolverContext::new(p, c, dataset.inner.n(), dataset.inner.value_range())
            .map_err(err)?
            .with_relaxation(relaxation(relax))
            .with_reduction(true);
        let tau = tau.unwrap_or(if p == 2.0 { 500 } else { 1000 });
        let plan = partition::plan(&s, tau, &ctx).map_err(err)?;
        let cfg = BuildConfig { p, c, tau, relaxation: relaxation(relax), reduction, seed };
        Ok(PyIndex { inner: build_index(&dataset.inner, &plan, &cfg).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyIndex { inner: IndexFile::load(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn table_count(&self) -> u64 {
        self.inner.table_count()
    }

    #[getter]
    fn group_count(&self) -> usize {
        self.inner.plan.groups.len()
    }

    /// Group index and beta of a weight vector.
    fn placement(&self, weight_id: u32) -> PyResult<(usize, u32)> {
        let gi = self
            .inner
            .plan
            .group_of(weight_id)
            .ok_or_else(|| PyValueError::new_err(format!("unknown weight vector {weight_id}")))?;
        let member = self.inner.plan.groups[gi].member(weight_id).expect("assignment consistent");
        Ok((gi, member.params.beta))
    }

    /// Answers a (c,k)-WNN query; returns a dict with neighbors and costs.
    #[pyo3(signature = (dataset, q, weight_id, k=10, use_reduced=None))]
    fn search(
        &self,
        py: Python<'_>,
        dataset: &PyDataset,
        q: Vec<f64>,
        weight_id: u32,
        k: usize,
        use_reduced: Option<bool>,
    ) -> PyResult<PyObject> {
        let point = Point::new(0, q);
        let opts = SearchOptions { k, use_reduced };
        let res = search(&self.inner, &dataset.inner, &point, weight_id, &opts).map_err(err)?;
        let out = pyo3::types::PyDict::new(py);
        out.set_item("neighbors", res.neighbors)?;
        out.set_item("radius_final", res.radius_final)?;
        out.set_item("candidates_checked", res.candidates_checked)?;
        out.set_item("io_bucket", res.io.bucket_blocks_read)?;
        out.set_item("io_candidate", res.io.candidate_blocks_read)?;
        Ok(out.into())
    }
}

/// Weighted distance between two points.
#[pyfunction]
#[pyo3(signature = (weights, x, y, metric="lp", p=2.0))]
fn weighted_distance(weights: Vec<f64>, x: Vec<f64>, y: Vec<f64>, metric: &str, p: f64) -> PyResult<f64> {
    let m = parse_metric(metric, p)?;
    let w = weight_vector(0, weights)?;
    wlsh::metric::weighted_distance_coords(&m, &w, &x, &y).map_err(err)
}

/// Exact k-NN by full scan; returns (id, distance) pairs ascending.
#[pyfunction]
#[pyo3(signature = (dataset, weights, q, k, metric="lp", p=2.0))]
fn brute_force_knn(
    dataset: &PyDataset,
    weights: Vec<f64>,
    q: Vec<f64>,
    k: usize,
    metric: &str,
    p: f64,
) -> PyResult<Vec<(u32, f64)>> {
    let m = parse_metric(metric, p)?;
    let w = weight_vector(0, weights)?;
    wlsh::metric::brute_force_knn(&dataset.inner, &m, &w, &Point::new(0, q), k).map_err(err)
}

/// Collision probability P(r) of the l_p family with bucket width w.
#[pyfunction]
fn collision_probability(p: f64, w: f64, r: f64) -> PyResult<f64> {
    wlsh::lsh::CollisionProbability::lp(p, w).map_err(err)?.eval(r).map_err(err)
}

/// (R_up, cR_down) sensitivity bounds of the derived family base -> target.
#[pyfunction]
#[pyo3(signature = (base, target, r, c, metric="lp", p=2.0, relax=None))]
fn derived_bounds(
    base: Vec<f64>,
    target: Vec<f64>,
    r: f64,
    c: u32,
    metric: &str,
    p: f64,
    relax: Option<(usize, usize)>,
) -> PyResult<(f64, f64)> {
    let m = parse_metric(metric, p)?;
    let b = weight_vector(0, base)?;
    let t = weight_vector(1, target)?;
    let spec = BoundSpec::new(m, &b, &t).with_relaxation(relaxation(relax));
    wlsh::bounds::bounds(&spec, r, c).map_err(err)
}

/// Table count and collision threshold from a sensitivity gap.
#[pyfunction]
fn beta_mu(p1: f64, p2: f64, n: usize) -> PyResult<(u32, f64)> {
    wlsh::params::beta_mu_default(p1, p2, n).map_err(err)
}

/// Seeded draws from the symmetric p-stable distribution.
#[pyfunction]
fn stable_sample(p: f64, count: usize, seed: u64) -> PyResult<Vec<f64>> {
    let mut s = wlsh::stable::StableSampler::new(p, seed).map_err(err)?;
    Ok(s.sample_vec(count))
}

/// Weight-vector set from the subset/subrange scheme.
#[pyfunction]
#[pyo3(signature = (cardinality, n_subset, n_subrange, d, seed=42))]
fn gen_weight_vectors(
    cardinality: usize,
    n_subset: usize,
    n_subrange: usize,
    d: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let spec = bench::WeightGenSpec::new(cardinality, n_subset, n_subrange, d, seed);
    Ok(bench::gen_weight_vectors(&spec).map_err(err)?.into_iter().map(|w| w.weights).collect())
}

/// Partition summary without building tables:
/// (beta_total, naive_beta_total, group_count, tau_min).
#[pyfunction]
#[pyo3(signature = (weights, n, lo=0, hi=10_000, p=2.0, c=3, tau=None, relax=None))]
#[allow(clippy::too_many_arguments)]
fn plan_summary(
    weights: Vec<Vec<f64>>,
    n: usize,
    lo: i32,
    hi: i32,
    p: f64,
    c: u32,
    tau: Option<u32>,
    relax: Option<(usize, usize)>,
) -> PyResult<(u64, u64, usize, u32)> {
    let s = weight_set(weights)?;
    let ctx = SolverContext::new(p, c, n, (lo, hi))
        .map_err(err)?
        .with_relaxation(relaxation(relax))
        .with_reduction(true);
    let tau_min = wlsh::params::tau_min(&s, &ctx).map_err(err)?;
    let tau = tau.unwrap_or(if p == 2.0 { 500 } else { 1000 });
    let plan = partition::plan(&s, tau, &ctx).map_err(err)?;
    let naive = partition::naive_beta_total(&s, &ctx).map_err(err)?;
    Ok((plan.beta_total(), naive, plan.groups.len(), tau_min))
}

/// Space exponent of the hypersphere ALSH baselines: (rho, tables).
#[pyfunction]
#[pyo3(signature = (kind, weights, n, r=1000.0, c=3))]
fn alsh_rho(kind: &str, weights: Vec<Vec<f64>>, n: usize, r: f64, c: u32) -> PyResult<(f64, f64)> {
    let k = match kind {
        "sl" => bench::AlshKind::Sl,
        "s2" => bench::AlshKind::S2,
        other => return Err(PyValueError::new_err(format!("unknown kind {other:?}, expected sl or s2"))),
    };
    let s = weight_set(weights)?;
    let grid = bench::RhoGrid::default();
    let res = bench::alsh_rho(k, &s, n, r, c, &grid).map_err(err)?;
    Ok((res.rho, res.tables))
}

#[pymodule]
fn wlsh_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyIndex>()?;
    m.add_function(wrap_pyfunction!(weighted_distance, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_knn, m)?)?;
    m.add_function(wrap_pyfunction!(collision_probability, m)?)?;
    m.add_function(wrap_pyfunction!(derived_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(beta_mu, m)?)?;
    m.add_function(wrap_pyfunction!(stable_sample, m)?)?;
    m.add_function(wrap_pyfunction!(gen_weight_vectors, m)?)?;
    m.add_function(wrap_pyfunction!(plan_summary, m)?)?;
    m.add_function(wrap_pyfunction!(alsh_rho, m)?)?;
    Ok(())
}
