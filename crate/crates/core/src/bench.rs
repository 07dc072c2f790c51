//! Benchmark harness: synthetic data, weight-vector-set and query-set
//! generation, accuracy/efficiency/space metrics, and the hypersphere-ALSH
//! rho calculators used for space comparisons.

use std::io::Write;
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::Relaxation;
use crate::data::{Dataset, Point, WeightVector};
use crate::error::{Error, Result};
use crate::index::{build_index, BuildConfig, IndexFile};
use crate::lsh::CollisionProbability;
use crate::metric::{brute_force_knn, Metric};
use crate::params::{tau_min, SolverContext};
use crate::partition::{self, PartitionPlan};
use crate::query::{search, SearchOptions};

/// Uniform integer dataset over the given inclusive range.
pub fn gen_synthetic_dataset(n: usize, d: usize, range: (i32, i32), seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be positive".into()));
    }
    let (lo, hi) = range;
    if lo >= hi {
        return Err(Error::InvalidParameter(format!("degenerate value range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let coords: Vec<i32> = (0..n * d).map(|_| rng.gen_range(lo..=hi)).collect();
    Dataset::from_flat(coords, d, range)
}

/// Weight-vector-set generator parameters: the set is a union of `n_subset`
/// equal-size subsets; each subset picks one of `n_subrange` equal-width
/// subranges of the weight range per dimension and draws every member's
/// weight uniformly inside it.
#[derive(Debug, Clone)]
pub struct WeightGenSpec {
    pub cardinality: usize,
    pub n_subset: usize,
    pub n_subrange: usize,
    pub d: usize,
    pub weight_range: (f64, f64),
    pub seed: u64,
}

impl WeightGenSpec {
    pub fn new(cardinality: usize, n_subset: usize, n_subrange: usize, d: usize, seed: u64) -> Self {
        WeightGenSpec { cardinality, n_subset, n_subrange, d, weight_range: (1.0, 10.0), seed }
    }
}

pub fn gen_weight_vectors(spec: &WeightGenSpec) -> Result<Vec<WeightVector>> {
    if spec.cardinality == 0 || spec.n_subset == 0 || !spec.cardinality.is_multiple_of(spec.n_subset) {
        return Err(Error::InvalidParameter(format!(
            "|S| = {} must be a positive multiple of #Subset = {}",
            spec.cardinality, spec.n_subset
        )));
    }
    if spec.n_subrange == 0 || spec.d == 0 {
        return Err(Error::InvalidParameter("#Subrange and d must be positive".into()));
    }
    let (lo, hi) = spec.weight_range;
    if !(hi > lo && lo > 0.0) {
        return Err(Error::InvalidParameter("weight range must be positive and non-degenerate".into()));
    }
    let width = (hi - lo) / spec.n_subrange as f64;
    let per_subset = spec.cardinality / spec.n_subset;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.cardinality);
    for _ in 0..spec.n_subset {
        let dim_subranges: Vec<usize> = (0..spec.d).map(|_| rng.gen_range(0..spec.n_subrange)).collect();
        for _ in 0..per_subset {
            let weights: Vec<f64> = dim_subranges
                .iter()
                .map(|&sr| {
                    let base = lo + sr as f64 * width;
                    base + rng.gen::<f64>() * width
                })
                .collect();
            out.push(WeightVector::new(out.len() as u32, weights)?);
        }
    }
    Ok(out)
}

/// Removes `n_points` random points from the dataset and crosses them with
/// `n_vectors` random weight vectors. Returns the reduced dataset and the
/// query list; query point ids keep the original row index.
pub fn gen_query_set(
    dataset: &Dataset,
    weights: &[WeightVector],
    n_points: usize,
    n_vectors: usize,
    seed: u64,
) -> Result<(Dataset, Vec<(Point, u32)>)> {
    if n_points == 0 || n_points >= dataset.n() {
        return Err(Error::InvalidParameter("query point count must be in [1, n)".into()));
    }
    if n_vectors == 0 || n_vectors > weights.len() {
        return Err(Error::InvalidParameter("query vector count exceeds |S|".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut point_idx: Vec<usize> = index_sample(&mut rng, dataset.n(), n_points).into_vec();
    point_idx.sort_unstable();
    let vec_idx: Vec<usize> = index_sample(&mut rng, weights.len(), n_vectors).into_vec();
    let (reduced, removed) = dataset.remove_points(&point_idx)?;
    let mut queries = Vec::with_capacity(n_points * n_vectors);
    for point in &removed {
        for &wi in &vec_idx {
            queries.push((point.clone(), weights[wi].id));
        }
    }
    Ok((reduced, queries))
}

pub const QUERIES_MAGIC: &[u8; 8] = b"WLSHQRY1";

/// Writes a query set: magic, u32 version, u32 count, u32 d, then per query
/// `u32 point_id, u32 weight_id` and `d` little-endian f64 coordinates.
pub fn save_queries<P: AsRef<Path>>(path: P, queries: &[(Point, u32)]) -> Result<()> {
    use byteorder::{LittleEndian, WriteBytesExt};
    let d = match queries.first() {
        Some((p, _)) => p.dim(),
        None => return Err(Error::InvalidParameter("empty query set".into())),
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(QUERIES_MAGIC)?;
    f.write_u32::<LittleEndian>(1)?;
    f.write_u32::<LittleEndian>(queries.len() as u32)?;
    f.write_u32::<LittleEndian>(d as u32)?;
    for (point, wid) in queries {
        if point.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: point.dim() });
        }
        f.write_u32::<LittleEndian>(point.id)?;
        f.write_u32::<LittleEndian>(*wid)?;
        for &x in &point.coords {
            f.write_f64::<LittleEndian>(x)?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn load_queries<P: AsRef<Path>>(path: P) -> Result<Vec<(Point, u32)>> {
    use byteorder::{LittleEndian, ReadBytesExt};
    use std::io::Read;
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != QUERIES_MAGIC {
        return Err(Error::Format("bad query file magic".into()));
    }
    let version = f.read_u32::<LittleEndian>()?;
    if version != 1 {
        return Err(Error::Format(format!("unsupported query file version {version}")));
    }
    let count = f.read_u32::<LittleEndian>()? as usize;
    let d = f.read_u32::<LittleEndian>()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let id = f.read_u32::<LittleEndian>()?;
        let wid = f.read_u32::<LittleEndian>()?;
        let mut coords = vec![0f64; d];
        f.read_f64_into::<LittleEndian>(&mut coords)?;
        out.push((Point::new(id, coords), wid));
    }
    Ok(out)
}

/// Outcome of the rank-wise ratio: ranks whose true distance is zero count
/// as 1.0 when the reported distance is also zero and are otherwise
/// excluded from the mean and flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioOutcome {
    pub ratio: f64,
    pub excluded: usize,
    pub within_c: usize,
    pub ranks: usize,
}

pub fn overall_ratio(result: &[(u32, f64)], truth: &[(u32, f64)], c: f64) -> Result<RatioOutcome> {
    if result.len() != truth.len() || result.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "result/truth length mismatch: {} vs {}",
            result.len(),
            truth.len()
        )));
    }
    let mut sum = 0.0;
    let mut included = 0usize;
    let mut excluded = 0usize;
    let mut within_c = 0usize;
    for (&(_, got), &(_, want)) in result.iter().zip(truth.iter()) {
        let term = if want == 0.0 {
            if got == 0.0 {
                Some(1.0)
            } else {
                excluded += 1;
                None
            }
        } else {
            Some(got / want)
        };
        if let Some(t) = term {
            sum += t;
            included += 1;
            if t <= c {
                within_c += 1;
            }
        }
    }
    let ratio = if included == 0 { 1.0 } else { sum / included as f64 };
    Ok(RatioOutcome { ratio, excluded, within_c, ranks: included })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlshKind {
    Sl,
    S2,
}

/// Grid for the rho minimization: log-spaced bucket widths and linear
/// hypersphere scales, plus local coordinate refinement rounds.
#[derive(Debug, Clone)]
pub struct RhoGrid {
    pub w_lo: f64,
    pub w_hi: f64,
    pub w_points: usize,
    pub v_points: usize,
    pub refine_rounds: usize,
}

impl Default for RhoGrid {
    fn default() -> Self {
        RhoGrid { w_lo: 0.5, w_hi: 50.0, w_points: 128, v_points: 128, refine_rounds: 3 }
    }
}

impl RhoGrid {
    pub fn doubled(&self) -> Self {
        RhoGrid {
            w_lo: self.w_lo,
            w_hi: self.w_hi,
            w_points: self.w_points * 2,
            v_points: self.v_points * 2,
            refine_rounds: self.refine_rounds,
        }
    }

    fn w_values(&self) -> Vec<f64> {
        let ratio = (self.w_hi / self.w_lo).ln();
        (0..self.w_points)
            .map(|i| self.w_lo * (ratio * i as f64 / (self.w_points - 1) as f64).exp())
            .collect()
    }

    fn v_values(&self) -> Vec<f64> {
        (1..=self.v_points)
            .map(|i| std::f64::consts::PI * i as f64 / self.v_points as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RhoResult {
    pub rho: f64,
    pub tables: f64,
    pub w: Option<f64>,
    pub v: f64,
}

struct NormalizedVector {
    eta: f64,
    r_eff: f64,
}

/// Rescales every weight vector to unit l1 norm (radii scale with it) and
/// precomputes `eta = sqrt(d) * ||W||_2`.
fn normalize_for_rho(s: &[WeightVector], r: f64) -> Result<Vec<NormalizedVector>> {
    if s.is_empty() {
        return Err(Error::InvalidParameter("empty weight vector set".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter("R must be positive".into()));
    }
    let d = s[0].dim() as f64;
    Ok(s.iter()
        .map(|w| {
            let l1 = w.weight_sum();
            let l2 = w.weights.iter().map(|x| x * x).sum::<f64>().sqrt() / l1;
            NormalizedVector { eta: d.sqrt() * l2, r_eff: r / l1 }
        })
        .collect())
}

fn sl_objective(vectors: &[NormalizedVector], cp: &CollisionProbability, c: f64, v_side: f64) -> Option<f64> {
    let mut worst = 0.0f64;
    for nv in vectors {
        let penalty = v_side.powi(4) / 12.0;
        if !(c * nv.r_eff - penalty > nv.r_eff) {
            return None;
        }
        let base = 2.0 * nv.eta - 2.0;
        let r1 = (base + nv.r_eff).sqrt();
        let r2 = (base + c * nv.r_eff - penalty).sqrt();
        if !(r1 > 0.0 && r2 > r1) {
            return None;
        }
        let p1 = cp.eval(r1).ok()?;
        let p2 = cp.eval(r2).ok()?;
        if !(p2 > 0.0 && p2 < p1 && p1 < 1.0) {
            return None;
        }
        worst = worst.max(p1.ln() / p2.ln());
    }
    Some(worst)
}

fn s2_objective(vectors: &[NormalizedVector], c: f64, v_side: f64) -> Option<f64> {
    let mut worst = 0.0f64;
    for nv in vectors {
        if !(c * nv.r_eff - v_side.powi(4) / 12.0 > nv.r_eff) {
            return None;
        }
        let arg1 = (1.0 - 0.5 * nv.r_eff) / nv.eta;
        let arg2 = (1.0 - 0.5 * c * nv.r_eff + v_side.powi(4) / 24.0) / nv.eta;
        if !(arg1 > -1.0 && arg1 < 1.0 && arg2 > -1.0 && arg2 < 1.0) {
            return None;
        }
        let p1 = 1.0 - arg1.acos() / std::f64::consts::PI;
        let p2 = 1.0 - arg2.acos() / std::f64::consts::PI;
        if !(p2 > 0.0 && p2 < p1 && p1 < 1.0) {
            return None;
        }
        worst = worst.max(p1.ln() / p2.ln());
    }
    Some(worst)
}

/// Worst-case query exponent of the hypersphere ALSH baselines and the
/// implied table count `n^rho`, minimized by grid search with local
/// refinement. Fails when no grid point satisfies the feasibility bound.
pub fn alsh_rho(
    kind: AlshKind,
    s: &[WeightVector],
    n: usize,
    r: f64,
    c: u32,
    grid: &RhoGrid,
) -> Result<RhoResult> {
    if c < 2 {
        return Err(Error::InvalidParameter(format!("c must be >= 2, got {c}")));
    }
    if grid.w_points < 2 || grid.v_points < 1 || !(grid.w_hi > grid.w_lo && grid.w_lo > 0.0) {
        return Err(Error::InvalidParameter("rho grid needs w_hi > w_lo > 0, >= 2 bucket widths, >= 1 V value".into()));
    }
    let vectors = normalize_for_rho(s, r)?;
    let cf = c as f64;
    let v_values = grid.v_values();

    let mut best: Option<RhoResult> = None;
    match kind {
        AlshKind::Sl => {
            let w_values = grid.w_values();
            let per_w: Vec<Option<RhoResult>> = w_values
                .par_iter()
                .map(|&w| {
                    let cp = CollisionProbability::lp(2.0, w).ok()?;
                    let mut local: Option<RhoResult> = None;
                    for &v_side in &v_values {
                        if let Some(rho) = sl_objective(&vectors, &cp, cf, v_side) {
                            if local.as_ref().is_none_or(|b| rho < b.rho) {
                                local = Some(RhoResult { rho, tables: 0.0, w: Some(w), v: v_side });
                            }
                        }
                    }
                    local
                })
                .collect();
            for cand in per_w.into_iter().flatten() {
                if best.as_ref().is_none_or(|b| cand.rho < b.rho) {
                    best = Some(cand);
                }
            }
            // Coordinate refinement around the grid argmin.
            if let Some(mut cur) = best {
                let w_step = (grid.w_hi / grid.w_lo).powf(1.0 / (grid.w_points - 1) as f64);
                let v_step = std::f64::consts::PI / grid.v_points as f64;
                for round in 0..grid.refine_rounds {
                    let shrink = 2f64.powi(round as i32);
                    let w0 = cur.w.unwrap();
                    for i in -8i32..=8 {
                        let w = (w0 * w_step.powf(i as f64 / (8.0 * shrink))).clamp(grid.w_lo, grid.w_hi);
                        let cp = match CollisionProbability::lp(2.0, w) {
                            Ok(cp) => cp,
                            Err(_) => continue,
                        };
                        if let Some(rho) = sl_objective(&vectors, &cp, cf, cur.v) {
                            if rho < cur.rho {
                                cur = RhoResult { rho, tables: 0.0, w: Some(w), v: cur.v };
                            }
                        }
                    }
                    let cp = CollisionProbability::lp(2.0, cur.w.unwrap())?;
                    let v0 = cur.v;
                    for i in -8i32..=8 {
                        let v_side = (v0 + v_step * i as f64 / (8.0 * shrink))
                            .clamp(v_step * 1e-3, std::f64::consts::PI);
                        if let Some(rho) = sl_objective(&vectors, &cp, cf, v_side) {
                            if rho < cur.rho {
                                cur = RhoResult { rho, tables: 0.0, w: cur.w, v: v_side };
                            }
                        }
                    }
                }
                best = Some(cur);
            }
        }
        AlshKind::S2 => {
            for &v_side in &v_values {
                if let Some(rho) = s2_objective(&vectors, cf, v_side) {
                    if best.as_ref().is_none_or(|b| rho < b.rho) {
                        best = Some(RhoResult { rho, tables: 0.0, w: None, v: v_side });
                    }
                }
            }
            if let Some(mut cur) = best {
                let v_step = std::f64::consts::PI / grid.v_points as f64;
                for round in 0..grid.refine_rounds {
                    let shrink = 2f64.powi(round as i32);
                    let v0 = cur.v;
                    for i in -8i32..=8 {
                        let v_side = (v0 + v_step * i as f64 / (8.0 * shrink))
                            .clamp(v_step * 1e-3, std::f64::consts::PI);
                        if let Some(rho) = s2_objective(&vectors, cf, v_side) {
                            if rho < cur.rho {
                                cur = RhoResult { rho, tables: 0.0, w: None, v: v_side };
                            }
                        }
                    }
                }
                best = Some(cur);
            }
        }
    }

    match best {
        Some(mut res) => {
            res.tables = (n as f64).powf(res.rho);
            Ok(res)
        }
        None => Err(Error::InvalidParameter(
            "no feasible (w, V) grid point for the given (c, R)".into(),
        )),
    }
}

/// Full benchmark configuration. Defaults are the desk-scale shrink of the
/// reference grids; the flags mirror the CLI.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: usize,
    pub d: usize,
    pub value_range: (i32, i32),
    pub s_size: usize,
    pub n_subset: usize,
    pub n_subrange: usize,
    pub p: f64,
    pub c: u32,
    pub k: usize,
    pub tau: Option<u32>,
    pub relaxation: Option<Relaxation>,
    pub reduction: bool,
    /// One group per weight vector; the baseline layout.
    pub naive: bool,
    pub n_query_points: usize,
    pub n_query_vectors: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n: 10_000,
            d: 32,
            value_range: (0, 10_000),
            s_size: 64,
            n_subset: 8,
            n_subrange: 8,
            p: 2.0,
            c: 3,
            k: 10,
            tau: None,
            relaxation: None,
            reduction: false,
            naive: false,
            n_query_points: 50,
            n_query_vectors: 10,
            seed: 42,
        }
    }
}

impl BenchConfig {
    /// Reference-scale defaults (heavy: hours of compute, millions of tables).
    pub fn full_scale(mut self) -> Self {
        self.n = 400_000;
        self.d = 400;
        self.s_size = 5_000;
        self.n_subset = 200;
        self.n_subrange = 20;
        self
    }

    pub fn default_tau(&self) -> u32 {
        match self.tau {
            Some(t) => t,
            None => {
                if self.p == 2.0 {
                    500
                } else {
                    1_000
                }
            }
        }
    }

    pub fn solver_context(&self) -> Result<SolverContext> {
        Ok(SolverContext::new(self.p, self.c, self.n, self.value_range)?
            .with_relaxation(self.relaxation)
            .with_reduction(true))
    }
}

/// Everything needed to build and query one benchmark instance.
pub struct BenchSetup {
    pub dataset: Dataset,
    pub weights: Vec<WeightVector>,
    pub queries: Vec<(Point, u32)>,
    pub plan: PartitionPlan,
    pub tau: u32,
    pub tau_min: u32,
    pub naive_beta_total: u64,
}

fn sub_seeds(seed: u64) -> [u64; 4] {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    [rng.gen(), rng.gen(), rng.gen(), rng.gen()]
}

/// Plan-level run: weights and partition only, no dataset or tables. Enough
/// for space-consumption comparisons.
pub fn plan_only(cfg: &BenchConfig) -> Result<(PartitionPlan, u64, u32)> {
    let [_, w_seed, _, _] = sub_seeds(cfg.seed);
    let spec = WeightGenSpec {
        cardinality: cfg.s_size,
        n_subset: cfg.n_subset,
        n_subrange: cfg.n_subrange,
        d: cfg.d,
        weight_range: (1.0, 10.0),
        seed: w_seed,
    };
    let weights = gen_weight_vectors(&spec)?;
    let ctx = cfg.solver_context()?;
    let t_min = tau_min(&weights, &ctx)?;
    let tau = cfg.default_tau();
    let naive = partition::naive_beta_total(&weights, &ctx)?;
    let plan = if cfg.naive {
        naive_plan(&weights, &ctx)?
    } else {
        partition::plan(&weights, tau, &ctx)?
    };
    Ok((plan, naive, t_min))
}

/// One self-group per weight vector.
pub fn naive_plan(weights: &[WeightVector], ctx: &SolverContext) -> Result<PartitionPlan> {
    let mut groups = Vec::with_capacity(weights.len());
    let mut assignment = std::collections::BTreeMap::new();
    for (i, w) in weights.iter().enumerate() {
        groups.push(ctx.group_params(w, &[w])?);
        assignment.insert(w.id, i);
    }
    Ok(PartitionPlan { groups, assignment })
}

pub fn prepare(cfg: &BenchConfig) -> Result<BenchSetup> {
    let [ds_seed, w_seed, q_seed, _] = sub_seeds(cfg.seed);
    let dataset = gen_synthetic_dataset(cfg.n, cfg.d, cfg.value_range, ds_seed)?;
    let spec = WeightGenSpec {
        cardinality: cfg.s_size,
        n_subset: cfg.n_subset,
        n_subrange: cfg.n_subrange,
        d: cfg.d,
        weight_range: (1.0, 10.0),
        seed: w_seed,
    };
    let weights = gen_weight_vectors(&spec)?;
    let (dataset, queries) =
        gen_query_set(&dataset, &weights, cfg.n_query_points, cfg.n_query_vectors, q_seed)?;

    // Plan against the indexed cardinality (after query-point removal).
    let ctx = SolverContext::new(cfg.p, cfg.c, dataset.n(), cfg.value_range)?
        .with_relaxation(cfg.relaxation)
        .with_reduction(true);
    let t_min = tau_min(&weights, &ctx)?;
    let tau = cfg.default_tau();
    let naive_beta_total = partition::naive_beta_total(&weights, &ctx)?;
    let plan = if cfg.naive {
        naive_plan(&weights, &ctx)?
    } else {
        partition::plan(&weights, tau, &ctx)?
    };
    Ok(BenchSetup { dataset, weights, queries, plan, tau, tau_min: t_min, naive_beta_total })
}

pub fn build(setup: &BenchSetup, cfg: &BenchConfig) -> Result<IndexFile> {
    let [_, _, _, idx_seed] = sub_seeds(cfg.seed);
    let build_cfg = BuildConfig {
        p: cfg.p,
        c: cfg.c,
        tau: setup.tau,
        relaxation: cfg.relaxation,
        reduction: cfg.reduction,
        seed: idx_seed,
    };
    build_index(&setup.dataset, &setup.plan, &build_cfg)
}

/// One row of the per-query CSV.
#[derive(Debug, Clone, Serialize)]
pub struct QueryRecord {
    pub query_point_id: u32,
    pub weight_id: u32,
    pub k: usize,
    pub io_bucket: u64,
    pub io_candidate: u64,
    pub ratio: f64,
    pub radius_final: f64,
    pub candidates_checked: usize,
    pub excluded_ranks: usize,
    pub within_c_ranks: usize,
    pub counted_ranks: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub beta_total: u64,
    pub naive_beta_total: u64,
    pub groups: usize,
    pub tau: u32,
    pub tau_min: u32,
    pub avg_io: f64,
    pub avg_overall_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub within_c_fraction: f64,
    pub records: Vec<QueryRecord>,
}

/// Runs every query against the index, computing exact truth by brute force.
pub fn run_queries(
    index: &IndexFile,
    dataset: &Dataset,
    queries: &[(Point, u32)],
    weights: &[WeightVector],
    k: usize,
    use_reduced: Option<bool>,
) -> Result<Vec<QueryRecord>> {
    let metric = Metric::Lp(index.header.p);
    let c = index.header.c as f64;
    let by_id: std::collections::BTreeMap<u32, &WeightVector> =
        weights.iter().map(|w| (w.id, w)).collect();
    queries
        .par_iter()
        .map(|(point, wid)| {
            let w = by_id.get(wid).ok_or(Error::UnknownWeightVector(*wid))?;
            let opts = SearchOptions { k, use_reduced };
            let res = search(index, dataset, point, *wid, &opts)?;
            let truth = brute_force_knn(dataset, &metric, w, point, k)?;
            if res.neighbors.len() < k {
                return Err(Error::InvalidParameter(format!(
                    "query {} under vector {wid} returned {} < k = {k} neighbors",
                    point.id,
                    res.neighbors.len()
                )));
            }
            let outcome = overall_ratio(&res.neighbors, &truth, c)?;
            Ok(QueryRecord {
                query_point_id: point.id,
                weight_id: *wid,
                k,
                io_bucket: res.io.bucket_blocks_read,
                io_candidate: res.io.candidate_blocks_read,
                ratio: outcome.ratio,
                radius_final: res.radius_final,
                candidates_checked: res.candidates_checked,
                excluded_ranks: outcome.excluded,
                within_c_ranks: outcome.within_c,
                counted_ranks: outcome.ranks,
            })
        })
        .collect()
}

pub fn summarize(
    records: Vec<QueryRecord>,
    beta_total: u64,
    naive_beta_total: u64,
    groups: usize,
    tau: u32,
    tau_min: u32,
) -> BenchReport {
    let nq = records.len().max(1) as f64;
    let avg_io = records.iter().map(|r| (r.io_bucket + r.io_candidate) as f64).sum::<f64>() / nq;
    let avg_ratio = records.iter().map(|r| r.ratio).sum::<f64>() / nq;
    let min_ratio = records.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = records.iter().map(|r| r.ratio).fold(0.0, f64::max);
    // Rank-wise: the fraction of (query, rank) pairs within factor c.
    let counted: usize = records.iter().map(|r| r.counted_ranks).sum();
    let within_ranks: usize = records.iter().map(|r| r.within_c_ranks).sum();
    let within = if counted == 0 { 1.0 } else { within_ranks as f64 / counted as f64 };
    BenchReport {
        beta_total,
        naive_beta_total,
        groups,
        tau,
        tau_min,
        avg_io,
        avg_overall_ratio: avg_ratio,
        min_ratio,
        max_ratio,
        within_c_fraction: within,
        records,
    }
}

/// End-to-end benchmark: generate, plan, build, query, aggregate.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    let setup = prepare(cfg)?;
    let index = build(&setup, cfg)?;
    let records = run_queries(
        &index,
        &setup.dataset,
        &setup.queries,
        &setup.weights,
        cfg.k,
        Some(cfg.reduction),
    )?;
    Ok(summarize(
        records,
        index.table_count(),
        setup.naive_beta_total,
        setup.plan.groups.len(),
        setup.tau,
        setup.tau_min,
    ))
}

pub fn write_csv<P: AsRef<Path>>(report: &BenchReport, path: P) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "query_point_id,weight_id,k,io_bucket,io_candidate,ratio,radius_final,candidates_checked")?;
    for r in &report.records {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            r.query_point_id, r.weight_id, r.k, r.io_bucket, r.io_candidate, r.ratio, r.radius_final, r.candidates_checked
        )?;
    }
    Ok(())
}

pub fn write_json<P: AsRef<Path>>(report: &BenchReport, path: P) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, report).map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
