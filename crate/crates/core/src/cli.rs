//! Command-line front end: data generation, planning, building, querying,
//! and benchmarking. Exit codes: 0 success, 2 invalid configuration,
//! 3 infeasible plan, 4 I/O or file-format error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::bench::{
    self, alsh_rho, AlshKind, BenchConfig, RhoGrid, WeightGenSpec,
};
use crate::bounds::Relaxation;
use crate::data::{load_weight_vectors, save_weight_vectors, Dataset, Point};
use crate::error::{Error, Result};
use crate::index::{build_index, BuildConfig, IndexFile};
use crate::metric::{brute_force_knn, Metric};
use crate::params::{tau_min, SolverContext};
use crate::partition;
use crate::query::{search, SearchOptions};

#[derive(Parser)]
#[command(name = "wlsh", version, about = "Approximate k-NN search under many weighted l_p distance functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn parse_relax(s: &str) -> std::result::Result<Relaxation, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected v,v'".into());
    }
    let v = parts[0].trim().parse::<usize>().map_err(|e| e.to_string())?;
    let v_prime = parts[1].trim().parse::<usize>().map_err(|e| e.to_string())?;
    Ok(Relaxation { v, v_prime })
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DataFormat {
    Bin,
    Text,
}

#[derive(Args, Clone)]
pub struct PlanArgs {
    /// Dataset file (binary or text)
    #[arg(long)]
    pub data: PathBuf,
    /// Weight-vector file (binary or text)
    #[arg(long)]
    pub weights: PathBuf,
    /// Metric exponent p in (0, 2]
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Approximation ratio (integer >= 2)
    #[arg(long, default_value_t = 3)]
    pub c: u32,
    /// Per-group table cap; defaults to 1000 for p != 2 and 500 for p = 2
    #[arg(long)]
    pub tau: Option<u32>,
    /// Bound relaxation order statistics "v,v'"
    #[arg(long, value_parser = parse_relax)]
    pub relax: Option<Relaxation>,
    /// Enable collision-threshold reduction at query time
    #[arg(long)]
    pub reduce_threshold: bool,
}

impl PlanArgs {
    fn tau(&self) -> u32 {
        self.tau.unwrap_or(if self.p == 2.0 { 500 } else { 1000 })
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a uniform synthetic dataset
    GenData {
        #[arg(long, default_value_t = 400_000)]
        n: usize,
        #[arg(long, default_value_t = 400)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        lo: i32,
        #[arg(long, default_value_t = 10_000)]
        hi: i32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a weight-vector set from the subset/subrange scheme
    GenWeights {
        /// Cardinality |S|
        #[arg(long, default_value_t = 5_000)]
        s: usize,
        #[arg(long, default_value_t = 200)]
        subset: usize,
        #[arg(long, default_value_t = 20)]
        subrange: usize,
        #[arg(long, default_value_t = 400)]
        d: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample query points out of a dataset and cross them with weight vectors
    GenQueries {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 50)]
        n_points: usize,
        #[arg(long, default_value_t = 10)]
        n_vectors: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Query set output
        #[arg(long)]
        out_queries: PathBuf,
        /// Reduced dataset output (query points removed)
        #[arg(long)]
        out_data: PathBuf,
    },
    /// Partition the weight-vector set and report table counts
    Plan(PlanArgs),
    /// Partition, build hash tables, and persist the index
    Build {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one (c,k)-WNN query from a built index
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Inline query point "x1,x2,..."
        #[arg(long, conflicts_with = "queries")]
        point: Option<String>,
        /// Query file produced by gen-queries
        #[arg(long, requires = "qidx")]
        queries: Option<PathBuf>,
        /// Index into the query file
        #[arg(long)]
        qidx: Option<usize>,
        /// Weight-vector id (required with --point)
        #[arg(long)]
        wid: Option<u32>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// JSON truth file: [[id, distance], ...]
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Compute the exact answer by brute force and report the ratio
        #[arg(long)]
        exact: bool,
        /// Override the index's collision-threshold-reduction flag
        #[arg(long)]
        reduce_threshold: Option<bool>,
    },
    /// Run the benchmark protocol and emit CSV/JSON reports
    Bench {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        d: usize,
        /// Cardinality |S|
        #[arg(long, default_value_t = 64)]
        s: usize,
        #[arg(long, default_value_t = 8)]
        subset: usize,
        #[arg(long, default_value_t = 8)]
        subrange: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 3)]
        c: u32,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        tau: Option<u32>,
        #[arg(long, value_parser = parse_relax)]
        relax: Option<Relaxation>,
        #[arg(long)]
        reduce_threshold: bool,
        /// Baseline: one group per weight vector
        #[arg(long)]
        naive: bool,
        /// Reference-scale grids (n=400k, d=400, |S|=5000); hours of compute
        #[arg(long)]
        full_scale: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Space-consumption exponents of the hypersphere ALSH baselines
    AlshRho {
        #[arg(long, value_enum)]
        kind: RhoKind,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 400_000)]
        n: usize,
        #[arg(long, default_value_t = 1000.0)]
        r: f64,
        #[arg(long, default_value_t = 3)]
        c: u32,
        #[arg(long, default_value_t = 128)]
        w_points: usize,
        #[arg(long, default_value_t = 128)]
        v_points: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum RhoKind {
    Sl,
    S2,
}

fn file_digest(path: &std::path::Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_plan_inputs(args: &PlanArgs) -> Result<(Dataset, Vec<crate::data::WeightVector>, SolverContext)> {
    let dataset = Dataset::load(&args.data)?;
    let weights = load_weight_vectors(&args.weights)?;
    for w in &weights {
        if w.dim() != dataset.d() {
            return Err(Error::DimensionMismatch { expected: dataset.d(), got: w.dim() });
        }
    }
    let ctx = SolverContext::new(args.p, args.c, dataset.n(), dataset.value_range())?
        .with_relaxation(args.relax)
        .with_reduction(true);
    Ok((dataset, weights, ctx))
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    dispatch(cli.command)
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenData { n, d, lo, hi, seed, out } => {
            let dataset = bench::gen_synthetic_dataset(n, d, (lo, hi), seed)?;
            dataset.save(&out)?;
            println!("dataset n={n} d={d} range=[{lo},{hi}] seed={seed}");
            println!("digest sha256:{}", file_digest(&out)?);
            Ok(())
        }
        Command::GenWeights { s, subset, subrange, d, seed, out } => {
            let spec = WeightGenSpec { cardinality: s, n_subset: subset, n_subrange: subrange, d, weight_range: (1.0, 10.0), seed };
            let weights = bench::gen_weight_vectors(&spec)?;
            save_weight_vectors(&out, &weights)?;
            println!("weights |S|={s} #Subset={subset} #Subrange={subrange} d={d} seed={seed}");
            println!("digest sha256:{}", file_digest(&out)?);
            Ok(())
        }
        Command::GenQueries { data, weights, n_points, n_vectors, seed, out_queries, out_data } => {
            let dataset = Dataset::load(&data)?;
            let ws = load_weight_vectors(&weights)?;
            let (reduced, queries) = bench::gen_query_set(&dataset, &ws, n_points, n_vectors, seed)?;
            bench::save_queries(&out_queries, &queries)?;
            reduced.save(&out_data)?;
            println!("queries {} = {n_points} points x {n_vectors} vectors", queries.len());
            println!("queries digest sha256:{}", file_digest(&out_queries)?);
            println!("reduced dataset n={} digest sha256:{}", reduced.n(), file_digest(&out_data)?);
            Ok(())
        }
        Command::Plan(args) => {
            let (_, weights, ctx) = load_plan_inputs(&args)?;
            let t_min = tau_min(&weights, &ctx)?;
            let tau = args.tau();
            let plan = partition::plan(&weights, tau, &ctx)?;
            let naive = partition::naive_beta_total(&weights, &ctx)?;
            for (i, g) in plan.groups.iter().enumerate() {
                println!(
                    "group {i}: base={} members={} beta={} levels={} w={:.6}",
                    g.base.id,
                    g.members.len(),
                    g.beta_group,
                    g.b_range_levels,
                    g.w_bucket
                );
            }
            println!("tau={tau} tau_min={t_min}");
            println!("beta_total={} (naive {})", plan.beta_total(), naive);
            Ok(())
        }
        Command::Build { plan: args, seed, out } => {
            let (dataset, weights, ctx) = load_plan_inputs(&args)?;
            let tau = args.tau();
            let plan = partition::plan(&weights, tau, &ctx)?;
            let cfg = BuildConfig {
                p: args.p,
                c: args.c,
                tau,
                relaxation: args.relax,
                reduction: args.reduce_threshold,
                seed,
            };
            let index = build_index(&dataset, &plan, &cfg)?;
            index.save(&out)?;
            println!("index groups={} tables={}", plan.groups.len(), index.table_count());
            println!("digest sha256:{}", file_digest(&out)?);
            Ok(())
        }
        Command::Query { index, data, point, queries, qidx, wid, k, truth, exact, reduce_threshold } => {
            let index = IndexFile::load(&index)?;
            let dataset = Dataset::load(&data)?;
            let (q, wid) = match (point, queries) {
                (Some(text), None) => {
                    let coords = text
                        .split(',')
                        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::InvalidParameter(format!("bad coordinate {t:?}: {e}"))))
                        .collect::<Result<Vec<f64>>>()?;
                    let wid = wid.ok_or_else(|| Error::InvalidParameter("--wid is required with --point".into()))?;
                    (Point::new(0, coords), wid)
                }
                (None, Some(path)) => {
                    let all = bench::load_queries(&path)?;
                    let idx = qidx.expect("clap requires qidx");
                    let (p, file_wid) = all
                        .get(idx)
                        .ok_or_else(|| Error::InvalidParameter(format!("qidx {idx} out of range ({} queries)", all.len())))?
                        .clone();
                    (p, wid.unwrap_or(file_wid))
                }
                _ => return Err(Error::InvalidParameter("provide either --point or --queries".into())),
            };
            let opts = SearchOptions { k, use_reduced: reduce_threshold };
            let res = search(&index, &dataset, &q, wid, &opts)?;
            println!("rank\tid\tdistance");
            for (rank, (id, dist)) in res.neighbors.iter().enumerate() {
                println!("{}\t{id}\t{dist}", rank + 1);
            }
            println!(
                "io: bucket={} candidate={} total={}",
                res.io.bucket_blocks_read,
                res.io.candidate_blocks_read,
                res.io.total()
            );
            println!("radius_final={} candidates_checked={}", res.radius_final, res.candidates_checked);
            let truth_list: Option<Vec<(u32, f64)>> = match (truth, exact) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path)?;
                    let parsed: Vec<(u32, f64)> =
                        serde_json::from_str(&text).map_err(|e| Error::Format(format!("bad truth file: {e}")))?;
                    Some(parsed)
                }
                (None, true) => {
                    let gi = index.plan.group_of(wid).ok_or(Error::UnknownWeightVector(wid))?;
                    let w = index.plan.groups[gi].member(wid).ok_or(Error::UnknownWeightVector(wid))?.vector.clone();
                    Some(brute_force_knn(&dataset, &Metric::Lp(index.header.p), &w, &q, k)?)
                }
                (None, false) => None,
            };
            if let Some(truth) = truth_list {
                let out = bench::overall_ratio(&res.neighbors, &truth, index.header.c as f64)?;
                println!("ratio={} (excluded_ranks={})", out.ratio, out.excluded);
            }
            Ok(())
        }
        Command::Bench {
            n, d, s, subset, subrange, p, c, k, tau, relax, reduce_threshold, naive,
            full_scale, seed, out_csv, out_json,
        } => {
            let mut cfg = BenchConfig {
                n,
                d,
                value_range: (0, 10_000),
                s_size: s,
                n_subset: subset,
                n_subrange: subrange,
                p,
                c,
                k,
                tau,
                relaxation: relax,
                reduction: reduce_threshold,
                naive,
                seed,
                ..Default::default()
            };
            if full_scale {
                cfg = cfg.full_scale();
            }
            let report = bench::run_benchmark(&cfg)?;
            println!(
                "beta_total={} (naive {}) groups={} tau={} tau_min={}",
                report.beta_total, report.naive_beta_total, report.groups, report.tau, report.tau_min
            );
            println!(
                "avg_io={:.2} avg_overall_ratio={:.6} within_c={:.4} queries={}",
                report.avg_io,
                report.avg_overall_ratio,
                report.within_c_fraction,
                report.records.len()
            );
            if let Some(path) = out_csv {
                bench::write_csv(&report, &path)?;
                println!("csv {}", path.display());
            }
            if let Some(path) = out_json {
                bench::write_json(&report, &path)?;
                println!("json {}", path.display());
            }
            Ok(())
        }
        Command::AlshRho { kind, weights, n, r, c, w_points, v_points } => {
            let ws = load_weight_vectors(&weights)?;
            let grid = RhoGrid { w_points, v_points, ..Default::default() };
            let kind = match kind {
                RhoKind::Sl => AlshKind::Sl,
                RhoKind::S2 => AlshKind::S2,
            };
            let res = alsh_rho(kind, &ws, n, r, c, &grid)?;
            match res.w {
                Some(w) => println!("rho={:.6} tables={:.1} at w={:.4} V={:.4}", res.rho, res.tables, w, res.v),
                None => println!("rho={:.6} tables={:.1} at V={:.4}", res.rho, res.tables, res.v),
            }
            Ok(())
        }
    }
}
