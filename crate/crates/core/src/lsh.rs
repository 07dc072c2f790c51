//! Weighted LSH functions, level buckets, and collision-probability
//! evaluation for the three metrics.

use std::sync::Arc;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::data::WeightVector;
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::stable::StableSampler;

/// Adaptive Simpson integration with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a >= b {
        return 0.0;
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)
}

const QUAD_TOL: f64 = 1e-9;
const QUAD_DEPTH: u32 = 60;

/// One weighted `l_p` hash function `h(x) = floor((a . (W deg x) + b*) / w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpHashFunction {
    pub a: Vec<f64>,
    pub b_star: f64,
    pub w: f64,
    pub base_weights: WeightVector,
    /// Fused `a[i] * base_weights[i]`, the projection actually applied.
    aw: Vec<f64>,
}

impl LpHashFunction {
    pub fn new(a: Vec<f64>, b_star: f64, w: f64, base_weights: WeightVector) -> Result<Self> {
        if a.len() != base_weights.dim() {
            return Err(Error::DimensionMismatch { expected: base_weights.dim(), got: a.len() });
        }
        if !(w > 0.0) {
            return Err(Error::InvalidParameter(format!("bucket width must be positive, got {w}")));
        }
        let aw = a.iter().zip(&base_weights.weights).map(|(ai, wi)| ai * wi).collect();
        Ok(LpHashFunction { a, b_star, w, base_weights, aw })
    }

    pub fn dim(&self) -> usize {
        self.aw.len()
    }

    pub fn hash(&self, x: &[f64]) -> Result<i64> {
        if x.len() != self.aw.len() {
            return Err(Error::DimensionMismatch { expected: self.aw.len(), got: x.len() });
        }
        let mut dot = 0.0;
        for (a, v) in self.aw.iter().zip(x) {
            dot += a * v;
        }
        Ok(floor_bucket((dot + self.b_star) / self.w))
    }

    /// Hash of an integer dataset row; same arithmetic as `hash`.
    pub fn hash_row(&self, row: &[i32]) -> i64 {
        debug_assert_eq!(row.len(), self.aw.len());
        let mut dot = 0.0;
        for (a, v) in self.aw.iter().zip(row) {
            dot += a * *v as f64;
        }
        floor_bucket((dot + self.b_star) / self.w)
    }
}

// Saturating floor keeps pathological stable draws finite.
fn floor_bucket(v: f64) -> i64 {
    const LIMIT: f64 = (1i64 << 62) as f64;
    v.floor().clamp(-LIMIT, LIMIT) as i64
}

/// Samples an `l_p` hash function for the family rooted at `base`.
/// `b*` is uniform in `[0, c^b_range_levels * w)`.
pub fn sample_hash_function(
    p: f64,
    d: usize,
    w: f64,
    b_range_levels: u32,
    c: u32,
    base: &WeightVector,
    rng_seed: u64,
) -> Result<LpHashFunction> {
    if c < 2 {
        return Err(Error::InvalidParameter(format!("c must be >= 2, got {c}")));
    }
    if !(w > 0.0) {
        return Err(Error::InvalidParameter(format!("bucket width must be positive, got {w}")));
    }
    if base.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: base.dim() });
    }
    let mut sampler = StableSampler::new(p, rng_seed)?;
    let a = sampler.sample_vec(d);
    let b_range = (c as f64).powi(b_range_levels as i32) * w;
    let b_star = sampler.sample_uniform(b_range);
    LpHashFunction::new(a, b_star, w, base.clone())
}

/// Level-`l` bucket of a level-1 bucket id; floor toward minus infinity, so a
/// level-`l` bucket `b` covers level-1 buckets `b*l ..= b*l + l - 1`.
pub fn level_bucket(bucket: i64, l: i64) -> i64 {
    debug_assert!(l >= 1);
    bucket.div_euclid(l)
}

/// Pooled |p-stable| draws backing Monte Carlo collision probabilities for
/// fractional `p`. The same draws serve every radius, which keeps the
/// estimate exactly monotone in `r`.
#[derive(Debug)]
pub struct McStableSample {
    p: f64,
    abs_sorted: Vec<f64>,
    prefix: Vec<f64>,
    prefix_sq: Vec<f64>,
}

const MC_DRAWS: usize = 250_000;
const MC_SEED: u64 = 0x57_4c_53_48_5f_4d_43;

impl McStableSample {
    pub fn new(p: f64) -> Result<Arc<Self>> {
        let mut sampler = StableSampler::new(p, MC_SEED ^ p.to_bits())?;
        let mut abs_sorted: Vec<f64> = (0..MC_DRAWS).map(|_| sampler.sample().abs()).collect();
        abs_sorted.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(MC_DRAWS + 1);
        let mut prefix_sq = Vec::with_capacity(MC_DRAWS + 1);
        let (mut acc, mut acc_sq) = (0.0, 0.0);
        prefix.push(0.0);
        prefix_sq.push(0.0);
        for &x in &abs_sorted {
            acc += x;
            acc_sq += x * x;
            prefix.push(acc);
            prefix_sq.push(acc_sq);
        }
        Ok(Arc::new(McStableSample { p, abs_sorted, prefix, prefix_sq }))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Mean and standard error of `max(0, 1 - u|X|)` over the pooled draws.
    fn estimate(&self, u: f64) -> (f64, f64) {
        let n = self.abs_sorted.len() as f64;
        let cut = self.abs_sorted.partition_point(|&x| x * u < 1.0);
        let mean = (cut as f64 - u * self.prefix[cut]) / n;
        let second = (cut as f64 - 2.0 * u * self.prefix[cut] + u * u * self.prefix_sq[cut]) / n;
        let var = (second - mean * mean).max(0.0);
        (mean, (var / n).sqrt())
    }
}

enum CpKind {
    /// `p` in {1, 2}: quadrature against the closed-form |stable| PDF.
    LpClosed { p: f64, w: f64 },
    /// Other `p`: Monte Carlo over pooled draws.
    LpMc { w: f64, sample: Arc<McStableSample> },
    Hamming { weight_sum: f64 },
    Angular,
}

/// Collision probability function `P(r)` of a weighted LSH family.
pub struct CollisionProbability {
    kind: CpKind,
}

impl CollisionProbability {
    pub fn lp(p: f64, w: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(format!("p must lie in (0, 2], got {p}")));
        }
        if !(w > 0.0) {
            return Err(Error::InvalidParameter(format!("bucket width must be positive, got {w}")));
        }
        if p == 1.0 || p == 2.0 {
            Ok(CollisionProbability { kind: CpKind::LpClosed { p, w } })
        } else {
            Ok(CollisionProbability { kind: CpKind::LpMc { w, sample: McStableSample::new(p)? } })
        }
    }

    /// Fractional-`p` family sharing an existing draw pool.
    pub fn lp_shared(w: f64, sample: Arc<McStableSample>) -> Result<Self> {
        if !(w > 0.0) {
            return Err(Error::InvalidParameter(format!("bucket width must be positive, got {w}")));
        }
        Ok(CollisionProbability { kind: CpKind::LpMc { w, sample } })
    }

    pub fn hamming(weight_sum: f64) -> Result<Self> {
        if !(weight_sum > 0.0) {
            return Err(Error::InvalidParameter("weight sum must be positive".into()));
        }
        Ok(CollisionProbability { kind: CpKind::Hamming { weight_sum } })
    }

    pub fn angular() -> Self {
        CollisionProbability { kind: CpKind::Angular }
    }

    pub fn metric(&self) -> Metric {
        match &self.kind {
            CpKind::LpClosed { p, .. } => Metric::Lp(*p),
            CpKind::LpMc { sample, .. } => Metric::Lp(sample.p()),
            CpKind::Hamming { .. } => Metric::Hamming,
            CpKind::Angular => Metric::Angular,
        }
    }

    pub fn bucket_width(&self) -> Option<f64> {
        match &self.kind {
            CpKind::LpClosed { w, .. } | CpKind::LpMc { w, .. } => Some(*w),
            _ => None,
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("P(r) requires r > 0, got {r}")));
        }
        match &self.kind {
            CpKind::LpClosed { p, w } => Ok(lp_collision_quadrature(*p, w / r)),
            CpKind::LpMc { w, sample } => Ok(sample.estimate(r / w).0),
            CpKind::Hamming { weight_sum } => Ok(1.0 - r / weight_sum),
            CpKind::Angular => Ok(1.0 - r / std::f64::consts::PI),
        }
    }

    /// Standard error of the Monte Carlo estimate; `None` for exact kinds.
    pub fn mc_standard_error(&self, r: f64) -> Option<f64> {
        match &self.kind {
            CpKind::LpMc { w, sample } => Some(sample.estimate(r / w).1),
            _ => None,
        }
    }
}

/// `P(r) = Int_0^s F_p(u) (1 - u/s) du` with `s = w/r` after substituting
/// `u = t/r` in the defining integral.
fn lp_collision_quadrature(p: f64, s: f64) -> f64 {
    let pdf: fn(f64) -> f64 = if p == 1.0 {
        |u| 2.0 / (std::f64::consts::PI * (1.0 + u * u))
    } else {
        |u| (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * u * u).exp()
    };
    let f = |u: f64| pdf(u) * (1.0 - u / s);
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut hi = 0.5f64.min(s);
    loop {
        total += adaptive_simpson(&f, lo, hi, QUAD_TOL / 8.0, QUAD_DEPTH);
        if hi >= s {
            break;
        }
        lo = hi;
        hi = (hi * 2.0).min(s);
    }
    total
}

/// Weighted LSH function for the Hamming distance: samples coordinate `k`
/// with probability `w_k / sum(w)` and hashes `x` to `w_k * x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HammingHashFunction {
    pub index: usize,
    pub weight: f64,
}

impl HammingHashFunction {
    pub fn hash(&self, x: &[f64]) -> Result<f64> {
        if self.index >= x.len() {
            return Err(Error::DimensionMismatch { expected: self.index + 1, got: x.len() });
        }
        Ok(self.weight * x[self.index])
    }
}

pub fn sample_hamming_function(base: &WeightVector, rng_seed: u64) -> Result<HammingHashFunction> {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let dist = WeightedIndex::new(&base.weights)
        .map_err(|e| Error::InvalidParameter(format!("bad weights: {e}")))?;
    let index = dist.sample(&mut rng);
    Ok(HammingHashFunction { index, weight: base.weights[index] })
}

/// Weighted LSH function for the angular distance: `sign(u . (W deg x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularHashFunction {
    pub u: Vec<f64>,
    pub base_weights: WeightVector,
}

impl AngularHashFunction {
    pub fn hash(&self, x: &[f64]) -> Result<i8> {
        if x.len() != self.u.len() {
            return Err(Error::DimensionMismatch { expected: self.u.len(), got: x.len() });
        }
        let mut dot = 0.0;
        for ((u, w), v) in self.u.iter().zip(&self.base_weights.weights).zip(x) {
            dot += u * w * v;
        }
        Ok(if dot >= 0.0 { 1 } else { -1 })
    }
}

pub fn sample_angular_function(base: &WeightVector, rng_seed: u64) -> Result<AngularHashFunction> {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let u: Vec<f64> = (0..base.dim()).map(|_| rng.sample(StandardNormal)).collect();
    Ok(AngularHashFunction { u, base_weights: base.clone() })
}
