//! Per-weight-vector search parameters: radius grids, table counts (beta),
//! collision thresholds (mu, reduced mu), and per-group aggregates.

use std::sync::{Arc, OnceLock};

use crate::bounds::{lp_bounds, BoundSpec, Relaxation};
use crate::data::{Dataset, WeightVector};
use crate::error::{Error, Result};
use crate::lsh::{CollisionProbability, McStableSample};
use crate::metric::Metric;

pub const DEFAULT_EPSILON: f64 = 0.01;
const GAMMA_FLOOR: f64 = 1e-7;

/// `gamma = 100/n`, clamped: floored for absurdly large `n` and capped at
/// 1 for tiny `n`, where `ln(2/gamma)` would otherwise go negative. Both
/// ends sit outside the regimes the formulas were calibrated for.
pub fn default_gamma(n: usize) -> f64 {
    (100.0 / n as f64).clamp(GAMMA_FLOOR, 1.0)
}

/// Radius grid for one weight vector: smallest and largest possible distances
/// between distinct dataset points, and the number of `c`-fold levels needed
/// to sweep between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusProfile {
    pub r_min: f64,
    pub r_max: f64,
    pub levels: u32,
}

/// Smallest number of levels with `c^levels >= ratio`.
fn levels_for_ratio(ratio: f64, c: u32) -> u32 {
    let mut levels = (ratio.ln() / (c as f64).ln()).ceil().max(0.0) as u32;
    while levels > 0 && (c as f64).powi(levels as i32 - 1) >= ratio {
        levels -= 1;
    }
    while (c as f64).powi(levels as i32) < ratio {
        levels += 1;
    }
    levels
}

/// Radius grid from the declared integer value range: the smallest nonzero
/// `l_p` distance between distinct integer points is one unit step along the
/// lightest dimension, and the largest stretches every dimension across the
/// full range.
pub fn radius_profile_range(
    w: &WeightVector,
    value_range: (i32, i32),
    p: f64,
    c: u32,
) -> Result<RadiusProfile> {
    Metric::Lp(p).validate()?;
    if c < 2 {
        return Err(Error::InvalidParameter(format!("c must be >= 2, got {c}")));
    }
    let (lo, hi) = value_range;
    if hi <= lo {
        return Err(Error::InvalidParameter(format!("degenerate value range [{lo}, {hi}]")));
    }
    let span = (hi as f64) - (lo as f64);
    let r_min = w.min_weight();
    let r_max = w
        .weights
        .iter()
        .map(|&wi| (wi * span).powf(p))
        .sum::<f64>()
        .powf(1.0 / p);
    Ok(RadiusProfile { r_min, r_max, levels: levels_for_ratio(r_max / r_min, c) })
}

pub fn radius_profile(dataset: &Dataset, w: &WeightVector, p: f64, c: u32) -> Result<RadiusProfile> {
    if w.dim() != dataset.d() {
        return Err(Error::DimensionMismatch { expected: dataset.d(), got: w.dim() });
    }
    radius_profile_range(w, dataset.value_range(), p, c)
}

/// Table count and collision threshold from the sensitivity gap.
pub fn beta_mu(p1: f64, p2: f64, n: usize, epsilon: f64, gamma: f64) -> Result<(u32, f64)> {
    if !(p1 > p2) {
        return Err(Error::UnusableFamily { p1, p2 });
    }
    if !(p2 > 0.0 && p1 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "collision probabilities must satisfy 0 < P2 < P1 < 1, got P1={p1}, P2={p2}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || !(gamma > 0.0 && gamma < 2.0) || n == 0 {
        return Err(Error::InvalidParameter("epsilon in (0,1), gamma in (0,2), n >= 1 required".into()));
    }
    let z = ((2.0 / gamma).ln() / (1.0 / epsilon).ln()).sqrt();
    let beta_raw = (1.0 / epsilon).ln() * (1.0 + z).powi(2) / (2.0 * (p1 - p2).powi(2));
    let beta = beta_raw.ceil();
    if beta > u32::MAX as f64 {
        // The sensitivity gap is so thin that the table count is not even
        // representable; the derived family is unusable in practice.
        return Err(Error::UnusableFamily { p1, p2 });
    }
    let beta = beta as u32;
    let mu = (z * p1 + p2) / (1.0 + z) * beta as f64;
    Ok((beta, mu))
}

/// `beta_mu` with the standard constants `epsilon = 0.01`, `gamma = 100/n`.
pub fn beta_mu_default(p1: f64, p2: f64, n: usize) -> Result<(u32, f64)> {
    beta_mu(p1, p2, n, DEFAULT_EPSILON, default_gamma(n))
}

/// Search parameters of one weight vector relative to a base family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorParams {
    pub beta: u32,
    pub mu: f64,
    pub mu_reduced: f64,
    pub x_up: f64,
    pub y_down: f64,
}

/// Shared planning configuration: the metric exponent, approximation ratio,
/// data statistics, and the optional trade-off switches.
#[derive(Debug, Clone)]
pub struct SolverContext {
    pub p: f64,
    pub c: u32,
    pub n: usize,
    pub value_range: (i32, i32),
    pub epsilon: f64,
    pub relaxation: Option<Relaxation>,
    pub reduction: bool,
    mc_pool: Arc<OnceLock<Arc<McStableSample>>>,
}

impl SolverContext {
    pub fn new(p: f64, c: u32, n: usize, value_range: (i32, i32)) -> Result<Self> {
        Metric::Lp(p).validate()?;
        if c < 2 {
            return Err(Error::InvalidParameter(format!("c must be >= 2, got {c}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        Ok(SolverContext {
            p,
            c,
            n,
            value_range,
            epsilon: DEFAULT_EPSILON,
            relaxation: None,
            reduction: false,
            mc_pool: Arc::new(OnceLock::new()),
        })
    }

    pub fn with_relaxation(mut self, relaxation: Option<Relaxation>) -> Self {
        self.relaxation = relaxation;
        self
    }

    pub fn with_reduction(mut self, reduction: bool) -> Self {
        self.reduction = reduction;
        self
    }

    pub fn gamma(&self) -> f64 {
        default_gamma(self.n)
    }

    /// Collision probability function of the family rooted at `base`, with
    /// the empirical bucket width `w = r_min` of the base. Fractional `p`
    /// shares one Monte Carlo draw pool across every base.
    pub fn family(&self, base: &WeightVector) -> Result<CollisionProbability> {
        let w = base.min_weight();
        if self.p == 1.0 || self.p == 2.0 {
            CollisionProbability::lp(self.p, w)
        } else {
            let pool = match self.mc_pool.get() {
                Some(pool) => pool.clone(),
                None => {
                    let pool = McStableSample::new(self.p)?;
                    let _ = self.mc_pool.set(pool.clone());
                    self.mc_pool.get().expect("pool just set").clone()
                }
            };
            CollisionProbability::lp_shared(w, pool)
        }
    }

    pub fn profile(&self, w: &WeightVector) -> Result<RadiusProfile> {
        radius_profile_range(w, self.value_range, self.p, self.c)
    }

    pub fn vector_params(&self, base: &WeightVector, target: &WeightVector) -> Result<VectorParams> {
        let cp = self.family(base)?;
        let profile = self.profile(target)?;
        vector_params(base, target, &profile, &cp, self.c, self.n, self.epsilon, self.relaxation, self.reduction)
    }

    pub fn group_params(&self, base: &WeightVector, members: &[&WeightVector]) -> Result<GroupParams> {
        group_params(base, members, self)
    }
}

/// Parameters of `target` when answered from the hash tables of `base`.
///
/// `x = r_min`, `y = c * r_min` of the target; `x_up`/`y_down` come from the
/// `l_p` ratio bounds, optionally relaxed; `(beta, mu)` from the resulting
/// sensitivity gap; `mu_reduced = X * mu` with
/// `X = P((c^2 r_min)^up) / P((r_min)^up)` when reduction is enabled.
#[allow(clippy::too_many_arguments)]
pub fn vector_params(
    base: &WeightVector,
    target: &WeightVector,
    profile: &RadiusProfile,
    cp: &CollisionProbability,
    c: u32,
    n: usize,
    epsilon: f64,
    relaxation: Option<Relaxation>,
    reduction: bool,
) -> Result<VectorParams> {
    let metric = cp.metric();
    let spec = BoundSpec::new(metric, base, target).with_relaxation(relaxation);
    let (x_up, y_down) = lp_bounds(&spec, profile.r_min, c)?;
    if !(x_up < y_down) {
        return Err(Error::Unassignable { base: base.id, target: target.id });
    }
    let p1 = cp.eval(x_up)?;
    let p2 = cp.eval(y_down)?;
    let (beta, mu) = beta_mu(p1, p2, n, epsilon, default_gamma(n))?;
    let mu_reduced = if reduction {
        let x = cp.eval((c as f64).powi(2) * x_up)? / p1;
        x * mu
    } else {
        mu
    };
    Ok(VectorParams { beta, mu, mu_reduced, x_up, y_down })
}

/// One member of a hash-table group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMember {
    pub vector: WeightVector,
    pub params: VectorParams,
    pub profile: RadiusProfile,
}

/// A base family plus every weight vector answered from its tables.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupParams {
    pub base: WeightVector,
    pub members: Vec<GroupMember>,
    pub beta_group: u32,
    pub w_bucket: f64,
    pub b_range_levels: u32,
}

impl GroupParams {
    pub fn member(&self, weight_id: u32) -> Option<&GroupMember> {
        self.members.iter().find(|m| m.vector.id == weight_id)
    }
}

/// Aggregates per-member parameters into the group contract: bucket width is
/// the base's `r_min`, the `b*` range covers the widest member radius grid,
/// and the table count is the largest member beta.
pub fn group_params(base: &WeightVector, members: &[&WeightVector], ctx: &SolverContext) -> Result<GroupParams> {
    if members.is_empty() {
        return Err(Error::InvalidParameter("group must have at least one member".into()));
    }
    let cp = ctx.family(base)?;
    let mut out_members = Vec::with_capacity(members.len());
    let mut beta_group = 0u32;
    let mut max_ratio = 1.0f64;
    for target in members {
        let profile = ctx.profile(target)?;
        let params = vector_params(
            base,
            target,
            &profile,
            &cp,
            ctx.c,
            ctx.n,
            ctx.epsilon,
            ctx.relaxation,
            ctx.reduction,
        )?;
        beta_group = beta_group.max(params.beta);
        max_ratio = max_ratio.max(profile.r_max / profile.r_min);
        out_members.push(GroupMember { vector: (*target).clone(), params, profile });
    }
    out_members.sort_by_key(|m| m.vector.id);
    Ok(GroupParams {
        base: base.clone(),
        members: out_members,
        beta_group,
        w_bucket: base.min_weight(),
        b_range_levels: levels_for_ratio(max_ratio, ctx.c),
    })
}

/// Feasibility floor for the per-group table cap: the largest self-based
/// beta over the whole weight-vector set.
pub fn tau_min(s: &[WeightVector], ctx: &SolverContext) -> Result<u32> {
    let mut best = 0u32;
    for w in s {
        let params = ctx.vector_params(w, w)?;
        best = best.max(params.beta);
    }
    if best == 0 {
        return Err(Error::InvalidParameter("empty weight vector set".into()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn wv(id: u32, weights: &[f64]) -> WeightVector {
        WeightVector::new(id, weights.to_vec()).unwrap()
    }

    #[test]
    fn radius_profile_uniform_l1() {
        let w = wv(0, &vec![1.0; 400]);
        let prof = radius_profile_range(&w, (0, 10_000), 1.0, 2).unwrap();
        assert_eq!(prof.r_min, 1.0);
        assert_eq!(prof.r_max, 4_000_000.0);
        assert!(2f64.powi(prof.levels as i32) >= prof.r_max / prof.r_min);
        assert!(2f64.powi(prof.levels as i32 - 1) < prof.r_max / prof.r_min);
    }

    #[test]
    fn radius_profile_small_l2() {
        let w = wv(0, &[2.0, 3.0]);
        let prof = radius_profile_range(&w, (0, 1), 2.0, 2).unwrap();
        assert_eq!(prof.r_min, 2.0);
        assert!((prof.r_max - 13f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn radius_profile_rejects_degenerate_range() {
        let w = wv(0, &[1.0]);
        assert!(radius_profile_range(&w, (5, 5), 2.0, 2).is_err());
    }

    #[test]
    fn radius_profile_reads_dataset_range() {
        let ds = Dataset::from_rows(vec![vec![0, 3], vec![7, 1]], (0, 10)).unwrap();
        let w = wv(0, &[2.0, 3.0]);
        let prof = radius_profile(&ds, &w, 2.0, 3).unwrap();
        assert_eq!(prof, radius_profile_range(&w, (0, 10), 2.0, 3).unwrap());
        let wrong_dim = wv(0, &[1.0]);
        assert!(radius_profile(&ds, &wrong_dim, 2.0, 3).is_err());
    }

    #[test]
    fn r_min_below_observed_distances() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let d = 6;
        let w = wv(0, &(0..d).map(|_| rng.gen_range(0.5..8.0)).collect::<Vec<_>>());
        let p = 1.4;
        let prof = radius_profile_range(&w, (0, 100), p, 3).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0..=100) as f64).collect();
            let mut y = x.clone();
            // Force a distinct integer point.
            let j = rng.gen_range(0..d);
            let bump = if y[j] >= 50.0 { -(rng.gen_range(1..=3) as f64) } else { rng.gen_range(1..=3) as f64 };
            y[j] += bump;
            let dist = crate::metric::weighted_distance_coords(&Metric::Lp(p), &w, &x, &y).unwrap();
            assert!(prof.r_min <= dist + 1e-12);
        }
    }

    #[test]
    fn beta_mu_reference_point() {
        let (beta, mu) = beta_mu_default(0.5, 0.3, 100_000).unwrap();
        assert_eq!(beta, 301);
        let z = ((2.0f64 / 1e-3).ln() / 100f64.ln()).sqrt();
        assert!((z - 1.2847).abs() < 1e-3);
        assert!(mu < beta as f64);
        assert!((mu - (z * 0.5 + 0.3) / (1.0 + z) * 301.0).abs() < 1e-9);
    }

    #[test]
    fn beta_quadruples_when_gap_halves() {
        let n = 100_000;
        let gamma = default_gamma(n);
        let z = ((2.0 / gamma).ln() / (1.0 / DEFAULT_EPSILON).ln()).sqrt();
        let raw = |gap: f64| (1.0 / DEFAULT_EPSILON).ln() * (1.0 + z).powi(2) / (2.0 * gap * gap);
        assert!((raw(0.1) / raw(0.2) - 4.0).abs() < 1e-12);
        let (b_wide, _) = beta_mu_default(0.5, 0.3, n).unwrap();
        let (b_narrow, _) = beta_mu_default(0.5, 0.4, n).unwrap();
        assert!(b_narrow >= 4 * b_wide - 4 && b_narrow <= 4 * b_wide + 4);
    }

    #[test]
    fn beta_nondecreasing_in_n() {
        let (b1, _) = beta_mu_default(0.5, 0.3, 100_000).unwrap();
        let (b2, _) = beta_mu_default(0.5, 0.3, 1_000_000).unwrap();
        assert!(b2 >= b1);
        // Log growth: an order of magnitude in n stays well under doubling.
        let (b3, _) = beta_mu_default(0.5, 0.3, 1_600_000).unwrap();
        assert!((b3 as f64) < 2.0 * b1 as f64);
    }

    #[test]
    fn beta_mu_rejects_bad_probabilities() {
        assert!(matches!(beta_mu_default(0.3, 0.5, 100), Err(Error::UnusableFamily { .. })));
        assert!(beta_mu_default(0.3, 0.3, 100).is_err());
    }

    /// Self-based parameters at paper scale: these reproduce the per-vector
    /// table counts implied by the naive totals in the published results
    /// (432 for l1 and 236 for l2 at n = 400k, c = 3).
    #[test]
    fn self_beta_at_reference_scale() {
        let n = 400_000;
        for (p, want) in [(1.0, 432u32), (2.0, 236u32)] {
            let ctx = SolverContext::new(p, 3, n, (0, 10_000)).unwrap();
            let w = wv(0, &[4.2; 16]);
            let params = ctx.vector_params(&w, &w).unwrap();
            assert_eq!(params.beta, want, "p = {p}");
        }
    }

    #[test]
    fn self_params_degenerate_to_plain_c2lsh() {
        let ctx = SolverContext::new(2.0, 3, 10_000, (0, 100)).unwrap();
        let w = wv(3, &[2.0, 5.0, 1.0]);
        let params = ctx.vector_params(&w, &w).unwrap();
        assert!((params.x_up - 1.0).abs() < 1e-12); // r_min = min weight = 1
        assert!((params.y_down - 3.0).abs() < 1e-12);
        assert_eq!(params.mu_reduced, params.mu); // reduction off
    }

    #[test]
    fn relaxation_never_raises_beta() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let d = 16;
        let ctx = SolverContext::new(2.0, 3, 10_000, (0, 1000)).unwrap();
        let relaxed_ctx = ctx.clone().with_relaxation(Some(Relaxation { v: d / 4, v_prime: d / 4 }));
        let mut seen = 0;
        for _ in 0..40 {
            let base = wv(0, &(0..d).map(|_| rng.gen_range(1.0..3.0)).collect::<Vec<_>>());
            let target = wv(1, &(0..d).map(|_| rng.gen_range(1.0..3.0)).collect::<Vec<_>>());
            let plain = ctx.vector_params(&base, &target);
            let relaxed = relaxed_ctx.vector_params(&base, &target);
            if let (Ok(a), Ok(b)) = (plain, relaxed) {
                assert!(b.beta <= a.beta);
                seen += 1;
            }
        }
        assert!(seen > 0, "no usable pairs sampled");
    }

    #[test]
    fn reduction_scales_mu_by_x() {
        let ctx = SolverContext::new(2.0, 3, 10_000, (0, 100)).unwrap().with_reduction(true);
        let base = wv(0, &[1.0, 2.0]);
        let target = wv(1, &[1.5, 1.8]);
        let params = ctx.vector_params(&base, &target).unwrap();
        assert!(params.mu_reduced < params.mu);
        let cp = ctx.family(&base).unwrap();
        let x = cp.eval(9.0 * params.x_up).unwrap() / cp.eval(params.x_up).unwrap();
        assert!((params.mu_reduced / params.mu - x).abs() < 1e-12);
    }

    #[test]
    fn beta_decreases_in_c() {
        let w = wv(0, &[2.0; 8]);
        let mut last = u32::MAX;
        for c in [2u32, 3, 4, 5, 6] {
            let ctx = SolverContext::new(2.0, c, 400_000, (0, 10_000)).unwrap();
            let params = ctx.vector_params(&w, &w).unwrap();
            assert!(params.beta < last, "beta should strictly fall as c grows");
            last = params.beta;
        }
    }

    #[test]
    fn mu_stays_below_beta() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p2 = rng.gen_range(0.01..0.8);
            let p1 = rng.gen_range(p2 + 0.01..0.99);
            let n = rng.gen_range(100..10_000_000);
            if let Ok((beta, mu)) = beta_mu_default(p1, p2, n) {
                assert!(mu < beta as f64);
                assert!(mu > 0.0);
            }
        }
    }

    #[test]
    fn group_params_aggregate() {
        let ctx = SolverContext::new(2.0, 3, 10_000, (0, 100)).unwrap();
        let base = wv(0, &[1.0, 1.1]);
        let near = wv(1, &[1.05, 1.0]);
        let solo = ctx.group_params(&base, &[&base]).unwrap();
        assert_eq!(solo.beta_group, solo.members[0].params.beta);
        assert_eq!(solo.w_bucket, 1.0);

        let duo = ctx.group_params(&base, &[&base, &near]).unwrap();
        let betas: Vec<u32> = duo.members.iter().map(|m| m.params.beta).collect();
        assert_eq!(duo.beta_group, *betas.iter().max().unwrap());
        for m in &duo.members {
            assert!(duo.b_range_levels >= m.profile.levels);
        }
    }

    #[test]
    fn group_params_random_members_cover_levels() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let ctx = SolverContext::new(2.0, 3, 10_000, (0, 1000)).unwrap();
        let d = 6;
        let base = wv(0, &(0..d).map(|_| rng.gen_range(1.0..2.0)).collect::<Vec<_>>());
        let members: Vec<WeightVector> = (1..=5)
            .map(|id| wv(id, &(0..d).map(|_| rng.gen_range(1.0..2.0)).collect::<Vec<_>>()))
            .collect();
        let refs: Vec<&WeightVector> = members.iter().collect();
        if let Ok(group) = ctx.group_params(&base, &refs) {
            for m in &group.members {
                assert!(group.b_range_levels >= m.profile.levels);
                assert!(group.beta_group >= m.params.beta);
            }
        }
    }

    #[test]
    fn tau_min_is_max_self_beta() {
        let ctx = SolverContext::new(2.0, 3, 10_000, (0, 100)).unwrap();
        let s = vec![wv(0, &[1.0, 2.0]), wv(1, &[5.0, 5.0]), wv(2, &[0.5, 9.0])];
        let tm = tau_min(&s, &ctx).unwrap();
        let max_self = s.iter().map(|w| ctx.vector_params(w, w).unwrap().beta).max().unwrap();
        assert_eq!(tm, max_self);
    }
}
