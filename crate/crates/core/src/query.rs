//! `(c,k)`-WNN query answering: collision counting over expanding
//! virtual-rehashing radii, with per-query I/O accounting.

use std::collections::HashMap;

use crate::data::{Dataset, Point};
use crate::error::{Error, Result};
use crate::index::{IndexFile, IoCounter, PointStore};
use crate::lsh::level_bucket;
use crate::metric::{weighted_distance_coords, Metric};
use crate::params::default_gamma;

/// Result of one query: neighbors ascending by (distance, id), the radius at
/// which the search stopped, how many frequent candidates had their distance
/// checked, and the I/O charge.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub neighbors: Vec<(u32, f64)>,
    pub radius_final: f64,
    pub candidates_checked: usize,
    pub io: IoCounter,
}

/// Per-query collision counts and the frequent set `C`. A point enters `C`
/// exactly when its count reaches the active threshold; its true weighted
/// distance is computed once at that moment.
#[derive(Debug, Default)]
pub struct CollisionState {
    counts: HashMap<u32, u32>,
    frequent: Vec<(u32, f64)>,
}

impl CollisionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts one new collision per member id. The caller guarantees each
    /// (point, table) pair is presented at most once per query, which the
    /// incremental range bookkeeping in `search` provides. Returns the ids
    /// promoted to frequent by this batch.
    pub fn count_collisions(&mut self, members: &[u32], threshold: f64) -> Vec<u32> {
        let mut promoted = Vec::new();
        for &id in members {
            let count = self.counts.entry(id).or_insert(0);
            let before = *count;
            *count += 1;
            if (before as f64) < threshold && (*count as f64) >= threshold {
                promoted.push(id);
            }
        }
        promoted
    }

    pub fn count(&self, id: u32) -> u32 {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    pub fn record_frequent(&mut self, id: u32, distance: f64) {
        self.frequent.push((id, distance));
    }

    pub fn frequent_len(&self) -> usize {
        self.frequent.len()
    }

    pub fn frequent_within(&self, radius: f64) -> usize {
        self.frequent.iter().filter(|&&(_, d)| d <= radius).count()
    }

    pub fn into_knn(mut self, k: usize) -> Vec<(u32, f64)> {
        self.frequent
            .sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        self.frequent.truncate(k);
        self.frequent
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub k: usize,
    /// Overrides the index header's reduction flag when set.
    pub use_reduced: Option<bool>,
}

impl SearchOptions {
    pub fn new(k: usize) -> Self {
        SearchOptions { k, use_reduced: None }
    }
}

/// Answers a `(c,k)`-WNN query for the weight vector `w_id` over the index.
///
/// The search radius starts at the member's `r_min` and multiplies by `c`
/// each round along with the bucket level; per round it probes the member's
/// beta tables, counts collisions on the newly exposed level-1 buckets only,
/// and stops as soon as `k` frequent points sit within `c*R` or
/// `k + gamma*n` frequent points have been checked. Stop conditions are
/// evaluated after every table so a final round may end mid-sweep.
pub fn search(
    index: &IndexFile,
    dataset: &Dataset,
    q: &Point,
    w_id: u32,
    opts: &SearchOptions,
) -> Result<QueryResult> {
    index.verify_dataset(dataset)?;
    let n = dataset.n();
    if opts.k == 0 || opts.k > n {
        return Err(Error::KTooLarge { k: opts.k, n });
    }
    let gi = index.plan.group_of(w_id).ok_or(Error::UnknownWeightVector(w_id))?;
    let group = &index.plan.groups[gi];
    let member = group.member(w_id).ok_or(Error::UnknownWeightVector(w_id))?;
    let tables = &index.groups[gi];
    let beta = member.params.beta as usize;
    if beta > tables.len() {
        return Err(Error::Format(format!(
            "group {gi} holds {} tables but member {w_id} needs {beta}",
            tables.len()
        )));
    }

    let use_reduced = opts.use_reduced.unwrap_or(index.header.reduction);
    let threshold = if use_reduced { member.params.mu_reduced } else { member.params.mu };
    let metric = Metric::Lp(index.header.p);
    let c = index.header.c as i64;
    let max_checked = opts.k + (default_gamma(n) * n as f64).round() as usize;

    let base_buckets: Vec<i64> = tables[..beta]
        .iter()
        .map(|t| t.func.hash(&q.coords))
        .collect::<Result<Vec<i64>>>()?;

    let mut covered: Vec<Option<(i64, i64)>> = vec![None; beta];
    let mut state = CollisionState::new();
    let mut store = PointStore::new(dataset);
    let mut io = IoCounter::default();
    let mut radius = member.profile.r_min;
    let mut level: i64 = 1;

    'rounds: for round in 0..=member.profile.levels {
        for (t, table) in tables[..beta].iter().enumerate() {
            let lb = level_bucket(base_buckets[t], level);
            let lo = lb * level;
            let hi = lo.saturating_add(level - 1);
            let runs: [Option<(i64, i64)>; 2] = match covered[t] {
                None => [Some((lo, hi)), None],
                Some((old_lo, old_hi)) => [
                    (lo < old_lo).then_some((lo, old_lo - 1)),
                    (old_hi < hi).then_some((old_hi + 1, hi)),
                ],
            };
            covered[t] = Some((lo, hi));
            for run in runs.into_iter().flatten() {
                let members = table.read_l1_range(run.0, run.1, &mut io);
                for id in state.count_collisions(&members, threshold) {
                    let point = store.fetch(id, &mut io);
                    let dist = weighted_distance_coords(&metric, &member.vector, &point.coords, &q.coords)?;
                    state.record_frequent(id, dist);
                }
            }
            if state.frequent_within(c as f64 * radius) >= opts.k {
                break 'rounds;
            }
            if state.frequent_len() >= max_checked {
                break 'rounds;
            }
        }
        if round == member.profile.levels {
            break;
        }
        radius *= c as f64;
        level = level.checked_mul(c).ok_or_else(|| {
            Error::InvalidParameter("virtual rehashing level overflows".into())
        })?;
    }

    let candidates_checked = state.frequent_len();
    Ok(QueryResult {
        neighbors: state.into_knn(opts.k),
        radius_final: radius,
        candidates_checked,
        io,
    })
}
