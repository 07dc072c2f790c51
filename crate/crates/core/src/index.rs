//! Hash-table construction, index persistence, and the simulated
//! 4KB-block I/O accounting behind the efficiency metric.

use std::collections::HashSet;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::bounds::Relaxation;
use crate::data::{Dataset, Point, WeightVector};
use crate::error::{Error, Result};
use crate::lsh::{sample_hash_function, LpHashFunction};
use crate::params::{GroupMember, GroupParams, RadiusProfile, VectorParams};
use crate::partition::PartitionPlan;

pub const INDEX_MAGIC: &[u8; 8] = b"WLSHIDX1";
pub const INDEX_VERSION: u32 = 1;
pub const BLOCK_SIZE: u64 = 4096;
/// Serialized size of one (bucket id, point id) entry in the charge model.
const ENTRY_BYTES: u64 = 8;

/// Split I/O charge: pages read while identifying candidates in buckets, and
/// pages read while fetching candidate points to check their distances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IoCounter {
    pub bucket_blocks_read: u64,
    pub candidate_blocks_read: u64,
}

impl IoCounter {
    pub fn total(&self) -> u64 {
        self.bucket_blocks_read + self.candidate_blocks_read
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DirEntry {
    bucket: i64,
    start: u32,
    len: u32,
}

/// One hash table: a function plus its bucket directory and the point ids
/// grouped by bucket, sorted by (bucket, id).
#[derive(Debug, Clone, PartialEq)]
pub struct HashTable {
    pub func: LpHashFunction,
    dir: Vec<DirEntry>,
    ids: Vec<u32>,
}

impl HashTable {
    pub fn build(func: LpHashFunction, dataset: &Dataset) -> HashTable {
        let n = dataset.n();
        let mut entries: Vec<(i64, u32)> = (0..n)
            .map(|i| (func.hash_row(dataset.row(i)), i as u32))
            .collect();
        entries.sort_unstable();
        let mut dir: Vec<DirEntry> = Vec::new();
        let mut ids = Vec::with_capacity(n);
        for (bucket, id) in entries {
            match dir.last_mut() {
                Some(last) if last.bucket == bucket => last.len += 1,
                _ => dir.push(DirEntry { bucket, start: ids.len() as u32, len: 1 }),
            }
            ids.push(id);
        }
        HashTable { func, dir, ids }
    }

    pub fn bucket_count(&self) -> usize {
        self.dir.len()
    }

    pub fn entry_count(&self) -> usize {
        self.ids.len()
    }

    pub fn bucket_sizes(&self) -> impl Iterator<Item = (i64, usize)> + '_ {
        self.dir.iter().map(|e| (e.bucket, e.len as usize))
    }

    /// Reads the contiguous run of level-1 buckets `lo ..= hi`, charging
    /// `ceil(entries * 8 / 4096)` data pages plus one directory page.
    pub fn read_l1_range(&self, lo: i64, hi: i64, io: &mut IoCounter) -> Vec<u32> {
        let mut out = Vec::new();
        let mut touched = 0u64;
        let mut i = self.dir.partition_point(|e| e.bucket < lo);
        while i < self.dir.len() && self.dir[i].bucket <= hi {
            let e = &self.dir[i];
            out.extend_from_slice(&self.ids[e.start as usize..(e.start + e.len) as usize]);
            touched += e.len as u64;
            i += 1;
        }
        io.bucket_blocks_read += (touched * ENTRY_BYTES).div_ceil(BLOCK_SIZE) + 1;
        out
    }
}

/// Build-time configuration recorded in the index header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildConfig {
    pub p: f64,
    pub c: u32,
    pub tau: u32,
    pub relaxation: Option<Relaxation>,
    pub reduction: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexHeader {
    pub dataset_digest: [u8; 32],
    pub p: f64,
    pub c: u32,
    pub tau: u32,
    pub relaxation: Option<Relaxation>,
    pub reduction: bool,
    pub n: u32,
    pub d: u32,
    pub seed: u64,
}

/// A built index: header, the partition plan (with its weight vectors), and
/// one group of hash tables per plan group.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexFile {
    pub header: IndexHeader,
    pub plan: PartitionPlan,
    pub groups: Vec<Vec<HashTable>>,
}

// Upper bound on any length-prefixed allocation while parsing, so a corrupt
// header fails with a format error instead of an absurd allocation.
fn checked_len(n: u32, what: &str) -> Result<usize> {
    const MAX: u32 = 1 << 28;
    if n > MAX {
        return Err(Error::Format(format!("implausible {what} count {n}")));
    }
    Ok(n as usize)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic per-table seed.
pub fn table_seed(seed: u64, group: usize, table: usize) -> u64 {
    splitmix64(seed ^ splitmix64((group as u64) << 32 | table as u64))
}

/// Samples `beta_group` functions from each group's base family and hashes
/// every dataset point into one bucket per table.
pub fn build_index(dataset: &Dataset, plan: &PartitionPlan, cfg: &BuildConfig) -> Result<IndexFile> {
    let d = dataset.d();
    for group in &plan.groups {
        if group.base.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: group.base.dim() });
        }
    }
    let jobs: Vec<(usize, usize)> = plan
        .groups
        .iter()
        .enumerate()
        .flat_map(|(g, group)| (0..group.beta_group as usize).map(move |t| (g, t)))
        .collect();
    let tables: Vec<Result<(usize, HashTable)>> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let group = &plan.groups[g];
            let func = sample_hash_function(
                cfg.p,
                d,
                group.w_bucket,
                group.b_range_levels,
                cfg.c,
                &group.base,
                table_seed(cfg.seed, g, t),
            )?;
            Ok((g, HashTable::build(func, dataset)))
        })
        .collect();
    let mut groups: Vec<Vec<HashTable>> = plan.groups.iter().map(|_| Vec::new()).collect();
    for res in tables {
        let (g, table) = res?;
        groups[g].push(table);
    }
    Ok(IndexFile {
        header: IndexHeader {
            dataset_digest: dataset.digest(),
            p: cfg.p,
            c: cfg.c,
            tau: cfg.tau,
            relaxation: cfg.relaxation,
            reduction: cfg.reduction,
            n: dataset.n() as u32,
            d: d as u32,
            seed: cfg.seed,
        },
        plan: plan.clone(),
        groups,
    })
}

impl IndexFile {
    pub fn table_count(&self) -> u64 {
        self.groups.iter().map(|g| g.len() as u64).sum()
    }

    pub fn verify_dataset(&self, dataset: &Dataset) -> Result<()> {
        if dataset.digest() != self.header.dataset_digest {
            return Err(Error::DigestMismatch);
        }
        Ok(())
    }

    fn table(&self, group: usize, table: usize) -> Result<&HashTable> {
        self.groups
            .get(group)
            .and_then(|g| g.get(table))
            .ok_or(Error::UnknownTable { group, table })
    }

    /// Reads a level-`l` bucket as its `l` consecutive level-1 buckets.
    /// `level` must be a power of `c` within the group's `b*` range.
    pub fn read_bucket(
        &self,
        group: usize,
        table: usize,
        level: i64,
        level_bucket: i64,
        io: &mut IoCounter,
    ) -> Result<Vec<u32>> {
        let t = self.table(group, table)?;
        let levels = self.plan.groups[group].b_range_levels;
        let c = self.header.c as i64;
        let mut valid = 1i64;
        let mut ok = level == 1;
        for _ in 0..levels {
            valid = valid.saturating_mul(c);
            if valid == level {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "level {level} is not a power of c = {c} within {levels} levels"
            )));
        }
        let lo = level_bucket
            .checked_mul(level)
            .ok_or_else(|| Error::InvalidParameter("level bucket overflow".into()))?;
        Ok(t.read_l1_range(lo, lo.saturating_add(level - 1), io))
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        Self::read(&mut r)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(INDEX_MAGIC)?;
        w.write_u32::<LittleEndian>(INDEX_VERSION)?;
        w.write_all(&self.header.dataset_digest)?;
        w.write_f64::<LittleEndian>(self.header.p)?;
        w.write_u32::<LittleEndian>(self.header.c)?;
        w.write_u32::<LittleEndian>(self.header.tau)?;
        match self.header.relaxation {
            Some(rel) => {
                w.write_u8(1)?;
                w.write_u32::<LittleEndian>(rel.v as u32)?;
                w.write_u32::<LittleEndian>(rel.v_prime as u32)?;
            }
            None => {
                w.write_u8(0)?;
                w.write_u32::<LittleEndian>(0)?;
                w.write_u32::<LittleEndian>(0)?;
            }
        }
        w.write_u8(self.header.reduction as u8)?;
        w.write_u32::<LittleEndian>(self.header.n)?;
        w.write_u32::<LittleEndian>(self.header.d)?;
        w.write_u64::<LittleEndian>(self.header.seed)?;

        // Plan section.
        w.write_u32::<LittleEndian>(self.plan.groups.len() as u32)?;
        for group in &self.plan.groups {
            w.write_u32::<LittleEndian>(group.base.id)?;
            for &x in &group.base.weights {
                w.write_f64::<LittleEndian>(x)?;
            }
            w.write_f64::<LittleEndian>(group.w_bucket)?;
            w.write_u32::<LittleEndian>(group.b_range_levels)?;
            w.write_u32::<LittleEndian>(group.beta_group)?;
            w.write_u32::<LittleEndian>(group.members.len() as u32)?;
            for m in &group.members {
                w.write_u32::<LittleEndian>(m.vector.id)?;
                for &x in &m.vector.weights {
                    w.write_f64::<LittleEndian>(x)?;
                }
                w.write_u32::<LittleEndian>(m.params.beta)?;
                w.write_f64::<LittleEndian>(m.params.mu)?;
                w.write_f64::<LittleEndian>(m.params.mu_reduced)?;
                w.write_f64::<LittleEndian>(m.params.x_up)?;
                w.write_f64::<LittleEndian>(m.params.y_down)?;
                w.write_f64::<LittleEndian>(m.profile.r_min)?;
                w.write_f64::<LittleEndian>(m.profile.r_max)?;
                w.write_u32::<LittleEndian>(m.profile.levels)?;
            }
        }

        // Tables: per group, per table the function, directory, and id pages
        // padded to whole 4096-byte blocks.
        for (g, tables) in self.groups.iter().enumerate() {
            let _ = g;
            w.write_u32::<LittleEndian>(tables.len() as u32)?;
            for t in tables {
                w.write_u32::<LittleEndian>(t.func.dim() as u32)?;
                w.write_f64::<LittleEndian>(t.func.w)?;
                w.write_f64::<LittleEndian>(t.func.b_star)?;
                for &a in &t.func.a {
                    w.write_f64::<LittleEndian>(a)?;
                }
                w.write_u32::<LittleEndian>(t.dir.len() as u32)?;
                for e in &t.dir {
                    w.write_i64::<LittleEndian>(e.bucket)?;
                    w.write_u32::<LittleEndian>(e.len)?;
                }
                w.write_u32::<LittleEndian>(t.ids.len() as u32)?;
                for &id in &t.ids {
                    w.write_u32::<LittleEndian>(id)?;
                }
                let id_bytes = t.ids.len() as u64 * 4;
                let pad = (BLOCK_SIZE - id_bytes % BLOCK_SIZE) % BLOCK_SIZE;
                w.write_all(&vec![0u8; pad as usize])?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(Error::Format("bad index magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != INDEX_VERSION {
            return Err(Error::Format(format!("unsupported index version {version}")));
        }
        let mut dataset_digest = [0u8; 32];
        r.read_exact(&mut dataset_digest)?;
        let p = r.read_f64::<LittleEndian>()?;
        let c = r.read_u32::<LittleEndian>()?;
        let tau = r.read_u32::<LittleEndian>()?;
        let has_relax = r.read_u8()? != 0;
        let v = r.read_u32::<LittleEndian>()? as usize;
        let v_prime = r.read_u32::<LittleEndian>()? as usize;
        let relaxation = has_relax.then_some(Relaxation { v, v_prime });
        let reduction = r.read_u8()? != 0;
        let n = r.read_u32::<LittleEndian>()?;
        let d = checked_len(r.read_u32::<LittleEndian>()?, "dimension")?;
        let seed = r.read_u64::<LittleEndian>()?;

        let n_groups = checked_len(r.read_u32::<LittleEndian>()?, "group")?;
        let mut plan_groups = Vec::with_capacity(n_groups);
        let mut assignment = std::collections::BTreeMap::new();
        for gi in 0..n_groups {
            let base_id = r.read_u32::<LittleEndian>()?;
            let mut weights = vec![0f64; d];
            r.read_f64_into::<LittleEndian>(&mut weights)?;
            let base = WeightVector::new(base_id, weights)?;
            let w_bucket = r.read_f64::<LittleEndian>()?;
            let b_range_levels = r.read_u32::<LittleEndian>()?;
            let beta_group = r.read_u32::<LittleEndian>()?;
            let n_members = checked_len(r.read_u32::<LittleEndian>()?, "member")?;
            let mut members = Vec::with_capacity(n_members);
            for _ in 0..n_members {
                let id = r.read_u32::<LittleEndian>()?;
                let mut weights = vec![0f64; d];
                r.read_f64_into::<LittleEndian>(&mut weights)?;
                let vector = WeightVector::new(id, weights)?;
                let beta = r.read_u32::<LittleEndian>()?;
                let mu = r.read_f64::<LittleEndian>()?;
                let mu_reduced = r.read_f64::<LittleEndian>()?;
                let x_up = r.read_f64::<LittleEndian>()?;
                let y_down = r.read_f64::<LittleEndian>()?;
                let r_min = r.read_f64::<LittleEndian>()?;
                let r_max = r.read_f64::<LittleEndian>()?;
                let levels = r.read_u32::<LittleEndian>()?;
                assignment.insert(id, gi);
                members.push(GroupMember {
                    vector,
                    params: VectorParams { beta, mu, mu_reduced, x_up, y_down },
                    profile: RadiusProfile { r_min, r_max, levels },
                });
            }
            plan_groups.push(GroupParams { base, members, beta_group, w_bucket, b_range_levels });
        }

        let mut groups = Vec::with_capacity(n_groups);
        for group in &plan_groups {
            let n_tables = checked_len(r.read_u32::<LittleEndian>()?, "table")?;
            let mut tables = Vec::with_capacity(n_tables);
            for _ in 0..n_tables {
                let fd = checked_len(r.read_u32::<LittleEndian>()?, "function dimension")?;
                if fd != d {
                    return Err(Error::Format("hash function dimensionality mismatch".into()));
                }
                let w = r.read_f64::<LittleEndian>()?;
                let b_star = r.read_f64::<LittleEndian>()?;
                let mut a = vec![0f64; d];
                r.read_f64_into::<LittleEndian>(&mut a)?;
                let func = LpHashFunction::new(a, b_star, w, group.base.clone())?;
                let n_buckets = checked_len(r.read_u32::<LittleEndian>()?, "bucket")?;
                let mut dir = Vec::with_capacity(n_buckets);
                let mut start = 0u32;
                for _ in 0..n_buckets {
                    let bucket = r.read_i64::<LittleEndian>()?;
                    let len = r.read_u32::<LittleEndian>()?;
                    dir.push(DirEntry { bucket, start, len });
                    start += len;
                }
                let n_ids = checked_len(r.read_u32::<LittleEndian>()?, "id")?;
                if n_ids != start as usize {
                    return Err(Error::Format("bucket directory does not cover the id pages".into()));
                }
                let mut ids = vec![0u32; n_ids];
                r.read_u32_into::<LittleEndian>(&mut ids)?;
                let id_bytes = n_ids as u64 * 4;
                let pad = (BLOCK_SIZE - id_bytes % BLOCK_SIZE) % BLOCK_SIZE;
                let mut sink = vec![0u8; pad as usize];
                r.read_exact(&mut sink)?;
                tables.push(HashTable { func, dir, ids });
            }
            groups.push(tables);
        }

        Ok(IndexFile {
            header: IndexHeader { dataset_digest, p, c, tau, relaxation, reduction, n, d: d as u32, seed },
            plan: PartitionPlan { groups: plan_groups, assignment },
            groups,
        })
    }
}

/// Per-query point fetcher: a candidate's record costs `ceil(4d / 4096)`
/// blocks and repeated fetches of the same point are charged once.
pub struct PointStore<'a> {
    dataset: &'a Dataset,
    blocks_per_point: u64,
    seen: HashSet<u32>,
}

impl<'a> PointStore<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        PointStore {
            dataset,
            blocks_per_point: (dataset.d() as u64 * 4).div_ceil(BLOCK_SIZE),
            seen: HashSet::new(),
        }
    }

    pub fn fetch(&mut self, id: u32, io: &mut IoCounter) -> Point {
        if self.seen.insert(id) {
            io.candidate_blocks_read += self.blocks_per_point.max(1);
        }
        self.dataset.point(id as usize)
    }
}
