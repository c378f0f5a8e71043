//! Streaming construction by merge-and-reduce.
//!
//! Incoming points are chunked into fixed-size blocks; each block is
//! compressed to a leaf coreset and inserted into a binary bucket tree.
//! Two buckets at the same level merge; a merged bucket whose size reaches
//! the recompression threshold is re-compressed before promotion. Each
//! compression stage multiplies the eps guarantee, so the stats record the
//! stage count and `(1 + eps)^stages - 1` bounds the compounded error.

use crate::error::{Error, Result};
use crate::kernel::{KernelKind, KernelSpec};
use crate::rng::derive_seed;
use crate::sampler::{build_coreset, coreset_size, Coreset};
use crate::sensitivity::{profile_for_spec, sort_by_norm, SensitivityProfile};
use crate::set::WeightedPointSet;

/// Shape of the merge-and-reduce tree.
#[derive(Clone, Copy, Debug)]
pub struct MergeTreeConfig {
    /// Points per leaf block.
    pub leaf_size: usize,
    /// Per-compression eps; compounds across levels.
    pub eps_leaf: f64,
    /// Per-compression failure probability.
    pub delta_leaf: f64,
    /// Merged-bucket size that triggers re-compression before promotion.
    /// Keep it at least twice the typical compressed size, or every
    /// promotion recompresses and the compounded error grows needlessly.
    pub recompress_threshold: usize,
    /// Master seed; every compression event derives its own child seed.
    pub seed: u64,
}

impl MergeTreeConfig {
    fn validate(&self) -> Result<()> {
        if self.leaf_size == 0 {
            return Err(Error::invalid("leaf_size must be positive"));
        }
        if !(self.eps_leaf > 0.0 && self.eps_leaf < 1.0) {
            return Err(Error::invalid("eps_leaf must lie in (0,1)"));
        }
        if !(self.delta_leaf > 0.0 && self.delta_leaf < 1.0) {
            return Err(Error::invalid("delta_leaf must lie in (0,1)"));
        }
        if self.recompress_threshold < 2 {
            return Err(Error::invalid("recompress_threshold must be at least 2"));
        }
        Ok(())
    }
}

/// Bookkeeping from one streaming run.
#[derive(Clone, Debug, Default)]
pub struct StreamStats {
    /// Leaf blocks compressed.
    pub leaves: usize,
    /// Total compression events (leaves, promotions, final).
    pub reduces: usize,
    /// Distinct tree levels at which a promotion recompressed, ascending.
    pub reduce_levels: Vec<usize>,
    /// Highest bucket level that ever existed (leaves enter at 0).
    pub tree_height: usize,
    /// Upper bound on compression stages any point passed through.
    pub depth: usize,
    /// Peak simultaneously resident points (buckets, block buffer, and
    /// in-flight merge/compression outputs).
    pub peak_resident_points: usize,
}

impl StreamStats {
    /// Bound on the compounded relative error after `depth` stages, each
    /// an eps-coreset: `(1 + eps)^depth - 1`.
    pub fn compounded_eps(&self, eps_leaf: f64) -> f64 {
        (1.0 + eps_leaf).powi(self.depth as i32) - 1.0
    }
}

/// Concatenate two sets of equal dimension, `a` first.
pub fn merge(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<WeightedPointSet> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let mut out = WeightedPointSet::new(a.dim())?;
    for (p, w) in a.iter().chain(b.iter()) {
        out.push(p, w)?;
    }
    Ok(out)
}

/// Rank-based sensitivity bounds extended to weighted sets: the 1-indexed
/// rank is replaced by the cumulative weight up to and including the point
/// in the norm ordering, and each bound is scaled by the point's weight.
///
/// This degrades gracefully (unit weights reproduce the exact formulas)
/// but is a heuristic: the rank argument behind the formulas is proved for
/// unit weights only.
pub fn weighted_rank_profile(
    p: &WeightedPointSet,
    spec: &KernelSpec,
) -> Result<SensitivityProfile> {
    if p.is_empty() {
        return Err(Error::EmptyInput("sensitivity heuristic needs at least one point"));
    }
    let k = spec.k();
    if !k.is_finite() {
        return Err(Error::invalid("sensitivity formulas need finite k"));
    }
    let scale = spec.upper_bound() / spec.link_at_zero();
    let root_k = k.sqrt();
    let ln2 = std::f64::consts::LN_2;
    let ratio_bound = |norm: f64| -> f64 {
        match spec.kind() {
            KernelKind::Sigmoid => 66.0 * root_k * norm,
            KernelKind::SigmoidSquared => 168.0 * root_k * norm,
            KernelKind::Logistic => {
                3.0 * (ln2 + norm * spec.radius().unwrap()) / ln2 * root_k * norm
            }
        }
    };
    let order = sort_by_norm(p);
    let norms = p.norms();
    let mut bounds = vec![0.0; p.len()];
    let mut cum_weight = 0.0f64;
    for &idx in &order {
        let w = p.weight(idx);
        cum_weight += w;
        bounds[idx] = w * (scale * (ratio_bound(norms[idx]) + 1.0)) / cum_weight;
    }
    SensitivityProfile::from_bounds(bounds, order, Some(*spec))
}

/// Compress a bucket: exact rank formulas for unit weights, the weighted
/// rank heuristic otherwise; size from the sampling bound, clamped to the
/// bucket size.
fn reduce_set(
    set: &WeightedPointSet,
    spec: &KernelSpec,
    cfg: &MergeTreeConfig,
    seed: u64,
) -> Result<Coreset> {
    let profile = if set.is_unit_weighted() {
        profile_for_spec(set, spec)?
    } else {
        weighted_rank_profile(set, spec)?
    };
    let m = coreset_size(profile.total(), set.dim(), cfg.eps_leaf, cfg.delta_leaf)?;
    build_coreset(set, &profile, m.min(set.len()), seed)
}

struct Bucket {
    set: WeightedPointSet,
    /// Present when the content is verbatim the output of one compression.
    coreset: Option<Coreset>,
}

struct Tree<'a> {
    spec: &'a KernelSpec,
    cfg: &'a MergeTreeConfig,
    buckets: Vec<Option<Bucket>>,
    events: u64,
    stats: StreamStats,
}

impl<'a> Tree<'a> {
    fn next_seed(&mut self) -> u64 {
        let s = derive_seed(self.cfg.seed, self.events);
        self.events += 1;
        s
    }

    fn resident(&self) -> usize {
        self.buckets.iter().flatten().map(|b| b.set.len()).sum()
    }

    fn note_peak(&mut self, extra: usize) {
        let r = self.resident() + extra;
        if r > self.stats.peak_resident_points {
            self.stats.peak_resident_points = r;
        }
    }

    fn reduce(&mut self, set: &WeightedPointSet) -> Result<Coreset> {
        let seed = self.next_seed();
        let out = reduce_set(set, self.spec, self.cfg, seed)?;
        self.stats.reduces += 1;
        self.note_peak(set.len() + out.len());
        Ok(out)
    }

    fn insert_leaf(&mut self, block: &WeightedPointSet) -> Result<()> {
        self.note_peak(block.len());
        let coreset = self.reduce(block)?;
        self.stats.leaves += 1;
        self.insert(Bucket { set: coreset.set().clone(), coreset: Some(coreset) }, 0)
    }

    fn insert(&mut self, bucket: Bucket, level: usize) -> Result<()> {
        if level >= self.buckets.len() {
            self.buckets.resize_with(level + 1, || None);
        }
        if level > self.stats.tree_height {
            self.stats.tree_height = level;
        }
        match self.buckets[level].take() {
            None => {
                self.buckets[level] = Some(bucket);
                self.note_peak(0);
                Ok(())
            }
            Some(existing) => {
                let merged = merge(&existing.set, &bucket.set)?;
                // Inputs and their concatenation coexist briefly.
                self.note_peak(existing.set.len() + bucket.set.len() + merged.len());
                drop(existing);
                drop(bucket);
                let next = if merged.len() >= self.cfg.recompress_threshold {
                    let coreset = self.reduce(&merged)?;
                    if !self.stats.reduce_levels.contains(&level) {
                        self.stats.reduce_levels.push(level);
                    }
                    Bucket { set: coreset.set().clone(), coreset: Some(coreset) }
                } else {
                    Bucket { set: merged, coreset: None }
                };
                self.insert(next, level + 1)
            }
        }
    }

    fn finish(mut self) -> Result<(Coreset, StreamStats)> {
        let occupied: Vec<usize> =
            (0..self.buckets.len()).filter(|&l| self.buckets[l].is_some()).collect();
        if occupied.is_empty() {
            return Err(Error::EmptyInput("stream contained no points"));
        }
        // A single bucket that is verbatim one compression output needs no
        // further work; in particular one small batch is bit-identical to
        // a single offline construction.
        if occupied.len() == 1 {
            let bucket = self.buckets[occupied[0]].take().unwrap();
            if let Some(coreset) = bucket.coreset {
                self.stats.reduce_levels.sort_unstable();
                self.stats.depth = self.depth_bound(false);
                return Ok((coreset, self.stats));
            }
            self.buckets[occupied[0]] = Some(bucket);
        }
        let mut union: Option<WeightedPointSet> = None;
        for l in occupied {
            let bucket = self.buckets[l].take().unwrap();
            union = Some(match union {
                None => bucket.set,
                Some(u) => {
                    let m = merge(&u, &bucket.set)?;
                    self.note_peak(u.len() + bucket.set.len() + m.len());
                    m
                }
            });
        }
        let union = union.unwrap();
        let coreset = self.reduce(&union)?;
        self.stats.reduce_levels.sort_unstable();
        self.stats.depth = self.depth_bound(true);
        Ok((coreset, self.stats))
    }

    fn depth_bound(&self, final_reduce: bool) -> usize {
        1 + self.stats.reduce_levels.len() + usize::from(final_reduce)
    }
}

/// Streaming coreset over an arbitrary sequence of batches.
///
/// Points are re-chunked into blocks of exactly `leaf_size` regardless of
/// batch boundaries, so the result depends on the concatenated stream, not
/// on how it was split into batches. Deterministic given the config.
///
/// Source indices of the result refer to the final merge buffer, not to
/// positions in the original stream.
pub fn stream_coreset(
    batches: impl IntoIterator<Item = WeightedPointSet>,
    spec: &KernelSpec,
    cfg: &MergeTreeConfig,
) -> Result<Coreset> {
    stream_coreset_detailed(batches, spec, cfg).map(|(c, _)| c)
}

/// [`stream_coreset`] plus the run's [`StreamStats`].
pub fn stream_coreset_detailed(
    batches: impl IntoIterator<Item = WeightedPointSet>,
    spec: &KernelSpec,
    cfg: &MergeTreeConfig,
) -> Result<(Coreset, StreamStats)> {
    cfg.validate()?;
    let mut tree = Tree {
        spec,
        cfg,
        buckets: Vec::new(),
        events: 0,
        stats: StreamStats::default(),
    };
    let mut block: Option<WeightedPointSet> = None;
    for batch in batches {
        for (point, w) in batch.iter() {
            let buf = match &mut block {
                Some(b) => b,
                None => {
                    block = Some(WeightedPointSet::new(point.len())?);
                    block.as_mut().unwrap()
                }
            };
            buf.push(point, w)?;
            if buf.len() == cfg.leaf_size {
                let full = block.take().unwrap();
                tree.insert_leaf(&full)?;
            }
        }
    }
    if let Some(rest) = block.take() {
        if !rest.is_empty() {
            tree.insert_leaf(&rest)?;
        }
    }
    tree.finish()
}
