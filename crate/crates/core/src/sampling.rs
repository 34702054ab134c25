//! Batch and overlap generation.
//!
//! Three ways of producing the per-iteration batch `S_k` and the overlap
//! `O_k` on which the curvature pair is formed:
//!
//! * strategy 1 forces overlaps: a shuffled pass over the data is cut into
//!   batches of the form `{O_{k-1}, N_k, O_k}` so consecutive batches share
//!   exactly `O_k`;
//! * strategy 2 draws every batch independently and subsamples `O_k` from
//!   `S_k`;
//! * the fault simulator splits the data into node shards, each node answers
//!   with probability `1 - p`, and the batch is the union of the shards that
//!   answered. The overlap is what two consecutive batches have in common.
//!
//! All index sets in a [`SamplePlan`] are sorted and duplicate-free.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded ChaCha8 stream with a draw counter.
///
/// ChaCha8 is counter based and its output is specified bit-for-bit, so a
/// seed replays identically on every platform. Bounded integers are drawn as
/// `u64` so results do not depend on the pointer width.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    seed: u64,
    draws: u64,
}

impl SeededRng {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        SeededRng { inner: ChaCha8Rng::seed_from_u64(seed), seed, draws: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of values drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform integer in `0..bound`. `bound` must be positive.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        self.draws += 1;
        self.inner.random_range(0..bound as u64) as usize
    }

    /// Uniform real in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Moves a uniform random `k`-subset of `items` to the front (partial Fisher-Yates).
    pub fn partial_shuffle<T>(&mut self, items: &mut [T], k: usize) {
        let n = items.len();
        for i in 0..k.min(n) {
            let j = i + self.below(n - i);
            items.swap(i, j);
        }
    }
}

/// Where a plan came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanSource {
    /// Forced-overlap batches; `epoch` counts passes over the shuffled data.
    Strategy1 { epoch: usize },
    /// Independent batches with a subsampled overlap.
    Strategy2,
    /// Fault simulator; `responding` lists the nodes that returned a gradient.
    Fault { responding: Vec<usize> },
    /// One sample per iteration (serial SGD).
    Single { epoch: usize },
}

/// The index sets used by one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePlan {
    /// `S_k`, the batch whose gradient defines the step.
    pub batch: Vec<usize>,
    /// `O_{k-1}`, the overlap whose gradient at this iterate completes the previous pair.
    pub overlap_prev: Vec<usize>,
    /// `O_k`, the overlap for the pair formed after this iteration's step.
    pub overlap_next: Vec<usize>,
    pub source: PlanSource,
    /// Fault mode only: how many all-nodes-failed draws were discarded.
    pub redraws: u32,
}

/// Batch-size arithmetic shared by both multi-batch strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSizes {
    pub batch: usize,
    pub overlap: usize,
}

/// `ceil(x)` that ignores representation noise, so `0.07 * 100` gives 7.
fn ceil_frac(x: f64) -> usize {
    libm::ceil(x - 1e-9 * x.max(1.0)) as usize
}

impl BatchSizes {
    /// `|S| = ceil(r n)` and `|O| = max(1, ceil(o |S|))`.
    pub fn new(n: usize, batch_frac: f64, overlap_frac: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("dataset is empty".into()));
        }
        if !(batch_frac > 0.0 && batch_frac <= 1.0) {
            return Err(Error::Config(format!("batch fraction must lie in (0, 1], got {batch_frac}")));
        }
        if !(overlap_frac > 0.0 && overlap_frac < 1.0) {
            return Err(Error::Config(format!(
                "overlap fraction must lie in (0, 1), got {overlap_frac}"
            )));
        }
        if overlap_frac * batch_frac * (n as f64) < 1.0 - 1e-9 {
            return Err(Error::Config(format!(
                "overlap empty: o * r * n = {} < 1",
                overlap_frac * batch_frac * n as f64
            )));
        }
        let batch = ceil_frac(batch_frac * n as f64).clamp(1, n);
        let overlap = ceil_frac(overlap_frac * batch as f64).max(1);
        Ok(BatchSizes { batch, overlap })
    }

    /// Strategy 1 needs room for `N_k` between the two overlaps.
    fn check_forced_overlap(&self) -> Result<()> {
        if 2 * self.overlap >= self.batch {
            return Err(Error::Config(format!(
                "overlap of {} leaves no unique samples in a batch of {}",
                self.overlap, self.batch
            )));
        }
        Ok(())
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Intersection of two sorted index sets.
pub fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Forced-overlap batches over repeated shuffled passes.
#[derive(Debug, Clone)]
pub struct Strategy1Sampler {
    n: usize,
    sizes: BatchSizes,
    perm: Vec<usize>,
    /// Start of the next batch in `perm`; `None` means a new pass must be shuffled.
    start: Option<usize>,
    prev_overlap: Vec<usize>,
    epoch: usize,
}

impl Strategy1Sampler {
    pub fn new(n: usize, batch_frac: f64, overlap_frac: f64) -> Result<Self> {
        let sizes = BatchSizes::new(n, batch_frac, overlap_frac)?;
        sizes.check_forced_overlap()?;
        Ok(Strategy1Sampler {
            n,
            sizes,
            perm: (0..n).collect(),
            start: None,
            prev_overlap: Vec::new(),
            epoch: 0,
        })
    }

    pub fn sizes(&self) -> BatchSizes {
        self.sizes
    }

    pub fn next_plan(&mut self, rng: &mut SeededRng) -> SamplePlan {
        let full = self.sizes.batch == self.n;
        if full {
            // Every batch is the whole set, so consecutive batches overlap everywhere.
            let all: Vec<usize> = (0..self.n).collect();
            let prev = core::mem::replace(&mut self.prev_overlap, all.clone());
            let epoch = self.epoch;
            self.epoch += 1;
            return SamplePlan {
                batch: all.clone(),
                overlap_prev: prev,
                overlap_next: all,
                source: PlanSource::Strategy1 { epoch },
                redraws: 0,
            };
        }

        let start = match self.start {
            Some(s) => s,
            None => {
                rng.shuffle(&mut self.perm);
                self.prev_overlap.clear();
                0
            }
        };
        let end = (start + self.sizes.batch).min(self.n);
        let batch = sorted(self.perm[start..end].to_vec());
        let overlap_next = if end < self.n {
            self.start = Some(end - self.sizes.overlap);
            sorted(self.perm[end - self.sizes.overlap..end].to_vec())
        } else {
            self.start = None;
            Vec::new()
        };
        let overlap_prev = core::mem::replace(&mut self.prev_overlap, overlap_next.clone());
        let epoch = self.epoch;
        if self.start.is_none() {
            self.epoch += 1;
        }
        SamplePlan { batch, overlap_prev, overlap_next, source: PlanSource::Strategy1 { epoch }, redraws: 0 }
    }
}

/// Every batch for one shuffled pass under strategy 1.
pub fn plan_strategy1_epoch(
    n: usize,
    batch_frac: f64,
    overlap_frac: f64,
    rng: &mut SeededRng,
) -> Result<Vec<SamplePlan>> {
    let mut sampler = Strategy1Sampler::new(n, batch_frac, overlap_frac)?;
    let mut plans = Vec::new();
    loop {
        let plan = sampler.next_plan(rng);
        let last = plan.overlap_next.is_empty() || sampler.sizes.batch == n;
        plans.push(plan);
        if last {
            return Ok(plans);
        }
    }
}

/// Independent batches with the overlap subsampled from each batch.
#[derive(Debug, Clone)]
pub struct Strategy2Sampler {
    sizes: BatchSizes,
    pool: Vec<usize>,
    prev_overlap: Vec<usize>,
}

impl Strategy2Sampler {
    pub fn new(n: usize, batch_frac: f64, overlap_frac: f64) -> Result<Self> {
        let sizes = BatchSizes::new(n, batch_frac, overlap_frac)?;
        if sizes.overlap > sizes.batch {
            return Err(Error::Config("overlap larger than the batch".into()));
        }
        Ok(Strategy2Sampler { sizes, pool: (0..n).collect(), prev_overlap: Vec::new() })
    }

    pub fn sizes(&self) -> BatchSizes {
        self.sizes
    }

    pub fn next_plan(&mut self, rng: &mut SeededRng) -> SamplePlan {
        // The pool is left in whatever order the last draw produced; a partial
        // shuffle of any arrangement still yields a uniform subset.
        rng.partial_shuffle(&mut self.pool, self.sizes.batch);
        let mut batch = self.pool[..self.sizes.batch].to_vec();
        rng.partial_shuffle(&mut batch, self.sizes.overlap);
        let overlap_next = sorted(batch[..self.sizes.overlap].to_vec());
        let overlap_prev = core::mem::replace(&mut self.prev_overlap, overlap_next.clone());
        SamplePlan {
            batch: sorted(batch),
            overlap_prev,
            overlap_next,
            source: PlanSource::Strategy2,
            redraws: 0,
        }
    }
}

/// One independent strategy-2 draw.
pub fn plan_strategy2(
    n: usize,
    batch_frac: f64,
    overlap_frac: f64,
    rng: &mut SeededRng,
) -> Result<SamplePlan> {
    Ok(Strategy2Sampler::new(n, batch_frac, overlap_frac)?.next_plan(rng))
}

/// Assignment of samples to simulated compute nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLayout {
    shards: Vec<Vec<usize>>,
    fail_prob: f64,
}

impl NodeLayout {
    fn validate(n: usize, nodes: usize, fail_prob: f64) -> Result<()> {
        if nodes == 0 || nodes > n {
            return Err(Error::Config(format!("node count must lie in 1..={n}, got {nodes}")));
        }
        if !(0.0..1.0).contains(&fail_prob) {
            return Err(Error::Config(format!("failure probability must lie in [0, 1), got {fail_prob}")));
        }
        Ok(())
    }

    /// Balanced partition of `0..n` in index order: node `j` gets a contiguous block.
    pub fn contiguous(n: usize, nodes: usize, fail_prob: f64) -> Result<Self> {
        Self::validate(n, nodes, fail_prob)?;
        let order: Vec<usize> = (0..n).collect();
        Ok(NodeLayout { shards: deal(&order, nodes), fail_prob })
    }

    /// Balanced random partition of `0..n`.
    pub fn shuffled(n: usize, nodes: usize, fail_prob: f64, rng: &mut SeededRng) -> Result<Self> {
        Self::validate(n, nodes, fail_prob)?;
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        Ok(NodeLayout { shards: deal(&order, nodes), fail_prob })
    }

    pub fn nodes(&self) -> usize {
        self.shards.len()
    }

    pub fn shard(&self, node: usize) -> &[usize] {
        &self.shards[node]
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn fail_prob(&self) -> f64 {
        self.fail_prob
    }

    pub fn n(&self) -> usize {
        self.shards.iter().map(Vec::len).sum()
    }

    /// Sorted union of the shards of `nodes`.
    pub fn union_of(&self, nodes: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = nodes.iter().flat_map(|&j| self.shards[j].iter().copied()).collect();
        out.sort_unstable();
        out
    }
}

/// Splits `order` into `parts` contiguous chunks whose sizes differ by at most one.
fn deal(order: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let base = order.len() / parts;
    let extra = order.len() % parts;
    let mut shards = Vec::with_capacity(parts);
    let mut at = 0;
    for j in 0..parts {
        let len = base + usize::from(j < extra);
        shards.push(sorted(order[at..at + len].to_vec()));
        at += len;
    }
    shards
}

/// A fresh random balanced partition with the same node count and failure probability.
pub fn reshard(layout: &NodeLayout, rng: &mut SeededRng) -> NodeLayout {
    let mut order: Vec<usize> = (0..layout.n()).collect();
    rng.shuffle(&mut order);
    NodeLayout { shards: deal(&order, layout.nodes()), fail_prob: layout.fail_prob }
}

/// Outcome of one round of gradient requests to the nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultDraw {
    /// Nodes that returned a gradient, ascending.
    pub responding: Vec<usize>,
    /// Union of their shards, sorted.
    pub batch: Vec<usize>,
    /// Rounds discarded because no node responded.
    pub redraws: u32,
}

/// Each node responds independently with probability `1 - p`; all-failed rounds are redrawn.
pub fn plan_fault(layout: &NodeLayout, rng: &mut SeededRng) -> FaultDraw {
    let mut redraws = 0;
    loop {
        let responding: Vec<usize> =
            (0..layout.nodes()).filter(|_| rng.uniform() >= layout.fail_prob).collect();
        if !responding.is_empty() {
            let batch = layout.union_of(&responding);
            return FaultDraw { responding, batch, redraws };
        }
        redraws += 1;
    }
}

/// Fault simulator producing plans with the overlap already resolved.
///
/// Node responses do not depend on the iterate, so the sampler draws one
/// round ahead and can report `O_k = S_k ∩ S_{k+1}` with plan `k`.
#[derive(Debug, Clone)]
pub struct FaultSampler {
    layout: NodeLayout,
    reshard_each_epoch: bool,
    pending: Option<FaultDraw>,
    prev_overlap: Vec<usize>,
    served: usize,
    epochs_done: usize,
}

impl FaultSampler {
    pub fn new(layout: NodeLayout, reshard_each_epoch: bool) -> Self {
        FaultSampler {
            layout,
            reshard_each_epoch,
            pending: None,
            prev_overlap: Vec::new(),
            served: 0,
            epochs_done: 0,
        }
    }

    pub fn layout(&self) -> &NodeLayout {
        &self.layout
    }

    pub fn next_plan(&mut self, rng: &mut SeededRng) -> SamplePlan {
        let current = match self.pending.take() {
            Some(draw) => draw,
            None => plan_fault(&self.layout, rng),
        };
        self.served += current.batch.len();
        let n = self.layout.n();
        if self.reshard_each_epoch && self.served >= n * (self.epochs_done + 1) {
            self.epochs_done = self.served / n;
            self.layout = reshard(&self.layout, rng);
        }
        let upcoming = plan_fault(&self.layout, rng);
        let overlap_next = intersect_sorted(&current.batch, &upcoming.batch);
        self.pending = Some(upcoming);
        let overlap_prev = core::mem::replace(&mut self.prev_overlap, overlap_next.clone());
        SamplePlan {
            batch: current.batch,
            overlap_prev,
            overlap_next,
            source: PlanSource::Fault { responding: current.responding },
            redraws: current.redraws,
        }
    }
}

/// One sample per plan, walking a fresh permutation each pass.
#[derive(Debug, Clone)]
pub struct SingleSampler {
    perm: Vec<usize>,
    pos: usize,
    epoch: usize,
}

impl SingleSampler {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("dataset is empty".into()));
        }
        Ok(SingleSampler { perm: (0..n).collect(), pos: 0, epoch: 0 })
    }

    pub fn next_plan(&mut self, rng: &mut SeededRng) -> SamplePlan {
        if self.pos == 0 {
            rng.shuffle(&mut self.perm);
        }
        let i = self.perm[self.pos];
        let epoch = self.epoch;
        self.pos += 1;
        if self.pos == self.perm.len() {
            self.pos = 0;
            self.epoch += 1;
        }
        SamplePlan {
            batch: alloc::vec![i],
            overlap_prev: Vec::new(),
            overlap_next: Vec::new(),
            source: PlanSource::Single { epoch },
            redraws: 0,
        }
    }
}

/// How batches are formed for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingMode {
    /// Forced overlaps in a shuffled pass.
    Strategy1 { batch_frac: f64, overlap_frac: f64 },
    /// Independent batches, overlap subsampled from each batch.
    Strategy2 { batch_frac: f64, overlap_frac: f64 },
    /// Simulated node failures over `nodes` shards.
    Fault { nodes: usize, fail_prob: f64, reshard_each_epoch: bool },
}

/// Any of the plan generators behind one interface.
#[derive(Debug, Clone)]
pub enum Sampler {
    Strategy1(Strategy1Sampler),
    Strategy2(Strategy2Sampler),
    Fault(FaultSampler),
    Single(SingleSampler),
}

impl Sampler {
    /// Builds the generator for `mode`. The fault layout consumes draws from `rng`.
    pub fn new(mode: &SamplingMode, n: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(match *mode {
            SamplingMode::Strategy1 { batch_frac, overlap_frac } => {
                Sampler::Strategy1(Strategy1Sampler::new(n, batch_frac, overlap_frac)?)
            }
            SamplingMode::Strategy2 { batch_frac, overlap_frac } => {
                Sampler::Strategy2(Strategy2Sampler::new(n, batch_frac, overlap_frac)?)
            }
            SamplingMode::Fault { nodes, fail_prob, reshard_each_epoch } => {
                let layout = NodeLayout::shuffled(n, nodes, fail_prob, rng)?;
                Sampler::Fault(FaultSampler::new(layout, reshard_each_epoch))
            }
        })
    }

    pub fn single(n: usize) -> Result<Self> {
        Ok(Sampler::Single(SingleSampler::new(n)?))
    }

    pub fn next_plan(&mut self, rng: &mut SeededRng) -> SamplePlan {
        match self {
            Sampler::Strategy1(s) => s.next_plan(rng),
            Sampler::Strategy2(s) => s.next_plan(rng),
            Sampler::Fault(s) => s.next_plan(rng),
            Sampler::Single(s) => s.next_plan(rng),
        }
    }

    /// Whether `O_k` is always contained in `S_{k+1}`, so its gradient at the
    /// next iterate comes for free with the next batch gradient.
    pub fn overlap_within_next_batch(&self) -> bool {
        !matches!(self, Sampler::Strategy2(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn is_sorted_unique(v: &[usize]) -> bool {
        v.windows(2).all(|w| w[0] < w[1])
    }

    #[test]
    fn batch_size_arithmetic() {
        let s = BatchSizes::new(10, 0.5, 0.2).unwrap();
        assert_eq!((s.batch, s.overlap), (5, 1));
        let s = BatchSizes::new(100, 0.07, 0.2).unwrap();
        assert_eq!((s.batch, s.overlap), (7, 2));
        let s = BatchSizes::new(5000, 0.05, 0.2).unwrap();
        assert_eq!((s.batch, s.overlap), (250, 50));
    }

    #[test]
    fn config_errors() {
        assert!(matches!(BatchSizes::new(10, 0.1, 0.2), Err(Error::Config(_))));
        assert!(matches!(BatchSizes::new(10, 0.0, 0.2), Err(Error::Config(_))));
        assert!(matches!(BatchSizes::new(10, 1.5, 0.2), Err(Error::Config(_))));
        assert!(matches!(BatchSizes::new(10, 0.5, 1.0), Err(Error::Config(_))));
        // |S| = 5, |O| = ceil(0.5 * 5) = 3: no room for unique samples.
        assert!(matches!(Strategy1Sampler::new(10, 0.5, 0.5), Err(Error::Config(_))));
        // |S| = 5, |O| = 2: allowed.
        assert!(Strategy1Sampler::new(10, 0.5, 0.4).is_ok());
    }

    #[test]
    fn strategy1_small_example() {
        let mut rng = SeededRng::new(3);
        let plans = plan_strategy1_epoch(10, 0.5, 0.2, &mut rng).unwrap();
        for pair in plans.windows(2) {
            assert_eq!(pair[0].batch.len(), 5);
            assert_eq!(pair[0].overlap_next.len(), 1);
            assert_eq!(intersect_sorted(&pair[0].batch, &pair[1].batch), pair[0].overlap_next);
            assert_eq!(pair[1].overlap_prev, pair[0].overlap_next);
        }
        let mut seen: Vec<usize> = plans.iter().flat_map(|p| p.batch.iter().copied()).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert!(plans[0].overlap_prev.is_empty());
        assert!(plans.last().unwrap().overlap_next.is_empty());
    }

    #[test]
    fn strategy1_next_epoch_starts_fresh() {
        let mut rng = SeededRng::new(9);
        let mut s = Strategy1Sampler::new(20, 0.25, 0.2).unwrap();
        let mut epochs = Vec::new();
        for _ in 0..40 {
            let p = s.next_plan(&mut rng);
            if let PlanSource::Strategy1 { epoch } = p.source {
                epochs.push((epoch, p.overlap_prev.is_empty()));
            }
        }
        for w in epochs.windows(2) {
            if w[1].0 != w[0].0 {
                assert!(w[1].1, "first batch of a pass has no previous overlap");
            }
        }
    }

    #[test]
    fn strategy1_full_batch_overlaps_everywhere() {
        let mut rng = SeededRng::new(1);
        let mut s = Strategy1Sampler::new(8, 1.0, 0.2).unwrap();
        let a = s.next_plan(&mut rng);
        let b = s.next_plan(&mut rng);
        assert_eq!(a.batch, (0..8).collect::<Vec<_>>());
        assert_eq!(a.overlap_next, a.batch);
        assert_eq!(b.overlap_prev, a.batch);
    }

    #[test]
    fn strategy1_replay() {
        let a = plan_strategy1_epoch(20, 0.25, 0.2, &mut SeededRng::new(42)).unwrap();
        let b = plan_strategy1_epoch(20, 0.25, 0.2, &mut SeededRng::new(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strategy2_subset_and_sizes() {
        let mut rng = SeededRng::new(5);
        let mut s = Strategy2Sampler::new(100, 0.1, 0.2).unwrap();
        let mut prev: Option<SamplePlan> = None;
        for _ in 0..200 {
            let p = s.next_plan(&mut rng);
            assert_eq!(p.batch.len(), 10);
            assert_eq!(p.overlap_next.len(), 2);
            assert!(is_sorted_unique(&p.batch));
            assert!(p.overlap_next.iter().all(|i| p.batch.binary_search(i).is_ok()));
            if let Some(q) = prev {
                assert_eq!(p.overlap_prev, q.overlap_next);
            }
            prev = Some(p);
        }
    }

    #[test]
    fn strategy2_full_batch() {
        let p = plan_strategy2(30, 1.0, 0.2, &mut SeededRng::new(0)).unwrap();
        assert_eq!(p.batch, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn layout_balanced() {
        let layout = NodeLayout::shuffled(10, 3, 0.0, &mut SeededRng::new(2)).unwrap();
        let mut sizes: Vec<usize> = layout.shards().iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        let mut all = layout.union_of(&[0, 1, 2]);
        all.dedup();
        assert_eq!(all, (0..10).collect::<Vec<_>>());

        let single = NodeLayout::contiguous(7, 1, 0.2).unwrap();
        let again = reshard(&single, &mut SeededRng::new(4));
        assert_eq!(again.shard(0), single.shard(0));
    }

    #[test]
    fn layout_errors() {
        assert!(NodeLayout::contiguous(10, 3, 1.0).is_err());
        assert!(NodeLayout::contiguous(10, 0, 0.1).is_err());
        assert!(NodeLayout::contiguous(10, 11, 0.1).is_err());
        assert!(NodeLayout::contiguous(10, 3, -0.1).is_err());
    }

    #[test]
    fn reshard_replay() {
        let layout = NodeLayout::contiguous(50, 4, 0.3).unwrap();
        let a = reshard(&layout, &mut SeededRng::new(8));
        let b = reshard(&layout, &mut SeededRng::new(8));
        assert_eq!(a, b);
    }

    #[test]
    fn fault_no_failures_is_full_batch() {
        let layout = NodeLayout::contiguous(40, 4, 0.0).unwrap();
        let mut s = FaultSampler::new(layout, false);
        let mut rng = SeededRng::new(1);
        for _ in 0..3 {
            let p = s.next_plan(&mut rng);
            assert_eq!(p.batch, (0..40).collect::<Vec<_>>());
            assert_eq!(p.overlap_next, p.batch);
        }
    }

    #[test]
    fn fault_overlap_matches_node_intersection() {
        let layout = NodeLayout::shuffled(64, 4, 0.5, &mut SeededRng::new(11)).unwrap();
        let mut s = FaultSampler::new(layout.clone(), false);
        let mut rng = SeededRng::new(12);
        let plans: Vec<SamplePlan> = (0..200).map(|_| s.next_plan(&mut rng)).collect();
        let mut saw_empty = false;
        for w in plans.windows(2) {
            let (PlanSource::Fault { responding: a }, PlanSource::Fault { responding: b }) =
                (&w[0].source, &w[1].source)
            else {
                panic!("fault plans expected");
            };
            let common = intersect_sorted(a, b);
            assert_eq!(w[0].overlap_next, layout.union_of(&common));
            assert_eq!(w[0].batch, layout.union_of(a));
            saw_empty |= w[0].overlap_next.is_empty();
        }
        assert!(saw_empty, "disjoint responder sets should occur at p = 0.5");
    }

    #[test]
    fn fault_redraws_counted() {
        let layout = NodeLayout::contiguous(4, 2, 0.9).unwrap();
        let mut rng = SeededRng::new(3);
        let total: u32 = (0..100).map(|_| plan_fault(&layout, &mut rng).redraws).sum();
        assert!(total > 0);
    }

    #[test]
    fn single_sampler_covers_pass() {
        let mut s = SingleSampler::new(6).unwrap();
        let mut rng = SeededRng::new(0);
        let mut seen: Vec<usize> = (0..6).map(|_| s.next_plan(&mut rng).batch[0]).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
    }
}
