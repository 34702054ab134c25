//! The multi-batch L-BFGS loop and the methods it is compared against.
//!
//! One iteration of the robust method:
//!
//! 1. `p_k = -H_k g_k^{S_k}` by the two-loop recursion;
//! 2. `w_{k+1} = w_k + alpha_k p_k`;
//! 3. draw `S_{k+1}`;
//! 4. `s = w_{k+1} - w_k`, `y = g_{k+1}^{O_k} - g_k^{O_k}` with both
//!    gradients taken on the same overlap `O_k`;
//! 5. store `(s, y)` if it passes the cautious test.
//!
//! Batches are evaluated region by region (by membership in the overlap
//! sets) so each sample's gradient is computed once per iterate, and the
//! overlap gradients fall out of the batch gradient at no extra cost whenever
//! the overlap lies inside the next batch. Only strategy 2 pays for an extra
//! evaluation of `O_k` at `w_{k+1}`, and that work is charged to the epoch
//! count.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lbfgs::{LbfgsMemory, Scaling};
use crate::linalg::{axpy_in_place, dot_unchecked, norm, sub, ParameterVector};
use crate::objective::{Objective, PartialSums, SubsetGradient};
use crate::sampling::{SamplePlan, Sampler, SeededRng};

pub use crate::sampling::SamplingMode;

/// A run aborts once the loss exceeds this multiple of the initial full loss.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Curvature pairs on the overlap of consecutive batches.
    RobustLbfgs,
    /// Curvature pairs from gradients on different batches, `y = g_{k+1}^{S_{k+1}} - g_k^{S_k}`.
    InconsistentLbfgs,
    /// `H_k = I`.
    MultibatchGd,
    /// One sample per iteration, no curvature memory.
    SerialSgd,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::RobustLbfgs, Method::InconsistentLbfgs, Method::MultibatchGd, Method::SerialSgd];

    pub fn name(self) -> &'static str {
        match self {
            Method::RobustLbfgs => "robust_lbfgs",
            Method::InconsistentLbfgs => "inconsistent_lbfgs",
            Method::MultibatchGd => "multibatch_gd",
            Method::SerialSgd => "serial_sgd",
        }
    }

    fn uses_memory(self) -> bool {
        matches!(self, Method::RobustLbfgs | Method::InconsistentLbfgs)
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown method '{s}'")))
    }
}

/// Step-length rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `alpha_k = alpha`
    Constant(f64),
    /// `alpha_k = beta / (k + 1)`
    Diminishing(f64),
    /// `alpha_k = c / sqrt(tau)` for a fixed horizon `tau`.
    SqrtHorizon { c: f64, tau: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant(a) | StepSchedule::Diminishing(a) => a > 0.0 && a.is_finite(),
            StepSchedule::SqrtHorizon { c, tau } => c > 0.0 && c.is_finite() && tau >= 1.0 && tau.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid step schedule {self:?}")))
        }
    }

    /// Step length for iteration `k`.
    pub fn alpha(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant(a) => a,
            StepSchedule::Diminishing(b) => b / (k as f64 + 1.0),
            StepSchedule::SqrtHorizon { c, tau } => c / libm::sqrt(tau),
        }
    }

    /// The schedule's leading parameter (`alpha`, `beta` or `c`).
    pub fn scale(&self) -> f64 {
        match *self {
            StepSchedule::Constant(a) | StepSchedule::Diminishing(a) => a,
            StepSchedule::SqrtHorizon { c, .. } => c,
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    /// Ignored by [`Method::SerialSgd`].
    pub sampling: SamplingMode,
    pub schedule: StepSchedule,
    pub memory: usize,
    pub cautious_eps: f64,
    pub scaling: Scaling,
    /// Stop once this many epochs of gradient work have been charged.
    pub epochs: f64,
    /// Optional hard cap on iterations.
    pub max_iterations: Option<usize>,
    pub seed: u64,
    /// Full-gradient metrics every this many iterations; defaults to `ceil(n / |S|)`.
    pub trace_stride: Option<usize>,
    /// Starting point; zeros when absent.
    pub initial_point: Option<Vec<f64>>,
}

impl RunConfig {
    /// Defaults: strategy 1 with `r = 5%`, `o = 20%`, `m = 10`, `eps = 1e-4`,
    /// BB scaling, constant step 1, 10 epochs.
    pub fn new(method: Method) -> Self {
        RunConfig {
            method,
            sampling: SamplingMode::Strategy1 { batch_frac: 0.05, overlap_frac: 0.2 },
            schedule: StepSchedule::Constant(1.0),
            memory: 10,
            cautious_eps: 1e-4,
            scaling: Scaling::BarzilaiBorwein,
            epochs: 10.0,
            max_iterations: None,
            seed: 0,
            trace_stride: None,
            initial_point: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.epochs >= 0.0 && self.epochs.is_finite()) {
            return Err(Error::Config(format!("epochs must be finite and >= 0, got {}", self.epochs)));
        }
        if self.memory == 0 {
            return Err(Error::Config("memory must hold at least one pair".into()));
        }
        if self.trace_stride == Some(0) {
            return Err(Error::Config("trace stride must be positive".into()));
        }
        Ok(())
    }
}

/// State of the run after iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// Gradient work charged before this iterate's batch, in passes over the data.
    pub epoch: f64,
    /// `||grad F(w_k)||` on the full data, at stride points only.
    pub grad_norm: Option<f64>,
    /// `F^{S_k}(w_k)`.
    pub subset_loss: f64,
    pub full_loss: Option<f64>,
    pub train_acc: Option<f64>,
    /// Whether the pair formed on the way into `w_k` was stored.
    pub pair_accepted: bool,
    pub sample_size: usize,
    /// `|O_{k-1}|`, the overlap used for that pair.
    pub overlap_size: usize,
    pub redraws: u32,
    pub wall_clock: f64,
}

impl TraceRecord {
    pub fn has_full_metrics(&self) -> bool {
        self.grad_norm.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// Loss grew past [`DIVERGENCE_FACTOR`] times its initial value at iteration `k`.
    Diverged { k: usize },
    /// A non-finite value appeared at iteration `k`.
    NumericAbort { k: usize, message: String },
}

impl RunOutcome {
    pub fn is_abort(&self) -> bool {
        !matches!(self, RunOutcome::Completed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub outcome: RunOutcome,
    pub final_point: ParameterVector,
    /// Per-sample gradient evaluations made by the algorithm (metrics excluded).
    pub sample_evaluations: u64,
    /// Of those, evaluations spent only on the overlap at the next iterate.
    pub extra_evaluations: u64,
    pub pairs_accepted: usize,
    pub pairs_skipped: usize,
}

impl RunTrace {
    /// Records carrying full-gradient metrics.
    pub fn metric_records(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.has_full_metrics())
    }

    pub fn final_grad_norm(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.grad_norm)
    }
}

/// What an observer sees after each iteration.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub k: usize,
    pub point: &'a [f64],
    pub memory: Option<&'a LbfgsMemory>,
    /// The pair formed on the way into this iterate, if one was formed.
    pub pair: Option<(&'a [f64], &'a [f64])>,
    pub pair_accepted: bool,
}

/// Hooks into a run: a clock for wall-time stamps and a per-iteration observer.
pub trait RunHooks {
    fn elapsed_seconds(&mut self) -> f64 {
        0.0
    }

    fn on_iteration(&mut self, _view: &IterationView<'_>) {}
}

/// No clock, no observer.
pub struct NoHooks;

impl RunHooks for NoHooks {}

impl<F: FnMut(&IterationView<'_>)> RunHooks for F {
    fn on_iteration(&mut self, view: &IterationView<'_>) {
        self(view)
    }
}

/// `w + alpha * p` with `p = -H g` (or `p = -g` when `memory` is `None`).
pub fn take_step(
    w: &[f64],
    memory: Option<&LbfgsMemory>,
    g: &[f64],
    alpha: f64,
) -> Result<ParameterVector> {
    if w.len() != g.len() {
        return Err(Error::dimension(w.len(), g.len()));
    }
    let mut next = w.to_vec();
    match memory {
        Some(mem) => {
            let p = mem.two_loop_direction(g)?;
            axpy_in_place(alpha, &p, &mut next);
        }
        None => axpy_in_place(-alpha, g, &mut next),
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("step produced a non-finite iterate".into()));
    }
    Ok(next.into())
}

/// Forms `(s, y)` between consecutive iterates by direct evaluation.
///
/// Robust pairs use the overlap `plan.overlap_next` at both points; the
/// inconsistent variant differences the two batch gradients. Returns `None`
/// when no pair can be formed (empty overlap, or a method without memory).
pub fn form_pair(
    method: Method,
    obj: &Objective,
    w_prev: &[f64],
    w_next: &[f64],
    plan: &SamplePlan,
    next_plan: &SamplePlan,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let s = sub(w_next, w_prev);
    let y = match method {
        Method::RobustLbfgs => {
            if plan.overlap_next.is_empty() {
                return Ok(None);
            }
            let a = obj.eval_subset(w_next, &plan.overlap_next)?;
            let b = obj.eval_subset(w_prev, &plan.overlap_next)?;
            sub(&a.gradient, &b.gradient)
        }
        Method::InconsistentLbfgs => {
            let a = obj.eval_subset(w_next, &next_plan.batch)?;
            let b = obj.eval_subset(w_prev, &plan.batch)?;
            sub(&a.gradient, &b.gradient)
        }
        Method::MultibatchGd | Method::SerialSgd => return Ok(None),
    };
    Ok(Some((s, y)))
}

/// Gradients at one iterate: the batch and, when requested, the two overlaps.
struct BatchEval {
    batch: SubsetGradient,
    /// `g^{O_{k-1}}` at this iterate (completes the previous pair).
    carry: Option<ParameterVector>,
    /// `g^{O_k}` at this iterate (starts the next pair).
    ahead: Option<ParameterVector>,
}

/// Evaluates `batch` once per sample, splitting it by membership in `carry`
/// and `ahead` (both subsets of `batch`).
struct RegionEvaluator {
    marks: Vec<u8>,
    regions: [Vec<usize>; 4],
    sums: [PartialSums; 4],
}

const IN_CARRY: u8 = 1;
const IN_AHEAD: u8 = 2;

impl RegionEvaluator {
    fn new(n: usize, dim: usize) -> Self {
        RegionEvaluator {
            marks: vec![0; n],
            regions: Default::default(),
            sums: core::array::from_fn(|_| PartialSums::new(dim)),
        }
    }

    fn evaluate(
        &mut self,
        obj: &Objective,
        w: &[f64],
        batch: &[usize],
        carry: Option<&[usize]>,
        ahead: Option<&[usize]>,
    ) -> Result<BatchEval> {
        for &i in carry.unwrap_or(&[]) {
            self.marks[i] |= IN_CARRY;
        }
        for &i in ahead.unwrap_or(&[]) {
            self.marks[i] |= IN_AHEAD;
        }
        self.regions.iter_mut().for_each(Vec::clear);
        for &i in batch {
            self.regions[self.marks[i] as usize].push(i);
        }
        for &i in carry.unwrap_or(&[]).iter().chain(ahead.unwrap_or(&[])) {
            self.marks[i] = 0;
        }

        for (region, sums) in self.regions.iter().zip(self.sums.iter_mut()) {
            sums.clear();
            obj.accumulate(w, region.iter().copied(), sums)?;
        }
        let covered = self.regions.iter().map(Vec::len).sum::<usize>();
        debug_assert_eq!(covered, batch.len());

        let mut total = PartialSums::new(obj.dim());
        for sums in &self.sums {
            total.merge(sums);
        }
        let batch_grad = obj.finish(w, &total)?;

        let pick = |flag: u8| -> Result<ParameterVector> {
            let mut acc = PartialSums::new(obj.dim());
            for (mask, sums) in self.sums.iter().enumerate() {
                if mask as u8 & flag != 0 {
                    acc.merge(sums);
                }
            }
            Ok(obj.finish(w, &acc)?.gradient)
        };
        let carry_grad = match carry {
            Some(set) if !set.is_empty() => Some(pick(IN_CARRY)?),
            _ => None,
        };
        let ahead_grad = match ahead {
            Some(set) if !set.is_empty() => Some(pick(IN_AHEAD)?),
            _ => None,
        };
        Ok(BatchEval { batch: batch_grad, carry: carry_grad, ahead: ahead_grad })
    }
}

fn default_stride(config: &RunConfig, n: usize) -> usize {
    if config.method == Method::SerialSgd {
        return n;
    }
    let frac = match config.sampling {
        SamplingMode::Strategy1 { batch_frac, .. } | SamplingMode::Strategy2 { batch_frac, .. } => batch_frac,
        SamplingMode::Fault { fail_prob, .. } => 1.0 - fail_prob,
    };
    (libm::ceil(1.0 / frac - 1e-9) as usize).max(1)
}

struct Metrics {
    grad_norm: f64,
    loss: f64,
    acc: f64,
}

fn full_metrics(obj: &Objective, w: &[f64]) -> Result<Metrics> {
    let full = obj.eval_full(w)?;
    Ok(Metrics { grad_norm: full.gradient.norm(), loss: full.loss, acc: obj.accuracy(w)? })
}

/// Runs with no hooks.
pub fn run(config: &RunConfig, obj: &Objective) -> Result<RunTrace> {
    run_with(config, obj, &mut NoHooks)
}

/// Runs the configured method on `obj`.
///
/// Configuration problems return `Err`. Numeric trouble during the run ends
/// it early with the trace so far and a [`RunOutcome`] saying why.
pub fn run_with<H: RunHooks + ?Sized>(config: &RunConfig, obj: &Objective, hooks: &mut H) -> Result<RunTrace> {
    config.validate()?;
    let n = obj.len();
    let dim = obj.dim();
    let mut rng = SeededRng::new(config.seed);
    let mut sampler = match config.method {
        Method::SerialSgd => Sampler::single(n)?,
        _ => Sampler::new(&config.sampling, n, &mut rng)?,
    };
    let mut memory = if config.method.uses_memory() {
        Some(LbfgsMemory::new(dim, config.memory, config.scaling, config.cautious_eps)?)
    } else {
        None
    };
    let robust = config.method == Method::RobustLbfgs;
    let carry_inside = sampler.overlap_within_next_batch();
    let stride = config.trace_stride.unwrap_or_else(|| default_stride(config, n));

    let mut w: ParameterVector = match &config.initial_point {
        Some(p) if p.len() == dim => p.clone().into(),
        Some(p) => return Err(Error::dimension(dim, p.len())),
        None => ParameterVector::zeros(dim),
    };

    let mut evaluator = RegionEvaluator::new(n, dim);
    let mut trace = RunTrace {
        records: Vec::new(),
        outcome: RunOutcome::Completed,
        final_point: w.clone(),
        sample_evaluations: 0,
        extra_evaluations: 0,
        pairs_accepted: 0,
        pairs_skipped: 0,
    };

    let initial = full_metrics(obj, &w)?;
    let threshold = DIVERGENCE_FACTOR * if initial.loss > 0.0 { initial.loss } else { 1.0 };

    let mut plan = sampler.next_plan(&mut rng);
    let ahead = |p: &SamplePlan| if robust { Some(p.overlap_next.clone()) } else { None };
    let mut current = evaluator.evaluate(obj, &w, &plan.batch, None, ahead(&plan).as_deref())?;
    trace.sample_evaluations += plan.batch.len() as u64;
    trace.records.push(TraceRecord {
        k: 0,
        epoch: 0.0,
        grad_norm: Some(initial.grad_norm),
        subset_loss: current.batch.loss,
        full_loss: Some(initial.loss),
        train_acc: Some(initial.acc),
        pair_accepted: false,
        sample_size: plan.batch.len(),
        overlap_size: 0,
        redraws: plan.redraws,
        wall_clock: hooks.elapsed_seconds(),
    });
    hooks.on_iteration(&IterationView { k: 0, point: &w, memory: memory.as_ref(), pair: None, pair_accepted: false });

    let mut charged = 0.0f64;
    let mut k = 0usize;
    let nf = n as f64;
    while charged < config.epochs - 1e-12 && config.max_iterations.map_or(true, |cap| k < cap) {
        let alpha = config.schedule.alpha(k);
        let direction_memory = if config.method.uses_memory() { memory.as_ref() } else { None };
        let w_next = match take_step(&w, direction_memory, &current.batch.gradient, alpha) {
            Ok(v) => v,
            Err(e) => {
                trace.outcome = RunOutcome::NumericAbort { k: k + 1, message: format!("{e}") };
                break;
            }
        };
        charged += plan.batch.len() as f64 / nf;

        let next_plan = sampler.next_plan(&mut rng);
        let overlap = &plan.overlap_next;
        let carry_set = (robust && carry_inside && !overlap.is_empty()).then_some(overlap.as_slice());
        let step_result = evaluator
            .evaluate(obj, &w_next, &next_plan.batch, carry_set, ahead(&next_plan).as_deref())
            .and_then(|next| {
                // Strategy 2: O_k need not lie in S_{k+1}, so it is evaluated separately.
                let extra = if robust && !carry_inside && !overlap.is_empty() {
                    Some(obj.eval_subset(&w_next, overlap)?.gradient)
                } else {
                    None
                };
                Ok((next, extra))
            });
        let (next, extra) = match step_result {
            Ok(v) => v,
            Err(e) => {
                trace.outcome = RunOutcome::NumericAbort { k: k + 1, message: format!("{e}") };
                break;
            }
        };
        trace.sample_evaluations += next_plan.batch.len() as u64;
        if extra.is_some() {
            trace.extra_evaluations += overlap.len() as u64;
            trace.sample_evaluations += overlap.len() as u64;
            charged += overlap.len() as f64 / nf;
        }

        let s = sub(&w_next, &w);
        let y = match config.method {
            Method::RobustLbfgs => {
                let at_next = extra.as_ref().or(next.carry.as_ref());
                match (at_next, current.ahead.as_ref()) {
                    (Some(a), Some(b)) => Some(sub(a, b)),
                    _ => None,
                }
            }
            Method::InconsistentLbfgs => Some(sub(&next.batch.gradient, &current.batch.gradient)),
            Method::MultibatchGd | Method::SerialSgd => None,
        };
        let mut accepted = false;
        if let (Some(mem), Some(y)) = (memory.as_mut(), y.as_ref()) {
            if dot_unchecked(&s, &s) > 0.0 {
                accepted = mem.admit(&s, y)?;
            }
        }
        if memory.is_some() {
            if accepted {
                trace.pairs_accepted += 1;
            } else {
                trace.pairs_skipped += 1;
            }
        }

        k += 1;
        w = w_next;
        let at_stride = k % stride == 0;
        let metrics = if at_stride { Some(full_metrics(obj, &w)) } else { None };
        let metrics = match metrics.transpose() {
            Ok(m) => m,
            Err(e) => {
                trace.outcome = RunOutcome::NumericAbort { k, message: format!("{e}") };
                break;
            }
        };
        trace.records.push(TraceRecord {
            k,
            epoch: charged,
            grad_norm: metrics.as_ref().map(|m| m.grad_norm),
            subset_loss: next.batch.loss,
            full_loss: metrics.as_ref().map(|m| m.loss),
            train_acc: metrics.as_ref().map(|m| m.acc),
            pair_accepted: accepted,
            sample_size: next_plan.batch.len(),
            overlap_size: if y.is_some() && config.method == Method::RobustLbfgs { overlap.len() } else { 0 },
            redraws: next_plan.redraws,
            wall_clock: hooks.elapsed_seconds(),
        });
        hooks.on_iteration(&IterationView {
            k,
            point: &w,
            memory: memory.as_ref(),
            pair: y.as_deref().map(|y| (s.as_slice(), y)),
            pair_accepted: accepted,
        });

        let full_loss = metrics.as_ref().map_or(0.0, |m| m.loss);
        if next.batch.loss > threshold || full_loss > threshold {
            trace.outcome = RunOutcome::Diverged { k };
            break;
        }
        plan = next_plan;
        current = next;
    }

    if let Some(last) = trace.records.last_mut() {
        if last.grad_norm.is_none() && !matches!(trace.outcome, RunOutcome::NumericAbort { .. }) {
            let m = full_metrics(obj, &w)?;
            last.grad_norm = Some(m.grad_norm);
            last.full_loss = Some(m.loss);
            last.train_acc = Some(m.acc);
        }
    }
    trace.final_point = w;
    Ok(trace)
}

/// Order statistics of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// Linear-interpolation quartiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let lo = libm::floor(pos) as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        };
        Some(Quartiles { q1: at(0.25), median: at(0.5), q3: at(0.75) })
    }
}

/// Median of a sample (`NaN` when empty).
pub fn median(values: &[f64]) -> f64 {
    Quartiles::of(values).map_or(f64::NAN, |q| q.median)
}

/// `<a, b> / (||a|| ||b||)`, or `None` if either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot_unchecked(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Componentwise `a_i / b_i` over the components where `b_i != 0`.
pub fn component_ratios(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).filter(|(_, &bi)| bi != 0.0).map(|(ai, bi)| ai / bi).collect()
}

/// How well subsampled curvature vectors track the full-data one, for one batch size.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureDiagnostic {
    pub batch_size: usize,
    /// Cosine between `y_s` and `y_d`, one per kept trial.
    pub cosines: Vec<f64>,
    pub cosine_summary: Quartiles,
    /// Quartiles of `y_s / y_d` pooled over components and trials.
    pub ratio_summary: Quartiles,
    /// Trials dropped because `y_s` was zero.
    pub discarded: usize,
}

/// Compares subsampled and full curvature vectors around `w`.
///
/// Takes a gradient-descent step of length `step` from `w` to `w'`, forms
/// `y_d = grad F(w') - grad F(w)`, and for each batch size draws `trials`
/// uniform subsets `S` to form `y_s = grad F^S(w') - grad F^S(w)`.
pub fn curvature_diagnostics(
    obj: &Objective,
    w: &[f64],
    step: f64,
    batch_sizes: &[usize],
    trials: usize,
    rng: &mut SeededRng,
) -> Result<Vec<CurvatureDiagnostic>> {
    let n = obj.len();
    if let Some(&b) = batch_sizes.iter().find(|&&b| b == 0 || b > n) {
        return Err(Error::Usage(format!("batch size {b} outside 1..={n}")));
    }
    if trials == 0 {
        return Err(Error::Usage("need at least one trial".into()));
    }
    let g0 = obj.eval_full(w)?;
    let w1 = take_step(w, None, &g0.gradient, step)?;
    if *w1 == *w {
        return Err(Error::Usage("step too small: the two points coincide".into()));
    }
    let g1 = obj.eval_full(&w1)?;
    let y_full = sub(&g1.gradient, &g0.gradient);

    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(batch_sizes.len());
    for &b in batch_sizes {
        let mut cosines = Vec::with_capacity(trials);
        let mut ratios = Vec::new();
        let mut discarded = 0;
        for _ in 0..trials {
            rng.partial_shuffle(&mut pool, b);
            let subset = &pool[..b];
            let a = obj.eval_subset(&w1, subset)?;
            let c = obj.eval_subset(w, subset)?;
            let y_sub = sub(&a.gradient, &c.gradient);
            match cosine(&y_sub, &y_full) {
                Some(cos) => {
                    cosines.push(cos);
                    ratios.extend(component_ratios(&y_sub, &y_full));
                }
                None => discarded += 1,
            }
        }
        let nan = Quartiles { q1: f64::NAN, median: f64::NAN, q3: f64::NAN };
        out.push(CurvatureDiagnostic {
            batch_size: b,
            cosine_summary: Quartiles::of(&cosines).unwrap_or(nan),
            ratio_summary: Quartiles::of(&ratios).unwrap_or(nan),
            cosines,
            discarded,
        });
    }
    Ok(out)
}
