use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::oracles::{central_difference_gradient, relative_error};
use super::{OracleReport, Table};
use crate::driver::{
    curvature_diagnostics, median, run, run_with, IterationView, Method, RunConfig, RunOutcome, RunTrace,
    SamplingMode, StepSchedule,
};
use crate::error::Result;
use crate::lbfgs::{LbfgsMemory, Scaling};
use crate::linalg::{dot_unchecked, norm, ParameterVector};
use crate::objective::{Objective, ObjectiveKind};
use crate::sampling::{plan_fault, NodeLayout, SeededRng, Strategy2Sampler};
use crate::synthetic::make_synthetic;

/// A memory of `capacity` pairs drawn from a noisy diagonal quadratic.
///
/// `s` is standard normal and `y = D s + 0.1 * noise` with `D` uniform in
/// `[0.5, 5]`; pairs failing the cautious test are redrawn. A random number of
/// extra admissions exercises eviction.
pub fn random_admitted_memory(dim: usize, capacity: usize, rng: &mut SeededRng) -> LbfgsMemory {
    let mut mem = LbfgsMemory::new(dim, capacity, Scaling::BarzilaiBorwein, 1e-4)
        .expect("valid memory configuration");
    let diag: Vec<f64> = (0..dim).map(|_| 0.5 + 4.5 * rng.uniform()).collect();
    let target = capacity + rng.below(capacity + 1);
    let mut stored = 0;
    while stored < target {
        let s: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let y: Vec<f64> = s.iter().zip(&diag).map(|(si, di)| di * si + 0.1 * rng.normal()).collect();
        if mem.admit(&s, &y).expect("dimensions match") {
            stored += 1;
        }
    }
    mem
}

/// Two-loop direction against `-H g` with `H` materialized by the literal update.
pub fn check_two_loop_equivalence(
    dim: usize,
    memories: &[usize],
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<OracleReport> {
    let mut report = OracleReport::new("two_loop_vs_dense", Table::new(&["memory", "trial", "rel_err"]));
    for &m in memories {
        for t in 0..trials {
            let trial_seed = seed.wrapping_add((m as u64) << 32).wrapping_add(t as u64);
            let mut rng = SeededRng::new(trial_seed);
            let mem = random_admitted_memory(dim, m, &mut rng);
            let g: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let p = mem.two_loop_direction(&g)?;
            let hg = mem.dense_inverse()?.mul_vec(&g);
            let neg_hg: Vec<f64> = hg.iter().map(|v| -v).collect();
            let err = relative_error(&p, &neg_hg);
            report.trials += 1;
            report.violation(err);
            report.table.push(vec![m as f64, t as f64, err]);
            if !(err <= tol) {
                report.fail(trial_seed);
            }
        }
    }
    Ok(report)
}

/// Analytic gradients of `kind` against central differences of the loss.
pub fn check_gradients(
    kind: ObjectiveKind,
    dim: usize,
    points: usize,
    seed: u64,
    h: f64,
    tol: f64,
) -> Result<OracleReport> {
    let mut report =
        OracleReport::new(&format!("gradient_fd_{}", kind.name()), Table::new(&["point", "rel_err"]));
    let data = make_synthetic(60, dim, dim.min(8), seed, 0.0)?;
    let obj = Objective::new(kind, data, 0.05)?;
    let subset: Vec<usize> = (0..obj.len()).step_by(3).collect();
    for t in 0..points {
        let point_seed = seed.wrapping_add(1 + t as u64);
        let mut rng = SeededRng::new(point_seed);
        let w: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let analytic = obj.eval_subset(&w, &subset)?.gradient;
        let numeric = central_difference_gradient(
            |p| obj.eval_subset(p, &subset).map(|r| r.loss).unwrap_or(f64::NAN),
            &w,
            h,
        );
        let err = relative_error(&numeric, &analytic);
        report.trials += 1;
        report.violation(err);
        report.table.push(vec![t as f64, err]);
        if !(err <= tol) {
            report.fail(point_seed);
        }
    }
    Ok(report)
}

/// `H y_new = s_new` for the dense `H` of `mem` (trivially true when empty).
pub fn check_secant(mem: &LbfgsMemory, tol: f64) -> Result<OracleReport> {
    let mut report = OracleReport::new("secant", Table::new(&["rel_err"]));
    if let Some(newest) = mem.newest() {
        let hy = mem.dense_inverse()?.mul_vec(newest.y());
        let err = relative_error(&hy, newest.s());
        report.trials = 1;
        report.violation(err);
        report.table.push(vec![err]);
        if !(err <= tol) {
            report.fail(0);
        }
    }
    Ok(report)
}

/// Audits every memory state of a run: secant equation and positive eigenvalues of `H`.
pub fn check_secant_spd_run(obj: &Objective, config: &RunConfig, tol: f64) -> Result<OracleReport> {
    let mut report =
        OracleReport::new("secant_and_spd_along_run", Table::new(&["k", "secant_err", "min_eig_h", "max_eig_h"]));
    let mut failure: Option<crate::Error> = None;
    let mut observer = |v: &IterationView<'_>| {
        let Some(mem) = v.memory else { return };
        if mem.is_empty() || failure.is_some() {
            return;
        }
        let h = match mem.dense_inverse() {
            Ok(h) => h,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let newest = mem.newest().expect("nonempty");
        let err = relative_error(&h.mul_vec(newest.y()), newest.s());
        let eig = h.symmetric_eigenvalues();
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        report.trials += 1;
        report.violation(err);
        report.table.push(vec![v.k as f64, err, lo, hi]);
        if !(err <= tol && lo > 0.0) {
            report.fail(config.seed);
        }
    };
    let trace = run_with(config, obj, &mut observer)?;
    if let Some(e) = failure {
        return Err(e);
    }
    if trace.outcome.is_abort() {
        report.note(format!("run ended early: {:?}", trace.outcome));
        report.fail(config.seed);
    }
    if report.trials == 0 {
        report.note("no pair was ever stored".into());
        report.fail(config.seed);
    }
    Ok(report)
}

/// Median full-gradient norm over metric records with `lo < epoch <= hi`.
pub fn window_median(trace: &RunTrace, lo: f64, hi: f64) -> f64 {
    let vals: Vec<f64> = trace
        .metric_records()
        .filter(|r| r.epoch > lo && r.epoch <= hi)
        .filter_map(|r| r.grad_norm)
        .collect();
    median(&vals)
}

/// `(last-epoch median, previous-epoch median)` of `||grad F||`.
pub fn trailing_medians(trace: &RunTrace) -> (f64, f64) {
    let end = trace.records.last().map_or(0.0, |r| r.epoch);
    (window_median(trace, end - 1.0, end), window_median(trace, end - 2.0, end - 1.0))
}

fn ratio_within(a: f64, b: f64, factor: f64) -> bool {
    a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 && a <= factor * b && b <= factor * a
}

/// Constant step lengths on a strongly convex problem.
#[derive(Debug, Clone)]
pub struct ConstantStepGrid {
    /// Method, sampling and epochs; schedule and seed are overridden.
    pub base: RunConfig,
    /// Step lengths in decreasing order.
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Last-epoch and previous-epoch medians must be within this factor.
    pub plateau_factor: f64,
}

/// Each run settles on a plateau, and plateaus shrink with the step length.
pub fn check_theorem_constant_step(obj: &Objective, grid: &ConstantStepGrid) -> Result<OracleReport> {
    let mut report = OracleReport::new(
        "constant_step_neighborhood",
        Table::new(&["alpha", "seed", "last_epoch_median", "prev_epoch_median"]),
    );
    let mut plateau_medians = Vec::with_capacity(grid.alphas.len());
    for &alpha in &grid.alphas {
        let mut plateaus = Vec::with_capacity(grid.seeds.len());
        for &seed in &grid.seeds {
            let mut cfg = grid.base.clone();
            cfg.schedule = StepSchedule::Constant(alpha);
            cfg.seed = seed;
            cfg.trace_stride = Some(1);
            let trace = run(&cfg, obj)?;
            let (last, prev) = trailing_medians(&trace);
            report.trials += 1;
            report.table.push(vec![alpha, seed as f64, last, prev]);
            if trace.outcome.is_abort() || !ratio_within(last, prev, grid.plateau_factor) {
                report.note(format!("alpha {alpha} seed {seed}: no plateau (last {last:.3e}, prev {prev:.3e})"));
                report.violation((last / prev).max(prev / last));
                report.fail(seed);
            }
            plateaus.push(last);
        }
        let med = median(&plateaus);
        report.note(format!("alpha {alpha}: plateau median {med:.4e}"));
        plateau_medians.push(med);
    }
    for (i, w) in plateau_medians.windows(2).enumerate() {
        // alphas decrease along the grid, so plateaus must not grow.
        if !(w[1] <= w[0]) {
            report.note(format!(
                "plateau grew from {:.4e} (alpha {}) to {:.4e} (alpha {})",
                w[0],
                grid.alphas[i],
                w[1],
                grid.alphas[i + 1]
            ));
            report.violation(w[1] / w[0] - 1.0);
            report.fail_all(&grid.seeds);
        }
    }
    Ok(report)
}

/// Diminishing steps `beta / (k + 1)` against a full-batch reference optimum.
#[derive(Debug, Clone)]
pub struct DiminishingCheck {
    /// Method, sampling and schedule; seed, stride and iteration cap are overridden.
    pub base: RunConfig,
    pub seeds: Vec<u64>,
    pub k_min: usize,
    pub k_max: usize,
    pub reference_iterations: usize,
    pub reference_tol: f64,
    /// The fitted log-log slope must not exceed this.
    pub max_slope: f64,
}

/// Full-batch robust L-BFGS with unit steps, used for reference optima.
pub fn reference_optimum(obj: &Objective, iterations: usize, memory: usize) -> Result<(ParameterVector, f64, f64)> {
    let mut cfg = RunConfig::new(Method::RobustLbfgs);
    cfg.sampling = SamplingMode::Strategy1 { batch_frac: 1.0, overlap_frac: 0.2 };
    cfg.schedule = StepSchedule::Constant(1.0);
    cfg.memory = memory;
    cfg.cautious_eps = 0.0;
    cfg.epochs = iterations as f64;
    cfg.max_iterations = Some(iterations);
    cfg.trace_stride = Some(iterations.max(1));
    let trace = run(&cfg, obj)?;
    let full = obj.eval_full(&trace.final_point)?;
    Ok((trace.final_point, full.loss, full.gradient.norm()))
}

pub fn check_theorem_diminishing(obj: &Objective, check: &DiminishingCheck) -> Result<OracleReport> {
    let mut report = OracleReport::new("diminishing_step_rate", Table::new(&["k", "mean_gap"]));
    let (_, f_star, ref_grad) = reference_optimum(obj, check.reference_iterations, 10)?;
    report.note(format!("reference F* = {f_star:.15e}, ||grad F|| = {ref_grad:.3e}"));
    if !(ref_grad <= check.reference_tol) {
        report.note(format!("reference run did not reach ||grad F|| <= {:e}", check.reference_tol));
        report.fail_all(&check.seeds);
    }
    let mut sums = vec![0.0; check.k_max + 1];
    for &seed in &check.seeds {
        let mut cfg = check.base.clone();
        cfg.seed = seed;
        cfg.trace_stride = Some(1);
        cfg.max_iterations = Some(check.k_max);
        cfg.epochs = f64::MAX;
        let trace = run(&cfg, obj)?;
        report.trials += 1;
        if trace.outcome.is_abort() || trace.records.len() <= check.k_max {
            report.note(format!("seed {seed}: run ended early ({:?})", trace.outcome));
            report.fail(seed);
            continue;
        }
        for r in &trace.records {
            sums[r.k] += r.full_loss.unwrap_or(f64::NAN) - f_star;
        }
    }
    let count = check.seeds.len() as f64;
    let ks: Vec<f64> = (check.k_min..=check.k_max).map(|k| k as f64).collect();
    let gaps: Vec<f64> = (check.k_min..=check.k_max).map(|k| sums[k] / count).collect();
    for (k, g) in ks.iter().zip(&gaps) {
        report.table.push(vec![*k, *g]);
    }
    let nonpositive = gaps.iter().filter(|g| !(**g > 0.0)).count();
    if nonpositive > 0 {
        report.note(format!("{nonpositive} mean gaps were not positive and were left out of the fit"));
    }
    let slope = super::oracles::loglog_slope(&ks, &gaps);
    report.note(format!("log-log slope {slope:.4} (threshold {})", check.max_slope));
    report.violation(slope - check.max_slope);
    if !(slope <= check.max_slope) {
        report.fail_all(&check.seeds);
    }
    Ok(report)
}

/// Robust versus inconsistent pairs with small batches.
#[derive(Debug, Clone)]
pub struct StabilityCheck {
    /// Sampling, schedule and epochs; method and seed are overridden.
    pub base: RunConfig,
    pub seeds: Vec<u64>,
    /// An inconsistent plateau at least this many times the robust one counts as unstable.
    pub blowup_factor: f64,
    pub min_unstable_seeds: usize,
}

/// Final full-gradient norm, or infinity for a run that aborted.
pub fn final_grad_or_inf(trace: &RunTrace) -> f64 {
    match trace.outcome {
        RunOutcome::Completed => trace.final_grad_norm().unwrap_or(f64::INFINITY),
        _ => f64::INFINITY,
    }
}

pub fn check_multibatch_stability(obj: &Objective, check: &StabilityCheck) -> Result<OracleReport> {
    let mut report = OracleReport::new(
        "robust_vs_inconsistent",
        Table::new(&["seed", "robust_final", "inconsistent_final", "inconsistent_aborted"]),
    );
    let mut robust = Vec::new();
    let mut inconsistent = Vec::new();
    let mut unstable = 0;
    for &seed in &check.seeds {
        let mut cfg = check.base.clone();
        cfg.seed = seed;
        cfg.method = Method::RobustLbfgs;
        let r = final_grad_or_inf(&run(&cfg, obj)?);
        cfg.method = Method::InconsistentLbfgs;
        let trace = run(&cfg, obj)?;
        let aborted = trace.outcome.is_abort();
        let i = final_grad_or_inf(&trace);
        if aborted || i >= check.blowup_factor * r {
            unstable += 1;
        }
        report.trials += 1;
        report.table.push(vec![seed as f64, r, i, f64::from(u8::from(aborted))]);
        robust.push(r);
        inconsistent.push(i);
    }
    let (mr, mi) = (median(&robust), median(&inconsistent));
    report.note(format!("median final ||grad F||: robust {mr:.4e}, inconsistent {mi:.4e}"));
    report.note(format!("unstable inconsistent seeds: {unstable}/{}", check.seeds.len()));
    if !(mr < mi) {
        report.violation(mr / mi);
        report.fail_all(&check.seeds);
    }
    if unstable < check.min_unstable_seeds {
        report.fail_all(&check.seeds);
    }
    Ok(report)
}

/// Robustness to node failures.
#[derive(Debug, Clone)]
pub struct FaultCheck {
    /// Schedule, epochs and node count (through a fault sampling mode).
    pub base: RunConfig,
    /// Failure probabilities in increasing order; the last is compared against the inconsistent method.
    pub fail_probs: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Robust medians across the grid must lie within this factor of each other.
    pub band: f64,
}

pub fn check_fault_robustness(obj: &Objective, check: &FaultCheck) -> Result<OracleReport> {
    let mut report = OracleReport::new(
        "fault_robustness",
        Table::new(&["fail_prob", "seed", "robust_final", "inconsistent_final"]),
    );
    let SamplingMode::Fault { nodes, reshard_each_epoch, .. } = check.base.sampling else {
        report.note("base configuration is not in fault mode".into());
        report.fail_all(&check.seeds);
        return Ok(report);
    };
    let mut robust_medians = Vec::new();
    let mut last_inconsistent = f64::NAN;
    for &p in &check.fail_probs {
        let mut robust = Vec::new();
        let mut inconsistent = Vec::new();
        for &seed in &check.seeds {
            let mut cfg = check.base.clone();
            cfg.sampling = SamplingMode::Fault { nodes, fail_prob: p, reshard_each_epoch };
            cfg.seed = seed;
            cfg.method = Method::RobustLbfgs;
            let r = final_grad_or_inf(&run(&cfg, obj)?);
            cfg.method = Method::InconsistentLbfgs;
            let i = final_grad_or_inf(&run(&cfg, obj)?);
            report.trials += 1;
            report.table.push(vec![p, seed as f64, r, i]);
            robust.push(r);
            inconsistent.push(i);
        }
        let (mr, mi) = (median(&robust), median(&inconsistent));
        report.note(format!("p = {p}: median final ||grad F|| robust {mr:.4e}, inconsistent {mi:.4e}"));
        robust_medians.push(mr);
        last_inconsistent = mi;
    }
    let hi = robust_medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = robust_medians.iter().copied().fold(f64::INFINITY, f64::min);
    report.violation(hi / lo);
    if !(hi <= check.band * lo) {
        report.note(format!("robust medians spread {:.3}x, more than {}x", hi / lo, check.band));
        report.fail_all(&check.seeds);
    }
    let last_robust = robust_medians.last().copied().unwrap_or(f64::NAN);
    if !(last_robust <= last_inconsistent) {
        report.note("robust median above inconsistent median at the largest failure probability".into());
        report.fail_all(&check.seeds);
    }
    Ok(report)
}

/// Cautious updating on a nonconvex objective.
#[derive(Debug, Clone)]
pub struct NonconvexCheck {
    /// Robust configuration with `cautious_eps > 0`; seed and stride are overridden.
    pub base: RunConfig,
    pub seeds: Vec<u64>,
    /// The final running average must be within this factor of the one an epoch earlier.
    pub plateau_factor: f64,
    /// Relative slack allowed when testing the epoch-end running averages for monotonicity.
    pub monotone_slack: f64,
}

/// Running average of `||grad F||^2` stays bounded, settles, and every stored
/// pair satisfies the cautious inequality while `B_k` stays positive definite.
pub fn check_nonconvex_bounded(obj: &Objective, check: &NonconvexCheck) -> Result<OracleReport> {
    let mut report = OracleReport::new(
        "nonconvex_bounded",
        Table::new(&["seed", "epoch", "running_avg_sq_grad"]),
    );
    let eps = check.base.cautious_eps;
    for &seed in &check.seeds {
        let mut cfg = check.base.clone();
        cfg.seed = seed;
        cfg.trace_stride = Some(1);
        let mut worst_pair = 0.0f64;
        let mut min_eig = f64::INFINITY;
        let mut audit_error = None;
        let mut observer = |v: &IterationView<'_>| {
            let Some(mem) = v.memory else { return };
            for p in mem.pairs() {
                let ss = dot_unchecked(p.s(), p.s());
                worst_pair = worst_pair.max(eps * ss - p.curvature());
            }
            if v.pair_accepted && audit_error.is_none() {
                match mem.eigen_bounds_audit() {
                    Ok((lo, _)) => min_eig = min_eig.min(lo),
                    Err(e) => audit_error = Some(e),
                }
            }
        };
        let trace = run_with(&cfg, obj, &mut observer)?;
        if let Some(e) = audit_error {
            return Err(e);
        }
        report.trials += 1;

        let mut running = 0.0;
        let mut averages = Vec::new();
        let mut boundary = 1.0;
        let mut finite = true;
        for (count, r) in trace.records.iter().enumerate() {
            let g = r.grad_norm.unwrap_or(f64::NAN);
            finite &= g.is_finite();
            running += g * g;
            let avg = running / (count + 1) as f64;
            if r.epoch >= boundary {
                averages.push(avg);
                report.table.push(vec![seed as f64, r.epoch, avg]);
                boundary = libm::floor(r.epoch) + 1.0;
            }
        }
        let onset = (0..averages.len())
            .find(|&j| averages[j..].windows(2).all(|w| w[1] <= w[0] * (1.0 + check.monotone_slack)))
            .unwrap_or(averages.len());
        let settled = averages.len() >= 2
            && ratio_within(averages[averages.len() - 1], averages[averages.len() - 2], check.plateau_factor);
        let ok = finite
            && !trace.outcome.is_abort()
            && settled
            && onset <= averages.len() / 2
            && worst_pair <= 0.0
            && min_eig > 0.0;
        if !ok {
            report.note(format!(
                "seed {seed}: finite {finite}, outcome {:?}, settled {settled}, onset {onset}/{}, \
                 worst pair violation {worst_pair:.3e}, min eig {min_eig:.3e}",
                trace.outcome,
                averages.len()
            ));
            report.violation(worst_pair.max(0.0));
            report.fail(seed);
        }
    }
    Ok(report)
}

/// Median cosine between subsampled and full curvature vectors must not
/// decrease as the batch grows, at every reference point.
pub fn check_curvature_trend(
    obj: &Objective,
    points: &[Vec<f64>],
    batch_sizes: &[usize],
    trials: usize,
    step: f64,
    seed: u64,
) -> Result<OracleReport> {
    let mut report = OracleReport::new(
        "curvature_cosine_trend",
        Table::new(&["point", "batch_size", "median_cosine", "q1_cosine", "q3_cosine", "median_ratio"]),
    );
    for (pi, w) in points.iter().enumerate() {
        let point_seed = seed.wrapping_add(pi as u64);
        let mut rng = SeededRng::new(point_seed);
        let diags = curvature_diagnostics(obj, w, step, batch_sizes, trials, &mut rng)?;
        report.trials += 1;
        for d in &diags {
            report.table.push(vec![
                pi as f64,
                d.batch_size as f64,
                d.cosine_summary.median,
                d.cosine_summary.q1,
                d.cosine_summary.q3,
                d.ratio_summary.median,
            ]);
        }
        for w2 in diags.windows(2) {
            let drop = w2[0].cosine_summary.median - w2[1].cosine_summary.median;
            if !(drop <= 0.0) {
                report.violation(drop);
                report.note(format!(
                    "point {pi}: median cosine fell from {:.6} (|S| = {}) to {:.6} (|S| = {})",
                    w2[0].cosine_summary.median, w2[0].batch_size, w2[1].cosine_summary.median, w2[1].batch_size
                ));
                report.fail(point_seed);
            }
        }
    }
    Ok(report)
}

/// Pearson statistic of per-index inclusion counts under strategy 2.
///
/// Passes when the statistic is at most `critical` (the caller supplies the
/// chi-square quantile for `n - 1` degrees of freedom).
pub fn check_strategy2_uniformity(
    n: usize,
    batch_frac: f64,
    overlap_frac: f64,
    draws: usize,
    seed: u64,
    critical: f64,
) -> Result<OracleReport> {
    let mut report = OracleReport::new("strategy2_inclusion_uniform", Table::new(&["index", "count"]));
    let mut sampler = Strategy2Sampler::new(n, batch_frac, overlap_frac)?;
    let mut rng = SeededRng::new(seed);
    let mut counts = vec![0u64; n];
    for _ in 0..draws {
        for &i in &sampler.next_plan(&mut rng).batch {
            counts[i] += 1;
        }
    }
    let expected = (draws * sampler.sizes().batch) as f64 / n as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected) * (c as f64 - expected) / expected).sum();
    for (i, c) in counts.iter().enumerate() {
        report.table.push(vec![i as f64, *c as f64]);
    }
    report.trials = draws;
    report.note(format!("chi-square {stat:.3} against critical value {critical:.3} ({} df)", n - 1));
    report.violation(stat - critical);
    if !(stat <= critical) {
        report.fail(seed);
    }
    Ok(report)
}

/// Mean number of responding nodes against `B (1 - p)`.
pub fn check_fault_responders(
    n: usize,
    nodes: usize,
    fail_prob: f64,
    draws: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<OracleReport> {
    let mut report = OracleReport::new("fault_responder_mean", Table::new(&["responders", "frequency"]));
    let layout = NodeLayout::contiguous(n, nodes, fail_prob)?;
    let mut rng = SeededRng::new(seed);
    let mut hist = vec![0u64; nodes + 1];
    for _ in 0..draws {
        hist[plan_fault(&layout, &mut rng).responding.len()] += 1;
    }
    let mean = hist.iter().enumerate().map(|(j, &c)| j as f64 * c as f64).sum::<f64>() / draws as f64;
    let expected = nodes as f64 * (1.0 - fail_prob);
    for (j, &c) in hist.iter().enumerate() {
        report.table.push(vec![j as f64, c as f64 / draws as f64]);
    }
    let rel = (mean - expected).abs() / expected;
    report.trials = draws;
    report.note(format!("mean |J| = {mean:.4}, expected {expected:.4}"));
    report.violation(rel);
    if !(rel <= rel_tol) {
        report.fail(seed);
    }
    Ok(report)
}

/// `||grad F(w)||` helper for callers building reference points.
pub fn full_grad_norm(obj: &Objective, w: &[f64]) -> Result<f64> {
    Ok(norm(&obj.eval_full(w)?.gradient))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secant_trivial_on_empty_memory() {
        let mem = LbfgsMemory::new(3, 2, Scaling::BarzilaiBorwein, 0.0).unwrap();
        let r = check_secant(&mem, 1e-10).unwrap();
        assert!(r.passed && r.trials == 0);
    }

    #[test]
    fn secant_holds_on_random_memories() {
        let mut rng = SeededRng::new(4);
        for _ in 0..20 {
            let mem = random_admitted_memory(20, 5, &mut rng);
            assert!(check_secant(&mem, 1e-10).unwrap().passed);
        }
    }

    #[test]
    fn secant_survives_rejected_pair() {
        let mut rng = SeededRng::new(5);
        let mut mem = random_admitted_memory(6, 3, &mut rng);
        let s = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let y = [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(!mem.admit(&s, &y).unwrap());
        assert!(check_secant(&mem, 1e-10).unwrap().passed);
    }

    #[test]
    fn failing_report_carries_seed() {
        // An absurd tolerance forces failures; every failure must name a seed.
        let r = check_two_loop_equivalence(5, &[2], 3, 10, -1.0).unwrap();
        assert!(!r.passed);
        assert_eq!(r.failing_seeds.len(), 3);
    }

    #[test]
    fn zero_gradient_start_stays_zero() {
        use crate::linalg::{Dataset, Label, SparseExample};
        // Mirrored labels on identical rows make w = 0 stationary for the full objective.
        let rows = (0..8)
            .flat_map(|i| {
                let x = vec![1.0 + i as f64, -0.5];
                [
                    SparseExample::new(vec![0, 1], x.clone(), Label::Positive).unwrap(),
                    SparseExample::new(vec![0, 1], x, Label::Negative).unwrap(),
                ]
            })
            .collect();
        let obj = Objective::new(ObjectiveKind::SigmoidLsq, Dataset::new(rows, 2).unwrap(), 0.0).unwrap();
        let mut cfg = RunConfig::new(Method::RobustLbfgs);
        cfg.sampling = SamplingMode::Strategy1 { batch_frac: 1.0, overlap_frac: 0.2 };
        cfg.schedule = StepSchedule::Constant(0.05);
        cfg.epochs = 5.0;
        cfg.trace_stride = Some(1);
        let trace = run(&cfg, &obj).unwrap();
        assert!(trace.records.iter().all(|r| r.grad_norm == Some(0.0)));
    }
}
