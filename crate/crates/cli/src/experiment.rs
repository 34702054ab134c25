//! Grid expansion, per-cell runs, CSV traces and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use mblbfgs_core::sampling::Sampler;
use mblbfgs_core::{run, Method, Objective, RunConfig, RunOutcome, RunTrace, SamplingMode, SeededRng, StepSchedule};

use crate::config::{ExperimentSpec, Strategy};
use crate::error::{CliError, Result};

pub const TRACE_HEADER: [&str; 10] = [
    "k",
    "epoch",
    "grad_norm",
    "subset_loss",
    "full_loss",
    "train_acc",
    "pair_accepted",
    "sample_size",
    "overlap_size",
    "redraws",
];

pub const MANIFEST: &str = "manifest.csv";

pub const MANIFEST_HEADER: [&str; 13] = [
    "file",
    "method",
    "batch_frac",
    "overlap_frac",
    "step",
    "fail_prob",
    "seed",
    "outcome",
    "abort_iteration",
    "iterations",
    "epochs",
    "final_grad_norm",
    "version",
];

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// One point of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub batch_frac: f64,
    pub overlap_frac: f64,
    pub step: StepSchedule,
    pub fail_prob: f64,
    pub seed: u64,
}

/// How a cell ended.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub file: String,
    pub outcome: RunOutcome,
    pub iterations: usize,
    pub epochs: f64,
    pub final_grad_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub results: Vec<CellResult>,
    pub manifest: PathBuf,
}

impl ExperimentSummary {
    pub fn aborted(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_abort()).count()
    }
}

/// Step-rule token used in file names: the value for a constant step,
/// `dim<b>` for `b/(k+1)`, `sqrt<c>t<tau>` for `c/sqrt(tau)`.
pub fn step_token(step: &StepSchedule) -> String {
    match *step {
        StepSchedule::Constant(a) => format!("{a}"),
        StepSchedule::Diminishing(b) => format!("dim{b}"),
        StepSchedule::SqrtHorizon { c, tau } => format!("sqrt{c}t{tau}"),
    }
}

fn step_rule(step: &StepSchedule) -> String {
    match *step {
        StepSchedule::Constant(a) => format!("constant:{a}"),
        StepSchedule::Diminishing(b) => format!("diminishing:{b}"),
        StepSchedule::SqrtHorizon { c, tau } => format!("sqrt:{c},{tau}"),
    }
}

/// `<method>_r<r>_o<o>_a<alpha>_p<p>_s<seed>.csv`. In fault mode the batch is
/// set by the responding nodes, so `r` reads `B<nodes>` and `o` reads `int`
/// (the intersection of consecutive batches).
pub fn cell_file_name(spec: &ExperimentSpec, cell: &Cell) -> String {
    let (r, o) = match spec.strategy {
        Strategy::Fault => (format!("B{}", spec.nodes), "int".to_string()),
        _ => (format!("{}", cell.batch_frac), format!("{}", cell.overlap_frac)),
    };
    format!(
        "{}_r{r}_o{o}_a{}_p{}_s{}.csv",
        cell.method.name(),
        step_token(&cell.step),
        cell.fail_prob,
        cell.seed
    )
}

/// Cells in a fixed nesting order: method, batch fraction, overlap fraction,
/// step, failure probability, seed.
pub fn grid(spec: &ExperimentSpec) -> Vec<Cell> {
    let (batch, overlap): (&[f64], &[f64]) = match spec.strategy {
        Strategy::Fault => (&[1.0], &[1.0]),
        _ => (&spec.batch_fracs, &spec.overlap_fracs),
    };
    let fail: &[f64] = match spec.strategy {
        Strategy::Fault => &spec.fail_probs,
        _ => &[0.0],
    };
    let mut cells = Vec::new();
    for &method in &spec.methods {
        for &batch_frac in batch {
            for &overlap_frac in overlap {
                for &step in &spec.steps {
                    for &fail_prob in fail {
                        for &seed in &spec.seeds {
                            cells.push(Cell { method, batch_frac, overlap_frac, step, fail_prob, seed });
                        }
                    }
                }
            }
        }
    }
    cells
}

pub fn run_config(spec: &ExperimentSpec, cell: &Cell) -> RunConfig {
    let mut cfg = RunConfig::new(cell.method);
    cfg.sampling = match spec.strategy {
        Strategy::One => SamplingMode::Strategy1 { batch_frac: cell.batch_frac, overlap_frac: cell.overlap_frac },
        Strategy::Two => SamplingMode::Strategy2 { batch_frac: cell.batch_frac, overlap_frac: cell.overlap_frac },
        Strategy::Fault => {
            SamplingMode::Fault { nodes: spec.nodes, fail_prob: cell.fail_prob, reshard_each_epoch: spec.reshard }
        }
    };
    cfg.schedule = cell.step;
    cfg.memory = spec.memory;
    cfg.cautious_eps = spec.cautious_eps;
    cfg.scaling = spec.scaling;
    cfg.epochs = spec.epochs;
    cfg.seed = cell.seed;
    cfg.trace_stride = spec.trace_stride;
    cfg
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Trace rows carrying full metrics with every field finite.
pub fn trace_rows(trace: &RunTrace) -> Vec<[String; 10]> {
    trace
        .records
        .iter()
        .filter_map(|r| {
            let (g, f, a) = (r.grad_norm?, r.full_loss?, r.train_acc?);
            if ![r.epoch, g, r.subset_loss, f, a].iter().all(|v| v.is_finite()) {
                return None;
            }
            Some([
                r.k.to_string(),
                num(r.epoch),
                num(g),
                num(r.subset_loss),
                num(f),
                num(a),
                u8::from(r.pair_accepted).to_string(),
                r.sample_size.to_string(),
                r.overlap_size.to_string(),
                r.redraws.to_string(),
            ])
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| CliError::write(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::write(path, std::io::Error::other(e))
}

pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_err(path, e))?;
    for row in trace_rows(trace) {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

fn run_cell(spec: &ExperimentSpec, obj: &Objective, cell: &Cell) -> Result<CellResult> {
    let file = cell_file_name(spec, cell);
    let trace = run(&run_config(spec, cell), obj)?;
    write_trace(&spec.out.join(&file), &trace)?;
    let last = trace.records.last();
    Ok(CellResult {
        cell: cell.clone(),
        file,
        outcome: trace.outcome.clone(),
        iterations: last.map_or(0, |r| r.k),
        epochs: last.map_or(0.0, |r| r.epoch),
        final_grad_norm: trace.final_grad_norm(),
    })
}

/// Checks every cell's sampling parameters before anything runs.
fn validate_cells(spec: &ExperimentSpec, n: usize, cells: &[Cell]) -> Result<()> {
    for cell in cells {
        let cfg = run_config(spec, cell);
        cfg.validate()?;
        if cell.method != Method::SerialSgd {
            Sampler::new(&cfg.sampling, n, &mut SeededRng::new(cell.seed))?;
        }
    }
    let mut names: Vec<String> = cells.iter().map(|c| cell_file_name(spec, c)).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Usage(format!("grid has duplicate cell {}", w[0])));
    }
    Ok(())
}

/// Runs the whole grid. A cell that diverges or hits a non-finite value is
/// recorded as aborted and the remaining cells still run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    spec.validate()?;
    let obj = spec.objective()?;
    let cells = grid(spec);
    validate_cells(spec, obj.len(), &cells)?;
    fs::create_dir_all(&spec.out).map_err(|e| CliError::write(&spec.out, e))?;

    let slots: Vec<Mutex<Option<Result<CellResult>>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(cell) = cells.get(i) else { break };
        let r = run_cell(spec, &obj, cell);
        *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(r);
    };
    let jobs = spec.jobs.min(cells.len()).max(1);
    if jobs == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(work);
            }
        });
    }
    let mut results = Vec::with_capacity(cells.len());
    for slot in slots {
        let r = slot.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every cell ran");
        results.push(r?);
    }
    let manifest = spec.out.join(MANIFEST);
    write_manifest(&manifest, &results)?;
    Ok(ExperimentSummary { results, manifest })
}

fn outcome_fields(o: &RunOutcome) -> (String, String) {
    match o {
        RunOutcome::Completed => ("completed".into(), String::new()),
        RunOutcome::Diverged { k } => ("diverged".into(), k.to_string()),
        RunOutcome::NumericAbort { k, .. } => ("numeric_abort".into(), k.to_string()),
    }
}

pub fn write_manifest(path: &Path, results: &[CellResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(MANIFEST_HEADER).map_err(|e| csv_err(path, e))?;
    for r in results {
        let (outcome, at) = outcome_fields(&r.outcome);
        let c = &r.cell;
        w.write_record([
            r.file.clone(),
            c.method.name().to_string(),
            num(c.batch_frac),
            num(c.overlap_frac),
            step_rule(&c.step),
            num(c.fail_prob),
            c.seed.to_string(),
            outcome,
            at,
            r.iterations.to_string(),
            num(r.epochs),
            r.final_grad_norm.map(num).unwrap_or_default(),
            VERSION.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::write(path, e))
}
