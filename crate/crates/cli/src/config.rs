//! Command line flags, key=value configuration files, and the experiment
//! grid built from them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Parser;
use mblbfgs_core::synthetic::make_synthetic;
use mblbfgs_core::{Method, Objective, ObjectiveKind, Scaling, StepSchedule};

use crate::error::{CliError, Result};
use crate::libsvm::parse_libsvm;

/// Environment variable that overrides the configuration file's output directory.
pub const OUT_ENV: &str = "MBLBFGS_OUT";

pub const DEFAULT_OUT: &str = "mblbfgs-out";

/// Keys accepted in a configuration file. Each matches the long flag of the same name.
pub const KEYS: &[&str] = &[
    "dataset",
    "dim",
    "synthetic",
    "objective",
    "sigma",
    "method",
    "batch-frac",
    "overlap-frac",
    "strategy",
    "nodes",
    "fail-prob",
    "reshard",
    "memory",
    "cautious-eps",
    "scaling",
    "step",
    "epochs",
    "seed",
    "trace-stride",
    "out",
    "jobs",
];

/// Runs grids of multi-batch L-BFGS experiments and writes one CSV trace per cell.
///
/// List-valued options take comma-separated values. `--step` may be repeated.
#[derive(Parser, Debug, Default, Clone)]
#[command(name = "mblbfgs", version)]
pub struct Flags {
    /// key=value file; flags given on the command line take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// LIBSVM file.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<String>,
    /// Feature dimension for --dataset (default: largest index).
    #[arg(long)]
    pub dim: Option<String>,
    /// Generated data instead of a file.
    #[arg(long, value_name = "N,D,NNZ,MARGIN[,SEED]")]
    pub synthetic: Option<String>,
    /// logistic_l2, sigmoid_lsq or quadratic.
    #[arg(long)]
    pub objective: Option<String>,
    /// L2 weight (default 1/n).
    #[arg(long)]
    pub sigma: Option<String>,
    /// robust_lbfgs, inconsistent_lbfgs, multibatch_gd, serial_sgd.
    #[arg(long, value_name = "LIST")]
    pub method: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub batch_frac: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub overlap_frac: Option<String>,
    /// 1, 2 or fault.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub nodes: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub fail_prob: Option<String>,
    /// Reassign samples to nodes at every epoch in fault mode (true/false).
    #[arg(long)]
    pub reshard: Option<String>,
    #[arg(long)]
    pub memory: Option<String>,
    #[arg(long)]
    pub cautious_eps: Option<String>,
    /// bb or fixed:<gamma>.
    #[arg(long)]
    pub scaling: Option<String>,
    /// constant:<a>, diminishing:<b> or sqrt:<c>,<tau>.
    #[arg(long, value_name = "RULE")]
    pub step: Vec<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub seed: Option<String>,
    #[arg(long)]
    pub trace_stride: Option<String>,
    /// Output directory (also settable through MBLBFGS_OUT).
    #[arg(long, value_name = "DIR")]
    pub out: Option<String>,
    /// Cells run concurrently.
    #[arg(long)]
    pub jobs: Option<String>,
}

impl Flags {
    fn entries(&self) -> Vec<(&'static str, Vec<String>)> {
        let single = [
            ("dataset", &self.dataset),
            ("dim", &self.dim),
            ("synthetic", &self.synthetic),
            ("objective", &self.objective),
            ("sigma", &self.sigma),
            ("method", &self.method),
            ("batch-frac", &self.batch_frac),
            ("overlap-frac", &self.overlap_frac),
            ("strategy", &self.strategy),
            ("nodes", &self.nodes),
            ("fail-prob", &self.fail_prob),
            ("reshard", &self.reshard),
            ("memory", &self.memory),
            ("cautious-eps", &self.cautious_eps),
            ("scaling", &self.scaling),
            ("epochs", &self.epochs),
            ("seed", &self.seed),
            ("trace-stride", &self.trace_stride),
            ("out", &self.out),
            ("jobs", &self.jobs),
        ];
        let mut out: Vec<_> = single
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, vec![v.clone()])))
            .collect();
        if !self.step.is_empty() {
            out.push(("step", self.step.clone()));
        }
        out
    }
}

/// Reads `key = value` lines. `#` starts a comment; `step` may repeat.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(b, _)| b).trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key = value", no + 1)));
        };
        let key = k.trim().replace('_', "-");
        let key = key.trim_start_matches("--").to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key '{}'", no + 1, k.trim())));
        }
        let slot = map.entry(key.clone()).or_default();
        if !slot.is_empty() && key != "step" {
            return Err(CliError::Usage(format!("config line {}: '{key}' given twice", no + 1)));
        }
        slot.push(v.trim().to_string());
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Libsvm { path: PathBuf, dim: Option<usize> },
    Synthetic { n: usize, d: usize, nnz: usize, margin: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    One,
    Two,
    Fault,
}

/// One experiment grid: the cells are the product of methods, batch and
/// overlap fractions, step rules, failure probabilities and seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub data: DataSource,
    pub objective: ObjectiveKind,
    /// `None` means `1/n`.
    pub sigma: Option<f64>,
    pub methods: Vec<Method>,
    pub batch_fracs: Vec<f64>,
    pub overlap_fracs: Vec<f64>,
    pub strategy: Strategy,
    pub nodes: usize,
    pub fail_probs: Vec<f64>,
    pub reshard: bool,
    pub memory: usize,
    pub cautious_eps: f64,
    pub scaling: Scaling,
    pub steps: Vec<StepSchedule>,
    pub epochs: f64,
    pub seeds: Vec<u64>,
    pub trace_stride: Option<usize>,
    pub out: PathBuf,
    pub jobs: usize,
}

impl ExperimentSpec {
    /// Defaults for everything except the data source.
    pub fn new(data: DataSource) -> Self {
        ExperimentSpec {
            data,
            objective: ObjectiveKind::LogisticL2,
            sigma: None,
            methods: vec![Method::RobustLbfgs],
            batch_fracs: vec![0.05],
            overlap_fracs: vec![0.2],
            strategy: Strategy::One,
            nodes: 16,
            fail_probs: vec![0.0],
            reshard: false,
            memory: 10,
            cautious_eps: 1e-4,
            scaling: Scaling::BarzilaiBorwein,
            steps: vec![StepSchedule::Constant(1.0), StepSchedule::Constant(0.1)],
            epochs: 10.0,
            seeds: vec![1],
            trace_stride: None,
            out: PathBuf::from(DEFAULT_OUT),
            jobs: 1,
        }
    }

    /// Parses process arguments, merges the configuration file and the
    /// output-directory environment variable.
    pub fn from_args<I, T>(args: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let flags = Flags::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
        Self::resolve(&flags, std::env::var(OUT_ENV).ok())
    }

    /// Precedence: flag, then `env_out` for the output directory, then the
    /// configuration file, then defaults.
    pub fn resolve(flags: &Flags, env_out: Option<String>) -> Result<Self> {
        let mut map = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(dir) = env_out.filter(|d| !d.is_empty()) {
            map.insert("out".into(), vec![dir]);
        }
        for (k, v) in flags.entries() {
            map.insert(k.into(), v);
        }
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, Vec<String>>) -> Result<Self> {
        let get = |k: &str| map.get(k).and_then(|v| v.last()).map(String::as_str);
        let data = match (get("dataset"), get("synthetic")) {
            (Some(_), Some(_)) => return Err(usage("give either --dataset or --synthetic, not both")),
            (None, None) => return Err(usage("a data source is required (--dataset or --synthetic)")),
            (Some(path), None) => DataSource::Libsvm {
                path: PathBuf::from(path),
                dim: get("dim").map(|v| scalar("dim", v)).transpose()?,
            },
            (None, Some(s)) => {
                if get("dim").is_some() {
                    return Err(usage("--dim applies to --dataset only"));
                }
                parse_synthetic(s)?
            }
        };
        let mut spec = ExperimentSpec::new(data);
        if let Some(v) = get("objective") {
            spec.objective = v.parse()?;
        }
        if let Some(v) = get("sigma") {
            spec.sigma = Some(scalar("sigma", v)?);
        }
        if let Some(v) = get("method") {
            spec.methods = list(v, |s| s.parse::<Method>().map_err(CliError::from))?;
        }
        if let Some(v) = get("strategy") {
            spec.strategy = match v {
                "1" => Strategy::One,
                "2" => Strategy::Two,
                "fault" => Strategy::Fault,
                other => return Err(usage(format!("unknown strategy '{other}' (expected 1, 2 or fault)"))),
            };
        }
        let fault = spec.strategy == Strategy::Fault;
        for key in ["batch-frac", "overlap-frac"] {
            if fault && get(key).is_some() {
                return Err(usage(format!("--{key} does not apply to --strategy fault")));
            }
        }
        if !fault && (get("fail-prob").is_some() || get("nodes").is_some() || get("reshard").is_some()) {
            return Err(usage("--fail-prob, --nodes and --reshard need --strategy fault"));
        }
        if let Some(v) = get("batch-frac") {
            spec.batch_fracs = list(v, |s| scalar("batch-frac", s))?;
        }
        if let Some(v) = get("overlap-frac") {
            spec.overlap_fracs = list(v, |s| scalar("overlap-frac", s))?;
        }
        if fault {
            spec.batch_fracs = vec![1.0];
            spec.fail_probs = vec![0.1, 0.3, 0.5];
        }
        if let Some(v) = get("nodes") {
            spec.nodes = scalar("nodes", v)?;
        }
        if let Some(v) = get("fail-prob") {
            spec.fail_probs = list(v, |s| scalar("fail-prob", s))?;
        }
        if let Some(v) = get("reshard") {
            spec.reshard = scalar("reshard", v)?;
        }
        if let Some(v) = get("memory") {
            spec.memory = scalar("memory", v)?;
        }
        if let Some(v) = get("cautious-eps") {
            spec.cautious_eps = scalar("cautious-eps", v)?;
        }
        if let Some(v) = get("scaling") {
            spec.scaling = parse_scaling(v)?;
        }
        if let Some(rules) = map.get("step") {
            spec.steps = rules
                .iter()
                .flat_map(|r| r.split(';'))
                .map(|r| parse_step(r.trim()))
                .collect::<Result<_>>()?;
        }
        if let Some(v) = get("epochs") {
            spec.epochs = scalar("epochs", v)?;
        }
        if let Some(v) = get("seed") {
            spec.seeds = list(v, |s| scalar("seed", s))?;
        }
        if let Some(v) = get("trace-stride") {
            spec.trace_stride = Some(scalar("trace-stride", v)?);
        }
        if let Some(v) = get("out") {
            spec.out = PathBuf::from(v);
        }
        if let Some(v) = get("jobs") {
            spec.jobs = scalar("jobs", v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("method", self.methods.is_empty()),
            ("batch-frac", self.batch_fracs.is_empty()),
            ("overlap-frac", self.overlap_fracs.is_empty()),
            ("fail-prob", self.fail_probs.is_empty()),
            ("step", self.steps.is_empty()),
            ("seed", self.seeds.is_empty()),
        ];
        if let Some((k, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(usage(format!("--{k} needs at least one value")));
        }
        if self.jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        if self.nodes == 0 {
            return Err(usage("--nodes must be at least 1"));
        }
        if self.fail_probs.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(usage("failure probabilities must lie in [0, 1)"));
        }
        if !(self.cautious_eps >= 0.0 && self.cautious_eps.is_finite()) {
            return Err(usage("--cautious-eps must be finite and >= 0"));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(usage("--sigma must be finite and >= 0"));
            }
        }
        if let Scaling::Fixed(g) = self.scaling {
            if !(g > 0.0 && g.is_finite()) {
                return Err(usage("fixed scaling must be positive"));
            }
        }
        for s in &self.steps {
            s.validate()?;
        }
        Ok(())
    }

    /// Loads or generates the data and builds the objective.
    pub fn objective(&self) -> Result<Objective> {
        let data = match &self.data {
            DataSource::Libsvm { path, dim } => parse_libsvm(path, *dim)?,
            DataSource::Synthetic { n, d, nnz, margin, seed } => make_synthetic(*n, *d, *nnz, *seed, *margin)?,
        };
        Ok(match self.sigma {
            Some(s) => Objective::new(self.objective, data, s)?,
            None => Objective::with_default_sigma(self.objective, data),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn scalar<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| usage(format!("--{key}: cannot parse '{v}'")))
}

fn list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(|s| f(s.trim())).collect()
}

fn parse_synthetic(s: &str) -> Result<DataSource> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if !(4..=5).contains(&parts.len()) {
        return Err(usage(format!("--synthetic expects n,d,nnz,margin[,seed], got '{s}'")));
    }
    Ok(DataSource::Synthetic {
        n: scalar("synthetic", parts[0])?,
        d: scalar("synthetic", parts[1])?,
        nnz: scalar("synthetic", parts[2])?,
        margin: scalar("synthetic", parts[3])?,
        seed: parts.get(4).map_or(Ok(1), |v| scalar("synthetic", v))?,
    })
}

pub fn parse_scaling(s: &str) -> Result<Scaling> {
    match s.split_once(':') {
        None if s == "bb" => Ok(Scaling::BarzilaiBorwein),
        Some(("fixed", g)) => Ok(Scaling::Fixed(scalar("scaling", g)?)),
        _ => Err(usage(format!("--scaling expects bb or fixed:<gamma>, got '{s}'"))),
    }
}

pub fn parse_step(s: &str) -> Result<StepSchedule> {
    let rule = match s.split_once(':') {
        Some(("constant", a)) => StepSchedule::Constant(scalar("step", a)?),
        Some(("diminishing", b)) => StepSchedule::Diminishing(scalar("step", b)?),
        Some(("sqrt", rest)) => match rest.split_once(',') {
            Some((c, tau)) => StepSchedule::SqrtHorizon { c: scalar("step", c)?, tau: scalar("step", tau)? },
            None => return Err(usage(format!("--step sqrt expects sqrt:<c>,<tau>, got '{s}'"))),
        },
        _ => return Err(usage(format!("--step expects constant:<a>, diminishing:<b> or sqrt:<c>,<tau>, got '{s}'"))),
    };
    rule.validate()?;
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_rules() {
        assert_eq!(parse_step("constant:0.5").unwrap(), StepSchedule::Constant(0.5));
        assert_eq!(parse_step("diminishing:2").unwrap(), StepSchedule::Diminishing(2.0));
        assert_eq!(parse_step("sqrt:1,100").unwrap(), StepSchedule::SqrtHorizon { c: 1.0, tau: 100.0 });
        assert!(parse_step("sqrt:1").is_err());
        assert!(parse_step("constant:-1").is_err());
        assert!(parse_step("linear:1").is_err());
    }

    #[test]
    fn scaling_rules() {
        assert_eq!(parse_scaling("bb").unwrap(), Scaling::BarzilaiBorwein);
        assert_eq!(parse_scaling("fixed:0.5").unwrap(), Scaling::Fixed(0.5));
        assert!(parse_scaling("fixed").is_err());
    }

    #[test]
    fn file_keys_and_comments() {
        let m = parse_config_file("# grid\nmethod = robust_lbfgs\nbatch_frac=0.1 # r\nstep=constant:1\nstep=sqrt:1,4\n")
            .unwrap();
        assert_eq!(m["batch-frac"], vec!["0.1"]);
        assert_eq!(m["step"].len(), 2);
        assert!(parse_config_file("colour = red").is_err());
        assert!(parse_config_file("seed = 1\nseed = 2").is_err());
        assert!(parse_config_file("seed 1").is_err());
    }

    #[test]
    fn fault_mode_defaults_and_conflicts() {
        let spec = ExperimentSpec::from_args(["mblbfgs", "--synthetic", "100,5,3,0", "--strategy", "fault"]).unwrap();
        assert_eq!(spec.fail_probs, vec![0.1, 0.3, 0.5]);
        assert_eq!(spec.nodes, 16);
        assert!(ExperimentSpec::from_args(["mblbfgs", "--synthetic", "100,5,3,0", "--fail-prob", "0.1"]).is_err());
        assert!(ExperimentSpec::from_args(["mblbfgs", "--synthetic", "100,5,3,0", "--strategy", "fault", "--batch-frac", "0.1"])
            .is_err());
    }

    #[test]
    fn data_source_required_once() {
        assert!(ExperimentSpec::from_args(["mblbfgs"]).is_err());
        assert!(ExperimentSpec::from_args(["mblbfgs", "--dataset", "a", "--synthetic", "1,1,1,0"]).is_err());
    }
}
