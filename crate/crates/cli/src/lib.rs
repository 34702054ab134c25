//! Command line front end for robust multi-batch L-BFGS.
//!
//! Reads LIBSVM data or generates synthetic problems, expands a parameter
//! grid into independent runs, and writes one CSV trace per run plus a
//! manifest. Also writes the oracle reports produced by the verification
//! checks.

pub mod config;
pub mod error;
pub mod experiment;
pub mod libsvm;
pub mod report;

pub use config::{DataSource, ExperimentSpec, Flags, Strategy};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, ExperimentSummary};
pub use libsvm::{parse_libsvm, parse_libsvm_str, to_libsvm};

/// Exit code when at least one cell aborted.
pub const EXIT_ABORTED: i32 = 3;

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;

    let flags = match Flags::try_parse_from(args) {
        Ok(f) => f,
        Err(e) => {
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            return code;
        }
    };
    let outcome = ExperimentSpec::resolve(&flags, std::env::var(config::OUT_ENV).ok())
        .and_then(|spec| run_experiment(&spec));
    match outcome {
        Ok(summary) => {
            for r in &summary.results {
                println!("{:?}\t{}", r.outcome, r.file);
            }
            println!("manifest: {}", summary.manifest.display());
            if summary.aborted() > 0 {
                eprintln!("{} of {} cells aborted", summary.aborted(), summary.results.len());
                EXIT_ABORTED
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("mblbfgs: {e}");
            e.exit_code()
        }
    }
}
