//! Robust multi-batch L-BFGS.
//!
//! Limited-memory quasi-Newton optimization where the batch used for each
//! step changes from one iteration to the next, and curvature pairs are
//! formed only on the samples two consecutive batches share. The crate also
//! simulates the fault-tolerant distributed setting (nodes that fail to
//! return a gradient shrink the batch) and carries the diagnostics and
//! property checks used to audit the method.
//!
//! The crate is `no_std` and needs only `alloc`. All transcendental
//! functions go through `libm` and every reduction runs in a fixed order, so
//! a run with a fixed seed produces bit-identical traces on every platform.
//!
//! Module map:
//!
//! * [`linalg`]: dense vectors, sparse rows, datasets.
//! * [`objective`]: logistic, sigmoid least-squares and quadratic losses on
//!   arbitrary index subsets.
//! * [`sampling`]: the seeded generator, the two multi-batch strategies and
//!   the node-failure simulator.
//! * [`lbfgs`]: pair memory, cautious admission, two-loop recursion and the
//!   dense oracles used for audits.
//! * [`driver`]: the optimization loop, step schedules, the four compared
//!   methods and curvature diagnostics.
//! * [`synthetic`]: planted-hyperplane sparse datasets.
//! * [`verification`]: independent oracles and the multi-seed behavior checks.

#![no_std]

extern crate alloc;

pub mod driver;
pub mod error;
pub mod lbfgs;
pub mod linalg;
pub mod objective;
pub mod sampling;
pub mod synthetic;
pub mod verification;

pub use driver::{
    curvature_diagnostics, run, CurvatureDiagnostic, Method, RunConfig, RunOutcome, RunTrace,
    SamplingMode, StepSchedule, TraceRecord,
};
pub use error::{Error, Result};
pub use lbfgs::{CurvaturePair, LbfgsMemory, Scaling};
pub use linalg::{Dataset, Label, ParameterVector, SparseExample};
pub use objective::{Objective, ObjectiveKind, SubsetGradient};
pub use sampling::{NodeLayout, SamplePlan, SeededRng};
