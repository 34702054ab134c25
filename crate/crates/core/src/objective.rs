//! Empirical-risk objectives evaluated on index subsets.
//!
//! Every subset evaluation returns
//! `(1/|S|) * sum_{i in S} f_i(w) + (sigma/2) * ||w||^2` and its exact
//! gradient. The regularizer is added once per call, outside the average, so
//! a subset gradient is an unbiased estimate of the full gradient.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy_in_place, dot_unchecked, scale_in_place, Dataset, Label, ParameterVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// `f_i(w) = log(1 + exp(-y_i w'x_i))` with labels in {-1, +1}.
    LogisticL2,
    /// `f_i(w) = (s(w'x_i) - y_i)^2` with `s` the logistic sigmoid and labels in {0, 1}.
    /// Nonconvex.
    SigmoidLsq,
    /// `f_i(w) = 0.5 * ||w - x_i||^2`. Labels are ignored.
    Quadratic,
}

impl ObjectiveKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::LogisticL2 => "logistic_l2",
            ObjectiveKind::SigmoidLsq => "sigmoid_lsq",
            ObjectiveKind::Quadratic => "quadratic",
        }
    }
}

impl core::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic_l2" | "logistic" => Ok(ObjectiveKind::LogisticL2),
            "sigmoid_lsq" => Ok(ObjectiveKind::SigmoidLsq),
            "quadratic" => Ok(ObjectiveKind::Quadratic),
            other => Err(Error::Usage(format!("unknown objective '{other}'"))),
        }
    }
}

/// Loss value, gradient and sample count of one subset evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetGradient {
    pub gradient: ParameterVector,
    pub loss: f64,
    pub size: usize,
}

/// Unnormalized data-term sums over a set of examples, without the regularizer.
///
/// Sums over disjoint pieces of a batch can be merged, which lets the driver
/// evaluate each sample once per iterate and still read off the gradients of
/// the overlap sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSums {
    grad: Vec<f64>,
    loss: f64,
    count: usize,
}

impl PartialSums {
    pub fn new(dim: usize) -> Self {
        PartialSums { grad: vec![0.0; dim], loss: 0.0, count: 0 }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds another set of sums, in place.
    pub fn merge(&mut self, other: &PartialSums) {
        axpy_in_place(1.0, &other.grad, &mut self.grad);
        self.loss += other.loss;
        self.count += other.count;
    }

    pub fn clear(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.loss = 0.0;
        self.count = 0;
    }
}

#[derive(Debug, Clone)]
pub struct Objective {
    kind: ObjectiveKind,
    dataset: Dataset,
    sigma: f64,
}

impl Objective {
    pub fn new(kind: ObjectiveKind, dataset: Dataset, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "regularization must be finite and nonnegative, got {sigma}"
            )));
        }
        Ok(Objective { kind, dataset, sigma })
    }

    /// Builds an objective with the default regularization `sigma = 1/n`.
    pub fn with_default_sigma(kind: ObjectiveKind, dataset: Dataset) -> Self {
        let sigma = 1.0 / dataset.len() as f64;
        Objective { kind, dataset, sigma }
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    /// Number of training examples.
    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    fn check_point(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::dimension(self.dim(), w.len()));
        }
        Ok(())
    }

    /// Per-example loss and derivative with respect to the margin `w'x`.
    #[inline]
    fn example_terms(&self, i: usize, w: &[f64]) -> (f64, f64) {
        let ex = self.dataset.example(i);
        let z = ex.dot_unchecked(w);
        match self.kind {
            ObjectiveKind::LogisticL2 => {
                let y = ex.label().sign();
                let t = y * z;
                (softplus(-t), -y * sigmoid(-t))
            }
            ObjectiveKind::SigmoidLsq => {
                let s = sigmoid(z);
                let r = s - ex.label().indicator();
                (r * r, 2.0 * r * s * (1.0 - s))
            }
            ObjectiveKind::Quadratic => {
                // 0.5||w||^2 - w'x + 0.5||x||^2; the w part of the gradient is added per call.
                (0.5 * dot_unchecked(w, w) - z + 0.5 * ex.squared_norm(), -1.0)
            }
        }
    }

    /// Adds the data-term sums of `indices` at `w` into `acc`.
    pub fn accumulate<I>(&self, w: &[f64], indices: I, acc: &mut PartialSums) -> Result<()>
    where
        I: IntoIterator<Item = usize>,
    {
        self.check_point(w)?;
        if acc.grad.len() != self.dim() {
            return Err(Error::dimension(self.dim(), acc.grad.len()));
        }
        let n = self.len();
        let mut added = 0usize;
        for i in indices {
            if i >= n {
                return Err(Error::Usage(format!("sample index {i} out of range for n = {n}")));
            }
            let (loss, coef) = self.example_terms(i, w);
            if !(loss.is_finite() && coef.is_finite()) {
                return Err(Error::Numeric(format!("non-finite loss or gradient at sample {i}")));
            }
            acc.loss += loss;
            self.dataset.example(i).add_scaled_to(coef, &mut acc.grad);
            added += 1;
        }
        if self.kind == ObjectiveKind::Quadratic && added > 0 {
            axpy_in_place(added as f64, w, &mut acc.grad);
        }
        acc.count += added;
        Ok(())
    }

    /// Turns data-term sums into the averaged, regularized subset value and gradient.
    pub fn finish(&self, w: &[f64], sums: &PartialSums) -> Result<SubsetGradient> {
        self.check_point(w)?;
        if sums.count == 0 {
            return Err(Error::Usage("cannot evaluate an empty subset".into()));
        }
        let inv = 1.0 / sums.count as f64;
        let mut gradient = sums.grad.clone();
        scale_in_place(inv, &mut gradient);
        let mut loss = sums.loss * inv;
        if self.sigma > 0.0 {
            axpy_in_place(self.sigma, w, &mut gradient);
            loss += 0.5 * self.sigma * dot_unchecked(w, w);
        }
        if !loss.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite subset loss or gradient".into()));
        }
        Ok(SubsetGradient { gradient: gradient.into(), loss, size: sums.count })
    }

    /// Loss and gradient of the regularized average over `subset`.
    pub fn eval_subset(&self, w: &[f64], subset: &[usize]) -> Result<SubsetGradient> {
        if subset.is_empty() {
            return Err(Error::Usage("cannot evaluate an empty subset".into()));
        }
        let mut sums = PartialSums::new(self.dim());
        self.accumulate(w, subset.iter().copied(), &mut sums)?;
        self.finish(w, &sums)
    }

    /// Same as [`Objective::eval_subset`] over every sample, in index order.
    pub fn eval_full(&self, w: &[f64]) -> Result<SubsetGradient> {
        let mut sums = PartialSums::new(self.dim());
        self.accumulate(w, 0..self.len(), &mut sums)?;
        self.finish(w, &sums)
    }

    /// Fraction of samples whose label matches the sign of `w'x` (ties count as positive).
    pub fn accuracy(&self, w: &[f64]) -> Result<f64> {
        self.check_point(w)?;
        let hits = self
            .dataset
            .examples()
            .iter()
            .filter(|ex| {
                let predicted = if ex.dot_unchecked(w) >= 0.0 { Label::Positive } else { Label::Negative };
                predicted == ex.label()
            })
            .count();
        Ok(hits as f64 / self.len() as f64)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
