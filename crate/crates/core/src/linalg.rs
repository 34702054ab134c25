//! Dense vectors, sparse rows and datasets.
//!
//! Every reduction here accumulates in index order. Nothing is reassociated,
//! so the same inputs give the same bits on every run.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Dense weight vector, the optimization iterate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn zeros(dim: usize) -> Self {
        ParameterVector(vec![0.0; dim])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParameterVector(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParameterVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(values: Vec<f64>) -> Self {
        ParameterVector(values)
    }
}

/// Inner product with a fixed left-to-right accumulation order.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dimension(a.len(), b.len()));
    }
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot_unchecked(a, a))
}

/// Returns `alpha * x + y`.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<ParameterVector> {
    if x.len() != y.len() {
        return Err(Error::dimension(x.len(), y.len()));
    }
    Ok(x.iter().zip(y).map(|(xi, yi)| alpha * xi + yi).collect::<Vec<_>>().into())
}

/// `y += alpha * x` in place.
#[inline]
pub(crate) fn axpy_in_place(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn scale_in_place(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// The label as `-1.0` or `+1.0`.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    /// The label as `0.0` or `1.0`.
    #[inline]
    pub fn indicator(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }
}

/// One training example stored as a sparse row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseExample {
    indices: Vec<u32>,
    values: Vec<f64>,
    label: Label,
}

impl SparseExample {
    /// Builds a row; indices must be strictly increasing and match `values` in length.
    pub fn new(indices: Vec<u32>, values: Vec<f64>, label: Label) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::Data(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(pos) = indices.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!(
                "feature indices not strictly increasing at position {}",
                pos + 1
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature value at position {pos}")));
        }
        Ok(SparseExample { indices, values, label })
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Largest stored feature index, if any.
    pub fn max_index(&self) -> Option<u32> {
        self.indices.last().copied()
    }

    /// Expands the row into a dense vector of length `dim`.
    pub fn to_dense(&self, dim: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            let slot = out.get_mut(i as usize).ok_or_else(|| out_of_range(i, dim))?;
            *slot = v;
        }
        Ok(out)
    }

    #[inline]
    pub(crate) fn dot_unchecked(&self, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            acc += v * w[i as usize];
        }
        acc
    }

    /// `out += scale * row`
    #[inline]
    pub(crate) fn add_scaled_to(&self, scale: f64, out: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] += scale * v;
        }
    }

    pub(crate) fn squared_norm(&self) -> f64 {
        dot_unchecked(&self.values, &self.values)
    }
}

fn out_of_range(index: u32, dim: usize) -> Error {
    Error::Data(format!("feature index {index} out of range for dimension {dim}"))
}

/// Sum of `value * w[index]` over the stored entries of `row`.
pub fn sparse_dot(row: &SparseExample, w: &[f64]) -> Result<f64> {
    if let Some(max) = row.max_index() {
        if max as usize >= w.len() {
            return Err(out_of_range(max, w.len()));
        }
    }
    Ok(row.dot_unchecked(w))
}

/// A validated training set of `n >= 1` rows in dimension `d >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<SparseExample>,
    dim: usize,
}

impl Dataset {
    pub fn new(examples: Vec<SparseExample>, dim: usize) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Data("dataset has no examples".into()));
        }
        if dim == 0 {
            return Err(Error::Data("dataset dimension must be at least 1".into()));
        }
        for (row, ex) in examples.iter().enumerate() {
            if let Some(max) = ex.max_index() {
                if max as usize >= dim {
                    return Err(Error::Data(format!(
                        "example {row}: feature index {max} out of range for dimension {dim}"
                    )));
                }
            }
        }
        Ok(Dataset { examples, dim })
    }

    /// Builds a dataset whose dimension is one past the largest feature index.
    pub fn with_inferred_dim(examples: Vec<SparseExample>) -> Result<Self> {
        let dim = examples
            .iter()
            .filter_map(SparseExample::max_index)
            .max()
            .map_or(1, |m| m as usize + 1);
        Dataset::new(examples, dim)
    }

    pub fn examples(&self) -> &[SparseExample] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &SparseExample {
        &self.examples[i]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dot_hand_values() {
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), 32.0);
        assert_eq!(dot(&[1.5, -2.0, 7.0], &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn dot_rejects_mismatch() {
        assert!(matches!(dot(&[1.0], &[1.0, 2.0]), Err(Error::Usage(_))));
        assert!(matches!(axpy(1.0, &[1.0], &[]), Err(Error::Usage(_))));
    }

    #[test]
    fn axpy_hand_values() {
        let x = [1.0, -4.0, 2.5];
        let y = [3.0, 4.0, 5.0];
        assert_eq!(&*axpy(0.0, &x, &y).unwrap(), &y);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(&*axpy(1.0, &x, &neg).unwrap(), &[0.0; 3]);
        assert_eq!(&*axpy(2.0, &[1.0, 1.0], &[3.0, 4.0]).unwrap(), &[5.0, 6.0]);
    }

    #[test]
    fn sparse_dot_cases() {
        let empty = SparseExample::new(vec![], vec![], Label::Positive).unwrap();
        assert_eq!(sparse_dot(&empty, &[1.0, 2.0]).unwrap(), 0.0);
        let row = SparseExample::new(vec![0], vec![2.0], Label::Positive).unwrap();
        assert_eq!(sparse_dot(&row, &[3.0, 9.0]).unwrap(), 6.0);
        let far = SparseExample::new(vec![5], vec![1.0], Label::Negative).unwrap();
        assert!(matches!(sparse_dot(&far, &[1.0; 3]), Err(Error::Data(_))));
    }

    #[test]
    fn example_validation() {
        assert!(SparseExample::new(vec![2, 1], vec![1.0, 1.0], Label::Positive).is_err());
        assert!(SparseExample::new(vec![1, 1], vec![1.0, 1.0], Label::Positive).is_err());
        assert!(SparseExample::new(vec![1], vec![], Label::Positive).is_err());
        assert!(SparseExample::new(vec![1], vec![f64::NAN], Label::Positive).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![], 3).is_err());
        let row = SparseExample::new(vec![3], vec![1.0], Label::Positive).unwrap();
        assert!(Dataset::new(vec![row.clone()], 3).is_err());
        assert!(Dataset::new(vec![row.clone()], 0).is_err());
        let ds = Dataset::with_inferred_dim(vec![row]).unwrap();
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.len(), 1);
    }
}
