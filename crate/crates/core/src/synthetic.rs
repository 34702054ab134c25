//! Planted-hyperplane sparse datasets.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Dataset, Label, SparseExample};
use crate::sampling::SeededRng;

/// Generates `n` rows in dimension `d`, each with `nnz_per_row` standard
/// normal entries on a uniformly random support.
///
/// With `margin > 0` the labels are the side of a random unit hyperplane
/// `u` through the origin, and every row is nudged along `u` (on its own
/// support, so sparsity is kept) until `|u'x| >= margin`. The data are then
/// linearly separable with at least that margin. With `margin == 0` labels
/// are fair coin flips.
pub fn make_synthetic(
    n: usize,
    d: usize,
    nnz_per_row: usize,
    seed: u64,
    margin: f64,
) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::Config(format!("synthetic data needs n, d >= 1 (got n = {n}, d = {d})")));
    }
    if nnz_per_row == 0 || nnz_per_row > d {
        return Err(Error::Config(format!("nonzeros per row must lie in 1..={d}, got {nnz_per_row}")));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Config(format!("margin must be finite and >= 0, got {margin}")));
    }
    let mut rng = SeededRng::new(seed);
    let mut normal: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let len = libm::sqrt(normal.iter().map(|v| v * v).sum::<f64>());
    normal.iter_mut().for_each(|v| *v /= len);

    let mut features: Vec<u32> = (0..d as u32).collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        rng.partial_shuffle(&mut features, nnz_per_row);
        let mut idx = features[..nnz_per_row].to_vec();
        idx.sort_unstable();
        let mut val: Vec<f64> = idx.iter().map(|_| rng.normal()).collect();

        let label = if margin > 0.0 {
            let proj: f64 = idx.iter().zip(&val).map(|(&i, v)| normal[i as usize] * v).sum();
            let side = if proj >= 0.0 { 1.0 } else { -1.0 };
            if proj.abs() < margin {
                let support_sq: f64 = idx.iter().map(|&i| normal[i as usize] * normal[i as usize]).sum();
                if support_sq > 0.0 {
                    let shift = (side * margin - proj) / support_sq;
                    for (v, &i) in val.iter_mut().zip(&idx) {
                        *v += shift * normal[i as usize];
                    }
                }
            }
            if side > 0.0 { Label::Positive } else { Label::Negative }
        } else if rng.uniform() < 0.5 {
            Label::Negative
        } else {
            Label::Positive
        };
        rows.push(SparseExample::new(idx, val, label)?);
    }
    Dataset::new(rows, d)
}
