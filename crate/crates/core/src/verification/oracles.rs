//! Reference computations that share no code with the paths they check.

use alloc::vec::Vec;

/// Inner product with Neumaier-compensated summation.
pub fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let term = x * y;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Central differences `(f(w + h e_i) - f(w - h e_i)) / 2h` for every coordinate.
pub fn central_difference_gradient<F>(f: F, w: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = w.to_vec();
    (0..w.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / ||b||` (absolute error when `b = 0`).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        base += y * y;
    }
    let diff = libm::sqrt(diff);
    if base == 0.0 {
        diff
    } else {
        diff / libm::sqrt(base)
    }
}

/// Least-squares slope of `ln(value)` against `ln(x)`.
///
/// Pairs with a non-positive coordinate are skipped. Returns `NaN` with fewer
/// than two usable points.
pub fn loglog_slope(xs: &[f64], values: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(values)
        .filter(|(x, v)| **x > 0.0 && **v > 0.0)
        .map(|(x, v)| (libm::log(*x), libm::log(*v)))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
