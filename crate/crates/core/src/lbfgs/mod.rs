//! Curvature-pair memory and the two-loop recursion.
//!
//! `H_k` is never formed: it is the result of applying the stored pairs,
//! oldest first, to `gamma * I` with the inverse BFGS update
//! `H+ = V' H V + rho s s'`, `V = I - rho y s'`. The two-loop recursion
//! applies that operator to a vector in `O(m d)`.
//!
//! A pair only enters memory if it passes the cautious test
//! `y's >= eps ||s||^2`; a rejected pair leaves the memory untouched.

mod dense;

pub use dense::DenseMatrix;

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy_in_place, dot_unchecked, norm, scale_in_place, ParameterVector};

/// Largest dimension the dense audits will materialize.
pub const DENSE_AUDIT_MAX_DIM: usize = 200;

/// Relative floor on `y's` when `eps = 0`, keeping `rho` finite.
const MIN_RELATIVE_CURVATURE: f64 = 1e-12;

/// Initial inverse-Hessian scaling `H^(0) = gamma * I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// `gamma = s'y / y'y` of the newest stored pair (1 while memory is empty).
    BarzilaiBorwein,
    /// A fixed `gamma`.
    Fixed(f64),
}

/// One correction pair `(s, y)` with `rho = 1 / y's`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    s: ParameterVector,
    y: ParameterVector,
    rho: f64,
}

impl CurvaturePair {
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `y's`
    pub fn curvature(&self) -> f64 {
        dot_unchecked(&self.y, &self.s)
    }
}

/// Cautious admission test: `y's >= eps ||s||^2`.
///
/// With `eps = 0` the test is strict positivity plus `y's >= 1e-12 ||s|| ||y||`.
pub fn cautious_accept(s: &[f64], y: &[f64], eps: f64) -> Result<bool> {
    if s.len() != y.len() {
        return Err(Error::dimension(s.len(), y.len()));
    }
    let ss = dot_unchecked(s, s);
    if ss == 0.0 {
        return Err(Error::Usage("zero displacement cannot form a curvature pair".into()));
    }
    let ys = dot_unchecked(y, s);
    let accept = if eps > 0.0 {
        ys >= eps * ss
    } else {
        ys > 0.0 && ys >= MIN_RELATIVE_CURVATURE * libm::sqrt(ss) * norm(y)
    };
    Ok(accept && (1.0 / ys).is_finite())
}

/// Bounded FIFO of curvature pairs plus the scaling policy.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsMemory {
    dim: usize,
    capacity: usize,
    pairs: VecDeque<CurvaturePair>,
    scaling: Scaling,
    eps: f64,
}

impl LbfgsMemory {
    pub fn new(dim: usize, capacity: usize, scaling: Scaling, eps: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("memory must hold at least one pair".into()));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("cautious eps must be finite and >= 0, got {eps}")));
        }
        if let Scaling::Fixed(g) = scaling {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("fixed scaling must be positive, got {g}")));
            }
        }
        Ok(LbfgsMemory { dim, capacity, pairs: VecDeque::with_capacity(capacity), scaling, eps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stored pairs, oldest first.
    pub fn pairs(&self) -> impl DoubleEndedIterator<Item = &CurvaturePair> + ExactSizeIterator {
        self.pairs.iter()
    }

    pub fn newest(&self) -> Option<&CurvaturePair> {
        self.pairs.back()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores `(s, y)` if it passes the cautious test, evicting the oldest
    /// pair when full. Returns whether the pair was stored.
    pub fn admit(&mut self, s: &[f64], y: &[f64]) -> Result<bool> {
        if s.len() != self.dim {
            return Err(Error::dimension(self.dim, s.len()));
        }
        if !cautious_accept(s, y, self.eps)? {
            return Ok(false);
        }
        let rho = 1.0 / dot_unchecked(y, s);
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair {
            s: ParameterVector::from_vec(s.to_vec()),
            y: ParameterVector::from_vec(y.to_vec()),
            rho,
        });
        Ok(true)
    }

    /// The `gamma` of `H^(0) = gamma * I`.
    pub fn initial_scaling(&self) -> f64 {
        match (self.scaling, self.pairs.back()) {
            (Scaling::Fixed(g), _) => g,
            (Scaling::BarzilaiBorwein, None) => 1.0,
            (Scaling::BarzilaiBorwein, Some(p)) => p.curvature() / dot_unchecked(&p.y, &p.y),
        }
    }

    /// `H_k g` by the two-loop recursion.
    pub fn apply_inverse(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.dim {
            return Err(Error::dimension(self.dim, g.len()));
        }
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (i, p) in self.pairs.iter().enumerate().rev() {
            let a = p.rho * dot_unchecked(&p.s, &q);
            axpy_in_place(-a, &p.y, &mut q);
            if !a.is_finite() {
                return Err(Error::Numeric(format!("two-loop backward pass blew up at pair {i}")));
            }
            alphas.push(a);
        }
        scale_in_place(self.initial_scaling(), &mut q);
        for ((i, p), a) in self.pairs.iter().enumerate().zip(alphas.iter().rev()) {
            let b = p.rho * dot_unchecked(&p.y, &q);
            axpy_in_place(a - b, &p.s, &mut q);
            if !b.is_finite() {
                return Err(Error::Numeric(format!("two-loop forward pass blew up at pair {i}")));
            }
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("two-loop recursion produced a non-finite direction".into()));
        }
        Ok(q)
    }

    /// Search direction `p = -H_k g`.
    pub fn two_loop_direction(&self, g: &[f64]) -> Result<ParameterVector> {
        let mut p = self.apply_inverse(g)?;
        scale_in_place(-1.0, &mut p);
        Ok(p.into())
    }

    fn check_audit_dim(&self) -> Result<()> {
        if self.dim > DENSE_AUDIT_MAX_DIM {
            return Err(Error::Usage(format!(
                "dense audit limited to d <= {DENSE_AUDIT_MAX_DIM}, got {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Materializes `H_k` by applying `V' H V + rho s s'` literally, oldest pair first.
    pub fn dense_inverse(&self) -> Result<DenseMatrix> {
        self.check_audit_dim()?;
        let d = self.dim;
        let mut h = DenseMatrix::scaled_identity(d, self.initial_scaling());
        for p in &self.pairs {
            let mut v = DenseMatrix::scaled_identity(d, 1.0);
            v.add_outer(-p.rho, &p.y, &p.s);
            h = v.transpose().matmul(&h).matmul(&v);
            h.add_outer(p.rho, &p.s, &p.s);
        }
        Ok(h)
    }

    /// Materializes `B_k = H_k^{-1}` by the direct BFGS recursion
    /// `B+ = B - B s s' B / s'B s + y y' / y's` from `B^(0) = I / gamma`.
    pub fn dense_hessian(&self) -> Result<DenseMatrix> {
        self.check_audit_dim()?;
        let d = self.dim;
        let mut b = DenseMatrix::scaled_identity(d, 1.0 / self.initial_scaling());
        for p in &self.pairs {
            let bs = b.mul_vec(&p.s);
            let sbs = dot_unchecked(&p.s, &bs);
            b.add_outer(-1.0 / sbs, &bs, &bs);
            b.add_outer(p.rho, &p.y, &p.y);
        }
        Ok(b)
    }

    /// Smallest and largest eigenvalue of `B_k`.
    pub fn eigen_bounds_audit(&self) -> Result<(f64, f64)> {
        let eig = self.dense_hessian()?.symmetric_eigenvalues();
        let lo = eig.first().copied().unwrap_or(f64::NAN);
        let hi = eig.last().copied().unwrap_or(f64::NAN);
        Ok((lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SeededRng;
    use alloc::vec;
    use alloc::vec::Vec;

    fn bb(dim: usize, m: usize) -> LbfgsMemory {
        LbfgsMemory::new(dim, m, Scaling::BarzilaiBorwein, 1e-4).unwrap()
    }

    #[test]
    fn cautious_cases() {
        assert!(cautious_accept(&[1.0, 0.0], &[1.0, 0.0], 1e-4).unwrap());
        assert!(!cautious_accept(&[1.0, 2.0], &[-1.0, -2.0], 1e-4).unwrap());
        // y's = 0.5 = eps ||s||^2 with eps = 0.5, s = (1, 0): boundary accepts.
        assert!(cautious_accept(&[1.0, 0.0], &[0.5, 3.0], 0.5).unwrap());
        assert!(matches!(cautious_accept(&[0.0, 0.0], &[1.0, 0.0], 1e-4), Err(Error::Usage(_))));
    }

    #[test]
    fn zero_eps_needs_strict_positivity() {
        assert!(!cautious_accept(&[1.0, 0.0], &[0.0, 1.0], 0.0).unwrap());
        assert!(cautious_accept(&[1.0, 0.0], &[1e-3, 1.0], 0.0).unwrap());
        assert!(!cautious_accept(&[1.0, 0.0], &[1e-14, 1.0], 0.0).unwrap());
    }

    #[test]
    fn fifo_eviction() {
        let mut mem = bb(2, 2);
        for k in 1..=3 {
            let v = [k as f64, 0.0];
            assert!(mem.admit(&v, &v).unwrap());
        }
        let firsts: Vec<f64> = mem.pairs().map(|p| p.s()[0]).collect();
        assert_eq!(firsts, vec![2.0, 3.0]);
    }

    #[test]
    fn rejection_leaves_memory_untouched() {
        let mut mem = bb(2, 3);
        mem.admit(&[1.0, 0.5], &[0.7, 0.2]).unwrap();
        let before = mem.clone();
        assert!(!mem.admit(&[1.0, 0.0], &[-1.0, 0.0]).unwrap());
        assert_eq!(mem, before);
    }

    #[test]
    fn bb_scaling() {
        let mut mem = bb(2, 3);
        assert_eq!(mem.initial_scaling(), 1.0);
        mem.admit(&[0.3, -0.4], &[0.3, -0.4]).unwrap();
        assert_eq!(mem.initial_scaling(), 1.0);
        mem.admit(&[0.6, -0.8], &[0.3, -0.4]).unwrap();
        assert!((mem.initial_scaling() - 2.0).abs() < 1e-15);
        let fixed = LbfgsMemory::new(2, 3, Scaling::Fixed(0.25), 0.0).unwrap();
        assert_eq!(fixed.initial_scaling(), 0.25);
    }

    #[test]
    fn bb_scaling_within_quadratic_spectrum() {
        // y = A s with A = diag(1, 4, 10): y'y / s'y lies in [1, 10].
        let diag = [1.0, 4.0, 10.0];
        let mut rng = SeededRng::new(17);
        let mut mem = bb(3, 5);
        for _ in 0..200 {
            let s: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let y: Vec<f64> = s.iter().zip(&diag).map(|(a, b)| a * b).collect();
            assert!(mem.admit(&s, &y).unwrap());
            let inv = 1.0 / mem.initial_scaling();
            assert!((1.0 - 1e-12..=10.0 + 1e-12).contains(&inv));
        }
    }

    #[test]
    fn steepest_descent_when_empty() {
        let mem = bb(2, 3);
        assert_eq!(&*mem.two_loop_direction(&[1.0, 2.0]).unwrap(), &[-1.0, -2.0]);
    }

    #[test]
    fn one_pair_hand_trace() {
        let mut mem = bb(2, 3);
        mem.admit(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(&*mem.two_loop_direction(&[1.0, 0.0]).unwrap(), &[-1.0, 0.0]);
    }

    #[test]
    fn dense_inverse_small_cases() {
        let mem = LbfgsMemory::new(3, 2, Scaling::Fixed(0.5), 0.0).unwrap();
        assert_eq!(mem.dense_inverse().unwrap(), DenseMatrix::scaled_identity(3, 0.5));
        let mut mem = bb(2, 2);
        mem.admit(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(mem.dense_inverse().unwrap(), DenseMatrix::scaled_identity(2, 1.0));
        assert_eq!(mem.eigen_bounds_audit().unwrap(), (1.0, 1.0));
    }

    #[test]
    fn dense_audit_refuses_large_dim() {
        let mem = bb(DENSE_AUDIT_MAX_DIM + 1, 2);
        assert!(matches!(mem.dense_inverse(), Err(Error::Usage(_))));
        assert!(matches!(mem.eigen_bounds_audit(), Err(Error::Usage(_))));
    }

    #[test]
    fn stored_pairs_satisfy_cautious_bound() {
        let mut rng = SeededRng::new(99);
        let eps = 1e-4;
        let mut mem = bb(4, 5);
        let mut accepted = 0;
        for _ in 0..1000 {
            let s: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            if mem.admit(&s, &y).unwrap() {
                accepted += 1;
            }
            for p in mem.pairs() {
                let ss = dot_unchecked(p.s(), p.s());
                assert!(p.curvature() >= eps * ss);
                assert!(p.curvature() <= norm(p.s()) * norm(p.y()) * (1.0 + 1e-12));
                assert!((p.rho() * p.curvature() - 1.0).abs() < 1e-12);
            }
        }
        assert!(accepted > 0 && accepted < 1000);
    }

    #[test]
    fn dimension_checks() {
        let mut mem = bb(2, 2);
        assert!(mem.admit(&[1.0], &[1.0]).is_err());
        assert!(mem.two_loop_direction(&[1.0, 2.0, 3.0]).is_err());
        assert!(LbfgsMemory::new(2, 0, Scaling::BarzilaiBorwein, 0.0).is_err());
        assert!(LbfgsMemory::new(2, 1, Scaling::Fixed(0.0), 0.0).is_err());
        assert!(LbfgsMemory::new(2, 1, Scaling::BarzilaiBorwein, -1.0).is_err());
    }
}
