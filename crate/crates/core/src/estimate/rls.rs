//! Recursive least squares by rank-one updates of the gain matrix.
//!
//! Starting from `theta = 0`, `P = alpha^2 I`, each sample `(phi, y)` applies
//!
//! ```text
//! theta <- theta + P phi (1 + phi' P phi)^-1 (y - phi' theta)
//! P     <- P - P phi (1 + phi' P phi)^-1 phi' P
//! ```
//!
//! after which `P` is re-symmetrized.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::regressor::RegressionProblem;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA_SQ: f64 = 1e6;

/// Recommended range for the initial gain `alpha^2`.
pub const ALPHA_SQ_RANGE: (f64, f64) = (1e5, 1e10);

pub fn alpha_sq_in_range(alpha_sq: f64) -> bool {
    (ALPHA_SQ_RANGE.0..=ALPHA_SQ_RANGE.1).contains(&alpha_sq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub theta: DVector<f64>,
    pub p: DMatrix<f64>,
    pub samples_seen: usize,
}

impl EstimatorState {
    /// `theta = 0`, `P = alpha_sq * I`. Values of `alpha_sq` outside
    /// [`ALPHA_SQ_RANGE`] are accepted with a logged warning.
    pub fn new(dim: usize, alpha_sq: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("estimator dimension must be positive".into()));
        }
        if !(alpha_sq.is_finite() && alpha_sq > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha^2 must be positive and finite, got {alpha_sq}"
            )));
        }
        if !alpha_sq_in_range(alpha_sq) {
            log::warn!(
                "alpha^2 = {alpha_sq:e} outside the recommended range [{:e}, {:e}]",
                ALPHA_SQ_RANGE.0,
                ALPHA_SQ_RANGE.1
            );
        }
        Ok(Self {
            theta: DVector::zeros(dim),
            p: DMatrix::identity(dim, dim) * alpha_sq,
            samples_seen: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Absorbs one regressor row and its target.
    pub fn update(&mut self, phi: &[f64], y: f64) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::LengthMismatch {
                what: "regressor row".into(),
                expected: self.dim(),
                found: phi.len(),
            });
        }
        if !y.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "RLS sample {}",
                self.samples_seen
            )));
        }
        let phi = DVector::from_column_slice(phi);
        let p_phi = &self.p * &phi;
        let denom = 1.0 + phi.dot(&p_phi);
        let err = y - phi.dot(&self.theta);
        self.theta.axpy(err / denom, &p_phi, 1.0);
        self.p.ger(-1.0 / denom, &p_phi, &p_phi, 1.0);
        let pt = self.p.transpose();
        self.p += pt;
        self.p *= 0.5;
        self.samples_seen += 1;
        Ok(())
    }

    /// Symmetric positive definiteness of `P`, checked by Cholesky.
    pub fn is_positive_definite(&self) -> bool {
        Cholesky::new(self.p.clone()).is_some()
    }
}

/// Runs the recursion over every row of `prob`.
pub fn rls_fit(prob: &RegressionProblem, alpha_sq: f64) -> Result<EstimatorState> {
    let mut state = EstimatorState::new(prob.cols(), alpha_sq)?;
    let mut row = vec![0.0; prob.cols()];
    for i in 0..prob.rows() {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = prob.h[(i, c)];
        }
        state.update(&row, prob.y[i])?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_update() {
        let mut s = EstimatorState::new(1, 1e6).unwrap();
        s.update(&[1.0], 2.0).unwrap();
        let expected = 2.0 * 1e6 / (1.0 + 1e6);
        assert!((s.theta[0] - expected).abs() < 1e-12);
        assert!((s.theta[0] - 1.999998).abs() < 1e-6);
        assert!((s.p[(0, 0)] - 1e6 / (1.0 + 1e6)).abs() < 1e-9);
    }

    #[test]
    fn zero_regressor_is_a_no_op() {
        let mut s = EstimatorState::new(3, 1e6).unwrap();
        s.update(&[1.0, 2.0, -1.0], 0.7).unwrap();
        let before = s.clone();
        s.update(&[0.0, 0.0, 0.0], 5.0).unwrap();
        assert_eq!(s.theta, before.theta);
        assert_eq!(s.p, before.p);
    }

    #[test]
    fn initialization() {
        let s = EstimatorState::new(3, 1e6).unwrap();
        assert_eq!(s.p, DMatrix::identity(3, 3) * 1e6);
        assert_eq!(s.theta, DVector::zeros(3));
        assert!(s.is_positive_definite());
    }

    #[test]
    fn out_of_range_alpha_accepted() {
        assert!(!alpha_sq_in_range(1e4));
        assert!(EstimatorState::new(2, 1e4).is_ok());
        assert!(EstimatorState::new(0, 1e6).is_err());
        assert!(EstimatorState::new(2, 0.0).is_err());
        assert!(EstimatorState::new(2, -1.0).is_err());
    }

    #[test]
    fn non_finite_and_mismatched_rows_rejected() {
        let mut s = EstimatorState::new(2, 1e6).unwrap();
        assert!(s.update(&[1.0, f64::NAN], 1.0).is_err());
        assert!(s.update(&[1.0, 1.0], f64::INFINITY).is_err());
        assert!(s.update(&[1.0], 1.0).is_err());
    }
}
