//! Smooth convex terms with value/gradient oracles and Lipschitz constants.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum SmoothFunction {
    /// `f = 0`.
    Zero,
    /// `f(x) = (1/2) x'Qx + <q, x> + c` with `Q` symmetric PSD.
    Quadratic {
        q_matrix: DMatrix<f64>,
        linear: DVector<f64>,
        constant: f64,
    },
    /// `f(x) = (1/2) ||Gx - h||^2`.
    LeastSquares { matrix: DMatrix<f64>, rhs: DVector<f64> },
    /// `f(x) = (1/2) ||x[range]||^2`.
    HalfSquaredNormOfSubblock(Range<usize>),
}

impl SmoothFunction {
    /// Lipschitz constant of the gradient.
    pub fn lipschitz(&self) -> f64 {
        match self {
            SmoothFunction::Zero => 0.0,
            SmoothFunction::Quadratic { q_matrix, .. } => {
                // symmetric PSD: spectral norm = largest eigenvalue
                let sym = (q_matrix + q_matrix.transpose()) * 0.5;
                sym.symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(0.0, f64::max)
            }
            SmoothFunction::LeastSquares { matrix, .. } => {
                let s = matrix.clone().svd(false, false).singular_values;
                let top = s.iter().cloned().fold(0.0, f64::max);
                top * top
            }
            SmoothFunction::HalfSquaredNormOfSubblock(_) => 1.0,
        }
    }

    /// Value and gradient at `x`.
    pub fn eval(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        match self {
            SmoothFunction::Zero => Ok((0.0, DVector::zeros(x.len()))),
            SmoothFunction::Quadratic {
                q_matrix,
                linear,
                constant,
            } => {
                if q_matrix.ncols() != x.len() || linear.len() != x.len() {
                    return Err(Error::dim("quadratic eval", q_matrix.ncols(), x.len()));
                }
                let qx = q_matrix * x;
                let val = 0.5 * x.dot(&qx) + linear.dot(x) + constant;
                Ok((val, qx + linear))
            }
            SmoothFunction::LeastSquares { matrix, rhs } => {
                if matrix.ncols() != x.len() {
                    return Err(Error::dim("least-squares eval", matrix.ncols(), x.len()));
                }
                let r = matrix * x - rhs;
                Ok((0.5 * r.norm_squared(), matrix.transpose() * r))
            }
            SmoothFunction::HalfSquaredNormOfSubblock(range) => {
                if range.end > x.len() {
                    return Err(Error::dim("subblock eval", x.len(), range.end));
                }
                let block = x.rows(range.start, range.len());
                let mut grad = DVector::zeros(x.len());
                grad.rows_mut(range.start, range.len()).copy_from(&block);
                Ok((0.5 * block.norm_squared(), grad))
            }
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.eval(x)?.0)
    }
}
