//! Closed convex cones with Euclidean and polar projections.
//!
//! Convention for the second-order cone: the *first* coordinate is the radius,
//! `K = {(t, x) : ||x|| <= t}`. The polar cone is `K° = -K*`; projections are
//! related through the Moreau decomposition `v = P_K(v) + P_{K°}(v)` with
//! orthogonal parts.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// `{0}^dim`; polar is the whole space.
    Zero(usize),
    /// `R^dim`; polar is `{0}`.
    Free(usize),
    /// `R^dim_+`.
    NonnegativeOrthant(usize),
    /// `{(t, x) in R^dim : ||x|| <= t}`, radius-first. Requires `dim >= 1`.
    SecondOrderCone(usize),
    /// Cartesian product; total dimension is the sum of the parts.
    Product(Vec<Cone>),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match self {
            Cone::Zero(d) | Cone::Free(d) | Cone::NonnegativeOrthant(d) | Cone::SecondOrderCone(d) => *d,
            Cone::Product(parts) => parts.iter().map(Cone::dim).sum(),
        }
    }

    fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::dim("cone projection", self.dim(), v.len()));
        }
        Ok(())
    }

    /// Euclidean projection onto the cone.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v)?;
        Ok(self.project_unchecked(v))
    }

    fn project_unchecked(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Cone::Zero(d) => DVector::zeros(*d),
            Cone::Free(_) => v.clone(),
            Cone::NonnegativeOrthant(_) => v.map(|x| x.max(0.0)),
            Cone::SecondOrderCone(d) => soc_project(v, *d),
            Cone::Product(parts) => {
                let mut out = DVector::zeros(v.len());
                let mut off = 0;
                for part in parts {
                    let d = part.dim();
                    let block = DVector::from(v.rows(off, d));
                    out.rows_mut(off, d).copy_from(&part.project_unchecked(&block));
                    off += d;
                }
                out
            }
        }
    }

    /// Projection onto the polar cone, `v - P_K(v)` (Moreau).
    pub fn project_polar(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v)?;
        Ok(v - self.project_unchecked(v))
    }

    /// Distance to the cone, `||v - P_K(v)||`; zero iff `v` is a member.
    pub fn distance(&self, v: &DVector<f64>) -> Result<f64> {
        Ok(self.project_polar(v)?.norm())
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.distance(v)? <= tol)
    }

    /// Membership in the dual cone `K* = -K°`.
    pub fn dual_contains(&self, v: &DVector<f64>, tol: f64) -> Result<bool> {
        let neg = -v;
        let polar_part = self.project_unchecked(&neg); // P_K(-v); -v in K° iff this is 0
        Ok(polar_part.norm() <= tol)
    }

    /// Projection onto the dual cone via `P_{K*}(v) = -P_{K°}(-v)`.
    pub fn project_dual(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v)?;
        let neg = -v;
        Ok(-(&neg - self.project_unchecked(&neg)))
    }
}

fn soc_project(v: &DVector<f64>, dim: usize) -> DVector<f64> {
    debug_assert!(dim >= 1);
    let t = v[0];
    if dim == 1 {
        // degenerate SOC is the nonnegative half-line
        return DVector::from_vec(vec![t.max(0.0)]);
    }
    let x = v.rows(1, dim - 1);
    let nx = x.norm();
    if nx <= t {
        v.clone()
    } else if nx <= -t {
        DVector::zeros(dim)
    } else {
        // the generic closed form is continuous at ||x|| = |t|
        let a = 0.5 * (nx + t);
        let mut out = DVector::zeros(dim);
        out[0] = a;
        out.rows_mut(1, dim - 1).copy_from(&(x * (a / nx)));
        out
    }
}
