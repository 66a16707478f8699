//! Prox-map catalog for the nonsmooth parts of the agent objectives.
//!
//! `prox(v, tau)` returns the unique minimizer of `rho(y) + (1/2 tau) ||y - v||^2`.

use std::ops::Range;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::stacked::ball_project;

#[derive(Debug, Clone, PartialEq)]
pub enum ProxFunction {
    /// `rho = 0`; prox is the identity.
    Zero,
    /// `rho(y) = weight * ||y||_1`; prox is the soft threshold.
    L1Norm(f64),
    /// `rho(y) = <c, y> + indicator(y >= 0)` with `c >= 0`;
    /// prox is `max(0, v - tau c)` componentwise.
    WeightedLinearPlusNonneg(DVector<f64>),
    /// Indicator of the ball `{y : ||y - center|| <= radius}`.
    IndicatorBall { center: DVector<f64>, radius: f64 },
    /// Indicator of the box `{y : lower <= y <= upper}` componentwise.
    IndicatorBox {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// Blockwise application over disjoint coordinate ranges; coordinates not
    /// covered by any range get the identity prox.
    SeparableSum(Vec<(Range<usize>, ProxFunction)>),
}

impl ProxFunction {
    /// Validates internal consistency (range overlap, weight signs).
    pub fn validate(&self) -> Result<()> {
        match self {
            ProxFunction::Zero | ProxFunction::L1Norm(_) => Ok(()),
            ProxFunction::WeightedLinearPlusNonneg(c) => {
                if c.iter().any(|&x| x < 0.0) {
                    return Err(Error::invalid("linear-plus-nonneg cost must be >= 0"));
                }
                Ok(())
            }
            ProxFunction::IndicatorBall { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::invalid("ball radius must be positive"));
                }
                Ok(())
            }
            ProxFunction::IndicatorBox { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::dim("box bounds", lower.len(), upper.len()));
                }
                if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
                    return Err(Error::invalid("box lower bound exceeds upper bound"));
                }
                Ok(())
            }
            ProxFunction::SeparableSum(parts) => {
                let mut ranges: Vec<&Range<usize>> = parts.iter().map(|(r, _)| r).collect();
                ranges.sort_by_key(|r| r.start);
                for pair in ranges.windows(2) {
                    if pair[1].start < pair[0].end {
                        return Err(Error::invalid(
                            "overlapping coordinate ranges in separable sum",
                        ));
                    }
                }
                for (_, p) in parts {
                    p.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Prox map `argmin rho(y) + (1/2 tau) ||y - v||^2`, `tau > 0`.
    pub fn prox(&self, v: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
        if tau <= 0.0 || !tau.is_finite() {
            return Err(Error::invalid(format!("prox step tau must be positive, got {tau}")));
        }
        self.validate()?;
        self.prox_inner(v, tau)
    }

    fn prox_inner(&self, v: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
        match self {
            ProxFunction::Zero => Ok(v.clone()),
            ProxFunction::L1Norm(w) => {
                let thr = tau * w;
                Ok(v.map(|x| {
                    if x > thr {
                        x - thr
                    } else if x < -thr {
                        x + thr
                    } else {
                        0.0
                    }
                }))
            }
            ProxFunction::WeightedLinearPlusNonneg(c) => {
                if c.len() != v.len() {
                    return Err(Error::dim("prox linear cost", c.len(), v.len()));
                }
                Ok(DVector::from_fn(v.len(), |i, _| (v[i] - tau * c[i]).max(0.0)))
            }
            ProxFunction::IndicatorBall { center, radius } => {
                if center.len() != v.len() {
                    return Err(Error::dim("prox ball center", center.len(), v.len()));
                }
                // tau-independent projection
                Ok(center + ball_project(&(v - center), *radius))
            }
            ProxFunction::IndicatorBox { lower, upper } => {
                if lower.len() != v.len() {
                    return Err(Error::dim("prox box", lower.len(), v.len()));
                }
                Ok(DVector::from_fn(v.len(), |i, _| v[i].clamp(lower[i], upper[i])))
            }
            ProxFunction::SeparableSum(parts) => {
                let mut out = v.clone();
                for (range, p) in parts {
                    if range.end > v.len() {
                        return Err(Error::dim("separable-sum range", v.len(), range.end));
                    }
                    let block = DVector::from(v.rows(range.start, range.len()));
                    let res = p.prox_inner(&block, tau)?;
                    out.rows_mut(range.start, range.len()).copy_from(&res);
                }
                Ok(out)
            }
        }
    }

    /// Value of `rho` at `y` (indicator parts return `inf` outside their set,
    /// up to `tol` slack). Used by metrics and the centralized oracle.
    pub fn value(&self, y: &DVector<f64>, tol: f64) -> f64 {
        match self {
            ProxFunction::Zero => 0.0,
            ProxFunction::L1Norm(w) => w * y.iter().map(|x| x.abs()).sum::<f64>(),
            ProxFunction::WeightedLinearPlusNonneg(c) => {
                if y.iter().any(|&x| x < -tol) {
                    f64::INFINITY
                } else {
                    c.dot(y)
                }
            }
            ProxFunction::IndicatorBall { center, radius } => {
                if (y - center).norm() <= radius + tol {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFunction::IndicatorBox { lower, upper } => {
                let ok = y
                    .iter()
                    .enumerate()
                    .all(|(i, &x)| x >= lower[i] - tol && x <= upper[i] + tol);
                if ok {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFunction::SeparableSum(parts) => {
                let mut total = 0.0;
                for (range, p) in parts {
                    let block = DVector::from(y.rows(range.start, range.len()));
                    total += p.value(&block, tol);
                }
                total
            }
        }
    }

    /// Radius of a centered ball containing the domain restricted to the
    /// leading `shared_dim` coordinates, when a ball/box component pins it
    /// down. `None` means the shared block is unbounded.
    pub fn shared_domain_radius(&self, shared_dim: usize) -> Option<f64> {
        match self {
            ProxFunction::IndicatorBall { center, radius } => {
                if center.len() >= shared_dim {
                    Some(center.norm() + radius)
                } else {
                    None
                }
            }
            ProxFunction::IndicatorBox { lower, upper } => {
                if lower.len() >= shared_dim {
                    let s: f64 = (0..shared_dim)
                        .map(|i| lower[i].abs().max(upper[i].abs()).powi(2))
                        .sum();
                    Some(s.sqrt())
                } else {
                    None
                }
            }
            ProxFunction::SeparableSum(parts) => parts.iter().find_map(|(range, p)| {
                if range.start == 0 && range.end >= shared_dim {
                    p.shared_domain_radius(shared_dim)
                } else {
                    None
                }
            }),
            _ => None,
        }
    }
}
