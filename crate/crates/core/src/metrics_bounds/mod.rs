//! Run metrics (suboptimality, infeasibility, consensus violation) and the
//! theoretical O(1/K) bound certificates, plus the CSV/JSON report formats.
//!
//! Certificates are diagnostics: they need saddle-point data from the
//! centralized oracle and are attached to a finished report; solvers never
//! consult them.

mod certificates;
mod report;

pub use certificates::{
    attach_dynamic_certificate, attach_resource_certificate, attach_static_certificate,
    theta1, theta3_sum, theta5_sum, theta_dynamic, theta_resource, CertRow, CertificateReport,
    DynamicSaddle, ResourceSaddle, StaticSaddle,
};
pub use report::{RunOptions, RunReport, Snapshot};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dpda_resource::{global_residual, ResourceAgentProblem};
use crate::dpda_static::AgentProblem;
use crate::network::Graph;
use crate::stacked::Stacked;

/// Slack allowed on indicator parts when evaluating objectives at ergodic
/// averages (projection outputs carry O(eps) rounding).
pub const INDICATOR_TOL: f64 = 1e-7;

/// Which iterations get a metrics row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogSchedule {
    All,
    EveryN(usize),
    /// About this many log-spaced points (always includes the final one).
    Geometric(usize),
    Explicit(Vec<usize>),
}

impl LogSchedule {
    pub fn geometric(points: usize) -> Self {
        LogSchedule::Geometric(points.max(2))
    }

    /// Sorted, de-duplicated iteration indices in `1..=total`.
    pub fn points(&self, total: usize) -> Vec<usize> {
        let mut ks: Vec<usize> = match self {
            LogSchedule::All => (1..=total).collect(),
            LogSchedule::EveryN(n) => {
                let n = (*n).max(1);
                let mut v: Vec<usize> = (1..=total).filter(|k| k % n == 0).collect();
                v.push(total);
                v
            }
            LogSchedule::Geometric(points) => {
                let p = (*points).max(2);
                let mut v = Vec::with_capacity(p);
                let logt = (total as f64).ln();
                for i in 0..p {
                    let t = i as f64 / (p - 1) as f64;
                    v.push((logt * t).exp().round() as usize);
                }
                v.push(total);
                v
            }
            LogSchedule::Explicit(ks) => {
                let mut v = ks.clone();
                v.push(total);
                v
            }
        };
        ks = {
            let mut v: Vec<usize> = ks.into_iter().filter(|&k| k >= 1 && k <= total).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        ks
    }
}

/// Serialize possibly-NaN floats as JSON null and read null back as NaN.
pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Metrics of one logged iteration. All quantities refer to the ergodic
/// averages; for resource runs `infeas` holds the single global distance and
/// the consensus columns describe the dual estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub k: usize,
    pub comms: usize,
    #[serde(with = "nan_as_null")]
    pub objective: f64,
    /// `|objective - Phi*|`; NaN when no oracle value was supplied.
    #[serde(with = "nan_as_null")]
    pub subopt: f64,
    /// Per-agent `d_{K_i}(A_i xbar_i - b_i)` (resource: one global entry).
    pub infeas: Vec<f64>,
    pub infeas_sum: f64,
    /// Max over base-graph edges of the shared-block disagreement.
    pub cons_viol: f64,
    /// Distance to the consensus cone: stacked deviation from the mean.
    pub d_ctilde: f64,
    /// Certificate bound at this `k`; NaN until a certificate is attached.
    #[serde(with = "nan_as_null")]
    pub bound_value: f64,
}

pub(crate) fn shared_blocks(x: &Stacked, n_s: usize) -> Stacked {
    x.iter().map(|b| DVector::from(b.rows(0, n_s))).collect()
}

fn consensus_columns(shared: &Stacked, graph: &Graph) -> (f64, f64) {
    let mut viol = 0.0f64;
    for &(i, j) in graph.edges() {
        viol = viol.max((&shared[i] - &shared[j]).norm());
    }
    let mean = crate::stacked::block_mean(shared);
    let d: f64 = shared
        .iter()
        .map(|b| (b - &mean).norm_squared())
        .sum::<f64>()
        .sqrt();
    (viol, d)
}

/// Metrics for the consensus-form solvers at the ergodic average `xbar`.
pub fn compute_consensus_metrics(
    problems: &[AgentProblem],
    graph: &Graph,
    xbar: &Stacked,
    k: usize,
    comms: usize,
    oracle_objective: Option<f64>,
) -> IterationMetrics {
    let objective: f64 = problems
        .iter()
        .zip(xbar)
        .map(|(p, x)| p.objective(x, INDICATOR_TOL))
        .sum();
    let infeas: Vec<f64> = problems
        .iter()
        .zip(xbar)
        .map(|(p, x)| p.infeasibility(x))
        .collect();
    let infeas_sum = infeas.iter().sum();
    let n_s = problems[0].shared_dim;
    let (cons_viol, d_ctilde) = consensus_columns(&shared_blocks(xbar, n_s), graph);
    IterationMetrics {
        k,
        comms,
        objective,
        subopt: oracle_objective.map_or(f64::NAN, |s| (objective - s).abs()),
        infeas,
        infeas_sum,
        cons_viol,
        d_ctilde,
        bound_value: f64::NAN,
    }
}

/// Metrics for resource runs: objective and global infeasibility at `xibar`,
/// consensus columns describing the spread of the dual averages `ybar`.
pub fn compute_resource_metrics(
    problems: &[ResourceAgentProblem],
    graph: &Graph,
    xibar: &Stacked,
    ybar: &[DVector<f64>],
    k: usize,
    comms: usize,
    oracle_objective: Option<f64>,
) -> IterationMetrics {
    let objective: f64 = problems
        .iter()
        .zip(xibar)
        .map(|(p, x)| p.objective(x, INDICATOR_TOL))
        .sum();
    let g = global_residual(problems, xibar);
    let infeas_global = problems[0]
        .cone
        .distance(&g)
        .expect("dims validated on construction");
    let ystack: Stacked = ybar.to_vec();
    let (cons_viol, d_ctilde) = consensus_columns(&ystack, graph);
    IterationMetrics {
        k,
        comms,
        objective,
        subopt: oracle_objective.map_or(f64::NAN, |s| (objective - s).abs()),
        infeas: vec![infeas_global],
        infeas_sum: infeas_global,
        cons_viol,
        d_ctilde,
        bound_value: f64::NAN,
    }
}
