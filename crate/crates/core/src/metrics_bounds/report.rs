//! Run reports: per-iteration metric rows, communication accounting, final
//! iterates, optional ergodic snapshots, and the CSV/JSON emitters.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{
    compute_consensus_metrics, compute_resource_metrics, CertificateReport, IterationMetrics,
    LogSchedule,
};
use crate::dpda_resource::ResourceAgentProblem;
use crate::dpda_static::{AgentProblem, StepSizes};
use crate::error::Result;
use crate::network::Graph;
use crate::stacked::{fmt_e12, Stacked};

/// Logging and diagnostic options for a solver run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub log: LogSchedule,
    /// Oracle optimal value used for the suboptimality column.
    pub oracle_objective: Option<f64>,
    /// Store ergodic averages at every logged iteration (needed to attach
    /// certificates and by `certify`).
    pub snapshots: bool,
    /// Dynamic solver: track the proximal error sequence against the exact
    /// projection and enforce the growth bounds.
    pub diagnostic_shadow: bool,
}

impl RunOptions {
    /// Sparse logging, no oracle, no diagnostics.
    pub fn quiet() -> Self {
        RunOptions {
            log: LogSchedule::geometric(64),
            oracle_objective: None,
            snapshots: false,
            diagnostic_shadow: false,
        }
    }

    pub fn with_log(log: LogSchedule) -> Self {
        RunOptions {
            log,
            ..RunOptions::quiet()
        }
    }
}

pub fn to_vecs(x: &Stacked) -> Vec<Vec<f64>> {
    x.iter().map(|b| b.iter().cloned().collect()).collect()
}

pub fn from_vecs(v: &[Vec<f64>]) -> Stacked {
    v.iter().map(|b| DVector::from_vec(b.clone())).collect()
}

/// Ergodic averages captured at a logged iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: usize,
    pub xbar: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ybar: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: String,
    pub gamma: f64,
    pub tau: Vec<f64>,
    pub kappa: Vec<f64>,
    pub iterations: usize,
    pub comm_total: usize,
    pub rows: Vec<IterationMetrics>,
    /// Consensus rounds per iteration (dynamic/resource solvers).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub q_history: Vec<usize>,
    /// Shadow-mode proximal error norms, one per iteration.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub e_norms: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub mu_norms: Vec<f64>,
    pub x0: Vec<Vec<f64>>,
    pub final_xbar: Vec<Vec<f64>>,
    pub final_x: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_y: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub snapshots: Vec<Snapshot>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_echo: Option<serde_json::Value>,
}

impl RunReport {
    pub fn new(solver: &str, steps: &StepSizes, _opts: &RunOptions) -> Self {
        RunReport {
            solver: solver.to_string(),
            gamma: steps.gamma,
            tau: steps.tau.clone(),
            kappa: steps.kappa.clone(),
            iterations: 0,
            comm_total: 0,
            rows: Vec::new(),
            q_history: Vec::new(),
            e_norms: Vec::new(),
            mu_norms: Vec::new(),
            x0: Vec::new(),
            final_xbar: Vec::new(),
            final_x: Vec::new(),
            final_y: None,
            snapshots: Vec::new(),
            certificate: None,
            seed: None,
            config_echo: None,
        }
    }

    pub fn set_x0(&mut self, x0: &Stacked) {
        self.x0 = to_vecs(x0);
    }

    pub fn log_consensus_row(
        &mut self,
        problems: &[AgentProblem],
        graph: &Graph,
        xbar: &Stacked,
        k: usize,
        comms: usize,
        opts: &RunOptions,
    ) {
        let row = compute_consensus_metrics(problems, graph, xbar, k, comms, opts.oracle_objective);
        if opts.snapshots {
            self.snapshots.push(Snapshot {
                k,
                xbar: to_vecs(xbar),
                ybar: None,
            });
        }
        self.rows.push(row);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn log_resource_row(
        &mut self,
        problems: &[ResourceAgentProblem],
        graph: &Graph,
        xibar: &Stacked,
        ybar: &[DVector<f64>],
        k: usize,
        comms: usize,
        opts: &RunOptions,
    ) {
        let row =
            compute_resource_metrics(problems, graph, xibar, ybar, k, comms, opts.oracle_objective);
        if opts.snapshots {
            self.snapshots.push(Snapshot {
                k,
                xbar: to_vecs(xibar),
                ybar: Some(to_vecs(&ybar.to_vec())),
            });
        }
        self.rows.push(row);
    }

    pub fn finish(&mut self, xbar: Stacked, x: Stacked, comms: usize, iterations: usize) {
        self.final_xbar = to_vecs(&xbar);
        self.final_x = to_vecs(&x);
        self.comm_total = comms;
        self.iterations = iterations;
    }

    /// Fixed-schema metrics CSV:
    /// `k,comms,objective,subopt,infeas_sum,cons_viol,d_ctilde,bound_value`
    /// with integer counters and `%.12e` floats.
    pub fn to_metrics_csv(&self) -> String {
        let mut out =
            String::from("k,comms,objective,subopt,infeas_sum,cons_viol,d_ctilde,bound_value\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.k,
                r.comms,
                fmt_e12(r.objective),
                fmt_e12(r.subopt),
                fmt_e12(r.infeas_sum),
                fmt_e12(r.cons_viol),
                fmt_e12(r.d_ctilde),
                fmt_e12(r.bound_value),
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::Parse(format!("report serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| crate::error::Error::Parse(format!("report parse: {e}")))
    }

    pub fn write(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_metrics_csv())?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        Ok(())
    }
}
