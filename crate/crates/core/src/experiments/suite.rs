//! Replication management for the distributed-SVM benchmark: the full case
//! grid (cost parameter x connectivity x static/dynamic), averaged metric
//! curves, and the decision-boundary dump for plotting.

use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::svm::{build_svm_instance, generate_svm_data, SvmDataset};
use crate::catalog::substream;
use crate::dpda_dynamic::{dpda_d_run, select_stepsizes_dynamic_uniform, DynamicConfig};
use crate::dpda_static::{dpda_s_run, select_stepsizes_static_uniform, AgentProblem};
use crate::error::Result;
use crate::metrics_bounds::{LogSchedule, RunOptions, RunReport};
use crate::network::{generate_graph_best_effort, ActivationPolicy, Graph, MixingProcess};
use crate::oracle::{solve_consensus, CentralSolution, SolveOptions};
use crate::stacked::{fmt_e12, Stacked};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmSuiteConfig {
    pub data_seed: u64,
    pub n_agents: usize,
    pub c_values: Vec<f64>,
    pub lambda2_targets: Vec<f64>,
    pub replications: usize,
    pub k_static: usize,
    pub k_dynamic: usize,
    pub p: f64,
    pub gamma: f64,
    pub c_i: f64,
    pub activation_prob: f64,
    pub t_window: usize,
    pub log_points: usize,
    pub oracle_tol: f64,
    pub oracle_max_iter: usize,
}

impl Default for SvmSuiteConfig {
    fn default() -> Self {
        SvmSuiteConfig {
            data_seed: 0,
            n_agents: 10,
            c_values: vec![2.0, 10.0],
            lambda2_targets: vec![0.05, 1.0],
            replications: 5,
            k_static: 100_000,
            k_dynamic: 10_000,
            p: 2.0,
            gamma: 10.0,
            c_i: 30.0,
            activation_prob: 0.5,
            t_window: 3,
            log_points: 40,
            oracle_tol: 1e-7,
            oracle_max_iter: 300_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteRun {
    pub c_param: f64,
    pub lambda2_target: f64,
    pub lambda2_actual: f64,
    pub topology: String,
    pub replication: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl SuiteRun {
    pub fn label(&self) -> String {
        format!(
            "svm_C{}_lam{:.2}_{}_rep{}",
            self.c_param, self.lambda2_target, self.topology, self.replication
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub method: String,
    pub c_param: f64,
    pub wx: f64,
    pub wy: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmSuite {
    pub config: SvmSuiteConfig,
    /// `(C, centralized solution)` pairs, one oracle solve per cost value.
    pub oracles: Vec<(f64, CentralSolution)>,
    pub runs: Vec<SuiteRun>,
    pub boundary: Vec<BoundaryRow>,
}

/// Final consensus classifier of a run: mean of the per-node shared blocks
/// of the ergodic average.
pub fn consensus_classifier(report: &RunReport) -> (DVector<f64>, f64) {
    let n = report.final_xbar.len() as f64;
    let mut w = DVector::zeros(2);
    let mut b = 0.0;
    for node in &report.final_xbar {
        w[0] += node[0] / n;
        w[1] += node[1] / n;
        b += node[2] / n;
    }
    (w, b)
}

pub fn oracle_classifier(sol: &CentralSolution) -> (DVector<f64>, f64) {
    (
        DVector::from_vec(vec![sol.x_central[0], sol.x_central[1]]),
        sol.x_central[2],
    )
}

/// Runs the whole grid: every `(C, lambda2, static|dynamic)` case with the
/// configured number of replications over one fixed dataset. Per-replication
/// solver failures are recorded and do not abort the remaining runs.
pub fn run_experiment_suite(cfg: &SvmSuiteConfig) -> Result<SvmSuite> {
    let dataset = generate_svm_data(cfg.data_seed);
    let oracle_opts = SolveOptions {
        tol: cfg.oracle_tol,
        max_iter: cfg.oracle_max_iter,
        progress_every: 0,
    };

    let mut oracles = Vec::new();
    for &c_param in &cfg.c_values {
        let agents = build_svm_instance(&dataset, cfg.n_agents, c_param, None)?;
        let sol = solve_consensus(&agents, None, &oracle_opts)?;
        oracles.push((c_param, sol));
    }

    let mut runs = Vec::new();
    for &c_param in &cfg.c_values {
        let oracle = &oracles
            .iter()
            .find(|(c, _)| *c == c_param)
            .expect("oracle solved above")
            .1;
        let (w_star, b_star) = oracle_classifier(oracle);
        let ball = 10.0 * (w_star.norm_squared() + b_star * b_star).sqrt().max(1.0);
        let flat = build_svm_instance(&dataset, cfg.n_agents, c_param, None)?;
        let bounded = build_svm_instance(&dataset, cfg.n_agents, c_param, Some(ball))?;

        for &lam in &cfg.lambda2_targets {
            for rep in 0..cfg.replications {
                let graph_seed = substream(
                    cfg.data_seed,
                    &format!("graph/{c_param}/{lam}/{rep}"),
                )
                .gen::<u64>();
                let (graph, lambda2_actual) =
                    generate_graph_best_effort(cfg.n_agents, lam, 0.1, graph_seed);

                runs.push(run_static_case(
                    cfg, &flat, &graph, oracle, c_param, lam, lambda2_actual, rep,
                ));
                runs.push(run_dynamic_case(
                    cfg, &bounded, &graph, oracle, c_param, lam, lambda2_actual, rep, ball,
                ));
            }
        }
    }

    let boundary = boundary_rows(cfg, &dataset, &oracles, &runs, &oracle_opts)?;
    Ok(SvmSuite {
        config: cfg.clone(),
        oracles,
        runs,
        boundary,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_static_case(
    cfg: &SvmSuiteConfig,
    problems: &[AgentProblem],
    graph: &Graph,
    oracle: &CentralSolution,
    c_param: f64,
    lam: f64,
    lambda2_actual: f64,
    rep: usize,
) -> SuiteRun {
    let opts = RunOptions {
        log: LogSchedule::geometric(cfg.log_points),
        oracle_objective: Some(oracle.objective),
        snapshots: false,
        diagnostic_shadow: false,
    };
    let x0: Stacked = problems.iter().map(|p| DVector::zeros(p.dim())).collect();
    let outcome = select_stepsizes_static_uniform(problems, graph, cfg.gamma, cfg.c_i)
        .and_then(|steps| dpda_s_run(problems, graph, &steps, &x0, cfg.k_static, &opts));
    let (report, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    SuiteRun {
        c_param,
        lambda2_target: lam,
        lambda2_actual,
        topology: "static".into(),
        replication: rep,
        report,
        error,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_dynamic_case(
    cfg: &SvmSuiteConfig,
    problems: &[AgentProblem],
    graph: &Graph,
    oracle: &CentralSolution,
    c_param: f64,
    lam: f64,
    lambda2_actual: f64,
    rep: usize,
    ball: f64,
) -> SuiteRun {
    let opts = RunOptions {
        log: LogSchedule::geometric(cfg.log_points),
        oracle_objective: Some(oracle.objective),
        snapshots: false,
        diagnostic_shadow: false,
    };
    let x0: Stacked = problems.iter().map(|p| DVector::zeros(p.dim())).collect();
    let act_seed = substream(cfg.data_seed, &format!("activation/{c_param}/{lam}/{rep}"))
        .gen::<u64>();
    let outcome = select_stepsizes_dynamic_uniform(problems, cfg.gamma, cfg.c_i)
        .and_then(|steps| {
            let config = DynamicConfig::new(cfg.p, ball, steps);
            let mut process = MixingProcess::new(
                graph.clone(),
                ActivationPolicy::BernoulliEdges {
                    prob: cfg.activation_prob,
                    period: cfg.t_window,
                },
                act_seed,
            )?;
            dpda_d_run(problems, &mut process, &config, &x0, cfg.k_dynamic, &opts)
        });
    let (report, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    SuiteRun {
        c_param,
        lambda2_target: lam,
        lambda2_actual,
        topology: "dynamic".into(),
        replication: rep,
        report,
        error,
    }
}

/// Decision-boundary dump rows: the centralized classifier, the first static
/// replication's consensus classifier per connectivity target, and each
/// node's purely local SVM.
fn boundary_rows(
    cfg: &SvmSuiteConfig,
    dataset: &SvmDataset,
    oracles: &[(f64, CentralSolution)],
    runs: &[SuiteRun],
    oracle_opts: &SolveOptions,
) -> Result<Vec<BoundaryRow>> {
    let mut rows = Vec::new();
    for (c_param, sol) in oracles {
        let (w, b) = oracle_classifier(sol);
        rows.push(BoundaryRow {
            method: "central".into(),
            c_param: *c_param,
            wx: w[0],
            wy: w[1],
            b,
        });
        for run in runs.iter().filter(|r| {
            r.c_param == *c_param && r.topology == "static" && r.replication == 0
        }) {
            if let Some(report) = &run.report {
                let (w, b) = consensus_classifier(report);
                rows.push(BoundaryRow {
                    method: format!("dpda_static_lam{:.2}", run.lambda2_target),
                    c_param: *c_param,
                    wx: w[0],
                    wy: w[1],
                    b,
                });
            }
        }
        // purely local SVMs: each node trains only on its own shard
        let agents = build_svm_instance(dataset, cfg.n_agents, *c_param, None)?;
        for (i, agent) in agents.iter().enumerate() {
            let local = solve_consensus(std::slice::from_ref(agent), None, oracle_opts)?;
            rows.push(BoundaryRow {
                method: format!("local_node{i}"),
                c_param: *c_param,
                wx: local.x_central[0],
                wy: local.x_central[1],
                b: local.x_central[2],
            });
        }
    }
    Ok(rows)
}

/// Pointwise mean of a metric column across the replications of one case.
/// All replications share the log schedule, so rows align by index.
pub fn averaged_curve<F>(runs: &[&RunReport], column: F) -> Vec<(usize, f64)>
where
    F: Fn(&crate::metrics_bounds::IterationMetrics) -> f64,
{
    if runs.is_empty() {
        return Vec::new();
    }
    let rows = runs[0].rows.len();
    let mut out = Vec::with_capacity(rows);
    for j in 0..rows {
        let k = runs[0].rows[j].k;
        let mean = runs
            .iter()
            .map(|r| column(&r.rows[j]))
            .sum::<f64>()
            / runs.len() as f64;
        out.push((k, mean));
    }
    out
}

/// Spearman rank correlation between `xs` and `ys` (average ranks on ties).
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &item in &idx[i..=j] {
                ranks[item] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..xs.len() {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx).powi(2);
        vy += (ry[i] - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

impl SvmSuite {
    /// Replication reports of one case, in replication order.
    pub fn case_reports(&self, c_param: f64, lam: f64, topology: &str) -> Vec<&RunReport> {
        self.runs
            .iter()
            .filter(|r| {
                r.c_param == c_param && r.lambda2_target == lam && r.topology == topology
            })
            .filter_map(|r| r.report.as_ref())
            .collect()
    }

    /// Writes per-run metric CSVs, the boundary dump and a JSON summary.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for run in &self.runs {
            if let Some(report) = &run.report {
                std::fs::write(dir.join(format!("{}.csv", run.label())), report.to_metrics_csv())?;
            }
        }
        let mut boundary = String::from("method,c,wx,wy,b\n");
        for row in &self.boundary {
            boundary.push_str(&format!(
                "{},{},{},{},{}\n",
                row.method,
                row.c_param,
                fmt_e12(row.wx),
                fmt_e12(row.wy),
                fmt_e12(row.b)
            ));
        }
        std::fs::write(dir.join("boundary.csv"), boundary)?;

        for &c_param in &self.config.c_values {
            for &lam in &self.config.lambda2_targets {
                for topo in ["static", "dynamic"] {
                    let reports = self.case_reports(c_param, lam, topo);
                    if reports.is_empty() {
                        continue;
                    }
                    let sub = averaged_curve(&reports, |m| m.subopt);
                    let inf = averaged_curve(&reports, |m| m.infeas_sum);
                    let cv = averaged_curve(&reports, |m| m.cons_viol);
                    let mut csv = String::from("k,subopt_mean,infeas_mean,cons_viol_mean\n");
                    for j in 0..sub.len() {
                        csv.push_str(&format!(
                            "{},{},{},{}\n",
                            sub[j].0,
                            fmt_e12(sub[j].1),
                            fmt_e12(inf[j].1),
                            fmt_e12(cv[j].1)
                        ));
                    }
                    std::fs::write(
                        dir.join(format!("avg_C{c_param}_lam{lam:.2}_{topo}.csv")),
                        csv,
                    )?;
                }
            }
        }

        let summary = serde_json::to_string_pretty(&SuiteSummary::of(self))
            .map_err(|e| crate::error::Error::Parse(format!("summary: {e}")))?;
        std::fs::write(dir.join("suite_summary.json"), summary)?;
        Ok(())
    }
}

/// Compact JSON summary: config echo plus one line per run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub config: SvmSuiteConfig,
    pub oracle_objectives: Vec<(f64, f64)>,
    pub runs: Vec<RunLine>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLine {
    pub label: String,
    pub lambda2_actual: f64,
    pub comms: Option<usize>,
    pub final_subopt: Option<f64>,
    pub final_cons_viol: Option<f64>,
    pub error: Option<String>,
}

impl SuiteSummary {
    pub fn of(suite: &SvmSuite) -> Self {
        SuiteSummary {
            config: suite.config.clone(),
            oracle_objectives: suite
                .oracles
                .iter()
                .map(|(c, s)| (*c, s.objective))
                .collect(),
            runs: suite
                .runs
                .iter()
                .map(|r| RunLine {
                    label: r.label(),
                    lambda2_actual: r.lambda2_actual,
                    comms: r.report.as_ref().map(|rep| rep.comm_total),
                    final_subopt: r.report.as_ref().and_then(|rep| {
                        rep.rows.last().map(|m| m.subopt)
                    }),
                    final_cons_viol: r.report.as_ref().and_then(|rep| {
                        rep.rows.last().map(|m| m.cons_viol)
                    }),
                    error: r.error.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_on_monotone_data() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        assert!((spearman_rho(&xs, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&xs, &[9.0, 7.0, 5.0, 3.0]) + 1.0).abs() < 1e-12);
        assert!(spearman_rho(&xs, &[1.0, 1.0, 1.0, 1.0]).abs() < 1e-12);
    }

    #[test]
    fn replication_determinism_bitwise() {
        // a deliberately tiny grid; same seed must give byte-identical output
        let cfg = SvmSuiteConfig {
            c_values: vec![2.0],
            lambda2_targets: vec![1.0],
            replications: 1,
            k_static: 300,
            k_dynamic: 100,
            log_points: 6,
            oracle_tol: 1e-2,
            oracle_max_iter: 20_000,
            ..SvmSuiteConfig::default()
        };
        let a = run_experiment_suite(&cfg).unwrap();
        let b = run_experiment_suite(&cfg).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
        let ra = a.runs[0].report.as_ref().unwrap().to_metrics_csv();
        let rb = b.runs[0].report.as_ref().unwrap().to_metrics_csv();
        assert_eq!(ra, rb);
    }

    #[test]
    fn averaged_curve_is_pointwise_mean() {
        use crate::dpda_static::StepSizes;
        let steps = StepSizes {
            gamma: 1.0,
            tau: vec![0.5],
            kappa: vec![1.0],
        };
        let mk = |vals: &[f64]| {
            let mut r = RunReport::new("static", &steps, &RunOptions::quiet());
            for (i, &v) in vals.iter().enumerate() {
                r.rows.push(crate::metrics_bounds::IterationMetrics {
                    k: i + 1,
                    comms: i + 1,
                    objective: v,
                    subopt: v,
                    infeas: vec![0.0],
                    infeas_sum: 0.0,
                    cons_viol: 0.0,
                    d_ctilde: 0.0,
                    bound_value: f64::NAN,
                });
            }
            r
        };
        let a = mk(&[4.0, 2.0]);
        let b = mk(&[2.0, 0.0]);
        let avg = averaged_curve(&[&a, &b], |m| m.subopt);
        assert_eq!(avg, vec![(1, 3.0), (2, 1.0)]);
    }
}
