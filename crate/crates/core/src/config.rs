//! Run configuration: TOML files with exact key names, strict unknown-key
//! rejection, CLI overrides, and the file formats shared by the front end
//! (vector text, graph edge list).

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::dpda_resource::ResourceAgentProblem;
use crate::dpda_static::AgentProblem;
use crate::error::{Error, Result};
use crate::experiments;
use crate::network::{generate_graph_best_effort, Graph};
use crate::stacked::Stacked;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Static,
    Dynamic,
    Resource,
}

fn default_gamma() -> f64 {
    1.0
}
fn default_c() -> f64 {
    1.0
}
fn default_p() -> f64 {
    2.0
}
fn default_prob() -> f64 {
    0.5
}
fn default_window() -> usize {
    3
}
fn default_log_points() -> usize {
    50
}

/// One solver run. Field names are the config-file keys; unknown keys are
/// rejected at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub solver: SolverKind,
    #[serde(rename = "K")]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Remark-style margin for static/dynamic step sizes.
    #[serde(default = "default_c")]
    pub c_i: f64,
    /// Margin `a_i` for resource step sizes.
    #[serde(default = "default_c")]
    pub margin: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Shared-block domain radius (dynamic runs).
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    pub b_radius: Option<f64>,
    /// Dual ball radius (resource runs); derived from `slater_point` if absent.
    #[serde(rename = "B_d", skip_serializing_if = "Option::is_none", default)]
    pub b_dual: Option<f64>,
    #[serde(default = "default_prob")]
    pub activation_prob: f64,
    #[serde(rename = "T_window", default = "default_window")]
    pub t_window: usize,
    #[serde(default)]
    pub diagnostic_shadow: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_fixed: Option<usize>,
    #[serde(default)]
    pub exact_projection: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x0_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slater_point: Option<PathBuf>,
    #[serde(default = "default_log_points")]
    pub log_points: usize,
    #[serde(default)]
    pub snapshots: bool,
    /// Solve the centralized oracle and fill suboptimality columns.
    #[serde(default)]
    pub with_oracle: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub graph: Option<GraphSpec>,
    pub problem: ProblemSpec,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nodes: Option<usize>,
    /// Target algebraic connectivity for generated graphs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda2: Option<f64>,
    #[serde(default = "default_graph_tol")]
    pub tolerance: f64,
    /// Fixed topology: `complete`, `ring`, `path`, `star`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub topology: Option<String>,
}

fn default_graph_tol() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// One of: `toy1`, `toy2`, `qp5`, `svm`, `resource_toy1`,
    /// `resource_toy2`, `resource4`.
    pub name: String,
    /// SVM cost parameter.
    #[serde(rename = "C", skip_serializing_if = "Option::is_none", default)]
    pub c_param: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config echo: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        if self.gamma <= 0.0 || self.c_i <= 0.0 || self.margin <= 0.0 {
            return Err(Error::Config("gamma, c_i and margin must be positive".into()));
        }
        if self.p < 1.0 {
            return Err(Error::Config("p must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.activation_prob) {
            return Err(Error::Config("activation_prob must be in [0, 1]".into()));
        }
        if self.t_window == 0 {
            return Err(Error::Config("T_window must be >= 1".into()));
        }
        let is_resource = matches!(self.solver, SolverKind::Resource);
        if is_resource != self.problem.name.starts_with("resource") {
            return Err(Error::Config(format!(
                "problem {:?} does not match solver kind",
                self.problem.name
            )));
        }
        Ok(())
    }

    /// Number of agents implied by the problem spec (SVM follows the graph).
    fn implied_agents(&self) -> Option<usize> {
        match self.problem.name.as_str() {
            "toy1" | "resource_toy1" => Some(1),
            "toy2" | "resource_toy2" => Some(2),
            "qp5" => Some(5),
            "resource4" => Some(4),
            _ => None,
        }
    }

    /// Resolves the communication graph; defaults depend on the problem.
    pub fn resolve_graph(&self) -> Result<Graph> {
        if let Some(spec) = &self.graph {
            if let Some(file) = &spec.file {
                return Graph::read_edge_list(file);
            }
            let nodes = spec
                .nodes
                .or_else(|| self.implied_agents())
                .ok_or_else(|| Error::Config("graph.nodes required".into()))?;
            if let Some(topology) = &spec.topology {
                return match topology.as_str() {
                    "complete" => Ok(Graph::complete(nodes)),
                    "ring" => Ok(Graph::ring(nodes)),
                    "path" => Ok(Graph::path(nodes)),
                    "star" => Ok(Graph::star(nodes)),
                    other => Err(Error::Config(format!("unknown topology {other:?}"))),
                };
            }
            if let Some(lambda2) = spec.lambda2 {
                let seed = rand::Rng::gen::<u64>(&mut catalog::substream(self.seed, "graph"));
                let (g, _) = generate_graph_best_effort(nodes, lambda2, spec.tolerance, seed);
                return Ok(g);
            }
            return Ok(Graph::complete(nodes));
        }
        let nodes = self
            .implied_agents()
            .ok_or_else(|| Error::Config("a [graph] section is required for this problem".into()))?;
        Ok(match nodes {
            1 => Graph::new(1, vec![]).expect("single node"),
            2 => Graph::path(2),
            n => Graph::ring(n),
        })
    }

    /// Builds the consensus problem set named in the config.
    pub fn build_consensus_problems(&self, n_agents: usize) -> Result<Vec<AgentProblem>> {
        let bounded = match self.solver {
            SolverKind::Dynamic => Some(self.b_radius.ok_or_else(|| {
                Error::Config("B is required for dynamic runs".into())
            })?),
            _ => None,
        };
        match self.problem.name.as_str() {
            "svm" => {
                let c_param = self
                    .problem
                    .c_param
                    .ok_or_else(|| Error::Config("problem.C required for svm".into()))?;
                let dataset = experiments::generate_svm_data(self.seed);
                experiments::build_svm_instance(&dataset, n_agents, c_param, bounded)
            }
            name => {
                let set = catalog::consensus_by_name(name, self.seed, bounded)?;
                if set.len() != n_agents {
                    return Err(Error::Config(format!(
                        "problem {:?} has {} agents but the graph has {n_agents} nodes",
                        name,
                        set.len()
                    )));
                }
                Ok(set)
            }
        }
    }

    pub fn build_resource_problems(&self) -> Result<Vec<ResourceAgentProblem>> {
        catalog::resource_by_name(&self.problem.name, self.seed)
    }
}

/// Plain-text vector file: one float per line (blank lines and `#` comments
/// ignored), node blocks concatenated in order.
pub fn parse_vector_file(path: &Path, dims: &[usize]) -> Result<Stacked> {
    let text = std::fs::read_to_string(path)?;
    let values: Vec<f64> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad vector entry {l:?}")))
        })
        .collect::<Result<_>>()?;
    let total: usize = dims.iter().sum();
    if values.len() != total {
        return Err(Error::dim("vector file entries", total, values.len()));
    }
    let mut out = Vec::with_capacity(dims.len());
    let mut off = 0;
    for &d in dims {
        out.push(DVector::from_vec(values[off..off + d].to_vec()));
        off += d;
    }
    Ok(out)
}

pub fn write_vector_file(path: &Path, x: &Stacked) -> Result<()> {
    let mut s = String::new();
    for block in x {
        for v in block.iter() {
            s.push_str(&format!("{v}\n"));
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY2: &str = r#"
solver = "static"
K = 1000
seed = 7
gamma = 1.0
c_i = 1.0

[problem]
name = "toy2"
"#;

    #[test]
    fn parse_and_echo_round_trip() {
        let cfg = RunConfig::from_toml(TOY2).unwrap();
        assert_eq!(cfg.solver, SolverKind::Static);
        assert_eq!(cfg.iterations, 1000);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.p, 2.0);
        let echo = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&echo).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = TOY2.replace("c_i = 1.0", "c_i = 1.0\nmystery_knob = 3");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad2 = TOY2.replace("name = \"toy2\"", "name = \"toy2\"\nextra = 1");
        assert!(RunConfig::from_toml(&bad2).is_err());
    }

    #[test]
    fn solver_problem_mismatch_rejected() {
        let bad = TOY2.replace("solver = \"static\"", "solver = \"resource\"");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn default_graphs_match_problem_sizes() {
        let cfg = RunConfig::from_toml(TOY2).unwrap();
        let g = cfg.resolve_graph().unwrap();
        assert_eq!(g.node_count(), 2);
        let problems = cfg.build_consensus_problems(2).unwrap();
        assert_eq!(problems.len(), 2);
    }

    #[test]
    fn dynamic_requires_domain_radius() {
        let text = TOY2
            .replace("solver = \"static\"", "solver = \"dynamic\"")
            .replace("name = \"toy2\"", "name = \"qp5\"");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert!(cfg.build_consensus_problems(5).is_err());
        let with_b = text.replace("K = 1000", "K = 1000\nB = 10.0");
        let cfg2 = RunConfig::from_toml(&with_b).unwrap();
        assert!(cfg2.build_consensus_problems(5).is_ok());
    }

    #[test]
    fn vector_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x0.txt");
        let x: Stacked = vec![
            DVector::from_vec(vec![1.5, -2.0]),
            DVector::from_vec(vec![0.25]),
        ];
        write_vector_file(&path, &x).unwrap();
        let back = parse_vector_file(&path, &[2, 1]).unwrap();
        assert_eq!(x, back);
        assert!(parse_vector_file(&path, &[2, 2]).is_err());
    }
}
