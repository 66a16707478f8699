//! Time-varying mixing: Metropolis weight matrices over activated edge
//! subsets, connectivity-window guarantees, geometric mixing constants, and
//! the multi-consensus approximation of the consensus projection.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::network::Graph;
use crate::stacked::{ball_project, Stacked};

/// Metropolis weights on the active subgraph: `V_ij = 1/(1 + max(d_i, d_j))`
/// for active `(i, j)` with degrees taken in the active subgraph, and
/// `V_ii = 1 - sum_j V_ij`. Symmetric and doubly stochastic; every nonzero
/// entry is at least `1/N`.
pub fn metropolis_matrix(graph: &Graph, active: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    let n = graph.node_count();
    let edge_set: std::collections::HashSet<(usize, usize)> =
        graph.edges().iter().cloned().collect();
    let mut degrees = vec![0usize; n];
    for &(a, b) in active {
        let e = (a.min(b), a.max(b));
        if !edge_set.contains(&e) {
            return Err(Error::invalid(format!(
                "active edge ({}, {}) not in base graph",
                e.0, e.1
            )));
        }
        degrees[e.0] += 1;
        degrees[e.1] += 1;
    }
    let mut v = DMatrix::zeros(n, n);
    for &(a, b) in active {
        let (i, j) = (a.min(b), a.max(b));
        let w = 1.0 / (1.0 + degrees[i].max(degrees[j]) as f64);
        v[(i, j)] = w;
        v[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| v[(i, j)]).sum();
        v[(i, i)] = 1.0 - off;
    }
    Ok(v)
}

/// Edge activation policy for the mixing process.
#[derive(Debug, Clone, PartialEq)]
pub enum ActivationPolicy {
    /// Every edge of the base graph is active in every round.
    AlwaysFull,
    /// Each edge is active independently with probability `prob`, except that
    /// every `period`-th round activates the full edge set, which guarantees
    /// window connectivity by construction.
    BernoulliEdges { prob: f64, period: usize },
}

/// Doubly stochastic mixing-matrix process over a connected base graph.
///
/// Holds a step counter and its own RNG; emitted matrices satisfy the
/// uniform weight floor `zeta = 1/N` by the Metropolis construction.
#[derive(Debug, Clone)]
pub struct MixingProcess {
    graph: Graph,
    policy: ActivationPolicy,
    rng: ChaCha12Rng,
    step: usize,
}

impl MixingProcess {
    pub fn new(graph: Graph, policy: ActivationPolicy, seed: u64) -> Result<Self> {
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        if let ActivationPolicy::BernoulliEdges { prob, period } = &policy {
            if !(0.0..=1.0).contains(prob) {
                return Err(Error::invalid("activation probability outside [0, 1]"));
            }
            if *period == 0 {
                return Err(Error::invalid("forced-full period must be >= 1"));
            }
        }
        Ok(MixingProcess {
            graph,
            policy,
            rng: ChaCha12Rng::seed_from_u64(seed),
            step: 0,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Uniform positive lower bound on nonzero weights (Metropolis floor).
    pub fn zeta(&self) -> f64 {
        1.0 / self.graph.node_count() as f64
    }

    /// Connectivity window length implied by the activation policy.
    pub fn window(&self) -> usize {
        match self.policy {
            ActivationPolicy::AlwaysFull => 1,
            ActivationPolicy::BernoulliEdges { period, .. } => period,
        }
    }

    pub fn constants(&self) -> MixingConstants {
        let n = self.graph.node_count();
        if n == 1 {
            // single node: mixing is exact, the product bound is 0
            return MixingConstants {
                gamma_mix: 0.0,
                alpha: 0.0,
                t_bar: self.window(),
            };
        }
        mixing_constants(self.zeta(), self.window(), n)
            .expect("process parameters satisfy the constant preconditions")
    }

    /// Emits the next mixing matrix and advances the step counter.
    pub fn next_matrix(&mut self) -> DMatrix<f64> {
        let active: Vec<(usize, usize)> = match &self.policy {
            ActivationPolicy::AlwaysFull => self.graph.edges().to_vec(),
            ActivationPolicy::BernoulliEdges { prob, period } => {
                if self.step % period == 0 {
                    self.graph.edges().to_vec()
                } else {
                    let p = *prob;
                    self.graph
                        .edges()
                        .iter()
                        .cloned()
                        .filter(|_| self.rng.gen_bool(p))
                        .collect()
                }
            }
        };
        self.step += 1;
        metropolis_matrix(&self.graph, &active).expect("active subset comes from the base graph")
    }
}

/// Geometric mixing constants of the weight-matrix products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingConstants {
    pub gamma_mix: f64,
    pub alpha: f64,
    pub t_bar: usize,
}

/// `T_bar = (N-1) T`, `Gamma = 2 (1 + zeta^{-T_bar}) / (1 - zeta^{T_bar})`,
/// `alpha = (1 - zeta^{T_bar})^{1/T_bar}`.
pub fn mixing_constants(zeta: f64, window: usize, nodes: usize) -> Result<MixingConstants> {
    if !(0.0..1.0).contains(&zeta) || zeta <= 0.0 {
        return Err(Error::invalid(format!("zeta {zeta} outside (0, 1)")));
    }
    if window < 1 || nodes < 2 {
        return Err(Error::invalid("need window >= 1 and at least 2 nodes"));
    }
    let t_bar = (nodes - 1) * window;
    let z_pow = zeta.powi(t_bar as i32);
    let gamma_mix = 2.0 * (1.0 + 1.0 / z_pow) / (1.0 - z_pow);
    let alpha = (1.0 - z_pow).powf(1.0 / t_bar as f64);
    Ok(MixingConstants {
        gamma_mix,
        alpha,
        t_bar,
    })
}

/// Applies `q` successive mixing rounds to the stacked blocks and projects
/// each node's block onto the centered ball of radius `ball_radius`. Each
/// round is one communication per node; the process advances by `q` steps.
pub fn multi_consensus(
    process: &mut MixingProcess,
    x: &Stacked,
    q: usize,
    ball_radius: f64,
) -> Result<Stacked> {
    if q == 0 {
        return Err(Error::invalid("consensus step count must be >= 1"));
    }
    if ball_radius <= 0.0 {
        return Err(Error::invalid("ball radius must be positive"));
    }
    let n = process.graph.node_count();
    if x.len() != n {
        return Err(Error::dim("multi-consensus blocks", n, x.len()));
    }
    let mut cur = x.clone();
    for _ in 0..q {
        let v = process.next_matrix();
        cur = mix_once(&v, &cur);
    }
    Ok(cur.iter().map(|b| ball_project(b, ball_radius)).collect())
}

/// One mixing round `out_i = sum_j V_ij x_j`, skipping structural zeros so a
/// node only touches active-neighbor blocks.
pub fn mix_once(v: &DMatrix<f64>, x: &Stacked) -> Stacked {
    let n = x.len();
    let mut out: Stacked = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = DVector::zeros(x[i].len());
        for j in 0..n {
            let w = v[(i, j)];
            if w != 0.0 {
                acc.axpy(w, &x[j], 1.0);
            }
        }
        out.push(acc);
    }
    out
}

/// Exact consensus projection `P_C` onto `{1 ⊗ xbar : ||xbar|| <= B}`:
/// every block becomes the ball-projected uniform average. Computed with the
/// same operation order as a single uniform mixing round, so it matches the
/// multi-consensus path bitwise on a complete graph with full activation.
pub fn exact_consensus_projection(x: &Stacked, ball_radius: f64) -> Stacked {
    let n = x.len();
    let w = 1.0 / n as f64;
    let mut mean = DVector::zeros(x[0].len());
    for b in x {
        mean.axpy(w, b, 1.0);
    }
    let p = ball_project(&mean, ball_radius);
    (0..n).map(|_| p.clone()).collect()
}
