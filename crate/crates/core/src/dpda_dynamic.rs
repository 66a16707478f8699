//! Distributed primal-dual solver for time-varying topologies. The exact
//! consensus projection is replaced by `q_k` gossip rounds followed by a ball
//! projection; the resulting inexactness is tracked by a diagnostic error
//! sequence that is only computable with global knowledge.

use nalgebra::DVector;

use crate::dpda_static::{validate_problem_set, AgentProblem, StepSizes};
use crate::error::{Error, Result};
use crate::metrics_bounds::{RunOptions, RunReport};
use crate::network::{exact_consensus_projection, multi_consensus, MixingProcess};
use crate::stacked::{self, Stacked};

/// Number of consensus rounds at iteration `k`: the smallest integer `q >= 1`
/// with `q^p >= k`, i.e. `ceil(k^{1/p})` computed robustly against floating
/// point at perfect powers.
pub fn consensus_schedule(k: usize, p: f64) -> Result<usize> {
    if k < 1 {
        return Err(Error::invalid("iteration index must be >= 1"));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("schedule exponent p must be >= 1, got {p}")));
    }
    let kf = k as f64;
    let mut q = kf.powf(1.0 / p).ceil().max(1.0) as usize;
    let ge = |q: usize| (q as f64).powf(p) >= kf - 1e-9 * kf.max(1.0);
    while q > 1 && ge(q - 1) {
        q -= 1;
    }
    while !ge(q) {
        q += 1;
    }
    Ok(q)
}

/// Configuration for the dynamic solver.
#[derive(Debug, Clone)]
pub struct DynamicConfig {
    /// Consensus-schedule exponent (`q_k = ceil(k^{1/p})`).
    pub p: f64,
    /// Radius of the ball containing every agent's shared-block domain.
    pub b_radius: f64,
    pub steps: StepSizes,
    /// Fixed round count overriding the schedule (diagnostic use).
    pub q_override: Option<usize>,
    /// Replace the gossip approximation by the exact consensus projection
    /// (diagnostic reference; communication is still accounted as `q_k`).
    pub exact_projection: bool,
}

impl DynamicConfig {
    pub fn new(p: f64, b_radius: f64, steps: StepSizes) -> Self {
        DynamicConfig {
            p,
            b_radius,
            steps,
            q_override: None,
            exact_projection: false,
        }
    }

    pub fn validate(&self, problems: &[AgentProblem]) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(Error::invalid("p must be >= 1"));
        }
        if self.b_radius <= 0.0 {
            return Err(Error::invalid("domain radius B must be positive"));
        }
        self.steps.validate_dynamic(problems)?;
        let n_s = validate_problem_set(problems)?;
        for (i, p) in problems.iter().enumerate() {
            match p.rho.shared_domain_radius(n_s) {
                Some(r) if r <= self.b_radius + 1e-12 => {}
                Some(r) => {
                    return Err(Error::invalid(format!(
                        "agent {i} shared-block domain radius {r} exceeds B = {}",
                        self.b_radius
                    )))
                }
                None => {
                    return Err(Error::invalid(format!(
                        "agent {i} needs a ball or box component bounding the shared block"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn rounds_at(&self, k: usize) -> Result<usize> {
        match self.q_override {
            Some(q) if q >= 1 => Ok(q),
            Some(_) => Err(Error::invalid("q override must be >= 1")),
            None => consensus_schedule(k, self.p),
        }
    }
}

/// Step sizes `tau_i = 1/(c_i + L_i + gamma)`, `kappa_i = c_i / sigma^2`
/// meeting the dynamic condition with nonnegative slack (same fallback for
/// degenerate constraints as the static selector).
pub fn select_stepsizes_dynamic(
    problems: &[AgentProblem],
    gamma: f64,
    c: &[f64],
) -> Result<StepSizes> {
    if gamma <= 0.0 {
        return Err(Error::invalid("gamma must be positive"));
    }
    if c.len() != problems.len() {
        return Err(Error::dim("c vector", problems.len(), c.len()));
    }
    let mut tau = Vec::new();
    let mut kappa = Vec::new();
    for (i, p) in problems.iter().enumerate() {
        if c[i] <= 0.0 {
            return Err(Error::invalid("c_i must be positive"));
        }
        tau.push(1.0 / (c[i] + p.lipschitz + gamma));
        let s2 = p.sigma_max_a * p.sigma_max_a;
        kappa.push(if s2 > 0.0 { c[i] / s2 } else { c[i] });
    }
    let steps = StepSizes { gamma, tau, kappa };
    steps.validate_dynamic(problems)?;
    Ok(steps)
}

pub fn select_stepsizes_dynamic_uniform(
    problems: &[AgentProblem],
    gamma: f64,
    c: f64,
) -> Result<StepSizes> {
    select_stepsizes_dynamic(problems, gamma, &vec![c; problems.len()])
}

#[derive(Debug, Clone)]
pub struct DynamicState {
    pub x: Stacked,
    /// Inexact consensus dual, one shared-dimension block per agent.
    pub mu: Stacked,
    pub theta: Vec<DVector<f64>>,
    pub x_sum: Stacked,
    pub iter: usize,
    pub comms: usize,
}

impl DynamicState {
    /// Fresh state with `mu^0 = 0`, `theta^0 = 0`.
    pub fn new(problems: &[AgentProblem], x0: &Stacked) -> Result<Self> {
        let n_s = validate_problem_set(problems)?;
        if x0.len() != problems.len() {
            return Err(Error::dim("initial point blocks", problems.len(), x0.len()));
        }
        for (i, p) in problems.iter().enumerate() {
            if x0[i].len() != p.dim() {
                return Err(Error::dim("initial point block", p.dim(), x0[i].len()));
            }
        }
        Ok(DynamicState {
            x: x0.clone(),
            mu: (0..problems.len()).map(|_| DVector::zeros(n_s)).collect(),
            theta: problems
                .iter()
                .map(|p| DVector::zeros(p.constraint_rows()))
                .collect(),
            x_sum: x0.iter().map(|b| DVector::zeros(b.len())).collect(),
            iter: 0,
            comms: 0,
        })
    }

    pub fn ergodic_average(&self) -> Stacked {
        if self.iter == 0 {
            return self.x.clone();
        }
        let inv = 1.0 / self.iter as f64;
        self.x_sum.iter().map(|b| b * inv).collect()
    }
}

/// Per-step diagnostics returned by [`dpda_d_step`].
#[derive(Debug, Clone, Copy)]
pub struct DynamicStepDiag {
    pub rounds: usize,
    /// `||mu^{k+1}||` over the stacked shared blocks.
    pub mu_norm: f64,
    /// `||e^{k+1}||` against the exact projection; only filled in shadow mode.
    pub error_norm: Option<f64>,
}

/// One synchronous round. `shadow` additionally evaluates the exact consensus
/// projection to expose the proximal error norm (global knowledge; never used
/// by the update itself).
pub fn dpda_d_step(
    state: &mut DynamicState,
    problems: &[AgentProblem],
    process: &mut MixingProcess,
    config: &DynamicConfig,
    shadow: bool,
) -> Result<DynamicStepDiag> {
    let n_s = problems[0].shared_dim;
    let n = problems.len();
    let k = state.iter + 1;
    let gamma = config.steps.gamma;

    // primal pass
    let mut x_new: Stacked = Vec::with_capacity(n);
    for i in 0..n {
        let p = &problems[i];
        let (_, grad) = p.f.eval(&state.x[i])?;
        let mut dir = grad;
        if p.constraint_rows() > 0 {
            dir += p.a_matrix.transpose() * &state.theta[i];
        }
        dir.rows_mut(0, n_s).axpy(1.0, &state.mu[i], 1.0);
        let arg = &state.x[i] - config.steps.tau[i] * dir;
        let xi = p.rho.prox(&arg, config.steps.tau[i])?;
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: k,
                agent: i,
                detail: "non-finite primal iterate".into(),
            });
        }
        x_new.push(xi);
    }

    // inexact consensus projection on the shared blocks
    let rounds = config.rounds_at(k)?;
    let extrap: Stacked = (0..n)
        .map(|i| {
            let block = 2.0 * x_new[i].rows(0, n_s) - state.x[i].rows(0, n_s);
            &state.mu[i] / gamma + block
        })
        .collect();
    let approx = if config.exact_projection {
        // advance the process so communication accounting stays comparable
        for _ in 0..rounds {
            let _ = process.next_matrix();
        }
        exact_consensus_projection(&extrap, config.b_radius)
    } else {
        multi_consensus(process, &extrap, rounds, config.b_radius)?
    };
    state.comms += rounds;

    let error_norm = if shadow {
        let exact = exact_consensus_projection(&extrap, config.b_radius);
        Some(stacked::distance(&exact, &approx))
    } else {
        None
    };

    for i in 0..n {
        let block = 2.0 * x_new[i].rows(0, n_s) - state.x[i].rows(0, n_s);
        state.mu[i] += gamma * (block - &approx[i]);
        if state.mu[i].iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: k,
                agent: i,
                detail: "non-finite consensus dual".into(),
            });
        }
    }

    // conic dual pass
    for i in 0..n {
        let p = &problems[i];
        if p.constraint_rows() > 0 {
            let two_minus_old = 2.0 * &x_new[i] - &state.x[i];
            let drift = &p.a_matrix * two_minus_old - &p.b_vec;
            let arg = &state.theta[i] + config.steps.kappa[i] * drift;
            state.theta[i] = p.cone.project_polar(&arg)?;
            if state.theta[i].iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    iteration: k,
                    agent: i,
                    detail: "non-finite conic dual".into(),
                });
            }
        }
    }

    for i in 0..n {
        state.x_sum[i] += &x_new[i];
        state.x[i] = x_new[i].clone();
    }
    state.iter = k;
    Ok(DynamicStepDiag {
        rounds,
        mu_norm: stacked::norm(&state.mu),
        error_norm,
    })
}

/// Runs `K` rounds with `mu^0 = theta^0 = 0`. In shadow mode the report logs
/// the error-sequence norms and the run enforces the growth bounds
/// `||mu^k|| <= 4 gamma sqrt(N) B k` and
/// `||e^{k+1}|| <= 4 N^{3/2} B Gamma alpha^{q_k} (k+1)`.
pub fn dpda_d_run(
    problems: &[AgentProblem],
    process: &mut MixingProcess,
    config: &DynamicConfig,
    x0: &Stacked,
    iterations: usize,
    opts: &RunOptions,
) -> Result<RunReport> {
    if iterations == 0 {
        return Err(Error::invalid("iteration count must be >= 1"));
    }
    config.validate(problems)?;
    if process.graph().node_count() != problems.len() {
        return Err(Error::dim(
            "process nodes",
            problems.len(),
            process.graph().node_count(),
        ));
    }
    let mut state = DynamicState::new(problems, x0)?;
    let schedule = opts.log.points(iterations);
    let mut report = RunReport::new("dynamic", &config.steps, opts);
    report.set_x0(x0);
    let constants = process.constants();
    let n = problems.len() as f64;
    let graph = process.graph().clone();

    let mut next_log = 0usize;
    for k in 1..=iterations {
        let diag = dpda_d_step(&mut state, problems, process, config, opts.diagnostic_shadow)?;
        report.q_history.push(diag.rounds);
        if opts.diagnostic_shadow {
            let mu_bound = 4.0 * config.steps.gamma * n.sqrt() * config.b_radius * k as f64;
            if diag.mu_norm > mu_bound + 1e-9 {
                return Err(Error::invalid(format!(
                    "consensus-dual growth bound violated at k={k}: {} > {mu_bound}",
                    diag.mu_norm
                )));
            }
            let e = diag.error_norm.unwrap_or(0.0);
            let e_bound = 4.0
                * n.powf(1.5)
                * config.b_radius
                * constants.gamma_mix
                * constants.alpha.powi(diag.rounds as i32)
                * (k as f64 + 1.0);
            if e > e_bound + 1e-9 {
                return Err(Error::invalid(format!(
                    "projection-error bound violated at k={k}: {e} > {e_bound}"
                )));
            }
            report.e_norms.push(e);
            report.mu_norms.push(diag.mu_norm);
        }
        if next_log < schedule.len() && schedule[next_log] == k {
            next_log += 1;
            let xbar = state.ergodic_average();
            report.log_consensus_row(problems, &graph, &xbar, k, state.comms, opts);
        }
    }
    report.finish(state.ergodic_average(), state.x.clone(), state.comms, iterations);
    Ok(report)
}
