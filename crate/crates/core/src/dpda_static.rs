//! Distributed primal-dual solver for consensus optimization over a static
//! connected graph, with per-agent conic constraints.
//!
//! Each synchronous round exchanges the running-sum variable `s` with
//! neighbors once, then every agent takes a prox-gradient step, updates its
//! running sum, and projects its conic dual onto the polar cone.

use nalgebra::{DMatrix, DVector};

use crate::cones_prox::{Cone, ProxFunction, SmoothFunction};
use crate::error::{Error, Result};
use crate::metrics_bounds::{RunOptions, RunReport};
use crate::network::Graph;
use crate::stacked::Stacked;

/// One agent's composite objective `rho_i + f_i` and conic constraint
/// `A_i x - b_i in K_i` over a variable of dimension `shared_dim + local_dim`.
/// `local_dim = 0` recovers the fully-coupled problem; with `local_dim > 0`
/// only the leading `shared_dim` coordinates are consensus-coupled.
#[derive(Debug, Clone)]
pub struct AgentProblem {
    pub shared_dim: usize,
    pub local_dim: usize,
    pub rho: ProxFunction,
    pub f: SmoothFunction,
    /// Lipschitz constant of `grad f`.
    pub lipschitz: f64,
    pub a_matrix: DMatrix<f64>,
    pub b_vec: DVector<f64>,
    pub cone: Cone,
    /// Largest singular value of `A_i`, computed on construction.
    pub sigma_max_a: f64,
}

pub(crate) fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

impl AgentProblem {
    pub fn new(
        shared_dim: usize,
        local_dim: usize,
        rho: ProxFunction,
        f: SmoothFunction,
        a_matrix: DMatrix<f64>,
        b_vec: DVector<f64>,
        cone: Cone,
    ) -> Result<Self> {
        let dim = shared_dim + local_dim;
        if dim == 0 {
            return Err(Error::invalid("agent variable has dimension zero"));
        }
        if a_matrix.ncols() != dim && a_matrix.nrows() > 0 {
            return Err(Error::dim("constraint matrix columns", dim, a_matrix.ncols()));
        }
        if a_matrix.nrows() != b_vec.len() {
            return Err(Error::dim("constraint rhs", a_matrix.nrows(), b_vec.len()));
        }
        if cone.dim() != a_matrix.nrows() {
            return Err(Error::dim("constraint cone", a_matrix.nrows(), cone.dim()));
        }
        rho.validate()?;
        let lipschitz = f.lipschitz();
        let sigma_max_a = sigma_max(&a_matrix);
        Ok(AgentProblem {
            shared_dim,
            local_dim,
            rho,
            f,
            lipschitz,
            a_matrix,
            b_vec,
            cone,
            sigma_max_a,
        })
    }

    /// Unconstrained agent (no conic rows).
    pub fn unconstrained(
        shared_dim: usize,
        local_dim: usize,
        rho: ProxFunction,
        f: SmoothFunction,
    ) -> Result<Self> {
        let dim = shared_dim + local_dim;
        AgentProblem::new(
            shared_dim,
            local_dim,
            rho,
            f,
            DMatrix::zeros(0, dim),
            DVector::zeros(0),
            Cone::Zero(0),
        )
    }

    pub fn dim(&self) -> usize {
        self.shared_dim + self.local_dim
    }

    pub fn constraint_rows(&self) -> usize {
        self.a_matrix.nrows()
    }

    /// `A_i x - b_i`.
    pub fn constraint_residual(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.constraint_rows() == 0 {
            return DVector::zeros(0);
        }
        &self.a_matrix * x - &self.b_vec
    }

    /// `d_{K_i}(A_i x - b_i)`.
    pub fn infeasibility(&self, x: &DVector<f64>) -> f64 {
        if self.constraint_rows() == 0 {
            return 0.0;
        }
        self.cone
            .distance(&self.constraint_residual(x))
            .expect("dims validated on construction")
    }

    /// `rho_i(x) + f_i(x)` with `tol` slack on indicator parts.
    pub fn objective(&self, x: &DVector<f64>, tol: f64) -> f64 {
        self.rho.value(x, tol) + self.f.value(x).expect("dims validated on construction")
    }
}

/// Validates a consensus problem set and returns the common shared dimension.
pub fn validate_problem_set(problems: &[AgentProblem]) -> Result<usize> {
    if problems.is_empty() {
        return Err(Error::invalid("empty problem set"));
    }
    let n_s = problems[0].shared_dim;
    if n_s == 0 {
        return Err(Error::invalid("shared dimension must be positive"));
    }
    if problems.iter().any(|p| p.shared_dim != n_s) {
        return Err(Error::invalid("agents disagree on the shared dimension"));
    }
    Ok(n_s)
}

/// Primal/dual step sizes shared by the solver family.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes {
    pub gamma: f64,
    pub tau: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl StepSizes {
    /// Checks `(1/tau_i - L_i - 2 gamma d_i) / kappa_i >= sigma_max(A_i)^2`.
    pub fn validate_static(&self, problems: &[AgentProblem], graph: &Graph) -> Result<()> {
        self.validate_lengths(problems.len())?;
        for (i, p) in problems.iter().enumerate() {
            let d_i = graph.degree(i) as f64;
            let lhs = (1.0 / self.tau[i] - p.lipschitz - 2.0 * self.gamma * d_i) / self.kappa[i];
            if lhs < p.sigma_max_a * p.sigma_max_a - 1e-9 {
                return Err(Error::invalid(format!(
                    "static step-size condition violated at agent {i}: {lhs} < {}",
                    p.sigma_max_a * p.sigma_max_a
                )));
            }
        }
        Ok(())
    }

    /// Checks `(1/tau_i - L_i - gamma) / kappa_i >= sigma_max(A_i)^2`.
    pub fn validate_dynamic(&self, problems: &[AgentProblem]) -> Result<()> {
        self.validate_lengths(problems.len())?;
        for (i, p) in problems.iter().enumerate() {
            let lhs = (1.0 / self.tau[i] - p.lipschitz - self.gamma) / self.kappa[i];
            if lhs < p.sigma_max_a * p.sigma_max_a - 1e-9 {
                return Err(Error::invalid(format!(
                    "dynamic step-size condition violated at agent {i}"
                )));
            }
        }
        Ok(())
    }

    fn validate_lengths(&self, n: usize) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(Error::invalid("gamma must be positive"));
        }
        if self.tau.len() != n || self.kappa.len() != n {
            return Err(Error::dim("step-size vectors", n, self.tau.len()));
        }
        if self.tau.iter().chain(&self.kappa).any(|&v| v <= 0.0) {
            return Err(Error::invalid("step sizes must be positive"));
        }
        Ok(())
    }
}

/// Step sizes `tau_i = 1/(c_i + L_i + 2 gamma d_i)`, `kappa_i = c_i /
/// sigma_max(A_i)^2`, which satisfy the static condition with slack `>= 0`.
/// Degenerate constraints (`sigma_max = 0`) fall back to `kappa_i = c_i`.
pub fn select_stepsizes_static(
    problems: &[AgentProblem],
    graph: &Graph,
    gamma: f64,
    c: &[f64],
) -> Result<StepSizes> {
    if gamma <= 0.0 {
        return Err(Error::invalid("gamma must be positive"));
    }
    if c.len() != problems.len() {
        return Err(Error::dim("c vector", problems.len(), c.len()));
    }
    if c.iter().any(|&ci| ci <= 0.0) {
        return Err(Error::invalid("c_i must be positive"));
    }
    if graph.node_count() != problems.len() {
        return Err(Error::dim("graph nodes", problems.len(), graph.node_count()));
    }
    let mut tau = Vec::with_capacity(problems.len());
    let mut kappa = Vec::with_capacity(problems.len());
    for (i, p) in problems.iter().enumerate() {
        let d_i = graph.degree(i) as f64;
        tau.push(1.0 / (c[i] + p.lipschitz + 2.0 * gamma * d_i));
        let s2 = p.sigma_max_a * p.sigma_max_a;
        kappa.push(if s2 > 0.0 { c[i] / s2 } else { c[i] });
    }
    let steps = StepSizes { gamma, tau, kappa };
    steps.validate_static(problems, graph)?;
    Ok(steps)
}

/// Uniform-`c` convenience wrapper.
pub fn select_stepsizes_static_uniform(
    problems: &[AgentProblem],
    graph: &Graph,
    gamma: f64,
    c: f64,
) -> Result<StepSizes> {
    select_stepsizes_static(problems, graph, gamma, &vec![c; problems.len()])
}

/// Solver state for the static-topology algorithm.
#[derive(Debug, Clone)]
pub struct StaticState {
    pub x: Stacked,
    /// Running sum `s^k = x^k + sum_{l<=k} x^l`, kept incrementally.
    pub s: Stacked,
    /// Conic duals, one per agent, always in the polar cone.
    pub theta: Vec<DVector<f64>>,
    /// Sum of iterates `sum_{l=1..k} x^l` for the ergodic average.
    pub x_sum: Stacked,
    pub iter: usize,
    pub comms: usize,
}

impl StaticState {
    /// Fresh state with `theta^0 = 0` and `s^0 = x^0`.
    pub fn new(problems: &[AgentProblem], x0: &Stacked) -> Result<Self> {
        validate_problem_set(problems)?;
        if x0.len() != problems.len() {
            return Err(Error::dim("initial point blocks", problems.len(), x0.len()));
        }
        for (i, p) in problems.iter().enumerate() {
            if x0[i].len() != p.dim() {
                return Err(Error::dim("initial point block", p.dim(), x0[i].len()));
            }
        }
        Ok(StaticState {
            x: x0.clone(),
            s: x0.clone(),
            theta: problems
                .iter()
                .map(|p| DVector::zeros(p.constraint_rows()))
                .collect(),
            x_sum: x0.iter().map(|b| DVector::zeros(b.len())).collect(),
            iter: 0,
            comms: 0,
        })
    }

    pub fn zero_start(problems: &[AgentProblem]) -> Result<Self> {
        let x0: Stacked = problems.iter().map(|p| DVector::zeros(p.dim())).collect();
        StaticState::new(problems, &x0)
    }

    /// Ergodic average `(1/k) sum_{l=1..k} x^l`; `x^0` if no step was taken.
    pub fn ergodic_average(&self) -> Stacked {
        if self.iter == 0 {
            return self.x.clone();
        }
        let inv = 1.0 / self.iter as f64;
        self.x_sum.iter().map(|b| b * inv).collect()
    }
}

fn shared_blocks(x: &Stacked, n_s: usize) -> Stacked {
    x.iter().map(|b| DVector::from(b.rows(0, n_s))).collect()
}

/// One synchronous round of the static algorithm.
pub fn dpda_s_step(
    state: &mut StaticState,
    problems: &[AgentProblem],
    graph: &Graph,
    steps: &StepSizes,
) -> Result<()> {
    let n_s = problems[0].shared_dim;
    // one neighbor exchange of s per round
    let s_shared = shared_blocks(&state.s, n_s);
    let lap_s = graph.laplacian_apply(&s_shared)?;
    state.comms += 1;
    let k = state.iter + 1;

    for i in 0..problems.len() {
        let p = &problems[i];
        let (_, grad) = p.f.eval(&state.x[i])?;
        let mut dir = grad;
        if p.constraint_rows() > 0 {
            dir += p.a_matrix.transpose() * &state.theta[i];
        }
        dir.rows_mut(0, n_s)
            .axpy(steps.gamma, &lap_s[i], 1.0);
        let arg = &state.x[i] - steps.tau[i] * dir;
        let x_new = p.rho.prox(&arg, steps.tau[i])?;
        if x_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: k,
                agent: i,
                detail: "non-finite primal iterate".into(),
            });
        }

        let two_minus_old = 2.0 * &x_new - &state.x[i];
        // s^{k+1} = s^k + 2 x^{k+1} - x^k
        state.s[i] += &two_minus_old;

        if p.constraint_rows() > 0 {
            let drift = &p.a_matrix * &two_minus_old - &p.b_vec;
            let arg_theta = &state.theta[i] + steps.kappa[i] * drift;
            state.theta[i] = p.cone.project_polar(&arg_theta)?;
            if state.theta[i].iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    iteration: k,
                    agent: i,
                    detail: "non-finite dual iterate".into(),
                });
            }
        }

        state.x_sum[i] += &x_new;
        state.x[i] = x_new;
    }
    state.iter = k;
    Ok(())
}

/// Runs `K` rounds from `x0` with `theta^0 = 0`, logging metrics per the
/// options. The communication count equals `K` (one exchange per round).
pub fn dpda_s_run(
    problems: &[AgentProblem],
    graph: &Graph,
    steps: &StepSizes,
    x0: &Stacked,
    iterations: usize,
    opts: &RunOptions,
) -> Result<RunReport> {
    if iterations == 0 {
        return Err(Error::invalid("iteration count must be >= 1"));
    }
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    steps.validate_static(problems, graph)?;
    let mut state = StaticState::new(problems, x0)?;
    let schedule = opts.log.points(iterations);
    let mut report = RunReport::new("static", steps, opts);
    report.set_x0(x0);

    let mut next_log = 0usize;
    for k in 1..=iterations {
        dpda_s_step(&mut state, problems, graph, steps)?;
        if next_log < schedule.len() && schedule[next_log] == k {
            next_log += 1;
            let xbar = state.ergodic_average();
            report.log_consensus_row(problems, graph, &xbar, k, state.comms, opts);
        }
    }
    report.finish(state.ergodic_average(), state.x.clone(), state.comms, iterations);
    Ok(report)
}
