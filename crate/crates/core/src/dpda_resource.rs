//! Distributed primal-dual solver for resource-sharing problems: the coupling
//! constraint `sum_i (R_i xi_i - r_i) in K` is handled by running consensus on
//! the *dual* estimates, again with the inexact gossip projection.

use nalgebra::{DMatrix, DVector};

use crate::cones_prox::{Cone, ProxFunction, SmoothFunction};
use crate::dpda_static::{sigma_max, StepSizes};
use crate::error::{Error, Result};
use crate::metrics_bounds::{RunOptions, RunReport};
use crate::network::{exact_consensus_projection, multi_consensus, MixingProcess};
use crate::stacked::Stacked;

/// One agent of the resource-sharing problem: local variable `xi_i` of
/// dimension `n_i`, composite objective `rho_i + f_i`, and contribution
/// `R_i xi_i - r_i` to the shared conic constraint.
#[derive(Debug, Clone)]
pub struct ResourceAgentProblem {
    pub rho: ProxFunction,
    pub f: SmoothFunction,
    pub lipschitz: f64,
    pub r_matrix: DMatrix<f64>,
    pub r_vec: DVector<f64>,
    /// Shared cone `K`; must be identical across agents.
    pub cone: Cone,
    pub sigma_max_r: f64,
}

impl ResourceAgentProblem {
    pub fn new(
        rho: ProxFunction,
        f: SmoothFunction,
        r_matrix: DMatrix<f64>,
        r_vec: DVector<f64>,
        cone: Cone,
    ) -> Result<Self> {
        if r_matrix.nrows() != r_vec.len() {
            return Err(Error::dim("resource rhs", r_matrix.nrows(), r_vec.len()));
        }
        if cone.dim() != r_matrix.nrows() {
            return Err(Error::dim("resource cone", r_matrix.nrows(), cone.dim()));
        }
        rho.validate()?;
        let lipschitz = f.lipschitz();
        let sigma_max_r = sigma_max(&r_matrix);
        Ok(ResourceAgentProblem {
            rho,
            f,
            lipschitz,
            r_matrix,
            r_vec,
            cone,
            sigma_max_r,
        })
    }

    pub fn dim(&self) -> usize {
        self.r_matrix.ncols()
    }

    pub fn constraint_rows(&self) -> usize {
        self.r_matrix.nrows()
    }

    pub fn objective(&self, xi: &DVector<f64>, tol: f64) -> f64 {
        self.rho.value(xi, tol) + self.f.value(xi).expect("dims validated")
    }
}

/// Validates the set and returns the shared constraint dimension `m`.
pub fn validate_resource_set(problems: &[ResourceAgentProblem]) -> Result<usize> {
    if problems.is_empty() {
        return Err(Error::invalid("empty problem set"));
    }
    let m = problems[0].constraint_rows();
    let cone = &problems[0].cone;
    for p in problems.iter().skip(1) {
        if p.constraint_rows() != m {
            return Err(Error::dim("resource rows", m, p.constraint_rows()));
        }
        if &p.cone != cone {
            return Err(Error::invalid("agents must share one cone"));
        }
    }
    Ok(m)
}

/// `sum_i (R_i xi_i - r_i)`, the global constraint image (simulation-side
/// diagnostic; no single agent can evaluate it).
pub fn global_residual(problems: &[ResourceAgentProblem], xi: &Stacked) -> DVector<f64> {
    let m = problems[0].constraint_rows();
    let mut g = DVector::zeros(m);
    for (p, x) in problems.iter().zip(xi) {
        g += &p.r_matrix * x - &p.r_vec;
    }
    g
}

/// Step sizes `tau_i = 1/(L_i + a_i)`, `kappa_i = 1/(gamma + sigma^2/a_i)`
/// meeting `(1/tau_i - L_i)(1/kappa_i - gamma) >= sigma_max(R_i)^2` with
/// equality; degenerate `sigma = 0` gets an epsilon to keep `1/kappa > gamma`
/// strict.
pub fn select_stepsizes_resource(
    problems: &[ResourceAgentProblem],
    gamma: f64,
    margins: &[f64],
) -> Result<StepSizes> {
    if gamma <= 0.0 {
        return Err(Error::invalid("gamma must be positive"));
    }
    if margins.len() != problems.len() {
        return Err(Error::dim("margins", problems.len(), margins.len()));
    }
    let mut tau = Vec::new();
    let mut kappa = Vec::new();
    for (i, p) in problems.iter().enumerate() {
        let a = margins[i];
        if a <= 0.0 {
            return Err(Error::invalid("margin must be positive"));
        }
        tau.push(1.0 / (p.lipschitz + a));
        let s2 = p.sigma_max_r * p.sigma_max_r;
        let denom = if s2 > 0.0 { gamma + s2 / a } else { gamma + 1e-6 };
        kappa.push(1.0 / denom);
    }
    let steps = StepSizes { gamma, tau, kappa };
    validate_resource_steps(&steps, problems)?;
    Ok(steps)
}

pub fn select_stepsizes_resource_uniform(
    problems: &[ResourceAgentProblem],
    gamma: f64,
    margin: f64,
) -> Result<StepSizes> {
    select_stepsizes_resource(problems, gamma, &vec![margin; problems.len()])
}

/// Checks `1/tau_i > L_i`, `1/kappa_i > gamma` and the product condition.
pub fn validate_resource_steps(
    steps: &StepSizes,
    problems: &[ResourceAgentProblem],
) -> Result<()> {
    if steps.tau.len() != problems.len() || steps.kappa.len() != problems.len() {
        return Err(Error::dim("step-size vectors", problems.len(), steps.tau.len()));
    }
    for (i, p) in problems.iter().enumerate() {
        let inv_tau = 1.0 / steps.tau[i];
        let inv_kappa = 1.0 / steps.kappa[i];
        if inv_tau <= p.lipschitz || inv_kappa <= steps.gamma {
            return Err(Error::invalid(format!(
                "resource step-size strictness violated at agent {i}"
            )));
        }
        if (inv_tau - p.lipschitz) * (inv_kappa - steps.gamma)
            < p.sigma_max_r * p.sigma_max_r - 1e-9
        {
            return Err(Error::invalid(format!(
                "resource step-size condition violated at agent {i}"
            )));
        }
    }
    Ok(())
}

/// Configuration: consensus schedule exponent, dual-ball radius, step sizes.
#[derive(Debug, Clone)]
pub struct ResourceConfig {
    pub p: f64,
    /// Radius `B_d` with `||y*|| < B_d` (stacked dual ball).
    pub b_dual: f64,
    pub steps: StepSizes,
    pub q_override: Option<usize>,
    pub exact_projection: bool,
}

impl ResourceConfig {
    pub fn new(p: f64, b_dual: f64, steps: StepSizes) -> Self {
        ResourceConfig {
            p,
            b_dual,
            steps,
            q_override: None,
            exact_projection: false,
        }
    }

    pub fn validate(&self, problems: &[ResourceAgentProblem]) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(Error::invalid("p must be >= 1"));
        }
        if self.b_dual <= 0.0 {
            return Err(Error::invalid("dual radius must be positive"));
        }
        validate_resource_set(problems)?;
        validate_resource_steps(&self.steps, problems)
    }

    pub fn rounds_at(&self, k: usize) -> Result<usize> {
        match self.q_override {
            Some(q) if q >= 1 => Ok(q),
            Some(_) => Err(Error::invalid("q override must be >= 1")),
            None => crate::dpda_dynamic::consensus_schedule(k, self.p),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResourceState {
    pub xi: Stacked,
    /// Local dual estimates, all of the shared constraint dimension.
    pub y: Vec<DVector<f64>>,
    /// Inexact dual-consensus auxiliary.
    pub v: Vec<DVector<f64>>,
    pub xi_sum: Stacked,
    pub y_sum: Vec<DVector<f64>>,
    pub iter: usize,
    pub comms: usize,
}

impl ResourceState {
    /// Fresh state with `v^0 = 0`, `y^0 = 0`.
    pub fn new(problems: &[ResourceAgentProblem], xi0: &Stacked) -> Result<Self> {
        let m = validate_resource_set(problems)?;
        if xi0.len() != problems.len() {
            return Err(Error::dim("initial point blocks", problems.len(), xi0.len()));
        }
        for (i, p) in problems.iter().enumerate() {
            if xi0[i].len() != p.dim() {
                return Err(Error::dim("initial point block", p.dim(), xi0[i].len()));
            }
        }
        Ok(ResourceState {
            xi: xi0.clone(),
            y: (0..problems.len()).map(|_| DVector::zeros(m)).collect(),
            v: (0..problems.len()).map(|_| DVector::zeros(m)).collect(),
            xi_sum: xi0.iter().map(|b| DVector::zeros(b.len())).collect(),
            y_sum: (0..problems.len()).map(|_| DVector::zeros(m)).collect(),
            iter: 0,
            comms: 0,
        })
    }

    pub fn ergodic_average(&self) -> (Stacked, Vec<DVector<f64>>) {
        if self.iter == 0 {
            return (self.xi.clone(), self.y.clone());
        }
        let inv = 1.0 / self.iter as f64;
        (
            self.xi_sum.iter().map(|b| b * inv).collect(),
            self.y_sum.iter().map(|b| b * inv).collect(),
        )
    }
}

/// One synchronous round: prox-gradient primal step, gossip round(s) on the
/// dual-consensus auxiliary, then the polar-cone-projected dual ascent step
/// driven by the resource drift minus the auxiliary extrapolation.
pub fn dpda_r_step(
    state: &mut ResourceState,
    problems: &[ResourceAgentProblem],
    process: &mut MixingProcess,
    config: &ResourceConfig,
) -> Result<usize> {
    let n = problems.len();
    let k = state.iter + 1;
    let gamma = config.steps.gamma;

    let mut xi_new: Stacked = Vec::with_capacity(n);
    for i in 0..n {
        let p = &problems[i];
        let (_, grad) = p.f.eval(&state.xi[i])?;
        let dir = grad + p.r_matrix.transpose() * &state.y[i];
        let arg = &state.xi[i] - config.steps.tau[i] * dir;
        let next = p.rho.prox(&arg, config.steps.tau[i])?;
        if next.iter().any(|f| !f.is_finite()) {
            return Err(Error::Diverged {
                iteration: k,
                agent: i,
                detail: "non-finite primal iterate".into(),
            });
        }
        xi_new.push(next);
    }

    let rounds = config.rounds_at(k)?;
    let z: Stacked = (0..n).map(|i| &state.v[i] / gamma + &state.y[i]).collect();
    let approx = if config.exact_projection {
        for _ in 0..rounds {
            let _ = process.next_matrix();
        }
        exact_consensus_projection(&z, config.b_dual)
    } else {
        multi_consensus(process, &z, rounds, config.b_dual)?
    };
    state.comms += rounds;

    let mut v_new: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let vi = &state.v[i] + gamma * &state.y[i] - gamma * &approx[i];
        if vi.iter().any(|f| !f.is_finite()) {
            return Err(Error::Diverged {
                iteration: k,
                agent: i,
                detail: "non-finite dual-consensus auxiliary".into(),
            });
        }
        v_new.push(vi);
    }

    for i in 0..n {
        let p = &problems[i];
        let drift = &p.r_matrix * (2.0 * &xi_new[i] - &state.xi[i])
            - &p.r_vec
            - (2.0 * &v_new[i] - &state.v[i]);
        let arg = &state.y[i] + config.steps.kappa[i] * drift;
        state.y[i] = p.cone.project_polar(&arg)?;
        if state.y[i].iter().any(|f| !f.is_finite()) {
            return Err(Error::Diverged {
                iteration: k,
                agent: i,
                detail: "non-finite dual iterate".into(),
            });
        }
    }

    for i in 0..n {
        state.xi_sum[i] += &xi_new[i];
        state.y_sum[i] += &state.y[i];
        state.xi[i] = xi_new[i].clone();
        state.v[i] = v_new[i].clone();
    }
    state.iter = k;
    Ok(rounds)
}

/// Runs `K` rounds from `xi0` with `v^0 = y^0 = 0`.
pub fn dpda_r_run(
    problems: &[ResourceAgentProblem],
    process: &mut MixingProcess,
    config: &ResourceConfig,
    xi0: &Stacked,
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
    let mut state = ResourceState::new(problems, xi0)?;
    let schedule = opts.log.points(iterations);
    let mut report = RunReport::new("resource", &config.steps, opts);
    report.set_x0(xi0);
    let graph = process.graph().clone();

    let mut next_log = 0usize;
    for k in 1..=iterations {
        let rounds = dpda_r_step(&mut state, problems, process, config)?;
        report.q_history.push(rounds);
        if next_log < schedule.len() && schedule[next_log] == k {
            next_log += 1;
            let (xibar, ybar) = state.ergodic_average();
            report.log_resource_row(problems, &graph, &xibar, &ybar, k, state.comms, opts);
        }
    }
    let (xibar, ybar) = state.ergodic_average();
    report.final_y = Some(ybar.iter().map(|b| b.iter().cloned().collect()).collect());
    report.finish(xibar, state.xi.clone(), state.comms, iterations);
    Ok(report)
}

/// Dual-consensus spread `max_{i,j} ||y_i - y_j||` over all pairs.
pub fn dual_spread(y: &[DVector<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..y.len() {
        for j in (i + 1)..y.len() {
            worst = worst.max((&y[i] - &y[j]).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ActivationPolicy, Graph};
    use nalgebra::dmatrix;

    fn dv(s: &[f64]) -> DVector<f64> {
        DVector::from_vec(s.to_vec())
    }

    #[test]
    fn stepsize_formula_cases() {
        // (L=1, gamma=1, sigma=2, a=2) -> tau=1/3, kappa=1/3
        let p = ResourceAgentProblem::new(
            ProxFunction::Zero,
            SmoothFunction::Quadratic {
                q_matrix: dmatrix![1.0],
                linear: dv(&[0.0]),
                constant: 0.0,
            },
            dmatrix![2.0],
            dv(&[0.0]),
            Cone::NonnegativeOrthant(1),
        )
        .unwrap();
        let steps = select_stepsizes_resource(&[p], 1.0, &[2.0]).unwrap();
        assert!((steps.tau[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((steps.kappa[0] - 1.0 / 3.0).abs() < 1e-12);

        // (L=0, gamma=0.5, sigma=1, a=1) -> tau=1, kappa=1/1.5
        let p2 = ResourceAgentProblem::new(
            ProxFunction::Zero,
            SmoothFunction::Zero,
            dmatrix![1.0],
            dv(&[0.0]),
            Cone::NonnegativeOrthant(1),
        )
        .unwrap();
        let steps2 = select_stepsizes_resource(&[p2], 0.5, &[1.0]).unwrap();
        assert!((steps2.tau[0] - 1.0).abs() < 1e-12);
        assert!((steps2.kappa[0] - 1.0 / 1.5).abs() < 1e-12);

        // degenerate sigma=0 keeps 1/kappa > gamma strictly
        let p3 = ResourceAgentProblem::new(
            ProxFunction::Zero,
            SmoothFunction::Quadratic {
                q_matrix: dmatrix![1.0],
                linear: dv(&[0.0]),
                constant: 0.0,
            },
            dmatrix![0.0],
            dv(&[0.0]),
            Cone::NonnegativeOrthant(1),
        )
        .unwrap();
        let steps3 = select_stepsizes_resource(&[p3], 1.0, &[1.0]).unwrap();
        assert!((steps3.tau[0] - 0.5).abs() < 1e-12);
        assert!(1.0 / steps3.kappa[0] > 1.0);
    }

    #[test]
    fn single_agent_resource_toy() {
        let problems = crate::catalog::resource_toy1();
        let graph = Graph::new(1, vec![]).unwrap();
        let mut process = MixingProcess::new(graph, ActivationPolicy::AlwaysFull, 0).unwrap();
        let steps = select_stepsizes_resource_uniform(&problems, 1.0, 1.0).unwrap();
        let config = ResourceConfig::new(2.0, 10.0, steps);
        let xi0: Stacked = vec![dv(&[0.0])];
        let report = dpda_r_run(
            &problems,
            &mut process,
            &config,
            &xi0,
            20_000,
            &RunOptions::quiet(),
        )
        .unwrap();
        assert!((report.final_xbar[0][0] - 1.0).abs() < 1e-3);
        assert!((report.final_y.as_ref().unwrap()[0][0] + 1.0).abs() < 2e-2);
    }

    #[test]
    fn duals_stay_in_the_polar_cone() {
        let problems = crate::catalog::resource_suite(4, 2, 2, 13);
        let graph = Graph::ring(4);
        let mut process = MixingProcess::new(
            graph,
            ActivationPolicy::BernoulliEdges {
                prob: 0.6,
                period: 2,
            },
            5,
        )
        .unwrap();
        let steps = select_stepsizes_resource_uniform(&problems, 1.0, 1.0).unwrap();
        let config = ResourceConfig::new(2.0, 10.0, steps);
        let xi0: Stacked = problems.iter().map(|p| DVector::zeros(p.dim())).collect();
        let mut state = ResourceState::new(&problems, &xi0).unwrap();
        for _ in 0..500 {
            dpda_r_step(&mut state, &problems, &mut process, &config).unwrap();
            for y in &state.y {
                // orthant polar: componentwise nonpositive
                let d = problems[0].cone.project(y).unwrap().norm();
                assert!(d <= 1e-10, "dual escaped the polar cone: {d}");
            }
        }
    }

    #[test]
    fn symmetric_equality_constrained_pair() {
        let problems = crate::catalog::resource_toy2();
        let graph = Graph::complete(2);
        let mut process = MixingProcess::new(graph, ActivationPolicy::AlwaysFull, 0).unwrap();
        let steps = select_stepsizes_resource_uniform(&problems, 1.0, 1.0).unwrap();
        let config = ResourceConfig::new(2.0, 10.0, steps);
        let xi0: Stacked = vec![dv(&[0.0]), dv(&[0.0])];
        let mut state = ResourceState::new(&problems, &xi0).unwrap();
        for _ in 0..10_000 {
            dpda_r_step(&mut state, &problems, &mut process, &config).unwrap();
        }
        let (xibar, _) = state.ergodic_average();
        assert!((xibar[0][0] - 1.0).abs() < 2e-3, "{}", xibar[0][0]);
        assert!((xibar[1][0] - 1.0).abs() < 2e-3, "{}", xibar[1][0]);
        // with full mixing on a complete graph the dual estimates coincide
        assert!(dual_spread(&state.y) <= 1e-6);
        // duals stay in the polar cone (zero cone: all of R, trivially)
        let g = global_residual(&problems, &xibar);
        assert!(g.norm() < 5e-3);
    }
}
