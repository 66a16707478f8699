//! Centralized reference solver. Assembles the whole problem into a single
//! variable, runs the plain two-step primal-dual iteration on it to high
//! accuracy, and recovers the multipliers needed by the bound certificates.
//!
//! Outputs are diagnostic-grade: suboptimality baselines, certificate saddle
//! inputs, and equivalence targets for the distributed solvers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones_prox::{Cone, ProxFunction};
use crate::dpda_resource::ResourceAgentProblem;
use crate::dpda_static::{sigma_max, validate_problem_set, AgentProblem};
use crate::error::{Error, Result};
use crate::metrics_bounds::{DynamicSaddle, ResourceSaddle, StaticSaddle, INDICATOR_TOL};
use crate::network::Graph;
use crate::stacked::Stacked;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Print progress to stderr every this many iterations (0 = silent).
    pub progress_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 400_000,
            progress_every: 0,
        }
    }
}

/// High-accuracy centralized solution with recovered multipliers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralSolution {
    pub mode: String,
    pub shared_dim: usize,
    /// Centralized variable: `(z, xi_1, .., xi_N)` for consensus problems,
    /// `(xi_1, .., xi_N)` for resource problems.
    pub x_central: Vec<f64>,
    /// Per-agent view `(z, xi_i)` (consensus) or `xi_i` (resource).
    pub per_agent: Vec<Vec<f64>>,
    pub objective: f64,
    /// Conic multipliers per agent (consensus mode).
    pub theta: Vec<Vec<f64>>,
    /// Edge consensus multipliers from the least-squares stationarity fit.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_edges: Option<Vec<Vec<f64>>>,
    /// Node consensus multipliers `-[grad f_i + A_i' theta_i]_shared`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_nodes: Option<Vec<Vec<f64>>>,
    /// Resource dual.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<Vec<f64>>,
    /// Resource auxiliary `w_i* = R_i xi_i* - r_i - g*/N`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w: Option<Vec<Vec<f64>>>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CentralSolution {
    pub fn per_agent_stacked(&self) -> Stacked {
        self.per_agent
            .iter()
            .map(|v| DVector::from_vec(v.clone()))
            .collect()
    }

    pub fn theta_stacked(&self) -> Vec<DVector<f64>> {
        self.theta
            .iter()
            .map(|v| DVector::from_vec(v.clone()))
            .collect()
    }

    pub fn static_saddle(&self) -> Result<StaticSaddle> {
        let lambda = self
            .lambda_edges
            .as_ref()
            .ok_or_else(|| Error::invalid("solution carries no edge multipliers"))?;
        Ok(StaticSaddle {
            x: self.per_agent_stacked(),
            theta: self.theta_stacked(),
            lambda_edges: lambda.iter().map(|v| DVector::from_vec(v.clone())).collect(),
        })
    }

    pub fn dynamic_saddle(&self) -> Result<DynamicSaddle> {
        let lambda = self
            .lambda_nodes
            .as_ref()
            .ok_or_else(|| Error::invalid("solution carries no node multipliers"))?;
        Ok(DynamicSaddle {
            x: self.per_agent_stacked(),
            theta: self.theta_stacked(),
            lambda_nodes: lambda.iter().map(|v| DVector::from_vec(v.clone())).collect(),
        })
    }

    pub fn resource_saddle(&self) -> Result<ResourceSaddle> {
        let y = self
            .y
            .as_ref()
            .ok_or_else(|| Error::invalid("solution carries no resource dual"))?;
        let w = self
            .w
            .as_ref()
            .ok_or_else(|| Error::invalid("solution carries no auxiliary w"))?;
        let n = self.per_agent.len();
        Ok(ResourceSaddle {
            xi: self.per_agent_stacked(),
            y: (0..n).map(|_| DVector::from_vec(y.clone())).collect(),
            w: w.iter().map(|v| DVector::from_vec(v.clone())).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("solution serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("solution parse: {e}")))
    }
}

/// Splits an agent's nonsmooth part into shared-block and local-block pieces.
fn split_rho(rho: &ProxFunction, n_s: usize, n_l: usize) -> Result<(ProxFunction, ProxFunction)> {
    if n_l == 0 {
        return Ok((rho.clone(), ProxFunction::Zero));
    }
    match rho {
        ProxFunction::Zero => Ok((ProxFunction::Zero, ProxFunction::Zero)),
        ProxFunction::L1Norm(w) => Ok((ProxFunction::L1Norm(*w), ProxFunction::L1Norm(*w))),
        ProxFunction::WeightedLinearPlusNonneg(c) => Ok((
            ProxFunction::WeightedLinearPlusNonneg(DVector::from(c.rows(0, n_s))),
            ProxFunction::WeightedLinearPlusNonneg(DVector::from(c.rows(n_s, n_l))),
        )),
        ProxFunction::IndicatorBox { lower, upper } => Ok((
            ProxFunction::IndicatorBox {
                lower: DVector::from(lower.rows(0, n_s)),
                upper: DVector::from(upper.rows(0, n_s)),
            },
            ProxFunction::IndicatorBox {
                lower: DVector::from(lower.rows(n_s, n_l)),
                upper: DVector::from(upper.rows(n_s, n_l)),
            },
        )),
        ProxFunction::SeparableSum(parts) => {
            let mut shared = Vec::new();
            let mut local = Vec::new();
            for (range, p) in parts {
                if range.end <= n_s {
                    shared.push((range.clone(), p.clone()));
                } else if range.start >= n_s {
                    local.push((range.start - n_s..range.end - n_s, p.clone()));
                } else {
                    return Err(Error::invalid(
                        "nonsmooth component crosses the shared/local boundary",
                    ));
                }
            }
            Ok((normalize_separable(shared, n_s), normalize_separable(local, n_l)))
        }
        ProxFunction::IndicatorBall { .. } => Err(Error::invalid(
            "ball indicator across shared and local coordinates cannot be split",
        )),
    }
}

fn normalize_separable(parts: Vec<(std::ops::Range<usize>, ProxFunction)>, dim: usize) -> ProxFunction {
    if parts.is_empty() {
        return ProxFunction::Zero;
    }
    if parts.len() == 1 && parts[0].0.start == 0 && parts[0].0.end == dim {
        return parts.into_iter().next().unwrap().1;
    }
    ProxFunction::SeparableSum(parts)
}

/// Sum of the agents' shared-block nonsmooth parts, when it stays in the
/// catalog: zeros vanish, weights add, identical indicators collapse.
fn combine_shared(parts: Vec<ProxFunction>) -> Result<ProxFunction> {
    let nonzero: Vec<ProxFunction> = parts
        .into_iter()
        .filter(|p| !matches!(p, ProxFunction::Zero))
        .collect();
    if nonzero.is_empty() {
        return Ok(ProxFunction::Zero);
    }
    if nonzero.iter().all(|p| matches!(p, ProxFunction::L1Norm(_))) {
        let total = nonzero
            .iter()
            .map(|p| match p {
                ProxFunction::L1Norm(w) => *w,
                _ => unreachable!(),
            })
            .sum();
        return Ok(ProxFunction::L1Norm(total));
    }
    if nonzero
        .iter()
        .all(|p| matches!(p, ProxFunction::WeightedLinearPlusNonneg(_)))
    {
        let mut total = match &nonzero[0] {
            ProxFunction::WeightedLinearPlusNonneg(c) => c.clone(),
            _ => unreachable!(),
        };
        for p in nonzero.iter().skip(1) {
            if let ProxFunction::WeightedLinearPlusNonneg(c) = p {
                total += c;
            }
        }
        return Ok(ProxFunction::WeightedLinearPlusNonneg(total));
    }
    if nonzero.iter().all(|p| *p == nonzero[0]) {
        return Ok(nonzero.into_iter().next().unwrap());
    }
    Err(Error::invalid(
        "incompatible shared-block nonsmooth parts; centralized solve unsupported",
    ))
}

/// Centralized assembly of a consensus problem set.
struct Assembled {
    dim: usize,
    n_s: usize,
    offsets: Vec<usize>,
    rho: ProxFunction,
    lipschitz: f64,
    a: DMatrix<f64>,
    b: DVector<f64>,
    cone: Cone,
    row_offsets: Vec<usize>,
}

fn assemble_consensus(problems: &[AgentProblem]) -> Result<Assembled> {
    let n_s = validate_problem_set(problems)?;
    let mut offsets = Vec::with_capacity(problems.len());
    let mut dim = n_s;
    for p in problems {
        offsets.push(dim);
        dim += p.local_dim;
    }
    let mut shared_parts = Vec::new();
    let mut sum_parts: Vec<(std::ops::Range<usize>, ProxFunction)> = Vec::new();
    for (i, p) in problems.iter().enumerate() {
        let (shared, local) = split_rho(&p.rho, n_s, p.local_dim)?;
        shared_parts.push(shared);
        if !matches!(local, ProxFunction::Zero) {
            sum_parts.push((offsets[i]..offsets[i] + p.local_dim, local));
        }
    }
    let combined = combine_shared(shared_parts)?;
    if !matches!(combined, ProxFunction::Zero) {
        sum_parts.insert(0, (0..n_s, combined));
    }
    let rho = normalize_separable(sum_parts, dim);

    let total_rows: usize = problems.iter().map(|p| p.constraint_rows()).sum();
    let mut a = DMatrix::zeros(total_rows, dim);
    let mut b = DVector::zeros(total_rows);
    let mut row_offsets = Vec::with_capacity(problems.len());
    let mut row = 0usize;
    for (i, p) in problems.iter().enumerate() {
        row_offsets.push(row);
        let m_i = p.constraint_rows();
        if m_i > 0 {
            a.view_mut((row, 0), (m_i, n_s))
                .copy_from(&p.a_matrix.columns(0, n_s));
            if p.local_dim > 0 {
                a.view_mut((row, offsets[i]), (m_i, p.local_dim))
                    .copy_from(&p.a_matrix.columns(n_s, p.local_dim));
            }
            b.rows_mut(row, m_i).copy_from(&p.b_vec);
            row += m_i;
        }
    }
    let cone = Cone::Product(problems.iter().map(|p| p.cone.clone()).collect());
    let lipschitz = problems.iter().map(|p| p.lipschitz).sum();
    Ok(Assembled {
        dim,
        n_s,
        offsets,
        rho,
        lipschitz,
        a,
        b,
        cone,
        row_offsets,
    })
}

fn consensus_value_grad(
    problems: &[AgentProblem],
    asm: &Assembled,
    x: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let mut value = 0.0;
    let mut grad = DVector::zeros(asm.dim);
    for (i, p) in problems.iter().enumerate() {
        let xi = gather_agent(asm, x, i, p.local_dim);
        let (v, g) = p.f.eval(&xi).expect("dims checked at assembly");
        value += v;
        grad.rows_mut(0, asm.n_s)
            .axpy(1.0, &g.rows(0, asm.n_s), 1.0);
        if p.local_dim > 0 {
            grad.rows_mut(asm.offsets[i], p.local_dim)
                .axpy(1.0, &g.rows(asm.n_s, p.local_dim), 1.0);
        }
    }
    (value, grad)
}

fn gather_agent(asm: &Assembled, x: &DVector<f64>, i: usize, local_dim: usize) -> DVector<f64> {
    let mut xi = DVector::zeros(asm.n_s + local_dim);
    xi.rows_mut(0, asm.n_s).copy_from(&x.rows(0, asm.n_s));
    if local_dim > 0 {
        xi.rows_mut(asm.n_s, local_dim)
            .copy_from(&x.rows(asm.offsets[i], local_dim));
    }
    xi
}

/// Plain primal-dual iteration on `min rho + f + <Ax - b, theta> - sigma_K`.
/// Step sizes `1/(L + sigma)` and `1/sigma` satisfy the rate condition with
/// equality. Returns `(x, theta, iterations, residual)`.
#[allow(clippy::too_many_arguments)]
fn pda_loop<F>(
    rho: &ProxFunction,
    value_grad: F,
    lipschitz: f64,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    cone: &Cone,
    dim: usize,
    opts: &SolveOptions,
) -> Result<(DVector<f64>, DVector<f64>, usize, f64)>
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let sigma = sigma_max(a);
    let nu_x = 1.0 / (lipschitz + sigma).max(1e-12);
    let nu_y = if sigma > 0.0 { 1.0 / sigma } else { 1.0 };
    let mut x = DVector::zeros(dim);
    let mut theta = DVector::zeros(a.nrows());

    let residual_at = |x: &DVector<f64>, theta: &DVector<f64>| -> f64 {
        let (_, grad) = value_grad(x);
        let dir = &grad + a.transpose() * theta;
        let fp = rho
            .prox(&(x - nu_x * &dir), nu_x)
            .expect("prox validated at assembly");
        let stat = (x - fp).norm() / nu_x;
        if a.nrows() == 0 {
            return stat;
        }
        let res = a * x - b;
        let feas = cone.distance(&res).expect("cone dims fixed");
        let comp = theta.dot(&res).abs();
        stat.max(feas).max(comp)
    };

    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let (_, grad) = value_grad(&x);
        let dir = &grad + a.transpose() * &theta;
        let x_new = rho.prox(&(&x - nu_x * dir), nu_x)?;
        if a.nrows() > 0 {
            let drift = a * (2.0 * &x_new - &x) - b;
            theta = cone.project_polar(&(&theta + nu_y * drift))?;
        }
        x = x_new;
        iterations = k;
        if k % 64 == 0 || k == opts.max_iter {
            residual = residual_at(&x, &theta);
            if opts.progress_every > 0 && k % opts.progress_every == 0 {
                eprintln!("  [oracle] iter {k}: kkt residual {residual:.3e}");
            }
            if residual <= opts.tol {
                break;
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged {
                iteration: k,
                agent: 0,
                detail: "centralized iterate went non-finite (infeasible problem?)".into(),
            });
        }
    }
    if residual.is_infinite() {
        residual = residual_at(&x, &theta);
    }
    Ok((x, theta, iterations, residual))
}

/// Subgradient of the shared-block nonsmooth part at the optimum, when it is
/// unambiguous (zero part, or an indicator inactive at `z`).
fn shared_subgradient(rho_shared: &ProxFunction, z: &DVector<f64>) -> Option<DVector<f64>> {
    match rho_shared {
        ProxFunction::Zero => Some(DVector::zeros(z.len())),
        ProxFunction::IndicatorBall { center, radius } => {
            if (z - center).norm() < radius - 1e-7 {
                Some(DVector::zeros(z.len()))
            } else {
                None
            }
        }
        ProxFunction::IndicatorBox { lower, upper } => {
            let strict = z
                .iter()
                .enumerate()
                .all(|(i, &v)| v > lower[i] + 1e-7 && v < upper[i] - 1e-7);
            if strict {
                Some(DVector::zeros(z.len()))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Centralized solve of the consensus problem. When `graph` is given, edge
/// multipliers are recovered by least squares on the stationarity residual
/// (diagnostic-grade; any exact saddle multiplier validates the bounds).
pub fn solve_consensus(
    problems: &[AgentProblem],
    graph: Option<&Graph>,
    opts: &SolveOptions,
) -> Result<CentralSolution> {
    let asm = assemble_consensus(problems)?;
    let (x, theta_flat, iterations, residual) = pda_loop(
        &asm.rho,
        |x| consensus_value_grad(problems, &asm, x),
        asm.lipschitz,
        &asm.a,
        &asm.b,
        &asm.cone,
        asm.dim,
        opts,
    )?;

    let per_agent: Stacked = problems
        .iter()
        .enumerate()
        .map(|(i, p)| gather_agent(&asm, &x, i, p.local_dim))
        .collect();
    let theta: Vec<DVector<f64>> = problems
        .iter()
        .enumerate()
        .map(|(i, p)| DVector::from(theta_flat.rows(asm.row_offsets[i], p.constraint_rows())))
        .collect();
    let objective: f64 = problems
        .iter()
        .zip(&per_agent)
        .map(|(p, xi)| p.objective(xi, INDICATOR_TOL))
        .sum();

    // node multipliers: lambda_i = -[grad f_i + A_i' theta_i]_shared, valid
    // when the shared nonsmooth subgradient at z* is unambiguous
    let z = DVector::from(x.rows(0, asm.n_s));
    let mut lambda_nodes: Option<Vec<DVector<f64>>> = Some(Vec::new());
    for (i, p) in problems.iter().enumerate() {
        let (shared_rho, _) = split_rho(&p.rho, asm.n_s, p.local_dim)?;
        let sub = shared_subgradient(&shared_rho, &z);
        match (sub, &mut lambda_nodes) {
            (Some(s), Some(list)) => {
                let (_, g) = p.f.eval(&per_agent[i])?;
                let mut lam = -(DVector::from(g.rows(0, asm.n_s)) + s);
                if p.constraint_rows() > 0 {
                    lam -= p.a_matrix.columns(0, asm.n_s).transpose() * &theta[i];
                }
                list.push(lam);
            }
            _ => lambda_nodes = None,
        }
    }

    let lambda_edges = match (&lambda_nodes, graph) {
        (Some(nodes), Some(g)) => Some(recover_edge_multipliers(g, nodes)),
        _ => None,
    };

    Ok(CentralSolution {
        mode: "conic-consensus".into(),
        shared_dim: asm.n_s,
        x_central: x.iter().cloned().collect(),
        per_agent: per_agent.iter().map(|v| v.iter().cloned().collect()).collect(),
        objective,
        theta: theta.iter().map(|v| v.iter().cloned().collect()).collect(),
        lambda_edges: lambda_edges
            .map(|l| l.iter().map(|v| v.iter().cloned().collect()).collect()),
        lambda_nodes: lambda_nodes
            .map(|l| l.iter().map(|v| v.iter().cloned().collect()).collect()),
        y: None,
        w: None,
        kkt_residual: residual,
        iterations,
        converged: residual <= opts.tol,
    })
}

/// Least-squares fit of edge multipliers: solve `H' u = r` per shared
/// coordinate, where `H` is the oriented incidence matrix. The residual's
/// consensus component vanishes by centralized stationarity, so the fit is
/// exact up to oracle tolerance.
fn recover_edge_multipliers(graph: &Graph, lambda_nodes: &[DVector<f64>]) -> Stacked {
    let n = graph.node_count();
    let edges = graph.edges();
    let n_s = lambda_nodes[0].len();
    let mut ht = DMatrix::zeros(n, edges.len());
    for (e, &(i, j)) in edges.iter().enumerate() {
        ht[(i, e)] = 1.0;
        ht[(j, e)] = -1.0;
    }
    let svd = ht.svd(true, true);
    let mut lambda: Stacked = edges.iter().map(|_| DVector::zeros(n_s)).collect();
    for c in 0..n_s {
        let rhs = DVector::from_fn(n, |i, _| lambda_nodes[i][c]);
        if let Ok(u) = svd.solve(&rhs, 1e-12) {
            for e in 0..edges.len() {
                lambda[e][c] = u[e];
            }
        }
    }
    lambda
}

/// Centralized solve of the resource problem (one stacked constraint block).
pub fn solve_resource(
    problems: &[ResourceAgentProblem],
    opts: &SolveOptions,
) -> Result<CentralSolution> {
    let m = crate::dpda_resource::validate_resource_set(problems)?;
    let mut offsets = Vec::with_capacity(problems.len());
    let mut dim = 0usize;
    for p in problems {
        offsets.push(dim);
        dim += p.dim();
    }
    let mut parts = Vec::new();
    for (i, p) in problems.iter().enumerate() {
        if !matches!(p.rho, ProxFunction::Zero) {
            parts.push((offsets[i]..offsets[i] + p.dim(), p.rho.clone()));
        }
    }
    let rho = normalize_separable(parts, dim);
    let mut a = DMatrix::zeros(m, dim);
    let mut b = DVector::zeros(m);
    for (i, p) in problems.iter().enumerate() {
        a.view_mut((0, offsets[i]), (m, p.dim())).copy_from(&p.r_matrix);
        b += &p.r_vec;
    }
    let cone = problems[0].cone.clone();
    let lipschitz: f64 = problems.iter().map(|p| p.lipschitz).sum();

    let value_grad = |x: &DVector<f64>| {
        let mut value = 0.0;
        let mut grad = DVector::zeros(dim);
        for (i, p) in problems.iter().enumerate() {
            let xi = DVector::from(x.rows(offsets[i], p.dim()));
            let (v, g) = p.f.eval(&xi).expect("dims validated");
            value += v;
            grad.rows_mut(offsets[i], p.dim()).copy_from(&g);
        }
        (value, grad)
    };

    let (x, y, iterations, residual) =
        pda_loop(&rho, value_grad, lipschitz, &a, &b, &cone, dim, opts)?;

    let per_agent: Stacked = problems
        .iter()
        .enumerate()
        .map(|(i, p)| DVector::from(x.rows(offsets[i], p.dim())))
        .collect();
    let objective: f64 = problems
        .iter()
        .zip(&per_agent)
        .map(|(p, xi)| p.objective(xi, INDICATOR_TOL))
        .sum();
    // w_i* = (R_i xi_i* - r_i) - g*/N with g* the constraint image; the blocks
    // sum to zero and satisfy the saddle stationarity in y
    let g_star = crate::dpda_resource::global_residual(problems, &per_agent);
    let n = problems.len() as f64;
    let w: Vec<DVector<f64>> = problems
        .iter()
        .zip(&per_agent)
        .map(|(p, xi)| &p.r_matrix * xi - &p.r_vec - &g_star / n)
        .collect();

    Ok(CentralSolution {
        mode: "resource".into(),
        shared_dim: 0,
        x_central: x.iter().cloned().collect(),
        per_agent: per_agent.iter().map(|v| v.iter().cloned().collect()).collect(),
        objective,
        theta: vec![],
        lambda_edges: None,
        lambda_nodes: None,
        y: Some(y.iter().cloned().collect()),
        w: Some(w.iter().map(|v| v.iter().cloned().collect()).collect()),
        kkt_residual: residual,
        iterations,
        converged: residual <= opts.tol,
    })
}

/// Unconstrained minimum of the separable resource objective (used as the
/// default dual lower bound `q(0)`); per-agent proximal gradient.
pub fn minimize_unconstrained_resource(
    problems: &[ResourceAgentProblem],
    opts: &SolveOptions,
) -> Result<f64> {
    let mut total = 0.0;
    for p in problems {
        let nu = 1.0 / (p.lipschitz + 1.0);
        let mut x = DVector::zeros(p.dim());
        for _ in 0..opts.max_iter.min(100_000) {
            let (_, g) = p.f.eval(&x)?;
            let next = p.rho.prox(&(&x - nu * g), nu)?;
            let step = (&next - &x).norm();
            x = next;
            if step <= opts.tol * nu {
                break;
            }
        }
        total += p.objective(&x, INDICATOR_TOL);
    }
    Ok(total)
}
