//! Named problem instances: hand-checkable toys and seeded random suites.
//! Used by the CLI (`problem.name` in run configs) and throughout the tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::cones_prox::{Cone, ProxFunction, SmoothFunction};
use crate::dpda_resource::ResourceAgentProblem;
use crate::dpda_static::AgentProblem;
use crate::error::{Error, Result};

fn dv(s: &[f64]) -> DVector<f64> {
    DVector::from_vec(s.to_vec())
}

/// Derives a named sub-stream RNG from the run seed, so data, graph and
/// activation randomness can vary independently.
pub fn substream(seed: u64, name: &str) -> ChaCha12Rng {
    // FNV-1a over the stream name, mixed with the seed
    let mut h: u64 = 0xcbf29ce484222325;
    for byte in name.as_bytes() {
        h ^= *byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    ChaCha12Rng::seed_from_u64(seed ^ h)
}

/// `min (1/2)(x-1)^2 s.t. x >= 0` on one node; `x* = 1`, `Phi* = 0`.
pub fn toy1() -> Vec<AgentProblem> {
    vec![AgentProblem::new(
        1,
        0,
        ProxFunction::Zero,
        SmoothFunction::Quadratic {
            q_matrix: DMatrix::from_element(1, 1, 1.0),
            linear: dv(&[-1.0]),
            constant: 0.5,
        },
        DMatrix::from_element(1, 1, 1.0),
        dv(&[0.0]),
        Cone::NonnegativeOrthant(1),
    )
    .expect("valid toy")]
}

/// `min (x-1)^2 + (x-3)^2 s.t. x >= 2.5` over one edge; `x* = 2.5`,
/// `Phi* = 2.5`, constraint multiplier `theta* = -2`.
pub fn toy2() -> Vec<AgentProblem> {
    let f1 = SmoothFunction::Quadratic {
        q_matrix: DMatrix::from_element(1, 1, 2.0),
        linear: dv(&[-2.0]),
        constant: 1.0,
    };
    let f2 = SmoothFunction::Quadratic {
        q_matrix: DMatrix::from_element(1, 1, 2.0),
        linear: dv(&[-6.0]),
        constant: 9.0,
    };
    vec![
        AgentProblem::new(
            1,
            0,
            ProxFunction::Zero,
            f1,
            DMatrix::from_element(1, 1, 1.0),
            dv(&[2.5]),
            Cone::NonnegativeOrthant(1),
        )
        .expect("valid toy"),
        AgentProblem::unconstrained(1, 0, ProxFunction::Zero, f2).expect("valid toy"),
    ]
}

/// Seeded suite of strongly convex QPs with orthant constraints and a common
/// Slater point at the origin: per agent `f_i = (1/2) x'Q_i x + q_i'x`,
/// `A_i x - b_i in R^2_+` with `b_i = -margin`. `bounded` adds a centered
/// ball indicator (domain compactness for the dynamic solver).
pub fn qp_consensus_suite(
    n_agents: usize,
    dim: usize,
    seed: u64,
    bounded: Option<f64>,
) -> Vec<AgentProblem> {
    let mut rng = substream(seed, "qp-consensus");
    (0..n_agents)
        .map(|_| {
            let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
            let q_matrix = &g.transpose() * &g + DMatrix::identity(dim, dim) * 0.5;
            let linear = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let a = DMatrix::from_fn(2, dim, |_, _| rng.gen_range(-1.0..1.0));
            let b = dv(&[-0.5, -0.5]);
            let rho = match bounded {
                Some(radius) => ProxFunction::IndicatorBall {
                    center: DVector::zeros(dim),
                    radius,
                },
                None => ProxFunction::Zero,
            };
            AgentProblem::new(
                dim,
                0,
                rho,
                SmoothFunction::Quadratic {
                    q_matrix,
                    linear,
                    constant: 0.0,
                },
                a,
                b,
                Cone::NonnegativeOrthant(2),
            )
            .expect("valid QP agent")
        })
        .collect()
}

/// `min (1/2) xi^2 s.t. xi - 1 in R_+` on one agent; `xi* = 1`, `y* = -1`.
pub fn resource_toy1() -> Vec<ResourceAgentProblem> {
    vec![ResourceAgentProblem::new(
        ProxFunction::Zero,
        SmoothFunction::Quadratic {
            q_matrix: DMatrix::from_element(1, 1, 1.0),
            linear: dv(&[0.0]),
            constant: 0.0,
        },
        DMatrix::from_element(1, 1, 1.0),
        dv(&[1.0]),
        Cone::NonnegativeOrthant(1),
    )
    .expect("valid toy")]
}

/// `min (xi1-2)^2 + (xi2-2)^2 s.t. xi1 + xi2 - 2 = 0`; `xi* = (1, 1)`.
pub fn resource_toy2() -> Vec<ResourceAgentProblem> {
    (0..2)
        .map(|_| {
            ResourceAgentProblem::new(
                ProxFunction::Zero,
                SmoothFunction::Quadratic {
                    q_matrix: DMatrix::from_element(1, 1, 2.0),
                    linear: dv(&[-4.0]),
                    constant: 4.0,
                },
                DMatrix::from_element(1, 1, 1.0),
                dv(&[1.0]),
                Cone::Zero(1),
            )
            .expect("valid toy")
        })
        .collect()
}

/// Seeded resource suite: strongly convex quadratics, random coupling
/// matrices, orthant cone, Slater point at the all-ones vector.
pub fn resource_suite(n_agents: usize, dim: usize, m: usize, seed: u64) -> Vec<ResourceAgentProblem> {
    let mut rng = substream(seed, "qp-resource");
    (0..n_agents)
        .map(|_| {
            let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
            let q_matrix = &g.transpose() * &g + DMatrix::identity(dim, dim) * 0.8;
            let linear = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let r_matrix = DMatrix::from_fn(m, dim, |_, _| rng.gen_range(-1.0..1.0));
            // r_i = R_i * 1 - margin/N keeps xi = 1 strictly feasible globally
            let ones = DVector::from_element(dim, 1.0);
            let r_vec = &r_matrix * ones - DVector::from_element(m, 1.0) / n_agents as f64;
            ResourceAgentProblem::new(
                ProxFunction::Zero,
                SmoothFunction::Quadratic {
                    q_matrix,
                    linear,
                    constant: 0.0,
                },
                r_matrix,
                r_vec,
                Cone::NonnegativeOrthant(m),
            )
            .expect("valid resource agent")
        })
        .collect()
}

/// Resolves a problem name from a run config to a consensus problem set.
pub fn consensus_by_name(name: &str, seed: u64, bound: Option<f64>) -> Result<Vec<AgentProblem>> {
    match name {
        "toy1" => Ok(toy1()),
        "toy2" => Ok(toy2()),
        "qp5" => Ok(qp_consensus_suite(5, 3, seed, bound)),
        other => Err(Error::Config(format!("unknown consensus problem {other:?}"))),
    }
}

/// Resolves a problem name to a resource problem set.
pub fn resource_by_name(name: &str, seed: u64) -> Result<Vec<ResourceAgentProblem>> {
    match name {
        "resource_toy1" => Ok(resource_toy1()),
        "resource_toy2" => Ok(resource_toy2()),
        "resource4" => Ok(resource_suite(4, 2, 2, seed)),
        other => Err(Error::Config(format!("unknown resource problem {other:?}"))),
    }
}
