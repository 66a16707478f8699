//! Radius bound on the dual (super)level set from a Slater point: any dual
//! point with `q(y) >= q(ybar)` satisfies `||y|| <= (Phi(point) - q(ybar)) / r`
//! for every `r` below the interior margin of the constraint image. The
//! convex surrogate `r_tilde = min { <w, g> : ||w||_1 = 1, w in K* }` is
//! closed-form for orthants and solved numerically otherwise.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::cones_prox::Cone;
use crate::dpda_resource::{global_residual, ResourceAgentProblem};
use crate::error::{Error, Result};
use crate::metrics_bounds::INDICATOR_TOL;
use crate::oracle::{minimize_unconstrained_resource, SolveOptions};
use crate::stacked::Stacked;

fn orthant_only(cone: &Cone) -> bool {
    match cone {
        Cone::NonnegativeOrthant(_) => true,
        Cone::Product(parts) => parts.iter().all(orthant_only),
        _ => false,
    }
}

/// Normalized projection onto the dual-cone section `{w in K*: ||w||_1 = 1}`;
/// `None` when the projection collapses to zero.
fn project_to_section(cone: &Cone, w: &DVector<f64>) -> Option<DVector<f64>> {
    let p = cone.project_dual(w).ok()?;
    let l1: f64 = p.iter().map(|v| v.abs()).sum();
    if l1 < 1e-14 {
        None
    } else {
        Some(p / l1)
    }
}

/// `r_tilde`: exact `min_j g_j` on orthants; projected subgradient descent
/// over the normalized dual-cone section with a seeded multi-start and a
/// 10^6-point boundary-sampling cross-check otherwise (the smaller of the
/// two estimates is returned, which can only slacken the radius safely).
pub fn compute_r_tilde(g_value: &DVector<f64>, cone: &Cone) -> Result<f64> {
    if g_value.len() != cone.dim() {
        return Err(Error::dim("slater image", cone.dim(), g_value.len()));
    }
    if cone.distance(g_value)? > 0.0 {
        return Err(Error::NotSlater(-cone.distance(g_value)?));
    }
    let r = if orthant_only(cone) {
        g_value.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        let sub = subgradient_min(g_value, cone);
        let samp = sampling_min(g_value, cone, 1_000_000);
        sub.min(samp)
    };
    if r <= 0.0 {
        return Err(Error::NotSlater(r));
    }
    Ok(r)
}

fn subgradient_min(g: &DVector<f64>, cone: &Cone) -> f64 {
    let m = g.len();
    let mut rng = ChaCha12Rng::seed_from_u64(0xd0a1);
    let mut starts: Vec<DVector<f64>> = Vec::new();
    for j in 0..m {
        let mut e = DVector::zeros(m);
        e[j] = 1.0;
        starts.push(e.clone());
        starts.push(-e);
    }
    for _ in 0..16 {
        starts.push(DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)));
    }
    let eta0 = 0.5 / g.norm().max(1e-12);
    let mut best = f64::INFINITY;
    for start in starts {
        let Some(mut w) = project_to_section(cone, &start) else {
            continue;
        };
        let mut local_best = w.dot(g);
        for t in 1..=4000usize {
            let eta = eta0 / (t as f64).sqrt();
            let cand = &w - eta * g;
            let Some(next) = project_to_section(cone, &cand) else {
                break;
            };
            w = next;
            local_best = local_best.min(w.dot(g));
        }
        best = best.min(local_best);
    }
    best
}

fn sampling_min(g: &DVector<f64>, cone: &Cone, samples: usize) -> f64 {
    let m = g.len();
    let mut rng = ChaCha12Rng::seed_from_u64(0x5a3c);
    let normal = rand_distr::StandardNormal;
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let u = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(normal));
        if let Some(w) = project_to_section(cone, &u) {
            best = best.min(w.dot(g));
        }
    }
    best
}

/// Slater-point data backing the radius bound.
#[derive(Debug, Clone)]
pub struct SlaterCertificate {
    pub g_value: DVector<f64>,
    pub cone: Cone,
    /// Primal objective at the Slater point.
    pub phi_at_point: f64,
    /// Any valid dual lower bound `q(ybar)` (default: unconstrained minimum).
    pub dual_lower_bound: f64,
    pub r_tilde: f64,
}

impl SlaterCertificate {
    pub fn new(
        g_value: DVector<f64>,
        cone: Cone,
        phi_at_point: f64,
        dual_lower_bound: f64,
    ) -> Result<Self> {
        let r_tilde = compute_r_tilde(&g_value, &cone)?;
        Ok(SlaterCertificate {
            g_value,
            cone,
            phi_at_point,
            dual_lower_bound,
            r_tilde,
        })
    }

    /// Builds the certificate for a resource problem from a strictly feasible
    /// point; `q(0)` comes from the unconstrained minimization.
    pub fn from_resource(
        problems: &[ResourceAgentProblem],
        slater_point: &Stacked,
        opts: &SolveOptions,
    ) -> Result<Self> {
        let g = global_residual(problems, slater_point);
        let phi: f64 = problems
            .iter()
            .zip(slater_point)
            .map(|(p, xi)| p.objective(xi, INDICATOR_TOL))
            .sum();
        let q0 = minimize_unconstrained_resource(problems, opts)?;
        SlaterCertificate::new(g, problems[0].cone.clone(), phi, q0)
    }
}

/// `(Phi(point) - q(ybar)) / r_tilde`; zero when the gap is degenerate.
pub fn dual_radius(cert: &SlaterCertificate) -> Result<f64> {
    if cert.r_tilde <= 0.0 {
        return Err(Error::NotSlater(cert.r_tilde));
    }
    let gap = cert.phi_at_point - cert.dual_lower_bound;
    Ok(gap.max(0.0) / cert.r_tilde)
}
