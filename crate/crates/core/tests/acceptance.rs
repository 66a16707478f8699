//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use dpda::catalog;
use dpda::cones_prox::{Cone, ProxFunction, SmoothFunction};
use dpda::dpda_dynamic::{
    consensus_schedule, dpda_d_run, select_stepsizes_dynamic_uniform, DynamicConfig,
};
use dpda::dpda_resource::{
    dpda_r_run, global_residual, select_stepsizes_resource_uniform, ResourceAgentProblem,
    ResourceConfig,
};
use dpda::dpda_static::{dpda_s_run, select_stepsizes_static_uniform, AgentProblem};
use dpda::dual_bound::{compute_r_tilde, dual_radius, SlaterCertificate};
use dpda::experiments::{
    consensus_classifier, evaluate_classifier, generate_svm_data, oracle_classifier,
    run_experiment_suite, spearman_rho, Split, SvmSuiteConfig,
};
use dpda::metrics_bounds::{
    attach_dynamic_certificate, attach_resource_certificate, attach_static_certificate,
    theta3_sum, theta5_sum, LogSchedule, RunOptions,
};
use dpda::network::{
    mixing_constants, ActivationPolicy, Graph, MixingProcess,
};
use dpda::oracle::{solve_consensus, solve_resource, SolveOptions};
use dpda::stacked::Stacked;

fn dv(s: &[f64]) -> DVector<f64> {
    DVector::from_vec(s.to_vec())
}

fn zeros_for(problems: &[AgentProblem]) -> Stacked {
    problems.iter().map(|p| DVector::zeros(p.dim())).collect()
}

// -------------------------------------------------------------------------
// criterion 1: cone calculus on >= 10^4 random vectors per variant
// -------------------------------------------------------------------------
#[test]
fn acceptance_01_cone_calculus() {
    let variants: Vec<Cone> = vec![
        Cone::Zero(4),
        Cone::Free(4),
        Cone::NonnegativeOrthant(5),
        Cone::SecondOrderCone(2),
        Cone::SecondOrderCone(4),
        Cone::Product(vec![
            Cone::NonnegativeOrthant(2),
            Cone::SecondOrderCone(3),
            Cone::Zero(1),
        ]),
    ];
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let start = std::time::Instant::now();
    for cone in &variants {
        let d = cone.dim();
        for _ in 0..10_000 {
            let v = DVector::from_fn(d, |_, _| rng.gen_range(-20.0..20.0));
            let scale = 1.0 + v.norm();
            let p = cone.project(&v).unwrap();
            let q = cone.project_polar(&v).unwrap();
            assert!((&p + &q - &v).norm() <= 1e-10 * scale, "moreau split");
            assert!(p.dot(&q).abs() <= 1e-10 * scale * scale, "orthogonality");
            assert!((cone.project(&p).unwrap() - &p).norm() <= 1e-10 * scale, "idempotence");
            let dist = cone.distance(&v).unwrap();
            assert!((dist - q.norm()).abs() <= 1e-10 * scale, "distance consistency");
            assert!((dist == 0.0) == (cone.contains(&v, 1e-12 * scale).unwrap()));
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}");
    println!(
        "criterion 01 cone calculus: PASS ({} variants x 10^4 vectors in {elapsed:?})",
        variants.len()
    );
}

// -------------------------------------------------------------------------
// criterion 2: geometric mixing bound on 20 sampled processes
// -------------------------------------------------------------------------
#[test]
fn acceptance_02_mixing_theory() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    for sample in 0..20 {
        let n = rng.gen_range(2..=8usize);
        let t_window = rng.gen_range(1..=4usize);
        let prob = rng.gen_range(0.2..0.9);
        let graph = if rng.gen_bool(0.5) {
            Graph::complete(n)
        } else if n >= 3 {
            Graph::ring(n)
        } else {
            Graph::path(n)
        };
        let mut process = MixingProcess::new(
            graph,
            ActivationPolicy::BernoulliEdges {
                prob,
                period: t_window,
            },
            1000 + sample,
        )
        .unwrap();
        let constants = process.constants();
        assert!((process.zeta() - 1.0 / n as f64).abs() < 1e-15);
        let mut w = DMatrix::<f64>::identity(n, n);
        for step in 1..=100usize {
            let v = process.next_matrix();
            // doubly stochastic to 1e-12
            for i in 0..n {
                let row: f64 = (0..n).map(|j| v[(i, j)]).sum();
                let col: f64 = (0..n).map(|j| v[(j, i)]).sum();
                assert!((row - 1.0).abs() <= 1e-12 && (col - 1.0).abs() <= 1e-12);
            }
            w = v * w;
            let bound = constants.gamma_mix * constants.alpha.powi(step as i32);
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (w[(i, j)] - 1.0 / n as f64).abs() <= bound + 1e-12,
                        "sample {sample} step {step} entry ({i},{j})"
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!("criterion 02 mixing theory: PASS (20 processes, t-s <= 100, {elapsed:?})");
}

// -------------------------------------------------------------------------
// criterion 3: step-size gates on 100 random draws each
// -------------------------------------------------------------------------
#[test]
fn acceptance_03_stepsize_gates() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    for draw in 0..100 {
        let n = rng.gen_range(2..=6usize);
        let graph = match draw % 3 {
            0 => Graph::complete(n),
            1 if n >= 3 => Graph::ring(n),
            _ => Graph::path(n),
        };
        let gamma = rng.gen_range(0.1..3.0);
        let c = rng.gen_range(0.1..2.0);
        let problems: Vec<AgentProblem> = (0..n)
            .map(|_| {
                let l: f64 = rng.gen_range(0.0..4.0);
                let sigma: f64 = rng.gen_range(0.0..3.0);
                AgentProblem::new(
                    2,
                    0,
                    ProxFunction::Zero,
                    SmoothFunction::Quadratic {
                        q_matrix: DMatrix::identity(2, 2) * l,
                        linear: DVector::zeros(2),
                        constant: 0.0,
                    },
                    DMatrix::from_row_slice(1, 2, &[sigma, 0.0]),
                    dv(&[0.0]),
                    Cone::NonnegativeOrthant(1),
                )
                .unwrap()
            })
            .collect();
        let steps = select_stepsizes_static_uniform(&problems, &graph, gamma, c).unwrap();
        for (i, p) in problems.iter().enumerate() {
            let d = graph.degree(i) as f64;
            let slack = (1.0 / steps.tau[i] - p.lipschitz - 2.0 * gamma * d) / steps.kappa[i]
                - p.sigma_max_a * p.sigma_max_a;
            assert!(slack >= -1e-9, "static slack {slack} at draw {draw}");
        }

        let rproblems: Vec<ResourceAgentProblem> = (0..n)
            .map(|_| {
                let l: f64 = rng.gen_range(0.0..4.0);
                let sigma: f64 = rng.gen_range(0.0..3.0);
                ResourceAgentProblem::new(
                    ProxFunction::Zero,
                    SmoothFunction::Quadratic {
                        q_matrix: DMatrix::identity(2, 2) * l,
                        linear: DVector::zeros(2),
                        constant: 0.0,
                    },
                    DMatrix::from_row_slice(1, 2, &[sigma, 0.0]),
                    dv(&[0.0]),
                    Cone::NonnegativeOrthant(1),
                )
                .unwrap()
            })
            .collect();
        let margin = rng.gen_range(0.1..2.0);
        let rsteps = select_stepsizes_resource_uniform(&rproblems, gamma, margin).unwrap();
        for (i, p) in rproblems.iter().enumerate() {
            let slack = (1.0 / rsteps.tau[i] - p.lipschitz) * (1.0 / rsteps.kappa[i] - gamma)
                - p.sigma_max_r * p.sigma_max_r;
            assert!(slack >= -1e-9, "resource slack {slack} at draw {draw}");
            assert!(1.0 / rsteps.tau[i] > p.lipschitz);
            assert!(1.0 / rsteps.kappa[i] > gamma);
        }
    }
    println!("criterion 03 step-size gates: PASS (100 random draws, both conditions)");
}

// -------------------------------------------------------------------------
// criterion 4: ergodic O(1/K) decay for all three solvers
// -------------------------------------------------------------------------
fn powers_schedule() -> Vec<usize> {
    (7..=14).map(|e| 1usize << e).collect()
}

fn ratio_check(errors: &[(usize, f64)], what: &str) {
    for pair in errors.windows(2) {
        let (k0, e0) = pair[0];
        let (k1, e1) = pair[1];
        assert_eq!(k1, 2 * k0);
        assert!(
            e1 / e0 <= 0.75,
            "{what}: e({k1})/e({k0}) = {:.4} > 0.75 (e0={e0:.3e}, e1={e1:.3e})",
            e1 / e0
        );
    }
}

#[test]
fn acceptance_04_ergodic_decay() {
    let start = std::time::Instant::now();

    // static: N=5 seed-42 QP suite on a ring
    let problems = catalog::qp_consensus_suite(5, 3, 42, None);
    let graph = Graph::ring(5);
    let oracle = solve_consensus(&problems, Some(&graph), &SolveOptions::default()).unwrap();
    assert!(oracle.converged);
    let steps = select_stepsizes_static_uniform(&problems, &graph, 1.0, 1.0).unwrap();
    let mut points = powers_schedule();
    points.push(100_000);
    let opts = RunOptions {
        log: LogSchedule::Explicit(points.clone()),
        oracle_objective: Some(oracle.objective),
        snapshots: true,
        diagnostic_shadow: false,
    };
    let report = dpda_s_run(&problems, &graph, &steps, &zeros_for(&problems), 100_000, &opts).unwrap();
    let mut errors = Vec::new();
    for (row, snap) in report.rows.iter().zip(&report.snapshots) {
        if !powers_schedule().contains(&row.k) {
            continue;
        }
        let xbar: Stacked = snap.xbar.iter().map(|v| dv(v)).collect();
        let mx = graph
            .incidence_apply(&xbar)
            .unwrap()
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt();
        errors.push((row.k, row.subopt + row.infeas_sum + mx));
    }
    ratio_check(&errors, "static");
    // the seeded suite also matches the centralized oracle at K = 1e5
    let final_row = report.rows.last().unwrap();
    assert_eq!(final_row.k, 100_000);
    assert!(final_row.subopt <= 1e-3, "static subopt {:.3e}", final_row.subopt);

    // dynamic: same suite with a compact domain, Bernoulli(0.7, T=3), p = 2
    let dproblems = catalog::qp_consensus_suite(5, 3, 42, Some(10.0));
    let doracle = solve_consensus(&dproblems, Some(&graph), &SolveOptions::default()).unwrap();
    let dsteps = select_stepsizes_dynamic_uniform(&dproblems, 1.0, 1.0).unwrap();
    let dconfig = DynamicConfig::new(2.0, 10.0, dsteps);
    let mut process = MixingProcess::new(
        graph.clone(),
        ActivationPolicy::BernoulliEdges {
            prob: 0.7,
            period: 3,
        },
        11,
    )
    .unwrap();
    let mut dpoints = powers_schedule();
    dpoints.push(10_000);
    let dopts = RunOptions {
        log: LogSchedule::Explicit(dpoints),
        oracle_objective: Some(doracle.objective),
        snapshots: false,
        diagnostic_shadow: false,
    };
    let dreport = dpda_d_run(
        &dproblems,
        &mut process,
        &dconfig,
        &zeros_for(&dproblems),
        16_384,
        &dopts,
    )
    .unwrap();
    let derrors: Vec<(usize, f64)> = dreport
        .rows
        .iter()
        .filter(|r| powers_schedule().contains(&r.k))
        .map(|r| (r.k, r.subopt + r.infeas_sum + r.d_ctilde))
        .collect();
    ratio_check(&derrors, "dynamic");
    let at_1e4 = dreport.rows.iter().find(|r| r.k == 10_000).unwrap();
    assert!(at_1e4.subopt <= 1e-2, "dynamic subopt {:.3e}", at_1e4.subopt);

    // resource: N=4 seed-13 suite
    let rproblems = catalog::resource_suite(4, 2, 2, 13);
    let rgraph = Graph::ring(4);
    let roracle = solve_resource(&rproblems, &SolveOptions::default()).unwrap();
    let rsteps = select_stepsizes_resource_uniform(&rproblems, 1.0, 1.0).unwrap();
    let rconfig = ResourceConfig::new(2.0, 10.0, rsteps);
    let mut rprocess = MixingProcess::new(
        rgraph.clone(),
        ActivationPolicy::BernoulliEdges {
            prob: 0.7,
            period: 3,
        },
        13,
    )
    .unwrap();
    let mut rpoints = powers_schedule();
    rpoints.push(10_000);
    let ropts = RunOptions {
        log: LogSchedule::Explicit(rpoints),
        oracle_objective: Some(roracle.objective),
        snapshots: false,
        diagnostic_shadow: false,
    };
    let rreport = dpda_r_run(
        &rproblems,
        &mut rprocess,
        &rconfig,
        &zeros_for_resource(&rproblems),
        16_384,
        &ropts,
    )
    .unwrap();
    let rerrors: Vec<(usize, f64)> = rreport
        .rows
        .iter()
        .filter(|r| powers_schedule().contains(&r.k))
        .map(|r| (r.k, r.subopt + r.infeas_sum))
        .collect();
    ratio_check(&rerrors, "resource");
    let rat_1e4 = rreport.rows.iter().find(|r| r.k == 10_000).unwrap();
    assert!(rat_1e4.subopt <= 1e-2, "resource subopt {:.3e}", rat_1e4.subopt);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}");
    println!(
        "criterion 04 ergodic decay: PASS (e(2K)/e(K) <= 0.75 for K in 2^7..2^13, all solvers, {elapsed:?})"
    );
}

fn zeros_for_resource(problems: &[ResourceAgentProblem]) -> Stacked {
    problems.iter().map(|p| DVector::zeros(p.dim())).collect()
}

// -------------------------------------------------------------------------
// criterion 5: bound certificates hold at every logged K; plateau for p=1,2,3
// -------------------------------------------------------------------------
#[test]
fn acceptance_05_certificates() {
    // static toy: N=2, log points include 1e2, 1e3, 1e4
    let problems = catalog::toy2();
    let graph = Graph::path(2);
    let oracle = solve_consensus(&problems, Some(&graph), &SolveOptions::default()).unwrap();
    let steps = select_stepsizes_static_uniform(&problems, &graph, 1.0, 1.0).unwrap();
    let opts = RunOptions {
        log: LogSchedule::Explicit(vec![100, 1000, 10_000]),
        oracle_objective: Some(oracle.objective),
        snapshots: true,
        diagnostic_shadow: false,
    };
    let mut report =
        dpda_s_run(&problems, &graph, &steps, &zeros_for(&problems), 10_000, &opts).unwrap();
    attach_static_certificate(
        &mut report,
        &problems,
        &graph,
        &oracle.static_saddle().unwrap(),
        oracle.objective,
    )
    .unwrap();
    let cert = report.certificate.as_ref().unwrap();
    assert!(cert.theta_fixed.is_finite() && cert.theta_fixed > 0.0);
    assert!(cert.holds(), "static toy certificate violated");

    // static QP suite
    let qp = catalog::qp_consensus_suite(5, 3, 42, None);
    let ring = Graph::ring(5);
    let qp_oracle = solve_consensus(&qp, Some(&ring), &SolveOptions::default()).unwrap();
    let qp_steps = select_stepsizes_static_uniform(&qp, &ring, 1.0, 1.0).unwrap();
    let qp_opts = RunOptions {
        log: LogSchedule::geometric(25),
        oracle_objective: Some(qp_oracle.objective),
        snapshots: true,
        diagnostic_shadow: false,
    };
    let mut qp_report =
        dpda_s_run(&qp, &ring, &qp_steps, &zeros_for(&qp), 8192, &qp_opts).unwrap();
    attach_static_certificate(
        &mut qp_report,
        &qp,
        &ring,
        &qp_oracle.static_saddle().unwrap(),
        qp_oracle.objective,
    )
    .unwrap();
    assert!(qp_report.certificate.as_ref().unwrap().holds());

    // dynamic QP suite with certificates
    let dqp = catalog::qp_consensus_suite(5, 3, 42, Some(10.0));
    let d_oracle = solve_consensus(&dqp, Some(&ring), &SolveOptions::default()).unwrap();
    let d_steps = select_stepsizes_dynamic_uniform(&dqp, 1.0, 1.0).unwrap();
    let d_config = DynamicConfig::new(2.0, 10.0, d_steps);
    let mut process = MixingProcess::new(
        ring.clone(),
        ActivationPolicy::BernoulliEdges {
            prob: 0.7,
            period: 3,
        },
        11,
    )
    .unwrap();
    let constants = process.constants();
    let d_opts = RunOptions {
        log: LogSchedule::geometric(25),
        oracle_objective: Some(d_oracle.objective),
        snapshots: true,
        diagnostic_shadow: false,
    };
    let mut d_report = dpda_d_run(
        &dqp,
        &mut process,
        &d_config,
        &zeros_for(&dqp),
        8192,
        &d_opts,
    )
    .unwrap();
    attach_dynamic_certificate(
        &mut d_report,
        &dqp,
        &ring,
        &d_oracle.dynamic_saddle().unwrap(),
        d_oracle.objective,
        &constants,
        10.0,
        2.0,
    )
    .unwrap();
    assert!(d_report.certificate.as_ref().unwrap().holds());

    // resource suite with certificates
    let rp = catalog::resource_suite(4, 2, 2, 13);
    let r_oracle = solve_resource(&rp, &SolveOptions::default()).unwrap();
    let y_norm = dv(r_oracle.y.as_ref().unwrap()).norm();
    assert!(y_norm < 10.0, "B_d must dominate the dual norm");
    let r_steps = select_stepsizes_resource_uniform(&rp, 1.0, 1.0).unwrap();
    let r_config = ResourceConfig::new(2.0, 10.0, r_steps);
    let rgraph = Graph::ring(4);
    let mut r_process = MixingProcess::new(
        rgraph,
        ActivationPolicy::BernoulliEdges {
            prob: 0.7,
            period: 3,
        },
        13,
    )
    .unwrap();
    let r_constants = r_process.constants();
    let r_opts = RunOptions {
        log: LogSchedule::geometric(25),
        oracle_objective: Some(r_oracle.objective),
        snapshots: true,
        diagnostic_shadow: false,
    };
    let mut r_report = dpda_r_run(
        &rp,
        &mut r_process,
        &r_config,
        &zeros_for_resource(&rp),
        8192,
        &r_opts,
    )
    .unwrap();
    attach_resource_certificate(
        &mut r_report,
        &rp,
        &r_oracle.resource_saddle().unwrap(),
        r_oracle.objective,
        &r_constants,
        10.0,
        2.0,
    )
    .unwrap();
    assert!(r_report.certificate.as_ref().unwrap().holds());

    // summability plateau for p in {1, 2, 3}: a threshold K* exists with
    // Theta(2K) - Theta(K) <= 1e-6 Theta(K) (searched by doubling)
    let plateau_constants = mixing_constants(0.5, 1, 3).unwrap();
    for p in [1.0, 2.0, 3.0] {
        for flavor in ["theta3", "theta5"] {
            let tail = |from: usize, to: usize| -> f64 {
                match flavor {
                    "theta3" => theta3_sum(3, 1.0, &plateau_constants, 1.0, 1.0, p, from, to),
                    _ => theta5_sum(3, 1.0, &plateau_constants, 1.0, 1.0, p, from, to),
                }
            };
            let mut k = 1024usize;
            let mut total = tail(1, k);
            let mut found = false;
            while k <= 1 << 27 {
                let t = tail(k + 1, 2 * k);
                assert!(t >= 0.0);
                if t <= 1e-6 * total {
                    found = true;
                    break;
                }
                total += t;
                k *= 2;
            }
            assert!(found, "no {flavor} plateau for p={p}");
        }
    }
    println!("criterion 05 certificates: PASS (static/dynamic/resource hold; plateau p=1,2,3)");
}

// -------------------------------------------------------------------------
// criterion 6: inexactness bounds and bitwise exactness degeneracy
// -------------------------------------------------------------------------
#[test]
fn acceptance_06_inexactness_bounds() {
    // diagnostic run on a ring: the runner itself enforces the mu and e
    // bounds per iteration (it errors out on violation); re-check here too
    let problems = catalog::qp_consensus_suite(5, 3, 42, Some(10.0));
    let graph = Graph::ring(5);
    let steps = select_stepsizes_dynamic_uniform(&problems, 1.0, 1.0).unwrap();
    let config = DynamicConfig::new(2.0, 10.0, steps.clone());
    let mut process = MixingProcess::new(
        graph.clone(),
        ActivationPolicy::BernoulliEdges {
            prob: 0.6,
            period: 3,
        },
        21,
    )
    .unwrap();
    let constants = process.constants();
    let opts = RunOptions {
        log: LogSchedule::geometric(10),
        oracle_objective: None,
        snapshots: false,
        diagnostic_shadow: true,
    };
    let report = dpda_d_run(
        &problems,
        &mut process,
        &config,
        &zeros_for(&problems),
        2000,
        &opts,
    )
    .unwrap();
    assert_eq!(report.e_norms.len(), 2000);
    let n = problems.len() as f64;
    for (idx, (&e, &mu)) in report.e_norms.iter().zip(&report.mu_norms).enumerate() {
        let k = idx + 1;
        let q = report.q_history[idx];
        assert!(mu <= 4.0 * 1.0 * n.sqrt() * 10.0 * k as f64 + 1e-9);
        let e_bound =
            4.0 * n.powf(1.5) * 10.0 * constants.gamma_mix * constants.alpha.powi(q as i32)
                * (k as f64 + 1.0);
        assert!(e <= e_bound + 1e-9, "k={k}: e={e} bound={e_bound}");
    }

    // complete graph + full mixing + q == 1: the gossip operator IS the
    // exact projection, so e == 0 and the two runs agree bitwise
    let cproblems = catalog::qp_consensus_suite(4, 3, 7, Some(10.0));
    let complete = Graph::complete(4);
    let csteps = select_stepsizes_dynamic_uniform(&cproblems, 1.0, 1.0).unwrap();
    let mk_config = |exact: bool| {
        let mut c = DynamicConfig::new(2.0, 10.0, csteps.clone());
        c.q_override = Some(1);
        c.exact_projection = exact;
        c
    };
    let run = |exact: bool| {
        let mut proc =
            MixingProcess::new(complete.clone(), ActivationPolicy::AlwaysFull, 0).unwrap();
        let o = RunOptions {
            log: LogSchedule::geometric(8),
            oracle_objective: None,
            snapshots: false,
            diagnostic_shadow: true,
        };
        dpda_d_run(
            &cproblems,
            &mut proc,
            &mk_config(exact),
            &zeros_for(&cproblems),
            2000,
            &o,
        )
        .unwrap()
    };
    let approx_run = run(false);
    let exact_run = run(true);
    assert!(approx_run.e_norms.iter().all(|&e| e == 0.0), "e must vanish");
    for (a, b) in approx_run.final_x.iter().zip(&exact_run.final_x) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), y.to_bits(), "bitwise mismatch");
        }
    }
    for (a, b) in approx_run.final_xbar.iter().zip(&exact_run.final_xbar) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), y.to_bits(), "bitwise mismatch in averages");
        }
    }
    println!("criterion 06 inexactness bounds: PASS (mu/e bounds hold; exact-mixing run bitwise equal)");
}

// -------------------------------------------------------------------------
// criterion 7: communication accounting
// -------------------------------------------------------------------------
#[test]
fn acceptance_07_communication_accounting() {
    // independent integer-arithmetic summation oracle
    let direct = |p: u32| -> usize {
        (1..=100usize)
            .map(|k| {
                let mut q = 1usize;
                while q.pow(p) < k {
                    q += 1;
                }
                q
            })
            .sum()
    };
    assert_eq!(direct(1), 5050);
    assert_eq!(direct(2), 715);

    let problems = catalog::qp_consensus_suite(3, 2, 5, Some(10.0));
    let graph = Graph::ring(3);
    let steps = select_stepsizes_dynamic_uniform(&problems, 1.0, 1.0).unwrap();
    for (p, expected) in [(1.0, 5050usize), (2.0, 715usize)] {
        let config = DynamicConfig::new(p, 10.0, steps.clone());
        let mut process = MixingProcess::new(
            graph.clone(),
            ActivationPolicy::BernoulliEdges {
                prob: 0.5,
                period: 2,
            },
            3,
        )
        .unwrap();
        let report = dpda_d_run(
            &problems,
            &mut process,
            &config,
            &zeros_for(&problems),
            100,
            &RunOptions::quiet(),
        )
        .unwrap();
        assert_eq!(report.comm_total, expected, "p={p}");
        assert_eq!(report.q_history.len(), 100);
        let from_schedule: usize = (1..=100)
            .map(|k| consensus_schedule(k, p).unwrap())
            .sum();
        assert_eq!(from_schedule, expected);
    }
    println!("criterion 07 communication accounting: PASS (p=1: 5050, p=2: 715 by direct summation)");
}

// -------------------------------------------------------------------------
// criterion 8: dual-set radius from Slater points on 50 random QPs
// -------------------------------------------------------------------------
#[test]
fn acceptance_08_dual_bound() {
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    for trial in 0..50 {
        let n_agents = rng.gen_range(1..=3usize);
        let m = rng.gen_range(1..=4usize);
        let dim = rng.gen_range(1..=3usize);
        let problems: Vec<ResourceAgentProblem> = (0..n_agents)
            .map(|_| {
                let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
                let q_matrix = &g.transpose() * &g + DMatrix::identity(dim, dim) * 1.0;
                let linear = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
                let r_matrix = DMatrix::from_fn(m, dim, |_, _| rng.gen_range(-1.0..1.0));
                let ones = DVector::from_element(dim, 1.0);
                let margin = rng.gen_range(0.3..1.5);
                let r_vec = &r_matrix * ones - DVector::from_element(m, margin / n_agents as f64);
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
                .unwrap()
            })
            .collect();
        let slater: Stacked = problems
            .iter()
            .map(|p| DVector::from_element(p.dim(), 1.0))
            .collect();
        let g_val = global_residual(&problems, &slater);
        let cert = SlaterCertificate::from_resource(&problems, &slater, &SolveOptions::default())
            .unwrap();
        // orthant closed form is exact
        let min_component = g_val.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(cert.r_tilde, min_component, "trial {trial}");
        assert_eq!(
            compute_r_tilde(&g_val, &problems[0].cone).unwrap(),
            min_component
        );
        let radius = dual_radius(&cert).unwrap();
        let sol = solve_resource(&problems, &SolveOptions::default()).unwrap();
        assert!(sol.converged, "trial {trial}");
        let y_norm = dv(sol.y.as_ref().unwrap()).norm();
        assert!(
            y_norm <= radius + 1e-7,
            "trial {trial}: ||y*|| = {y_norm} > radius {radius}"
        );
    }
    println!("criterion 08 dual bound: PASS (50 random orthant QPs, ||y*|| <= (Phi - q)/r_tilde)");
}

// -------------------------------------------------------------------------
// criterion 9: SVM experiment reproduction
// -------------------------------------------------------------------------
#[test]
fn acceptance_09_svm_reproduction() {
    let start = std::time::Instant::now();
    let cfg = SvmSuiteConfig::default();
    let suite = run_experiment_suite(&cfg).unwrap();
    let out_dir = std::env::temp_dir().join("dpda_svm_acceptance");
    suite.write_outputs(&out_dir).unwrap();

    // grid shape: 2 C x 2 connectivities x {static, dynamic} x 5 reps = 40
    assert_eq!(suite.runs.len(), 40);
    for run in &suite.runs {
        assert!(
            run.error.is_none(),
            "{} failed: {:?}",
            run.label(),
            run.error
        );
    }

    let dataset = generate_svm_data(cfg.data_seed);
    let oracle = &suite
        .oracles
        .iter()
        .find(|(c, _)| *c == 10.0)
        .expect("C=10 oracle")
        .1;
    let (w_star, b_star) = oracle_classifier(oracle);
    let oracle_rate = evaluate_classifier(&w_star, b_star, &dataset, Split::Test);

    // final classifier within 2% test misclassification of the oracle, and
    // (w, b) within 1e-2 per node, on the C=10, lambda2=1 static runs
    for run in suite
        .runs
        .iter()
        .filter(|r| r.c_param == 10.0 && r.lambda2_target == 1.0 && r.topology == "static")
    {
        let report = run.report.as_ref().unwrap();
        let (w, b) = consensus_classifier(report);
        let rate = evaluate_classifier(&w, b, &dataset, Split::Test);
        assert!(
            (rate - oracle_rate).abs() <= 0.02,
            "{}: rate {rate} vs oracle {oracle_rate}",
            run.label()
        );
        for node in &report.final_xbar {
            let d = ((node[0] - w_star[0]).powi(2)
                + (node[1] - w_star[1]).powi(2)
                + (node[2] - b_star).powi(2))
            .sqrt();
            assert!(d <= 1e-2, "{}: node deviation {d}", run.label());
        }
        // consensus violation at K = 1e5
        let last = report.rows.last().unwrap();
        assert_eq!(last.k, 100_000);
        assert!(
            last.cons_viol <= 1e-3,
            "{}: cons_viol {:.3e}",
            run.label(),
            last.cons_viol
        );
    }

    // averaged curves trend downward on the C=10, lambda2=1 static case
    let reports = suite.case_reports(10.0, 1.0, "static");
    assert_eq!(reports.len(), 5);
    for (name, col) in [
        ("subopt", 0usize),
        ("infeas", 1),
        ("cons_viol", 2),
    ] {
        let curve = dpda::experiments::averaged_curve(&reports, |m| match col {
            0 => m.subopt,
            1 => m.infeas_sum,
            _ => m.cons_viol,
        });
        // log-spaced checkpoints past the startup transient
        let pts: Vec<(f64, f64)> = curve
            .iter()
            .filter(|(k, _)| *k >= 16)
            .map(|(k, v)| (*k as f64, *v))
            .collect();
        let ks: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let vs: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let rho = spearman_rho(&ks, &vs);
        assert!(rho < -0.9, "{name} trend rho = {rho}");
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1800, "took {elapsed:?}");
    println!(
        "criterion 09 svm reproduction: PASS (40 runs, 2% classifier gap, cons_viol <= 1e-3, trends down; {elapsed:?})"
    );
}

// -------------------------------------------------------------------------
// criterion 10: oracle validity against an independent brute-force solver
// -------------------------------------------------------------------------

/// Independent reference: projected gradient ascent on the dual of the
/// assembled strongly convex QP (`x(theta) = -Q^{-1}(q + A' theta)`,
/// `theta <- P_polar(theta + eta (A x(theta) - b))`).
fn brute_force_qp(problems: &[AgentProblem]) -> f64 {
    let n_s = problems[0].shared_dim;
    assert!(problems.iter().all(|p| p.local_dim == 0));
    let mut q_total = DMatrix::zeros(n_s, n_s);
    let mut lin_total = DVector::zeros(n_s);
    let mut const_total = 0.0;
    for p in problems {
        match &p.f {
            SmoothFunction::Quadratic {
                q_matrix,
                linear,
                constant,
            } => {
                q_total += q_matrix;
                lin_total += linear;
                const_total += constant;
            }
            _ => panic!("battery is quadratic"),
        }
    }
    let rows: usize = problems.iter().map(|p| p.constraint_rows()).sum();
    let mut a = DMatrix::zeros(rows, n_s);
    let mut b = DVector::zeros(rows);
    let mut off = 0;
    for p in problems {
        let m = p.constraint_rows();
        a.view_mut((off, 0), (m, n_s)).copy_from(&p.a_matrix);
        b.rows_mut(off, m).copy_from(&p.b_vec);
        off += m;
    }
    let chol = q_total.clone().cholesky().expect("strongly convex battery");
    let x_of = |theta: &DVector<f64>| -> DVector<f64> {
        -chol.solve(&(&lin_total + a.transpose() * theta))
    };
    // eta = 1 / sigma_max(A Q^{-1} A')
    let aqat = &a * chol.solve(&a.transpose());
    let eta = 1.0
        / aqat
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(0.0, f64::max)
            .max(1e-9);
    let mut theta = DVector::zeros(rows);
    for _ in 0..200_000 {
        let x = x_of(&theta);
        let grad = &a * x - &b;
        // projection onto the polar of the orthant product = nonpositive part
        let next = (&theta + eta * grad).map(|v: f64| v.min(0.0));
        let delta = (&next - &theta).norm();
        theta = next;
        if delta < 1e-13 {
            break;
        }
    }
    let x = x_of(&theta);
    0.5 * x.dot(&(&q_total * &x)) + lin_total.dot(&x) + const_total
}

#[test]
fn acceptance_10_oracle_validity() {
    // hand-KKT cases to 1e-8
    let toy1 = catalog::toy1();
    let sol1 = solve_consensus(&toy1, None, &SolveOptions::default()).unwrap();
    assert!((sol1.per_agent[0][0] - 1.0).abs() <= 1e-8);
    assert!(sol1.objective.abs() <= 1e-8);
    assert!(sol1.theta[0][0].abs() <= 1e-8);

    let toy2 = catalog::toy2();
    let graph2 = Graph::path(2);
    let sol2 = solve_consensus(&toy2, Some(&graph2), &SolveOptions::default()).unwrap();
    assert!((sol2.per_agent[0][0] - 2.5).abs() <= 1e-8);
    assert!((sol2.objective - 2.5).abs() <= 1e-8);
    assert!((sol2.theta[0][0] + 2.0).abs() <= 1e-7);

    let rtoy = catalog::resource_toy1();
    let rsol = solve_resource(&rtoy, &SolveOptions::default()).unwrap();
    assert!((rsol.per_agent[0][0] - 1.0).abs() <= 1e-8);
    assert!((rsol.y.as_ref().unwrap()[0] + 1.0).abs() <= 1e-7);

    // seeded QP battery against the independent dual-ascent solver
    for seed in 0..20u64 {
        let problems = catalog::qp_consensus_suite(4, 3, 1000 + seed, None);
        let sol = solve_consensus(&problems, None, &SolveOptions::default()).unwrap();
        assert!(sol.converged, "seed {seed}");
        let reference = brute_force_qp(&problems);
        assert!(
            (sol.objective - reference).abs() <= 1e-6 * (1.0 + reference.abs()),
            "seed {seed}: oracle {} vs brute force {reference}",
            sol.objective
        );
    }
    println!("criterion 10 oracle validity: PASS (hand KKT exact; 20-QP battery within 1e-6)");
}
