//! Command-line front end: graph generation, solver runs, oracle solves,
//! the SVM experiment suite, and certificate re-verification.
//!
//! Exit codes: 0 success, 1 solver divergence / runtime failure
//! (including a failed `certify`), 2 configuration errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::config::{parse_vector_file, RunConfig, SolverKind};
use crate::dpda_dynamic::{dpda_d_run, select_stepsizes_dynamic_uniform, DynamicConfig};
use crate::dpda_resource::{
    dpda_r_run, select_stepsizes_resource_uniform, ResourceAgentProblem, ResourceConfig,
};
use crate::dpda_static::{dpda_s_run, select_stepsizes_static_uniform, AgentProblem};
use crate::dual_bound::{dual_radius, SlaterCertificate};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment_suite, SvmSuiteConfig};
use crate::metrics_bounds::{
    attach_dynamic_certificate, attach_resource_certificate, attach_static_certificate,
    compute_consensus_metrics, compute_resource_metrics, LogSchedule, RunOptions, RunReport,
};
use crate::network::{generate_graph, mixing_constants, ActivationPolicy, MixingProcess};
use crate::oracle::{solve_consensus, solve_resource, CentralSolution, SolveOptions};
use crate::stacked::Stacked;

#[derive(Parser)]
#[command(
    name = "dpda",
    version,
    about = "Decentralized primal-dual consensus optimization simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a connected graph with a target algebraic connectivity.
    GenGraph {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        lambda2: f64,
        #[arg(long, default_value_t = 0.1)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Edge-list output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the static-topology solver.
    RunStatic(RunArgs),
    /// Run the dynamic-topology solver.
    RunDynamic(RunArgs),
    /// Run the resource-sharing solver.
    RunResource(RunArgs),
    /// Solve the centralized reference problem and dump the solution.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "oracle_solution.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 400_000)]
        max_iter: usize,
    },
    /// Run the distributed-SVM replication suite.
    SvmSuite {
        /// Suite config (TOML, all keys optional); defaults reproduce the
        /// full 40-run grid.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "svm_runs")]
        out: PathBuf,
    },
    /// Re-verify a certified run report against an oracle solution.
    Certify {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the iteration count from the config.
    #[arg(long, short = 'K')]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solve the oracle, snapshot ergodic averages, and attach the bound
    /// certificate to the report.
    #[arg(long)]
    certify: bool,
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_)
                | Error::Parse(_)
                | Error::InvalidArgument(_)
                | Error::DimensionMismatch { .. }
                | Error::Io(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenGraph {
            nodes,
            lambda2,
            tolerance,
            seed,
            out,
        } => gen_graph(nodes, lambda2, tolerance, seed, out.as_deref()),
        Command::RunStatic(args) => run_solver(SolverKind::Static, args),
        Command::RunDynamic(args) => run_solver(SolverKind::Dynamic, args),
        Command::RunResource(args) => run_solver(SolverKind::Resource, args),
        Command::Oracle {
            config,
            out,
            tol,
            max_iter,
        } => oracle_cmd(&config, &out, tol, max_iter),
        Command::SvmSuite { config, out } => svm_suite_cmd(config.as_deref(), &out),
        Command::Certify { run, oracle } => certify_cmd(&run, &oracle),
    }
}

fn gen_graph(nodes: usize, lambda2: f64, tolerance: f64, seed: u64, out: Option<&Path>) -> Result<()> {
    let graph = generate_graph(nodes, lambda2, tolerance, seed)?;
    let achieved = graph.algebraic_connectivity();
    match out {
        Some(path) => {
            graph.write_edge_list(path)?;
            println!(
                "gen-graph: nodes={nodes} edges={} lambda2={achieved:.6} (target {lambda2}) -> {}",
                graph.edges().len(),
                path.display()
            );
        }
        None => {
            print!("{}", graph.to_edge_list());
            eprintln!("gen-graph: lambda2={achieved:.6} (target {lambda2})");
        }
    }
    Ok(())
}

fn load_config(kind: SolverKind, args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if cfg.solver != kind {
        return Err(Error::Config(format!(
            "config solver {:?} does not match the subcommand",
            cfg.solver
        )));
    }
    if let Some(k) = args.iterations {
        cfg.iterations = k;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(g) = args.gamma {
        cfg.gamma = g;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn initial_point(
    cfg: &RunConfig,
    dims: &[usize],
) -> Result<Stacked> {
    match &cfg.x0_file {
        Some(path) => parse_vector_file(path, dims),
        None => Ok(dims.iter().map(|&d| DVector::zeros(d)).collect()),
    }
}

fn run_options(cfg: &RunConfig, certify: bool, oracle_obj: Option<f64>) -> RunOptions {
    RunOptions {
        log: LogSchedule::geometric(cfg.log_points),
        oracle_objective: oracle_obj,
        snapshots: cfg.snapshots || certify,
        diagnostic_shadow: cfg.diagnostic_shadow,
    }
}

fn finalize_report(report: &mut RunReport, cfg: &RunConfig) -> Result<()> {
    report.seed = Some(cfg.seed);
    report.config_echo = Some(
        serde_json::to_value(cfg).map_err(|e| Error::Config(format!("config echo: {e}")))?,
    );
    Ok(())
}

fn write_report(report: &RunReport, cfg: &RunConfig, stem: &str) -> Result<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
    report.write(&dir, stem)?;
    Ok(dir)
}

fn run_solver(kind: SolverKind, args: RunArgs) -> Result<()> {
    let cfg = load_config(kind, &args)?;
    match kind {
        SolverKind::Static => run_static(&cfg, args.certify),
        SolverKind::Dynamic => run_dynamic(&cfg, args.certify),
        SolverKind::Resource => run_resource(&cfg, args.certify),
    }
}

fn run_static(cfg: &RunConfig, certify: bool) -> Result<()> {
    let graph = cfg.resolve_graph()?;
    let problems = cfg.build_consensus_problems(graph.node_count())?;
    let steps = select_stepsizes_static_uniform(&problems, &graph, cfg.gamma, cfg.c_i)?;
    let dims: Vec<usize> = problems.iter().map(AgentProblem::dim).collect();
    let x0 = initial_point(cfg, &dims)?;
    let oracle = if certify || cfg.with_oracle {
        Some(solve_consensus(&problems, Some(&graph), &SolveOptions::default())?)
    } else {
        None
    };
    let opts = run_options(cfg, certify, oracle.as_ref().map(|s| s.objective));
    let mut report = dpda_s_run(&problems, &graph, &steps, &x0, cfg.iterations, &opts)?;
    finalize_report(&mut report, cfg)?;
    if let Some(sol) = &oracle {
        if certify {
            attach_static_certificate(&mut report, &problems, &graph, &sol.static_saddle()?, sol.objective)?;
        }
    }
    let dir = write_report(&report, cfg, "static_run")?;
    let last = report.rows.last();
    println!(
        "run-static: K={} comms={} objective={:.6e} subopt={:.3e} cons_viol={:.3e} certificate={} -> {}",
        report.iterations,
        report.comm_total,
        last.map_or(f64::NAN, |m| m.objective),
        last.map_or(f64::NAN, |m| m.subopt),
        last.map_or(f64::NAN, |m| m.cons_viol),
        report
            .certificate
            .as_ref()
            .map_or("none".to_string(), |c| if c.holds() { "holds".into() } else { "VIOLATED".into() }),
        dir.display()
    );
    Ok(())
}

fn run_dynamic(cfg: &RunConfig, certify: bool) -> Result<()> {
    let graph = cfg.resolve_graph()?;
    let problems = cfg.build_consensus_problems(graph.node_count())?;
    let steps = select_stepsizes_dynamic_uniform(&problems, cfg.gamma, cfg.c_i)?;
    let b_radius = cfg
        .b_radius
        .ok_or_else(|| Error::Config("B is required for dynamic runs".into()))?;
    let mut config = DynamicConfig::new(cfg.p, b_radius, steps);
    config.q_override = cfg.q_fixed;
    config.exact_projection = cfg.exact_projection;
    let dims: Vec<usize> = problems.iter().map(AgentProblem::dim).collect();
    let x0 = initial_point(cfg, &dims)?;
    let act_seed = rand::Rng::gen::<u64>(&mut crate::catalog::substream(cfg.seed, "activation"));
    let mut process = MixingProcess::new(
        graph.clone(),
        ActivationPolicy::BernoulliEdges {
            prob: cfg.activation_prob,
            period: cfg.t_window,
        },
        act_seed,
    )?;
    let oracle = if certify || cfg.with_oracle {
        Some(solve_consensus(&problems, Some(&graph), &SolveOptions::default())?)
    } else {
        None
    };
    let opts = run_options(cfg, certify, oracle.as_ref().map(|s| s.objective));
    let constants = process.constants();
    let mut report = dpda_d_run(&problems, &mut process, &config, &x0, cfg.iterations, &opts)?;
    finalize_report(&mut report, cfg)?;
    if let Some(sol) = &oracle {
        if certify {
            attach_dynamic_certificate(
                &mut report,
                &problems,
                &graph,
                &sol.dynamic_saddle()?,
                sol.objective,
                &constants,
                b_radius,
                cfg.p,
            )?;
        }
    }
    let dir = write_report(&report, cfg, "dynamic_run")?;
    let last = report.rows.last();
    println!(
        "run-dynamic: K={} comms={} objective={:.6e} subopt={:.3e} cons_viol={:.3e} certificate={} -> {}",
        report.iterations,
        report.comm_total,
        last.map_or(f64::NAN, |m| m.objective),
        last.map_or(f64::NAN, |m| m.subopt),
        last.map_or(f64::NAN, |m| m.cons_viol),
        report
            .certificate
            .as_ref()
            .map_or("none".to_string(), |c| if c.holds() { "holds".into() } else { "VIOLATED".into() }),
        dir.display()
    );
    Ok(())
}

fn run_resource(cfg: &RunConfig, certify: bool) -> Result<()> {
    let graph = cfg.resolve_graph()?;
    let problems = cfg.build_resource_problems()?;
    if problems.len() != graph.node_count() {
        return Err(Error::Config(format!(
            "problem {:?} has {} agents but the graph has {} nodes",
            cfg.problem.name,
            problems.len(),
            graph.node_count()
        )));
    }
    let steps = select_stepsizes_resource_uniform(&problems, cfg.gamma, cfg.margin)?;
    let b_dual = resolve_dual_radius(cfg, &problems)?;
    let mut config = ResourceConfig::new(cfg.p, b_dual, steps);
    config.q_override = cfg.q_fixed;
    config.exact_projection = cfg.exact_projection;
    let dims: Vec<usize> = problems.iter().map(ResourceAgentProblem::dim).collect();
    let xi0 = initial_point(cfg, &dims)?;
    let act_seed = rand::Rng::gen::<u64>(&mut crate::catalog::substream(cfg.seed, "activation"));
    let mut process = MixingProcess::new(
        graph.clone(),
        ActivationPolicy::BernoulliEdges {
            prob: cfg.activation_prob,
            period: cfg.t_window,
        },
        act_seed,
    )?;
    let oracle = if certify || cfg.with_oracle {
        Some(solve_resource(&problems, &SolveOptions::default())?)
    } else {
        None
    };
    let constants = process.constants();
    let opts = run_options(cfg, certify, oracle.as_ref().map(|s| s.objective));
    let mut report = dpda_r_run(&problems, &mut process, &config, &xi0, cfg.iterations, &opts)?;
    finalize_report(&mut report, cfg)?;
    if let Some(sol) = &oracle {
        if certify {
            attach_resource_certificate(
                &mut report,
                &problems,
                &sol.resource_saddle()?,
                sol.objective,
                &constants,
                b_dual,
                cfg.p,
            )?;
        }
    }
    let dir = write_report(&report, cfg, "resource_run")?;
    let last = report.rows.last();
    println!(
        "run-resource: K={} comms={} objective={:.6e} subopt={:.3e} infeas={:.3e} certificate={} -> {}",
        report.iterations,
        report.comm_total,
        last.map_or(f64::NAN, |m| m.objective),
        last.map_or(f64::NAN, |m| m.subopt),
        last.map_or(f64::NAN, |m| m.infeas_sum),
        report
            .certificate
            .as_ref()
            .map_or("none".to_string(), |c| if c.holds() { "holds".into() } else { "VIOLATED".into() }),
        dir.display()
    );
    Ok(())
}

/// `B_d` from the config, or from a Slater-point file via the dual-radius
/// bound (inflated a little to keep `||y*|| < B_d` strict).
fn resolve_dual_radius(cfg: &RunConfig, problems: &[ResourceAgentProblem]) -> Result<f64> {
    if let Some(b) = cfg.b_dual {
        return Ok(b);
    }
    if let Some(path) = &cfg.slater_point {
        let dims: Vec<usize> = problems.iter().map(ResourceAgentProblem::dim).collect();
        let point = parse_vector_file(path, &dims)?;
        let cert = SlaterCertificate::from_resource(problems, &point, &SolveOptions::default())?;
        let radius = dual_radius(&cert)?;
        return Ok(radius * 1.05 + 1e-6);
    }
    Err(Error::Config(
        "resource runs need B_d or a slater_point file".into(),
    ))
}

fn oracle_cmd(config: &Path, out: &Path, tol: f64, max_iter: usize) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let opts = SolveOptions {
        tol,
        max_iter,
        progress_every: 0,
    };
    let sol = match cfg.solver {
        SolverKind::Resource => solve_resource(&cfg.build_resource_problems()?, &opts)?,
        _ => {
            let graph = cfg.resolve_graph()?;
            let problems = cfg.build_consensus_problems(graph.node_count())?;
            solve_consensus(&problems, Some(&graph), &opts)?
        }
    };
    std::fs::write(out, sol.to_json()?)?;
    println!(
        "oracle: mode={} objective={:.9e} kkt_residual={:.3e} iterations={} converged={} -> {}",
        sol.mode,
        sol.objective,
        sol.kkt_residual,
        sol.iterations,
        sol.converged,
        out.display()
    );
    Ok(())
}

fn svm_suite_cmd(config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg: SvmSuiteConfig = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("suite config: {e}")))?
        }
        None => SvmSuiteConfig::default(),
    };
    let suite = run_experiment_suite(&cfg)?;
    suite.write_outputs(out)?;
    let failed = suite.runs.iter().filter(|r| r.error.is_some()).count();
    println!(
        "svm-suite: {} runs ({} failed), oracles per C: {:?} -> {}",
        suite.runs.len(),
        failed,
        suite
            .oracles
            .iter()
            .map(|(c, s)| (*c, s.objective))
            .collect::<Vec<_>>(),
        out.display()
    );
    Ok(())
}

/// Recomputes every stored metric row from the embedded snapshots and the
/// oracle solution, re-derives the bound values, and checks the bound
/// inequalities. Any tampering beyond 1e-6 in the stored columns fails.
fn certify_cmd(run: &Path, oracle: &Path) -> Result<()> {
    let report = RunReport::from_json(&std::fs::read_to_string(run)?)?;
    let solution = CentralSolution::from_json(&std::fs::read_to_string(oracle)?)?;
    let echo = report
        .config_echo
        .clone()
        .ok_or_else(|| Error::Config("report carries no config echo".into()))?;
    let cfg: RunConfig = serde_json::from_value(echo)
        .map_err(|e| Error::Config(format!("config echo parse: {e}")))?;
    let verdict = recheck_report(&report, &solution, &cfg)?;
    if verdict {
        println!("certify: PASS ({} logged iterations)", report.rows.len());
        Ok(())
    } else {
        println!("certify: FAIL");
        Err(Error::VerificationFailed("stored report disagrees with recomputation or a bound is violated".into()))
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_nan() && b.is_nan() {
        return true;
    }
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn recheck_report(report: &RunReport, solution: &CentralSolution, cfg: &RunConfig) -> Result<bool> {
    if report.snapshots.len() != report.rows.len() {
        return Err(Error::invalid(
            "report has no per-iteration snapshots; rerun with --certify",
        ));
    }
    let mut fresh = report.clone();
    for row in &mut fresh.rows {
        row.bound_value = f64::NAN;
    }
    fresh.certificate = None;
    let graph = cfg.resolve_graph()?;
    let tol = 1e-9;

    match cfg.solver {
        SolverKind::Static | SolverKind::Dynamic => {
            let problems = cfg.build_consensus_problems(graph.node_count())?;
            // recompute rows from snapshots
            for (row, snap) in fresh.rows.iter().zip(&report.snapshots) {
                let xbar: Stacked = snap.xbar.iter().map(|v| DVector::from_vec(v.clone())).collect();
                let recomputed = compute_consensus_metrics(
                    &problems,
                    &graph,
                    &xbar,
                    row.k,
                    row.comms,
                    Some(solution.objective),
                );
                let stored = report.rows.iter().find(|r| r.k == row.k).expect("same rows");
                if !(close(recomputed.objective, stored.objective, tol)
                    && close(recomputed.subopt, stored.subopt, tol)
                    && close(recomputed.infeas_sum, stored.infeas_sum, tol)
                    && close(recomputed.cons_viol, stored.cons_viol, tol))
                {
                    eprintln!("certify: row k={} does not match its snapshot", row.k);
                    return Ok(false);
                }
            }
            match cfg.solver {
                SolverKind::Static => attach_static_certificate(
                    &mut fresh,
                    &problems,
                    &graph,
                    &solution.static_saddle()?,
                    solution.objective,
                )?,
                _ => {
                    let constants = mixing_constants(
                        1.0 / graph.node_count() as f64,
                        cfg.t_window,
                        graph.node_count(),
                    )?;
                    let b_radius = cfg
                        .b_radius
                        .ok_or_else(|| Error::Config("B missing from echo".into()))?;
                    attach_dynamic_certificate(
                        &mut fresh,
                        &problems,
                        &graph,
                        &solution.dynamic_saddle()?,
                        solution.objective,
                        &constants,
                        b_radius,
                        cfg.p,
                    )?
                }
            }
        }
        SolverKind::Resource => {
            let problems = cfg.build_resource_problems()?;
            for (row, snap) in fresh.rows.iter().zip(&report.snapshots) {
                let xibar: Stacked = snap.xbar.iter().map(|v| DVector::from_vec(v.clone())).collect();
                let ybar: Vec<DVector<f64>> = snap
                    .ybar
                    .as_ref()
                    .ok_or_else(|| Error::invalid("resource snapshots need ybar"))?
                    .iter()
                    .map(|v| DVector::from_vec(v.clone()))
                    .collect();
                let recomputed = compute_resource_metrics(
                    &problems,
                    &graph,
                    &xibar,
                    &ybar,
                    row.k,
                    row.comms,
                    Some(solution.objective),
                );
                let stored = report.rows.iter().find(|r| r.k == row.k).expect("same rows");
                if !(close(recomputed.objective, stored.objective, tol)
                    && close(recomputed.subopt, stored.subopt, tol)
                    && close(recomputed.infeas_sum, stored.infeas_sum, tol))
                {
                    eprintln!("certify: row k={} does not match its snapshot", row.k);
                    return Ok(false);
                }
            }
            let constants = mixing_constants(
                1.0 / graph.node_count() as f64,
                cfg.t_window,
                graph.node_count(),
            )?;
            let b_dual = resolve_dual_radius(cfg, &problems)?;
            attach_resource_certificate(
                &mut fresh,
                &problems,
                &solution.resource_saddle()?,
                solution.objective,
                &constants,
                b_dual,
                cfg.p,
            )?;
        }
    }

    // re-derived bound values must match the stored ones
    if let Some(stored_cert) = &report.certificate {
        let fresh_cert = fresh.certificate.as_ref().expect("attached above");
        if stored_cert.rows.len() != fresh_cert.rows.len() {
            eprintln!("certify: certificate row count mismatch");
            return Ok(false);
        }
        for (a, b) in stored_cert.rows.iter().zip(&fresh_cert.rows) {
            if !(close(a.bound, b.bound, 1e-9)
                && close(a.subopt, b.subopt, 1e-9)
                && close(a.weighted_infeas, b.weighted_infeas, 1e-9))
            {
                eprintln!("certify: certificate row k={} mismatch", a.k);
                return Ok(false);
            }
        }
    }
    Ok(fresh.certificate.as_ref().expect("attached above").holds())
}
