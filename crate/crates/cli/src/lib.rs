//! Subcommand drivers for the `maxent` binary. Each driver renders its CSV
//! into a string so the binary and the tests share one code path.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use maxent_core::closure::{
    closure_function, exact_cme_stationary, integrate_closure_ode, ssa_simulate, ClosureConfig,
    DimerizationSystem,
};
use maxent_core::cmdp::{
    fourier_basis, run_algorithm2, standard_scenarios, AdpConfig, AdpProblem, InnerSolver,
    InventoryModel, StateActionGrid,
};
use maxent_core::config::{
    parse_config, parse_override, DiameterRule, RunConfig, StoppingRule, Subcommand,
};
use maxent_core::discrete::{solve_discrete, DiscreteProblem};
use maxent_core::fast_gradient::{run_algorithm1, Diameter, SolverOutcome};
use maxent_core::gibbs::monomial_features;
use maxent_core::integration::{composite_rule, RuleKind};
use maxent_core::parallel::configured_threads;
use maxent_core::slater::find_polynomial_slater;
use maxent_core::{
    GibbsModel, MomentProblem, ReferenceMeasure, SlaterData, SmoothingParams, SolverConfig,
    Stopping, SupportInterval, TargetSet,
};

/// How a run ended; maps to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Certified,
    Uncertified,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Certified => 0,
            Status::Uncertified => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub status: Status,
    pub csv: String,
}

/// Flags given on the command line, applied after the config file.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub config: Option<std::path::PathBuf>,
    pub output: Option<std::path::PathBuf>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub set: Vec<String>,
}

/// Reads the config file (if any) and applies `--set` and flag overrides.
pub fn load_config(sub: Subcommand, flags: &CliOverrides) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in config file {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    cfg.subcommand = Some(sub);
    cfg.config_path = flags.config.clone();
    for item in &flags.set {
        let ov = parse_override(item, sub)?;
        cfg.apply(&ov)?;
    }
    if let Some(e) = flags.epsilon {
        if e.is_nan() || e <= 0.0 {
            bail!("--epsilon must be > 0, got {e}");
        }
        cfg.epsilon = Some(e);
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if flags.output.is_some() {
        cfg.output = flags.output.clone();
    }
    Ok(cfg)
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let sub = cfg.subcommand.context("no subcommand selected")?;
    match sub {
        Subcommand::Solve => run_solve(cfg),
        Subcommand::Slater => run_slater(cfg),
        Subcommand::Discrete => run_discrete(cfg),
        Subcommand::Closure => run_closure(cfg),
        Subcommand::Mdp => run_mdp(cfg),
    }
}

/// Runs and writes the CSV to the configured output (stdout when unset).
pub fn run_and_write(cfg: &RunConfig) -> Result<Status> {
    let report = run(cfg)?;
    match &cfg.output {
        Some(path) => write_output(path, &report.csv)?,
        None => print!("{}", report.csv),
    }
    Ok(report.status)
}

fn write_output(path: &Path, csv: &str) -> Result<()> {
    std::fs::write(path, csv)
        .with_context(|| format!("cannot write output file {}", path.display()))
}

fn threads(cfg: &RunConfig) -> usize {
    cfg.threads.unwrap_or_else(configured_threads)
}

fn radii(radius: &[f64], m: usize) -> Result<Vec<f64>> {
    match radius.len() {
        1 => Ok(vec![radius[0]; m]),
        n if n == m => Ok(radius.to_vec()),
        n => bail!("radius has {n} entries; expected 1 or {m} (one per moment)"),
    }
}

fn moment_problem(cfg: &RunConfig) -> Result<MomentProblem> {
    let p = &cfg.problem;
    let support = SupportInterval::new(p.lower, p.upper)?;
    let r = radii(&p.radius, p.moments.len())?;
    Ok(MomentProblem::new(
        support,
        p.moments.clone(),
        r,
        ReferenceMeasure::Uniform,
    )?)
}

fn moment_model(cfg: &RunConfig, problem: &MomentProblem) -> Result<GibbsModel> {
    let rule = composite_rule(problem.support, cfg.problem.nodes, RuleKind::Simpson)?;
    Ok(GibbsModel::for_problem(problem, &rule)?)
}

fn slater_for(cfg: &RunConfig, problem: &MomentProblem) -> Option<SlaterData> {
    find_polynomial_slater(problem, cfg.problem.slater_degree, cfg.problem.slater_grid)
        .and_then(|s| s.slater_data())
        .ok()
}

fn solver_config(cfg: &RunConfig, epsilon: f64) -> Result<SolverConfig> {
    let s = &cfg.solve;
    let stopping = match s.stopping {
        StoppingRule::APriori => Stopping::APriori,
        StoppingRule::APosteriori => Stopping::APosteriori { block: s.block },
        StoppingRule::Fixed => Stopping::Fixed(s.iterations),
    };
    let mut sc = SolverConfig::new(epsilon, stopping)?;
    sc.diameter = match s.diameter {
        DiameterRule::HalfSquaredNorm => Diameter::HalfSquaredNorm,
        DiameterRule::HalfNorm => Diameter::HalfNorm,
    };
    sc.eta_override = match (s.eta1, s.eta2) {
        (Some(a), Some(b)) => Some(SmoothingParams::new(a, b)?),
        (None, None) => None,
        _ => bail!("eta1 and eta2 must be given together"),
    };
    Ok(sc)
}

/// Solves `problem` once, falling back to an uncertified fixed-budget run
/// when no Slater point is available and smoothing is given explicitly.
fn solve_once(
    cfg: &RunConfig,
    model: &GibbsModel,
    slater: Option<&SlaterData>,
    epsilon: f64,
) -> Result<SolverOutcome> {
    let mut sc = solver_config(cfg, epsilon)?;
    if slater.is_none() {
        if sc.eta_override.is_none() {
            bail!(
                "no strictly feasible Slater point was found; set solve.eta1 and solve.eta2 \
                 to run without certificates"
            );
        }
        sc.stopping = Stopping::Fixed(cfg.solve.iterations);
    }
    Ok(run_algorithm1(model, slater, &sc)?)
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.10e}")
    }
}

fn run_solve(cfg: &RunConfig) -> Result<Report> {
    let problem = moment_problem(cfg)?;
    let model = moment_model(cfg, &problem)?;
    let slater = slater_for(cfg, &problem);
    let epsilons = match cfg.epsilon {
        Some(e) => vec![e],
        None => cfg.solve.epsilons.clone(),
    };
    let mut csv = String::new();
    writeln!(
        csv,
        "# epsilon: a-priori accuracy [bits]; J_UB, J_LB: entropy bracket -D(mu||nu) [bits, log base 2]; \
         iterations: count; feas_dist, apriori_feas_bound: Euclidean moment distance [moment units]"
    )?;
    writeln!(
        csv,
        "epsilon,J_UB,J_LB,iterations,feas_dist,apriori_feas_bound,certified"
    )?;
    let mut status = Status::Certified;
    for eps in epsilons {
        let out = solve_once(cfg, &model, slater.as_ref(), eps)?;
        let (lb, ub) = match &out.certificate {
            Some(c) => c.entropy_bracket(),
            None => (f64::NAN, -out.dual_value),
        };
        let bound = slater
            .as_ref()
            .map_or(f64::NAN, |s| s.feasibility_bound(eps));
        if !out.certified {
            status = Status::Uncertified;
        }
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt(eps),
            fmt(ub),
            fmt(lb),
            out.iterations,
            fmt(out.feasibility_distance),
            fmt(bound),
            out.certified
        )?;
    }
    Ok(Report { status, csv })
}

fn run_slater(cfg: &RunConfig) -> Result<Report> {
    let problem = moment_problem(cfg)?;
    let construction =
        find_polynomial_slater(&problem, cfg.problem.slater_degree, cfg.problem.slater_grid)?;
    let slater = construction.slater_data().ok();
    let model = moment_model(cfg, &problem)?;
    let eps = cfg.effective_epsilon();
    let solved = match &slater {
        Some(s) => Some(solve_once(cfg, &model, Some(s), eps)?),
        None => None,
    };
    let width = problem.support.width();
    let maxent = |x: f64| -> f64 {
        let Some(out) = &solved else { return f64::NAN };
        let log_z = model.gibbs(&out.z_hat).map(|g| g.1).unwrap_or(f64::NAN);
        let mut e = 0.0;
        let mut xi = 1.0;
        for z in &out.z_hat {
            xi *= x;
            e -= z * xi;
        }
        (e - log_z).exp2() / width
    };
    let mut csv = String::new();
    writeln!(
        csv,
        "# x: support point; slater_density, maxent_density: Lebesgue densities [1/length]; \
         C = {} bits, delta = {}, grid margin = {}",
        fmt(construction.c),
        fmt(construction.delta),
        fmt(construction.margin)
    )?;
    writeln!(csv, "x,slater_density,maxent_density")?;
    for (x, p) in construction.density.sample(cfg.slater.samples) {
        writeln!(csv, "{},{},{}", fmt(x), fmt(p), fmt(maxent(x)))?;
    }
    let status = match &solved {
        Some(out) if out.certified => Status::Certified,
        _ => Status::Uncertified,
    };
    Ok(Report { status, csv })
}

fn run_discrete(cfg: &RunConfig) -> Result<Report> {
    let d = &cfg.discrete;
    let n = d.states.len();
    let reference = if d.weights.is_empty() {
        vec![1.0 / n as f64; n]
    } else {
        d.weights.clone()
    };
    let r = radii(&d.radius, d.moments.len())?;
    let target = TargetSet::new_box(d.moments.clone(), r)?;
    let features = monomial_features(&d.states, d.moments.len());
    let problem = DiscreteProblem::new(d.states.clone(), reference, features, target)?;
    let sol = solve_discrete(&problem, cfg.effective_epsilon(), None)?;
    let mut csv = String::new();
    match &sol.certificate {
        Some(c) => {
            let (lb, ub) = c.entropy_bracket();
            writeln!(
                csv,
                "# state: support point; reference, weight: probability masses; \
                 entropy bracket -D(mu||nu) in [{}, {}] bits (log base 2)",
                fmt(lb),
                fmt(ub)
            )?;
        }
        None => writeln!(
            csv,
            "# state: support point; reference, weight: probability masses"
        )?,
    }
    writeln!(csv, "state,reference,weight")?;
    for ((s, r), w) in problem
        .states
        .iter()
        .zip(&problem.reference)
        .zip(&sol.weights)
    {
        writeln!(csv, "{},{},{}", fmt(*s), fmt(*r), fmt(*w))?;
    }
    let status = if sol.outcome.certified {
        Status::Certified
    } else {
        Status::Uncertified
    };
    Ok(Report { status, csv })
}

fn run_closure(cfg: &RunConfig) -> Result<Report> {
    let c = &cfg.closure;
    let sys = DimerizationSystem::new(c.k1, c.k2, c.m0, c.d0)?;
    let mut cc = ClosureConfig::new(c.order, c.kappa, c.support_max.unwrap_or(sys.s0()))?;
    cc.parity_only = c.parity_only;
    let mut csv = String::new();
    writeln!(
        csv,
        "# t: time [1/rate units]; mean, second_moment, third_moment: raw moments of the monomer count [molecules^k]; \
         source: exact (stationary CME), ssa (sample mean), closure (max-entropy moment closure)"
    )?;
    writeln!(csv, "t,mean,second_moment,third_moment,source")?;
    if c.exact {
        let law = exact_cme_stationary(&sys)?;
        let m = law.moments;
        writeln!(
            csv,
            "{},{},{},{},exact",
            fmt(c.t_end),
            fmt(m[0]),
            fmt(m[1]),
            fmt(m[2])
        )?;
    }
    let intervals = (c.t_end / c.dt).round() as usize;
    if c.ssa_trajectories > 0 {
        let grid: Vec<f64> = (0..=intervals).map(|i| i as f64 * c.dt).collect();
        let ssa = ssa_simulate(&sys, c.ssa_trajectories, &grid, cfg.seed, threads(cfg))?;
        for (t, m) in ssa.t_grid.iter().zip(&ssa.mean) {
            writeln!(
                csv,
                "{},{},{},{},ssa",
                fmt(*t),
                fmt(m[0]),
                fmt(m[1]),
                fmt(m[2])
            )?;
        }
    }
    let traj = integrate_closure_ode(&sys, &cc, c.t_end, c.dt)?;
    for p in &traj {
        let third = if c.order >= 3 {
            p.moments[3]
        } else {
            closure_function(&p.moments, &cc)?[0]
        };
        writeln!(
            csv,
            "{},{},{},{},closure",
            fmt(p.t),
            fmt(p.moments[1]),
            fmt(p.moments[2]),
            fmt(third)
        )?;
    }
    Ok(Report {
        status: Status::Certified,
        csv,
    })
}

fn run_mdp(cfg: &RunConfig) -> Result<Report> {
    let m = &cfg.mdp;
    let scenarios: Vec<(String, f64, f64)> = match (m.ell1, m.ell2) {
        (None, None) => standard_scenarios()
            .iter()
            .map(|(n, a, b)| (n.to_string(), *a, *b))
            .collect(),
        (a, b) => {
            let (a, b) = (a.unwrap_or(0.0), b.unwrap_or(m.capacity * m.capacity));
            vec![(format!("ell1={a},ell2={b}"), a, b)]
        }
    };
    let inner = match m.inner_epsilon {
        Some(epsilon) => InnerSolver::Certified { epsilon },
        None => InnerSolver::Fixed {
            iterations: m.inner_iters,
            eta: SmoothingParams::new(m.eta1, m.eta2)?,
        },
    };
    let mut adp = AdpConfig::new(m.zeta, m.outer_k, inner)?;
    adp.threads = threads(cfg);
    let grid = StateActionGrid::new(m.grid_ns, m.grid_na)?;
    let basis = fourier_basis(m.n, m.capacity, m.theta)?;
    let mut csv = String::new();
    writeln!(
        csv,
        "# iteration: outer step; J: shifted average cost (stage cost + 2vC) [currency/period]; \
         J_unshifted: J - 2vC; margin_ell1 = ell1 - E[s], margin_ell2 = E[s^2] - ell2 on the normalized stock; \
         w_norm: Euclidean norm; inner_feasibility: largest inner moment distance so far"
    )?;
    writeln!(
        csv,
        "scenario,ell1,ell2,iteration,J,J_unshifted,margin_ell1,margin_ell2,w_norm,inner_feasibility"
    )?;
    let status = if m.inner_epsilon.is_some() {
        Status::Certified
    } else {
        Status::Uncertified
    };
    for (name, ell1, ell2) in scenarios {
        let model = InventoryModel::new(m.capacity, m.lambda, m.v, m.p, m.h, ell1, ell2)
            .with_context(|| format!("scenario {name}"))?;
        let problem = AdpProblem::new(model, grid.clone(), basis.clone(), adp.threads);
        let out = run_algorithm2(&problem, &adp).with_context(|| format!("scenario {name}"))?;
        for r in &out.trace {
            writeln!(
                csv,
                "\"{name}\",{},{},{},{},{},{},{},{},{}",
                fmt(ell1),
                fmt(ell2),
                r.iteration,
                fmt(r.j),
                fmt(r.j_unshifted),
                fmt(r.margins[0]),
                fmt(r.margins[1]),
                fmt(r.w_norm),
                fmt(r.inner_feasibility)
            )?;
        }
    }
    Ok(Report { status, csv })
}
