//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured quantities; the process exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use maxent_core::closure::{
    closure_function, exact_cme_stationary, integrate_closure_ode, moment_matrices, ssa_simulate,
    ClosureConfig, DimerizationSystem,
};
use maxent_core::cmdp::{
    fourier_basis, run_algorithm2, standard_scenarios, AdpConfig, AdpProblem, InnerSolver,
    InventoryModel, StateActionGrid,
};
use maxent_core::discrete::{discrete_slater, solve_discrete};
use maxent_core::gibbs::{gibbs_measure, moments_of_gibbs};
use maxent_core::integration::default_rule;
use maxent_core::slater::find_polynomial_slater;
use maxent_core::{
    GibbsModel, MomentProblem, ReferenceMeasure, SmoothingParams, SolverConfig, Stopping,
    SupportInterval,
};
use maxent_validation::oracle::{oracle_for, random_problem};
use maxent_validation::reference::{gibbs_reference, max_abs_deviation};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn example1(u: f64) -> MomentProblem {
    let ln2 = 2f64.ln();
    let y = vec![
        (1.0 - ln2) / ln2,
        (4f64.ln() - 1.0) / 4f64.ln(),
        (5.0 - 64f64.ln()) / 64f64.ln(),
    ];
    MomentProblem::with_uniform_radius(SupportInterval::unit(), y, u, ReferenceMeasure::Uniform)
        .unwrap()
}

fn verdict(failures: Vec<String>, detail: String) -> Outcome {
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {}", failures.join("; "), detail))
    }
}

fn table1() -> Outcome {
    // (epsilon, J_UB, J_LB, 2 eps delta / C) as printed for U = [-0.01, 0.01].
    let rows = [
        (1.0, -0.0174, -0.0220, 0.69),
        (0.1, -0.0189, -0.0279, 0.069),
        (0.01, -0.0194, -0.0204, 0.0069),
    ];
    let problem = example1(0.01);
    let rule = default_rule(problem.support);
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for (eps, ub, lb, bound) in rows {
        let start = Instant::now();
        let slater = find_polynomial_slater(&problem, 5, 2048).map_err(|e| e.to_string())?;
        let data = slater.slater_data().map_err(|e| e.to_string())?;
        let model = GibbsModel::for_problem(&problem, &rule).map_err(|e| e.to_string())?;
        let cfg = SolverConfig::new(eps, Stopping::APriori).unwrap();
        let out = maxent_core::fast_gradient::run_algorithm1(&model, Some(&data), &cfg)
            .map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let cert = out.certificate.ok_or("no certificate")?;
        let (j_lb, j_ub) = cert.entropy_bracket();
        let fb = data.feasibility_bound(eps);
        if (j_lb - lb).abs() > 0.002 || (j_ub - ub).abs() > 0.002 {
            failures.push(format!("eps={eps}: [{j_lb:.5}, {j_ub:.5}] vs [{lb}, {ub}]"));
        }
        if (fb - bound).abs() > 0.05 * bound {
            failures.push(format!("eps={eps}: 2 eps delta/C = {fb:.5} vs {bound}"));
        }
        if (data.c - 0.0288).abs() > 0.005 {
            failures.push(format!("C = {:.5}", data.c));
        }
        if secs > 60.0 {
            failures.push(format!("eps={eps}: {secs:.1} s"));
        }
        detail.push(format!(
            "eps={eps}: [{j_lb:.5}, {j_ub:.5}] k={} bound={fb:.5} {secs:.2}s",
            out.iterations
        ));
    }
    verdict(failures, detail.join(", "))
}

fn slater_construction() -> Outcome {
    let problem = example1(0.01);
    let five = find_polynomial_slater(&problem, 5, 2048).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    if !(five.is_certified() && five.margin > 0.0) {
        failures.push(format!("r=5 not certified (margin {:.4})", five.margin));
    }
    if (five.c - 0.0288).abs() > 0.005 {
        failures.push(format!("C = {:.5}", five.c));
    }
    let three = match find_polynomial_slater(&problem, 3, 2048) {
        Ok(s) if s.is_certified() && s.margin > 0.0 => {
            failures.push(format!("r=3 certified with margin {:.4}", s.margin));
            format!("margin {:.4}", s.margin)
        }
        Ok(s) => format!("not certified (margin {:.4})", s.margin),
        Err(e) => format!("infeasible ({e})"),
    };
    verdict(
        failures,
        format!(
            "r=5: C={:.5} delta={} margin={:.4}; r=3: {three}",
            five.c, five.delta, five.margin
        ),
    )
}

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn oracle_equivalence() -> Outcome {
    let eps = 5e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_j, mut worst_tv) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    let start = Instant::now();
    for trial in 0..50 {
        let n = rng.gen_range(3..=8);
        let m = rng.gen_range(1..=3usize).min(n - 1);
        let problem = random_problem(&mut rng, n, m, 1e-3, 1e-1);
        let sol = solve_discrete(&problem, eps, None).map_err(|e| format!("trial {trial}: {e}"))?;
        let best = oracle_for(&problem);
        let d = sol.outcome.measure.relative_entropy();
        let dj = (d - best.value).abs();
        let tv = total_variation(&sol.weights, &best.weights);
        worst_j = worst_j.max(dj);
        worst_tv = worst_tv.max(tv);
        if dj > 1e-4 || tv > 1e-3 {
            failures.push(format!(
                "trial {trial} (N={n}, M={m}): |dJ|={dj:.2e} TV={tv:.2e}"
            ));
        }
    }
    verdict(
        failures,
        format!(
            "50 problems at eps={eps}: max |D - J*| = {worst_j:.2e}, max TV = {worst_tv:.2e}, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_rel, mut worst_ratio) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for draw in 0..100 {
        let m = rng.gen_range(1..=3);
        let y: Vec<f64> = (1..=m).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let u = rng.gen_range(1e-3..1e-1);
        let problem = MomentProblem::with_uniform_radius(
            SupportInterval::unit(),
            y,
            u,
            ReferenceMeasure::Uniform,
        )
        .unwrap();
        let model = GibbsModel::for_problem(&problem, &default_rule(problem.support)).unwrap();
        let eta = SmoothingParams::new(
            10f64.powf(rng.gen_range(-3.0..0.0)),
            10f64.powf(rng.gen_range(-4.0..0.0)),
        )
        .unwrap();
        let z: Vec<f64> = (0..m).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let g = model.smoothed(&z, eta).unwrap().gradient;
        let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        for i in 0..m {
            let h = 1e-6 * z[i].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            let fd = (model.smoothed(&zp, eta).unwrap().value
                - model.smoothed(&zm, eta).unwrap().value)
                / (2.0 * h);
            let rel = (fd - g[i]).abs() / scale;
            worst_rel = worst_rel.max(rel);
            if rel > 1e-5 {
                failures.push(format!("draw {draw} coord {i}: rel err {rel:.2e}"));
            }
        }
        let l = model.lipschitz(eta);
        for _ in 0..5 {
            let spread = 10f64.powf(rng.gen_range(-4.0..1.0));
            let z2: Vec<f64> = z
                .iter()
                .map(|v| v + rng.gen_range(-spread..spread))
                .collect();
            let g2 = model.smoothed(&z2, eta).unwrap().gradient;
            let dg = g
                .iter()
                .zip(&g2)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let dz = z
                .iter()
                .zip(&z2)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let ratio = dg / dz / l;
            worst_ratio = worst_ratio.max(ratio);
            if ratio > 1.0 {
                failures.push(format!("draw {draw}: Lipschitz ratio {ratio:.4} of L"));
            }
        }
    }
    verdict(
        failures,
        format!("100 draws: max rel err {worst_rel:.2e}, max |dgrad|/|dz| = {worst_ratio:.3} L"),
    )
}

fn certified_guarantees() -> Outcome {
    let eps = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut failures = Vec::new();
    let (mut worst_gap, mut worst_primal, mut worst_feas) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let start = Instant::now();
    for trial in 0..20 {
        let n = rng.gen_range(3..=8);
        let m = rng.gen_range(1..=3usize).min(n - 1);
        let problem = random_problem(&mut rng, n, m, 1e-2, 1e-1);
        let slater = discrete_slater(&problem, None).map_err(|e| format!("trial {trial}: {e}"))?;
        let sol = solve_discrete(&problem, eps, None).map_err(|e| format!("trial {trial}: {e}"))?;
        let cert = sol.certificate.ok_or("missing certificate")?;
        let j_star = oracle_for(&problem).value;
        let gap = j_star - cert.dual_value;
        let primal = (sol.outcome.measure.relative_entropy() - j_star).abs();
        let feas = cert.feasibility_distance / slater.feasibility_bound(eps);
        worst_gap = worst_gap.max(gap);
        worst_primal = worst_primal.max(primal);
        worst_feas = worst_feas.max(feas);
        if gap > eps {
            failures.push(format!("trial {trial}: dual gap {gap:.2e}"));
        }
        if primal > 2.0 * (1.0 + 2.0 * 3f64.sqrt()) * eps {
            failures.push(format!("trial {trial}: |D - J*| = {primal:.2e}"));
        }
        if feas > 1.0 {
            failures.push(format!(
                "trial {trial}: feasibility {feas:.3} of 2 eps delta/C"
            ));
        }
        if !(cert.lower_bound() <= j_star + 1e-12 && j_star <= cert.upper_bound() + 1e-12) {
            failures.push(format!(
                "trial {trial}: J* = {j_star:.6} outside [{:.6}, {:.6}]",
                cert.lower_bound(),
                cert.upper_bound()
            ));
        }
    }
    verdict(
        failures,
        format!(
            "20 instances: max dual gap {worst_gap:.2e}, max |D - J*| {worst_primal:.2e}, \
             feasibility <= {worst_feas:.3} of bound, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn printed_generator(k1: f64, k2: f64, s0: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0,
            0.0,
            0.0,
            k2 * s0,
            2.0 * k1 - k2,
            -2.0 * k1,
            2.0 * k2 * s0,
            2.0 * k2 * (s0 - 1.0) - 4.0 * k1,
            8.0 * k1 - 2.0 * k2,
        ],
    );
    (a, DMatrix::from_row_slice(3, 1, &[0.0, 0.0, -4.0 * k1]))
}

fn moment_closure() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (k1, k2, m0, d0) in [
        (1.0, 1.0, 10, 0),
        (1.0, 10.0, 10, 0),
        (3.0, 0.5, 7, 4),
        (0.25, 2.0, 20, 1),
    ] {
        let sys = DimerizationSystem::new(k1, k2, m0, d0).unwrap();
        let ode = moment_matrices(&sys, 2).map_err(|e| e.to_string())?;
        let (a, b) = printed_generator(k1, k2, sys.s0() as f64);
        if ode.a != a || ode.b != b {
            failures.push(format!(
                "generator differs for k1={k1}, k2={k2}, S0={}",
                sys.s0()
            ));
        }
    }
    let t_end = 10.0;
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 * t_end / 20.0).collect();
    let mut detail = Vec::new();
    // (K, printed closure <M^2>, printed SSA <M^2>)
    for (k2, closure_ref, ssa_ref) in [(1.0, 6.335, 6.96), (10.0, 29.48, 29.9)] {
        let sys = DimerizationSystem::new(1.0, k2, 10, 0).unwrap();
        let cfg = ClosureConfig::new(2, 0.01, sys.s0()).unwrap();
        let traj = integrate_closure_ode(&sys, &cfg, t_end, 0.05).map_err(|e| e.to_string())?;
        let closure_m2 = traj.last().unwrap().moments[2];
        let exact = exact_cme_stationary(&sys)
            .map_err(|e| e.to_string())?
            .moments[1];
        let ssa = ssa_simulate(&sys, 100_000, &grid, 7, threads()).map_err(|e| e.to_string())?;
        let (ssa_m2, se) = (
            ssa.mean.last().unwrap()[1],
            ssa.std_error.last().unwrap()[1],
        );
        if (closure_m2 - closure_ref).abs() > 0.02 * closure_ref {
            failures.push(format!(
                "K={k2}: closure <M^2> = {closure_m2:.4} vs {closure_ref}"
            ));
        }
        if (ssa_m2 - exact).abs() > 3.0 * se {
            failures.push(format!(
                "K={k2}: SSA {ssa_m2:.4} vs exact {exact:.4} ({:.1} SE)",
                (ssa_m2 - exact).abs() / se
            ));
        }
        if (ssa_m2 - ssa_ref).abs() > 0.05 * ssa_ref {
            failures.push(format!(
                "K={k2}: SSA <M^2> = {ssa_m2:.4} vs printed {ssa_ref}"
            ));
        }
        detail.push(format!(
            "K={k2}: closure {closure_m2:.4}, SSA {ssa_m2:.4} +- {se:.4}, exact {exact:.4}"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 300.0 {
        failures.push(format!("runtime {secs:.0}s"));
    }
    detail.push(format!("{secs:.1}s"));
    verdict(failures, detail.join(", "))
}

fn cmdp_adp() -> Outcome {
    let start = Instant::now();
    let grid = StateActionGrid::new(51, 51).map_err(|e| e.to_string())?;
    let theta = 3.0;
    let basis = fourier_basis(6, 1.0, theta).map_err(|e| e.to_string())?;
    let mut cfg = AdpConfig::new(
        10f64.powf(-1.5),
        200,
        InnerSolver::Fixed {
            iterations: 300,
            eta: SmoothingParams::new(1e-3, 1e-3).unwrap(),
        },
    )
    .map_err(|e| e.to_string())?;
    cfg.threads = threads();
    let mut failures = Vec::new();
    let mut costs = Vec::new();
    let mut detail = Vec::new();
    for (name, ell1, ell2) in standard_scenarios() {
        let model = InventoryModel::standard(ell1, ell2).map_err(|e| e.to_string())?;
        let problem = AdpProblem::new(model, grid.clone(), basis.clone(), cfg.threads);
        let out = run_algorithm2(&problem, &cfg).map_err(|e| format!("{name}: {e}"))?;
        let last = out.trace.last().ok_or("empty trace")?;
        let worst_margin = last
            .margins
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if worst_margin > last.inner_feasibility {
            failures.push(format!(
                "{name}: margin {worst_margin:.2e} exceeds inner tolerance {:.2e}",
                last.inner_feasibility
            ));
        }
        let w_max = out.trace.iter().map(|r| r.w_norm).fold(0.0, f64::max);
        if w_max > theta {
            failures.push(format!("{name}: ||w|| reached {w_max:.4}"));
        }
        let tail: Vec<f64> = out.trace.iter().rev().take(50).map(|r| r.j).collect();
        let variation = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - tail.iter().copied().fold(f64::INFINITY, f64::min);
        if variation > 1e-2 {
            failures.push(format!("{name}: last-50 variation {variation:.2e}"));
        }
        detail.push(format!("{name}: J={:.4} var={variation:.1e}", out.j));
        costs.push(out.j);
    }
    if !(costs[0] <= costs[1] && costs[1] <= costs[2]) {
        failures.push(format!(
            "ordering violated: {:.4}, {:.4}, {:.4}",
            costs[0], costs[1], costs[2]
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 900.0 {
        failures.push(format!("runtime {secs:.0}s"));
    }
    detail.push(format!("{secs:.1}s"));
    verdict(failures, detail.join(", "))
}

fn numerical_stability() -> Outcome {
    const BITS: usize = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut failures = Vec::new();
    let (mut worst_p, mut worst_m, mut worst_norm) = (0.0f64, 0.0f64, 0.0f64);
    let mut cases = 0;
    for m in 1..=3usize {
        let y: Vec<f64> = (1..=m).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let problem = MomentProblem::with_uniform_radius(
            SupportInterval::unit(),
            y,
            0.01,
            ReferenceMeasure::Uniform,
        )
        .unwrap();
        let rule = default_rule(problem.support);
        let model = GibbsModel::for_problem(&problem, &rule).unwrap();
        for scale in [1.0, 1e2, 1e4, 1e5, 1e6] {
            for _ in 0..2 {
                let mut z: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                z.iter_mut().for_each(|v| *v *= scale / nz);
                let moments = moments_of_gibbs(&z, &problem, &rule).map_err(|e| e.to_string())?;
                let c: Vec<f64> = (0..model.len())
                    .map(|j| {
                        -z.iter()
                            .zip(model.features())
                            .map(|(zi, f)| zi * f[j])
                            .sum::<f64>()
                    })
                    .collect();
                let (measure, _) = gibbs_measure(&c, &problem, &rule).map_err(|e| e.to_string())?;
                let p = measure.probabilities();
                let total: f64 = p.iter().sum();
                cases += 1;
                if !(p.iter().all(|v| v.is_finite()) && moments.iter().all(|v| v.is_finite())) {
                    failures.push(format!("|z|={scale:e}: non-finite output"));
                    continue;
                }
                worst_norm = worst_norm.max((total - 1.0).abs());
                let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
                let law = gibbs_reference(Some(&neg_c), &[], model.mass(), &[], BITS);
                let dp = max_abs_deviation(&law.probabilities, &p);
                let exact = gibbs_reference(None, model.features(), model.mass(), &z, BITS);
                let dm = max_abs_deviation(&exact.moments, &moments);
                worst_p = worst_p.max(dp);
                worst_m = worst_m.max(dm);
                if dp > 1e-10 || dm > 1e-10 || (total - 1.0).abs() > 1e-12 {
                    failures.push(format!(
                        "M={m} |z|={scale:e}: node dev {dp:.2e}, moment dev {dm:.2e}, mass {total}"
                    ));
                }
            }
        }
    }
    verdict(
        failures,
        format!(
            "{cases} cases up to |z|=1e6 vs {BITS}-bit reference: node dev {worst_p:.2e}, \
             moment dev {worst_m:.2e}, |mass - 1| {worst_norm:.2e}"
        ),
    )
}

/// Point mass at 4 with kappa = 0.01 should close to <m^3> within 0.5 of 64.
fn point_mass_closure() -> Outcome {
    let cfg = ClosureConfig::new(2, 0.01, 10).map_err(|e| e.to_string())?;
    let zeta = closure_function(&[1.0, 4.0, 16.0], &cfg).map_err(|e| e.to_string())?[0];
    let detail = format!("<m^3> = {zeta:.4}");
    if (zeta - 64.0).abs() <= 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// The order-3 closure's stationary <m^2> is no further from the exact
/// value than the order-2 closure's, for K = 1 and K = 10.
fn closure_order_improves() -> Outcome {
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for k2 in [1.0, 10.0] {
        let sys = DimerizationSystem::new(1.0, k2, 10, 0).unwrap();
        let exact = exact_cme_stationary(&sys)
            .map_err(|e| e.to_string())?
            .moments[1];
        let mut err = [0.0; 2];
        for (slot, order) in [2usize, 3].iter().enumerate() {
            let cfg = ClosureConfig::new(*order, 0.01, sys.s0()).unwrap();
            let traj = integrate_closure_ode(&sys, &cfg, 10.0, 0.05).map_err(|e| e.to_string())?;
            err[slot] = (traj.last().unwrap().moments[2] - exact).abs();
        }
        if err[1] > err[0] {
            failures.push(format!(
                "K={k2}: order-3 error {:.4} > order-2 error {:.4}",
                err[1], err[0]
            ));
        }
        detail.push(format!(
            "K={k2}: errors {:.4} (order 2), {:.4} (order 3)",
            err[0], err[1]
        ));
    }
    verdict(failures, detail.join(", "))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("Table 1 reproduction", table1),
        ("Slater construction", slater_construction),
        ("oracle equivalence", oracle_equivalence),
        ("gradient correctness", gradient_correctness),
        ("certified guarantee suite", certified_guarantees),
        ("moment closure", moment_closure),
        ("CMDP approximate dynamic programming", cmdp_adp),
        ("numerical stability", numerical_stability),
    ];
    // Numeric arguments select criteria; anything else (such as flags
    // forwarded by `cargo test`) is ignored.
    let args: Vec<String> = std::env::args().skip(1).collect();
    let selected: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let want_properties =
        args.iter().any(|a| a == "properties") || args.iter().all(|a| a.starts_with('-'));
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let only_properties = selected.is_empty() && args.iter().any(|a| a == "properties");
        if only_properties || (!selected.is_empty() && !selected.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        match check() {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);

    // Module-level properties that are known not to hold at the specified
    // settings. They run here, after every other test binary, and count
    // towards the exit status like the criteria.
    let properties: [(&str, Check); 2] = [
        ("closure of a point mass", point_mass_closure),
        (
            "higher closure order is more accurate",
            closure_order_improves,
        ),
    ];
    if want_properties {
        for (name, check) in properties {
            match check() {
                Ok(detail) => println!("PASS property ({name}): {detail}"),
                Err(detail) => {
                    failed += 1;
                    println!("FAIL property ({name}): {detail}");
                }
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
