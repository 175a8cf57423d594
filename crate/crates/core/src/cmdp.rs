//! Approximate dynamic programming for a constrained inventory MDP.
//!
//! Occupation measures live on a product grid over the normalized
//! state-action square. Each outer iteration of the accelerated scheme
//! solves an entropic subproblem whose Gibbs exponent carries the tilted
//! stage cost and whose moment constraints act on the normalized stock.

use std::f64::consts::{E, LOG2_E, PI};

use crate::error::{check_dim, invalid, Error, Result};
use crate::fast_gradient::{run_algorithm1, SlaterData, SolverConfig, Stopping};
use crate::gibbs::{GibbsModel, SmoothingParams};
use crate::integration::{composite_rule, RuleKind};
use crate::lp::maximize_inequality;
use crate::parallel::with_threads;
use crate::target::{SupportInterval, TargetSet};
use crate::vecops::{dot, norm};

use rayon::prelude::*;

/// Simpson nodes on `[0, w]` for the density part of the kernel.
pub const KERNEL_NODES: usize = 513;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InventoryModel {
    pub capacity: f64,
    pub lambda: f64,
    pub v: f64,
    pub p: f64,
    pub h: f64,
    pub ell1: f64,
    pub ell2: f64,
}

impl InventoryModel {
    pub fn new(
        capacity: f64,
        lambda: f64,
        v: f64,
        p: f64,
        h: f64,
        ell1: f64,
        ell2: f64,
    ) -> Result<Self> {
        for (name, x) in [
            ("capacity", capacity),
            ("lambda", lambda),
            ("v", v),
            ("p", p),
            ("h", h),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {x}")));
            }
        }
        if !(ell1 >= 0.0 && ell2 >= 0.0) {
            return Err(invalid("ell", "stock bounds must be nonnegative"));
        }
        if !(ell1 * ell1 < ell2) {
            return Err(Error::Irregular(format!(
                "need ell1^2 < ell2 for a strictly feasible stock law, got ell1={ell1}, ell2={ell2}"
            )));
        }
        Ok(Self {
            capacity,
            lambda,
            v,
            p,
            h,
            ell1,
            ell2,
        })
    }

    /// `C = 1`, `lambda = 1/2`, `v = 1`, `p = 1/2`, `h = 1/10` with the given bounds.
    pub fn standard(ell1: f64, ell2: f64) -> Result<Self> {
        Self::new(1.0, 0.5, 1.0, 0.5, 0.1, ell1, ell2)
    }

    /// Shift added to the expected stage cost to make it nonnegative.
    pub fn cost_shift(&self) -> f64 {
        2.0 * self.v * self.capacity
    }

    /// Expected stage cost (negative expected profit) before the shift.
    pub fn raw_cost(&self, s: f64, a: f64) -> f64 {
        let y = self.capacity * (s + a);
        let (v, l) = (self.v, self.lambda);
        let e = (-l * y).exp();
        -v * y * e - (v / l) * (1.0 - e * (l * y + 1.0)) + self.p * self.capacity * a + self.h * y
    }

    /// `||c||_L`: Lipschitz constant of the stage cost on the normalized
    /// square in the sup norm, i.e. the largest `|dc/ds| + |dc/da|`.
    pub fn cost_lipschitz(&self) -> f64 {
        let c = self.capacity;
        [0.0, 2.0 * c]
            .iter()
            .map(|y| {
                let sales = self.v * (-self.lambda * y).exp();
                c * ((self.h - sales).abs() + (self.h + self.p - sales).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `L_Q = sqrt(2) C lambda`.
    pub fn kernel_lipschitz(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.capacity * self.lambda
    }

    pub fn target(&self) -> Result<TargetSet> {
        TargetSet::new_box_parabola(self.ell1, self.ell2)
    }
}

/// Shifted expected stage cost at normalized `(s, a)`.
pub fn inventory_cost(model: &InventoryModel, s: f64, a: f64) -> f64 {
    model.raw_cost(s, a) + model.cost_shift()
}

/// `Qu(s, a)` for the normalized dynamics `s' = (min{1, s + a} - xi/C)_+`.
///
/// The atom at zero carries `exp(-lambda C w)`; the density part is
/// integrated with composite Simpson on `[0, w]`.
pub fn inventory_kernel_apply(
    model: &InventoryModel,
    u: impl Fn(f64) -> f64,
    s: f64,
    a: f64,
) -> f64 {
    kernel_apply_with(model, &u, s, a, KERNEL_NODES)
}

fn kernel_apply_with(
    model: &InventoryModel,
    u: &dyn Fn(f64) -> f64,
    s: f64,
    a: f64,
    nodes: usize,
) -> f64 {
    let w = (s + a).clamp(0.0, 1.0);
    let rate = model.lambda * model.capacity;
    let atom = u(0.0) * (-rate * w).exp();
    if w == 0.0 {
        return atom;
    }
    let rule = composite_rule(
        SupportInterval::new(0.0, w).expect("w > 0"),
        nodes,
        RuleKind::Simpson,
    )
    .expect("odd node count");
    atom + rule.integrate(|x| u(x) * rate * (-rate * (w - x)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateActionGrid {
    pub n_s: usize,
    pub n_a: usize,
    /// `(s, a)` pairs, state index major.
    pub nodes: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl StateActionGrid {
    /// Equispaced product grid on `[0,1]^2` including the edges.
    pub fn new(n_s: usize, n_a: usize) -> Result<Self> {
        if n_s < 2 || n_a < 2 {
            return Err(invalid("grid", "need at least 2 points per axis"));
        }
        let axis = |n: usize| (0..n).map(move |i| i as f64 / (n - 1) as f64);
        let nodes: Vec<(f64, f64)> = axis(n_s)
            .flat_map(|s| axis(n_a).map(move |a| (s, a)))
            .collect();
        let w = 1.0 / nodes.len() as f64;
        Ok(Self {
            n_s,
            n_a,
            weights: vec![w; nodes.len()],
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|(s, _)| *s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub n: usize,
    pub capacity: f64,
    pub theta: f64,
}

impl BasisSet {
    /// `u_i(s)` at the normalized state `s`.
    pub fn eval(&self, i: usize, s: f64) -> f64 {
        let k = i.div_ceil(2) as f64;
        let amp = self.capacity / (2.0 * k * PI);
        let arg = 2.0 * k * PI * s;
        if i % 2 == 1 {
            amp * arg.cos()
        } else {
            amp * arg.sin()
        }
    }

    /// `||u_i||_inf`.
    pub fn amplitude(&self, i: usize) -> f64 {
        self.capacity / (2.0 * i.div_ceil(2) as f64 * PI)
    }
}

/// `u_{2i-1}(s) = C/(2 i pi) cos(2 i pi s/C)`, `u_{2i}(s) = C/(2 i pi) sin(2 i pi s/C)`,
/// written on the normalized state. Indices run from 1.
pub fn fourier_basis(n: usize, capacity: f64, theta: f64) -> Result<BasisSet> {
    if n == 0 || n % 2 == 1 {
        return Err(invalid(
            "n",
            format!("basis size must be even and positive, got {n}"),
        ));
    }
    if !(theta > 0.0) {
        return Err(invalid("theta", format!("must be positive, got {theta}")));
    }
    Ok(BasisSet { n, capacity, theta })
}

/// How each entropic subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSolver {
    /// Fixed accelerated-gradient budget with explicit smoothing, warm
    /// started from the previous outer iteration.
    Fixed {
        iterations: usize,
        eta: SmoothingParams,
    },
    /// A-priori stopping for accuracy `epsilon`, with Slater constants
    /// computed for every subproblem.
    Certified { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdpConfig {
    pub zeta: f64,
    pub outer_iterations: usize,
    pub inner: InnerSolver,
    pub threads: usize,
}

impl AdpConfig {
    pub fn new(zeta: f64, outer_iterations: usize, inner: InnerSolver) -> Result<Self> {
        if !(zeta > 0.0) {
            return Err(invalid("zeta", format!("must be positive, got {zeta}")));
        }
        if let InnerSolver::Certified { epsilon } = inner {
            if !(epsilon > 0.0) {
                return Err(invalid("epsilon", "must be positive"));
            }
        }
        Ok(Self {
            zeta,
            outer_iterations,
            inner,
            threads: 0,
        })
    }

    /// `zeta = 10^-1.5`, `1500` inner iterations with `eta1 = eta2 = 1e-3`.
    pub fn standard(outer_iterations: usize) -> Self {
        Self {
            zeta: 10f64.powf(-1.5),
            outer_iterations,
            inner: InnerSolver::Fixed {
                iterations: 1500,
                eta: SmoothingParams {
                    eta1: 1e-3,
                    eta2: 1e-3,
                },
            },
            threads: 0,
        }
    }
}

/// Everything that stays fixed across outer iterations.
#[derive(Debug, Clone)]
pub struct AdpProblem {
    pub model: InventoryModel,
    pub grid: StateActionGrid,
    pub basis: BasisSet,
    /// Shifted stage cost at the grid nodes.
    pub cost: Vec<f64>,
    /// `Q u_i - u_i` at the grid nodes, one row per basis function.
    pub drift: Vec<Vec<f64>>,
}

impl AdpProblem {
    /// Precomputes the cost and `Qu_i - u_i` on the grid.
    pub fn new(
        model: InventoryModel,
        grid: StateActionGrid,
        basis: BasisSet,
        threads: usize,
    ) -> Self {
        let cost = grid
            .nodes
            .iter()
            .map(|(s, a)| inventory_cost(&model, *s, *a))
            .collect();
        let row = |i: usize| -> Vec<f64> {
            let u = |x: f64| basis.eval(i, x);
            grid.nodes
                .iter()
                .map(|(s, a)| kernel_apply_with(&model, &u, *s, *a, KERNEL_NODES) - u(*s))
                .collect()
        };
        let drift = with_threads(threads, |parallel| {
            if parallel {
                (1..=basis.n).into_par_iter().map(row).collect()
            } else {
                (1..=basis.n).map(row).collect()
            }
        });
        Self {
            model,
            grid,
            basis,
            cost,
            drift,
        }
    }

    /// `(-1, <Qu_1 - u_1, mu>, ..., <Qu_n - u_n, mu>)`.
    pub fn tn(&self, mu: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.grid.len(), mu.len())?;
        let total: f64 = mu.iter().sum();
        if mu.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "mu",
                format!("grid weights must form a probability vector (sum {total})"),
            ));
        }
        let mut out = Vec::with_capacity(self.basis.n + 1);
        out.push(-1.0);
        out.extend(self.drift.iter().map(|row| dot(row, mu)));
        Ok(out)
    }

    /// `(<mu, s>, <mu, s^2>)`.
    pub fn stock_moments(&self, mu: &[f64]) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (w, s) in mu.iter().zip(self.grid.states()) {
            m[0] += w * s;
            m[1] += w * s * s;
        }
        m
    }

    /// `<mu, d> - kappa` with `d = (-s, s^2)` and `kappa = (-ell1, ell2)`.
    pub fn constraint_margins(&self, mu: &[f64]) -> [f64; 2] {
        let m = self.stock_moments(mu);
        [self.model.ell1 - m[0], m[1] - self.model.ell2]
    }

    fn gibbs_model(&self, alpha: &[f64], zeta: f64) -> Result<GibbsModel> {
        let states: Vec<f64> = self.grid.states().collect();
        let features = vec![states.clone(), states.iter().map(|s| s * s).collect()];
        let index: Vec<f64> = (0..self.grid.len()).map(|j| j as f64).collect();
        let model = GibbsModel::new(
            index,
            self.grid.weights.clone(),
            features,
            self.model.target()?,
            2.0,
        )?;
        // natural-log relative entropy: 2^{-c log2 e} = e^{-c}
        let tilted: Vec<f64> = (0..self.grid.len())
            .map(|j| {
                let mut c = self.cost[j] - alpha[0];
                for (ai, row) in alpha[1..].iter().zip(&self.drift) {
                    c += ai * row[j];
                }
                c / zeta * LOG2_E
            })
            .collect();
        model.with_cost(tilted)
    }
}

/// `T(q, alpha) = (alpha - q) min{1, theta / ||q - alpha||}`.
pub fn clipped_map(q: &[f64], alpha: &[f64], theta: f64) -> Result<Vec<f64>> {
    check_dim(q.len(), alpha.len())?;
    let diff: Vec<f64> = alpha.iter().zip(q).map(|(a, b)| a - b).collect();
    let n = norm(&diff);
    let s = if n > theta { theta / n } else { 1.0 };
    Ok(diff.into_iter().map(|d| d * s).collect())
}

/// Solution of one entropic subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub weights: Vec<f64>,
    pub z: Vec<f64>,
    /// Distance of the moments `(<y,s>, <y,s^2>)` to the target set.
    pub feasibility_distance: f64,
    pub iterations: usize,
}

/// `argmin_{<y,d> <= kappa} { D(y || uniform) + <y, c_{alpha,zeta}> }` with
/// `c_{alpha,zeta} = (c - alpha_0 + sum_i alpha_i (Qu_i - u_i)) / zeta`.
pub fn entropic_subproblem(
    problem: &AdpProblem,
    alpha: &[f64],
    cfg: &AdpConfig,
    warm: Option<&[f64]>,
) -> Result<SubproblemSolution> {
    check_dim(problem.basis.n + 1, alpha.len())?;
    let model = problem.gibbs_model(alpha, cfg.zeta)?;
    let (slater, mut config) = match cfg.inner {
        InnerSolver::Fixed { iterations, eta } => {
            let mut c = SolverConfig::new(1.0, Stopping::Fixed(iterations))?;
            c.eta_override = Some(eta);
            (None, c)
        }
        InnerSolver::Certified { epsilon } => (
            Some(subproblem_slater(problem, &model)?),
            SolverConfig::new(epsilon, Stopping::APriori)?,
        ),
    };
    config.warm_start = warm.map(|z| z.to_vec());
    let out = run_algorithm1(&model, slater.as_ref(), &config)?;
    Ok(SubproblemSolution {
        weights: out.measure.probabilities(),
        z: out.z_hat,
        feasibility_distance: out.feasibility_distance,
        iterations: out.iterations,
    })
}

/// Slater constants for the tilted subproblem. The point is the law over
/// the distinct stock levels with the largest margin inside the box
/// `[l, m] x [m^2, ell2]`, `l = max(ell1, 0)`, `m = (l + sqrt(ell2))/2`,
/// which lies in the target set; actions are spread uniformly. Then
/// `C = D(mu0||nu) + <mu0, cost> + log2 int 2^{-cost} d nu` bounds the
/// dual optimum through `||z*|| <= C / delta`.
fn subproblem_slater(problem: &AdpProblem, model: &GibbsModel) -> Result<SlaterData> {
    let lo = problem.model.ell1.max(0.0);
    let mid = 0.5 * (lo + problem.model.ell2.sqrt());
    let (lo_box, hi_box) = ([lo, mid * mid], [mid, problem.model.ell2]);
    let n_s = problem.grid.n_s;
    let n_a = problem.grid.n_a;
    let levels: Vec<f64> = (0..n_s).map(|i| i as f64 / (n_s - 1) as f64).collect();
    // variables (q_0..q_{n_s-1}, t); maximize t
    let mut g = Vec::new();
    let mut h = Vec::new();
    for i in 0..n_s {
        let mut r = vec![0.0; n_s + 1];
        r[i] = -1.0;
        g.push(r);
        h.push(0.0);
    }
    let mut sum_row = vec![1.0; n_s];
    sum_row.push(0.0);
    g.push(sum_row.clone());
    h.push(1.0);
    g.push(sum_row.iter().map(|v| -v).collect());
    h.push(-1.0);
    for (k, feature) in [1, 2].iter().enumerate() {
        let f: Vec<f64> = levels.iter().map(|s| s.powi(*feature)).collect();
        let mut up = f.clone();
        up.push(1.0);
        g.push(up);
        h.push(hi_box[k]);
        let mut down: Vec<f64> = f.iter().map(|v| -v).collect();
        down.push(1.0);
        g.push(down);
        h.push(-lo_box[k]);
    }
    let mut c = vec![0.0; n_s];
    c.push(1.0);
    let (x, delta) = maximize_inequality(&c, &g, &h)?;
    if !(delta > 0.0) {
        return Err(Error::Irregular(format!(
            "no stock law on the grid is strictly feasible (margin {delta:e})"
        )));
    }
    let q: Vec<f64> = x[..n_s].iter().map(|v| v.max(0.0)).collect();
    let total: f64 = q.iter().sum();
    let mu0: Vec<f64> = (0..problem.grid.len())
        .map(|j| q[j / n_a] / total / n_a as f64)
        .collect();
    let cost = model.cost().expect("tilted model has a cost");
    let nu = model.mass();
    let kl: f64 = mu0
        .iter()
        .zip(nu)
        .filter(|(m, _)| **m > 0.0)
        .map(|(m, n)| m * (m / n).log2())
        .sum();
    let (_, log_z) = model.gibbs_moments(&[0.0, 0.0])?;
    let c_value = kl + dot(&mu0, cost) + log_z;
    SlaterData::new(c_value.max(f64::MIN_POSITIVE), delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdpTraceRow {
    pub iteration: usize,
    /// `J^(l)` with the shifted cost.
    pub j: f64,
    /// `J^(l)` minus the cost shift.
    pub j_unshifted: f64,
    /// `<y_hat, d> - kappa`.
    pub margins: [f64; 2],
    pub w_norm: f64,
    /// Largest inner feasibility distance seen so far.
    pub inner_feasibility: f64,
}

#[derive(Debug, Clone)]
pub struct AdpOutcome {
    pub j: f64,
    pub y_hat: Vec<f64>,
    pub trace: Vec<AdpTraceRow>,
    pub w: Vec<f64>,
}

/// Algorithm 2 from `w^(0) = 0`. Runs `outer_iterations + 1` subproblems
/// (`l = 0..=k`) and reports `J^(l)` after each.
pub fn run_algorithm2(problem: &AdpProblem, cfg: &AdpConfig) -> Result<AdpOutcome> {
    run_algorithm2_from(problem, cfg, None)
}

pub fn run_algorithm2_from(
    problem: &AdpProblem,
    cfg: &AdpConfig,
    w0: Option<&[f64]>,
) -> Result<AdpOutcome> {
    let n = problem.basis.n;
    let theta = problem.basis.theta;
    let dim = n + 1;
    let mut w = match w0 {
        Some(w) => {
            check_dim(dim, w.len())?;
            if norm(w) > theta * (1.0 + 1e-12) {
                return Err(invalid(
                    "w0",
                    format!("initial point must satisfy ||w|| <= theta = {theta}"),
                ));
            }
            w.to_vec()
        }
        None => vec![0.0; dim],
    };
    let e = {
        let mut e = vec![0.0; dim];
        e[0] = -1.0;
        e
    };
    let mut r_sum = vec![0.0; dim];
    let mut y_sum = vec![0.0; problem.grid.len()];
    let mut cost_sum = 0.0;
    let mut tn_sum = vec![0.0; dim];
    let mut moment_sum = [0.0; 2];
    let mut weight_sum = 0.0;
    let mut inner_feas = 0.0f64;
    let mut warm: Option<Vec<f64>> = None;
    let mut trace = Vec::with_capacity(cfg.outer_iterations + 1);

    for l in 0..=cfg.outer_iterations {
        let sol = entropic_subproblem(problem, &w, cfg, warm.as_deref()).map_err(|e| {
            Error::Subproblem {
                iteration: l,
                source: Box::new(e),
            }
        })?;
        inner_feas = inner_feas.max(sol.feasibility_distance);
        let tn = problem.tn(&sol.weights)?;
        let r: Vec<f64> = e
            .iter()
            .zip(&tn)
            .map(|(ei, ti)| cfg.zeta / (4.0 * n as f64) * (ei - ti))
            .collect();
        let a = (l + 1) as f64;
        for (s, ri) in r_sum.iter_mut().zip(&r) {
            *s += 0.5 * a * ri;
        }
        let z = clipped_map(&r_sum, &vec![0.0; dim], theta)?;
        let beta = clipped_map(&r, &w, theta)?;
        let lf = l as f64;
        w = z
            .iter()
            .zip(&beta)
            .map(|(zi, bi)| 2.0 / (lf + 3.0) * zi + (lf + 1.0) / (lf + 3.0) * bi)
            .collect();

        // y_hat^(l) = sum_j 2(j+1)/((l+1)(l+2)) y_j, kept as running sums
        weight_sum += a;
        for (acc, y) in y_sum.iter_mut().zip(&sol.weights) {
            *acc += a * y;
        }
        cost_sum += a * dot(&problem.cost, &sol.weights);
        for (acc, t) in tn_sum.iter_mut().zip(&tn) {
            *acc += a * t;
        }
        let m = problem.stock_moments(&sol.weights);
        moment_sum[0] += a * m[0];
        moment_sum[1] += a * m[1];

        let tn_hat: Vec<f64> = tn_sum.iter().map(|t| t / weight_sum).collect();
        let resid: Vec<f64> = tn_hat.iter().zip(&e).map(|(t, ei)| t - ei).collect();
        let j = cost_sum / weight_sum + theta * norm(&resid);
        trace.push(AdpTraceRow {
            iteration: l,
            j,
            j_unshifted: j - problem.model.cost_shift(),
            margins: [
                problem.model.ell1 - moment_sum[0] / weight_sum,
                moment_sum[1] / weight_sum - problem.model.ell2,
            ],
            w_norm: norm(&w),
            inner_feasibility: inner_feas,
        });
        warm = Some(sol.z);
    }
    let y_hat: Vec<f64> = y_sum.iter().map(|y| y / weight_sum).collect();
    let j = trace.last().map(|t| t.j).unwrap_or(f64::NAN);
    Ok(AdpOutcome { j, y_hat, trace, w })
}

/// Right-hand side of the approximation error bound after `k` iterations,
/// given an estimate `residual` of the basis projection error of the
/// optimal value function. Logarithms are natural.
pub fn theorem2_bound(
    model: &InventoryModel,
    basis: &BasisSet,
    zeta: f64,
    k: usize,
    residual: f64,
) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k", "need at least one iteration"));
    }
    if !(zeta > 0.0) || !(residual >= 0.0) {
        return Err(invalid("zeta", "need zeta > 0 and residual >= 0"));
    }
    let dim_k = 2.0;
    let lq = model.kernel_lipschitz().max(1.0);
    let n = basis.n as f64;
    let beta = E / dim_k * (basis.theta * n.sqrt() * (lq + 1.0) + model.cost_lipschitz());
    let kf = k as f64;
    Ok((1.0 + lq) * residual
        + 4.0 * n * n * basis.theta / (kf * kf * zeta)
        + dim_k * zeta * (beta / zeta).ln().max(1.0))
}

/// The four constraint scenarios `(name, ell1, ell2)`.
pub fn standard_scenarios() -> [(&'static str, f64, f64); 4] {
    [
        ("unconstrained", 0.0, 1.0),
        ("ell1=0.5,ell2=0.4", 0.5, 0.4),
        ("ell1=0.5,ell2=0.3", 0.5, 0.3),
        ("ell1=0.1,ell2=0.1", 0.1, 0.1),
    ]
}
