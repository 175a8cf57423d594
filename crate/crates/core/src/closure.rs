//! Zero-information moment closure for the reversible dimerization
//! `2M <-> D`, with a stochastic simulator and the exact stationary law as
//! references.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discrete::{active_set_solve, ActiveSetSolution, DiscreteProblem};
use crate::error::{invalid, Error, Result};
use crate::parallel::with_threads;
use crate::target::TargetSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimerizationSystem {
    pub k1: f64,
    pub k2: f64,
    pub m0: u64,
    pub d0: u64,
}

impl DimerizationSystem {
    pub fn new(k1: f64, k2: f64, m0: u64, d0: u64) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(invalid("k1", format!("must be positive, got {k1}")));
        }
        if !(k2 >= 0.0 && k2.is_finite()) {
            return Err(invalid("k2", format!("must be nonnegative, got {k2}")));
        }
        Ok(Self { k1, k2, m0, d0 })
    }

    /// Conserved total `S0 = M0 + 2 D0`.
    pub fn s0(&self) -> u64 {
        self.m0 + 2 * self.d0
    }

    /// Propensity of `2M -> D` (`m -> m - 2`).
    pub fn alpha1(&self, m: f64) -> f64 {
        self.k1 * m * (m - 1.0)
    }

    /// Propensity of `D -> 2M` (`m -> m + 2`).
    pub fn alpha2(&self, m: f64) -> f64 {
        self.k2 * (self.s0() as f64 - m) / 2.0
    }
}

/// Propensity functions as closures over a copy of the system.
pub fn dimerization_propensities(
    sys: &DimerizationSystem,
) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let (a, b) = (*sys, *sys);
    (move |m| a.alpha1(m), move |m| b.alpha2(m))
}

/// `d mu / dt = A mu + B zeta` for `mu = (<m^0>, ..., <m^M>)` and the
/// unclosed moments `zeta = (<m^{M+1}>, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentOde {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub order: usize,
}

impl MomentOde {
    pub fn rhs(&self, mu: &[f64], zeta: &[f64]) -> Vec<f64> {
        (0..=self.order)
            .map(|r| {
                let lin: f64 = (0..=self.order).map(|c| self.a[(r, c)] * mu[c]).sum();
                let hi: f64 = (0..self.b.ncols()).map(|c| self.b[(r, c)] * zeta[c]).sum();
                lin + hi
            })
            .collect()
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of `(m + shift)^k - m^k` in the monomial basis.
fn shifted_power_difference(k: usize, shift: f64) -> Vec<f64> {
    let mut coeffs = vec![0.0; k + 1];
    let mut binom = 1.0;
    for j in 0..=k {
        coeffs[j] = binom * shift.powi((k - j) as i32);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    coeffs[k] -= 1.0;
    coeffs
}

/// Generator of the raw moments up to order `M` by polynomial expansion
/// of `E[((m-2)^k - m^k) alpha1(m) + ((m+2)^k - m^k) alpha2(m)]`.
pub fn moment_matrices(sys: &DimerizationSystem, order: usize) -> Result<MomentOde> {
    if !(2..=3).contains(&order) {
        return Err(invalid(
            "order",
            format!("supported closure orders are 2 and 3, got {order}"),
        ));
    }
    let s0 = sys.s0() as f64;
    let alpha1 = [0.0, -sys.k1, sys.k1];
    let alpha2 = [sys.k2 * s0 / 2.0, -sys.k2 / 2.0];
    let h = 1;
    let mut a = DMatrix::zeros(order + 1, order + 1);
    let mut b = DMatrix::zeros(order + 1, h);
    for k in 1..=order {
        let down = poly_mul(&shifted_power_difference(k, -2.0), &alpha1);
        let up = poly_mul(&shifted_power_difference(k, 2.0), &alpha2);
        let mut total = vec![0.0; down.len().max(up.len())];
        for (i, v) in down.iter().enumerate() {
            total[i] += v;
        }
        for (i, v) in up.iter().enumerate() {
            total[i] += v;
        }
        for (j, v) in total.iter().enumerate() {
            if j <= order {
                a[(k, j)] = *v;
            } else if *v != 0.0 {
                b[(k, j - order - 1)] = *v;
            }
        }
    }
    Ok(MomentOde { a, b, order })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureConfig {
    pub order: usize,
    pub kappa: f64,
    pub support_max: u64,
    /// Restrict the maxent support to states with the parity of `support_max`.
    pub parity_only: bool,
    /// Moment tolerance of the inner solve, in scaled feature units.
    pub tolerance: f64,
}

impl ClosureConfig {
    pub fn new(order: usize, kappa: f64, support_max: u64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(invalid("kappa", format!("must be positive, got {kappa}")));
        }
        if !(2..=3).contains(&order) {
            return Err(invalid(
                "order",
                format!("supported closure orders are 2 and 3, got {order}"),
            ));
        }
        if support_max == 0 {
            return Err(invalid("support_max", "must be at least 1"));
        }
        Ok(Self {
            order,
            kappa,
            support_max,
            parity_only: false,
            tolerance: 1e-12,
        })
    }
}

/// Closure function with a warm-started dual.
#[derive(Debug, Clone)]
pub struct ClosureSolver {
    cfg: ClosureConfig,
    states: Vec<f64>,
    warm: Option<ActiveSetSolution>,
}

impl ClosureSolver {
    pub fn new(cfg: ClosureConfig) -> Self {
        let s = cfg.support_max;
        let states = (0..=s)
            .filter(|m| !cfg.parity_only || m % 2 == s % 2)
            .map(|m| m as f64)
            .collect();
        Self {
            cfg,
            states,
            warm: None,
        }
    }

    pub fn config(&self) -> &ClosureConfig {
        &self.cfg
    }

    /// Maxent law on the support matching `mu[1..=M]` up to `kappa`.
    /// Features are `(m/S)^i` with radii `kappa / S^i`, an equivalent
    /// rescaling that keeps the dual well conditioned.
    pub fn maxent_law(&mut self, mu: &[f64]) -> Result<Vec<f64>> {
        let order = self.cfg.order;
        if mu.len() != order + 1 {
            return Err(Error::DimensionMismatch {
                expected: order + 1,
                got: mu.len(),
            });
        }
        let scale = self.cfg.support_max as f64;
        let center: Vec<f64> = (1..=order).map(|i| mu[i] / scale.powi(i as i32)).collect();
        let radius: Vec<f64> = (1..=order)
            .map(|i| self.cfg.kappa / scale.powi(i as i32))
            .collect();
        let target = TargetSet::new_box(center, radius)?;
        let scaled: Vec<f64> = self.states.iter().map(|m| m / scale).collect();
        let n = scaled.len();
        let features = (1..=order as i32)
            .map(|i| scaled.iter().map(|x| x.powi(i)).collect())
            .collect();
        let problem = DiscreteProblem::new(scaled, vec![1.0 / n as f64; n], features, target)?;
        let solution =
            active_set_solve(&problem, self.warm.as_ref(), self.cfg.tolerance).map_err(|e| {
                Error::ClosureInfeasible {
                    time: f64::NAN,
                    reason: e.to_string(),
                }
            })?;
        let weights = solution.weights.clone();
        self.warm = Some(solution);
        Ok(weights)
    }

    /// `<p*, m^{M+i}>` for the unclosed moments (one for this network).
    pub fn closure(&mut self, mu: &[f64]) -> Result<Vec<f64>> {
        let p = self.maxent_law(mu)?;
        let k = (self.cfg.order + 1) as i32;
        Ok(vec![p
            .iter()
            .zip(&self.states)
            .map(|(w, m)| w * m.powi(k))
            .sum()])
    }
}

/// One-shot closure function with a cold start.
pub fn closure_function(mu: &[f64], cfg: &ClosureConfig) -> Result<Vec<f64>> {
    ClosureSolver::new(cfg.clone()).closure(mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub moments: Vec<f64>,
}

/// Maximum relative deviation accepted between one step and two half steps.
pub const STEP_TOLERANCE: f64 = 1e-6;
const MAX_HALVINGS: u32 = 30;

/// Integrates the closed moment ODE from the deterministic start
/// `(1, M0, M0^2, ...)` with classical RK4.
///
/// Each output interval of length `dt` is covered by steps `dt / 2^j`.
/// A step is accepted when it agrees with two half steps to a relative
/// `1e-6`; otherwise it is retried with `j + 1`. After an accepted step
/// that lands on the grid of `dt / 2^(j-1)`, `j` drops by one.
pub fn integrate_closure_ode(
    sys: &DimerizationSystem,
    cfg: &ClosureConfig,
    t_end: f64,
    dt: f64,
) -> Result<Vec<TrajectoryPoint>> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(invalid("dt", "need dt > 0 and t_end >= 0"));
    }
    let ode = moment_matrices(sys, cfg.order)?;
    let mut solver = ClosureSolver::new(cfg.clone());
    let m0 = sys.m0 as f64;
    let mut mu: Vec<f64> = (0..=cfg.order as i32).map(|k| m0.powi(k)).collect();
    let mut out = vec![TrajectoryPoint {
        t: 0.0,
        moments: mu.clone(),
    }];
    let intervals = (t_end / dt).round() as usize;
    const TICKS: u64 = 1 << MAX_HALVINGS;
    for n in 0..intervals {
        let t0 = n as f64 * dt;
        let mut pos = 0u64;
        let mut level = 0u32;
        while pos < TICKS {
            let ticks = TICKS >> level;
            let h = dt / (1u64 << level) as f64;
            let s = t0 + dt * pos as f64 / TICKS as f64;
            let trial = rk4_step(&ode, &mut solver, &mu, h, s).and_then(|full| {
                let half = rk4_step(&ode, &mut solver, &mu, h / 2.0, s)?;
                let half = rk4_step(&ode, &mut solver, &half, h / 2.0, s + h / 2.0)?;
                Ok((full, half))
            });
            let accepted = match trial {
                Ok((full, half)) => {
                    let dev = full
                        .iter()
                        .zip(&half)
                        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                        .fold(0.0, f64::max);
                    (dev < STEP_TOLERANCE).then_some(half)
                }
                // stage points of a large step can leave the realizable moments
                Err(e @ Error::ClosureInfeasible { .. }) => {
                    if level >= MAX_HALVINGS {
                        return Err(e);
                    }
                    None
                }
                Err(e) => return Err(e),
            };
            match accepted {
                Some(half) => {
                    mu = half;
                    pos += ticks;
                    // grow back once the position is aligned with the coarser grid
                    if level > 0 && pos.is_multiple_of(2 * ticks) {
                        level -= 1;
                    }
                }
                None => {
                    level += 1;
                    if level > MAX_HALVINGS {
                        return Err(Error::StepUnderflow {
                            time: s,
                            dt: h / 2.0,
                        });
                    }
                }
            }
        }
        out.push(TrajectoryPoint {
            t: (n + 1) as f64 * dt,
            moments: mu.clone(),
        });
    }
    Ok(out)
}

fn rk4_step(
    ode: &MomentOde,
    solver: &mut ClosureSolver,
    y: &[f64],
    h: f64,
    t: f64,
) -> Result<Vec<f64>> {
    let mut f = |x: &[f64], time: f64| -> Result<Vec<f64>> {
        let zeta = solver.closure(x).map_err(|e| match e {
            Error::ClosureInfeasible { reason, .. } => Error::ClosureInfeasible { time, reason },
            other => other,
        })?;
        Ok(ode.rhs(x, &zeta))
    };
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    let k1 = f(y, t)?;
    let k2 = f(&axpy(y, h / 2.0, &k1), t + h / 2.0)?;
    let k3 = f(&axpy(y, h / 2.0, &k2), t + h / 2.0)?;
    let k4 = f(&axpy(y, h, &k3), t + h)?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Averages of `m`, `m^2`, `m^3` over trajectories with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SsaSummary {
    pub t_grid: Vec<f64>,
    /// `mean[i][k]` is the average of `m^{k+1}` at `t_grid[i]`.
    pub mean: Vec<[f64; 3]>,
    pub std_error: Vec<[f64; 3]>,
    pub n_traj: usize,
}

const SSA_CHUNK: usize = 256;

fn simulate_one(
    sys: &DimerizationSystem,
    rng: &mut ChaCha8Rng,
    t_grid: &[f64],
    acc: &mut [[f64; 6]],
) {
    let mut m = sys.m0 as f64;
    let mut t = 0.0;
    let mut next = 0;
    loop {
        let a1 = sys.alpha1(m);
        let a2 = sys.alpha2(m);
        let total = a1 + a2;
        let t_jump = if total > 0.0 {
            let u: f64 = rng.gen();
            t - (1.0 - u).ln() / total
        } else {
            f64::INFINITY
        };
        while next < t_grid.len() && t_grid[next] < t_jump {
            let p = [m, m * m, m * m * m];
            for k in 0..3 {
                acc[next][k] += p[k];
                acc[next][k + 3] += p[k] * p[k];
            }
            next += 1;
        }
        if next == t_grid.len() {
            return;
        }
        t = t_jump;
        let u: f64 = rng.gen::<f64>() * total;
        if u < a1 {
            m -= 2.0;
        } else {
            m += 2.0;
        }
    }
}

/// Gillespie direct method. Trajectory `i` draws from a ChaCha8 stream
/// `i` seeded by `seed`; per-chunk sums are combined in chunk order, so
/// results do not depend on the thread count.
pub fn ssa_simulate(
    sys: &DimerizationSystem,
    n_traj: usize,
    t_grid: &[f64],
    seed: u64,
    threads: usize,
) -> Result<SsaSummary> {
    if n_traj == 0 {
        return Err(invalid("n_traj", "need at least one trajectory"));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|t| *t < 0.0) {
        return Err(invalid("t_grid", "must be nonnegative and nondecreasing"));
    }
    let chunks = n_traj.div_ceil(SSA_CHUNK);
    let run_chunk = |c: usize| -> Vec<[f64; 6]> {
        let mut acc = vec![[0.0; 6]; t_grid.len()];
        for i in c * SSA_CHUNK..((c + 1) * SSA_CHUNK).min(n_traj) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            simulate_one(sys, &mut rng, t_grid, &mut acc);
        }
        acc
    };
    let partials: Vec<Vec<[f64; 6]>> = with_threads(threads, |parallel| {
        if parallel {
            (0..chunks).into_par_iter().map(run_chunk).collect()
        } else {
            (0..chunks).map(run_chunk).collect()
        }
    });
    let mut total = vec![[0.0; 6]; t_grid.len()];
    for part in &partials {
        for (acc, p) in total.iter_mut().zip(part) {
            for k in 0..6 {
                acc[k] += p[k];
            }
        }
    }
    let n = n_traj as f64;
    let mut mean = Vec::with_capacity(t_grid.len());
    let mut std_error = Vec::with_capacity(t_grid.len());
    for acc in &total {
        let mut mu = [0.0; 3];
        let mut se = [0.0; 3];
        for k in 0..3 {
            mu[k] = acc[k] / n;
            let var = if n_traj > 1 {
                ((acc[k + 3] - n * mu[k] * mu[k]) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            se[k] = (var / n).sqrt();
        }
        mean.push(mu);
        std_error.push(se);
    }
    Ok(SsaSummary {
        t_grid: t_grid.to_vec(),
        mean,
        std_error,
        n_traj,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryLaw {
    pub states: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// `<m>`, `<m^2>`, `<m^3>`.
    pub moments: [f64; 3],
    /// Largest `|(pi Q)_j|` of the generator applied to the law.
    pub residual: f64,
}

/// Exact stationary law on `{M0 mod 2, ..., S0}` (steps of 2) from the
/// detailed-balance recursion of this birth-death chain, checked against
/// the generator.
pub fn exact_cme_stationary(sys: &DimerizationSystem) -> Result<StationaryLaw> {
    let s0 = sys.s0();
    if s0 > 10_000 {
        return Err(invalid(
            "S0",
            format!("at most 10000 molecules supported, got {s0}"),
        ));
    }
    let states: Vec<f64> = (s0 % 2..=s0).step_by(2).map(|m| m as f64).collect();
    let n = states.len();
    let mut log_pi = vec![0.0; n];
    let mut absorbing = sys.k2 == 0.0;
    for j in 1..n {
        let up = sys.alpha2(states[j - 1]);
        let down = sys.alpha1(states[j]);
        if up == 0.0 {
            absorbing = true;
            break;
        }
        log_pi[j] = log_pi[j - 1] + up.ln() - down.ln();
    }
    let probabilities: Vec<f64> = if absorbing {
        let mut p = vec![0.0; n];
        p[0] = 1.0;
        p
    } else {
        let top = log_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_pi.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    };
    let mut residual = 0.0f64;
    let scale = states
        .iter()
        .map(|m| sys.alpha1(*m) + sys.alpha2(*m))
        .fold(1.0, f64::max);
    for j in 0..n {
        let out = probabilities[j] * (sys.alpha1(states[j]) + sys.alpha2(states[j]));
        let mut inflow = 0.0;
        if j > 0 {
            inflow += probabilities[j - 1] * sys.alpha2(states[j - 1]);
        }
        if j + 1 < n {
            inflow += probabilities[j + 1] * sys.alpha1(states[j + 1]);
        }
        residual = residual.max((inflow - out).abs() / scale);
    }
    if !(residual <= 1e-10) {
        return Err(Error::SingularGenerator(format!(
            "stationary residual {residual:e}"
        )));
    }
    let mut moments = [0.0; 3];
    for (p, m) in probabilities.iter().zip(&states) {
        moments[0] += p * m;
        moments[1] += p * m * m;
        moments[2] += p * m * m * m;
    }
    Ok(StationaryLaw {
        states,
        probabilities,
        moments,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propensity_edges() {
        let sys = DimerizationSystem::new(1.0, 1.0, 10, 0).unwrap();
        let (a1, a2) = dimerization_propensities(&sys);
        assert_eq!(a1(0.0), 0.0);
        assert_eq!(a2(10.0), 0.0);
        assert_eq!(a1(2.0), 2.0);
    }

    #[test]
    fn second_order_generator_matches_closed_form() {
        let (k1, k2) = (1.3, 0.7);
        let sys = DimerizationSystem::new(k1, k2, 6, 2).unwrap();
        let s0 = 10.0;
        let ode = moment_matrices(&sys, 2).unwrap();
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
        assert_eq!(ode.a, a);
        assert_eq!(ode.b, DMatrix::from_row_slice(3, 1, &[0.0, 0.0, -4.0 * k1]));
    }

    #[test]
    fn third_order_leading_coefficient() {
        let sys = DimerizationSystem::new(2.0, 1.0, 10, 0).unwrap();
        let ode = moment_matrices(&sys, 3).unwrap();
        assert_eq!(ode.b[(3, 0)], -6.0 * 2.0);
        assert!(ode.a.row(0).iter().all(|v| *v == 0.0));
        assert!(moment_matrices(&sys, 4).is_err());
    }

    #[test]
    fn vacuous_box_gives_uniform_law() {
        let cfg = ClosureConfig::new(2, 1e9, 10).unwrap();
        let zeta = closure_function(&[1.0, 5.0, 35.0], &cfg).unwrap();
        assert!((zeta[0] - 275.0).abs() < 1e-3, "{zeta:?}");
    }

    #[test]
    fn exact_law_without_backward_reaction() {
        let sys = DimerizationSystem::new(1.0, 0.0, 9, 0).unwrap();
        let law = exact_cme_stationary(&sys).unwrap();
        assert_eq!(law.states[0], 1.0);
        assert_eq!(law.probabilities[0], 1.0);
        assert_eq!(law.moments, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn stationary_moments_satisfy_first_moment_balance() {
        let sys = DimerizationSystem::new(1.0, 1.0, 10, 0).unwrap();
        let law = exact_cme_stationary(&sys).unwrap();
        // 0 = k2 S0 + (2k1 - k2) <m> - 2 k1 <m^2>
        let lhs = 10.0 + law.moments[0] - 2.0 * law.moments[1];
        assert!(lhs.abs() < 1e-12);
        assert!(law.residual <= 1e-10);
    }
}
