//! Accelerated ascent on the smoothed dual with a-priori iteration counts
//! and a-posteriori optimality certificates.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::gibbs::{GibbsModel, GridMeasure, SmoothingParams};
use crate::target::{MomentProblem, TargetSet};
use crate::vecops::norm;

/// Constants of a strictly feasible point `mu0`: `C = D(mu0 || nu)` and the
/// margin `delta` of `A mu0` to the complement of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterData {
    pub c: f64,
    pub delta: f64,
    pub slater_measure: Option<GridMeasure>,
}

impl SlaterData {
    pub fn new(c: f64, delta: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("C", format!("must be positive, got {c}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid("delta", format!("must be positive, got {delta}")));
        }
        Ok(Self {
            c,
            delta,
            slater_measure: None,
        })
    }

    pub fn with_measure(mut self, measure: GridMeasure) -> Self {
        self.slater_measure = Some(measure);
        self
    }

    /// Bound `||z*|| <= C / delta` on the optimal dual multiplier.
    pub fn dual_bound(&self) -> f64 {
        self.c / self.delta
    }

    /// A-priori feasibility guarantee `2 eps delta / C`.
    pub fn feasibility_bound(&self, epsilon: f64) -> f64 {
        2.0 * epsilon * self.delta / self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stopping {
    /// Run exactly `N(eps)` iterations.
    APriori,
    /// Check the a-posteriori gap every `block` iterations; stop once it is `<= eps`.
    APosteriori { block: usize },
    /// Run a fixed number of iterations.
    Fixed(usize),
}

/// Default block length between a-posteriori checks.
pub const DEFAULT_BLOCK: usize = 50;

/// How the target radius `D` entering `eta1 = eps / (4D)` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diameter {
    /// `D = max_{x in T} ||x||^2 / 2`, the bound on the quadratic prox term.
    /// The smoothing bias is then exactly `eps / 4`.
    #[default]
    HalfSquaredNorm,
    /// `D = max_{x in T} ||x|| / 2`.
    HalfNorm,
}

impl Diameter {
    pub fn of(self, target: &TargetSet) -> f64 {
        let r = target.max_norm();
        match self {
            Diameter::HalfSquaredNorm => 0.5 * r * r,
            Diameter::HalfNorm => 0.5 * r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub stopping: Stopping,
    pub diameter: Diameter,
    pub eta_override: Option<SmoothingParams>,
    pub max_iterations: usize,
    pub record_trace: bool,
    /// Starting point `w0 = y0`; the origin when absent.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            stopping: Stopping::APriori,
            diameter: Diameter::default(),
            eta_override: None,
            max_iterations: 100_000_000,
            record_trace: false,
            warm_start: None,
        }
    }
}

impl SolverConfig {
    pub fn new(epsilon: f64, stopping: Stopping) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
        }
        if let Stopping::APosteriori { block: 0 } = stopping {
            return Err(invalid("block", "must be at least 1"));
        }
        Ok(Self {
            epsilon,
            stopping,
            ..Self::default()
        })
    }
}

/// A-posteriori bracket `F(z) <= J* <= D(mu) + (C/delta) d(A mu, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub dual_value: f64,
    pub primal_value: f64,
    pub feasibility_distance: f64,
    pub posterior_gap: f64,
    pub iterations: usize,
    pub dual_bound: f64,
}

impl Certificate {
    pub fn lower_bound(&self) -> f64 {
        self.dual_value
    }

    pub fn upper_bound(&self) -> f64 {
        self.primal_value + self.dual_bound * self.feasibility_distance
    }

    /// Bracket on the optimal differential entropy `-J*` (uniform reference),
    /// returned as `(lower, upper)`.
    pub fn entropy_bracket(&self) -> (f64, f64) {
        (-self.upper_bound(), -self.dual_value)
    }

    /// Converts every entropy-valued field from bits to nats.
    pub fn to_nats(&self) -> Self {
        let ln2 = std::f64::consts::LN_2;
        Self {
            dual_value: self.dual_value * ln2,
            primal_value: self.primal_value * ln2,
            posterior_gap: self.posterior_gap * ln2,
            dual_bound: self.dual_bound * ln2,
            ..self.clone()
        }
    }
}

/// `eta1 = eps / (4D)`, `eta2 = eps delta^2 / (2 C^2)`. A target reduced to
/// the origin falls back to `eta1 = eps`.
pub fn smoothing_for_accuracy(
    epsilon: f64,
    slater: &SlaterData,
    target: &TargetSet,
    diameter: Diameter,
) -> Result<SmoothingParams> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let d = diameter.of(target);
    let eta1 = if d > 0.0 {
        epsilon / (4.0 * d)
    } else {
        epsilon
    };
    let eta2 = epsilon * slater.delta * slater.delta / (2.0 * slater.c * slater.c);
    SmoothingParams::new(eta1, eta2).map_err(|e| Error::DegenerateSmoothing(e.to_string()))
}

/// The two a-priori iteration counts and their rounded-up maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriCounts {
    pub n1: f64,
    pub n2: f64,
    pub total: usize,
}

pub fn apriori_counts(
    epsilon: f64,
    slater: &SlaterData,
    norm_bound: f64,
    target: &TargetSet,
    diameter: Diameter,
) -> Result<AprioriCounts> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let (c, delta, e) = (slater.c, slater.delta, epsilon);
    let eta = smoothing_for_accuracy(e, slater, target, diameter)?;
    let l = 1.0 / eta.eta1 + norm_bound * norm_bound + eta.eta2;
    let root = (l / eta.eta2).sqrt();
    let n1 = 2.0 * root * (10.0 * (e + 2.0 * c) / e).ln();
    let inner = 4.0 * l * (c + e / 2.0);
    let n2 = 2.0 * root * (c / (e * delta * (2.0 - 3f64.sqrt())) * inner.sqrt()).ln();
    let total = n1.max(n2).max(0.0).ceil() as usize;
    Ok(AprioriCounts { n1, n2, total })
}

/// `N(eps) = ceil(max(N1, N2))` for a moment problem.
pub fn apriori_iterations(
    epsilon: f64,
    slater: &SlaterData,
    problem: &MomentProblem,
    target: &TargetSet,
    diameter: Diameter,
) -> Result<usize> {
    Ok(apriori_counts(
        epsilon,
        slater,
        problem.operator_norm_bound(),
        target,
        diameter,
    )?
    .total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub f_eta: f64,
    pub f: f64,
    pub grad_norm: f64,
    pub feas_dist: f64,
}

#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub z_hat: Vec<f64>,
    pub measure: GridMeasure,
    pub moments: Vec<f64>,
    pub dual_value: f64,
    pub primal_value: f64,
    pub feasibility_distance: f64,
    pub certificate: Option<Certificate>,
    /// Whether the run met its stopping rule with valid Slater constants.
    pub certified: bool,
    pub iterations: usize,
    pub eta: SmoothingParams,
    pub trace: Vec<TraceRow>,
}

/// Fast gradient scheme for smooth strongly concave maximization of `F_eta`:
///
/// `y_{k+1} = w_k + grad F_eta(w_k) / L`,
/// `w_{k+1} = y_{k+1} + (sqrt L - sqrt eta2)/(sqrt L + sqrt eta2) (y_{k+1} - y_k)`.
///
/// Without Slater data the run is uncertified and requires an explicit
/// smoothing pair.
pub fn run_algorithm1(
    model: &GibbsModel,
    slater: Option<&SlaterData>,
    config: &SolverConfig,
) -> Result<SolverOutcome> {
    let eta = match (config.eta_override, slater) {
        (Some(eta), _) => eta,
        (None, Some(s)) => {
            smoothing_for_accuracy(config.epsilon, s, model.target(), config.diameter)?
        }
        (None, None) => {
            return Err(invalid(
                "eta",
                "smoothing parameters are required when no Slater data is given",
            ))
        }
    };
    let m = model.order();
    let (budget, apriori) = match config.stopping {
        Stopping::APriori => {
            let s =
                slater.ok_or_else(|| invalid("stopping", "a-priori stopping needs Slater data"))?;
            let n = apriori_counts(
                config.epsilon,
                s,
                model.norm_bound(),
                model.target(),
                config.diameter,
            )?
            .total;
            (n.min(config.max_iterations), n <= config.max_iterations)
        }
        Stopping::Fixed(n) => (n.min(config.max_iterations), false),
        Stopping::APosteriori { block } => {
            if slater.is_none() {
                return Err(invalid(
                    "stopping",
                    "a-posteriori stopping needs Slater data",
                ));
            }
            if block == 0 {
                return Err(invalid("block", "must be at least 1"));
            }
            (config.max_iterations, false)
        }
    };
    let block = match config.stopping {
        Stopping::APosteriori { block } => Some(block),
        _ => None,
    };

    let l = model.lipschitz(eta);
    let momentum = (l.sqrt() - eta.eta2.sqrt()) / (l.sqrt() + eta.eta2.sqrt());
    let start = match &config.warm_start {
        Some(z0) => {
            crate::error::check_dim(m, z0.len())?;
            z0.clone()
        }
        None => vec![0.0; m],
    };
    let mut y = start.clone();
    let mut w = start;
    let mut trace = Vec::new();
    if config.record_trace {
        trace.push(trace_row(model, &y, eta, 0)?);
    }

    let mut k = 0;
    let mut met_posterior = false;
    while k < budget {
        let eval = model.smoothed(&w, eta)?;
        let y_next: Vec<f64> = w
            .iter()
            .zip(&eval.gradient)
            .map(|(wi, g)| wi + g / l)
            .collect();
        w = y_next
            .iter()
            .zip(&y)
            .map(|(a, b)| a + momentum * (a - b))
            .collect();
        y = y_next;
        k += 1;
        if config.record_trace {
            trace.push(trace_row(model, &y, eta, k)?);
        }
        if let (Some(b), Some(s)) = (block, slater) {
            if k % b == 0 {
                let (measure, _) = model.gibbs(&y)?;
                let cert = posterior_certificate(&measure, &y, s, model, k)?;
                if cert.posterior_gap <= config.epsilon {
                    met_posterior = true;
                    break;
                }
            }
        }
    }

    let (measure, _) = model.gibbs(&y)?;
    let moments = model.moments_of(&measure);
    let dual_value = model.dual_value(&y)?;
    let primal_value = model.primal_value(&measure);
    let feasibility_distance = model.target().distance(&moments)?;
    let certificate = match slater {
        Some(s) => Some(posterior_certificate(&measure, &y, s, model, k)?),
        None => None,
    };
    let certified = match (&certificate, config.stopping) {
        (None, _) => false,
        (Some(_), Stopping::APriori) => apriori,
        (Some(_), Stopping::APosteriori { .. }) => met_posterior,
        (Some(c), Stopping::Fixed(_)) => c.posterior_gap <= config.epsilon,
    };
    Ok(SolverOutcome {
        z_hat: y,
        measure,
        moments,
        dual_value,
        primal_value,
        feasibility_distance,
        certificate,
        certified,
        iterations: k,
        eta,
        trace,
    })
}

fn trace_row(model: &GibbsModel, y: &[f64], eta: SmoothingParams, k: usize) -> Result<TraceRow> {
    let e = model.smoothed(y, eta)?;
    Ok(TraceRow {
        k,
        f_eta: e.value,
        f: model.dual_value(y)?,
        grad_norm: norm(&e.gradient),
        feas_dist: model.target().distance(&e.moments)?,
    })
}

/// A-posteriori bracket for a primal/dual pair produced by a solver run.
pub fn posterior_certificate(
    mu_hat: &GridMeasure,
    z_hat: &[f64],
    slater: &SlaterData,
    model: &GibbsModel,
    iterations: usize,
) -> Result<Certificate> {
    let dual_value = model.dual_value(z_hat)?;
    let primal_value = model.primal_value(mu_hat);
    let feasibility_distance = model.target().distance(&model.moments_of(mu_hat))?;
    let dual_bound = slater.dual_bound();
    Ok(Certificate {
        dual_value,
        primal_value,
        feasibility_distance,
        posterior_gap: primal_value + dual_bound * feasibility_distance - dual_value,
        iterations,
        dual_bound,
    })
}

/// Observed iterates against the theoretical decay envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeRow {
    pub k: usize,
    pub gap_envelope: f64,
    pub grad_envelope: f64,
    pub observed_gap: Option<f64>,
    pub observed_grad: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub rows: Vec<EnvelopeRow>,
    pub violations: usize,
}

/// Dual-gap envelope `3eps/4 + 5(C + eps/2) exp(-k/2 sqrt(eta2/L))`.
pub fn gap_envelope(
    k: usize,
    slater: &SlaterData,
    eta: SmoothingParams,
    l: f64,
    epsilon: f64,
) -> f64 {
    0.75 * epsilon + 5.0 * (slater.c + 0.5 * epsilon) * decay(k, eta, l)
}

/// Gradient envelope
/// `sqrt(4L(C + eps/2)) exp(-k/2 sqrt(eta2/L)) + 2 sqrt(3) eta2 C / delta`.
pub fn grad_envelope(
    k: usize,
    slater: &SlaterData,
    eta: SmoothingParams,
    l: f64,
    epsilon: f64,
) -> f64 {
    (4.0 * l * (slater.c + 0.5 * epsilon)).sqrt() * decay(k, eta, l)
        + 2.0 * 3f64.sqrt() * eta.eta2 * slater.dual_bound()
}

fn decay(k: usize, eta: SmoothingParams, l: f64) -> f64 {
    (-(k as f64) / 2.0 * (eta.eta2 / l).sqrt()).exp()
}

/// Overlays the envelopes on a recorded trace. `optimum` is a reference
/// value of `J*`; without it only the gradient envelope is checked.
pub fn diagnostics_appendix(
    trace: &[TraceRow],
    slater: &SlaterData,
    eta: SmoothingParams,
    epsilon: f64,
    lipschitz: f64,
    optimum: Option<f64>,
) -> Result<DiagnosticsReport> {
    if trace.is_empty() {
        return Err(invalid("trace", "must not be empty"));
    }
    let rows: Vec<EnvelopeRow> = trace
        .iter()
        .map(|r| {
            let ge = gap_envelope(r.k, slater, eta, lipschitz, epsilon);
            let de = grad_envelope(r.k, slater, eta, lipschitz, epsilon);
            let observed_gap = optimum.map(|j| j - r.f);
            let violated = observed_gap.is_some_and(|g| g > ge + 1e-12) || r.grad_norm > de + 1e-12;
            EnvelopeRow {
                k: r.k,
                gap_envelope: ge,
                grad_envelope: de,
                observed_gap,
                observed_grad: r.grad_norm,
                violated,
            }
        })
        .collect();
    let violations = rows.iter().filter(|r| r.violated).count();
    Ok(DiagnosticsReport { rows, violations })
}

/// Writes the trace as CSV with columns `k,F_eta,F,grad_norm,feas_dist`.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,F_eta,F,grad_norm,feas_dist")?;
    for r in trace {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e}",
            r.k, r.f_eta, r.f, r.grad_norm, r.feas_dist
        )?;
    }
    Ok(())
}
