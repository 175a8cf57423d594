//! Strictly feasible polynomial densities for box-constrained moment problems.
//!
//! The density `p(s) = sum_j alpha_j s^{j-1}` on `[0, 1]` matches the observed
//! moments exactly and maximizes its minimum over a uniform grid. A positive
//! grid margin `t` certifies `p > 0` on the whole interval when
//! `t > h d^2 ||p||_inf`, since Markov's inequality gives
//! `|p'| <= 2 d^2 ||p||_inf` on an interval of length one and every point
//! lies within `h/2` of a node.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::fast_gradient::SlaterData;
use crate::integration::{composite_rule, RuleKind};
use crate::lp::maximize_inequality;
use crate::target::{MomentProblem, ReferenceMeasure, SupportInterval};

/// Number of Simpson nodes used for `C = D(mu0 || nu)`.
const ENTROPY_NODES: usize = 20_001;

/// `(M+1) x r` matrix with entries `1/(i+j-1)` (1-indexed).
pub fn hilbert_moment_matrix(r: usize, m: usize) -> Result<DMatrix<f64>> {
    if r == 0 || m == 0 {
        return Err(invalid("r", "degree and order must be at least 1"));
    }
    Ok(DMatrix::from_fn(m + 1, r, |i, j| 1.0 / (i + j + 1) as f64))
}

/// Polynomial density on `support`, stored in the normalized variable
/// `s = (x - lower) / width`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialDensity {
    pub coefficients: Vec<f64>,
    pub support: SupportInterval,
}

impl PolynomialDensity {
    /// Number of coefficients `r`; the polynomial degree is `r - 1`.
    pub fn degree(&self) -> usize {
        self.coefficients.len()
    }

    /// `p(s)` on the unit interval.
    pub fn eval_normalized(&self, s: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, a| acc * s + a)
    }

    /// Lebesgue density at `x` in the original support.
    pub fn eval(&self, x: f64) -> f64 {
        let w = self.support.width();
        self.eval_normalized((x - self.support.lower()) / w) / w
    }

    /// `(x, p(x))` at `n` equispaced points including both endpoints.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let (a, b) = (self.support.lower(), self.support.upper());
        (0..n)
            .map(|i| {
                let x = if n == 1 {
                    a
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                };
                (x, self.eval(x))
            })
            .collect()
    }
}

/// Result of the grid linear program.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterConstruction {
    pub density: PolynomialDensity,
    /// `D(mu0 || nu)` in bits.
    pub c: f64,
    pub delta: f64,
    /// Minimum of `p` over the construction grid.
    pub margin: f64,
}

impl SlaterConstruction {
    /// Constants for the certified solver. Fails when the Slater point is
    /// the reference measure itself (`C = 0`) or when some radius is zero.
    pub fn slater_data(&self) -> Result<SlaterData> {
        if self.delta <= 0.0 {
            return Err(Error::Irregular(
                "a zero uncertainty radius leaves no strictly feasible point".into(),
            ));
        }
        if self.c <= 0.0 {
            return Err(Error::DegenerateSmoothing(
                "the reference measure is itself feasible".into(),
            ));
        }
        SlaterData::new(self.c, self.delta)
    }

    pub fn is_certified(&self) -> bool {
        self.slater_data().is_ok()
    }
}

/// Moments of the pushforward to `[0, 1]` under `s = (x - a) / w`.
fn normalized_moments(problem: &MomentProblem) -> Vec<f64> {
    let a = problem.support.lower();
    let w = problem.support.width();
    let mut raw = vec![1.0];
    raw.extend_from_slice(&problem.observed);
    (1..raw.len())
        .map(|k| {
            let mut binom = 1.0;
            let mut acc = 0.0;
            for i in 0..=k {
                acc += binom * (-a).powi((k - i) as i32) * raw[i];
                binom = binom * (k - i) as f64 / (i + 1) as f64;
            }
            acc / w.powi(k as i32)
        })
        .collect()
}

/// Finds a polynomial density of `r` coefficients matching the observed
/// moments with the largest minimum over `grid_n` equispaced nodes.
pub fn find_polynomial_slater(
    problem: &MomentProblem,
    r: usize,
    grid_n: usize,
) -> Result<SlaterConstruction> {
    if !matches!(problem.reference, ReferenceMeasure::Uniform) {
        return Err(invalid(
            "reference",
            "polynomial Slater points need a uniform reference",
        ));
    }
    if grid_n < 2 {
        return Err(invalid("grid_n", "need at least 2 grid points"));
    }
    let m = problem.order();
    let a = hilbert_moment_matrix(r, m)?;
    let mut beta = vec![1.0];
    beta.extend(normalized_moments(problem));
    let beta = DVector::from_vec(beta);

    // square padding gives the full right singular basis
    let size = r.max(m + 1);
    let mut padded = DMatrix::zeros(size, r);
    padded.view_mut((0, 0), (m + 1, r)).copy_from(&a);
    let svd = padded.svd(true, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let u = svd.u.as_ref().expect("requested");
    let smax = svd.singular_values.max();
    let tol = 1e-13 * smax.max(1.0);
    let mut alpha_p = DVector::zeros(r);
    let mut null = Vec::new();
    let mut padded_beta = DVector::zeros(size);
    padded_beta.rows_mut(0, m + 1).copy_from(&beta);
    for (k, s) in svd.singular_values.iter().enumerate() {
        let v = v_t.row(k).transpose();
        if *s > tol {
            let coef = u.column(k).dot(&padded_beta) / s;
            alpha_p += v * coef;
        } else {
            null.push(v);
        }
    }
    let residual = (&a * &alpha_p - &beta).amax();
    if residual > 1e-9 {
        return Err(Error::SlaterInfeasible {
            degree: r,
            margin: f64::NEG_INFINITY,
        });
    }

    let h = 1.0 / (grid_n - 1) as f64;
    let grid: Vec<f64> = (0..grid_n).map(|i| i as f64 * h).collect();
    let vander = |x: f64| -> Vec<f64> { (0..r as i32).map(|j| x.powi(j)).collect() };
    let dot_row = |row: &[f64], v: &DVector<f64>| -> f64 {
        row.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
    };

    let alpha = if null.is_empty() {
        alpha_p
    } else {
        let k = null.len();
        // variables (gamma, t): maximize t s.t. t - V N gamma <= V alpha_p
        let mut g = Vec::with_capacity(grid_n);
        let mut hv = Vec::with_capacity(grid_n);
        for &x in &grid {
            let row = vander(x);
            let mut gr: Vec<f64> = null.iter().map(|nv| -dot_row(&row, nv)).collect();
            gr.push(1.0);
            g.push(gr);
            hv.push(dot_row(&row, &alpha_p));
        }
        let mut c = vec![0.0; k];
        c.push(1.0);
        let (x, _) = maximize_inequality(&c, &g, &hv)?;
        let mut alpha = alpha_p;
        for (gamma, nv) in x.iter().zip(&null) {
            alpha += nv * *gamma;
        }
        alpha
    };

    let density = PolynomialDensity {
        coefficients: alpha.iter().copied().collect(),
        support: problem.support,
    };
    let values: Vec<f64> = grid.iter().map(|x| density.eval_normalized(*x)).collect();
    let margin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let grid_max = values
        .iter()
        .copied()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let d = (r - 1) as f64;
    let spread = h * d * d;
    let certified = margin > 0.0 && spread < 1.0 && margin > spread * grid_max / (1.0 - spread);
    if !certified {
        return Err(Error::SlaterInfeasible { degree: r, margin });
    }

    let rule = composite_rule(SupportInterval::unit(), ENTROPY_NODES, RuleKind::Simpson)?;
    let c = rule.integrate(|s| {
        let p = density.eval_normalized(s);
        if p > 0.0 {
            p * p.log2()
        } else {
            0.0
        }
    });
    let delta = problem
        .uncertainty
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(SlaterConstruction {
        density,
        c: c.max(0.0),
        delta,
        margin,
    })
}
