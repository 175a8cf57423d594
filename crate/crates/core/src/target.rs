//! Problem data: the support interval, the moment problem, and the target
//! set `T` of admissible moment vectors with its support function,
//! Euclidean projection and distance.

use crate::error::{check_dim, invalid, Error, Result};
use crate::vecops::{dist, dot, norm};

/// Compact support interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    lower: f64,
    upper: f64,
}

impl SupportInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(invalid("support", "bounds must be finite"));
        }
        if lower >= upper {
            return Err(invalid(
                "support",
                format!("lower ({lower}) must be below upper ({upper})"),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit() -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `B = max{|x| : x in K}`.
    pub fn bound(&self) -> f64 {
        self.lower.abs().max(self.upper.abs())
    }
}

/// Reference measure `nu` of the relative entropy.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceMeasure {
    /// Normalized Lebesgue measure on the support interval.
    Uniform,
    /// Atomic measure with strictly positive weights summing to one.
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
}

impl ReferenceMeasure {
    pub fn discrete(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_dim(atoms.len(), weights.len())?;
        if atoms.is_empty() {
            return Err(invalid("reference", "needs at least one atom"));
        }
        validate_probability(&weights)?;
        Ok(Self::Discrete { atoms, weights })
    }
}

pub(crate) fn validate_probability(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(invalid(
            "reference",
            format!("weights must be strictly positive (full support), found {w}"),
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(invalid(
            "reference",
            format!("weights must sum to 1, sum is {total}"),
        ));
    }
    Ok(())
}

/// Noisy moment problem: `y_i = <mu, x^i> + u_i` with `u_i in [-r_i, r_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentProblem {
    pub support: SupportInterval,
    pub observed: Vec<f64>,
    pub uncertainty: Vec<f64>,
    pub reference: ReferenceMeasure,
}

impl MomentProblem {
    pub fn new(
        support: SupportInterval,
        observed: Vec<f64>,
        uncertainty: Vec<f64>,
        reference: ReferenceMeasure,
    ) -> Result<Self> {
        if observed.is_empty() {
            return Err(invalid("order", "at least one moment is required"));
        }
        check_dim(observed.len(), uncertainty.len())?;
        if uncertainty.iter().any(|u| !(*u >= 0.0)) {
            return Err(invalid("uncertainty", "radii must be nonnegative"));
        }
        if observed.iter().any(|y| !y.is_finite()) {
            return Err(invalid("observed", "moments must be finite"));
        }
        if let ReferenceMeasure::Discrete { atoms, .. } = &reference {
            if atoms
                .iter()
                .any(|a| *a < support.lower() || *a > support.upper())
            {
                return Err(invalid("reference", "atoms must lie in the support"));
            }
        }
        Ok(Self {
            support,
            observed,
            uncertainty,
            reference,
        })
    }

    /// Same radius on every coordinate.
    pub fn with_uniform_radius(
        support: SupportInterval,
        observed: Vec<f64>,
        radius: f64,
        reference: ReferenceMeasure,
    ) -> Result<Self> {
        let m = observed.len();
        Self::new(support, observed, vec![radius; m], reference)
    }

    pub fn order(&self) -> usize {
        self.observed.len()
    }

    /// The box `T = prod_i [y_i - r_i, y_i + r_i]`.
    pub fn target(&self) -> TargetSet {
        TargetSet::Box {
            center: self.observed.clone(),
            radius: self.uncertainty.clone(),
        }
    }

    pub fn operator_norm_bound(&self) -> f64 {
        operator_norm_bound(self)
    }
}

/// Bound `||A|| <= sum_{i=1..M} B^i` on the moment operator norm.
pub fn operator_norm_bound(problem: &MomentProblem) -> f64 {
    monomial_norm_bound(problem.support.bound(), problem.order())
}

pub(crate) fn monomial_norm_bound(bound: f64, order: usize) -> f64 {
    (1..=order as i32).map(|i| bound.powi(i)).sum()
}

/// Convex compact set of admissible moment vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    Box {
        center: Vec<f64>,
        radius: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{x in R^2 : x1 >= ell1, x2 <= ell2, x1^2 <= x2}`.
    BoxParabola {
        ell1: f64,
        ell2: f64,
    },
}

/// Dykstra stops once successive iterates move less than this.
pub const DYKSTRA_TOLERANCE: f64 = 1e-12;
pub const DYKSTRA_MAX_ROUNDS: usize = 10_000;

impl TargetSet {
    pub fn new_box(center: Vec<f64>, radius: Vec<f64>) -> Result<Self> {
        check_dim(center.len(), radius.len())?;
        if radius.iter().any(|r| !(*r >= 0.0)) {
            return Err(invalid("radius", "box radii must be nonnegative"));
        }
        Ok(Self::Box { center, radius })
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(invalid("radius", "ball radius must be nonnegative"));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn new_box_parabola(ell1: f64, ell2: f64) -> Result<Self> {
        if !(ell1 * ell1 < ell2) {
            return Err(invalid(
                "ell",
                format!("need ell1^2 < ell2 for a nonempty interior, got ell1={ell1}, ell2={ell2}"),
            ));
        }
        Ok(Self::BoxParabola { ell1, ell2 })
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSet::Box { center, .. } | TargetSet::Ball { center, .. } => center.len(),
            TargetSet::BoxParabola { .. } => 2,
        }
    }

    /// `sigma_T(z) = max_{x in T} <x, z>`.
    pub fn support_function(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        Ok(match self {
            TargetSet::Box { center, radius } => center
                .iter()
                .zip(radius)
                .zip(z)
                .map(|((c, r), zi)| c * zi + r * zi.abs())
                .sum(),
            TargetSet::Ball { center, radius } => dot(center, z) + radius * norm(z),
            TargetSet::BoxParabola { ell1, ell2 } => {
                let (lo, hi) = parabola_x1_range(*ell1, *ell2);
                let (z1, z2) = (z[0], z[1]);
                if z2 >= 0.0 {
                    // top face x2 = ell2
                    z2 * ell2 + (z1 * lo).max(z1 * hi)
                } else {
                    // parabola arc x2 = x1^2, concave in x1
                    let x1 = (-z1 / (2.0 * z2)).clamp(lo, hi);
                    z1 * x1 + z2 * x1 * x1
                }
            }
        })
    }

    /// Euclidean projection onto `T`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), y.len())?;
        match self {
            TargetSet::Box { center, radius } => Ok(y
                .iter()
                .zip(center)
                .zip(radius)
                .map(|((yi, c), r)| yi.clamp(c - r, c + r))
                .collect()),
            TargetSet::Ball { center, radius } => {
                let d = dist(y, center);
                if d <= *radius {
                    Ok(y.to_vec())
                } else {
                    let s = radius / d;
                    Ok(center
                        .iter()
                        .zip(y)
                        .map(|(c, yi)| c + s * (yi - c))
                        .collect())
                }
            }
            TargetSet::BoxParabola { ell1, ell2 } => {
                Ok(project_box_parabola(*ell1, *ell2, [y[0], y[1]]).to_vec())
            }
        }
    }

    /// `d(x, T) = min_{y in T} ||x - y||_2`.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        let p = self.project(x)?;
        Ok(dist(x, &p))
    }

    /// `max_{x in T} ||x||_2`; attained at an extreme point.
    pub fn max_norm(&self) -> f64 {
        match self {
            TargetSet::Box { center, radius } => center
                .iter()
                .zip(radius)
                .map(|(c, r)| {
                    let m = (c - r).abs().max((c + r).abs());
                    m * m
                })
                .sum::<f64>()
                .sqrt(),
            TargetSet::Ball { center, radius } => norm(center) + radius,
            TargetSet::BoxParabola { ell1, ell2 } => {
                let (lo, hi) = parabola_x1_range(*ell1, *ell2);
                [(lo, *ell2), (hi, *ell2), (lo, lo * lo), (hi, hi * hi)]
                    .iter()
                    .map(|(a, b)| (a * a + b * b).sqrt())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Whether `x` lies in `T` up to `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.distance(x).map(|d| d <= tol).unwrap_or(false)
    }
}

fn parabola_x1_range(ell1: f64, ell2: f64) -> (f64, f64) {
    let r = ell2.sqrt();
    (ell1.max(-r), r)
}

/// Closest point of the epigraph `{x2 >= x1^2}` to `y`.
pub(crate) fn project_parabola_epigraph(y: [f64; 2]) -> [f64; 2] {
    if y[1] >= y[0] * y[0] {
        return y;
    }
    // Stationarity of (t - y1)^2 + (t^2 - y2)^2: 2t^3 + (1 - 2 y2) t - y1 = 0.
    let roots = real_cubic_roots(2.0, 0.0, 1.0 - 2.0 * y[1], -y[0]);
    let mut best = [y[0], y[0] * y[0]];
    let mut best_d = f64::INFINITY;
    for mut t in roots {
        for _ in 0..3 {
            let f = 2.0 * t * t * t + (1.0 - 2.0 * y[1]) * t - y[0];
            let df = 6.0 * t * t + 1.0 - 2.0 * y[1];
            if df.abs() > 1e-300 {
                t -= f / df;
            }
        }
        let d = (t - y[0]).powi(2) + (t * t - y[1]).powi(2);
        if d < best_d {
            best_d = d;
            best = [t, t * t];
        }
    }
    best
}

/// Real roots of `a t^3 + b t^2 + c t + d` with `a != 0`.
fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    // depressed cubic t = s - b/3
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        let s = (-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt();
        vec![s + shift]
    } else if p == 0.0 {
        vec![shift]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect()
    }
}

/// Closest point of `{x1 >= ell1, x2 <= ell2, x1^2 <= x2}` to `y`. An
/// outside point projects onto the boundary, which consists of the left
/// segment, the top segment and an arc of the parabola; the nearest of the
/// three piecewise projections wins.
pub fn project_box_parabola(ell1: f64, ell2: f64, y: [f64; 2]) -> [f64; 2] {
    if y[0] >= ell1 && y[1] <= ell2 && y[0] * y[0] <= y[1] {
        return y;
    }
    let (lo, hi) = parabola_x1_range(ell1, ell2);
    let mut candidates = vec![[lo, ell2], [hi, ell2], [lo, lo * lo]];
    if ell1 > -ell2.sqrt() {
        candidates.push([ell1, y[1].clamp(ell1 * ell1, ell2)]);
    }
    candidates.push([y[0].clamp(lo, hi), ell2]);
    // (t - y1)^2 + (t^2 - y2)^2 is stationary where 2t^3 + (1 - 2 y2) t = y1
    for t in real_cubic_roots(2.0, 0.0, 1.0 - 2.0 * y[1], -y[0]) {
        let t = t.clamp(lo, hi);
        candidates.push([t, t * t]);
    }
    let d2 = |p: &[f64; 2]| (p[0] - y[0]).powi(2) + (p[1] - y[1]).powi(2);
    candidates
        .into_iter()
        .min_by(|a, b| d2(a).total_cmp(&d2(b)))
        .expect("nonempty")
}

/// Dykstra's alternating projections onto `{x1 >= ell1}`, `{x2 <= ell2}`
/// and the parabola epigraph. Converges slowly where the parabola meets
/// the line `x1 = ell1` at a shallow angle.
pub fn dykstra_box_parabola(ell1: f64, ell2: f64, y: [f64; 2]) -> Result<[f64; 2]> {
    let inside = |x: [f64; 2]| x[0] >= ell1 && x[1] <= ell2 && x[0] * x[0] <= x[1];
    if inside(y) {
        return Ok(y);
    }
    let proj = |k: usize, x: [f64; 2]| -> [f64; 2] {
        match k {
            0 => [x[0].max(ell1), x[1]],
            1 => [x[0], x[1].min(ell2)],
            _ => project_parabola_epigraph(x),
        }
    };
    let mut x = y;
    let mut corr = [[0.0f64; 2]; 3];
    let mut change = f64::INFINITY;
    for _ in 0..DYKSTRA_MAX_ROUNDS {
        let start = x;
        for (k, c) in corr.iter_mut().enumerate() {
            let v = [x[0] + c[0], x[1] + c[1]];
            let p = proj(k, v);
            *c = [v[0] - p[0], v[1] - p[1]];
            x = p;
        }
        change = ((x[0] - start[0]).powi(2) + (x[1] - start[1]).powi(2)).sqrt();
        if change < DYKSTRA_TOLERANCE {
            return Ok(x);
        }
    }
    Err(Error::ProjectionDiverged {
        rounds: DYKSTRA_MAX_ROUNDS,
        change,
    })
}
