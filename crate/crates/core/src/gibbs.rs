//! Gibbs minimizers and the (smoothed) dual function.
//!
//! Entropies are measured in bits: the Gibbs density of
//! `min_mu { D(mu || nu) - <mu, c> }` is proportional to `2^{c(x)}`.
//! Exponentials are always evaluated after subtracting the node-wise
//! maximum exponent, so every term lies in `(0, 1]`.

use crate::error::{check_dim, invalid, Result};
use crate::integration::{log2_weighted_sum, QuadratureRule};
use crate::target::{MomentProblem, ReferenceMeasure, TargetSet};
use crate::vecops::{dot, norm, pairwise_sum};

/// Strictly positive smoothing pair `(eta1, eta2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub eta1: f64,
    pub eta2: f64,
}

impl SmoothingParams {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        if !(eta1 > 0.0 && eta1.is_finite()) || !(eta2 > 0.0 && eta2.is_finite()) {
            return Err(invalid(
                "eta",
                format!("smoothing parameters must be positive, got ({eta1}, {eta2})"),
            ));
        }
        Ok(Self { eta1, eta2 })
    }
}

/// A probability measure on a finite node set, stored as `log2(dmu/dnu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub nodes: Vec<f64>,
    /// Reference mass at each node (quadrature weight times reference density).
    pub weights: Vec<f64>,
    pub log2_density: Vec<f64>,
}

impl GridMeasure {
    /// The reference measure itself (density one).
    pub fn reference(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self {
            nodes,
            weights,
            log2_density: vec![0.0; n],
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.log2_density.iter().map(|l| l.exp2()).collect()
    }

    /// Mass carried by each node.
    pub fn probabilities(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.log2_density)
            .map(|(w, l)| w * l.exp2())
            .collect()
    }

    /// `<weights, 2^{log2_density}>`; one for a normalized measure.
    pub fn normalization(&self) -> f64 {
        pairwise_sum(&self.probabilities())
    }

    /// `D(mu || nu)` in bits.
    pub fn relative_entropy(&self) -> f64 {
        let terms: Vec<f64> = self
            .probabilities()
            .iter()
            .zip(&self.log2_density)
            .map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 })
            .collect();
        pairwise_sum(&terms)
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .probabilities()
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .collect();
        pairwise_sum(&terms)
    }
}

/// Value, gradient and maximizers of the smoothed dual at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub x_star: Vec<f64>,
    pub moments: Vec<f64>,
}

/// A discretized entropy problem
/// `min_mu { D(mu || nu) + <mu, cost> : A mu in T }`
/// over the probability measures carried by a fixed node set.
///
/// Continuous problems reach this through a quadrature rule, finite ones
/// through unit weights; both share one code path.
#[derive(Debug, Clone)]
pub struct GibbsModel {
    nodes: Vec<f64>,
    mass: Vec<f64>,
    cost: Option<Vec<f64>>,
    features: Vec<Vec<f64>>,
    target: TargetSet,
    norm_bound: f64,
}

impl GibbsModel {
    /// `features[i][j]` is the `i`-th constraint feature at node `j`;
    /// `norm_bound` must dominate `max_j ||features[.][j]||_1`.
    pub fn new(
        nodes: Vec<f64>,
        mass: Vec<f64>,
        features: Vec<Vec<f64>>,
        target: TargetSet,
        norm_bound: f64,
    ) -> Result<Self> {
        check_dim(nodes.len(), mass.len())?;
        if mass.is_empty() {
            return Err(invalid("nodes", "need at least one node"));
        }
        if mass.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(invalid(
                "mass",
                "reference mass must be positive at every node",
            ));
        }
        check_dim(target.dim(), features.len())?;
        for row in &features {
            check_dim(mass.len(), row.len())?;
        }
        Ok(Self {
            nodes,
            mass,
            cost: None,
            features,
            target,
            norm_bound,
        })
    }

    /// Model for a moment problem, integrated with `rule` when the reference
    /// measure is uniform (atoms are used directly when it is discrete).
    pub fn for_problem(problem: &MomentProblem, rule: &QuadratureRule) -> Result<Self> {
        let (nodes, mass) = match &problem.reference {
            ReferenceMeasure::Uniform => {
                let w = problem.support.width();
                (
                    rule.nodes().to_vec(),
                    rule.weights().iter().map(|x| x / w).collect(),
                )
            }
            ReferenceMeasure::Discrete { atoms, weights } => (atoms.clone(), weights.clone()),
        };
        let features = monomial_features(&nodes, problem.order());
        Self::new(
            nodes,
            mass,
            features,
            problem.target(),
            problem.operator_norm_bound(),
        )
    }

    /// Adds the linear objective term `<mu, cost>`.
    pub fn with_cost(mut self, cost: Vec<f64>) -> Result<Self> {
        check_dim(self.mass.len(), cost.len())?;
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(invalid("cost", "must be finite at every node"));
        }
        self.cost = Some(cost);
        Ok(self)
    }

    pub fn with_target(mut self, target: TargetSet) -> Result<Self> {
        check_dim(self.features.len(), target.dim())?;
        self.target = target;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.features.len()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn target(&self) -> &TargetSet {
        &self.target
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn cost(&self) -> Option<&[f64]> {
        self.cost.as_deref()
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// `L(eta) = 1/eta1 + ||A||^2 + eta2` with the conservative norm bound.
    pub fn lipschitz(&self, eta: SmoothingParams) -> f64 {
        1.0 / eta.eta1 + self.norm_bound * self.norm_bound + eta.eta2
    }

    /// `log2` of the unnormalized Gibbs density `2^{-cost - A* z}` at the nodes.
    fn exponent(&self, z: &[f64]) -> Vec<f64> {
        let mut g = match &self.cost {
            Some(c) => c.iter().map(|v| -v).collect(),
            None => vec![0.0; self.mass.len()],
        };
        for (zi, row) in z.iter().zip(&self.features) {
            if *zi != 0.0 {
                for (gj, f) in g.iter_mut().zip(row) {
                    *gj -= zi * f;
                }
            }
        }
        g
    }

    /// Gibbs minimizer `mu*_z` and `log2 int 2^{-cost - A* z} d nu`.
    pub fn gibbs(&self, z: &[f64]) -> Result<(GridMeasure, f64)> {
        check_dim(self.order(), z.len())?;
        let g = self.exponent(z);
        let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(crate::error::Error::DegenerateRule(format!(
                "non-finite exponent {top}"
            )));
        }
        // Shift before taking the log so the density keeps full relative
        // precision near the mode even when `top` is huge.
        let shifted: Vec<f64> = g.iter().map(|v| v - top).collect();
        let log_rest = log2_weighted_sum(&shifted, &self.mass)?;
        let measure = GridMeasure {
            nodes: self.nodes.clone(),
            weights: self.mass.clone(),
            log2_density: shifted.iter().map(|v| v - log_rest).collect(),
        };
        Ok((measure, top + log_rest))
    }

    /// `A mu` for a measure on this model's nodes.
    pub fn moments_of(&self, measure: &GridMeasure) -> Vec<f64> {
        let p = measure.probabilities();
        self.features
            .iter()
            .map(|row| {
                let t: Vec<f64> = p.iter().zip(row).map(|(a, b)| a * b).collect();
                pairwise_sum(&t)
            })
            .collect()
    }

    /// `A mu*_z` and the log-partition value.
    pub fn gibbs_moments(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_dim(self.order(), z.len())?;
        let g = self.exponent(z);
        let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(crate::error::Error::DegenerateRule(format!(
                "non-finite exponent {top}"
            )));
        }
        let mut terms: Vec<f64> = g
            .iter()
            .zip(&self.mass)
            .map(|(gi, w)| w * (gi - top).exp2())
            .collect();
        let total = pairwise_sum(&terms);
        terms.iter_mut().for_each(|t| *t /= total);
        let mut scratch = vec![0.0; terms.len()];
        let moments = self
            .features
            .iter()
            .map(|row| {
                for ((s, p), f) in scratch.iter_mut().zip(&terms).zip(row) {
                    *s = p * f;
                }
                pairwise_sum(&scratch)
            })
            .collect();
        Ok((moments, top + total.log2()))
    }

    /// Non-smooth dual `F(z) = -sigma_T(z) - log2 int 2^{-cost - A* z} d nu`.
    pub fn dual_value(&self, z: &[f64]) -> Result<f64> {
        let g = self.exponent(z);
        check_dim(self.order(), z.len())?;
        Ok(-self.target.support_function(z)? - log2_weighted_sum(&g, &self.mass)?)
    }

    /// Smoothed dual `F_eta(z)` with its gradient.
    pub fn smoothed(&self, z: &[f64], eta: SmoothingParams) -> Result<DualEvaluation> {
        let (moments, log_z) = self.gibbs_moments(z)?;
        let scaled: Vec<f64> = z.iter().map(|v| v / eta.eta1).collect();
        let x_star = self.target.project(&scaled)?;
        let smoothed_support = dot(&x_star, z) - 0.5 * eta.eta1 * dot(&x_star, &x_star);
        let zn = norm(z);
        let value = -smoothed_support - log_z - 0.5 * eta.eta2 * zn * zn;
        let gradient = x_star
            .iter()
            .zip(&moments)
            .zip(z)
            .map(|((x, m), zi)| -x + m - eta.eta2 * zi)
            .collect();
        Ok(DualEvaluation {
            value,
            gradient,
            x_star,
            moments,
        })
    }

    /// Primal objective `D(mu || nu) + <mu, cost>`.
    pub fn primal_value(&self, measure: &GridMeasure) -> f64 {
        let d = measure.relative_entropy();
        match &self.cost {
            Some(c) => d + measure.expectation(c),
            None => d,
        }
    }
}

/// Rows `x^1, ..., x^order` evaluated at `nodes`.
pub fn monomial_features(nodes: &[f64], order: usize) -> Vec<Vec<f64>> {
    (1..=order as i32)
        .map(|i| nodes.iter().map(|x| x.powi(i)).collect())
        .collect()
}

/// Gibbs distribution of `c` against the problem's reference measure.
///
/// Returns `mu*` with `dmu*/dnu = 2^{c} / int 2^{c} dnu` together with the
/// optimal value `-log2 int 2^{c} dnu` of `min_mu { D(mu||nu) - <mu, c> }`.
pub fn gibbs_measure(
    c_at_nodes: &[f64],
    problem: &MomentProblem,
    rule: &QuadratureRule,
) -> Result<(GridMeasure, f64)> {
    let neg: Vec<f64> = c_at_nodes.iter().map(|v| -v).collect();
    let model = GibbsModel::for_problem(problem, rule)?.with_cost(neg)?;
    let (m, log_z) = model.gibbs(&vec![0.0; problem.order()])?;
    Ok((m, -log_z))
}

pub fn dual_value(
    z: &[f64],
    problem: &MomentProblem,
    target: &TargetSet,
    rule: &QuadratureRule,
) -> Result<f64> {
    GibbsModel::for_problem(problem, rule)?
        .with_target(target.clone())?
        .dual_value(z)
}

pub fn smoothed_dual(
    z: &[f64],
    eta: SmoothingParams,
    problem: &MomentProblem,
    target: &TargetSet,
    rule: &QuadratureRule,
) -> Result<DualEvaluation> {
    GibbsModel::for_problem(problem, rule)?
        .with_target(target.clone())?
        .smoothed(z, eta)
}

/// `A mu*_z`, the moments of the Gibbs minimizer.
pub fn moments_of_gibbs(
    z: &[f64],
    problem: &MomentProblem,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    Ok(GibbsModel::for_problem(problem, rule)?.gibbs_moments(z)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integration::{composite_rule, default_rule, RuleKind};
    use crate::target::SupportInterval;

    fn unit_problem(m: usize) -> MomentProblem {
        MomentProblem::with_uniform_radius(
            SupportInterval::unit(),
            (1..=m).map(|i| 1.0 / (i as f64 + 1.0)).collect(),
            0.05,
            ReferenceMeasure::Uniform,
        )
        .unwrap()
    }

    #[test]
    fn gibbs_of_constants() {
        let p = unit_problem(2);
        let rule = default_rule(p.support);
        let (m0, v0) = gibbs_measure(&vec![0.0; rule.len()], &p, &rule).unwrap();
        assert!(v0.abs() < 1e-12);
        assert!(m0.log2_density.iter().all(|l| l.abs() < 1e-12));
        let (m5, v5) = gibbs_measure(&vec![5.0; rule.len()], &p, &rule).unwrap();
        assert!((v5 + 5.0).abs() < 1e-12);
        for (a, b) in m0.log2_density.iter().zip(&m5.log2_density) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_minimizes_against_grid_oracle() {
        // 64-point discretization of K = [0,1]; minimize D(mu||nu) - <mu,c>
        // with c(x) = -x by exponentiated gradient on the simplex.
        let p = unit_problem(1);
        let rule = composite_rule(p.support, 64, RuleKind::Midpoint).unwrap();
        let c: Vec<f64> = rule.nodes().iter().map(|x| -x).collect();
        let (_, value) = gibbs_measure(&c, &p, &rule).unwrap();

        let nu = 1.0 / 64.0;
        let mut q = vec![nu; 64];
        let objective = |q: &[f64]| -> f64 {
            q.iter()
                .zip(&c)
                .map(|(qi, ci)| qi * (qi / nu).log2() - qi * ci)
                .sum()
        };
        for _ in 0..5000 {
            let grad: Vec<f64> = q
                .iter()
                .zip(&c)
                .map(|(qi, ci)| (qi / nu).log2() + 1.0 / std::f64::consts::LN_2 - ci)
                .collect();
            for (qi, g) in q.iter_mut().zip(&grad) {
                *qi *= (-0.5 * g).exp();
            }
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|qi| *qi /= s);
        }
        assert!(
            (objective(&q) - value).abs() < 1e-5,
            "{} vs {}",
            objective(&q),
            value
        );
    }

    #[test]
    fn dual_at_origin_is_zero() {
        let p = unit_problem(3);
        let rule = default_rule(p.support);
        assert!(dual_value(&[0.0; 3], &p, &p.target(), &rule).unwrap().abs() < 1e-12);
    }

    #[test]
    fn uniform_moments_at_origin() {
        let p = unit_problem(4);
        let rule = default_rule(p.support);
        let m = moments_of_gibbs(&[0.0; 4], &p, &rule).unwrap();
        for (i, mi) in m.iter().enumerate() {
            assert!((mi - 1.0 / (i as f64 + 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn large_exponent_pushes_mass_to_zero() {
        let p = unit_problem(3);
        let m = moments_of_gibbs(&[1000.0, 0.0, 0.0], &p, &default_rule(p.support)).unwrap();
        // exact first moment of density prop. to 2^{-1000 x} on [0,1] is ~1/(1000 ln 2)
        assert!(m[0] <= 0.01 && m[0] > 0.0, "{m:?}");
        let fine = composite_rule(p.support, 4097, RuleKind::Simpson).unwrap();
        let mf = moments_of_gibbs(&[1000.0, 0.0, 0.0], &p, &fine).unwrap();
        assert!((m[0] - mf[0]).abs() < 1e-4);
    }

    #[test]
    fn smoothed_at_origin_uses_projection_of_origin() {
        let t = TargetSet::new_box(vec![0.5, 0.3], vec![0.1, 0.1]).unwrap();
        let p = unit_problem(2);
        let rule = default_rule(p.support);
        let eta = SmoothingParams::new(0.2, 0.1).unwrap();
        let e = smoothed_dual(&[0.0, 0.0], eta, &p, &t, &rule).unwrap();
        assert!((e.x_star[0] - 0.4).abs() < 1e-15 && (e.x_star[1] - 0.2).abs() < 1e-15);
        assert!((e.value - 0.5 * 0.2 * (0.16 + 0.04)).abs() < 1e-12);
        // origin inside T
        let t0 = TargetSet::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let e0 = smoothed_dual(&[0.0, 0.0], eta, &p, &t0, &rule).unwrap();
        assert!(e0.value.abs() < 1e-12);
    }

    #[test]
    fn smoothing_parameters_must_be_positive() {
        assert!(SmoothingParams::new(0.0, 1.0).is_err());
        assert!(SmoothingParams::new(1.0, -1.0).is_err());
        assert!(SmoothingParams::new(f64::NAN, 1.0).is_err());
    }
}
