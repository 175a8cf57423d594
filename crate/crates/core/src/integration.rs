//! Quadrature and quasi-Monte-Carlo rules on the support interval, plus
//! log-domain accumulation of base-2 exponentials.

use crate::error::{check_dim, invalid, Error, Result};
use crate::target::SupportInterval;
use crate::vecops::pairwise_sum;

/// Node count of the default composite Simpson rule.
pub const DEFAULT_SIMPSON_NODES: usize = 2049;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Midpoint,
    Simpson,
}

/// Nodes and positive weights approximating Lebesgue integrals over `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_dim(nodes.len(), weights.len())?;
        if nodes.is_empty() {
            return Err(Error::DegenerateRule("empty rule".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::DegenerateRule("weights must be positive".into()));
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .collect();
        pairwise_sum(&terms)
    }
}

/// Composite midpoint or Simpson rule with (about) `n` nodes.
///
/// Simpson needs an odd node count; even `n` is rounded up.
pub fn composite_rule(
    support: SupportInterval,
    n: usize,
    kind: RuleKind,
) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(invalid("n", format!("need at least 2 nodes, got {n}")));
    }
    let (a, b) = (support.lower(), support.upper());
    match kind {
        RuleKind::Midpoint => {
            let h = (b - a) / n as f64;
            let nodes = (0..n).map(|i| a + (i as f64 + 0.5) * h).collect();
            QuadratureRule::new(nodes, vec![h; n])
        }
        RuleKind::Simpson => {
            let n = if n.is_multiple_of(2) { n + 1 } else { n };
            let h = (b - a) / (n - 1) as f64;
            let nodes = (0..n)
                .map(|i| if i == n - 1 { b } else { a + i as f64 * h })
                .collect();
            let weights = (0..n)
                .map(|i| {
                    let c = if i == 0 || i == n - 1 {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    c * h / 3.0
                })
                .collect();
            QuadratureRule::new(nodes, weights)
        }
    }
}

/// The default integration rule for the estimation core.
pub fn default_rule(support: SupportInterval) -> QuadratureRule {
    composite_rule(support, DEFAULT_SIMPSON_NODES, RuleKind::Simpson)
        .expect("default rule parameters are valid")
}

fn is_prime(n: u64) -> bool {
    n >= 2
        && (2..)
            .take_while(|d| d * d <= n)
            .all(|d| !n.is_multiple_of(d))
}

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    r
}

/// Van der Corput sequence in `base`, starting at index 1.
#[derive(Debug, Clone)]
pub struct LowDiscrepancySequence {
    base: u64,
    index: u64,
}

impl LowDiscrepancySequence {
    pub fn new(base: u64) -> Result<Self> {
        if !is_prime(base) {
            return Err(invalid("base", format!("{base} is not prime")));
        }
        Ok(Self { base, index: 0 })
    }
}

impl Iterator for LowDiscrepancySequence {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        self.index += 1;
        Some(radical_inverse(self.index, self.base))
    }
}

/// First `n` van der Corput points in `base`.
pub fn vdc_sequence(n: usize, base: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("n", "need at least one point"));
    }
    Ok(LowDiscrepancySequence::new(base)?.take(n).collect())
}

/// Equal-weight QMC rule on the support built from a van der Corput sequence.
pub fn qmc_rule(support: SupportInterval, n: usize, base: u64) -> Result<QuadratureRule> {
    let pts = vdc_sequence(n, base)?;
    let w = support.width() / n as f64;
    QuadratureRule::new(
        pts.iter()
            .map(|u| support.lower() + support.width() * u)
            .collect(),
        vec![w; n],
    )
}

/// `log2(sum_j w_j 2^{g_j})`, shifting by `max g_j` so that no term exceeds one.
pub fn log2_integral(log2_integrand: &[f64], rule: &QuadratureRule) -> Result<f64> {
    log2_weighted_sum(log2_integrand, rule.weights())
}

pub(crate) fn log2_weighted_sum(g: &[f64], weights: &[f64]) -> Result<f64> {
    check_dim(weights.len(), g.len())?;
    if g.is_empty() {
        return Err(Error::DegenerateRule("empty rule".into()));
    }
    let m = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::DegenerateRule(format!("non-finite exponent {m}")));
    }
    let terms: Vec<f64> = g
        .iter()
        .zip(weights)
        .map(|(gi, w)| w * (gi - m).exp2())
        .collect();
    Ok(m + pairwise_sum(&terms).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_two_nodes() {
        let r = composite_rule(SupportInterval::unit(), 2, RuleKind::Midpoint).unwrap();
        assert_eq!(r.nodes(), &[0.25, 0.75]);
        assert_eq!(r.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn constants_integrate_exactly() {
        for kind in [RuleKind::Midpoint, RuleKind::Simpson] {
            for n in [2, 3, 10, 257] {
                let r = composite_rule(SupportInterval::unit(), n, kind).unwrap();
                assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let r = composite_rule(SupportInterval::unit(), 3, RuleKind::Simpson).unwrap();
        assert!((r.integrate(|x| x * x) - 1.0 / 3.0).abs() < 1e-15);
        let s = SupportInterval::new(-1.0, 2.0).unwrap();
        let r = composite_rule(s, 9, RuleKind::Simpson).unwrap();
        let exact = (16.0 - 1.0) / 4.0 - (8.0 + 1.0) / 3.0 + 3.0;
        assert!((r.integrate(|x| x.powi(3) - x * x + 1.0) - exact).abs() < 1e-12);
        assert!((r.total_weight() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_nodes() {
        assert!(composite_rule(SupportInterval::unit(), 1, RuleKind::Simpson).is_err());
    }

    #[test]
    fn van_der_corput_values() {
        assert_eq!(vdc_sequence(3, 2).unwrap(), vec![0.5, 0.25, 0.75]);
        assert!((vdc_sequence(1, 3).unwrap()[0] - 1.0 / 3.0).abs() < 1e-16);
        assert!(vdc_sequence(4, 4).is_err());
        assert!(vdc_sequence(4, 1).is_err());
    }

    #[test]
    fn qmc_estimate_of_linear_integral() {
        let r = qmc_rule(SupportInterval::unit(), 4096, 2).unwrap();
        assert!((r.integrate(|x| x) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn discrepancy_decreases() {
        // star discrepancy of a 1-D point set, exact formula for sorted points
        let star = |n: usize| {
            let mut p = vdc_sequence(n, 2).unwrap();
            p.sort_by(f64::total_cmp);
            let nf = n as f64;
            p.iter()
                .enumerate()
                .map(|(i, x)| ((i as f64 + 1.0) / nf - x).max(x - i as f64 / nf))
                .fold(0.0, f64::max)
        };
        let d: Vec<f64> = [16, 256, 4096].iter().map(|n| star(*n)).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        assert!(vdc_sequence(4096, 2)
            .unwrap()
            .iter()
            .all(|x| (0.0..1.0).contains(x)));
    }

    #[test]
    fn log2_integral_cases() {
        let r = QuadratureRule::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(log2_integral(&[0.0, 0.0], &r).unwrap(), 0.0);
        assert_eq!(log2_integral(&[1000.0, 1000.0], &r).unwrap(), 1000.0);
        assert!(log2_integral(
            &[],
            &QuadratureRule {
                nodes: vec![],
                weights: vec![]
            }
        )
        .is_err());
    }
}
