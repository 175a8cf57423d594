//! Entropy estimation on a finite state space, where every integral is an
//! exact weighted sum.

use crate::error::{check_dim, invalid, Error, Result};
use crate::fast_gradient::{
    run_algorithm1, Certificate, SlaterData, SolverConfig, SolverOutcome, Stopping,
};
use nalgebra::{DMatrix, DVector};

use crate::gibbs::{monomial_features, GibbsModel};
use crate::lp::maximize_inequality;
use crate::target::{validate_probability, TargetSet};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    pub states: Vec<f64>,
    pub reference: Vec<f64>,
    /// Row `i` holds feature `i` at every state.
    pub features: Vec<Vec<f64>>,
    pub target: TargetSet,
}

impl DiscreteProblem {
    pub fn new(
        states: Vec<f64>,
        reference: Vec<f64>,
        features: Vec<Vec<f64>>,
        target: TargetSet,
    ) -> Result<Self> {
        check_dim(states.len(), reference.len())?;
        if reference.iter().any(|w| *w <= 0.0) {
            return Err(Error::Irregular(
                "reference measure must have full support".into(),
            ));
        }
        validate_probability(&reference)?;
        check_dim(target.dim(), features.len())?;
        for row in &features {
            check_dim(states.len(), row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid("features", "must be finite"));
            }
        }
        Ok(Self {
            states,
            reference,
            features,
            target,
        })
    }

    /// Features `s^1, ..., s^order` of the states.
    pub fn monomial(states: Vec<f64>, reference: Vec<f64>, target: TargetSet) -> Result<Self> {
        let features = monomial_features(&states, target.dim());
        Self::new(states, reference, features, target)
    }

    pub fn uniform(states: Vec<f64>, features: Vec<Vec<f64>>, target: TargetSet) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(invalid("states", "need at least one state"));
        }
        Self::new(states, vec![1.0 / n as f64; n], features, target)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `max_i log2(1 / nu_i)`, an upper bound on `D(mu || nu)` over the simplex.
    pub fn entropy_bound(&self) -> f64 {
        self.reference.iter().map(|w| -w.log2()).fold(0.0, f64::max)
    }

    /// `max_j ||f(s_j)||_1`, which dominates the operator norm of the
    /// moment map on probability vectors.
    pub fn norm_bound(&self) -> f64 {
        (0..self.len())
            .map(|j| self.features.iter().map(|row| row[j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn model(&self) -> Result<GibbsModel> {
        GibbsModel::new(
            self.states.clone(),
            self.reference.clone(),
            self.features.clone(),
            self.target.clone(),
            self.norm_bound(),
        )
    }

    pub fn moments(&self, weights: &[f64]) -> Vec<f64> {
        self.features
            .iter()
            .map(|row| row.iter().zip(weights).map(|(f, w)| f * w).sum())
            .collect()
    }

    /// Largest `delta` such that some simplex point has the `delta`-ball
    /// around its moments inside `T`, together with that point.
    ///
    /// Balls are handled through their inscribed box, which can only
    /// underestimate the margin.
    pub fn slater_margin(&self) -> Result<(f64, Vec<f64>)> {
        let (center, radius) = match &self.target {
            TargetSet::Box { center, radius } => (center.clone(), radius.clone()),
            TargetSet::Ball { center, radius } => {
                let r = radius / (center.len() as f64).sqrt();
                (center.clone(), vec![r; center.len()])
            }
            TargetSet::BoxParabola { .. } => {
                return Err(invalid(
                    "delta",
                    "automatic margin needs a box or ball target",
                ))
            }
        };
        let n = self.len();
        let mut g = Vec::new();
        let mut h = Vec::new();
        let mut row = |coeffs: Vec<f64>, s: f64, rhs: f64| {
            let mut r = coeffs;
            r.push(s);
            g.push(r);
            h.push(rhs);
        };
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = -1.0;
            row(e, 0.0, 0.0);
        }
        row(vec![1.0; n], 0.0, 1.0);
        row(vec![-1.0; n], 0.0, -1.0);
        for (i, f) in self.features.iter().enumerate() {
            row(f.clone(), 1.0, center[i] + radius[i]);
            row(f.iter().map(|v| -v).collect(), 1.0, radius[i] - center[i]);
        }
        let mut c = vec![0.0; n];
        c.push(1.0);
        let (x, value) = maximize_inequality(&c, &g, &h)?;
        let mut mu: Vec<f64> = x[..n].iter().map(|v| v.max(0.0)).collect();
        let s: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|v| *v /= s);
        Ok((value, mu))
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub weights: Vec<f64>,
    pub certificate: Option<Certificate>,
    pub outcome: SolverOutcome,
}

/// `(1/delta) max_i log2(1/nu_i)`, a bound on the norm of the optimal dual
/// multiplier.
pub fn discrete_dual_bound(problem: &DiscreteProblem, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    Ok(problem.entropy_bound() / delta)
}

/// Slater constants `C = max_i log2(1/nu_i)` (or `c_override`) and the
/// automatic margin.
pub fn discrete_slater(problem: &DiscreteProblem, c_override: Option<f64>) -> Result<SlaterData> {
    let (delta, _) = problem.slater_margin()?;
    if !(delta > 0.0) {
        return Err(Error::Irregular(format!(
            "no strictly feasible point (margin {delta:e})"
        )));
    }
    let c = c_override.unwrap_or_else(|| problem.entropy_bound());
    SlaterData::new(c, delta)
}

/// Certified solve with the a-priori iteration count.
pub fn solve_discrete(
    problem: &DiscreteProblem,
    epsilon: f64,
    c_override: Option<f64>,
) -> Result<DiscreteSolution> {
    let config = SolverConfig::new(epsilon, Stopping::APriori)?;
    let slater = discrete_slater(problem, c_override)?;
    solve_discrete_with(problem, Some(&slater), &config)
}

pub fn solve_discrete_with(
    problem: &DiscreteProblem,
    slater: Option<&SlaterData>,
    config: &SolverConfig,
) -> Result<DiscreteSolution> {
    let model = problem.model()?;
    let outcome = run_algorithm1(&model, slater, config)?;
    Ok(DiscreteSolution {
        weights: outcome.measure.probabilities(),
        certificate: outcome.certificate.clone(),
        outcome,
    })
}

/// Exact minimizer of `D(p || nu)` over a box target, with its dual vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSetSolution {
    pub weights: Vec<f64>,
    pub z: Vec<f64>,
    /// `-1`, `0` or `+1` per coordinate: lower face, interior, upper face.
    pub pattern: Vec<i8>,
    pub moments: Vec<f64>,
}

/// Solves the box-constrained problem without smoothing by searching over
/// active faces. For a sign pattern `s` the active moments are pinned to
/// `c_i + s_i r_i` and the remaining multipliers vanish; the equality
/// problem is solved by damped Newton steps on its concave dual. The first
/// pattern satisfying the sign and interior conditions is optimal. Patterns
/// are tried in order of Hamming distance from `warm`.
pub fn active_set_solve(
    problem: &DiscreteProblem,
    warm: Option<&ActiveSetSolution>,
    tol: f64,
) -> Result<ActiveSetSolution> {
    let TargetSet::Box { center, radius } = &problem.target else {
        return Err(invalid("target", "active-set solve needs a box target"));
    };
    let m = problem.features.len();
    if m > 8 {
        return Err(invalid(
            "target",
            format!("active-set solve supports up to 8 moments, got {m}"),
        ));
    }
    let start: Vec<i8> = warm.map_or(vec![0; m], |w| w.pattern.clone());
    let z_start: Vec<f64> = warm.map_or(vec![0.0; m], |w| w.z.clone());
    check_dim(m, start.len())?;
    let mut patterns: Vec<Vec<i8>> = (0..3usize.pow(m as u32))
        .map(|mut code| {
            (0..m)
                .map(|_| {
                    let s = (code % 3) as i8 - 1;
                    code /= 3;
                    s
                })
                .collect()
        })
        .collect();
    patterns.sort_by_key(|p: &Vec<i8>| p.iter().zip(&start).filter(|(a, b)| a != b).count());
    for pattern in patterns {
        let active: Vec<usize> = (0..m).filter(|&i| pattern[i] != 0).collect();
        let goal: Vec<f64> = active
            .iter()
            .map(|&i| center[i] + pattern[i] as f64 * radius[i])
            .collect();
        let z0: Vec<f64> = active
            .iter()
            .map(|&i| {
                if z_start[i] * pattern[i] as f64 > 0.0 {
                    z_start[i]
                } else {
                    0.0
                }
            })
            .collect();
        let cold = z0.iter().all(|v| *v == 0.0);
        let solved = equality_newton(problem, &active, &goal, z0, tol).or_else(|| {
            (!cold)
                .then(|| equality_newton(problem, &active, &goal, vec![0.0; active.len()], tol))
                .flatten()
        });
        let Some(zs) = solved else {
            continue;
        };
        let mut z = vec![0.0; m];
        for (k, &i) in active.iter().enumerate() {
            z[i] = zs[k];
        }
        // optimality reads E f = c + r sign(z), so z points at the active face
        // a multiplier of rounding size on a face is as good as an interior point
        let signs_ok = active.iter().all(|&i| z[i] * pattern[i] as f64 >= -1e-9);
        let weights = tilted_weights(problem, &z);
        let moments = problem.moments(&weights);
        let inside = (0..m)
            .filter(|&i| pattern[i] == 0)
            .all(|i| (moments[i] - center[i]).abs() <= radius[i] + 10.0 * tol);
        if signs_ok && inside {
            return Ok(ActiveSetSolution {
                weights,
                z,
                pattern,
                moments,
            });
        }
    }
    Err(Error::Irregular(
        "no face of the target box admits a maximum entropy law".into(),
    ))
}

fn tilted_weights(problem: &DiscreteProblem, z: &[f64]) -> Vec<f64> {
    let log: Vec<f64> = (0..problem.len())
        .map(|j| {
            problem.reference[j].log2()
                - z.iter()
                    .zip(&problem.features)
                    .map(|(zi, f)| zi * f[j])
                    .sum::<f64>()
        })
        .collect();
    let top = log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log.iter().map(|l| (l - top).exp2()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Maximizes `-z.b - log2 sum_j nu_j 2^{-z.f_S(j)}` over the active
/// multipliers. Returns `None` when the moments `b` are not attained.
fn equality_newton(
    problem: &DiscreteProblem,
    active: &[usize],
    goal: &[f64],
    mut z: Vec<f64>,
    tol: f64,
) -> Option<Vec<f64>> {
    let k = active.len();
    if k == 0 {
        return Some(z);
    }
    let n = problem.len();
    let full = |z: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; problem.features.len()];
        for (c, &i) in active.iter().enumerate() {
            out[i] = z[c];
        }
        out
    };
    let objective = |z: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let zf = full(z);
        let log: Vec<f64> = (0..n)
            .map(|j| {
                problem.reference[j].log2()
                    - active
                        .iter()
                        .map(|&i| zf[i] * problem.features[i][j])
                        .sum::<f64>()
            })
            .collect();
        let top = log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log.iter().map(|l| (l - top).exp2()).collect();
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|v| v / total).collect();
        let value = -z.iter().zip(goal).map(|(a, b)| a * b).sum::<f64>() - (top + total.log2());
        let grad = active
            .iter()
            .zip(goal)
            .map(|(&i, b)| {
                problem.features[i]
                    .iter()
                    .zip(&p)
                    .map(|(f, q)| f * q)
                    .sum::<f64>()
                    - b
            })
            .collect();
        (value, grad, p)
    };
    let gmax = |g: &[f64]| g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (mut value, mut grad, mut p) = objective(&z);
    for _ in 0..200 {
        let g = gmax(&grad);
        if g <= tol {
            return Some(z);
        }
        let mean: Vec<f64> = active
            .iter()
            .map(|&i| problem.features[i].iter().zip(&p).map(|(f, q)| f * q).sum())
            .collect();
        let h = DMatrix::from_fn(k, k, |r, c| {
            let (fr, fc) = (&problem.features[active[r]], &problem.features[active[c]]);
            std::f64::consts::LN_2
                * (0..n)
                    .map(|j| p[j] * (fr[j] - mean[r]) * (fc[j] - mean[c]))
                    .sum::<f64>()
        });
        let step = h.cholesky()?.solve(&DVector::from_column_slice(&grad));
        let slope: f64 = step.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let (v, gr, pr) = objective(&trial);
            // near the optimum value differences drop below rounding, so a
            // clear decrease of the gradient also counts as progress
            if v >= value + 1e-4 * t * slope || gmax(&gr) <= 0.5 * g {
                z = trial;
                value = v;
                grad = gr;
                p = pr;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return None;
            }
        }
        if z.iter().any(|v| !v.is_finite() || v.abs() > 1e8) {
            return None;
        }
    }
    (gmax(&grad) <= tol).then_some(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_bound_examples() {
        let t = TargetSet::new_box(vec![0.5], vec![0.1]).unwrap();
        let p = DiscreteProblem::monomial(vec![0.0, 1.0, 2.0, 3.0], vec![0.25; 4], t).unwrap();
        assert_eq!(discrete_dual_bound(&p, 1.0).unwrap(), 2.0);
        assert_eq!(discrete_dual_bound(&p, 0.5).unwrap(), 4.0);
        assert!(discrete_dual_bound(&p, 0.0).is_err());
    }

    #[test]
    fn zero_reference_weight_rejected() {
        let t = TargetSet::new_box(vec![0.5], vec![0.1]).unwrap();
        let r = DiscreteProblem::monomial(vec![0.0, 1.0], vec![1.0, 0.0], t);
        assert!(matches!(r, Err(Error::Irregular(_))));
    }

    #[test]
    fn margin_of_a_box() {
        // mean of a two-point law ranges over [0,1]; box [0.2,0.6] has margin 0.2
        let t = TargetSet::new_box(vec![0.4], vec![0.2]).unwrap();
        let p = DiscreteProblem::monomial(vec![0.0, 1.0], vec![0.5, 0.5], t).unwrap();
        let (delta, mu) = p.slater_margin().unwrap();
        assert!((delta - 0.2).abs() < 1e-12);
        assert!((p.moments(&mu)[0] - 0.4).abs() < 1e-12);
        // box sticking out of the realizable range: margin limited by the simplex side
        let t = TargetSet::new_box(vec![0.95], vec![0.1]).unwrap();
        let p = DiscreteProblem::monomial(vec![0.0, 1.0], vec![0.5, 0.5], t).unwrap();
        assert!((p.slater_margin().unwrap().0 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn vacuous_constraints_return_reference() {
        let t = TargetSet::new_box(vec![0.5, 0.5], vec![10.0, 10.0]).unwrap();
        let p = DiscreteProblem::monomial(vec![0.0, 0.25, 0.5, 1.0], vec![0.1, 0.2, 0.3, 0.4], t)
            .unwrap();
        let sol = solve_discrete(&p, 0.01, None).unwrap();
        // smoothing pulls the moments towards the origin by O(eta1)
        assert!(crate::vecops::total_variation(&sol.weights, &p.reference) < 1e-3);
        assert!(sol.outcome.primal_value < 1e-5);
        assert!(sol.outcome.certified);
    }

    #[test]
    fn active_set_interior_and_face() {
        // mean of the uniform law on {0, 1/2, 1} is 1/2
        let states = vec![0.0, 0.5, 1.0];
        let t = TargetSet::new_box(vec![0.5], vec![0.1]).unwrap();
        let p = DiscreteProblem::monomial(states.clone(), vec![1.0 / 3.0; 3], t).unwrap();
        let sol = active_set_solve(&p, None, 1e-12).unwrap();
        assert_eq!(sol.pattern, vec![0]);
        assert!(sol.weights.iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-12));

        // the box [0.7, 0.8] forces the mean up to its lower face
        let t = TargetSet::new_box(vec![0.75], vec![0.05]).unwrap();
        let p = DiscreteProblem::monomial(states, vec![1.0 / 3.0; 3], t).unwrap();
        let sol = active_set_solve(&p, None, 1e-12).unwrap();
        assert_eq!(sol.pattern, vec![-1]);
        assert!(sol.z[0] < 0.0);
        assert!((sol.moments[0] - 0.7).abs() < 1e-11);
        let again = active_set_solve(&p, Some(&sol), 1e-12).unwrap();
        assert_eq!(again.pattern, sol.pattern);
    }
}
