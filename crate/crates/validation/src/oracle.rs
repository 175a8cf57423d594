//! Independent optimality oracle for small discrete problems and random
//! instance generators.

use maxent_core::discrete::DiscreteProblem;
use maxent_core::TargetSet;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Exact minimizer of `D(p || nu)` over the simplex subject to
/// `lo <= F p <= hi`, found by enumerating every active-set sign pattern
/// and solving the equality-constrained dual with damped Newton steps.
pub struct Oracle {
    pub weights: Vec<f64>,
    pub value: f64,
    pub multipliers: Vec<f64>,
}

fn log2_partition(nu: &[f64], f: &[Vec<f64>], active: &[usize], z: &[f64]) -> (f64, Vec<f64>) {
    let expo: Vec<f64> = (0..nu.len())
        .map(|j| {
            -active
                .iter()
                .zip(z)
                .map(|(&i, zi)| zi * f[i][j])
                .sum::<f64>()
        })
        .collect();
    let m = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = nu
        .iter()
        .zip(&expo)
        .map(|(n, e)| n * (e - m).exp2())
        .collect();
    let s: f64 = w.iter().sum();
    (m + s.log2(), w.iter().map(|v| v / s).collect())
}

fn equality_dual(
    nu: &[f64],
    f: &[Vec<f64>],
    active: &[usize],
    b: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = active.len();
    let mut z = vec![0.0; k];
    let value = |z: &[f64]| -> f64 {
        let (lz, _) = log2_partition(nu, f, active, z);
        -z.iter().zip(b).map(|(a, c)| a * c).sum::<f64>() - lz
    };
    for _ in 0..500 {
        let (_, p) = log2_partition(nu, f, active, &z);
        let mean: Vec<f64> = active
            .iter()
            .map(|&i| f[i].iter().zip(&p).map(|(a, q)| a * q).sum())
            .collect();
        let grad: Vec<f64> = mean.iter().zip(b).map(|(m, c)| m - c).collect();
        let gnorm = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
        if gnorm < 1e-13 {
            return Some((z, p));
        }
        let cov = DMatrix::from_fn(k, k, |r, c| {
            let (i, j) = (active[r], active[c]);
            p.iter()
                .enumerate()
                .map(|(n, q)| q * (f[i][n] - mean[r]) * (f[j][n] - mean[c]))
                .sum::<f64>()
                * std::f64::consts::LN_2
        });
        let step = cov.lu().solve(&DVector::from_vec(grad.clone()))?;
        let f0 = value(&z);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if value(&trial) >= f0 - 1e-15 || t < 1e-12 {
                z = trial;
                break;
            }
            t *= 0.5;
        }
        if z.iter().any(|v| !v.is_finite() || v.abs() > 1e7) {
            return None;
        }
    }
    None
}

pub fn oracle(nu: &[f64], f: &[Vec<f64>], lo: &[f64], hi: &[f64]) -> Oracle {
    let m = f.len();
    let mut best: Option<Oracle> = None;
    for code in 0..3usize.pow(m as u32) {
        let mut c = code;
        let signs: Vec<i32> = (0..m)
            .map(|_| {
                let s = (c % 3) as i32 - 1;
                c /= 3;
                s
            })
            .collect();
        let active: Vec<usize> = (0..m).filter(|&i| signs[i] != 0).collect();
        let b: Vec<f64> = active
            .iter()
            .map(|&i| if signs[i] > 0 { hi[i] } else { lo[i] })
            .collect();
        let Some((z, p)) = equality_dual(nu, f, &active, &b) else {
            continue;
        };
        let sign_ok = active
            .iter()
            .zip(&z)
            .all(|(&i, zi)| zi * signs[i] as f64 >= -1e-9);
        let feas_ok = (0..m).all(|i| {
            let v: f64 = f[i].iter().zip(&p).map(|(a, q)| a * q).sum();
            v >= lo[i] - 1e-10 && v <= hi[i] + 1e-10
        });
        if !(sign_ok && feas_ok) {
            continue;
        }
        let value: f64 = p
            .iter()
            .zip(nu)
            .map(|(q, n)| if *q > 0.0 { q * (q / n).log2() } else { 0.0 })
            .sum();
        let mut full = vec![0.0; m];
        for (&i, zi) in active.iter().zip(&z) {
            full[i] = *zi;
        }
        if best.as_ref().is_none_or(|o| value < o.value) {
            best = Some(Oracle {
                weights: p,
                value,
                multipliers: full,
            });
        }
    }
    best.expect("some sign pattern satisfies the optimality conditions")
}

pub fn oracle_for(problem: &DiscreteProblem) -> Oracle {
    let TargetSet::Box { center, radius } = &problem.target else {
        panic!("oracle handles box targets");
    };
    let lo: Vec<f64> = center.iter().zip(radius).map(|(c, r)| c - r).collect();
    let hi: Vec<f64> = center.iter().zip(radius).map(|(c, r)| c + r).collect();
    oracle(&problem.reference, &problem.features, &lo, &hi)
}

/// Random problem on `n` equispaced states in `[0, 1]` with monomial
/// features of order `m`; the box is centred at the moments of a random
/// interior law so it is realizable, with radii in `[r_lo, r_hi]`.
pub fn random_problem<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    r_lo: f64,
    r_hi: f64,
) -> DiscreteProblem {
    let states: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
    let mut nu: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let s: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|v| *v /= s);
    let mut law: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = law.iter().sum();
    law.iter_mut().for_each(|v| *v /= s);
    let center: Vec<f64> = (1..=m as i32)
        .map(|i| states.iter().zip(&law).map(|(x, w)| w * x.powi(i)).sum())
        .collect();
    let radius: Vec<f64> = (0..m).map(|_| rng.gen_range(r_lo..=r_hi)).collect();
    let target = TargetSet::new_box(center, radius).unwrap();
    DiscreteProblem::monomial(states, nu, target).unwrap()
}
