//! Small dense two-phase simplex with Bland's rule.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct StandardSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub basis: Vec<usize>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = col;
    }

    /// Minimizes `cost . x` over the columns `< allowed`.
    fn run(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .rows
                        .iter()
                        .zip(&self.basis)
                        .map(|(row, &b)| cost[b] * row[j])
                        .sum::<f64>();
                reduced < -1e-10
            });
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-14
                                || (ratio <= best + 1e-14 && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::LinearProgram("unbounded"));
            };
            self.pivot(r, col);
        }
        Err(Error::LinearProgram("pivot limit reached"))
    }
}

/// `min c.x  s.t.  a x = b, x >= 0`.
pub(crate) fn minimize_standard(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<StandardSolution> {
    let n = c.len();
    let m = a.len();
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (row, bi) in a.iter().zip(b) {
        let sign = if *bi < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; width + 1];
        for (j, v) in row.iter().enumerate() {
            t[j] = sign * v;
        }
        t[width] = sign * bi;
        rows.push(t);
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row[n + i] = 1.0;
    }
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        width,
    };
    let mut phase1 = vec![0.0; width];
    phase1[n..].iter_mut().for_each(|v| *v = 1.0);
    tab.run(&phase1, width)?;
    let infeasibility: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.rhs(i))
        .sum();
    let scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if infeasibility > 1e-9 * scale {
        return Err(Error::LinearProgram("infeasible"));
    }
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.rows[i][j].abs() > 1e-9) {
                Some(j) => {
                    tab.pivot(i, j);
                    i += 1;
                }
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
    let mut cost = c.to_vec();
    cost.resize(width, 0.0);
    tab.run(&cost, n)?;
    let mut x = vec![0.0; n];
    for (i, &bcol) in tab.basis.iter().enumerate() {
        x[bcol] = tab.rhs(i);
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(StandardSolution {
        x,
        value,
        basis: tab.basis,
    })
}

/// `max c.x  s.t.  g x <= h` with `x` free, solved through its dual
/// `min h.y  s.t.  g^T y = c, y >= 0`. The primal point is recovered from
/// the constraints that are active in the optimal dual basis.
pub(crate) fn maximize_inequality(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = c.len();
    let rows = g.len();
    let gt: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..rows).map(|i| g[i][j]).collect())
        .collect();
    let dual = minimize_standard(h, &gt, c).map_err(|e| match e {
        Error::LinearProgram("infeasible") => Error::LinearProgram("unbounded"),
        Error::LinearProgram("unbounded") => Error::LinearProgram("infeasible"),
        other => other,
    })?;
    let active = &dual.basis;
    let gb = DMatrix::from_fn(active.len(), n, |i, j| g[active[i]][j]);
    let hb = DVector::from_iterator(active.len(), active.iter().map(|&i| h[i]));
    let x = gb
        .svd(true, true)
        .solve(&hb, 1e-12)
        .map_err(|_| Error::LinearProgram("singular active set"))?;
    Ok((x.iter().copied().collect(), dual.value))
}
