//! Dense two-phase primal simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! Entering and leaving variables follow Bland's rule, so the method terminates on
//! degenerate problems. Problems here have a handful of rows and columns; the tableau is
//! kept dense.

use thiserror::Error;

use crate::linalg::solve_unique;

pub const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex basis is singular")]
    SingularBasis,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Simplex multipliers `pi` with `pi.b = objective` and `c_j - pi.A_j >= 0`; rows
    /// found redundant get multiplier 0.
    pub multipliers: Vec<f64>,
    pub basis: Vec<usize>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    rhs: usize,
}

impl Tableau {
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
                row[col] = 0.0;
            }
        }
        let f = self.reduced[col];
        if f != 0.0 {
            for (v, pv) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.reduced[col] = 0.0;
        }
        self.basis[r] = col;
    }

    fn price_out(&mut self, cost: &[f64]) {
        self.reduced = vec![0.0; self.rhs + 1];
        self.reduced[..cost.len()].copy_from_slice(cost);
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (z, v) in self.reduced.iter_mut().zip(row) {
                    *z -= cb * v;
                }
            }
        }
    }

    /// Runs Bland-rule pivots over columns `0..allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<(), LpError> {
        loop {
            let Some(col) = (0..allowed).find(|&j| self.reduced[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > PIVOT_TOL {
                    let ratio = row[self.rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - PIVOT_TOL
                                || (ratio <= best + PIVOT_TOL && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, col),
                None => return Err(LpError::Unbounded),
            }
        }
    }
}

pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m, "rhs length");
    assert!(a.iter().all(|r| r.len() == n), "constraint row length");

    let rhs = n + m;
    let rows = (0..m)
        .map(|i| {
            let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
            let mut row = vec![0.0; rhs + 1];
            for j in 0..n {
                row[j] = sign * a[i][j];
            }
            row[n + i] = 1.0;
            row[rhs] = sign * b[i];
            row
        })
        .collect();
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        reduced: Vec::new(),
        rhs,
    };

    // Phase 1: minimize the sum of artificials.
    let mut phase1 = vec![0.0; n + m];
    phase1[n..].fill(1.0);
    tab.price_out(&phase1);
    tab.optimize(n + m)?;
    let infeasibility = -tab.reduced[rhs];
    let scale = 1.0 + b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if infeasibility > 1e-9 * scale {
        return Err(LpError::Infeasible);
    }

    // Drive artificials out of the basis; rows where that is impossible are redundant.
    let mut kept: Vec<usize> = Vec::with_capacity(m);
    let mut i = 0;
    let mut origin: Vec<usize> = (0..m).collect();
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL) {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                    origin.remove(i);
                    continue;
                }
            }
        }
        kept.push(origin[i]);
        i += 1;
    }

    // Phase 2 over the original columns only.
    tab.price_out(c);
    tab.optimize(n)?;

    let mut x = vec![0.0; n];
    for (row, &bi) in tab.rows.iter().zip(&tab.basis) {
        x[bi] = row[rhs].max(0.0);
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();

    // B^T pi = c_B over the kept rows.
    let bt: Vec<Vec<f64>> = tab
        .basis
        .iter()
        .map(|&j| kept.iter().map(|&r| a[r][j]).collect())
        .collect();
    let cb: Vec<f64> = tab.basis.iter().map(|&j| c[j]).collect();
    let mut multipliers = vec![0.0; m];
    if !kept.is_empty() {
        let pi = solve_unique(&bt, &cb, 1e-14).ok_or(LpError::SingularBasis)?;
        for (&r, v) in kept.iter().zip(pi) {
            multipliers[r] = v;
        }
    }
    Ok(LpSolution {
        x,
        objective,
        multipliers,
        basis: tab.basis,
    })
}
