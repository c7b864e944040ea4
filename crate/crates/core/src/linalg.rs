//! Small dense linear algebra: square matrices, Gaussian elimination, a cyclic Jacobi
//! eigensolver for symmetric matrices and the Moore-Penrose pseudoinverse built on it.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Off-diagonal threshold of the Jacobi sweeps, relative to the Frobenius norm.
pub const JACOBI_TOL: f64 = 1e-13;

/// Eigenvalues at or below this fraction of the largest one are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;

/// Allowed `|m_ij - m_ji|` for inputs declared symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix is not square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `v v^T`.
    pub fn outer(v: &[f64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, v.len(), "dimension mismatch");
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// `max |m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
                .expect("nonempty range");
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in (col + 1)..n {
                let f = a[r * n + col] / p;
                if f != 0.0 {
                    for j in col..n {
                        a[r * n + j] -= f * a[col * n + j];
                    }
                }
            }
        }
        det
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenvalues and eigenvectors (as columns) of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `JACOBI_TOL` times the norm of the input.
pub fn symmetric_eigen(m: &Matrix) -> Result<SymmetricEigen> {
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::NonSymmetric(asym));
    }
    let n = m.dim();
    let mut a = m.clone();
    // Symmetrize away representable noise.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = a.frobenius();
    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&a) > JACOBI_TOL * scale {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::Numerical(
                "Jacobi eigensolver did not converge".into(),
            ));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(SymmetricEigen {
        values: (0..n).map(|i| a[(i, i)]).collect(),
        vectors: v,
    })
}

/// Moore-Penrose pseudoinverse of a symmetric matrix: eigenvalues above
/// `PINV_RCOND * max |lambda|` are inverted, the rest are zeroed.
pub fn pseudo_inverse(m: &Matrix) -> Result<Matrix> {
    let eig = symmetric_eigen(m)?;
    let n = m.dim();
    let top = eig.values.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    let mut out = Matrix::zeros(n);
    if top == 0.0 {
        return Ok(out);
    }
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda.abs() <= PINV_RCOND * top {
            continue;
        }
        let inv = 1.0 / lambda;
        for i in 0..n {
            let vi = eig.vectors[(i, k)] * inv;
            for j in 0..n {
                out[(i, j)] += vi * eig.vectors[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Unique solution of `a x = b` for a tall or square `a` (rows of length `cols`), or `None`
/// if the columns are dependent or the system is inconsistent. Pivots below `tol` count
/// as zero; the residual of the dropped rows must also stay within `tol`.
pub fn solve_unique(a: &[Vec<f64>], b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    if cols > rows {
        return None;
    }
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(r, &rhs)| {
            let mut r = r.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..cols {
        let pivot = (col..rows).max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))?;
        if m[pivot][col].abs() <= tol {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..rows {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (a, b) in m[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *a -= f * b;
                    }
                }
            }
        }
    }
    if m[cols..].iter().any(|r| r[cols].abs() > tol) {
        return None;
    }
    Some((0..cols).map(|i| m[i][cols] / m[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_rank_one_projector() {
        let m = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let eig = symmetric_eigen(&m).unwrap();
        let mut vals = eig.values.clone();
        vals.sort_by(f64::total_cmp);
        assert!(vals[0].abs() < 1e-15);
        assert!((vals[1] - 1.0).abs() < 1e-15);
        let k = if eig.values[0] > eig.values[1] { 0 } else { 1 };
        let v = [eig.vectors[(0, k)], eig.vectors[(1, k)]];
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].abs() - r).abs() < 1e-14 && (v[1].abs() - r).abs() < 1e-14);
        assert!(v[0] * v[1] > 0.0);
    }

    #[test]
    fn pinv_special_cases() {
        let id = Matrix::identity(3);
        assert_eq!(pseudo_inverse(&id).unwrap(), id);
        let z = Matrix::zeros(2);
        assert_eq!(pseudo_inverse(&z).unwrap(), z);
        let proj = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(pseudo_inverse(&proj).unwrap().sub(&proj).max_abs() < 1e-15);
    }

    #[test]
    fn pinv_rejects_asymmetric() {
        let m = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(pseudo_inverse(&m), Err(Error::NonSymmetric(_))));
    }

    #[test]
    fn det_matches_hand_values() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert!((m.det() - 5.0).abs() < 1e-14);
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((m.det() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn solve_unique_cases() {
        let a = vec![vec![1.0, 1.0], vec![1.0, -0.5]];
        let x = solve_unique(&a, &[1.0, 0.0], 1e-12).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && (x[1] - 2.0 / 3.0).abs() < 1e-15);
        // Dependent columns.
        assert!(solve_unique(&[vec![1.0, 1.0], vec![2.0, 2.0]], &[1.0, 2.0], 1e-12).is_none());
        // Inconsistent overdetermined system.
        assert!(solve_unique(&[vec![1.0], vec![1.0]], &[1.0, 0.0], 1e-12).is_none());
    }
}
