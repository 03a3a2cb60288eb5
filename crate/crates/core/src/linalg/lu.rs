//! LU factorization with partial pivoting for complex matrices.
//! Pivot choice is max modulus, first occurrence, so factorization is
//! deterministic.

use super::{ComplexMatrix, C64};
use crate::{Error, Result};

pub struct Lu {
    n: usize,
    lu: Vec<C64>,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &ComplexMatrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch("LU of non-square matrix".into()));
        }
        let n = a.rows();
        let mut lu: Vec<C64> = a.data().to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].norm();
            for i in (k + 1)..n {
                let v = lu[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let m = lu[i * n + k] / pivot;
                lu[i * n + k] = m;
                for j in (k + 1)..n {
                    let t = m * lu[k * n + j];
                    lu[i * n + j] -= t;
                }
            }
        }
        Ok(Lu { n, lu, piv })
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        let n = self.n;
        let permuted: Vec<C64> = self.piv.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        for i in 1..n {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * b[j];
            }
            b[i] = acc / self.lu[i * n + i];
        }
    }

    pub fn solve_mat(&self, b: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(b.rows(), self.n, "solve dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.n, b.cols());
        for j in 0..b.cols() {
            let mut col = b.column(j);
            self.solve_in_place(&mut col);
            for i in 0..self.n {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(Lu::factor(a)?.solve_mat(b))
}

pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve(a, &ComplexMatrix::identity(a.rows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_matrix;

    #[test]
    fn solve_residual_small() {
        let a = seeded_matrix(11, 6, 6, 1.0);
        let b = seeded_matrix(12, 6, 2, 1.0);
        let x = solve(&a, &b).unwrap();
        assert!((&a * &x).max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = seeded_matrix(13, 5, 5, 1.0);
        let inv = inverse(&a).unwrap();
        assert!((&a * &inv).max_abs_diff(&ComplexMatrix::identity(5)) < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let a = ComplexMatrix::zeros(3, 3);
        assert!(matches!(Lu::factor(&a), Err(Error::Singular)));
    }
}
