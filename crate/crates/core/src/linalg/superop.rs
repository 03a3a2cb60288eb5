//! Superoperators (linear maps on n x n matrices) and Choi matrices.
//!
//! A map is stored as its n^2 x n^2 matrix acting on column-stacked
//! operators: vec(A X B) = (B^T (x) A) vec(X).

use super::{eigh_values, ComplexMatrix, C64};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    Heisenberg,
    Schrodinger,
}

/// Linear map on n x n matrices in a fixed picture.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: ComplexMatrix,
    picture: Picture,
}

impl SuperOperator {
    pub fn identity(dim: usize, picture: Picture) -> Self {
        Self {
            dim,
            matrix: ComplexMatrix::identity(dim * dim),
            picture,
        }
    }

    pub fn zero(dim: usize, picture: Picture) -> Self {
        Self {
            dim,
            matrix: ComplexMatrix::zeros(dim * dim, dim * dim),
            picture,
        }
    }

    pub fn from_matrix(dim: usize, matrix: ComplexMatrix, picture: Picture) -> Self {
        assert_eq!(matrix.rows(), dim * dim);
        assert_eq!(matrix.cols(), dim * dim);
        Self {
            dim,
            matrix,
            picture,
        }
    }

    /// Build from the action on matrix units.
    pub fn from_map(
        dim: usize,
        picture: Picture,
        mut f: impl FnMut(&ComplexMatrix) -> ComplexMatrix,
    ) -> Self {
        let mut matrix = ComplexMatrix::zeros(dim * dim, dim * dim);
        for q in 0..dim {
            for p in 0..dim {
                let image = f(&ComplexMatrix::unit(dim, p, q));
                let col = q * dim + p; // column-stacked index of E_pq
                let vec = image.vectorize();
                for r in 0..dim * dim {
                    matrix[(r, col)] = vec[r];
                }
            }
        }
        Self {
            dim,
            matrix,
            picture,
        }
    }

    /// The map X -> A X B.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix, picture: Picture) -> Self {
        let dim = a.rows();
        assert!(a.is_square() && b.is_square() && b.rows() == dim);
        Self {
            dim,
            matrix: b.transpose().kron(a),
            picture,
        }
    }

    pub fn left_mul(a: &ComplexMatrix, picture: Picture) -> Self {
        Self::sandwich(a, &ComplexMatrix::identity(a.rows()), picture)
    }

    pub fn right_mul(b: &ComplexMatrix, picture: Picture) -> Self {
        Self::sandwich(&ComplexMatrix::identity(b.rows()), b, picture)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(x.rows(), self.dim);
        assert_eq!(x.cols(), self.dim);
        let v = self.matrix.apply_vec(&x.vectorize());
        ComplexMatrix::from_vectorized(self.dim, &v)
    }

    /// Composition self after other: (self . other)(X) = self(other(X)).
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
            picture: self.picture,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            matrix: &self.matrix + &other.matrix,
            picture: self.picture,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            matrix: &self.matrix - &other.matrix,
            picture: self.picture,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            matrix: self.matrix.scale(s),
            picture: self.picture,
        }
    }

    /// Trace-pairing adjoint: tr(L*(rho) B) = tr(rho L(B)). In the
    /// column-stacking convention this is the conjugate transpose of the
    /// map matrix, with the picture flipped.
    pub fn trace_adjoint(&self) -> Self {
        let picture = match self.picture {
            Picture::Heisenberg => Picture::Schrodinger,
            Picture::Schrodinger => Picture::Heisenberg,
        };
        Self {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
            picture,
        }
    }
}

/// Choi matrix of a superoperator: C = sum_pq E_pq (x) map(E_pq).
/// The map is completely positive iff C is PSD.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    dim: usize,
    matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.matrix.hermiticity_residual()
    }

    /// PSD verdict and minimum eigenvalue.
    pub fn is_psd(&self, tol: f64) -> Result<(bool, f64)> {
        let vals = eigh_values(&self.matrix.hermitian_part())?;
        let min = vals.first().copied().unwrap_or(0.0);
        Ok((min >= -tol, min))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigh_values(&self.matrix.hermitian_part())
    }
}

pub fn choi_of(map: &SuperOperator) -> ChoiMatrix {
    let n = map.dim();
    let mut c = ComplexMatrix::zeros(n * n, n * n);
    for p in 0..n {
        for q in 0..n {
            let unit = ComplexMatrix::unit(n, p, q);
            let image = map.apply(&unit);
            c = &c + &unit.kron(&image);
        }
    }
    ChoiMatrix { dim: n, matrix: c }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{seeded_hermitian, seeded_matrix};

    #[test]
    fn identity_superop_acts_trivially() {
        let id = SuperOperator::identity(3, Picture::Heisenberg);
        let b = seeded_matrix(5, 3, 3, 1.0);
        assert!(id.apply(&b).max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let a = seeded_matrix(21, 3, 3, 1.0);
        let b = seeded_matrix(22, 3, 3, 1.0);
        let x = seeded_matrix(23, 3, 3, 1.0);
        let s = SuperOperator::sandwich(&a, &b, Picture::Heisenberg);
        assert!(s.apply(&x).max_abs_diff(&(&(&a * &x) * &b)) < 1e-13);
    }

    #[test]
    fn trace_pairing_adjoint() {
        // tr(L*(rho) B) = tr(rho L(B)) for seeded rho, B
        let l_op = seeded_matrix(31, 2, 2, 1.0);
        let heis =
            SuperOperator::from_map(2, Picture::Heisenberg, |b| &(&l_op.adjoint() * b) * &l_op);
        let schr = heis.trace_adjoint();
        for seed in 0..10u64 {
            let rho = seeded_hermitian(40 + seed, 2, 1.0);
            let b = seeded_hermitian(60 + seed, 2, 1.0);
            let lhs = (&schr.apply(&rho) * &b).trace();
            let rhs = (&rho * &heis.apply(&b)).trace();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn choi_of_identity_map() {
        let c = choi_of(&SuperOperator::identity(2, Picture::Heisenberg));
        let vals = c.eigenvalues().unwrap();
        // maximally entangled projector scaled by 2: spectrum {0,0,0,2}
        assert!(vals[3] - 2.0 < 1e-12 && (vals[3] - 2.0).abs() < 1e-12);
        for v in &vals[..3] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn choi_single_kraus_is_rank_one() {
        let l = ComplexMatrix::unit(2, 0, 1);
        let map = SuperOperator::from_map(2, Picture::Heisenberg, |b| &(&l.adjoint() * b) * &l);
        let c = choi_of(&map);
        let (psd, min) = c.is_psd(1e-10).unwrap();
        assert!(psd, "min={min}");
        let rank = c
            .eigenvalues()
            .unwrap()
            .iter()
            .filter(|v| **v > 1e-10)
            .count();
        assert_eq!(rank, 1);
    }

    #[test]
    fn choi_negation_not_cp() {
        let map = SuperOperator::identity(2, Picture::Heisenberg).scale(C64::new(-1.0, 0.0));
        let (psd, min) = choi_of(&map).is_psd(1e-10).unwrap();
        assert!(!psd);
        assert!(min < -0.5);
    }

    #[test]
    fn choi_of_seeded_kraus_maps_is_psd() {
        for seed in 0..12u64 {
            let n = 2 + (seed % 3) as usize;
            let r = 1 + (seed % 2) as usize;
            let kraus: Vec<ComplexMatrix> = (0..r)
                .map(|i| seeded_matrix(seed * 10 + i as u64, n, n, 0.8))
                .collect();
            let map = SuperOperator::from_map(n, Picture::Heisenberg, |b| {
                let mut acc = ComplexMatrix::zeros(n, n);
                for l in &kraus {
                    acc = &acc + &(&(&l.adjoint() * b) * l);
                }
                acc
            });
            let (psd, min) = choi_of(&map).is_psd(1e-10).unwrap();
            assert!(psd, "seed={seed} min={min}");
        }
    }
}
