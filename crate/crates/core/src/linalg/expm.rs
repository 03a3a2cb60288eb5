//! Matrix exponential by [6/6] Pade approximation with scaling and squaring.
//! The argument is scaled so its 1-norm is at most 1/4, where the [6/6]
//! truncation error is far below double precision.

use super::{lu, ComplexMatrix};
use crate::Result;

// Pade [6/6] coefficients b_j = (12-j)! 6! / (12! j! (6-j)!).
const PADE6: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

pub fn matrix_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    assert!(a.is_square(), "matrix_exp of non-square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    let norm = a.norm_one();
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let b = a.scale_re(0.5f64.powi(squarings as i32));

    let id = ComplexMatrix::identity(n);
    let b2 = &b * &b;
    let b4 = &b2 * &b2;

    // odd part U = B (c1 I + c3 B^2 + c5 B^4), even part V = c0 I + c2 B^2 + c4 B^4 + c6 B^6
    let inner = &(&id.scale_re(PADE6[1]) + &b2.scale_re(PADE6[3])) + &b4.scale_re(PADE6[5]);
    let u = &b * &inner;
    let v = &(&(&id.scale_re(PADE6[0]) + &b2.scale_re(PADE6[2])) + &b4.scale_re(PADE6[4]))
        + &(&b4 * &b2).scale_re(PADE6[6]);

    // exp(B) ~ (V - U)^{-1} (V + U)
    let num = &v + &u;
    let den = &v - &u;
    let mut result = lu::solve(&den, &num)?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{seeded_matrix, C64};

    #[test]
    fn exp_zero_is_identity() {
        let e = matrix_exp(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e, ComplexMatrix::identity(3));
    }

    #[test]
    fn exp_diagonal() {
        let a = ComplexMatrix::diag(&[C64::new(1.0, 0.5), C64::new(-2.0, 0.0)]);
        let e = matrix_exp(&a).unwrap();
        let expected = ComplexMatrix::diag(&[C64::new(1.0, 0.5).exp(), C64::new(-2.0, 0.0).exp()]);
        assert!(e.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn exp_inverse_identity() {
        for seed in 0..10u64 {
            let mut a = seeded_matrix(seed, 4, 4, 0.5);
            let norm = a.norm_one();
            if norm > 2.0 {
                a = a.scale_re(2.0 / norm);
            }
            let e = matrix_exp(&a).unwrap();
            let einv = matrix_exp(&-&a).unwrap();
            assert!((&e * &einv).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
        }
    }

    #[test]
    fn exp_commuting_additivity() {
        // polynomials in one seed matrix commute
        for seed in 0..8u64 {
            let s = seeded_matrix(100 + seed, 3, 3, 0.4);
            let a = &s + &(&s * &s).scale_re(0.3);
            let b = &s.scale_re(0.7) + &(&s * &s).scale_re(-0.2);
            let lhs = matrix_exp(&(&a + &b)).unwrap();
            let rhs = &matrix_exp(&a).unwrap() * &matrix_exp(&b).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }

    #[test]
    fn exp_large_norm_still_accurate() {
        // rotation generator with norm 10: exact answer known
        let mut a = ComplexMatrix::zeros(2, 2);
        a[(0, 1)] = C64::new(10.0, 0.0);
        a[(1, 0)] = C64::new(-10.0, 0.0);
        let e = matrix_exp(&a).unwrap();
        let expected = ComplexMatrix::from_rows(vec![
            vec![C64::new(10.0f64.cos(), 0.0), C64::new(10.0f64.sin(), 0.0)],
            vec![
                C64::new(-(10.0f64.sin()), 0.0),
                C64::new(10.0f64.cos(), 0.0),
            ],
        ])
        .unwrap();
        assert!(e.max_abs_diff(&expected) < 1e-12);
    }
}
