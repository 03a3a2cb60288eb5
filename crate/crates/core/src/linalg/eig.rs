//! Hermitian eigensolver.
//!
//! A complex Hermitian matrix A = X + iY is embedded into the real symmetric
//! matrix [[X, -Y], [Y, X]], reduced to tridiagonal form by Householder
//! reflections and diagonalized by implicit-shift QL. Every eigenvalue of A
//! appears twice in the embedding; complex eigenvectors are recovered from
//! the doubled real ones by Gram-Schmidt extraction. The algorithm contains
//! no pivoting or randomization, so identical input bits give identical
//! output bits.

use super::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Householder reduction of a real symmetric matrix (row-major, in place)
/// to tridiagonal form. `d` receives the diagonal, `e` the subdiagonal
/// (e[0] unused). With `vectors`, `a` is overwritten by the accumulated
/// orthogonal transform.
fn tred2(a: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], vectors: bool) {
    for i in (1..n).rev() {
        let mut h = 0.0f64;
        if i > 1 {
            let mut scale = 0.0f64;
            for k in 0..i {
                scale += a[i * n + k].abs();
            }
            if scale == 0.0 {
                e[i] = a[i * n + (i - 1)];
            } else {
                for k in 0..i {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + (i - 1)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + (i - 1)] = f - g;
                let mut f_acc = 0.0f64;
                for j in 0..i {
                    if vectors {
                        a[j * n + i] = a[i * n + j] / h;
                    }
                    let mut g = 0.0f64;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..i {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * a[i * n + j];
                }
                let hh = f_acc / (h + h);
                for j in 0..i {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + (i - 1)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    if vectors {
        for i in 0..n {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0f64;
                    for k in 0..i {
                        g += a[i * n + k] * a[k * n + j];
                    }
                    for k in 0..i {
                        a[k * n + j] -= g * a[k * n + i];
                    }
                }
            }
            d[i] = a[i * n + i];
            a[i * n + i] = 1.0;
            for j in 0..i {
                a[j * n + i] = 0.0;
                a[i * n + j] = 0.0;
            }
        }
    } else {
        for i in 0..n {
            d[i] = a[i * n + i];
        }
    }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix.
/// Eigenvalues land in `d`; with `z`, its columns are rotated into
/// eigenvectors.
fn tqli(d: &mut [f64], e: &mut [f64], n: usize, mut z: Option<&mut [f64]>) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(Error::Invalid("tridiagonal QL failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zm) = z.as_deref_mut() {
                    for k in 0..n {
                        f = zm[k * n + (i + 1)];
                        zm[k * n + (i + 1)] = s * zm[k * n + i] + c * f;
                        zm[k * n + i] = c * zm[k * n + i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Real symmetric embedding [[X, -Y], [Y, X]] of a Hermitian A = X + iY.
/// The embedding is symmetrized, which amounts to taking the Hermitian
/// part of A.
fn double_embed(a: &ComplexMatrix) -> Vec<f64> {
    let n = a.rows();
    let m = 2 * n;
    let mut out = vec![0.0f64; m * m];
    for i in 0..n {
        for j in 0..n {
            let x = 0.5 * (a[(i, j)].re + a[(j, i)].re);
            let y = 0.5 * (a[(i, j)].im - a[(j, i)].im);
            out[i * m + j] = x;
            out[(i + n) * m + (j + n)] = x;
            out[i * m + (j + n)] = -y;
            out[(i + n) * m + j] = y;
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigh_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::NotHermitian);
    }
    let n = a.rows();
    if n == 0 {
        return Ok(vec![]);
    }
    let m = 2 * n;
    let mut big = double_embed(a);
    let mut d = vec![0.0f64; m];
    let mut e = vec![0.0f64; m];
    tred2(&mut big, m, &mut d, &mut e, false);
    tqli(&mut d, &mut e, m, None)?;
    d.sort_by(|x, y| x.partial_cmp(y).expect("non-finite eigenvalue"));
    // eigenvalues come in exact pairs from the embedding
    Ok((0..n).map(|i| d[2 * i]).collect())
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and a
/// matrix whose columns are the corresponding orthonormal eigenvectors.
pub fn eigh(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !a.is_square() {
        return Err(Error::NotHermitian);
    }
    let n = a.rows();
    if n == 0 {
        return Ok((vec![], ComplexMatrix::zeros(0, 0)));
    }
    let m = 2 * n;
    let mut big = double_embed(a);
    let mut d = vec![0.0f64; m];
    let mut e = vec![0.0f64; m];
    tred2(&mut big, m, &mut d, &mut e, true);
    tqli(&mut d, &mut e, m, Some(&mut big))?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        d[i].partial_cmp(&d[j])
            .expect("non-finite eigenvalue")
            .then(i.cmp(&j))
    });

    // Each complex eigenvector appears twice among the real columns (as
    // u + iv and i(u + iv)); keep each direction once.
    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(n);
    for &col in &order {
        if vectors.len() == n {
            break;
        }
        let mut z: Vec<C64> = (0..n)
            .map(|k| C64::new(big[k * m + col], big[(k + n) * m + col]))
            .collect();
        for _pass in 0..2 {
            for prev in &vectors {
                let overlap: C64 = prev.iter().zip(&z).map(|(p, q)| p.conj() * q).sum();
                for (zi, pi) in z.iter_mut().zip(prev) {
                    *zi -= overlap * pi;
                }
            }
        }
        let norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for zi in z.iter_mut() {
                *zi /= norm;
            }
            values.push(d[col]);
            vectors.push(z);
        }
    }
    if vectors.len() != n {
        return Err(Error::Invalid("eigenvector extraction failed".into()));
    }
    let vmat = ComplexMatrix::from_fn(n, n, |i, j| vectors[j][i]);
    Ok((values, vmat))
}

/// Eigenvector for an eigenvalue already located by [`eigh_values`],
/// computed by inverse iteration with a fixed deterministic start.
pub fn min_eig_witness(a: &ComplexMatrix, eigenvalue: f64) -> Result<Vec<C64>> {
    let n = a.rows();
    let scale = a.max_abs().max(1.0);
    let shift = eigenvalue - 1e-10 * scale;
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= C64::new(shift, 0.0);
    }
    let lu = super::lu::Lu::factor(&shifted)?;
    let mut x = super::seeded_unit_vector(0x5eed_cafe, n);
    for _ in 0..4 {
        lu.solve_in_place(&mut x);
        let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Invalid("inverse iteration broke down".into()));
        }
        for xi in x.iter_mut() {
            *xi /= norm;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{seeded_hermitian, seeded_matrix};

    #[test]
    fn eigh_reconstructs_seeded_hermitian() {
        for n in [1usize, 2, 3, 7, 12] {
            let a = seeded_hermitian(1000 + n as u64, n, 1.0);
            let (vals, vecs) = eigh(&a).unwrap();
            // residual ||A v - lambda v||
            for j in 0..n {
                let v = vecs.column(j);
                let av = a.apply_vec(&v);
                let mut res = 0.0f64;
                for i in 0..n {
                    res = res.max((av[i] - C64::new(vals[j], 0.0) * v[i]).norm());
                }
                assert!(res < 1e-11, "residual {res} at n={n} j={j}");
            }
            // orthonormality
            let gram = &vecs.adjoint() * &vecs;
            assert!(gram.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-11);
            // values agree with the values-only path
            let vals2 = eigh_values(&a).unwrap();
            for (x, y) in vals.iter().zip(&vals2) {
                assert!((x - y).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn eigh_known_2x2() {
        // [[0, -i], [i, 0]] has eigenvalues -1, 1.
        let mut a = ComplexMatrix::zeros(2, 2);
        a[(0, 1)] = C64::new(0.0, -1.0);
        a[(1, 0)] = C64::new(0.0, 1.0);
        let vals = eigh_values(&a).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_handles_degenerate_spectrum() {
        // I (+) rank-one: eigenvalues {1, 1, 1, 2} with a 3-fold cluster.
        let v = seeded_matrix(9, 4, 1, 1.0);
        let nv = v.norm_fro();
        let v = v.scale_re(1.0 / nv);
        let proj = &v * &v.adjoint();
        let a = &ComplexMatrix::identity(4) + &proj;
        let (vals, vecs) = eigh(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        assert!((vals[3] - 2.0).abs() < 1e-12);
        let gram = &vecs.adjoint() * &vecs;
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-11);
    }

    #[test]
    fn eigh_is_bitwise_deterministic() {
        let a = seeded_hermitian(42, 9, 2.0);
        let (v1, m1) = eigh(&a).unwrap();
        let (v2, m2) = eigh(&a).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn witness_matches_min_eigenvalue() {
        let a = seeded_hermitian(77, 8, 1.0);
        let vals = eigh_values(&a).unwrap();
        let w = min_eig_witness(&a, vals[0]).unwrap();
        let aw = a.apply_vec(&w);
        let mut res = 0.0f64;
        for i in 0..8 {
            res = res.max((aw[i] - C64::new(vals[0], 0.0) * w[i]).norm());
        }
        assert!(res < 1e-9, "witness residual {res}");
    }
}
