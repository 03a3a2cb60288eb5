//! Symbolic algebra of quantum Ito increments.
//!
//! An increment dL(a) is a linear combination of the canonical integrators
//! (time, annihilation, creation, exchange) encoded by a (d+2) x (d+2)
//! coefficient matrix over the index set (-, 1..d, +), in that order. The
//! "+" row and "-" column are identically zero. Products of increments are
//! realized as plain matrix products of the coefficient matrices in this
//! orientation; the exhaustive d = 1 product-table test is the normative
//! anchor for that choice, since the product formula in the literature is
//! written in an index convention that is ambiguous up to transposition.

use num_complex::Complex64;

use crate::linalg::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Canonical increment kinds; channel indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanonicalKind {
    Time,
    Annihilate(usize),
    Create(usize),
    Exchange(usize, usize),
}

/// Linear combination of quantum Ito increments for `d` noise channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ItoElement {
    d: usize,
    coeff: ComplexMatrix,
}

/// Minkowski metric g with 1 on the (-,+) and (+,-) corners and the
/// identity on the middle block; g is Hermitian and equals its inverse.
#[derive(Clone, Debug)]
pub struct MinkowskiMetric {
    d: usize,
    g: ComplexMatrix,
}

impl MinkowskiMetric {
    pub fn new(d: usize) -> Self {
        let k = d + 2;
        let mut g = ComplexMatrix::zeros(k, k);
        g[(0, k - 1)] = C64::new(1.0, 0.0);
        g[(k - 1, 0)] = C64::new(1.0, 0.0);
        for m in 1..=d {
            g[(m, m)] = C64::new(1.0, 0.0);
        }
        Self { d, g }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.g
    }
}

impl ItoElement {
    pub fn zero(d: usize) -> Self {
        Self {
            d,
            coeff: ComplexMatrix::zeros(d + 2, d + 2),
        }
    }

    /// Build from a raw coefficient matrix, enforcing the zero "+" row and
    /// zero "-" column.
    pub fn from_coeff(d: usize, coeff: ComplexMatrix) -> Result<Self> {
        let k = d + 2;
        if coeff.rows() != k || coeff.cols() != k {
            return Err(Error::ShapeMismatch(format!(
                "ItoElement expects {k}x{k} coefficients"
            )));
        }
        for j in 0..k {
            if coeff[(k - 1, j)].norm() != 0.0 {
                return Err(Error::Invalid("nonzero '+' row in Ito coefficients".into()));
            }
        }
        for i in 0..k {
            if coeff[(i, 0)].norm() != 0.0 {
                return Err(Error::Invalid(
                    "nonzero '-' column in Ito coefficients".into(),
                ));
            }
        }
        Ok(Self { d, coeff })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coeff(&self) -> &ComplexMatrix {
        &self.coeff
    }

    /// Entry of the time slot: row "-", column "+".
    fn time_slot(&self) -> (usize, usize) {
        (0, self.d + 1)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::ShapeMismatch("Ito dimension mismatch".into()));
        }
        Ok(Self {
            d: self.d,
            coeff: &self.coeff + &other.coeff,
        })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            d: self.d,
            coeff: self.coeff.scale(s),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeff.max_abs_diff(&other.coeff)
    }
}

/// Single-entry canonical increment.
///
/// Placements: time at (-, +); annihilate(n) at (-, n); create(m) at
/// (m, +); exchange(m, n) at (m, n). These are the unique single-entry
/// assignments that reproduce the multiplication table under the plain
/// matrix product in `ito_mul`.
pub fn canonical(d: usize, kind: CanonicalKind) -> Result<ItoElement> {
    let check = |idx: usize| -> Result<()> {
        if idx == 0 || idx > d {
            Err(Error::IndexOutOfRange(format!("channel {idx} for d={d}")))
        } else {
            Ok(())
        }
    };
    let k = d + 2;
    let mut coeff = ComplexMatrix::zeros(k, k);
    match kind {
        CanonicalKind::Time => coeff[(0, k - 1)] = C64::new(1.0, 0.0),
        CanonicalKind::Annihilate(n) => {
            check(n)?;
            coeff[(0, n)] = C64::new(1.0, 0.0);
        }
        CanonicalKind::Create(m) => {
            check(m)?;
            coeff[(m, k - 1)] = C64::new(1.0, 0.0);
        }
        CanonicalKind::Exchange(m, n) => {
            check(m)?;
            check(n)?;
            coeff[(m, n)] = C64::new(1.0, 0.0);
        }
    }
    Ok(ItoElement { d, coeff })
}

/// Product increment dL(a) dL(b); plain matrix product of the coefficient
/// matrices. The zero "+" row and "-" column make the middle-index
/// contraction of the multiplication table automatic.
pub fn ito_mul(a: &ItoElement, b: &ItoElement) -> Result<ItoElement> {
    if a.d != b.d {
        return Err(Error::ShapeMismatch("Ito dimension mismatch".into()));
    }
    Ok(ItoElement {
        d: a.d,
        coeff: &a.coeff * &b.coeff,
    })
}

/// Pseudo-Hermitian involution: (a_flat)^mu_nu = conj(a^{-nu}_{-mu}) with
/// -(-) = +, -(+) = -, and middle indices fixed.
pub fn flat(a: &ItoElement) -> ItoElement {
    let d = a.d;
    let k = d + 2;
    let reflect = |i: usize| -> usize {
        if i == 0 {
            k - 1
        } else if i == k - 1 {
            0
        } else {
            i
        }
    };
    let coeff = ComplexMatrix::from_fn(k, k, |mu, nu| a.coeff[(reflect(nu), reflect(mu))].conj());
    ItoElement { d, coeff }
}

/// Same involution computed through the Minkowski metric: g a^dagger g.
pub fn flat_via_metric(a: &ItoElement) -> ItoElement {
    let g = MinkowskiMetric::new(a.d);
    ItoElement {
        d: a.d,
        coeff: &(g.matrix() * &a.coeff.adjoint()) * g.matrix(),
    }
}

/// Vacuum expectation per unit dt: the coefficient of the time increment.
pub fn vacuum_mean(a: &ItoElement) -> C64 {
    let (i, j) = a.time_slot();
    a.coeff[(i, j)]
}

/// Wiener embedding Q = create(1) + annihilate(1), d = 1.
pub fn wiener_q() -> ItoElement {
    let c = canonical(1, CanonicalKind::Create(1)).expect("d=1 canonical");
    let a = canonical(1, CanonicalKind::Annihilate(1)).expect("d=1 canonical");
    c.add(&a).expect("same d")
}

/// Compensated Poisson embedding P = exchange(1,1) + i create(1) - i annihilate(1), d = 1.
pub fn poisson_p() -> ItoElement {
    let x = canonical(1, CanonicalKind::Exchange(1, 1)).expect("d=1 canonical");
    let c = canonical(1, CanonicalKind::Create(1)).expect("d=1 canonical");
    let a = canonical(1, CanonicalKind::Annihilate(1)).expect("d=1 canonical");
    x.add(&c.scale(Complex64::new(0.0, 1.0)))
        .and_then(|e| e.add(&a.scale(Complex64::new(0.0, -1.0))))
        .expect("same d")
}

/// Deterministic pseudo-random element respecting the structural zeros.
pub fn seeded_element(d: usize, seed: u64) -> ItoElement {
    let k = d + 2;
    let raw = crate::linalg::seeded_matrix(seed, k, k, 1.0);
    let coeff = ComplexMatrix::from_fn(k, k, |i, j| {
        if i == k - 1 || j == 0 {
            C64::new(0.0, 0.0)
        } else {
            raw[(i, j)]
        }
    });
    ItoElement { d, coeff }
}

/// All canonical kinds for dimension `d`, in a fixed order.
pub fn canonical_kinds(d: usize) -> Vec<CanonicalKind> {
    let mut kinds = vec![CanonicalKind::Time];
    for n in 1..=d {
        kinds.push(CanonicalKind::Annihilate(n));
    }
    for m in 1..=d {
        kinds.push(CanonicalKind::Create(m));
    }
    for m in 1..=d {
        for n in 1..=d {
            kinds.push(CanonicalKind::Exchange(m, n));
        }
    }
    kinds
}

/// Short display name used by the table printer.
pub fn kind_name(kind: CanonicalKind) -> String {
    match kind {
        CanonicalKind::Time => "dt".into(),
        CanonicalKind::Annihilate(n) => format!("dA({n})"),
        CanonicalKind::Create(m) => format!("dA+({m})"),
        CanonicalKind::Exchange(m, n) => format!("dN({m},{n})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn canonical_placements() {
        let t = canonical(1, CanonicalKind::Time).unwrap();
        assert_eq!(t.coeff()[(0, 2)], one());
        assert_eq!(t.coeff().norm_fro(), 1.0);

        let x = canonical(1, CanonicalKind::Exchange(1, 1)).unwrap();
        assert_eq!(x.coeff()[(1, 1)], one());

        assert!(canonical(1, CanonicalKind::Annihilate(2)).is_err());
        assert!(canonical(2, CanonicalKind::Exchange(3, 1)).is_err());
    }

    /// All 16 ordered products of the d = 1 canonical increments, exactly.
    #[test]
    fn product_table_d1_exhaustive() {
        let t = canonical(1, CanonicalKind::Time).unwrap();
        let a = canonical(1, CanonicalKind::Annihilate(1)).unwrap();
        let c = canonical(1, CanonicalKind::Create(1)).unwrap();
        let x = canonical(1, CanonicalKind::Exchange(1, 1)).unwrap();
        let zero = ItoElement::zero(1);

        let table: Vec<(&ItoElement, &ItoElement, &ItoElement)> = vec![
            // nonzero products
            (&a, &c, &t), // dA dA+ = dt
            (&a, &x, &a), // dA dN = dA
            (&x, &c, &c), // dN dA+ = dA+
            (&x, &x, &x), // dN dN = dN
            // zero products
            (&t, &t, &zero),
            (&t, &a, &zero),
            (&t, &c, &zero),
            (&t, &x, &zero),
            (&a, &t, &zero),
            (&c, &t, &zero),
            (&x, &t, &zero),
            (&a, &a, &zero),
            (&c, &c, &zero),
            (&c, &a, &zero),
            (&c, &x, &zero),
            (&x, &a, &zero),
        ];
        assert_eq!(table.len(), 16);
        for (lhs, rhs, expect) in table {
            let prod = ito_mul(lhs, rhs).unwrap();
            assert_eq!(&prod, expect, "product mismatch");
        }
    }

    #[test]
    fn flat_examples() {
        let t = canonical(1, CanonicalKind::Time).unwrap();
        assert_eq!(flat(&t), t);

        let a = canonical(1, CanonicalKind::Annihilate(1)).unwrap();
        let c = canonical(1, CanonicalKind::Create(1)).unwrap();
        assert_eq!(flat(&a), c);

        // flat(i exch(1,2)) = -i exch(2,1) with d = 2
        let e12 = canonical(2, CanonicalKind::Exchange(1, 2))
            .unwrap()
            .scale(C64::new(0.0, 1.0));
        let e21 = canonical(2, CanonicalKind::Exchange(2, 1))
            .unwrap()
            .scale(C64::new(0.0, -1.0));
        assert_eq!(flat(&e12), e21);
    }

    #[test]
    fn flat_equals_metric_route() {
        for d in 1..=3usize {
            for seed in 0..20u64 {
                let a = seeded_element(d, seed * 7 + d as u64);
                assert!(flat(&a).max_abs_diff(&flat_via_metric(&a)) < 1e-14);
            }
        }
    }

    #[test]
    fn metric_is_involutive_and_hermitian() {
        for d in 1..=3usize {
            let g = MinkowskiMetric::new(d);
            let gg = g.matrix() * g.matrix();
            assert!(gg.max_abs_diff(&ComplexMatrix::identity(d + 2)) < 1e-15);
            assert!(g.matrix().hermiticity_residual() < 1e-15);
        }
    }

    #[test]
    fn vacuum_means() {
        assert_eq!(
            vacuum_mean(&canonical(1, CanonicalKind::Time).unwrap()),
            one()
        );
        assert_eq!(
            vacuum_mean(&canonical(1, CanonicalKind::Create(1)).unwrap()),
            C64::new(0.0, 0.0)
        );
        assert_eq!(vacuum_mean(&poisson_p()), C64::new(0.0, 0.0));
        assert_eq!(vacuum_mean(&wiener_q()), C64::new(0.0, 0.0));
    }

    #[test]
    fn classical_embeddings() {
        let t = canonical(1, CanonicalKind::Time).unwrap();
        let q = wiener_q();
        // (dQ)^2 = dt, exactly
        assert_eq!(ito_mul(&q, &q).unwrap(), t);

        let p = poisson_p();
        // (dP)^2 = dP + dt, exactly
        let expect = p.add(&t).unwrap();
        assert_eq!(ito_mul(&p, &p).unwrap(), expect);
    }

    /// dL(a)^dagger dL(a) = dL(a_flat a), coefficientwise, with the two flat
    /// routes (entrywise reflection vs metric conjugation) cross-checked.
    #[test]
    fn flat_identity_on_seeded_elements() {
        for d in 1..=3usize {
            for seed in 0..34u64 {
                let a = seeded_element(d, 1000 + seed * 13 + d as u64);
                let lhs = ito_mul(&flat(&a), &a).unwrap();
                let rhs = ito_mul(&flat_via_metric(&a), &a).unwrap();
                assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn involution_and_antihomomorphism() {
        for d in 1..=3usize {
            for seed in 0..10u64 {
                let a = seeded_element(d, 40 + seed);
                let b = seeded_element(d, 80 + seed);
                assert_eq!(flat(&flat(&a)), a);
                let lhs = flat(&ito_mul(&a, &b).unwrap());
                let rhs = ito_mul(&flat(&b), &flat(&a)).unwrap();
                assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn associativity_on_seeded_triples() {
        for d in 1..=3usize {
            for seed in 0..10u64 {
                let a = seeded_element(d, 11 + seed);
                let b = seeded_element(d, 22 + seed);
                let c = seeded_element(d, 33 + seed);
                let lhs = ito_mul(&ito_mul(&a, &b).unwrap(), &c).unwrap();
                let rhs = ito_mul(&a, &ito_mul(&b, &c).unwrap()).unwrap();
                assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            }
        }
    }
}
