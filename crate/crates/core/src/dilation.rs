//! Dilation of a conditionally completely positive germ.
//!
//! A germ with positive dissipation form factors as
//!     flat(L) J(B) L = [germ block of B]
//! through a unital representation J on the pseudo-Hilbert space
//! E = H (+) H_aux (+) H with indefinite metric G. Two constructions are
//! provided: the explicit spatial one (H_aux = H tensor C^r, j(B) = B on
//! each block) and the Kolmogorov factorization of the dissipation Gram
//! matrix. They are cross-validated by the same verification gate.

use crate::generator::{dissipation_psd_check, dissipator, GermMatrix};
use crate::linalg::{eigh, seeded_matrix, ComplexMatrix, C64};
use crate::model::ModelSpec;
use crate::{Error, Result};

/// Indefinite metric G = [[0,0,I],[0,I_aux,0],[I,0,D]] on H (+) H_aux (+) H
/// and its closed-form inverse.
#[derive(Clone, Debug)]
pub struct PseudoMetric {
    pub n: usize,
    pub dim_aux: usize,
    pub g: ComplexMatrix,
    pub g_inv: ComplexMatrix,
}

impl PseudoMetric {
    pub fn new(n: usize, dim_aux: usize, defect: &ComplexMatrix) -> Self {
        let dim = 2 * n + dim_aux;
        let id = ComplexMatrix::identity(n);
        let mut g = ComplexMatrix::zeros(dim, dim);
        g.set_block(0, n + dim_aux, &id);
        g.set_block(n + dim_aux, 0, &id);
        g.set_block(n, n, &ComplexMatrix::identity(dim_aux));
        g.set_block(n + dim_aux, n + dim_aux, defect);
        let mut g_inv = ComplexMatrix::zeros(dim, dim);
        g_inv.set_block(0, 0, &-defect);
        g_inv.set_block(0, n + dim_aux, &id);
        g_inv.set_block(n + dim_aux, 0, &id);
        g_inv.set_block(n, n, &ComplexMatrix::identity(dim_aux));
        Self {
            n,
            dim_aux,
            g,
            g_inv,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n + self.dim_aux
    }

    /// Indefinite inner product (xi | eta) = xi^dagger G eta.
    pub fn pairing(&self, xi: &[C64], eta: &[C64]) -> C64 {
        let geta = self.g.apply_vec(eta);
        xi.iter().zip(&geta).map(|(a, b)| a.conj() * b).sum()
    }
}

/// The maps (j, k, l) with the channel operators realizing a germ.
/// Linear maps on M_n are stored through their images on matrix units.
#[derive(Clone, Debug)]
pub struct DilationTriple {
    pub n: usize,
    pub d: usize,
    /// Dimension of the auxiliary space H_aux.
    pub dim_aux: usize,
    /// j(E_pq), row-major over (p, q); dim_aux x dim_aux each.
    pub j_units: Vec<ComplexMatrix>,
    /// k(E_pq): dim_aux x n each.
    pub k_units: Vec<ComplexMatrix>,
    /// l(E_pq): n x n each.
    pub l_units: Vec<ComplexMatrix>,
    /// Channel operators L_aux[n]: dim_aux x n.
    pub l_aux: Vec<ComplexMatrix>,
    /// Channel operators L_minus[n]: n x n.
    pub l_minus: Vec<ComplexMatrix>,
    /// D = gamma(I).
    pub defect: ComplexMatrix,
    /// Hamiltonian, present only for the explicit construction.
    pub hamiltonian: Option<ComplexMatrix>,
}

fn combine_units(units: &[ComplexMatrix], b: &ComplexMatrix) -> ComplexMatrix {
    let n = b.rows();
    let (rows, cols) = (units[0].rows(), units[0].cols());
    let mut acc = ComplexMatrix::zeros(rows, cols);
    for p in 0..n {
        for q in 0..n {
            let c = b[(p, q)];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            acc = &acc + &units[p * n + q].scale(c);
        }
    }
    acc
}

impl DilationTriple {
    pub fn rep(&self, b: &ComplexMatrix) -> ComplexMatrix {
        combine_units(&self.j_units, b)
    }

    pub fn cocycle(&self, b: &ComplexMatrix) -> ComplexMatrix {
        combine_units(&self.k_units, b)
    }

    /// k*(B) = k(B')'.
    pub fn cocycle_star(&self, b: &ComplexMatrix) -> ComplexMatrix {
        self.cocycle(&b.adjoint()).adjoint()
    }

    pub fn coboundary(&self, b: &ComplexMatrix) -> ComplexMatrix {
        combine_units(&self.l_units, b)
    }

    /// Residuals of the defining identities over seeded pairs:
    /// representation (multiplicative, unital, dagger), Leibniz for k,
    /// coboundary for l and the adjoint relation l(B')' = l(B) + [D, B].
    pub fn invariant_residuals(&self, samples: usize) -> TripleResiduals {
        let n = self.n;
        let mut rep = 0.0f64;
        let mut leibniz = 0.0f64;
        let mut coboundary = 0.0f64;
        let mut adjoint = 0.0f64;

        let id = ComplexMatrix::identity(n);
        rep = rep.max(
            self.rep(&id)
                .max_abs_diff(&ComplexMatrix::identity(self.dim_aux)),
        );
        for s in 0..samples {
            let x = seeded_matrix(0xd11a + 2 * s as u64, n, n, 1.0);
            let z = seeded_matrix(0xd11b + 2 * s as u64, n, n, 1.0);
            let xz = &x * &z;
            rep = rep.max(self.rep(&xz).max_abs_diff(&(&self.rep(&x) * &self.rep(&z))));
            rep = rep.max(self.rep(&x.adjoint()).max_abs_diff(&self.rep(&x).adjoint()));
            leibniz =
                leibniz.max(self.cocycle(&xz).max_abs_diff(
                    &(&(&self.rep(&x) * &self.cocycle(&z)) + &(&self.cocycle(&x) * &z)),
                ));
            let expected = &(&(&x * &self.coboundary(&z)) + &(&self.coboundary(&x) * &z))
                + &(&self.cocycle_star(&x) * &self.cocycle(&z));
            coboundary = coboundary.max(self.coboundary(&xz).max_abs_diff(&expected));
            let lstar = self.coboundary(&x.adjoint()).adjoint();
            let expected = &self.coboundary(&x) + &crate::linalg::commutator(&self.defect, &x);
            adjoint = adjoint.max(lstar.max_abs_diff(&expected));
        }
        TripleResiduals {
            rep,
            leibniz,
            coboundary,
            adjoint,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TripleResiduals {
    pub rep: f64,
    pub leibniz: f64,
    pub coboundary: f64,
    pub adjoint: f64,
}

impl TripleResiduals {
    pub fn max(&self) -> f64 {
        self.rep
            .max(self.leibniz)
            .max(self.coboundary)
            .max(self.adjoint)
    }
}

/// Explicit spatial dilation: H_aux = H tensor C^r, j(B) = B on each of the
/// r blocks, L the stacked coupling column, k(B) = j(B)L - LB,
/// l(B) = (1/2)(L'k(B) + k*(B)L + [B, D]) + i[H, B].
pub fn explicit_dilate(model: &ModelSpec) -> DilationTriple {
    let n = model.n;
    let d = model.d;
    let r = model.r;
    let dim_aux = n * r;

    let stack = |ops: &[ComplexMatrix]| -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(dim_aux, n);
        for (i, op) in ops.iter().enumerate() {
            out.set_block(i * n, 0, op);
        }
        out
    };
    let l_col = stack(&model.coupling);
    let rep_of = |b: &ComplexMatrix| -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(dim_aux, dim_aux);
        for i in 0..r {
            out.set_block(i * n, i * n, b);
        }
        out
    };

    let defect = model.defect.clone();
    let h = model.hamiltonian.clone();
    let mut j_units = Vec::with_capacity(n * n);
    let mut k_units = Vec::with_capacity(n * n);
    let mut l_units = Vec::with_capacity(n * n);
    for p in 0..n {
        for q in 0..n {
            let b = ComplexMatrix::unit(n, p, q);
            let jb = rep_of(&b);
            let kb = &(&jb * &l_col) - &(&l_col * &b);
            // k*(B) = L' j(B) - B L'
            let kstar = &(&l_col.adjoint() * &jb) - &(&b * &l_col.adjoint());
            let lb = &(&(&(&l_col.adjoint() * &kb) + &(&kstar * &l_col))
                + &crate::linalg::commutator(&b, &defect))
                .scale_re(0.5)
                + &crate::linalg::commutator(&h, &b).scale(C64::new(0.0, 1.0));
            j_units.push(jb);
            k_units.push(kb);
            l_units.push(lb);
        }
    }

    let l_aux: Vec<ComplexMatrix> = (0..d)
        .map(|ch| stack(&model.exchange_coupling[ch]))
        .collect();
    // gamma_n(B) = k*(B) L_aux_n + B L_minus_n requires
    // L_minus_n = L' L_aux_n - K_n (zero under the default closure).
    let l_minus: Vec<ComplexMatrix> = (0..d)
        .map(|ch| &(&l_col.adjoint() * &l_aux[ch]) - &model.noise_drift[ch])
        .collect();

    DilationTriple {
        n,
        d,
        dim_aux,
        j_units,
        k_units,
        l_units,
        l_aux,
        l_minus,
        defect,
        hamiltonian: Some(h),
    }
}

/// Kolmogorov dilation from the dissipation Gram matrix.
///
/// The Gram of Delta over the matrix units acting on H (+) H^bullet is
/// eigendecomposed; eigenvalues at most `tol` times the largest are
/// discarded and the rest define H_aux and the factor maps. j is defined
/// on the factor's range by the structural formula and extended by least
/// squares; the extension residual must stay below `tol`.
pub fn kolmogorov_dilate(germ: &GermMatrix, tol: f64) -> Result<DilationTriple> {
    let n = germ.n;
    let d = germ.d;
    let w = n * (1 + d);
    let nf = n * n;
    let big = nf * w;

    let psd = dissipation_psd_check(germ, tol)?;
    if !psd.is_psd {
        return Err(Error::NotConditionallyPositive);
    }

    let mut gram = ComplexMatrix::zeros(big, big);
    let mut units = Vec::with_capacity(nf);
    for p in 0..n {
        for q in 0..n {
            units.push(ComplexMatrix::unit(n, p, q));
        }
    }
    for (k, x) in units.iter().enumerate() {
        for (l, z) in units.iter().enumerate() {
            let delta = dissipator(germ, x, z)?;
            for a in 0..w {
                for b in 0..w {
                    gram[(k * w + a, l * w + b)] = delta.matrix[(a, b)];
                }
            }
        }
    }
    let gram = gram.hermitian_part();
    let (vals, vecs) = eigh(&gram)?;
    let max_eig = vals.last().copied().unwrap_or(0.0).max(0.0);
    if vals.first().copied().unwrap_or(0.0) < -tol * max_eig.max(1.0) {
        return Err(Error::NotConditionallyPositive);
    }
    let kept: Vec<usize> = (0..big).filter(|&i| vals[i] > tol * max_eig).collect();
    let rank = kept.len();

    // factor W: rank x big with W' W = Gram (up to the cutoff)
    let mut factor = ComplexMatrix::zeros(rank, big);
    for (row, &idx) in kept.iter().enumerate() {
        let scale = vals[idx].sqrt();
        for c in 0..big {
            factor[(row, c)] = vecs[(c, idx)].conj() * scale;
        }
    }

    // combined factor maps k_comb(E_pq): rank x w
    let k_comb: Vec<ComplexMatrix> = (0..nf).map(|k| factor.block(0, k * w, rank, w)).collect();
    let k_units: Vec<ComplexMatrix> = k_comb.iter().map(|m| m.block(0, 0, rank, n)).collect();
    let k_aux: Vec<ComplexMatrix> = k_comb.iter().map(|m| m.block(0, n, rank, n * d)).collect();

    // j(B) on the range of the factor:
    //   j(B) [k(Z) eta + k_aux(Z) eta_aux] = k(BZ) eta - k(B) Z eta + k_aux(BZ) eta_aux
    // solved in least squares through the spectral pseudo-inverse of W.
    let wt = factor.adjoint(); // big x rank
    let mut j_units = Vec::with_capacity(nf);
    let mut residual = 0.0f64;
    for u in 0..n {
        for v in 0..n {
            let mut target = ComplexMatrix::zeros(rank, big);
            for rr in 0..n {
                for s in 0..n {
                    let kcol = rr * n + s;
                    // E_uv E_rs = delta_vr E_us
                    let prod_idx = if v == rr { Some(u * n + s) } else { None };
                    for bcomp in 0..w {
                        for row in 0..rank {
                            let mut val = C64::new(0.0, 0.0);
                            if let Some(pi) = prod_idx {
                                val = k_comb[pi][(row, bcomp)];
                            }
                            // correction -k(E_uv) (E_rs e_b) = -delta_{s b} k(E_uv) e_r
                            if bcomp < n && s == bcomp {
                                val -= k_units[u * n + v][(row, rr)];
                            }
                            target[(row, kcol * w + bcomp)] = val;
                        }
                    }
                }
            }
            // j = T W' diag(1/lambda)
            let mut j = &target * &wt;
            for (col, &idx) in kept.iter().enumerate() {
                let inv = 1.0 / vals[idx];
                for row in 0..rank {
                    let t = j[(row, col)] * inv;
                    j[(row, col)] = t;
                }
            }
            residual = residual.max((&j * &factor).max_abs_diff(&target) / (1.0 + max_eig));
            j_units.push(j);
        }
    }
    if residual >= tol {
        return Err(Error::RepresentationIllDefined);
    }

    // L_aux_n = k_aux(I) restricted to channel n; L_minus_n = gamma_n(I)
    let mut kaux_identity = ComplexMatrix::zeros(rank, n * d);
    for p in 0..n {
        kaux_identity = &kaux_identity + &k_aux[p * n + p];
    }
    let l_aux: Vec<ComplexMatrix> = (0..d)
        .map(|ch| kaux_identity.block(0, ch * n, rank, n))
        .collect();
    let id = ComplexMatrix::identity(n);
    let l_minus: Vec<ComplexMatrix> = (0..d).map(|ch| germ.gamma_ann(ch, &id)).collect();
    let defect = germ.gamma(&id);
    // l(B) = gamma(B) - D B
    let l_units: Vec<ComplexMatrix> = units
        .iter()
        .map(|b| &germ.gamma(b) - &(&defect * b))
        .collect();

    Ok(DilationTriple {
        n,
        d,
        dim_aux: rank,
        j_units,
        k_units,
        l_units,
        l_aux,
        l_minus,
        defect,
        hamiltonian: None,
    })
}

/// Block representation J(B) = [[B, k*(B), l(B)], [0, j(B), k(B)], [0, 0, B]]
/// on E = H (+) H_aux (+) H, with the channel operator L and metric G.
#[derive(Clone, Debug)]
pub struct BlockRep {
    pub triple: DilationTriple,
    pub metric: PseudoMetric,
}

pub fn build_block_rep(triple: DilationTriple) -> BlockRep {
    let metric = PseudoMetric::new(triple.n, triple.dim_aux, &triple.defect);
    BlockRep { triple, metric }
}

impl BlockRep {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Assemble J(B).
    pub fn rep(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let n = self.triple.n;
        let na = self.triple.dim_aux;
        let mut out = ComplexMatrix::zeros(self.dim(), self.dim());
        out.set_block(0, 0, b);
        out.set_block(0, n, &self.triple.cocycle_star(b));
        out.set_block(0, n + na, &self.triple.coboundary(b));
        out.set_block(n, n, &self.triple.rep(b));
        out.set_block(n, n + na, &self.triple.cocycle(b));
        out.set_block(n + na, n + na, b);
        out
    }

    /// The column operator L: H (+) H^bullet -> E with H components
    /// (0, 0, I) and channel components (L_minus_n, L_aux_n, 0).
    pub fn l_operator(&self) -> ComplexMatrix {
        let n = self.triple.n;
        let na = self.triple.dim_aux;
        let d = self.triple.d;
        let mut out = ComplexMatrix::zeros(self.dim(), n * (1 + d));
        out.set_block(n + na, 0, &ComplexMatrix::identity(n));
        for ch in 0..d {
            out.set_block(0, n * (1 + ch), &self.triple.l_minus[ch]);
            out.set_block(n, n * (1 + ch), &self.triple.l_aux[ch]);
        }
        out
    }

    /// flat(A) = G^{-1} A' G for square operators on E.
    pub fn flat(&self, a: &ComplexMatrix) -> ComplexMatrix {
        &(&self.metric.g_inv * &a.adjoint()) * &self.metric.g
    }

    /// flat of the column operator: L_flat = L' G, mapping E back to
    /// H (+) H^bullet.
    pub fn l_flat(&self) -> ComplexMatrix {
        &self.l_operator().adjoint() * &self.metric.g
    }
}

/// Verification report for the dilation identity.
#[derive(Clone, Copy, Debug)]
pub struct DilationReport {
    /// Max deviation of flat(L) J(B) L from the germ block over all samples.
    pub max_deviation: f64,
    /// Max deviation between the full pseudo-Hilbert product and the direct
    /// blockwise assembly of the same quantity.
    pub path_agreement: f64,
    pub samples: usize,
    pub tol: f64,
    pub passes: bool,
}

/// Check flat(L) J(B) L = [germ block of B] on seeded operators, through two
/// independent assembly routes: the full product in E, and the closed-form
/// blocks (l + DB, k* L_aux + B L_minus; L_aux' k + L_minus' B, L_aux' j L_aux).
pub fn verify_dilation(
    germ: &GermMatrix,
    rep: &BlockRep,
    samples: usize,
    tol: f64,
) -> DilationReport {
    let n = germ.n;
    let d = germ.d;
    let lop = rep.l_operator();
    let lflat = rep.l_flat();
    let mut max_deviation = 0.0f64;
    let mut path_agreement = 0.0f64;
    for s in 0..samples {
        let b = seeded_matrix(0xab5_0000 + s as u64, n, n, 1.0);
        let target = germ.block_apply(&b);

        // route 1: full product in the pseudo-Hilbert space
        let full = &(&lflat * &rep.rep(&b)) * &lop;

        // route 2: blockwise closed form
        let mut direct = ComplexMatrix::zeros(n * (1 + d), n * (1 + d));
        let corner = &rep.triple.coboundary(&b) + &(&rep.triple.defect * &b);
        direct.set_block(0, 0, &corner);
        let kstar = rep.triple.cocycle_star(&b);
        let kb = rep.triple.cocycle(&b);
        let jb = rep.triple.rep(&b);
        for ch in 0..d {
            let top = &(&kstar * &rep.triple.l_aux[ch]) + &(&b * &rep.triple.l_minus[ch]);
            direct.set_block(0, n * (1 + ch), &top);
            let left = &(&rep.triple.l_aux[ch].adjoint() * &kb)
                + &(&rep.triple.l_minus[ch].adjoint() * &b);
            direct.set_block(n * (1 + ch), 0, &left);
            for ch2 in 0..d {
                let inner = &(&rep.triple.l_aux[ch].adjoint() * &jb) * &rep.triple.l_aux[ch2];
                direct.set_block(n * (1 + ch), n * (1 + ch2), &inner);
            }
        }

        max_deviation = max_deviation.max(full.max_abs_diff(&target));
        max_deviation = max_deviation.max(direct.max_abs_diff(&target));
        path_agreement = path_agreement.max(full.max_abs_diff(&direct));
    }
    DilationReport {
        max_deviation,
        path_agreement,
        samples,
        tol,
        passes: max_deviation < tol,
    }
}
