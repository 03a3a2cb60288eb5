//! Germ matrices of quantum stochastic cocycles.
//!
//! The germ collects the structural maps of the stochastic equation: the
//! time block gamma = phi(B) - K'B - BK, annihilation blocks gamma_n,
//! creation blocks gamma^m and the completely positive exchange block
//! gamma^m_n(B) = sum_i L^i_m' B L^i_n. Conditional complete positivity of
//! the whole block map characterizes completely positive solutions; the
//! equivalent global positivity of the dissipation form gives a second,
//! independent test route.

use crate::linalg::{
    eigh_values, min_eig_witness, seeded_matrix, ComplexMatrix, Picture, SuperOperator, C64,
};
use crate::model::ModelSpec;
use crate::{Error, Result};

/// Block map of the stochastic equation coefficients; indices m, n run over
/// the noise channels 1..d.
#[derive(Clone, Debug)]
pub struct GermMatrix {
    pub n: usize,
    pub d: usize,
    /// gamma = gamma^-_+, the time block (equals the Heisenberg Lindblad map).
    time: SuperOperator,
    /// gamma_n = gamma^-_n, coefficients of the annihilation increments.
    ann: Vec<SuperOperator>,
    /// gamma^m = gamma^m_+, coefficients of the creation increments.
    cre: Vec<SuperOperator>,
    /// gamma^m_n, exchange blocks, indexed [m][n].
    exch: Vec<Vec<SuperOperator>>,
    /// D = gamma(I).
    pub defect: ComplexMatrix,
}

impl GermMatrix {
    pub fn gamma(&self, b: &ComplexMatrix) -> ComplexMatrix {
        self.time.apply(b)
    }

    pub fn gamma_ann(&self, n: usize, b: &ComplexMatrix) -> ComplexMatrix {
        self.ann[n].apply(b)
    }

    pub fn gamma_cre(&self, m: usize, b: &ComplexMatrix) -> ComplexMatrix {
        self.cre[m].apply(b)
    }

    pub fn gamma_exch(&self, m: usize, n: usize, b: &ComplexMatrix) -> ComplexMatrix {
        self.exch[m][n].apply(b)
    }

    pub fn time_superop(&self) -> &SuperOperator {
        &self.time
    }

    pub fn ann_superop(&self, n: usize) -> &SuperOperator {
        &self.ann[n]
    }

    pub fn cre_superop(&self, m: usize) -> &SuperOperator {
        &self.cre[m]
    }

    pub fn exch_superop(&self, m: usize, n: usize) -> &SuperOperator {
        &self.exch[m][n]
    }

    /// lambda^m_n = gamma^m_n - delta^m_n id, the equation coefficient of
    /// the exchange increments.
    pub fn lambda_exch_superop(&self, m: usize, n: usize) -> SuperOperator {
        if m == n {
            self.exch[m][n].sub(&SuperOperator::identity(self.n, Picture::Heisenberg))
        } else {
            self.exch[m][n].clone()
        }
    }

    /// Apply the whole (1+d) x (1+d) block map to one operator, laid out on
    /// H (+) H^bullet: row blocks (-, m), column blocks (+, n).
    pub fn block_apply(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let n = self.n;
        let d = self.d;
        let mut out = ComplexMatrix::zeros(n * (1 + d), n * (1 + d));
        out.set_block(0, 0, &self.gamma(b));
        for ch in 0..d {
            out.set_block(0, n * (1 + ch), &self.gamma_ann(ch, b));
            out.set_block(n * (1 + ch), 0, &self.gamma_cre(ch, b));
            for ch2 in 0..d {
                out.set_block(n * (1 + ch), n * (1 + ch2), &self.gamma_exch(ch, ch2, b));
            }
        }
        out
    }

    /// Max residual of the Hermitian block symmetry
    ///   gamma(B')' = gamma(B), gamma^n(B') = gamma_n(B)',
    ///   gamma^m_n(B') = gamma^n_m(B)'
    /// over seeded probes.
    pub fn hermitian_symmetry_residual(&self, samples: usize) -> f64 {
        let mut worst = 0.0f64;
        for s in 0..samples {
            let b = seeded_matrix(0xabc0 + s as u64, self.n, self.n, 1.0);
            let bh = b.adjoint();
            worst = worst.max(self.gamma(&bh).max_abs_diff(&self.gamma(&b).adjoint()));
            for m in 0..self.d {
                worst = worst.max(
                    self.gamma_cre(m, &bh)
                        .max_abs_diff(&self.gamma_ann(m, &b).adjoint()),
                );
                for n in 0..self.d {
                    worst = worst.max(
                        self.gamma_exch(m, n, &bh)
                            .max_abs_diff(&self.gamma_exch(n, m, &b).adjoint()),
                    );
                }
            }
        }
        worst
    }
}

fn germ_from_signs(model: &ModelSpec, signs: &[f64]) -> GermMatrix {
    let n = model.n;
    let d = model.d;
    let k_op = &model.drift;
    let k_dag = model.drift.adjoint();

    let kraus_sum =
        |b: &ComplexMatrix, left: &[ComplexMatrix], right: &[ComplexMatrix]| -> ComplexMatrix {
            let mut acc = ComplexMatrix::zeros(n, n);
            for i in 0..model.r {
                acc = &acc + &(&(&left[i].adjoint() * b) * &right[i]).scale_re(signs[i]);
            }
            acc
        };

    let time = SuperOperator::from_map(n, Picture::Heisenberg, |b| {
        let kraus = kraus_sum(b, &model.coupling, &model.coupling);
        &(&kraus - &(&k_dag * b)) - &(b * k_op)
    });
    let ann: Vec<SuperOperator> = (0..d)
        .map(|ch| {
            SuperOperator::from_map(n, Picture::Heisenberg, |b| {
                let kraus = kraus_sum(b, &model.coupling, &model.exchange_coupling[ch]);
                &kraus - &(b * &model.noise_drift[ch])
            })
        })
        .collect();
    let cre: Vec<SuperOperator> = (0..d)
        .map(|ch| {
            SuperOperator::from_map(n, Picture::Heisenberg, |b| {
                let kraus = kraus_sum(b, &model.exchange_coupling[ch], &model.coupling);
                &kraus - &(&model.noise_drift[ch].adjoint() * b)
            })
        })
        .collect();
    let exch: Vec<Vec<SuperOperator>> = (0..d)
        .map(|m| {
            (0..d)
                .map(|ch2| {
                    SuperOperator::from_map(n, Picture::Heisenberg, |b| {
                        kraus_sum(
                            b,
                            &model.exchange_coupling[m],
                            &model.exchange_coupling[ch2],
                        )
                    })
                })
                .collect()
        })
        .collect();

    let defect = time.apply(&ComplexMatrix::identity(n));
    GermMatrix {
        n,
        d,
        time,
        ann,
        cre,
        exch,
        defect,
    }
}

/// Germ of a structured model (Kraus data plus drifts).
pub fn build_germ(model: &ModelSpec) -> GermMatrix {
    germ_from_signs(model, &vec![1.0; model.r])
}

/// Germ with the contribution of one Kraus index negated in every
/// completely positive block; the drifts are kept, so conditional complete
/// positivity fails by a known margin. Negative-test generator.
pub fn corrupted_germ(model: &ModelSpec, kraus_index: usize) -> Result<GermMatrix> {
    if kraus_index >= model.r {
        return Err(Error::IndexOutOfRange(format!(
            "kraus index {kraus_index} for r={}",
            model.r
        )));
    }
    let mut signs = vec![1.0; model.r];
    signs[kraus_index] = -1.0;
    Ok(germ_from_signs(model, &signs))
}

/// Germ of the model, honoring the model's diagnostic `negate_kraus` hook.
pub fn model_germ(model: &ModelSpec) -> Result<GermMatrix> {
    match model.negate_kraus {
        Some(i) => corrupted_germ(model, i),
        None => Ok(build_germ(model)),
    }
}

/// Germ of the identity cocycle: exchange blocks are the identity map on
/// each channel, everything else zero. Realized as the isometric model with
/// the trivial channel rotation.
pub fn identity_germ(n: usize, d: usize) -> GermMatrix {
    build_germ(&ModelSpec::isometric(n, &ComplexMatrix::identity(d)))
}

/// Dissipator value Delta(X, Z): a (1+d) x (1+d) block matrix of n x n
/// operators on H (+) H^bullet, rows (-, m), columns (+, n).
#[derive(Clone, Debug)]
pub struct DissipatorForm {
    pub n: usize,
    pub d: usize,
    pub matrix: ComplexMatrix,
}

/// Assemble Delta(X, Z) from the germ:
///   Delta^m_n = gamma^m_n(X'Z)
///   Delta^-_n = gamma_n(X'Z) - X' gamma_n(Z)
///   Delta^m_+ = gamma^m(X'Z) - gamma^m(X') Z
///   Delta^-_+ = gamma(X'Z) - X' gamma(Z) - gamma(X') Z + X' D Z
pub fn dissipator(
    germ: &GermMatrix,
    x: &ComplexMatrix,
    z: &ComplexMatrix,
) -> Result<DissipatorForm> {
    let n = germ.n;
    if x.rows() != n || x.cols() != n || z.rows() != n || z.cols() != n {
        return Err(Error::ShapeMismatch(
            "dissipator arguments must be n x n".into(),
        ));
    }
    let d = germ.d;
    let xd = x.adjoint();
    let xz = &xd * z;
    let mut out = ComplexMatrix::zeros(n * (1 + d), n * (1 + d));
    let corner = &(&(&germ.gamma(&xz) - &(&xd * &germ.gamma(z))) - &(&germ.gamma(&xd) * z))
        + &(&(&xd * &germ.defect) * z);
    out.set_block(0, 0, &corner);
    for ch in 0..d {
        let top = &germ.gamma_ann(ch, &xz) - &(&xd * &germ.gamma_ann(ch, z));
        out.set_block(0, n * (1 + ch), &top);
        let left = &germ.gamma_cre(ch, &xz) - &(&germ.gamma_cre(ch, &xd) * z);
        out.set_block(n * (1 + ch), 0, &left);
        for ch2 in 0..d {
            out.set_block(n * (1 + ch), n * (1 + ch2), &germ.gamma_exch(ch, ch2, &xz));
        }
    }
    Ok(DissipatorForm { n, d, matrix: out })
}

#[derive(Clone, Debug)]
pub struct CcpReport {
    pub is_ccp: bool,
    pub min_eig: f64,
    /// Eigenvector of the projected form on failure, mapped back to the
    /// full family coordinates.
    pub witness: Option<Vec<C64>>,
}

/// Conditional complete positivity test over the matrix-unit family.
///
/// Builds the Hermitian form F[(k,a),(l,b)] = [germ block of B_k' B_l]_ab
/// with B_k the matrix units of M_n and free vectors in H (+) H^bullet,
/// projects onto the kernel of the constraint sum_k B_k eta_k^H = 0 and
/// eigenchecks the projection.
pub fn ccp_check(germ: &GermMatrix, tol: f64) -> Result<CcpReport> {
    let n = germ.n;
    let d = germ.d;
    let w = n * (1 + d); // per-family-element vector dimension
    let nf = n * n; // family size
    let big = nf * w;

    // germ blocks of all products E_pq' E_rs = delta_pr E_qs
    let mut unit_blocks = Vec::with_capacity(nf);
    for q in 0..n {
        for s in 0..n {
            unit_blocks.push(germ.block_apply(&ComplexMatrix::unit(n, q, s)));
        }
    }
    let mut f = ComplexMatrix::zeros(big, big);
    for p in 0..n {
        for q in 0..n {
            let k = p * n + q;
            for s in 0..n {
                let l = p * n + s; // r = p enforced by delta_pr
                let block = &unit_blocks[q * n + s];
                for a in 0..w {
                    for b in 0..w {
                        f[(k * w + a, l * w + b)] = block[(a, b)];
                    }
                }
            }
        }
    }
    let f = f.hermitian_part();

    // Orthonormal kernel basis of sum_k B_k eta_k^H = 0. Constraint row p
    // touches exactly the coordinates (k = (p,q), component q); on each such
    // n-coordinate group the kernel is spanned by the Helmert vectors, all
    // remaining coordinates are free.
    let mut basis: Vec<Vec<(usize, f64)>> = Vec::with_capacity(big - n);
    let constrained: Vec<Vec<usize>> = (0..n)
        .map(|p| (0..n).map(|q| (p * n + q) * w + q).collect())
        .collect();
    let mut is_constrained = vec![false; big];
    for group in &constrained {
        for &c in group {
            is_constrained[c] = true;
        }
    }
    for c in 0..big {
        if !is_constrained[c] {
            basis.push(vec![(c, 1.0)]);
        }
    }
    for group in &constrained {
        for j in 1..n {
            let norm = 1.0 / ((j * (j + 1)) as f64).sqrt();
            let mut v: Vec<(usize, f64)> = (0..j).map(|q| (group[q], norm)).collect();
            v.push((group[j], -(j as f64) * norm));
            basis.push(v);
        }
    }
    let kdim = basis.len();
    debug_assert_eq!(kdim, big - n);

    // projected form Q' F Q exploiting the sparse basis columns
    let mut fq = ComplexMatrix::zeros(big, kdim);
    for (col, v) in basis.iter().enumerate() {
        for &(c, wgt) in v {
            for rrow in 0..big {
                let t = f[(rrow, c)] * wgt;
                fq[(rrow, col)] += t;
            }
        }
    }
    let mut proj = ComplexMatrix::zeros(kdim, kdim);
    for (row, v) in basis.iter().enumerate() {
        for &(c, wgt) in v {
            for col in 0..kdim {
                let t = fq[(c, col)] * wgt;
                proj[(row, col)] += t;
            }
        }
    }
    let proj = proj.hermitian_part();

    let vals = eigh_values(&proj)?;
    let min_eig = vals.first().copied().unwrap_or(0.0);
    let is_ccp = min_eig >= -tol;
    let witness = if is_ccp {
        None
    } else {
        let wvec = min_eig_witness(&proj, min_eig)?;
        let mut full = vec![C64::new(0.0, 0.0); big];
        for (col, v) in basis.iter().enumerate() {
            for &(c, wgt) in v {
                full[c] += wvec[col] * wgt;
            }
        }
        Some(full)
    };
    Ok(CcpReport {
        is_ccp,
        min_eig,
        witness,
    })
}

#[derive(Clone, Debug)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eig: f64,
}

/// Global positivity of the dissipation form: Gram matrix of Delta over the
/// family {E_pq} plus the identity, free vectors in H (+) H^bullet.
pub fn dissipation_psd_check(germ: &GermMatrix, tol: f64) -> Result<PsdReport> {
    let n = germ.n;
    let d = germ.d;
    let w = n * (1 + d);
    let mut family: Vec<ComplexMatrix> = Vec::with_capacity(n * n + 1);
    for p in 0..n {
        for q in 0..n {
            family.push(ComplexMatrix::unit(n, p, q));
        }
    }
    family.push(ComplexMatrix::identity(n));
    let nf = family.len();
    let mut gram = ComplexMatrix::zeros(nf * w, nf * w);
    for (k, x) in family.iter().enumerate() {
        for (l, z) in family.iter().enumerate() {
            let delta = dissipator(germ, x, z)?;
            for a in 0..w {
                for b in 0..w {
                    gram[(k * w + a, l * w + b)] = delta.matrix[(a, b)];
                }
            }
        }
    }
    let gram = gram.hermitian_part();
    let vals = eigh_values(&gram)?;
    let min_eig = vals.first().copied().unwrap_or(0.0);
    Ok(PsdReport {
        is_psd: min_eig >= -tol,
        min_eig,
    })
}

/// Heisenberg and Schrodinger forms of the vacuum-averaged generator.
#[derive(Clone, Debug)]
pub struct LindbladPair {
    pub heisenberg: SuperOperator,
    pub schrodinger: SuperOperator,
}

/// L(B) = sum_i L^i' B L^i - K'B - BK and its trace-pairing adjoint
/// L*(rho) = sum_i L^i rho L^i' - K rho - rho K'.
pub fn lindblad(model: &ModelSpec) -> LindbladPair {
    let heisenberg = build_germ(model).time.clone();
    let schrodinger = heisenberg.trace_adjoint();
    LindbladPair {
        heisenberg,
        schrodinger,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilteringClass {
    Filtering,
    SubFiltering,
    Neither,
}

impl FilteringClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FilteringClass::Filtering => "filtering",
            FilteringClass::SubFiltering => "sub-filtering",
            FilteringClass::Neither => "neither",
        }
    }
}

fn classify_gap(gap: &ComplexMatrix, tol: f64) -> Result<FilteringClass> {
    let vals = eigh_values(&gap.hermitian_part())?;
    let min = vals.first().copied().unwrap_or(0.0);
    let max = vals.last().copied().unwrap_or(0.0);
    Ok(if min.abs() <= tol && max.abs() <= tol {
        FilteringClass::Filtering
    } else if min >= -tol {
        FilteringClass::SubFiltering
    } else {
        FilteringClass::Neither
    })
}

/// Martingale classification of a model: compares K + K' with phi(I).
pub fn classify_model(model: &ModelSpec) -> Result<FilteringClass> {
    let gap = &(&model.drift + &model.drift.adjoint()) - &model.phi_identity();
    classify_gap(&gap, 1e-10)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassicalTarget {
    Diffusive,
    Jump,
}

/// Classical SDE coefficients and the Heisenberg flow maps of the
/// single-noise unravelings.
#[derive(Clone, Debug)]
pub struct ClassicalCoeffs {
    pub target: ClassicalTarget,
    pub k: ComplexMatrix,
    pub l: ComplexMatrix,
    pub j: ComplexMatrix,
    /// Drift map B -> K'B + BK - L'BL.
    pub drift: SuperOperator,
    /// Noise map: diffusive B -> L'B + BL; jump B -> J'BJ - B.
    pub noise: SuperOperator,
    /// Quadratic map B -> L'BL, the coefficient of the squared increment.
    pub quadratic: SuperOperator,
    pub classification: FilteringClass,
}

/// Specialize to the classical diffusive or jump filtering equation.
/// For the diffusive target J must equal the identity (it may be omitted);
/// for the jump target J defaults to I + L and is checked when given.
pub fn specialize_classical(
    k: &ComplexMatrix,
    l: &ComplexMatrix,
    j: Option<&ComplexMatrix>,
    target: ClassicalTarget,
) -> Result<ClassicalCoeffs> {
    let n = k.rows();
    if !k.is_square() || !l.is_square() || l.rows() != n {
        return Err(Error::ShapeMismatch(
            "K and L must be square of equal dimension".into(),
        ));
    }
    let id = ComplexMatrix::identity(n);
    let j = match target {
        ClassicalTarget::Diffusive => {
            if let Some(jm) = j {
                if jm.max_abs_diff(&id) > 1e-10 {
                    return Err(Error::Invalid("diffusive requested with J != I".into()));
                }
            }
            id.clone()
        }
        ClassicalTarget::Jump => {
            let expected = &id + l;
            if let Some(jm) = j {
                if jm.max_abs_diff(&expected) > 1e-10 {
                    return Err(Error::Invalid("jump requested with J != I + L".into()));
                }
            }
            expected
        }
    };
    let kd = k.adjoint();
    let ld = l.adjoint();
    let drift = SuperOperator::from_map(n, Picture::Heisenberg, |b| {
        &(&(&kd * b) + &(b * k)) - &(&(&ld * b) * l)
    });
    let noise = match target {
        ClassicalTarget::Diffusive => {
            SuperOperator::from_map(n, Picture::Heisenberg, |b| &(&ld * b) + &(b * l))
        }
        ClassicalTarget::Jump => {
            SuperOperator::from_map(n, Picture::Heisenberg, |b| &(&(&j.adjoint() * b) * &j) - b)
        }
    };
    let quadratic = SuperOperator::from_map(n, Picture::Heisenberg, |b| &(&ld * b) * l);
    let ksum = k + &kd;
    let gap = &ksum - &(&ld * l);
    let classification = classify_gap(&gap, 1e-10)?;
    Ok(ClassicalCoeffs {
        target,
        k: k.clone(),
        l: l.clone(),
        j,
        drift,
        noise,
        quadratic,
        classification,
    })
}

/// Single-noise model whose germ carries the quantum form of the classical
/// unraveling: diffusive (J = I, L_+ = L = -K^-) or jump
/// (J = I + L, L_+ = iL = K^-).
pub fn classical_embedding_model(
    k: &ComplexMatrix,
    l: &ComplexMatrix,
    target: ClassicalTarget,
) -> Result<ModelSpec> {
    let n = k.rows();
    let id = ComplexMatrix::identity(n);
    let i_unit = C64::new(0.0, 1.0);
    let (coupling, exch, kn) = match target {
        ClassicalTarget::Diffusive => (l.clone(), id.clone(), -l),
        ClassicalTarget::Jump => (l.scale(i_unit), &id + l, l.scale(i_unit)),
    };
    // defect implied by the classical pair: D = L'L - K - K'
    let defect = &(&coupling.adjoint() * &coupling) - &(k + &k.adjoint());
    ModelSpec::new(
        n,
        1,
        1,
        ComplexMatrix::zeros(n, n),
        vec![coupling],
        vec![vec![exch]],
        Some(k.clone()),
        Some(vec![kn]),
        Some(defect),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_hermitian;

    fn sigma_minus() -> ComplexMatrix {
        ComplexMatrix::unit(2, 0, 1)
    }

    #[test]
    fn germ_of_amplitude_damping() {
        let model = ModelSpec::amplitude_damping();
        let germ = build_germ(&model);
        // K = diag(0, 1/2); gamma(B) = L'BL - K'B - BK
        let b = seeded_matrix(3, 2, 2, 1.0);
        let l = sigma_minus();
        let k = ComplexMatrix::diag(&[C64::new(0.0, 0.0), C64::new(0.5, 0.0)]);
        let expected = &(&(&l.adjoint() * &b) * &l) - &(&(&k.adjoint() * &b) + &(&b * &k));
        assert!(germ.gamma(&b).max_abs_diff(&expected) < 1e-13);
        // gamma(I) = D = 0
        assert!(germ.defect.max_abs() < 1e-13);
    }

    #[test]
    fn zero_model_germ() {
        let model = ModelSpec::new(
            2,
            1,
            1,
            ComplexMatrix::zeros(2, 2),
            vec![ComplexMatrix::zeros(2, 2)],
            vec![vec![ComplexMatrix::zeros(2, 2)]],
            None,
            None,
            None,
        )
        .unwrap();
        let germ = build_germ(&model);
        let b = seeded_matrix(5, 2, 2, 1.0);
        assert!(germ.gamma(&b).max_abs() < 1e-14);
        assert!(germ.gamma_exch(0, 0, &b).max_abs() < 1e-14);
        // lambda^m_n(B) = -B delta^m_n
        let lam = germ.lambda_exch_superop(0, 0);
        assert!(lam.apply(&b).max_abs_diff(&-&b) < 1e-14);
    }

    #[test]
    fn isometric_germ_annihilates_identity() {
        // unitary channel rotation
        let c = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let s = ComplexMatrix::from_rows(vec![vec![c, c], vec![c, -c]]).unwrap();
        let model = ModelSpec::isometric(2, &s);
        let germ = build_germ(&model);
        let id = ComplexMatrix::identity(2);
        assert!(germ.gamma(&id).max_abs() < 1e-13);
        for ch in 0..2 {
            assert!(germ.gamma_ann(ch, &id).max_abs() < 1e-13);
        }
        // exchange blocks reduce to delta^m_n id
        let b = seeded_matrix(9, 2, 2, 1.0);
        assert!(germ.gamma_exch(0, 0, &b).max_abs_diff(&b) < 1e-13);
        assert!(germ.gamma_exch(0, 1, &b).max_abs() < 1e-13);
    }

    #[test]
    fn hermitian_symmetry_of_structured_germs() {
        for seed in 0..12u64 {
            let germ = build_germ(&ModelSpec::seeded(seed));
            assert!(germ.hermitian_symmetry_residual(4) < 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn gamma_identity_equals_defect() {
        for seed in 0..12u64 {
            let model = ModelSpec::seeded(seed);
            let germ = build_germ(&model);
            let gi = germ.gamma(&ComplexMatrix::identity(model.n));
            assert!(gi.max_abs_diff(&model.defect) < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn lindblad_amplitude_damping_rate() {
        let pair = lindblad(&ModelSpec::amplitude_damping());
        // rho0 = |e><e| = diag(0,1); d/dt rho_ee(0) = -1
        let rho0 = ComplexMatrix::diag(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let drho = pair.schrodinger.apply(&rho0);
        assert!((drho[(1, 1)].re + 1.0).abs() < 1e-13);
        assert!((drho[(0, 0)].re - 1.0).abs() < 1e-13);
        // trace preservation of the Schrodinger picture
        assert!(drho.trace().norm() < 1e-13);
    }

    #[test]
    fn lindblad_unital_iff_no_defect() {
        let pair = lindblad(&ModelSpec::amplitude_damping());
        assert!(pair.heisenberg.apply(&ComplexMatrix::identity(2)).max_abs() < 1e-13);
        let defected = ModelSpec::amplitude_damping_with_defect(0.2);
        let pair = lindblad(&defected);
        let li = pair.heisenberg.apply(&ComplexMatrix::identity(2));
        // L(I) = D
        assert!(li.max_abs_diff(&defected.defect) < 1e-13);
    }

    #[test]
    fn lindblad_hamiltonian_only_is_commutator() {
        let h = seeded_hermitian(21, 3, 1.0);
        let model = ModelSpec::new(
            3,
            1,
            1,
            h.clone(),
            vec![ComplexMatrix::zeros(3, 3)],
            vec![vec![ComplexMatrix::zeros(3, 3)]],
            None,
            None,
            None,
        )
        .unwrap();
        let pair = lindblad(&model);
        let b = seeded_matrix(22, 3, 3, 1.0);
        let expected = crate::linalg::commutator(&h, &b).scale(C64::new(0.0, 1.0));
        assert!(pair.heisenberg.apply(&b).max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn dissipator_identity_corner_vanishes() {
        let germ = build_germ(&ModelSpec::amplitude_damping());
        let id = ComplexMatrix::identity(2);
        let delta = dissipator(&germ, &id, &id).unwrap();
        assert!(delta.matrix.block(0, 0, 2, 2).max_abs() < 1e-13);
        // with nonzero defect the corner still cancels
        let germ = build_germ(&ModelSpec::amplitude_damping_with_defect(0.3));
        let delta = dissipator(&germ, &id, &id).unwrap();
        assert!(delta.matrix.block(0, 0, 2, 2).max_abs() < 1e-13);
    }

    #[test]
    fn dissipator_block_hermitian_pairing() {
        let germ = build_germ(&ModelSpec::seeded(5));
        let n = germ.n;
        for seed in 0..6u64 {
            let x = seeded_matrix(100 + seed, n, n, 1.0);
            let z = seeded_matrix(200 + seed, n, n, 1.0);
            let dxz = dissipator(&germ, &x, &z).unwrap();
            let dzx = dissipator(&germ, &z, &x).unwrap();
            assert!(dxz.matrix.adjoint().max_abs_diff(&dzx.matrix) < 1e-12);
        }
    }

    #[test]
    fn dissipator_diagonal_is_psd() {
        let germ = build_germ(&ModelSpec::amplitude_damping());
        let sx = ComplexMatrix::from_rows(vec![
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ])
        .unwrap();
        let delta = dissipator(&germ, &sx, &sx).unwrap();
        let (psd, min) = crate::linalg::is_psd(&delta.matrix.hermitian_part(), 1e-10).unwrap();
        assert!(psd, "min={min}");
    }

    #[test]
    fn ccp_amplitude_damping_passes() {
        let report = ccp_check(&build_germ(&ModelSpec::amplitude_damping()), 1e-10).unwrap();
        assert!(report.is_ccp, "min={}", report.min_eig);
    }

    #[test]
    fn ccp_zero_germ() {
        let model = ModelSpec::new(
            2,
            1,
            1,
            ComplexMatrix::zeros(2, 2),
            vec![ComplexMatrix::zeros(2, 2)],
            vec![vec![ComplexMatrix::zeros(2, 2)]],
            None,
            None,
            None,
        )
        .unwrap();
        let report = ccp_check(&build_germ(&model), 1e-10).unwrap();
        assert!(report.is_ccp);
        assert!(report.min_eig.abs() < 1e-12);
    }

    #[test]
    fn ccp_corrupted_fails_with_witness() {
        let model = ModelSpec::amplitude_damping();
        let germ = corrupted_germ(&model, 0).unwrap();
        let report = ccp_check(&germ, 1e-9).unwrap();
        assert!(!report.is_ccp);
        assert!(report.min_eig < -0.01, "min={}", report.min_eig);
        assert!(report.witness.is_some());
    }

    #[test]
    fn ccp_and_dissipation_agree_on_small_batch() {
        for seed in 0..10u64 {
            let model = ModelSpec::seeded(seed);
            let germ = build_germ(&model);
            let ccp = ccp_check(&germ, 1e-9).unwrap();
            let diss = dissipation_psd_check(&germ, 1e-9).unwrap();
            assert!(
                ccp.is_ccp && diss.is_psd,
                "seed {seed}: {} {}",
                ccp.min_eig,
                diss.min_eig
            );
            let bad = corrupted_germ(&model, seed as usize % model.r).unwrap();
            let ccp = ccp_check(&bad, 1e-9).unwrap();
            let diss = dissipation_psd_check(&bad, 1e-9).unwrap();
            assert_eq!(ccp.is_ccp, diss.is_psd, "seed {seed}");
            assert!(!ccp.is_ccp, "corruption not detected at seed {seed}");
        }
    }

    #[test]
    fn classical_specialization_classifies() {
        let l = sigma_minus();
        // K = (1/2) L'L: filtering
        let k = (&l.adjoint() * &l).scale_re(0.5);
        let c = specialize_classical(&k, &l, None, ClassicalTarget::Diffusive).unwrap();
        assert_eq!(c.classification, FilteringClass::Filtering);

        // jump case with K = L'L: K + K' = 2 L'L >= L'L, sub-filtering
        let k = &l.adjoint() * &l;
        let c = specialize_classical(&k, &l, None, ClassicalTarget::Jump).unwrap();
        assert_eq!(c.classification, FilteringClass::SubFiltering);

        let rejected = specialize_classical(
            &k,
            &l,
            Some(&(&ComplexMatrix::identity(2) + &l)),
            ClassicalTarget::Diffusive,
        );
        assert!(rejected.is_err());
    }

    #[test]
    fn classical_no_noise_reduces_to_commutator_flow() {
        let h = seeded_hermitian(31, 2, 1.0);
        let k = h.scale(C64::new(0.0, 1.0)); // K = iH
        let zero = ComplexMatrix::zeros(2, 2);
        let c = specialize_classical(&k, &zero, None, ClassicalTarget::Diffusive).unwrap();
        let b = seeded_matrix(32, 2, 2, 1.0);
        // drift = K'B + BK = -i[H, B]... as maps: K'B + BK = i(BH - HB)
        let expected = crate::linalg::commutator(&b, &h).scale(C64::new(0.0, 1.0));
        assert!(c.drift.apply(&b).max_abs_diff(&expected) < 1e-12);
        assert!(c.noise.apply(&b).max_abs() < 1e-14);
    }

    /// The classical flow maps agree with the germ of the embedded
    /// single-noise model: gamma = -drift, creation/annihilation blocks are
    /// the noise map (diffusive) or +-i times it (jump), and the exchange
    /// equation coefficient is the jump map.
    #[test]
    fn classical_flow_matches_embedded_germ() {
        let l = sigma_minus();
        let k = (&l.adjoint() * &l).scale_re(0.5);
        let b = seeded_matrix(41, 2, 2, 1.0);

        let c = specialize_classical(&k, &l, None, ClassicalTarget::Diffusive).unwrap();
        let germ =
            build_germ(&classical_embedding_model(&k, &l, ClassicalTarget::Diffusive).unwrap());
        assert!(germ.gamma(&b).max_abs_diff(&-&c.drift.apply(&b)) < 1e-12);
        assert!(germ.gamma_ann(0, &b).max_abs_diff(&c.noise.apply(&b)) < 1e-12);
        assert!(germ.gamma_cre(0, &b).max_abs_diff(&c.noise.apply(&b)) < 1e-12);
        assert!(germ.lambda_exch_superop(0, 0).apply(&b).max_abs() < 1e-12);

        let c = specialize_classical(&k, &l, None, ClassicalTarget::Jump).unwrap();
        let germ = build_germ(&classical_embedding_model(&k, &l, ClassicalTarget::Jump).unwrap());
        let i_unit = C64::new(0.0, 1.0);
        assert!(germ.gamma(&b).max_abs_diff(&-&c.drift.apply(&b)) < 1e-12);
        assert!(
            germ.lambda_exch_superop(0, 0)
                .apply(&b)
                .max_abs_diff(&c.noise.apply(&b))
                < 1e-12
        );
        assert!(
            germ.gamma_cre(0, &b)
                .max_abs_diff(&c.noise.apply(&b).scale(i_unit))
                < 1e-12
        );
        assert!(
            germ.gamma_ann(0, &b)
                .max_abs_diff(&c.noise.apply(&b).scale(-i_unit))
                < 1e-12
        );
    }
}
