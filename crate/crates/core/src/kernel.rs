//! Quantum-noise dynamics through matrix elements between coherent vectors.
//!
//! For piecewise-constant test functions f, h the stochastic equation
//! collapses to a linear ODE for the kernel map Phi_t(f, h): B -> operator,
//!     dPhi/dt = f(t)'h(t) Phi + Phi o [lambda contraction with f, h],
//! integrated here with RK4 on the superoperator matrix. Positivity of the
//! kernel Gram over joint (function, operator, vector) families is the
//! finite-dimensional face of complete positivity of the cocycle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::generator::GermMatrix;
use crate::linalg::{eigh_values, ComplexMatrix, Picture, SuperOperator, C64};
use crate::model::ModelSpec;
use crate::trajectory::{rk4_step_matrix, steps_for};
use crate::{Error, Result};

/// Piecewise-constant C^d-valued test function: value `values[i]` on
/// [breakpoints[i], breakpoints[i+1]), zero outside the covered range.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentFunction {
    d: usize,
    breakpoints: Vec<f64>,
    values: Vec<Vec<C64>>,
}

impl CoherentFunction {
    pub fn new(d: usize, breakpoints: Vec<f64>, values: Vec<Vec<C64>>) -> Result<Self> {
        if breakpoints.is_empty() && values.is_empty() {
            return Ok(Self {
                d,
                breakpoints,
                values,
            });
        }
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::Invalid(
                "need one more breakpoint than value pieces".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| v.len() != d) {
            return Err(Error::ShapeMismatch(format!(
                "each piece must be a C^{d} vector"
            )));
        }
        Ok(Self {
            d,
            breakpoints,
            values,
        })
    }

    /// The zero (vacuum) test function.
    pub fn zero(d: usize) -> Self {
        Self {
            d,
            breakpoints: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn constant(d: usize, value: Vec<C64>, t0: f64, t1: f64) -> Result<Self> {
        Self::new(d, vec![t0, t1], vec![value])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Value at time t, None outside the support.
    pub fn value_at(&self, t: f64) -> Option<&[C64]> {
        if self.values.is_empty() {
            return None;
        }
        if t < self.breakpoints[0] || t >= *self.breakpoints.last().unwrap() {
            return None;
        }
        let mut i = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&t).unwrap())
        {
            Ok(exact) => exact,
            Err(ins) => ins - 1,
        };
        i = i.min(self.values.len() - 1);
        Some(&self.values[i])
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: RawCoherent = serde_json::from_value(v.clone())
            .map_err(|e| Error::Invalid(format!("coherent function: {e}")))?;
        let values = raw
            .values
            .into_iter()
            .map(|piece| {
                piece
                    .into_iter()
                    .map(|[re, im]| Complex64::new(re, im))
                    .collect()
            })
            .collect();
        let d = raw.d;
        Self::new(d, raw.breakpoints, values)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let raw = RawCoherent {
            d: self.d,
            breakpoints: self.breakpoints.clone(),
            values: self
                .values
                .iter()
                .map(|piece| piece.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        serde_json::to_value(raw).expect("coherent function serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct RawCoherent {
    d: usize,
    breakpoints: Vec<f64>,
    values: Vec<Vec<[f64; 2]>>,
}

/// Kernel maps Phi_t(f_k, h_l) for a family of ordered function pairs,
/// stored on the integration grid.
#[derive(Clone, Debug)]
pub struct KernelRun {
    pub n: usize,
    pub d: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub functions: Vec<CoherentFunction>,
    pub pairs: Vec<(usize, usize)>,
    /// states[time_index][pair_index].
    pub states: Vec<Vec<SuperOperator>>,
}

impl KernelRun {
    pub fn pair_index(&self, f: usize, h: usize) -> Option<usize> {
        self.pairs.iter().position(|&(a, b)| a == f && b == h)
    }
}

/// All ordered pairs (k, l) over a family of the given size.
pub fn all_pairs(count: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(count * count);
    for k in 0..count {
        for l in 0..count {
            out.push((k, l));
        }
    }
    out
}

fn coefficient_matrix(
    germ: &GermMatrix,
    fval: Option<&[C64]>,
    hval: Option<&[C64]>,
) -> ComplexMatrix {
    let d = germ.d;
    let nn = germ.n * germ.n;
    let mut g = germ.time_superop().matrix().clone();
    let scalar: C64 = match (fval, hval) {
        (Some(f), Some(h)) => f.iter().zip(h).map(|(a, c)| a.conj() * c).sum(),
        _ => C64::new(0.0, 0.0),
    };
    if scalar != C64::new(0.0, 0.0) {
        g = &g + &ComplexMatrix::identity(nn).scale(scalar);
    }
    if let Some(f) = fval {
        for m in 0..d {
            if f[m] != C64::new(0.0, 0.0) {
                g = &g + &germ.cre_superop(m).matrix().scale(f[m].conj());
            }
        }
    }
    if let Some(h) = hval {
        for n in 0..d {
            if h[n] != C64::new(0.0, 0.0) {
                g = &g + &germ.ann_superop(n).matrix().scale(h[n]);
            }
        }
    }
    if let (Some(f), Some(h)) = (fval, hval) {
        for m in 0..d {
            for n in 0..d {
                let c = f[m].conj() * h[n];
                if c != C64::new(0.0, 0.0) {
                    g = &g + &germ.lambda_exch_superop(m, n).matrix().scale(c);
                }
            }
        }
    }
    g
}

/// Integrate the kernel ODE for every requested pair. RK4 with the
/// coefficients frozen at the stage times; align breakpoints with the grid
/// for full fourth order.
pub fn kernel_ode_solve(
    germ: &GermMatrix,
    functions: &[CoherentFunction],
    pairs: &[(usize, usize)],
    t_final: f64,
    dt: f64,
) -> Result<KernelRun> {
    for f in functions {
        if f.d() != germ.d {
            return Err(Error::ShapeMismatch(
                "coherent function dimension mismatch".into(),
            ));
        }
    }
    for &(a, b) in pairs {
        if a >= functions.len() || b >= functions.len() {
            return Err(Error::IndexOutOfRange(format!("pair ({a},{b})")));
        }
    }
    let steps = steps_for(t_final, dt)?;
    let n = germ.n;
    let nn = n * n;
    let id = ComplexMatrix::identity(nn);
    let mut states: Vec<Vec<SuperOperator>> = Vec::with_capacity(steps + 1);
    states.push(vec![
        SuperOperator::identity(n, Picture::Heisenberg);
        pairs.len()
    ]);
    let mut current: Vec<ComplexMatrix> = vec![id.clone(); pairs.len()];
    let mut times = vec![0.0];
    for step in 0..steps {
        let t = dt * step as f64;
        for (pi, &(fi, hi)) in pairs.iter().enumerate() {
            // piecewise-constant coefficients: freeze at the step midpoint,
            // where the RK4 step is the fourth-order Taylor polynomial of
            // exp(dt G), applied on the right (M' = M G)
            let tau = t + 0.5 * dt;
            let g = coefficient_matrix(
                germ,
                functions[fi].value_at(tau),
                functions[hi].value_at(tau),
            );
            let mut s = &id + &g.scale_re(dt / 4.0);
            s = &id + &(&g * &s).scale_re(dt / 3.0);
            s = &id + &(&g * &s).scale_re(dt / 2.0);
            let s = &id + &(&g * &s).scale_re(dt);
            current[pi] = &current[pi] * &s;
            if !current[pi].is_finite() {
                return Err(Error::NumericalBreakdown {
                    step,
                    what: format!("kernel pair {pi} non-finite"),
                });
            }
        }
        times.push(dt * (step + 1) as f64);
        states.push(
            current
                .iter()
                .map(|m| SuperOperator::from_matrix(n, m.clone(), Picture::Heisenberg))
                .collect(),
        );
    }
    Ok(KernelRun {
        n,
        d: germ.d,
        dt,
        times,
        functions: functions.to_vec(),
        pairs: pairs.to_vec(),
        states,
    })
}

/// One element of a kernel positivity family: a coherent function index,
/// an operator X and a probe vector xi.
#[derive(Clone, Debug)]
pub struct KernelFamilyElement {
    pub func: usize,
    pub op: ComplexMatrix,
    pub xi: Vec<C64>,
}

#[derive(Clone, Copy, Debug)]
pub struct KernelPsdReport {
    pub is_psd: bool,
    pub min_eig: f64,
}

/// Positivity of the kernel Gram M[k,l] = <xi_k | Phi_t(f_k, f_l)(X_k' X_l) xi_l>
/// at one grid time.
pub fn kernel_psd_check(
    run: &KernelRun,
    time_index: usize,
    family: &[KernelFamilyElement],
    tol: f64,
) -> Result<KernelPsdReport> {
    if time_index >= run.states.len() {
        return Err(Error::IndexOutOfRange(format!("time index {time_index}")));
    }
    let kcount = family.len();
    let mut m = ComplexMatrix::zeros(kcount, kcount);
    for (k, ek) in family.iter().enumerate() {
        for (l, el) in family.iter().enumerate() {
            let pair = run.pair_index(ek.func, el.func).ok_or_else(|| {
                Error::Invalid(format!("missing pair ({}, {})", ek.func, el.func))
            })?;
            let op = &ek.op.adjoint() * &el.op;
            let image = run.states[time_index][pair].apply(&op);
            let ixl = image.apply_vec(&el.xi);
            let val: C64 = ek.xi.iter().zip(&ixl).map(|(a, b)| a.conj() * b).sum();
            m[(k, l)] = val;
        }
    }
    let vals = eigh_values(&m.hermitian_part())?;
    let min_eig = vals.first().copied().unwrap_or(0.0);
    Ok(KernelPsdReport {
        is_psd: min_eig >= -tol,
        min_eig,
    })
}

/// Germ form of the initial derivative:
///   sum_mn conj(a^m) gamma^m_n(B) c^n + sum_m conj(a^m) gamma^m(B)
///     + sum_n gamma_n(B) c^n + gamma(B).
/// Asserted against the kernel ODE right-hand side at t = 0 (the lambda
/// contraction plus a'c B) to 1e-9; the two routes differ only by exact
/// block algebra.
pub fn germ_form_eval(
    germ: &GermMatrix,
    a: &[C64],
    c: &[C64],
    b: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let d = germ.d;
    if a.len() != d || c.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "germ form vectors must be C^{d}"
        )));
    }
    let mut out = germ.gamma(b);
    for m in 0..d {
        out = &out + &germ.gamma_cre(m, b).scale(a[m].conj());
    }
    for n in 0..d {
        out = &out + &germ.gamma_ann(n, b).scale(c[n]);
    }
    for m in 0..d {
        for n in 0..d {
            out = &out + &germ.gamma_exch(m, n, b).scale(a[m].conj() * c[n]);
        }
    }

    // second route: the ODE right-hand side at t = 0 with Phi = id
    let coeff = coefficient_matrix(germ, Some(a), Some(c));
    let rhs = ComplexMatrix::from_vectorized(germ.n, &coeff.apply_vec(&b.vectorize()));
    if out.max_abs_diff(&rhs) > 1e-9 {
        return Err(Error::Invalid(format!(
            "germ form and kernel derivative disagree by {:.3e}",
            out.max_abs_diff(&rhs)
        )));
    }
    Ok(out)
}

/// Integral-recursion iterates of the kernel dynamics.
///
/// Iterate 0 is the homogeneous map B -> W_f(t)' B W_h(t) built from the
/// deterministic vector cocycle; each further iterate adds the trapezoidal
/// integral of the completely positive block contraction transported by
/// W(s, t) on the tail-restricted test functions. Successive iterates
/// contract to the kernel ODE solution.
pub fn picard_iterate(
    model: &ModelSpec,
    functions: &[CoherentFunction],
    pairs: &[(usize, usize)],
    t_final: f64,
    dt: f64,
    iterations: usize,
) -> Result<Vec<KernelRun>> {
    if iterations < 1 {
        return Err(Error::Invalid("need at least one iteration".into()));
    }
    for f in functions {
        if f.d() != model.d {
            return Err(Error::ShapeMismatch(
                "coherent function dimension mismatch".into(),
            ));
        }
    }
    let steps = steps_for(t_final, dt)?;
    let n = model.n;
    let nn = n * n;
    let d = model.d;

    // propagator prefixes and inverses per function
    struct Prop {
        prefix: Vec<ComplexMatrix>,
        prefix_inv: Vec<ComplexMatrix>,
    }
    let mut props = Vec::with_capacity(functions.len());
    for f in functions {
        let gen = |t: f64| -> ComplexMatrix {
            let mut a = model.drift.clone();
            if let Some(vals) = f.value_at(t) {
                for (ch, kn) in model.noise_drift.iter().enumerate() {
                    a = &a + &kn.scale(vals[ch]);
                }
            }
            -&a
        };
        let mut prefix = vec![ComplexMatrix::identity(n)];
        let mut prefix_inv = vec![ComplexMatrix::identity(n)];
        for step in 0..steps {
            let r = rk4_step_matrix(gen, dt * step as f64, dt);
            prefix.push(&r * &prefix[step]);
            let rinv = crate::linalg::inverse(&r)?;
            prefix_inv.push(&prefix_inv[step] * &rinv);
        }
        props.push(Prop { prefix, prefix_inv });
    }

    // completely positive block superoperators of the model
    let kraus = |left: &[ComplexMatrix], right: &[ComplexMatrix]| -> SuperOperator {
        SuperOperator::from_map(n, Picture::Heisenberg, |b| {
            let mut acc = ComplexMatrix::zeros(n, n);
            for i in 0..model.r {
                acc = &acc + &(&(&left[i].adjoint() * b) * &right[i]);
            }
            acc
        })
    };
    let phi_time = kraus(&model.coupling, &model.coupling);
    let phi_cre: Vec<SuperOperator> = (0..d)
        .map(|m| kraus(&model.exchange_coupling[m], &model.coupling))
        .collect();
    let phi_ann: Vec<SuperOperator> = (0..d)
        .map(|ch| kraus(&model.coupling, &model.exchange_coupling[ch]))
        .collect();
    let phi_exch: Vec<Vec<SuperOperator>> = (0..d)
        .map(|m| {
            (0..d)
                .map(|ch| kraus(&model.exchange_coupling[m], &model.exchange_coupling[ch]))
                .collect()
        })
        .collect();

    let phi_contraction = |fval: Option<&[C64]>, hval: Option<&[C64]>| -> ComplexMatrix {
        let mut g = phi_time.matrix().clone();
        if let Some(f) = fval {
            for m in 0..d {
                g = &g + &phi_cre[m].matrix().scale(f[m].conj());
            }
        }
        if let Some(h) = hval {
            for ch in 0..d {
                g = &g + &phi_ann[ch].matrix().scale(h[ch]);
            }
        }
        if let (Some(f), Some(h)) = (fval, hval) {
            for m in 0..d {
                for ch in 0..d {
                    g = &g + &phi_exch[m][ch].matrix().scale(f[m].conj() * h[ch]);
                }
            }
        }
        g
    };

    let times: Vec<f64> = (0..=steps).map(|g| dt * g as f64).collect();
    let homogeneous: Vec<Vec<ComplexMatrix>> = (0..=steps)
        .map(|g| {
            pairs
                .iter()
                .map(|&(fi, hi)| {
                    let pf = &props[fi].prefix[g];
                    let ph = &props[hi].prefix[g];
                    SuperOperator::sandwich(&pf.adjoint(), ph, Picture::Heisenberg)
                        .matrix()
                        .clone()
                })
                .collect()
        })
        .collect();

    let wrap = |mats: &[Vec<ComplexMatrix>]| -> KernelRun {
        KernelRun {
            n,
            d,
            dt,
            times: times.clone(),
            functions: functions.to_vec(),
            pairs: pairs.to_vec(),
            states: mats
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|m| SuperOperator::from_matrix(n, m.clone(), Picture::Heisenberg))
                        .collect()
                })
                .collect(),
        }
    };

    let mut runs = vec![wrap(&homogeneous)];
    let mut prev = homogeneous.clone();
    for _iter in 0..iterations {
        // per pair and per s: Xi_s = Phi_prev(s) . phi-contraction(f(s), h(s))
        let mut next: Vec<Vec<ComplexMatrix>> =
            vec![vec![ComplexMatrix::zeros(nn, nn); pairs.len()]; steps + 1];
        for (pi, &(fi, hi)) in pairs.iter().enumerate() {
            let xi: Vec<ComplexMatrix> = (0..=steps)
                .map(|s| {
                    let fv = functions[fi].value_at(times[s]);
                    let hv = functions[hi].value_at(times[s]);
                    &prev[s][pi] * &phi_contraction(fv, hv)
                })
                .collect();
            for g in 0..=steps {
                let mut acc = homogeneous[g][pi].clone();
                if g > 0 {
                    let mut integral = ComplexMatrix::zeros(nn, nn);
                    for s in 0..=g {
                        // W(s, g) = P_g P_s^{-1} on both sides
                        let wf = &props[fi].prefix[g] * &props[fi].prefix_inv[s];
                        let wh = &props[hi].prefix[g] * &props[hi].prefix_inv[s];
                        let transport =
                            SuperOperator::sandwich(&wf.adjoint(), &wh, Picture::Heisenberg);
                        let term = &xi[s] * transport.matrix();
                        let weight = if s == 0 || s == g { 0.5 } else { 1.0 };
                        integral = &integral + &term.scale_re(weight);
                    }
                    acc = &acc + &integral.scale_re(dt);
                }
                next[g][pi] = acc;
            }
        }
        runs.push(wrap(&next));
        prev = next;
    }
    Ok(runs)
}

/// Report of the integral identity at the vacuum.
#[derive(Clone, Debug)]
pub struct SubmartingaleReport {
    pub times: Vec<f64>,
    /// Phi_t(I) on the grid.
    pub phi_identity: Vec<ComplexMatrix>,
    /// Max deviation of Phi_t(I) - int_0^t Phi_s(D) ds from I.
    pub max_identity_dev: f64,
    /// Whether <eta| Phi_t(I) |eta> is nonincreasing for the probe vectors.
    pub monotone_nonincreasing: bool,
}

/// Verify the vacuum integral identity Phi_t(I) = I + int_0^t Phi_s(D) ds
/// (the defect D = gamma(I) <= 0 drains the conditional norm), with the
/// integral accumulated inside the same RK4 pass so quadrature and solver
/// errors cancel to the scheme's order.
pub fn submartingale_vacuum_check(
    germ: &GermMatrix,
    t_final: f64,
    dt: f64,
) -> Result<SubmartingaleReport> {
    let steps = steps_for(t_final, dt)?;
    let n = germ.n;
    let nn = n * n;
    let g = germ.time_superop().matrix().clone();
    let vec_defect = germ.defect.vectorize();
    let id_vec = ComplexMatrix::identity(n).vectorize();

    let mut m = ComplexMatrix::identity(nn);
    let mut acc = vec![C64::new(0.0, 0.0); nn];
    let mut phi_identity = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut max_dev = 0.0f64;

    let record =
        |m: &ComplexMatrix, acc: &[C64], max_dev: &mut f64, out: &mut Vec<ComplexMatrix>| {
            let phi_i = ComplexMatrix::from_vectorized(n, &m.apply_vec(&id_vec));
            let integral = ComplexMatrix::from_vectorized(n, acc);
            let dev = (&(&phi_i - &integral) - &ComplexMatrix::identity(n)).max_abs();
            *max_dev = (*max_dev).max(dev);
            out.push(phi_i);
        };
    times.push(0.0);
    record(&m, &acc, &mut max_dev, &mut phi_identity);

    for step in 0..steps {
        // RK4 on the pair M' = M G, a' = M vec(D)
        let k1m = &m * &g;
        let k1a = m.apply_vec(&vec_defect);
        let m2 = &m + &k1m.scale_re(0.5 * dt);
        let k2m = &m2 * &g;
        let k2a = m2.apply_vec(&vec_defect);
        let m3 = &m + &k2m.scale_re(0.5 * dt);
        let k3m = &m3 * &g;
        let k3a = m3.apply_vec(&vec_defect);
        let m4 = &m + &k3m.scale_re(dt);
        let k4m = &m4 * &g;
        let k4a = m4.apply_vec(&vec_defect);
        m = &m + &(&(&k1m + &k4m) + &(&k2m + &k3m).scale_re(2.0)).scale_re(dt / 6.0);
        for i in 0..nn {
            acc[i] += (k1a[i] + k4a[i] + (k2a[i] + k3a[i]) * 2.0) * (dt / 6.0);
        }
        times.push(dt * (step + 1) as f64);
        record(&m, &acc, &mut max_dev, &mut phi_identity);
    }

    let mut monotone = true;
    for probe in 0..3u64 {
        let eta = crate::linalg::seeded_unit_vector(0x50b + probe, n);
        let mut last = f64::INFINITY;
        for phi_i in &phi_identity {
            let image = phi_i.apply_vec(&eta);
            let q: C64 = eta.iter().zip(&image).map(|(a, b)| a.conj() * b).sum();
            if q.re > last + 1e-10 {
                monotone = false;
            }
            last = q.re;
        }
    }
    Ok(SubmartingaleReport {
        times,
        phi_identity,
        max_identity_dev: max_dev,
        monotone_nonincreasing: monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_germ, corrupted_germ, lindblad};
    use crate::linalg::{matrix_exp, seeded_unit_vector};

    fn vacuum_run(germ: &GermMatrix, t_final: f64, dt: f64) -> KernelRun {
        let funcs = vec![CoherentFunction::zero(germ.d)];
        kernel_ode_solve(germ, &funcs, &[(0, 0)], t_final, dt).unwrap()
    }

    #[test]
    fn vacuum_kernel_matches_lindblad_exponential() {
        let model = ModelSpec::seeded(4);
        let germ = build_germ(&model);
        let run = vacuum_run(&germ, 1.0, 1e-3);
        let pair = lindblad(&model);
        for &g in &[250usize, 500, 1000] {
            let t = run.times[g];
            let exact = matrix_exp(&pair.heisenberg.matrix().scale_re(t)).unwrap();
            let dev = run.states[g][0].matrix().max_abs_diff(&exact);
            assert!(dev < 1e-9, "t={t}: dev {dev}");
        }
    }

    #[test]
    fn vacuum_amplitude_damping_decay() {
        let germ = build_germ(&ModelSpec::amplitude_damping());
        let run = vacuum_run(&germ, 1.0, 1e-3);
        let proj_e = ComplexMatrix::diag(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let last = run.states.last().unwrap()[0].apply(&proj_e);
        assert!((last[(1, 1)].re - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_lambda_germ_gives_scalar_exponential() {
        // identity cocycle: lambda = 0, so dPhi/dt = f'h Phi
        let germ = crate::generator::identity_germ(2, 1);
        let f = CoherentFunction::constant(1, vec![C64::new(0.6, 0.2)], 0.0, 2.0).unwrap();
        let h = CoherentFunction::constant(1, vec![C64::new(-0.3, 0.4)], 0.0, 2.0).unwrap();
        let run = kernel_ode_solve(&germ, &[f, h], &[(0, 1)], 1.0, 1e-3).unwrap();
        let fh = C64::new(0.6, -0.2) * C64::new(-0.3, 0.4);
        let expected = ComplexMatrix::identity(4).scale((fh * 1.0).exp());
        assert!(
            run.states.last().unwrap()[0]
                .matrix()
                .max_abs_diff(&expected)
                < 1e-9
        );
    }

    #[test]
    fn kernel_initial_condition_is_identity() {
        let germ = build_germ(&ModelSpec::seeded(1));
        let f =
            CoherentFunction::constant(germ.d, vec![C64::new(0.5, 0.0); germ.d], 0.0, 1.0).unwrap();
        let run = kernel_ode_solve(&germ, &[f], &[(0, 0)], 0.5, 1e-2).unwrap();
        assert!(
            run.states[0][0]
                .matrix()
                .max_abs_diff(&ComplexMatrix::identity(germ.n * germ.n))
                < 1e-15
        );
    }

    fn psd_family(n: usize) -> Vec<KernelFamilyElement> {
        let sx = ComplexMatrix::from_rows(vec![
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ])
        .unwrap();
        let sm = ComplexMatrix::unit(2, 0, 1);
        let ops = [ComplexMatrix::identity(n), sx, sm];
        let mut family = Vec::new();
        for func in 0..3usize {
            for (oi, op) in ops.iter().enumerate() {
                family.push(KernelFamilyElement {
                    func,
                    op: op.clone(),
                    xi: seeded_unit_vector(900 + (func * 3 + oi) as u64, n),
                });
            }
        }
        family
    }

    fn psd_functions() -> Vec<CoherentFunction> {
        vec![
            CoherentFunction::zero(1),
            CoherentFunction::constant(1, vec![C64::new(0.3, 0.0)], 0.0, 1.0).unwrap(),
            CoherentFunction::new(
                1,
                vec![0.0, 0.4, 1.0],
                vec![vec![C64::new(0.0, 0.5)], vec![C64::new(-0.2, 0.0)]],
            )
            .unwrap(),
        ]
    }

    #[test]
    fn kernel_positivity_structured_vs_corrupted() {
        let model = ModelSpec::amplitude_damping();
        let functions = psd_functions();
        let pairs = all_pairs(3);
        let family = psd_family(2);

        let run = kernel_ode_solve(&build_germ(&model), &functions, &pairs, 1.0, 1e-2).unwrap();
        // t = 0: exact Gram matrix, PSD
        let rep = kernel_psd_check(&run, 0, &family, 1e-12).unwrap();
        assert!(rep.is_psd, "t=0 Gram min {min}", min = rep.min_eig);
        for idx in [10usize, 50, 100] {
            let rep = kernel_psd_check(&run, idx, &family, 1e-8).unwrap();
            assert!(rep.is_psd, "structured min {} at {}", rep.min_eig, idx);
        }

        let bad = corrupted_germ(&model, 0).unwrap();
        let run = kernel_ode_solve(&bad, &functions, &pairs, 1.0, 1e-2).unwrap();
        let mut worst = 0.0f64;
        for idx in 0..=100usize {
            let rep = kernel_psd_check(&run, idx, &family, 1e-8).unwrap();
            worst = worst.min(rep.min_eig);
        }
        assert!(worst < -1e-6, "corrupted stayed PSD, min {worst}");
    }

    #[test]
    fn germ_form_matches_initial_derivative() {
        // 50 seeded (a, c, B) triples across seeded models
        for seed in 0..50u64 {
            let model = ModelSpec::seeded(seed % 12);
            let germ = build_germ(&model);
            let amat = crate::linalg::seeded_matrix(3000 + seed, germ.d, 1, 0.7);
            let cmat = crate::linalg::seeded_matrix(4000 + seed, germ.d, 1, 0.7);
            let a = amat.column(0);
            let c = cmat.column(0);
            let b = crate::linalg::seeded_matrix(2000 + seed, germ.n, germ.n, 1.0);
            // errors if the two routes disagree beyond 1e-9
            germ_form_eval(&germ, &a, &c, &b).unwrap();
        }
    }

    #[test]
    fn kernel_hermitian_symmetry_along_integration() {
        // Phi_t(f, h)(B')' = Phi_t(h, f)(B)
        let germ = build_germ(&ModelSpec::seeded(7));
        let d = germ.d;
        let f = CoherentFunction::constant(d, vec![C64::new(0.4, -0.2); d], 0.0, 1.0).unwrap();
        let h = CoherentFunction::new(
            d,
            vec![0.0, 0.5, 1.0],
            vec![vec![C64::new(-0.1, 0.3); d], vec![C64::new(0.2, 0.0); d]],
        )
        .unwrap();
        let run = kernel_ode_solve(&germ, &[f, h], &[(0, 1), (1, 0)], 1.0, 1e-2).unwrap();
        let b = crate::linalg::seeded_matrix(88, germ.n, germ.n, 1.0);
        for g in [0usize, 30, 60, 100] {
            let lhs = run.states[g][0].apply(&b.adjoint()).adjoint();
            let rhs = run.states[g][1].apply(&b);
            assert!(
                lhs.max_abs_diff(&rhs) < 1e-9,
                "symmetry residual {} at {}",
                lhs.max_abs_diff(&rhs),
                g
            );
        }
    }

    #[test]
    fn germ_form_at_zero_arguments_is_gamma() {
        let model = ModelSpec::amplitude_damping();
        let germ = build_germ(&model);
        let b = crate::linalg::seeded_matrix(7, 2, 2, 1.0);
        let zero = vec![C64::new(0.0, 0.0)];
        let form = germ_form_eval(&germ, &zero, &zero, &b).unwrap();
        let pair = lindblad(&model);
        assert!(form.max_abs_diff(&pair.heisenberg.apply(&b)) < 1e-12);
    }

    #[test]
    fn picard_no_coupling_all_iterates_equal_homogeneous() {
        // L = 0: the integral term vanishes, iterates stay V'BV
        let k = ComplexMatrix::diag(&[C64::new(0.2, 0.1), C64::new(0.4, 0.0)]);
        let model = ModelSpec::new(
            2,
            1,
            1,
            ComplexMatrix::zeros(2, 2),
            vec![ComplexMatrix::zeros(2, 2)],
            vec![vec![ComplexMatrix::zeros(2, 2)]],
            Some(k.clone()),
            Some(vec![ComplexMatrix::zeros(2, 2)]),
            Some(-&(&k + &k.adjoint())),
        )
        .unwrap();
        let funcs = vec![CoherentFunction::zero(1)];
        let runs = picard_iterate(&model, &funcs, &[(0, 0)], 0.5, 1e-2, 2).unwrap();
        let m0 = runs[0].states.last().unwrap()[0].matrix().clone();
        let m1 = runs[1].states.last().unwrap()[0].matrix().clone();
        let m2 = runs[2].states.last().unwrap()[0].matrix().clone();
        assert!(m0.max_abs_diff(&m1) < 1e-14);
        assert!(m1.max_abs_diff(&m2) < 1e-14);
        // and the homogeneous term is exp(-K t)' B exp(-K t)
        let ek = matrix_exp(&(-&k).scale_re(0.5)).unwrap();
        let expected = SuperOperator::sandwich(&ek.adjoint(), &ek, Picture::Heisenberg);
        assert!(m0.max_abs_diff(expected.matrix()) < 1e-10);
    }

    #[test]
    fn picard_converges_to_kernel_ode() {
        let model = ModelSpec::amplitude_damping();
        let germ = build_germ(&model);
        let funcs = vec![CoherentFunction::zero(1)];
        let dt = 1e-3;
        let runs = picard_iterate(&model, &funcs, &[(0, 0)], 0.5, dt, 8).unwrap();
        let ode = kernel_ode_solve(&germ, &funcs, &[(0, 0)], 0.5, dt).unwrap();
        let mut sup = 0.0f64;
        for g in 0..ode.times.len() {
            sup = sup.max(
                runs[8].states[g][0]
                    .matrix()
                    .max_abs_diff(ode.states[g][0].matrix()),
            );
        }
        assert!(sup < 1e-6, "Picard deviation {sup}");
        // the amplitude-damping chain terminates after one step: the CP
        // block is rank one and annihilates its own range
        let diff = |a: &KernelRun, b: &KernelRun| -> f64 {
            let mut worst = 0.0f64;
            for g in 0..a.times.len() {
                worst = worst.max(
                    a.states[g][0]
                        .matrix()
                        .max_abs_diff(b.states[g][0].matrix()),
                );
            }
            worst
        };
        assert!(diff(&runs[2], &runs[1]) < 1e-14);
    }

    #[test]
    fn picard_successive_differences_contract() {
        // a Hamiltonian keeps the iteration chain alive
        let sm = ComplexMatrix::unit(2, 0, 1);
        let sx = &sm + &sm.adjoint();
        let model = ModelSpec::new(
            2,
            1,
            1,
            sx.scale_re(0.3),
            vec![sm],
            vec![vec![ComplexMatrix::zeros(2, 2)]],
            None,
            None,
            None,
        )
        .unwrap();
        let germ = build_germ(&model);
        let funcs = vec![CoherentFunction::zero(1)];
        let dt = 1e-3;
        let runs = picard_iterate(&model, &funcs, &[(0, 0)], 0.5, dt, 8).unwrap();
        let diff = |a: &KernelRun, b: &KernelRun| -> f64 {
            let mut worst = 0.0f64;
            for g in 0..a.times.len() {
                worst = worst.max(
                    a.states[g][0]
                        .matrix()
                        .max_abs_diff(b.states[g][0].matrix()),
                );
            }
            worst
        };
        let mut prev_diff = diff(&runs[1], &runs[0]);
        for i in 2..=4usize {
            let next_diff = diff(&runs[i], &runs[i - 1]);
            assert!(
                next_diff < prev_diff,
                "no contraction at {i}: {next_diff} vs {prev_diff}"
            );
            prev_diff = next_diff;
        }
        let ode = kernel_ode_solve(&germ, &funcs, &[(0, 0)], 0.5, dt).unwrap();
        let mut sup = 0.0f64;
        for g in 0..ode.times.len() {
            sup = sup.max(
                runs[8].states[g][0]
                    .matrix()
                    .max_abs_diff(ode.states[g][0].matrix()),
            );
        }
        assert!(sup < 1e-6, "Picard deviation {sup}");
    }

    #[test]
    fn submartingale_identity_martingale_case() {
        let germ = build_germ(&ModelSpec::amplitude_damping());
        let rep = submartingale_vacuum_check(&germ, 1.0, 1e-3).unwrap();
        assert!(rep.max_identity_dev < 1e-10, "dev {}", rep.max_identity_dev);
        assert!(rep.monotone_nonincreasing);
    }

    #[test]
    fn submartingale_identity_with_defect() {
        let model = ModelSpec::amplitude_damping_with_defect(0.2);
        let germ = build_germ(&model);
        let rep = submartingale_vacuum_check(&germ, 1.0, 1e-3).unwrap();
        assert!(rep.max_identity_dev < 1e-8, "dev {}", rep.max_identity_dev);
        assert!(rep.monotone_nonincreasing);
        // <e| Phi_t(I) |e> strictly decreasing
        let first = rep.phi_identity.first().unwrap()[(1, 1)].re;
        let mid = rep.phi_identity[500][(1, 1)].re;
        let last = rep.phi_identity.last().unwrap()[(1, 1)].re;
        assert!(first > mid && mid > last, "{first} {mid} {last}");
    }

    #[test]
    fn coherent_function_piecewise_lookup() {
        let f = CoherentFunction::new(
            1,
            vec![0.0, 0.5, 1.0],
            vec![vec![C64::new(1.0, 0.0)], vec![C64::new(2.0, 0.0)]],
        )
        .unwrap();
        assert_eq!(f.value_at(0.0).unwrap()[0].re, 1.0);
        assert_eq!(f.value_at(0.49).unwrap()[0].re, 1.0);
        assert_eq!(f.value_at(0.5).unwrap()[0].re, 2.0);
        assert!(f.value_at(1.0).is_none());
        assert!(f.value_at(-0.1).is_none());
        let json = f.to_json();
        let back = CoherentFunction::from_json(&json).unwrap();
        assert_eq!(back, f);
    }
}
