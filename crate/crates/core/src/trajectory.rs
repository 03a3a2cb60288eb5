//! Classical-noise unravelings: linear filtering equations driven by
//! Wiener or Poisson paths, Heisenberg flows on the same increments,
//! step-identity and cocycle-composition diagnostics, deterministic
//! parallel ensemble averaging, and the deterministic vector cocycle ODE.
//!
//! The equations are linear; states are never renormalized inside the
//! dynamics. All randomness flows from explicit 64-bit seeds through a
//! dedicated ChaCha8 stream per path, so identical seeds give identical
//! bits regardless of parallelism.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::generator::{ClassicalCoeffs, ClassicalTarget};
use crate::kernel::CoherentFunction;
use crate::linalg::{matrix_exp, ComplexMatrix, C64};
use crate::model::ModelSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Wiener,
    Poisson,
}

/// One realized noise path on a uniform step grid.
#[derive(Clone, Debug)]
pub struct NoisePath {
    pub kind: NoiseKind,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    /// Wiener: per-step increments dQ_k ~ N(0, dt). Empty for Poisson.
    pub increments: Vec<f64>,
    /// Poisson: strictly increasing unit-rate jump times in (0, T).
    pub jump_times: Vec<f64>,
}

impl NoisePath {
    pub fn wiener(dt: f64, steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sq = dt.sqrt();
        let increments = (0..steps)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sq
            })
            .collect();
        Self {
            kind: NoiseKind::Wiener,
            dt,
            steps,
            seed,
            increments,
            jump_times: Vec::new(),
        }
    }

    pub fn poisson(dt: f64, steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t_final = dt * steps as f64;
        let mut jump_times = Vec::new();
        let mut t = 0.0f64;
        loop {
            // unit-rate exponential inter-arrival time
            let u: f64 = StandardNormal.sample(&mut rng);
            let v: f64 = StandardNormal.sample(&mut rng);
            let unif = normals_to_uniform(u, v);
            t -= unif.ln();
            if t >= t_final {
                break;
            }
            jump_times.push(t);
        }
        Self {
            kind: NoiseKind::Poisson,
            dt,
            steps,
            seed,
            increments: Vec::new(),
            jump_times,
        }
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// Number of jumps inside each step interval (t_k, t_{k+1}].
    pub fn step_jump_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.steps];
        for &t in &self.jump_times {
            let k = ((t / self.dt).ceil() as usize)
                .saturating_sub(1)
                .min(self.steps - 1);
            counts[k] += 1;
        }
        counts
    }

    /// Tail of the path after `split_step` grid steps, with time shifted so
    /// the tail starts at zero. The same realized noise, re-indexed.
    pub fn tail(&self, split_step: usize) -> Result<NoisePath> {
        if split_step > self.steps {
            return Err(Error::IndexOutOfRange(format!(
                "split {split_step} beyond {} steps",
                self.steps
            )));
        }
        let t_split = self.dt * split_step as f64;
        Ok(NoisePath {
            kind: self.kind,
            dt: self.dt,
            steps: self.steps - split_step,
            seed: self.seed,
            increments: if self.kind == NoiseKind::Wiener {
                self.increments[split_step..].to_vec()
            } else {
                Vec::new()
            },
            jump_times: self
                .jump_times
                .iter()
                .filter(|&&t| t > t_split)
                .map(|&t| t - t_split)
                .collect(),
        })
    }

    /// Head of the path up to `split_step` grid steps.
    pub fn head(&self, split_step: usize) -> Result<NoisePath> {
        if split_step > self.steps {
            return Err(Error::IndexOutOfRange(format!(
                "split {split_step} beyond {} steps",
                self.steps
            )));
        }
        let t_split = self.dt * split_step as f64;
        Ok(NoisePath {
            kind: self.kind,
            dt: self.dt,
            steps: split_step,
            seed: self.seed,
            increments: if self.kind == NoiseKind::Wiener {
                self.increments[..split_step].to_vec()
            } else {
                Vec::new()
            },
            jump_times: self
                .jump_times
                .iter()
                .copied()
                .filter(|&t| t <= t_split)
                .collect(),
        })
    }
}

/// Map two standard normals to one uniform in (0, 1) deterministically.
/// Keeps the whole path generation on a single primitive distribution.
fn normals_to_uniform(u: f64, v: f64) -> f64 {
    let r = (u * u + v * v) * 0.5;
    // chi-square with 2 dof is exponential: exp(-r) is uniform in (0,1)
    (-r).exp().clamp(f64::MIN_POSITIVE, 1.0 - 1e-16)
}

/// One simulated trajectory. `states` are n x c matrices: column vectors
/// psi_t for vector initial data, full propagators V_t when the initial
/// state is a matrix. Rows flagged in `jumps` are inserted at exact jump
/// times; the remaining rows sit on the uniform output grid.
#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    pub norm2: Vec<f64>,
    pub jumps: Vec<bool>,
}

impl TrajectoryResult {
    fn push(&mut self, t: f64, state: ComplexMatrix, jump: bool) {
        self.norm2.push(state.norm_fro().powi(2));
        self.times.push(t);
        self.states.push(state);
        self.jumps.push(jump);
    }

    /// Indices of the grid rows (jump rows excluded).
    pub fn grid_indices(&self) -> Vec<usize> {
        (0..self.times.len()).filter(|&i| !self.jumps[i]).collect()
    }
}

fn check_shapes(k: &ComplexMatrix, l: &ComplexMatrix, psi0: &ComplexMatrix) -> Result<usize> {
    let n = k.rows();
    if !k.is_square() || !l.is_square() || l.rows() != n {
        return Err(Error::ShapeMismatch(
            "K and L must be square of equal dimension".into(),
        ));
    }
    if psi0.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "initial state has {} rows, expected {n}",
            psi0.rows()
        )));
    }
    if psi0.norm_fro() == 0.0 {
        return Err(Error::Invalid("initial state must be nonzero".into()));
    }
    Ok(n)
}

/// Euler-Maruyama iteration of the diffusive filtering equation
/// dV + K V dt = L V dQ:  psi_{k+1} = psi_k - K psi_k dt + L psi_k dQ_k.
pub fn solve_diffusive(
    k: &ComplexMatrix,
    l: &ComplexMatrix,
    psi0: &ComplexMatrix,
    path: &NoisePath,
) -> Result<TrajectoryResult> {
    check_shapes(k, l, psi0)?;
    if path.kind != NoiseKind::Wiener {
        return Err(Error::Invalid("solve_diffusive needs a Wiener path".into()));
    }
    let mut out = TrajectoryResult {
        times: Vec::new(),
        states: Vec::new(),
        norm2: Vec::new(),
        jumps: Vec::new(),
    };
    let mut state = psi0.clone();
    out.push(0.0, state.clone(), false);
    for step in 0..path.steps {
        let dq = path.increments[step];
        let drift = (k * &state).scale_re(path.dt);
        let noise = (l * &state).scale_re(dq);
        state = &(&state - &drift) + &noise;
        if !state.is_finite() {
            return Err(Error::NumericalBreakdown {
                step,
                what: "diffusive state non-finite".into(),
            });
        }
        out.push(path.dt * (step + 1) as f64, state.clone(), false);
    }
    Ok(out)
}

/// Piecewise-exact integration of the jump filtering equation
/// dV + K V dt = L V dP: between jumps V evolves by exp(-(K+L) tau), at
/// each unit-rate jump time V <- (I + L) V. Output rows sit on the uniform
/// grid plus one extra row per jump time.
pub fn solve_jump(
    k: &ComplexMatrix,
    l: &ComplexMatrix,
    psi0: &ComplexMatrix,
    path: &NoisePath,
) -> Result<TrajectoryResult> {
    check_shapes(k, l, psi0)?;
    if path.kind != NoiseKind::Poisson {
        return Err(Error::Invalid("solve_jump needs a Poisson path".into()));
    }
    let gen = k + l; // between jumps dP = -dt
    let prop_dt = matrix_exp(&(-&gen).scale_re(path.dt))?;
    let jump_op = &ComplexMatrix::identity(k.rows()) + l;

    let mut out = TrajectoryResult {
        times: Vec::new(),
        states: Vec::new(),
        norm2: Vec::new(),
        jumps: Vec::new(),
    };
    let mut state = psi0.clone();
    out.push(0.0, state.clone(), false);
    let mut jump_iter = path.jump_times.iter().copied().peekable();
    for step in 0..path.steps {
        let t0 = path.dt * step as f64;
        let t1 = path.dt * (step + 1) as f64;
        let mut cursor = t0;
        let mut clean_step = true;
        while let Some(&tj) = jump_iter.peek() {
            if tj > t1 {
                break;
            }
            jump_iter.next();
            let partial = matrix_exp(&(-&gen).scale_re(tj - cursor))?;
            state = &jump_op * &(&partial * &state);
            cursor = tj;
            clean_step = false;
            out.push(tj, state.clone(), true);
        }
        if clean_step {
            state = &prop_dt * &state;
        } else {
            let rest = matrix_exp(&(-&gen).scale_re(t1 - cursor))?;
            state = &rest * &state;
        }
        if !state.is_finite() {
            return Err(Error::NumericalBreakdown {
                step,
                what: "jump state non-finite".into(),
            });
        }
        out.push(t1, state.clone(), false);
    }
    Ok(out)
}

/// Heisenberg flow Y_t = phi_t(B) on the same noise increments.
///
/// The flow is tracked as a superoperator composed step by step. For the
/// diffusive target the per-step map keeps the realized squared increment,
///   B -> B - drift(B) dt + noise(B) dQ + quad(B) (dQ^2 - dt),
/// which tracks V'BV at first order in dt per path; the plain first-order
/// map only tracks it at order dt^(1/2). The jump target uses
///   B -> B - drift(B) dt + jump(B) dP,  dP = dN - dt.
pub fn heisenberg_flow(
    coeffs: &ClassicalCoeffs,
    b: &ComplexMatrix,
    path: &NoisePath,
) -> Result<Vec<ComplexMatrix>> {
    let n = coeffs.k.rows();
    if b.rows() != n || b.cols() != n {
        return Err(Error::ShapeMismatch("flow observable must be n x n".into()));
    }
    let kind_ok = matches!(
        (coeffs.target, path.kind),
        (ClassicalTarget::Diffusive, NoiseKind::Wiener)
            | (ClassicalTarget::Jump, NoiseKind::Poisson)
    );
    if !kind_ok {
        return Err(Error::Invalid(
            "noise kind does not match the classical target".into(),
        ));
    }
    let id = ComplexMatrix::identity(n * n);
    let m_drift = coeffs.drift.matrix();
    let m_noise = coeffs.noise.matrix();
    let m_quad = coeffs.quadratic.matrix();

    let mut phi = id.clone();
    let mut out = Vec::with_capacity(path.steps + 1);
    out.push(phi.apply_vec(&b.vectorize()));
    let counts = if path.kind == NoiseKind::Poisson {
        path.step_jump_counts()
    } else {
        Vec::new()
    };
    for step in 0..path.steps {
        let step_map = match coeffs.target {
            ClassicalTarget::Diffusive => {
                let dq = path.increments[step];
                let mut m = &id - &m_drift.scale_re(path.dt);
                m = &m + &m_noise.scale_re(dq);
                &m + &m_quad.scale_re(dq * dq - path.dt)
            }
            ClassicalTarget::Jump => {
                let dp = counts[step] as f64 - path.dt;
                let m = &id - &m_drift.scale_re(path.dt);
                &m + &m_noise.scale_re(dp)
            }
        };
        phi = &phi * &step_map;
        out.push(phi.apply_vec(&b.vectorize()));
    }
    Ok(out
        .into_iter()
        .map(|v| ComplexMatrix::from_vectorized(n, &v))
        .collect())
}

/// Per-step residual of the three-term product identity
/// d(V'V) = dV'V + V'dV + dV'dV.
///
/// Diffusive: dV is taken from the equation right-hand side
/// (-KVdt + LVdQ) and the quadratic term keeps products the multiplication
/// table rates at order dt (the realized dQ^2), dropping table-zero
/// products (dt dQ, dt^2); the residual is then O(dt^2 + dt|dQ|) for the
/// Euler-Maruyama sequence. Jump: dV is re-derived from the piecewise
/// exponentials and jump events of the exact scheme, so the identity holds
/// to roundoff.
pub fn ito_step_check(
    result: &TrajectoryResult,
    k: &ComplexMatrix,
    l: &ComplexMatrix,
    path: &NoisePath,
) -> Result<f64> {
    let mut worst = 0.0f64;
    match path.kind {
        NoiseKind::Wiener => {
            let rows = result.states.len();
            if rows != path.steps + 1 {
                return Err(Error::ShapeMismatch(
                    "trajectory rows do not match the path".into(),
                ));
            }
            for step in 0..path.steps {
                let v = &result.states[step];
                let dq = path.increments[step];
                let m0 = &v.adjoint() * v;
                let m1 = &result.states[step + 1].adjoint() * &result.states[step + 1];
                let dv = &(l * v).scale_re(dq) - &(k * v).scale_re(path.dt);
                let quad = (&(l * v).adjoint() * &(l * v)).scale_re(dq * dq);
                let expansion = &(&(&dv.adjoint() * v) + &(&v.adjoint() * &dv)) + &quad;
                worst = worst.max((&(&m1 - &m0) - &expansion).max_abs());
            }
        }
        NoiseKind::Poisson => {
            let gen = k + l;
            for i in 0..result.states.len() - 1 {
                let v = &result.states[i];
                let next = &result.states[i + 1];
                let m0 = &v.adjoint() * v;
                let m1 = &next.adjoint() * next;
                let dv = if result.jumps[i + 1] {
                    // segment up to the jump, then the pure jump event dV = L V
                    let tau = result.times[i + 1] - result.times[i];
                    let prop = matrix_exp(&(-&gen).scale_re(tau))?;
                    let pre = &prop * v;
                    let m_pre = &pre.adjoint() * &pre;
                    let dv_seg = &pre - v;
                    let seg = &(&(&dv_seg.adjoint() * v) + &(&v.adjoint() * &dv_seg))
                        + &(&dv_seg.adjoint() * &dv_seg);
                    worst = worst.max((&(&m_pre - &m0) - &seg).max_abs());
                    let dv_jump = l * &pre;
                    let event = &(&(&dv_jump.adjoint() * &pre) + &(&pre.adjoint() * &dv_jump))
                        + &(&dv_jump.adjoint() * &dv_jump);
                    worst = worst.max((&(&m1 - &m_pre) - &event).max_abs());
                    continue;
                } else {
                    let tau = result.times[i + 1] - result.times[i];
                    let prop = matrix_exp(&(-&gen).scale_re(tau))?;
                    &(&prop * v) - v
                };
                let expansion =
                    &(&(&dv.adjoint() * v) + &(&v.adjoint() * &dv)) + &(&dv.adjoint() * &dv);
                worst = worst.max((&(&m1 - &m0) - &expansion).max_abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Diffusive,
    Jump,
}

/// Composition check of the cocycle property: one pass over [0, s + r]
/// against the run over [0, s] composed with the run over [0, r] driven by
/// the shifted tail of the same path. The discrete schemes are per-step
/// linear maps, so the two routes differ only by re-association of
/// floating-point products.
pub fn cocycle_compose_check(
    scheme: Scheme,
    k: &ComplexMatrix,
    l: &ComplexMatrix,
    path: &NoisePath,
    split_step: usize,
) -> Result<f64> {
    if split_step > path.steps {
        return Err(Error::IndexOutOfRange("off-grid split".into()));
    }
    let id = ComplexMatrix::identity(k.rows());
    let solve = |p: &NoisePath, v0: &ComplexMatrix| -> Result<TrajectoryResult> {
        match scheme {
            Scheme::Diffusive => solve_diffusive(k, l, v0, p),
            Scheme::Jump => solve_jump(k, l, v0, p),
        }
    };
    let full = solve(path, &id)?;
    let first = solve(&path.head(split_step)?, &id)?;
    let second = solve(&path.tail(split_step)?, &id)?;
    let v_full = full.states.last().expect("nonempty run");
    let composed =
        second.states.last().expect("nonempty run") * first.states.last().expect("nonempty run");
    Ok(v_full.max_abs_diff(&composed))
}

/// Ensemble specification for [`ensemble_average`].
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub scheme: Scheme,
    pub k: ComplexMatrix,
    pub l: ComplexMatrix,
    pub psi0: ComplexMatrix,
    pub dt: f64,
    pub steps: usize,
}

/// Trajectory-averaged statistics on the uniform grid.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// rho_bar_t = E[psi psi'] (unnormalized second moment).
    pub rho_bar: Vec<ComplexMatrix>,
    pub mean_norm2: Vec<f64>,
    pub se_norm2: Vec<f64>,
    /// Standard error of each diagonal entry of rho_bar.
    pub se_rho_diag: Vec<Vec<f64>>,
    pub n_traj: usize,
}

#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn merge(&mut self, other: &Kahan) {
        self.add(other.sum);
        self.add(-other.carry);
    }
}

struct ChunkAccum {
    // per grid time: 2 n^2 rho components, norm2, norm4, n diagonal 4th moments
    cells: Vec<Kahan>,
}

const ENSEMBLE_CHUNK: usize = 256;

fn accumulate_path(
    spec: &EnsembleSpec,
    seed: u64,
    cells: &mut [Kahan],
    n: usize,
    grid_len: usize,
) -> Result<()> {
    let path = match spec.scheme {
        Scheme::Diffusive => NoisePath::wiener(spec.dt, spec.steps, seed),
        Scheme::Jump => NoisePath::poisson(spec.dt, spec.steps, seed),
    };
    let traj = match spec.scheme {
        Scheme::Diffusive => solve_diffusive(&spec.k, &spec.l, &spec.psi0, &path)?,
        Scheme::Jump => solve_jump(&spec.k, &spec.l, &spec.psi0, &path)?,
    };
    let grid = traj.grid_indices();
    debug_assert_eq!(grid.len(), grid_len);
    let stride = 2 * n * n + 2 + n;
    for (g, &row) in grid.iter().enumerate() {
        let psi = &traj.states[row];
        let base = g * stride;
        let mut idx = base;
        for i in 0..n {
            for j in 0..n {
                let v = psi[(i, 0)] * psi[(j, 0)].conj();
                cells[idx].add(v.re);
                cells[idx + 1].add(v.im);
                idx += 2;
            }
        }
        let norm2 = traj.norm2[row];
        cells[idx].add(norm2);
        cells[idx + 1].add(norm2 * norm2);
        idx += 2;
        for i in 0..n {
            let p = psi[(i, 0)].norm_sqr();
            cells[idx + i].add(p * p);
        }
    }
    Ok(())
}

/// Deterministic parallel ensemble average.
///
/// Per-path seeds are master_seed XOR path_index. Paths are processed in
/// fixed chunks, each chunk Kahan-summed into its own partial, and the
/// partials merged in chunk order, so the result does not depend on thread
/// scheduling.
pub fn ensemble_average(
    spec: &EnsembleSpec,
    n_traj: usize,
    master_seed: u64,
) -> Result<EnsembleStats> {
    if n_traj < 2 {
        return Err(Error::Invalid(
            "ensemble needs at least 2 trajectories".into(),
        ));
    }
    if spec.psi0.cols() != 1 {
        return Err(Error::ShapeMismatch(
            "ensemble initial state must be a column vector".into(),
        ));
    }
    let n = spec.k.rows();
    let grid_len = spec.steps + 1;
    let stride = 2 * n * n + 2 + n;

    let chunk_starts: Vec<usize> = (0..n_traj).step_by(ENSEMBLE_CHUNK).collect();
    let partials: Vec<Result<ChunkAccum>> = chunk_starts
        .par_iter()
        .map(|&start| {
            let end = (start + ENSEMBLE_CHUNK).min(n_traj);
            let mut acc = ChunkAccum {
                cells: vec![Kahan::default(); grid_len * stride],
            };
            for path_index in start..end {
                accumulate_path(
                    spec,
                    master_seed ^ path_index as u64,
                    &mut acc.cells,
                    n,
                    grid_len,
                )?;
            }
            Ok(acc)
        })
        .collect();

    let mut total = vec![Kahan::default(); grid_len * stride];
    for partial in partials {
        let partial = partial?;
        for (t, p) in total.iter_mut().zip(&partial.cells) {
            t.merge(p);
        }
    }

    let nf = n_traj as f64;
    let mut times = Vec::with_capacity(grid_len);
    let mut rho_bar = Vec::with_capacity(grid_len);
    let mut mean_norm2 = Vec::with_capacity(grid_len);
    let mut se_norm2 = Vec::with_capacity(grid_len);
    let mut se_rho_diag = Vec::with_capacity(grid_len);
    for g in 0..grid_len {
        times.push(spec.dt * g as f64);
        let base = g * stride;
        let rho = ComplexMatrix::from_fn(n, n, |i, j| {
            let idx = base + 2 * (i * n + j);
            C64::new(total[idx].sum / nf, total[idx + 1].sum / nf)
        });
        let m = total[base + 2 * n * n].sum / nf;
        let m2 = total[base + 2 * n * n + 1].sum / nf;
        let var = ((m2 - m * m) * nf / (nf - 1.0)).max(0.0);
        mean_norm2.push(m);
        se_norm2.push((var / nf).sqrt());
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            let mean_ii = rho[(i, i)].re;
            let m2_ii = total[base + 2 * n * n + 2 + i].sum / nf;
            let var_ii = ((m2_ii - mean_ii * mean_ii) * nf / (nf - 1.0)).max(0.0);
            diag.push((var_ii / nf).sqrt());
        }
        se_rho_diag.push(diag);
        rho_bar.push(rho);
    }
    Ok(EnsembleStats {
        times,
        rho_bar,
        mean_norm2,
        se_norm2,
        se_rho_diag,
        n_traj,
    })
}

/// RK4 one-step matrix for the linear system V' = A(t) V.
///
/// Coefficients in this crate are piecewise constant in time, so the
/// generator is frozen at the step midpoint: a step lying inside one piece
/// is then exactly the classical RK4 step for the autonomous system, which
/// for a constant matrix is the fourth-order Taylor polynomial of exp(dt A).
/// Breakpoints should be aligned with the grid; a step straddling one loses
/// the formal order at that step.
pub(crate) fn rk4_step_matrix(a: impl Fn(f64) -> ComplexMatrix, t: f64, dt: f64) -> ComplexMatrix {
    let am = a(t + 0.5 * dt);
    let id = ComplexMatrix::identity(am.rows());
    let mut r = &id + &am.scale_re(dt / 4.0);
    r = &id + &(&am * &r).scale_re(dt / 3.0);
    r = &id + &(&am * &r).scale_re(dt / 2.0);
    &id + &(&am * &r).scale_re(dt)
}

/// Deterministic vector cocycle on a coherent test function: RK4 on
/// dV/dt = -(K + sum_m K_m h^m(t)) V, V_0 = I. Returns V on the grid.
pub fn vector_cocycle_ode(
    model: &ModelSpec,
    h: &CoherentFunction,
    t_final: f64,
    dt: f64,
) -> Result<Vec<ComplexMatrix>> {
    if h.d() != model.d {
        return Err(Error::ShapeMismatch(
            "coherent function dimension mismatch".into(),
        ));
    }
    let steps = steps_for(t_final, dt)?;
    let n = model.n;
    let gen = |t: f64| -> ComplexMatrix {
        let mut a = model.drift.clone();
        if let Some(vals) = h.value_at(t) {
            for (ch, kn) in model.noise_drift.iter().enumerate() {
                a = &a + &kn.scale(vals[ch]);
            }
        }
        -&a
    };
    let mut v = ComplexMatrix::identity(n);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(v.clone());
    for step in 0..steps {
        let r = rk4_step_matrix(gen, dt * step as f64, dt);
        v = &r * &v;
        if !v.is_finite() {
            return Err(Error::NumericalBreakdown {
                step,
                what: "cocycle ODE state non-finite".into(),
            });
        }
        out.push(v.clone());
    }
    Ok(out)
}

/// Grid length for a (t_final, dt) pair; t_final must be an integer
/// multiple of dt.
pub fn steps_for(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final >= dt) {
        return Err(Error::Invalid("need dt > 0 and t_final >= dt".into()));
    }
    let steps = (t_final / dt).round() as usize;
    if ((steps as f64 * dt) - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::Invalid(
            "t_final must be an integer multiple of dt".into(),
        ));
    }
    Ok(steps.max(1))
}
