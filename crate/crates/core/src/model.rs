//! Structured generator data and its JSON schema.
//!
//! A model bundles the operators {n, d, r, H, L^i, L^i_n, K, K_n, D} from
//! which germ matrices, master equations, dilations and trajectories are
//! built. K and K_n may be omitted; the defaults
//!     K   = iH + (1/2)(sum_i L^i' L^i - D)
//!     K_n = sum_i L^i' L^i_n
//! close the model so that sum_i L^i' L^i = K + K' + D holds by
//! construction (martingale closure when D = 0).

use num_complex::Complex64;
use serde_json::Value;

use crate::linalg::{seeded_hermitian, seeded_matrix, ComplexMatrix, C64};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ModelSpec {
    /// System dimension.
    pub n: usize,
    /// Noise dimension.
    pub d: usize,
    /// Kraus multiplicity.
    pub r: usize,
    /// Hamiltonian H = H'.
    pub hamiltonian: ComplexMatrix,
    /// Coupling operators L^i, i = 1..r.
    pub coupling: Vec<ComplexMatrix>,
    /// Exchange couplings L^i_n, outer index the noise channel n = 1..d,
    /// inner index the Kraus index i = 1..r.
    pub exchange_coupling: Vec<Vec<ComplexMatrix>>,
    /// Drift operator K.
    pub drift: ComplexMatrix,
    /// Annihilation drift operators K_n, n = 1..d.
    pub noise_drift: Vec<ComplexMatrix>,
    /// Submartingale defect D = gamma(I), Hermitian and <= 0.
    pub defect: ComplexMatrix,
    /// True when K was filled in by the default closure.
    pub drift_derived: bool,
    /// True when K_n was filled in by the default closure.
    pub noise_drift_derived: bool,
    /// Diagnostic hook: negate the contribution of this Kraus index when
    /// building germs, producing a known conditional-positivity violation.
    pub negate_kraus: Option<usize>,
}

impl ModelSpec {
    /// Validate and close a model; `drift`/`noise_drift` are derived when
    /// absent. Collects every violation rather than stopping at the first.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        d: usize,
        r: usize,
        hamiltonian: ComplexMatrix,
        coupling: Vec<ComplexMatrix>,
        exchange_coupling: Vec<Vec<ComplexMatrix>>,
        drift: Option<ComplexMatrix>,
        noise_drift: Option<Vec<ComplexMatrix>>,
        defect: Option<ComplexMatrix>,
    ) -> Result<Self> {
        let mut errors: Vec<String> = Vec::new();
        if n == 0 {
            errors.push("n: must be positive".into());
        }
        if d == 0 {
            errors.push("d: must be positive".into());
        }
        if r == 0 {
            errors.push("r: must be positive".into());
        }
        let shape_ok = |m: &ComplexMatrix| m.rows() == n && m.cols() == n;
        if !shape_ok(&hamiltonian) {
            errors.push(format!(
                "H: expected {n}x{n}, got {}x{}",
                hamiltonian.rows(),
                hamiltonian.cols()
            ));
        } else {
            let res = hamiltonian.hermiticity_residual();
            if res > 1e-10 {
                errors.push(format!("H: not Hermitian, residual {res:.3e}"));
            }
        }
        if coupling.len() != r {
            errors.push(format!("L: expected {r} matrices, got {}", coupling.len()));
        }
        for (i, l) in coupling.iter().enumerate() {
            if !shape_ok(l) {
                errors.push(format!(
                    "L[{i}]: expected {n}x{n}, got {}x{}",
                    l.rows(),
                    l.cols()
                ));
            }
        }
        if exchange_coupling.len() != d {
            errors.push(format!(
                "Ln: expected {d} channels, got {}",
                exchange_coupling.len()
            ));
        }
        for (ch, row) in exchange_coupling.iter().enumerate() {
            if row.len() != r {
                errors.push(format!(
                    "Ln[{ch}]: expected {r} matrices, got {}",
                    row.len()
                ));
            }
            for (i, l) in row.iter().enumerate() {
                if !shape_ok(l) {
                    errors.push(format!(
                        "Ln[{ch}][{i}]: expected {n}x{n}, got {}x{}",
                        l.rows(),
                        l.cols()
                    ));
                }
            }
        }
        let defect = defect.unwrap_or_else(|| ComplexMatrix::zeros(n, n));
        if !shape_ok(&defect) {
            errors.push(format!(
                "D: expected {n}x{n}, got {}x{}",
                defect.rows(),
                defect.cols()
            ));
        } else {
            let res = defect.hermiticity_residual();
            if res > 1e-10 {
                errors.push(format!("D: not Hermitian, residual {res:.3e}"));
            } else if let Ok(vals) = crate::linalg::eigh_values(&defect.hermitian_part()) {
                if vals.last().copied().unwrap_or(0.0) > 1e-8 {
                    errors.push(format!(
                        "D: not <= 0, max eigenvalue {:.3e}",
                        vals.last().unwrap()
                    ));
                }
            }
        }
        if !errors.is_empty() {
            return Err(Error::ModelValidation(errors));
        }

        let phi_identity = {
            let mut acc = ComplexMatrix::zeros(n, n);
            for l in &coupling {
                acc = &acc + &(&l.adjoint() * l);
            }
            acc
        };

        let drift_derived = drift.is_none();
        let drift = match drift {
            Some(k) => {
                if !shape_ok(&k) {
                    errors.push(format!(
                        "K: expected {n}x{n}, got {}x{}",
                        k.rows(),
                        k.cols()
                    ));
                } else {
                    // theory fixes D = phi(I) - K - K'; an explicit K must agree
                    let implied = &(&phi_identity - &k) - &k.adjoint();
                    if implied.max_abs_diff(&defect) > 1e-8 {
                        errors.push(format!(
                            "K: inconsistent with D, residual {:.3e} in K + K' + D - sum L'L",
                            implied.max_abs_diff(&defect)
                        ));
                    }
                }
                k
            }
            None => {
                // K = iH + (1/2)(phi(I) - D)
                let half = &(&phi_identity - &defect).scale_re(0.5);
                &hamiltonian.scale(C64::new(0.0, 1.0)) + half
            }
        };

        let noise_drift_derived = noise_drift.is_none();
        let noise_drift = match noise_drift {
            Some(kn) => {
                if kn.len() != d {
                    errors.push(format!("Kn: expected {d} matrices, got {}", kn.len()));
                }
                for (ch, k) in kn.iter().enumerate() {
                    if !shape_ok(k) {
                        errors.push(format!(
                            "Kn[{ch}]: expected {n}x{n}, got {}x{}",
                            k.rows(),
                            k.cols()
                        ));
                    }
                }
                kn
            }
            None => (0..d)
                .map(|ch| {
                    let mut acc = ComplexMatrix::zeros(n, n);
                    for (i, l) in coupling.iter().enumerate() {
                        acc = &acc + &(&l.adjoint() * &exchange_coupling[ch][i]);
                    }
                    acc
                })
                .collect(),
        };

        if !errors.is_empty() {
            return Err(Error::ModelValidation(errors));
        }

        Ok(Self {
            n,
            d,
            r,
            hamiltonian,
            coupling,
            exchange_coupling,
            drift,
            noise_drift,
            defect,
            drift_derived,
            noise_drift_derived,
            negate_kraus: None,
        })
    }

    /// sum_i L^i' L^i.
    pub fn phi_identity(&self) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.n, self.n);
        for l in &self.coupling {
            acc = &acc + &(&l.adjoint() * l);
        }
        acc
    }

    /// Parse from the JSON schema
    /// {"n","d","r","H","L","Ln","K"?,"Kn"?,"D"?,"negate_kraus"?}.
    /// A bare number x stands for x times the identity.
    pub fn from_json(value: &Value) -> Result<Self> {
        let mut errors: Vec<String> = Vec::new();
        let obj = match value.as_object() {
            Some(o) => o,
            None => {
                return Err(Error::ModelValidation(vec![
                    "model: not a JSON object".into()
                ]))
            }
        };
        let get_dim = |key: &str, errors: &mut Vec<String>| -> usize {
            match obj.get(key).and_then(Value::as_u64) {
                Some(v) if v > 0 => v as usize,
                Some(_) => {
                    errors.push(format!("{key}: must be positive"));
                    1
                }
                None => {
                    errors.push(format!("{key}: missing or not a positive integer"));
                    1
                }
            }
        };
        let n = get_dim("n", &mut errors);
        let d = get_dim("d", &mut errors);
        let r = get_dim("r", &mut errors);

        let h = match obj.get("H") {
            Some(v) => matrix_from_json(v, n, "H").unwrap_or_else(|e| {
                errors.push(e);
                ComplexMatrix::zeros(n, n)
            }),
            None => {
                errors.push("H: missing".into());
                ComplexMatrix::zeros(n, n)
            }
        };

        let coupling = match obj.get("L").and_then(Value::as_array) {
            Some(arr) => arr
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    matrix_from_json(v, n, &format!("L[{i}]")).unwrap_or_else(|e| {
                        errors.push(e);
                        ComplexMatrix::zeros(n, n)
                    })
                })
                .collect(),
            None => {
                errors.push("L: missing or not an array".into());
                vec![ComplexMatrix::zeros(n, n); r]
            }
        };

        let exchange = match obj.get("Ln").and_then(Value::as_array) {
            Some(arr) => arr
                .iter()
                .enumerate()
                .map(|(ch, row)| match row.as_array() {
                    Some(inner) => inner
                        .iter()
                        .enumerate()
                        .map(|(i, v)| {
                            matrix_from_json(v, n, &format!("Ln[{ch}][{i}]")).unwrap_or_else(|e| {
                                errors.push(e);
                                ComplexMatrix::zeros(n, n)
                            })
                        })
                        .collect(),
                    None => {
                        errors.push(format!("Ln[{ch}]: not an array"));
                        vec![ComplexMatrix::zeros(n, n); r]
                    }
                })
                .collect(),
            None => {
                errors.push("Ln: missing or not an array".into());
                vec![vec![ComplexMatrix::zeros(n, n); r]; d]
            }
        };

        let opt_matrix = |key: &str, errors: &mut Vec<String>| -> Option<ComplexMatrix> {
            obj.get(key).map(|v| {
                matrix_from_json(v, n, key).unwrap_or_else(|e| {
                    errors.push(e);
                    ComplexMatrix::zeros(n, n)
                })
            })
        };
        let k = opt_matrix("K", &mut errors);
        let defect = opt_matrix("D", &mut errors);
        let kn = obj.get("Kn").map(|v| match v.as_array() {
            Some(arr) => arr
                .iter()
                .enumerate()
                .map(|(ch, m)| {
                    matrix_from_json(m, n, &format!("Kn[{ch}]")).unwrap_or_else(|e| {
                        errors.push(e);
                        ComplexMatrix::zeros(n, n)
                    })
                })
                .collect(),
            None => {
                errors.push("Kn: not an array".into());
                vec![ComplexMatrix::zeros(n, n); d]
            }
        });

        let negate_kraus = match obj.get("negate_kraus") {
            None => None,
            Some(v) => match v.as_u64() {
                Some(i) if (i as usize) < r => Some(i as usize),
                _ => {
                    errors.push(format!("negate_kraus: must be an integer in 0..{r}"));
                    None
                }
            },
        };

        // run semantic validation even when parse errors exist so the report
        // lists every offending field
        match Self::new(n, d, r, h, coupling, exchange, k, kn, defect) {
            Ok(mut model) if errors.is_empty() => {
                model.negate_kraus = negate_kraus;
                Ok(model)
            }
            Ok(_) => Err(Error::ModelValidation(errors)),
            Err(Error::ModelValidation(more)) => {
                errors.extend(more);
                Err(Error::ModelValidation(errors))
            }
            Err(e) => Err(e),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value =
            serde_json::from_str(s).map_err(|e| Error::Invalid(format!("JSON parse: {e}")))?;
        Self::from_json(&v)
    }

    /// Echo the model, with derived operators filled in, as a JSON value.
    pub fn to_json(&self) -> Value {
        let mat = |m: &ComplexMatrix| serde_json::to_value(m).expect("matrix serializes");
        let mut obj = serde_json::Map::new();
        obj.insert("n".into(), Value::from(self.n as u64));
        obj.insert("d".into(), Value::from(self.d as u64));
        obj.insert("r".into(), Value::from(self.r as u64));
        obj.insert("H".into(), mat(&self.hamiltonian));
        obj.insert(
            "L".into(),
            Value::Array(self.coupling.iter().map(&mat).collect()),
        );
        obj.insert(
            "Ln".into(),
            Value::Array(
                self.exchange_coupling
                    .iter()
                    .map(|row| Value::Array(row.iter().map(&mat).collect()))
                    .collect(),
            ),
        );
        obj.insert("K".into(), mat(&self.drift));
        obj.insert(
            "Kn".into(),
            Value::Array(self.noise_drift.iter().map(&mat).collect()),
        );
        obj.insert("D".into(), mat(&self.defect));
        obj.insert("K_derived".into(), Value::Bool(self.drift_derived));
        obj.insert("Kn_derived".into(), Value::Bool(self.noise_drift_derived));
        if let Some(i) = self.negate_kraus {
            obj.insert("negate_kraus".into(), Value::from(i as u64));
        }
        Value::Object(obj)
    }

    /// Canonical amplitude-damping qubit: L = sigma-minus, H = 0, D = 0,
    /// derived K = diag(0, 1/2). Basis index 1 is the excited state.
    pub fn amplitude_damping() -> Self {
        let sm = ComplexMatrix::unit(2, 0, 1);
        Self::new(
            2,
            1,
            1,
            ComplexMatrix::zeros(2, 2),
            vec![sm],
            vec![vec![ComplexMatrix::zeros(2, 2)]],
            None,
            None,
            None,
        )
        .expect("amplitude damping model is valid")
    }

    /// Amplitude damping with a nonzero submartingale defect
    /// D = -diag(0, defect_rate).
    pub fn amplitude_damping_with_defect(defect_rate: f64) -> Self {
        let sm = ComplexMatrix::unit(2, 0, 1);
        let d = ComplexMatrix::diag(&[C64::new(0.0, 0.0), C64::new(-defect_rate, 0.0)]);
        Self::new(
            2,
            1,
            1,
            ComplexMatrix::zeros(2, 2),
            vec![sm],
            vec![vec![ComplexMatrix::zeros(2, 2)]],
            None,
            None,
            Some(d),
        )
        .expect("defect model is valid")
    }

    /// Isometric (Hudson-Evans) model: r = d, L^i_n = s[i][n] I with `s`
    /// unitary on the noise channels, L = 0, H = 0, matched K_n.
    pub fn isometric(n: usize, s: &ComplexMatrix) -> Self {
        let d = s.rows();
        assert!(s.is_square(), "noise rotation must be square");
        let coupling = vec![ComplexMatrix::zeros(n, n); d];
        let exchange: Vec<Vec<ComplexMatrix>> = (0..d)
            .map(|ch| {
                (0..d)
                    .map(|i| ComplexMatrix::identity(n).scale(s[(i, ch)]))
                    .collect()
            })
            .collect();
        Self::new(
            n,
            d,
            d,
            ComplexMatrix::zeros(n, n),
            coupling,
            exchange,
            None,
            None,
            None,
        )
        .expect("isometric model is valid")
    }

    /// Deterministic pseudo-random structured model; dimensions cycle over
    /// n in 2..=4, d in 1..=2, r in 1..=3 and every third seed carries a
    /// nonzero defect D < 0.
    pub fn seeded(seed: u64) -> Self {
        let n = 2 + (seed % 3) as usize;
        let d = 1 + ((seed / 3) % 2) as usize;
        let r = 1 + ((seed / 7) % 3) as usize;
        let h = seeded_hermitian(seed ^ 0x11, n, 0.4);
        let coupling: Vec<ComplexMatrix> = (0..r)
            .map(|i| seeded_matrix(seed ^ (0x100 + i as u64), n, n, 0.5))
            .collect();
        let exchange: Vec<Vec<ComplexMatrix>> = (0..d)
            .map(|ch| {
                (0..r)
                    .map(|i| seeded_matrix(seed ^ (0x1000 + (ch * 8 + i) as u64), n, n, 0.4))
                    .collect()
            })
            .collect();
        let defect = if seed.is_multiple_of(3) {
            let g = seeded_matrix(seed ^ 0x2222, n, n, 0.3);
            Some(-&(&g * &g.adjoint()))
        } else {
            None
        };
        Self::new(n, d, r, h, coupling, exchange, None, None, defect)
            .expect("seeded model is valid")
    }
}

/// Parse one matrix from JSON: nested rows of [re, im] pairs, or a bare
/// number x meaning x times the n x n identity.
pub fn matrix_from_json(
    v: &Value,
    n: usize,
    field: &str,
) -> std::result::Result<ComplexMatrix, String> {
    if let Some(x) = v.as_f64() {
        return Ok(ComplexMatrix::identity(n).scale(Complex64::new(x, 0.0)));
    }
    let m: ComplexMatrix = serde_json::from_value(v.clone())
        .map_err(|e| format!("{field}: bad matrix encoding ({e})"))?;
    if m.rows() != n || m.cols() != n {
        return Err(format!(
            "{field}: expected {n}x{n}, got {}x{}",
            m.rows(),
            m.cols()
        ));
    }
    if !m.is_finite() {
        return Err(format!("{field}: non-finite entries"));
    }
    Ok(m)
}
