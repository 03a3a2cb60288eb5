//! `master`: integrate the trajectory-averaged master equation
//! drho/dt = sum_i L^i rho L^i' - K rho - rho K' with RK4; the oracle the
//! unraveling ensembles are compared against.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use qsc_core::generator::lindblad;
use qsc_core::ComplexMatrix;

use crate::commands::{load_matrix, load_model};
use crate::output::{emit_json, fmt_float, model_error, validate_numeric, write_file, CliError};
use crate::Format;

pub fn run(
    model_path: &Path,
    rho0_path: &Path,
    t_final: f64,
    dt: f64,
    out: &Path,
    format: Format,
) -> Result<u8, CliError> {
    validate_numeric(dt, t_final, 1, 1.0)?;
    let model = load_model(model_path)?;
    let n = model.n;
    let rho0 = load_matrix(rho0_path, n, "rho0")?;
    if !rho0.is_hermitian(1e-8) {
        return Err(model_error("rho0: not Hermitian"));
    }
    let steps =
        qsc_core::trajectory::steps_for(t_final, dt).map_err(|e| model_error(e.to_string()))?;
    let pair = lindblad(&model);
    let gen = pair.schrodinger.matrix();

    // constant generator: RK4 step = fourth-order Taylor of exp(dt G)
    let id = ComplexMatrix::identity(n * n);
    let mut step_m = &id + &gen.scale_re(dt / 4.0);
    step_m = &id + &(gen * &step_m).scale_re(dt / 3.0);
    step_m = &id + &(gen * &step_m).scale_re(dt / 2.0);
    let step_m = &id + &(gen * &step_m).scale_re(dt);

    let mut csv = String::new();
    csv.push_str("time");
    for i in 0..n {
        for j in 0..n {
            let _ = write!(csv, ",rho_{i}{j}_re,rho_{i}{j}_im");
        }
    }
    csv.push('\n');
    let mut rho_vec = rho0.vectorize();
    let mut final_trace = rho0.trace();
    for step in 0..=steps {
        let t = dt * step as f64;
        let rho = ComplexMatrix::from_vectorized(n, &rho_vec);
        let _ = write!(csv, "{}", fmt_float(t));
        for i in 0..n {
            for j in 0..n {
                let _ = write!(
                    csv,
                    ",{},{}",
                    fmt_float(rho[(i, j)].re),
                    fmt_float(rho[(i, j)].im)
                );
            }
        }
        csv.push('\n');
        final_trace = rho.trace();
        if step < steps {
            rho_vec = step_m.apply_vec(&rho_vec);
        }
    }
    write_file(out, &csv)?;

    let report = json!({
        "schema_version": qsc_core::SCHEMA_VERSION,
        "t_final": t_final,
        "dt": dt,
        "final_trace_re": final_trace.re,
        "out": out.display().to_string(),
    });
    match format {
        Format::Json => println!("{}", emit_json(&report)),
        Format::Text => println!(
            "wrote {} rows to {} (final trace {})",
            steps + 1,
            out.display(),
            fmt_float(final_trace.re)
        ),
    }
    Ok(0)
}
