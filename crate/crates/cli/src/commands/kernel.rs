//! `kernel`: integrate the coherent-kernel maps for every ordered pair of
//! test functions, optionally eigencheck kernel positivity on the grid and
//! compare the integral-recursion iterates against the ODE solution.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use qsc_core::generator::model_germ;
use qsc_core::kernel::{
    all_pairs, kernel_ode_solve, kernel_psd_check, picard_iterate, CoherentFunction,
    KernelFamilyElement,
};
use qsc_core::linalg::seeded_unit_vector;
use qsc_core::ComplexMatrix;

use crate::commands::load_model;
use crate::output::{
    emit_json, flag_error, fmt_float, json_error, model_error, parse_json, read_file,
    validate_numeric, write_file, CliError,
};
use crate::Format;

#[allow(clippy::too_many_arguments)]
pub fn run(
    model_path: &Path,
    coherent_path: &Path,
    t_final: f64,
    dt: f64,
    out: &Path,
    psd_check: bool,
    psd_tol: f64,
    picard: Option<usize>,
    format: Format,
) -> Result<u8, CliError> {
    validate_numeric(dt, t_final, 1, psd_tol)?;
    let model = load_model(model_path)?;
    let germ = model_germ(&model).map_err(|e| model_error(e.to_string()))?;

    let text = read_file(coherent_path)?;
    let value = parse_json(coherent_path, &text)?;
    let funcs_json = value
        .get("functions")
        .and_then(|v| v.as_array())
        .ok_or_else(|| {
            json_error(format!(
                "{}: missing 'functions' array",
                coherent_path.display()
            ))
        })?;
    let mut functions = Vec::with_capacity(funcs_json.len());
    for (i, f) in funcs_json.iter().enumerate() {
        let func = CoherentFunction::from_json(f)
            .map_err(|e| model_error(format!("functions[{i}]: {e}")))?;
        if func.d() != model.d {
            return Err(model_error(format!(
                "functions[{i}]: dimension {} does not match model d={}",
                func.d(),
                model.d
            )));
        }
        functions.push(func);
    }
    if functions.is_empty() {
        return Err(flag_error("need at least one coherent function"));
    }

    let pairs = all_pairs(functions.len());
    let run = kernel_ode_solve(&germ, &functions, &pairs, t_final, dt)
        .map_err(|e| model_error(e.to_string()))?;

    // CSV: one row per (time, pair), the full superoperator matrix flattened
    let n = model.n;
    let nn = n * n;
    let mut csv = String::new();
    csv.push_str("time,f_idx,h_idx");
    for r in 0..nn {
        for c in 0..nn {
            let _ = write!(csv, ",phi_{r}_{c}_re,phi_{r}_{c}_im");
        }
    }
    csv.push('\n');
    for (g, &t) in run.times.iter().enumerate() {
        for (pi, &(fi, hi)) in run.pairs.iter().enumerate() {
            let _ = write!(csv, "{},{},{}", fmt_float(t), fi, hi);
            let m = run.states[g][pi].matrix();
            for r in 0..nn {
                for c in 0..nn {
                    let _ = write!(
                        csv,
                        ",{},{}",
                        fmt_float(m[(r, c)].re),
                        fmt_float(m[(r, c)].im)
                    );
                }
            }
            csv.push('\n');
        }
    }
    write_file(out, &csv)?;

    let mut report = json!({
        "schema_version": qsc_core::SCHEMA_VERSION,
        "n": n,
        "d": model.d,
        "functions": functions.len(),
        "pairs": run.pairs.len(),
        "t_final": t_final,
        "dt": dt,
        "out": out.display().to_string(),
    });
    let mut exit = 0u8;

    if psd_check {
        // family: every function paired with every matrix unit, seeded probes
        let mut family = Vec::new();
        for func in 0..functions.len() {
            for p in 0..n {
                for q in 0..n {
                    family.push(KernelFamilyElement {
                        func,
                        op: ComplexMatrix::unit(n, p, q),
                        xi: seeded_unit_vector(0xfa71 + (func * n * n + p * n + q) as u64, n),
                    });
                }
            }
        }
        let mut min_eig = f64::INFINITY;
        for g in 0..run.times.len() {
            let rep = kernel_psd_check(&run, g, &family, psd_tol)
                .map_err(|e| model_error(e.to_string()))?;
            min_eig = min_eig.min(rep.min_eig);
        }
        let is_psd = min_eig >= -psd_tol;
        if !is_psd {
            exit = 1;
        }
        let obj = report.as_object_mut().expect("report is an object");
        obj.insert(
            "psd".into(),
            json!({"checked": true, "min_eig": min_eig, "is_psd": is_psd, "tol": psd_tol}),
        );
    }

    if let Some(iterations) = picard {
        if iterations < 1 {
            return Err(flag_error("picard iterations must be at least 1"));
        }
        let runs = picard_iterate(&model, &functions, &pairs, t_final, dt, iterations)
            .map_err(|e| model_error(e.to_string()))?;
        let last = runs.last().expect("at least the homogeneous iterate");
        let mut sup = 0.0f64;
        for g in 0..run.times.len() {
            for pi in 0..pairs.len() {
                sup = sup.max(
                    last.states[g][pi]
                        .matrix()
                        .max_abs_diff(run.states[g][pi].matrix()),
                );
            }
        }
        let obj = report.as_object_mut().expect("report is an object");
        obj.insert(
            "picard".into(),
            json!({"iterations": iterations, "sup_deviation": sup}),
        );
    }

    match format {
        Format::Json => println!("{}", emit_json(&report)),
        Format::Text => {
            println!(
                "wrote {} rows to {}",
                run.times.len() * run.pairs.len(),
                out.display()
            );
            if let Some(psd) = report.get("psd") {
                println!(
                    "kernel positivity: min eig {} (psd: {})",
                    fmt_float(psd["min_eig"].as_f64().unwrap_or(f64::NAN)),
                    psd["is_psd"]
                );
            }
            if let Some(p) = report.get("picard") {
                println!(
                    "picard deviation after {} iterations: {}",
                    p["iterations"],
                    fmt_float(p["sup_deviation"].as_f64().unwrap_or(f64::NAN))
                );
            }
        }
    }
    Ok(exit)
}
