//! `dilate`: construct a pseudo-Hilbert dilation of the model's germ,
//! verify the factorization identity, and write all blocks to JSON.

use std::path::Path;

use serde_json::{json, Value};

use qsc_core::dilation::{build_block_rep, explicit_dilate, kolmogorov_dilate, verify_dilation};
use qsc_core::generator::model_germ;
use qsc_core::Error;

use crate::commands::load_model;
use crate::output::{emit_json, flag_error, fmt_float, model_error, write_file, CliError};
use crate::Format;

pub fn run(
    model_path: &Path,
    method: &str,
    tol: f64,
    out: &Path,
    format: Format,
) -> Result<u8, CliError> {
    if tol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(flag_error("tol must be positive"));
    }
    let model = load_model(model_path)?;
    let germ = model_germ(&model).map_err(|e| model_error(e.to_string()))?;

    let triple = match method {
        "explicit" => {
            if model.negate_kraus.is_some() {
                // the spatial construction realizes the structured germ only
                return Err(model_error(
                    "explicit dilation is undefined for a negated-Kraus model",
                ));
            }
            explicit_dilate(&model)
        }
        "kolmogorov" => match kolmogorov_dilate(&germ, tol) {
            Ok(t) => t,
            Err(e @ (Error::NotConditionallyPositive | Error::RepresentationIllDefined)) => {
                // a failed construction is a check failure, not bad input
                let report = json!({
                    "schema_version": qsc_core::SCHEMA_VERSION,
                    "method": method,
                    "error": e.to_string(),
                });
                println!("{}", emit_json(&report));
                return Ok(1);
            }
            Err(e) => return Err(model_error(e.to_string())),
        },
        other => {
            return Err(flag_error(format!(
                "unknown method '{other}', expected explicit or kolmogorov"
            )))
        }
    };

    let residuals = triple.invariant_residuals(16);
    let rep = build_block_rep(triple);
    let report = verify_dilation(&germ, &rep, 50, tol);

    let mats = |units: &[qsc_core::ComplexMatrix]| -> Value {
        Value::Array(
            units
                .iter()
                .map(|m| serde_json::to_value(m).expect("matrix serializes"))
                .collect(),
        )
    };
    let triple = &rep.triple;
    let doc = json!({
        "schema_version": qsc_core::SCHEMA_VERSION,
        "method": method,
        "n": triple.n,
        "d": triple.d,
        "n_aux": triple.dim_aux,
        "j_units": mats(&triple.j_units),
        "k_units": mats(&triple.k_units),
        "l_units": mats(&triple.l_units),
        "l_aux": mats(&triple.l_aux),
        "l_minus": mats(&triple.l_minus),
        "defect": serde_json::to_value(&triple.defect).expect("matrix serializes"),
        "verify": {
            "max_deviation": report.max_deviation,
            "path_agreement": report.path_agreement,
            "samples": report.samples,
            "tol": report.tol,
            "passes": report.passes,
        },
        "invariant_residuals": {
            "representation": residuals.rep,
            "leibniz": residuals.leibniz,
            "coboundary": residuals.coboundary,
            "adjoint": residuals.adjoint,
        },
    });
    write_file(out, &emit_json(&doc))?;

    match format {
        Format::Json => println!("{}", emit_json(&doc)),
        Format::Text => {
            println!("method: {method}, auxiliary dimension: {}", triple.dim_aux);
            println!(
                "dilation identity max deviation: {}",
                fmt_float(report.max_deviation)
            );
            println!(
                "assembly path agreement: {}",
                fmt_float(report.path_agreement)
            );
            println!("triple invariant residual: {}", fmt_float(residuals.max()));
            println!("passes at tol {}: {}", fmt_float(tol), report.passes);
        }
    }
    Ok(if report.passes { 0 } else { 1 })
}
