//! `check`: conditional complete positivity, dissipation positivity,
//! martingale classification and Hermitian-symmetry residual of a model's
//! germ. Exits 1 when the conditional-positivity gate fails.

use std::path::Path;

use serde_json::json;

use qsc_core::generator::{ccp_check, classify_model, dissipation_psd_check, model_germ};

use crate::commands::load_model;
use crate::output::{emit_json, flag_error, fmt_float, model_error, CliError};
use crate::Format;

pub fn run(model_path: &Path, tol: f64, format: Format) -> Result<u8, CliError> {
    if tol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(flag_error("tol must be positive"));
    }
    let model = load_model(model_path)?;
    let germ = model_germ(&model).map_err(|e| model_error(e.to_string()))?;
    let ccp = ccp_check(&germ, tol).map_err(|e| model_error(e.to_string()))?;
    let diss = dissipation_psd_check(&germ, tol).map_err(|e| model_error(e.to_string()))?;
    let class = classify_model(&model).map_err(|e| model_error(e.to_string()))?;
    let symmetry = germ.hermitian_symmetry_residual(8);

    let report = json!({
        "schema_version": qsc_core::SCHEMA_VERSION,
        "is_ccp": ccp.is_ccp,
        "min_eig": ccp.min_eig,
        "dissipation_psd": diss.is_psd,
        "dissipation_min_eig": diss.min_eig,
        "classification": class.as_str(),
        "hermitian_symmetry_residual": symmetry,
        "tol": tol,
        "model": model.to_json(),
    });
    match format {
        Format::Json => println!("{}", emit_json(&report)),
        Format::Text => {
            println!(
                "model: n={} d={} r={} ({})",
                model.n,
                model.d,
                model.r,
                class.as_str()
            );
            println!(
                "conditionally completely positive: {} (min eig {})",
                ccp.is_ccp,
                fmt_float(ccp.min_eig)
            );
            println!(
                "dissipation form PSD: {} (min eig {})",
                diss.is_psd,
                fmt_float(diss.min_eig)
            );
            println!("hermitian symmetry residual: {}", fmt_float(symmetry));
        }
    }
    Ok(if ccp.is_ccp && diss.is_psd { 0 } else { 1 })
}
