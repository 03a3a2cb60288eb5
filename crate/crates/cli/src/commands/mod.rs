pub mod check;
pub mod dilate;
pub mod kernel;
pub mod master;
pub mod run;
pub mod table;

use std::path::Path;

use qsc_core::model::ModelSpec;

use crate::output::{model_error, parse_json, read_file, CliError};

/// Load and validate a model file; derived K/Kn are filled in so reports
/// can echo the closed model.
pub fn load_model(path: &Path) -> Result<ModelSpec, CliError> {
    let text = read_file(path)?;
    let value = parse_json(path, &text)?;
    ModelSpec::from_json(&value).map_err(|e| model_error(e.to_string()))
}

/// Load one matrix file with the standard encoding (or scalar shorthand).
pub fn load_matrix(path: &Path, n: usize, what: &str) -> Result<qsc_core::ComplexMatrix, CliError> {
    let text = read_file(path)?;
    let value = parse_json(path, &text)?;
    qsc_core::model::matrix_from_json(&value, n, what).map_err(model_error)
}
