//! `run`: classical unraveling trajectories. Writes one CSV row per output
//! time per path plus a JSON ensemble summary. Requires the single-noise
//! classical form of the model (d = 1, r = 1).

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use qsc_core::generator::{specialize_classical, ClassicalTarget};
use qsc_core::linalg::C64;
use qsc_core::trajectory::{
    ensemble_average, solve_diffusive, solve_jump, EnsembleSpec, NoisePath, Scheme,
};
use qsc_core::ComplexMatrix;

use crate::commands::{load_matrix, load_model};
use crate::output::{
    emit_json, flag_error, fmt_float, model_error, validate_numeric, write_file, CliError,
};
use crate::Format;

#[allow(clippy::too_many_arguments)]
pub fn run(
    model_path: &Path,
    scheme: &str,
    t_final: f64,
    dt: f64,
    ntraj: usize,
    seed: u64,
    out: &Path,
    summary_path: Option<&Path>,
    observable_paths: &[std::path::PathBuf],
    format: Format,
) -> Result<u8, CliError> {
    validate_numeric(dt, t_final, ntraj, 1.0)?;
    let scheme = match scheme {
        "diffusive" => Scheme::Diffusive,
        "jump" => Scheme::Jump,
        other => {
            return Err(flag_error(format!(
                "unknown scheme '{other}', expected diffusive or jump"
            )))
        }
    };
    let model = load_model(model_path)?;
    if model.d != 1 || model.r != 1 {
        return Err(model_error(format!(
            "classical unraveling needs d = 1 and r = 1, model has d = {} r = {}",
            model.d, model.r
        )));
    }
    let steps =
        qsc_core::trajectory::steps_for(t_final, dt).map_err(|e| flag_error(e.to_string()))?;
    let n = model.n;
    let k = model.drift.clone();
    let l = model.coupling[0].clone();
    let target = match scheme {
        Scheme::Diffusive => ClassicalTarget::Diffusive,
        Scheme::Jump => ClassicalTarget::Jump,
    };
    let coeffs =
        specialize_classical(&k, &l, None, target).map_err(|e| model_error(e.to_string()))?;

    let mut observables = Vec::new();
    for path in observable_paths {
        observables.push(load_matrix(path, n, "observable")?);
    }

    // ground state excited-most basis vector: |n-1>
    let mut psi0 = ComplexMatrix::zeros(n, 1);
    psi0[(n - 1, 0)] = C64::new(1.0, 0.0);

    // trajectory CSV, sequential and byte-deterministic
    let mut csv = String::new();
    csv.push_str("time,path_id,norm2,jump");
    for i in 0..observables.len() {
        let _ = write!(csv, ",obs{i}_re,obs{i}_im");
    }
    csv.push('\n');
    for path_id in 0..ntraj {
        let path_seed = seed ^ path_id as u64;
        let traj = match scheme {
            Scheme::Diffusive => {
                let path = NoisePath::wiener(dt, steps, path_seed);
                solve_diffusive(&k, &l, &psi0, &path)
            }
            Scheme::Jump => {
                let path = NoisePath::poisson(dt, steps, path_seed);
                solve_jump(&k, &l, &psi0, &path)
            }
        }
        .map_err(|e| model_error(e.to_string()))?;
        for row in 0..traj.times.len() {
            let _ = write!(
                csv,
                "{},{},{},{}",
                fmt_float(traj.times[row]),
                path_id,
                fmt_float(traj.norm2[row]),
                u8::from(traj.jumps[row])
            );
            for op in &observables {
                let psi = traj.states[row].column(0);
                let image = op.apply_vec(&psi);
                let val: C64 = psi.iter().zip(&image).map(|(a, b)| a.conj() * b).sum();
                let _ = write!(csv, ",{},{}", fmt_float(val.re), fmt_float(val.im));
            }
            csv.push('\n');
        }
    }
    write_file(out, &csv)?;

    // ensemble summary
    let mut summary_doc = json!({
        "schema_version": qsc_core::SCHEMA_VERSION,
        "scheme": match scheme { Scheme::Diffusive => "diffusive", Scheme::Jump => "jump" },
        "classification": coeffs.classification.as_str(),
        "seed": seed,
        "dt": dt,
        "t_final": t_final,
        "n_traj": ntraj,
        "model": model.to_json(),
    });
    if ntraj >= 2 {
        let spec = EnsembleSpec {
            scheme,
            k: k.clone(),
            l: l.clone(),
            psi0: psi0.clone(),
            dt,
            steps,
        };
        let stats = ensemble_average(&spec, ntraj, seed).map_err(|e| model_error(e.to_string()))?;
        let obj = summary_doc.as_object_mut().expect("summary is an object");
        obj.insert("times".into(), json!(stats.times));
        obj.insert("mean_norm2".into(), json!(stats.mean_norm2));
        obj.insert("se".into(), json!(stats.se_norm2));
        obj.insert(
            "rho_bar".into(),
            Value::Array(
                stats
                    .rho_bar
                    .iter()
                    .map(|m| serde_json::to_value(m).expect("matrix serializes"))
                    .collect(),
            ),
        );
        obj.insert("se_rho_diag".into(), json!(stats.se_rho_diag));
    }
    if let Some(path) = summary_path {
        write_file(path, &emit_json(&summary_doc))?;
    }

    match format {
        Format::Json => println!("{}", emit_json(&summary_doc)),
        Format::Text => {
            println!(
                "wrote {} paths x {} steps to {} ({})",
                ntraj,
                steps,
                out.display(),
                coeffs.classification.as_str()
            );
            if let Some(path) = summary_path {
                println!("summary: {}", path.display());
            }
        }
    }
    Ok(0)
}
