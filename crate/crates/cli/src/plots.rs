use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::CliError;

pub const DISTANCE_DAT: &str = "distance.dat";
pub const SPECTRA_DAT: &str = "spectra.dat";
pub const ANGLES_DAT: &str = "angles.dat";

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:e}"),
        // Non-finite values serialize as null; gnuplot skips NaN.
        None => "NaN".into(),
    }
}

fn write(dir: &Path, name: &str, body: String, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let file = dir.join(name);
    std::fs::write(&file, body).map_err(|e| CliError::Config(format!("cannot write {}: {e}", file.display())))?;
    written.push(file);
    Ok(())
}

/// Writes two-column data files for the sections present in a report and
/// returns their paths.
pub fn emit_plots(report: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(report)
        .map_err(|e| CliError::Config(format!("cannot read report {}: {e}", report.display())))?;
    let json: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{} is not a report: {e}", report.display())))?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut written = Vec::new();

    if let Some(trace) = json.pointer("/path_invariance/trace").and_then(Value::as_array) {
        let mut body = String::from("# t distance_to_manifold\n");
        for pair in trace {
            if let Some([t, d]) = pair.as_array().map(Vec::as_slice) {
                writeln!(body, "{} {}", num(t), num(d)).expect("string write");
            }
        }
        write(out_dir, DISTANCE_DAT, body, &mut written)?;
    }

    if let Some(points) = json.pointer("/flatness/per_point").and_then(Value::as_array) {
        // One gnuplot data block per base point, selectable with `index`.
        let mut body = String::from("# rank scaled_rejection (one block per base point)\n");
        for p in points {
            let index = p.get("point_index").and_then(Value::as_u64).unwrap_or(0);
            writeln!(body, "# point {index}").expect("string write");
            for (j, s) in p.get("spectrum").and_then(Value::as_array).into_iter().flatten().enumerate() {
                writeln!(body, "{j} {}", num(s)).expect("string write");
            }
            body.push_str("\n\n");
        }
        write(out_dir, SPECTRA_DAT, body, &mut written)?;

        if let Some(chain) = json.pointer("/flatness/principal_angle_chain").and_then(Value::as_array) {
            let rows: Vec<String> = chain
                .iter()
                .enumerate()
                .filter(|(_, a)| !a.is_null())
                .map(|(i, a)| format!("{i} {}", num(a)))
                .collect();
            if !rows.is_empty() {
                let body = format!("# link max_principal_angle\n{}\n", rows.join("\n"));
                write(out_dir, ANGLES_DAT, body, &mut written)?;
            }
        }
    }
    Ok(written)
}
