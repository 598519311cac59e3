use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use tempfile::NamedTempFile;

use super::{HarnessError, RunOutcome, Table};

/// Floats with 17 significant digits, enough to round-trip every `f64`.
fn sci(v: f64) -> String {
    // Adding +0.0 turns -0.0 into 0.0.
    format!("{:.16e}", v + 0.0)
}

/// Compact JSON writer that prints every float with 17 significant digits.
struct Sci17;

impl serde_json::ser::Formatter for Sci17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(sci(value).as_bytes())
    }
}

pub fn write_json(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci17);
    value.serialize(&mut ser).expect("serializing a JSON value to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn csv(table: &Table) -> String {
    let mut out = table.header.join(",");
    out.push('\n');
    for i in 0..table.n_rows() {
        for (j, col) in table.columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", sci(col[i]));
        }
        out.push('\n');
    }
    out
}

pub fn report_json(out: &RunOutcome) -> Value {
    let cert = &out.certificate;
    let mut report = json!({
        "equation": out.config.equation,
        "solver": out.config.solver,
        "kappa": cert.contraction_factor,
        "threshold": cert.threshold,
        "admissible": cert.admissible,
        "size_bound_multiplier": cert.size_bound_multiplier,
        "g_l2": out.g_l2,
        "a_l2": out.a_l2,
        "max_residual": out.max_residual,
        "residual_norms": { "t": out.times, "norm": out.residual_norms },
        "iterations": out.iterations(),
        "iteration_log": out.iteration_log,
        "window_mismatch": out.window_mismatch,
        "config": out.config,
    });
    if let Some(d) = out.defects {
        report["defects"] = json!({ "r0": d[0], "r1": d[1], "r2": d[2] });
    }
    report
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

/// Writes `signals.csv`, `field.csv` and `report.json` into `dir`.
///
/// Every file goes to a temporary sibling first; nothing is renamed into
/// place until all of them are written.
pub fn emit_report(out: &RunOutcome, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = vec![("signals.csv", csv(&out.signals))];
    if let Some(field) = &out.field {
        files.push(("field.csv", csv(field)));
    }
    files.push(("report.json", write_json(&report_json(out))));

    let mut staged = Vec::with_capacity(files.len());
    for (name, text) in &files {
        let mut tmp = NamedTempFile::new_in(dir).map_err(io_err(dir))?;
        tmp.write_all(text.as_bytes()).map_err(io_err(tmp.path()))?;
        tmp.as_file().sync_all().map_err(io_err(tmp.path()))?;
        staged.push((dir.join(name), tmp));
    }
    for (path, tmp) in staged {
        tmp.persist(&path).map_err(|e| HarnessError::Io { path: path.display().to_string(), source: e.error })?;
    }
    Ok(())
}
