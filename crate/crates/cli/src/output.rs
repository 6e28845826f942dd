use std::io::Write;

use serde_json::Value;

use crate::CliResult;

/// 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink)
}

pub(crate) fn write_json(out: &mut dyn Write, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    writeln!(out, "{text}")?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> crate::CliError {
    crate::CliError::Io(std::io::Error::other(e))
}
