use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use tar_aarch::TimeSeries;

use crate::error::{CliError, CliResult};

fn open_input(path: &Path) -> CliResult<Box<dyn Read>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin()));
    }
    File::open(path)
        .map(|f| Box::new(f) as Box<dyn Read>)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    let mut s = String::new();
    open_input(path)?
        .read_to_string(&mut s)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(s)
}

/// Read one numeric column.
///
/// A first row that does not parse as numbers is a header. With a header,
/// `column` picks a field by name; without one the file must have a single
/// column, or the column named `x` is used when several are present.
pub fn read_series(path: &Path, column: Option<&str>) -> CliResult<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open_input(path)?);
    let name = path.display();
    let mut values = Vec::new();
    let mut pick: Option<usize> = None;
    let mut width = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            let fields: Vec<&str> = record.iter().collect();
            pick = Some(match column {
                Some(c) => fields.iter().position(|f| *f == c).ok_or_else(|| {
                    CliError::Data(format!("{name}: no column '{c}' in header {fields:?}"))
                })?,
                None if fields.len() == 1 => 0,
                None => fields.iter().position(|f| *f == "x").ok_or_else(|| {
                    CliError::Data(format!(
                        "{name}: {} columns and no 'x'; choose one with --column",
                        fields.len()
                    ))
                })?,
            });
            width = fields.len();
            continue;
        }
        let index = match pick {
            Some(k) => {
                if record.len() != width {
                    return Err(CliError::Data(format!(
                        "{name}: line {line}: expected {width} fields, found {}",
                        record.len()
                    )));
                }
                k
            }
            None if column.is_some() => {
                return Err(CliError::Data(format!("{name}: --column needs a header row")));
            }
            None if record.len() == 1 => 0,
            None => {
                return Err(CliError::Data(format!(
                    "{name}: line {line}: expected one numeric column, found {} fields",
                    record.len()
                )))
            }
        };
        let field = &record[index];
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::Data(format!("{name}: line {line}: '{field}' is not a number")))?;
        if !v.is_finite() {
            return Err(CliError::Data(format!("{name}: line {line}: non-finite value")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Data(format!("{name}: no data rows")));
    }
    Ok(TimeSeries::new(values)?.with_label(name.to_string()))
}

/// Destination of the main output: a file or stdout.
pub fn sink(path: Option<&PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn write_all(path: Option<&PathBuf>, bytes: &[u8]) -> CliResult<()> {
    let mut out = sink(path)?;
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}
