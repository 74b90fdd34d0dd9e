use std::io::{Read, Write};

use serde_json::Value;

use crate::simulate::fmt17;

use super::summary::summarize;
use super::{ExperimentResult, MonteCarloError, ReplicateRow};

const FIXED: [&str; 9] = [
    "n", "r", "seed", "converged", "iterations", "qll", "delay", "thresholds", "error",
];

fn csv_err(e: impl std::fmt::Display) -> MonteCarloError {
    MonteCarloError::Csv(e.to_string())
}

fn header(names: &[String]) -> Vec<String> {
    let k = names.len();
    let mut h: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    h.extend(names.iter().cloned());
    h.extend(names.iter().map(|n| format!("se:{n}")));
    for r in 0..k {
        for c in r..k {
            h.push(format!("ncov:{r}:{c}"));
        }
    }
    h
}

/// One row per replicate, numbers with 17 significant digits.
pub fn write_rows_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<(), MonteCarloError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(&result.param_names)).map_err(csv_err)?;
    for row in &result.rows {
        let mut rec = vec![
            row.n.to_string(),
            row.r.to_string(),
            row.seed.to_string(),
            row.converged.to_string(),
            row.iterations.to_string(),
            fmt17(row.qll),
            row.delay.to_string(),
            row.thresholds.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(";"),
            row.error.clone().unwrap_or_default(),
        ];
        rec.extend(row.params.iter().chain(&row.std_errors).chain(&row.scaled_cov).map(|v| fmt17(*v)));
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| MonteCarloError::Io(e.to_string()))
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T, MonteCarloError> {
    field
        .parse()
        .map_err(|_| MonteCarloError::Csv(format!("line {line}: bad {what} '{field}'")))
}

/// Read rows written by [`write_rows_csv`] for `k` parameters.
pub fn read_rows_csv<R: Read>(input: R, k: usize) -> Result<Vec<ReplicateRow>, MonteCarloError> {
    let mut rd = csv::Reader::from_reader(input);
    let width = FIXED.len() + 2 * k + k * (k + 1) / 2;
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        if rec.len() != width {
            return Err(MonteCarloError::Csv(format!(
                "line {line}: {} fields, expected {width}",
                rec.len()
            )));
        }
        let floats = |from: usize, count: usize| -> Result<Vec<f64>, MonteCarloError> {
            (from..from + count).map(|j| parse(&rec[j], "number", line)).collect()
        };
        let thresholds = if rec[7].is_empty() {
            Vec::new()
        } else {
            rec[7]
                .split(';')
                .map(|v| parse(v, "threshold", line))
                .collect::<Result<_, _>>()?
        };
        let base = FIXED.len();
        rows.push(ReplicateRow {
            n: parse(&rec[0], "n", line)?,
            r: parse(&rec[1], "r", line)?,
            seed: parse(&rec[2], "seed", line)?,
            converged: parse(&rec[3], "converged", line)?,
            iterations: parse(&rec[4], "iterations", line)?,
            qll: parse(&rec[5], "qll", line)?,
            delay: parse(&rec[6], "delay", line)?,
            thresholds,
            error: (!rec[8].is_empty()).then(|| rec[8].to_string()),
            params: floats(base, k)?,
            std_errors: floats(base + k, k)?,
            scaled_cov: floats(base + 2 * k, k * (k + 1) / 2)?,
        });
    }
    Ok(rows)
}

fn close(a: &Value, b: &Value, path: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            if (x - y).abs() <= 1e-12 * x.abs().max(1.0) {
                Ok(())
            } else {
                Err(format!("{path}: {x} vs {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .enumerate()
            .try_for_each(|(i, (u, v))| close(u, v, &format!("{path}[{i}]"))),
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x.iter().try_for_each(|(key, u)| {
            y.get(key)
                .ok_or_else(|| format!("{path}.{key} missing"))
                .and_then(|v| close(u, v, &format!("{path}.{key}")))
        }),
        _ if a == b => Ok(()),
        _ => Err(format!("{path}: {a} vs {b}")),
    }
}

/// Rebuild a result from its summary JSON and raw CSV, checking that the
/// stored summaries match the ones recomputed from the rows.
pub fn load_result<R: Read>(summary_json: &str, rows_csv: R) -> Result<ExperimentResult, MonteCarloError> {
    let mut result: ExperimentResult = serde_json::from_str(summary_json)
        .map_err(|e| crate::error::ModelError::Json(e.to_string()))?;
    result.plan.validate()?;
    let rows = read_rows_csv(rows_csv, result.param_names.len())?;
    let recomputed = summarize(&result.plan, &result.truth, &rows);
    let stored = serde_json::to_value(&result.summaries).expect("serializes");
    let fresh = serde_json::to_value(&recomputed).expect("serializes");
    close(&stored, &fresh, "summaries").map_err(MonteCarloError::Incoherent)?;
    if result.failed != recomputed.iter().any(|s| s.failed) {
        return Err(MonteCarloError::Incoherent("failed flag".into()));
    }
    result.rows = rows;
    Ok(result)
}
