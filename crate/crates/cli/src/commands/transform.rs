use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;
use tar_aarch::simulate::{
    box_cox_sunspot_transform, fmt17, log_return_transform, relative_return_transform,
};

use crate::error::CliResult;
use crate::io::{json_bytes, read_series, write_all};
use crate::{Format, Globals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// `100 ln(p_t / p_{t-1})`
    Log100,
    /// `ln(p_t / p_{t-1})`
    Log,
    /// `(p_t - p_{t-1}) / p_{t-1}`
    Relative,
    /// `2 (sqrt(w) - 1)`
    Boxcox,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Input CSV (`-` for stdin).
    input: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Column to read when the file has a header with several fields.
    #[arg(long)]
    column: Option<String>,
}

#[derive(Serialize)]
struct Report<'a> {
    input: String,
    method: Method,
    column: Option<&'a str>,
    values: &'a [f64],
}

pub fn run(args: &Args, globals: &Globals) -> CliResult<()> {
    let series = read_series(&args.input, args.column.as_deref())?;
    let out = match args.method {
        Method::Log100 => log_return_transform(&series, true),
        Method::Log => log_return_transform(&series, false),
        Method::Relative => relative_return_transform(&series),
        Method::Boxcox => box_cox_sunspot_transform(&series),
    }?;
    let bytes = match globals.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("value\n");
            for v in out.values() {
                s.push_str(&fmt17(*v));
                s.push('\n');
            }
            s.into_bytes()
        }
        Format::Json => json_bytes(&Report {
            input: args.input.display().to_string(),
            method: args.method,
            column: args.column.as_deref(),
            values: out.values(),
        }),
    };
    write_all(globals.output.as_ref(), &bytes)
}
