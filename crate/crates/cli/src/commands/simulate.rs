use std::path::PathBuf;

use serde::Serialize;
use tar_aarch::baselines::canned_spec;
use tar_aarch::simulate::{simulate_path, SimConfig, DEFAULT_BURN_IN};
use tar_aarch::ModelSpec;

use crate::error::{CliError, CliResult};
use crate::io::{json_bytes, read_text, write_all};
use crate::{Format, Globals};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Model JSON file.
    #[arg(long, conflicts_with = "canned", required_unless_present = "canned")]
    spec: Option<PathBuf>,
    /// Built-in model: `lynx` or `sunspot` (constant variance).
    #[arg(long)]
    canned: Option<String>,
    /// Observations to keep.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Observations simulated and discarded first.
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
}

#[derive(Serialize)]
struct Config<'a> {
    spec_source: String,
    spec: &'a ModelSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
}

#[derive(Serialize)]
struct Report<'a> {
    config: Config<'a>,
    x: &'a [f64],
    h: &'a [f64],
    z: &'a [f64],
}

fn load_spec(args: &Args) -> CliResult<(ModelSpec, String)> {
    match (&args.spec, &args.canned) {
        (Some(path), _) => Ok((ModelSpec::from_json(&read_text(path)?)?, path.display().to_string())),
        (None, Some(name)) => {
            let canned = canned_spec(name).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok((canned.homoskedastic_spec()?, format!("canned:{name}")))
        }
        (None, None) => Err(CliError::Usage("give --spec or --canned".into())),
    }
}

pub fn run(args: &Args, globals: &Globals) -> CliResult<()> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let (spec, source) = load_spec(args)?;
    for w in spec.stationarity().warnings {
        eprintln!("warning: {w}");
    }
    let seed = globals.seed.unwrap_or(0);
    let config = SimConfig::new(args.n, seed).with_burn_in(args.burn_in);
    let path = simulate_path(&spec, &config)?;
    let bytes = match globals.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = Vec::new();
            path.write_csv(&mut out)?;
            out
        }
        Format::Json => json_bytes(&Report {
            config: Config {
                spec_source: source,
                spec: &spec,
                n: args.n,
                burn_in: args.burn_in,
                seed,
            },
            x: path.series.values(),
            h: &path.variances,
            z: &path.shocks,
        }),
    };
    write_all(globals.output.as_ref(), &bytes)
}
