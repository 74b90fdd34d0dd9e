use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;
use tar_aarch::baselines::tar_arch_full_qmle_with;
use tar_aarch::estimation::{
    fit_alternating_with, threshold_delay_search, AarchConstraint, CandidateScore,
    EstimationError, FitOptions, FitReport, SearchGrid, ThresholdCandidates,
};
use tar_aarch::simulate::fmt17;
use tar_aarch::ThresholdPartition;

use crate::error::{CliError, CliResult};
use crate::io::{json_bytes, read_series, write_all};
use crate::{Format, Globals};

/// Minimum observations per estimated parameter.
const OBS_PER_PARAM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Alternating concentrated QML, every alpha and beta free.
    Concentrated,
    /// Alternating concentrated QML with beta pinned to zero.
    ConcentratedSymmetric,
    /// Joint QML of the symmetric model.
    FullSymmetric,
}

impl Estimator {
    fn constraint(self) -> AarchConstraint {
        match self {
            Self::Concentrated => AarchConstraint::Free,
            Self::ConcentratedSymmetric | Self::FullSymmetric => AarchConstraint::Symmetric,
        }
    }
}

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Input CSV (`-` for stdin).
    #[serde(skip)]
    input: PathBuf,
    /// Column to read when the file has a header with several fields.
    #[arg(long)]
    column: Option<String>,
    /// Autoregressive order.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// ARCH order.
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Delay of the regime variable (ignored with --search).
    #[arg(long, default_value_t = 1)]
    delay: usize,
    /// Increasing thresholds, comma separated; none means one regime.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    thresholds: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Estimator::Concentrated)]
    estimator: Estimator,
    /// Search delays and thresholds instead of fixing the partition.
    #[arg(long)]
    search: bool,
    /// Candidate delays for --search.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    delays: Vec<usize>,
    /// Candidate regime counts for --search.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    regimes: Vec<usize>,
    /// Smallest share of observations any regime may hold (--search).
    #[arg(long, default_value_t = 0.05)]
    min_fraction: f64,
    /// Explicit threshold candidates for --search instead of the quantile grid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    candidates: Vec<f64>,
    /// Most mean/variance alternations.
    #[arg(long, default_value_t = 200)]
    max_outer: usize,
}

#[derive(Serialize)]
struct Config<'a> {
    input: String,
    observations: usize,
    #[serde(flatten)]
    args: &'a Args,
    grid: Option<&'a SearchGrid>,
}

#[derive(Serialize)]
struct SearchTable<'a> {
    conditioning: usize,
    partition: &'a ThresholdPartition,
    candidates: &'a [CandidateScore],
}

#[derive(Serialize)]
struct Output<'a> {
    config: Config<'a>,
    report: &'a FitReport,
    search: Option<SearchTable<'a>>,
}

fn grid(args: &Args) -> SearchGrid {
    let thresholds = if args.candidates.is_empty() {
        ThresholdCandidates::default()
    } else {
        ThresholdCandidates::Explicit(args.candidates.clone())
    };
    SearchGrid {
        min_regime_fraction: args.min_fraction,
        constraint: args.estimator.constraint(),
        ..SearchGrid::new(args.delays.clone())
            .with_regime_counts(args.regimes.clone())
            .with_thresholds(thresholds)
    }
}

fn param_count(args: &Args) -> usize {
    let regimes = if args.search {
        args.regimes.iter().copied().max().unwrap_or(1)
    } else {
        args.thresholds.len() + 1
    };
    regimes * (args.p + 1) + args.estimator.constraint().free_count(args.q)
}

fn csv_table(report: &FitReport) -> Vec<u8> {
    let mut s = String::from("name,estimate,std_error\n");
    for ((name, v), se) in report.param_names.iter().zip(&report.params).zip(&report.std_errors) {
        s.push_str(&format!("{name},{},{}\n", fmt17(*v), fmt17(*se)));
    }
    s.into_bytes()
}

fn classify(e: EstimationError) -> CliError {
    match e {
        EstimationError::ThetaNotConverged { .. }
        | EstimationError::AlphaNotConverged { .. }
        | EstimationError::FitNotConverged { .. } => CliError::NotConverged(e.to_string()),
        EstimationError::Model(m) => CliError::Data(m.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

pub fn run(args: &Args, globals: &Globals) -> CliResult<()> {
    if args.search && args.estimator == Estimator::FullSymmetric {
        return Err(CliError::Usage("--search is not available with the full-symmetric estimator".into()));
    }
    let series = read_series(&args.input, args.column.as_deref())?;
    let k = param_count(args);
    if series.len() <= OBS_PER_PARAM * k {
        return Err(CliError::Usage(format!(
            "{} observations for {k} parameters; need more than {}",
            series.len(),
            OBS_PER_PARAM * k
        )));
    }
    let options = FitOptions {
        max_outer: args.max_outer,
        ..FitOptions::default().with_constraint(args.estimator.constraint())
    };
    let search_grid = args.search.then(|| grid(args));
    let outcome = match &search_grid {
        Some(g) => threshold_delay_search(&series, args.p, args.q, g).map(|o| {
            let table = (o.conditioning, o.partition, o.candidates);
            (o.fit, Some(table))
        }),
        None => {
            let partition = ThresholdPartition::new(args.delay, args.thresholds.clone())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let fitted = match args.estimator {
                Estimator::FullSymmetric => {
                    tar_arch_full_qmle_with(&series, &partition, args.p, args.q, None, &options)
                }
                _ => fit_alternating_with(&series, &partition, args.p, args.q, None, &options),
            };
            fitted.map(|f| (f, None))
        }
    };
    let (report, table, failure) = match outcome {
        Ok((r, t)) => (r, t, None),
        Err(EstimationError::FitNotConverged { report }) => {
            let msg = format!("fit did not converge after {} iterations; best iterate written", report.iterations);
            (*report, None, Some(CliError::NotConverged(msg)))
        }
        Err(e) => return Err(classify(e)),
    };
    let bytes = match globals.format.unwrap_or(Format::Json) {
        Format::Csv => csv_table(&report),
        Format::Json => json_bytes(&Output {
            config: Config {
                input: args.input.display().to_string(),
                observations: series.len(),
                args,
                grid: search_grid.as_ref(),
            },
            report: &report,
            search: table.as_ref().map(|(c, p, cands)| SearchTable {
                conditioning: *c,
                partition: p,
                candidates: cands,
            }),
        }),
    };
    write_all(globals.output.as_ref(), &bytes)?;
    failure.map_or(Ok(()), Err)
}
