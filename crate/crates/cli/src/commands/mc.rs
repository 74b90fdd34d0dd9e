use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;
use tar_aarch::montecarlo::{
    efficiency_comparison, normality_diagnostics, rmse_ratios, run_experiment, write_rows_csv,
    EfficiencyRow, EstimatorKind, ExperimentPlan, ExperimentResult, NormalityReport,
};

use crate::error::{CliError, CliResult};
use crate::io::{json_bytes, read_text, write_all};
use crate::{Format, Globals};

/// Replicates needed before normality diagnostics are reported.
const MIN_NORMALITY_REPLICATES: usize = 100;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Experiment plan JSON.
    plan: PathBuf,
    /// Also write the raw replicate rows here.
    #[arg(long)]
    rows: Option<PathBuf>,
    /// Also write the summary JSON here.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Rows of the companion symmetric estimator, when one is run.
    #[arg(long)]
    companion_rows: Option<PathBuf>,
    /// Bootstrap resamples for the efficiency comparison.
    #[arg(long, default_value_t = 500)]
    bootstrap: usize,
}

#[derive(Serialize)]
struct Config {
    plan_file: String,
    seed_override: Option<u64>,
    bootstrap: usize,
    min_normality_replicates: usize,
}

#[derive(Serialize)]
struct RmseRatio {
    n_small: usize,
    n_large: usize,
    ratios: Vec<f64>,
}

#[derive(Serialize)]
struct Efficiency {
    /// Concentrated estimator first, full QMLE second.
    rows: Vec<EfficiencyRow>,
    companion: Value,
}

#[derive(Serialize)]
struct Diagnostics {
    rmse_ratios: Vec<RmseRatio>,
    normality: Vec<NormalityReport>,
    efficiency: Option<Efficiency>,
}

fn rows_bytes(result: &ExperimentResult) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    write_rows_csv(result, &mut out)?;
    Ok(out)
}

/// The other symmetric estimator, run on the same data sets.
fn companion_of(plan: &ExperimentPlan) -> Option<ExperimentPlan> {
    let other = match plan.estimator {
        EstimatorKind::FullSymmetric => EstimatorKind::ConcentratedSymmetric,
        EstimatorKind::ConcentratedSymmetric => EstimatorKind::FullSymmetric,
        EstimatorKind::Concentrated => return None,
    };
    Some(plan.clone().with_estimator(other))
}

pub fn run(args: &Args, globals: &Globals) -> CliResult<()> {
    let mut plan = ExperimentPlan::from_json(&read_text(&args.plan)?)?;
    if let Some(seed) = globals.seed {
        plan.base_seed = seed;
    }
    for w in plan.warnings() {
        eprintln!("warning: {w}");
    }
    let result = run_experiment(&plan)?;

    let normality = if plan.replicates >= MIN_NORMALITY_REPLICATES {
        plan.sample_sizes
            .iter()
            .filter_map(|&n| normality_diagnostics(&result, n).ok())
            .collect()
    } else {
        Vec::new()
    };
    let mut failed = result.failed;
    let efficiency = match companion_of(&plan) {
        Some(other) => {
            let second = run_experiment(&other)?;
            failed |= second.failed;
            let (conc, full) = if plan.estimator == EstimatorKind::FullSymmetric {
                (&second, &result)
            } else {
                (&result, &second)
            };
            let rows = efficiency_comparison(conc, full, args.bootstrap, plan.base_seed)?;
            if let Some(path) = &args.companion_rows {
                write_all(Some(path), &rows_bytes(&second)?)?;
            }
            Some(Efficiency {
                rows,
                companion: serde_json::to_value(&second).expect("serializable"),
            })
        }
        None => None,
    };
    let diagnostics = Diagnostics {
        rmse_ratios: rmse_ratios(&result)
            .into_iter()
            .map(|(n_small, n_large, ratios)| RmseRatio {
                n_small,
                n_large,
                ratios,
            })
            .collect(),
        normality,
        efficiency,
    };

    let mut doc = serde_json::to_value(&result).expect("serializable");
    let extra = [
        (
            "config",
            serde_json::to_value(Config {
                plan_file: args.plan.display().to_string(),
                seed_override: globals.seed,
                bootstrap: args.bootstrap,
                min_normality_replicates: MIN_NORMALITY_REPLICATES,
            }),
        ),
        ("diagnostics", serde_json::to_value(diagnostics)),
    ];
    if let Value::Object(map) = &mut doc {
        for (key, value) in extra {
            map.insert(key.into(), value.expect("serializable"));
        }
    }
    let summary = json_bytes(&doc);
    let rows = rows_bytes(&result)?;
    if let Some(path) = &args.rows {
        write_all(Some(path), &rows)?;
    }
    if let Some(path) = &args.summary {
        write_all(Some(path), &summary)?;
    }
    let main = match globals.format.unwrap_or(Format::Json) {
        Format::Json => summary,
        Format::Csv => rows,
    };
    write_all(globals.output.as_ref(), &main)?;
    if failed {
        return Err(CliError::FailedExperiment(format!(
            "more than {:.0}% of replicates failed to converge at some sample size",
            100.0 * tar_aarch::montecarlo::MAX_NONCONVERGENCE
        )));
    }
    Ok(())
}
