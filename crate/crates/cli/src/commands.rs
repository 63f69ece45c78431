//! Command implementations: train, predict, evaluate, synthesize, compare.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dbnwp_core::baselines::{compare, comparison_csv, train_two_layer_nn, BaselineModel};
use dbnwp_core::dataset::{build_samples, parse_csv_with_policy, synthesize, write_csv, ReleasePolicy, SampleSet};
use dbnwp_core::dbn::{train_dbn, TrainedDbn};
use dbnwp_core::evaluation::{holdout_split, run_holdout, run_kfold, stability_runs, EvalReport};

use crate::config::{require_readable, TrainingFlags, INPUT_DIM};
use crate::model_file::{load_model, save_model};
use crate::CliError;

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn load_samples(data: &Path, policy: ReleasePolicy) -> Result<SampleSet, CliError> {
    require_readable(data)?;
    let records = parse_csv_with_policy(data, policy)?;
    Ok(build_samples(&records)?)
}

/// `synthesize`: write a deterministic synthetic farm series.
pub fn cmd_synthesize(length: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let records = synthesize(length, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    write_csv(&records, out)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("wrote {} hourly records to {}", records.len(), out.display());
    Ok(())
}

/// `train`: full pipeline on one farm file; writes the model and the
/// per-epoch trace CSVs into the output directory.
pub fn cmd_train(
    data: &Path,
    flags: &TrainingFlags,
    policy: ReleasePolicy,
    out_dir: &Path,
) -> Result<(), CliError> {
    let samples = load_samples(data, policy)?;
    if samples.is_empty() {
        return Err(CliError::Runtime(format!(
            "no valid sample windows in {} (need at least 26 contiguous hours with power)",
            data.display()
        )));
    }
    let settings = flags.resolve(samples.width())?;

    let started = Instant::now();
    let trained = train_dbn(
        &samples,
        &settings.arch,
        &settings.cd,
        &settings.ft,
        settings.seed,
    )?;
    let train_seconds = started.elapsed().as_secs_f64();

    ensure_dir(out_dir)?;
    let model_path = out_dir.join("model.dbnwp");
    save_model(&trained.model, &model_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(
        &out_dir.join("pretrain_trace.csv"),
        &pretrain_trace_csv(&trained),
    )?;
    write_text(
        &out_dir.join("finetune_trace.csv"),
        &finetune_trace_csv(&trained),
    )?;

    println!(
        "trained {} on {} samples in {train_seconds:.2}s",
        settings.arch, // prints as input-h1-...-output
        samples.len()
    );
    println!("model: {}", model_path.display());
    if let Some(last) = trained.finetune_trace.last() {
        println!("final fine-tune loss: {last}");
    }
    Ok(())
}

fn pretrain_trace_csv(trained: &TrainedDbn) -> String {
    let mut out = String::from("layer,epoch,reconstruction_error\n");
    for (layer, trace) in trained.pretrain_traces.iter().enumerate() {
        for (epoch, err) in trace.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", layer + 1, epoch + 1, err);
        }
    }
    out
}

fn finetune_trace_csv(trained: &TrainedDbn) -> String {
    let mut out = String::from("epoch,mse\n");
    for (epoch, loss) in trained.finetune_trace.iter().enumerate() {
        let _ = writeln!(out, "{},{}", epoch + 1, loss);
    }
    out
}

/// `predict`: one `timestamp,predicted_power` row per valid window; the
/// timestamp is the hour being predicted.
pub fn cmd_predict(
    model_path: &Path,
    data: &Path,
    policy: ReleasePolicy,
    out: Option<&Path>,
) -> Result<(), CliError> {
    require_readable(model_path).map_err(|_| {
        CliError::Usage(format!("model file not found: {}", model_path.display()))
    })?;
    let model = load_model(model_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    let samples = load_samples(data, policy)?;
    if samples.is_empty() {
        log::warn!(
            "{} yields no prediction windows (need at least 26 contiguous hours); output is empty",
            data.display()
        );
    } else if samples.width() != model.architecture.input_dim {
        return Err(CliError::Runtime(format!(
            "model expects {} features but data provides {}",
            model.architecture.input_dim,
            samples.width()
        )));
    }

    let mut csv = String::from("timestamp,predicted_power\n");
    for row in 0..samples.len() {
        let prediction = model.predict(samples.feature_row(row))?;
        let _ = writeln!(
            csv,
            "{},{}",
            samples.target_time(row).format("%Y-%m-%dT%H:%M:%S"),
            prediction
        );
    }
    match out {
        Some(path) => {
            write_text(path, &csv)?;
            println!("wrote {} predictions to {}", samples.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

/// Validation protocol selector for `evaluate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalMode {
    Kfold,
    Holdout,
    Stability,
}

/// `evaluate`: dispatches to the chosen protocol and writes the per-unit
/// and aggregate CSVs (plus sorted curves for stability runs).
#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    data: &Path,
    flags: &TrainingFlags,
    policy: ReleasePolicy,
    mode: EvalMode,
    k: usize,
    runs: usize,
    train_fraction: f64,
    out_dir: &Path,
) -> Result<(), CliError> {
    let samples = load_samples(data, policy)?;
    if samples.is_empty() {
        return Err(CliError::Runtime(format!(
            "no valid sample windows in {}",
            data.display()
        )));
    }
    let settings = flags.resolve(samples.width())?;
    ensure_dir(out_dir)?;

    let report = match mode {
        EvalMode::Kfold => run_kfold(
            &samples,
            &settings.arch,
            &settings.cd,
            &settings.ft,
            k,
            settings.seed,
        )?,
        EvalMode::Holdout => run_holdout(
            &samples,
            &settings.arch,
            &settings.cd,
            &settings.ft,
            train_fraction,
            settings.seed,
        )?,
        EvalMode::Stability => {
            let stability = stability_runs(
                &samples,
                &settings.arch,
                &settings.cd,
                &settings.ft,
                runs,
                settings.seed,
                train_fraction,
            )?;
            write_text(&out_dir.join("stability_curves.csv"), &stability.curves_csv())?;
            println!(
                "coefficient of variation: rmse {:.4}, mae {:.4}, sde {:.4}",
                stability.cv_rmse, stability.cv_mae, stability.cv_sde
            );
            stability.runs
        }
    };

    write_text(&out_dir.join("evaluation_units.csv"), &report.units_csv())?;
    write_text(&out_dir.join("evaluation_aggregate.csv"), &report.aggregate_csv())?;
    print_report(&report);
    Ok(())
}

fn print_report(report: &EvalReport) {
    let train_total: f64 = report.units.iter().map(|u| u.train_seconds).sum();
    let test_total: f64 = report.units.iter().map(|u| u.test_seconds).sum();
    for unit in &report.units {
        println!(
            "{}: rmse {:.6}, mae {:.6}, sde {:.6} (train {:.2}s, test {:.2}s)",
            unit.label, unit.errors.rmse, unit.errors.mae, unit.errors.sde,
            unit.train_seconds, unit.test_seconds
        );
    }
    println!(
        "mean: rmse {:.6}, mae {:.6}, sde {:.6}",
        report.mean.rmse, report.mean.mae, report.mean.sde
    );
    println!("wall clock: training {train_total:.2}s, testing {test_total:.2}s");
}

/// `compare`: persistence, the two-layer network, and the full model on the
/// same chronological split; emits `model,rmse,mae,sde`.
pub fn cmd_compare(
    data: &Path,
    flags: &TrainingFlags,
    policy: ReleasePolicy,
    train_fraction: f64,
    nn_sizes: (usize, usize),
    out: Option<&Path>,
) -> Result<(), CliError> {
    let samples = load_samples(data, policy)?;
    if samples.is_empty() {
        return Err(CliError::Runtime(format!(
            "no valid sample windows in {}",
            data.display()
        )));
    }
    let settings = flags.resolve(samples.width())?;
    let _ = INPUT_DIM; // width checks happen inside the predictors

    let (train, test) = holdout_split(&samples, train_fraction)?;
    let dbn = train_dbn(
        &train,
        &settings.arch,
        &settings.cd,
        &settings.ft,
        settings.seed,
    )?
    .model;
    let nn = train_two_layer_nn(&train, nn_sizes, &settings.ft, settings.seed)?;
    let rows = compare(
        &[
            ("dbn-wp", &dbn),
            ("two-layer-nn", &nn),
            ("persistence", &BaselineModel::Persistence),
        ],
        &test,
    )?;
    let csv = comparison_csv(&rows);
    match out {
        Some(path) => {
            write_text(path, &csv)?;
            println!("wrote comparison to {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

/// Resolves an optional output path against a default file name.
pub fn default_out(out: Option<PathBuf>, fallback: &str) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(fallback))
}
