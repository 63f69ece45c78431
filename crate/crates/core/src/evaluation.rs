//! Error metrics and validation harnesses: random k-fold, chronological
//! hold-out, and multi-seed stability analysis.
//!
//! The harnesses are generic over a trainer closure so that any predictor
//! implementing [`RowPredictor`] (the stacked network, baselines, or test
//! stubs) runs under identical protocols. Folds and stability runs are
//! independent jobs with derived seeds and execute in parallel; reports are
//! assembled in index order, so results do not depend on scheduling.

use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{chronological_split, SampleSet};
use crate::dbn::{config_summary, train_dbn, DbnArchitecture, DbnModel, FineTuneConfig};
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::rbm::CdConfig;

/// Root-mean-square error, mean absolute error, and the standard deviation
/// of the error, all in normalized power units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTriple {
    pub rmse: f64,
    pub mae: f64,
    pub sde: f64,
}

/// Computes the three error measures between aligned vectors.
///
/// RMSE is the root of the mean squared error, MAE the mean absolute error,
/// and SDE the population standard deviation of the errors, so that
/// `rmse² = mean_error² + sde²` holds exactly up to rounding.
pub fn metrics(actual: &[f64], predicted: &[f64]) -> Result<ErrorTriple> {
    if actual.is_empty() {
        return Err(Error::EmptyInput("metrics"));
    }
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            context: "metrics",
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    let n = actual.len() as f64;
    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    let mut sum = 0.0;
    for (&a, &p) in actual.iter().zip(predicted) {
        let e = a - p;
        sum_sq += e * e;
        sum_abs += e.abs();
        sum += e;
    }
    let mean_error = sum / n;
    let mut sum_dev = 0.0;
    for (&a, &p) in actual.iter().zip(predicted) {
        let d = a - p - mean_error;
        sum_dev += d * d;
    }
    Ok(ErrorTriple {
        rmse: (sum_sq / n).sqrt(),
        mae: sum_abs / n,
        sde: (sum_dev / n).sqrt(),
    })
}

/// Random partition of `0..n` into `k` disjoint folds whose sizes differ by
/// at most one.
pub fn kfold_indices(n: usize, k: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidConfig(format!(
            "k-fold needs k <= n, got k={k}, n={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let base = n / k;
    let remainder = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < remainder);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Anything that can predict a sample's target from its raw feature row.
pub trait RowPredictor {
    fn predict_row(&self, set: &SampleSet, row: usize) -> Result<f64>;
}

impl RowPredictor for DbnModel {
    fn predict_row(&self, set: &SampleSet, row: usize) -> Result<f64> {
        self.predict(set.feature_row(row))
    }
}

/// Error triple of a predictor over every row of a raw test set.
pub fn evaluate_predictor<P: RowPredictor + ?Sized>(
    predictor: &P,
    test: &SampleSet,
) -> Result<ErrorTriple> {
    if test.is_empty() {
        return Err(Error::EmptyInput("evaluate_predictor test set"));
    }
    let mut predicted = Vec::with_capacity(test.len());
    for row in 0..test.len() {
        predicted.push(predictor.predict_row(test, row)?);
    }
    metrics(test.targets().as_slice(), &predicted)
}

/// One fold or run of a report.
#[derive(Debug, Clone)]
pub struct EvalUnit {
    pub label: String,
    pub errors: ErrorTriple,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

/// Per-unit error triples with their aggregate statistics.
///
/// The metric columns are deterministic functions of (data, settings, seed);
/// the timing columns are measured wall clock and vary between runs.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub units: Vec<EvalUnit>,
    pub mean: ErrorTriple,
    pub std: ErrorTriple,
    pub config: String,
}

impl EvalReport {
    pub fn from_units(units: Vec<EvalUnit>, config: String) -> Result<EvalReport> {
        if units.is_empty() {
            return Err(Error::EmptyInput("evaluation units"));
        }
        let n = units.len() as f64;
        let mean_of = |f: fn(&ErrorTriple) -> f64| -> f64 {
            units.iter().map(|u| f(&u.errors)).sum::<f64>() / n
        };
        let std_of = |f: fn(&ErrorTriple) -> f64, mean: f64| -> f64 {
            (units
                .iter()
                .map(|u| {
                    let d = f(&u.errors) - mean;
                    d * d
                })
                .sum::<f64>()
                / n)
                .sqrt()
        };
        let mean = ErrorTriple {
            rmse: mean_of(|e| e.rmse),
            mae: mean_of(|e| e.mae),
            sde: mean_of(|e| e.sde),
        };
        let std = ErrorTriple {
            rmse: std_of(|e| e.rmse, mean.rmse),
            mae: std_of(|e| e.mae, mean.mae),
            sde: std_of(|e| e.sde, mean.sde),
        };
        Ok(EvalReport {
            units,
            mean,
            std,
            config,
        })
    }

    /// CSV with one row per fold/run:
    /// `unit,rmse,mae,sde,train_seconds,test_seconds`.
    pub fn units_csv(&self) -> String {
        let mut out = String::from("unit,rmse,mae,sde,train_seconds,test_seconds\n");
        for u in &self.units {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                u.label, u.errors.rmse, u.errors.mae, u.errors.sde, u.train_seconds, u.test_seconds
            ));
        }
        out
    }

    /// CSV with the aggregate mean and standard deviation rows.
    pub fn aggregate_csv(&self) -> String {
        format!(
            "statistic,rmse,mae,sde\nmean,{},{},{}\nstd,{},{},{}\n",
            self.mean.rmse, self.mean.mae, self.mean.sde, self.std.rmse, self.std.mae, self.std.sde
        )
    }
}

fn check_raw(samples: &SampleSet, harness: &'static str) -> Result<()> {
    if samples.normalization().is_some() {
        return Err(Error::InvalidConfig(format!(
            "{harness} expects raw samples; trainers fit normalization on their own split"
        )));
    }
    Ok(())
}

/// Random k-fold cross-validation under a caller-supplied trainer.
///
/// The partition is drawn from `seed`; fold `i` trains with derived seed
/// `seed + i` on the other `k - 1` folds and is scored on fold `i`.
pub fn run_kfold_with<P, F>(
    samples: &SampleSet,
    k: usize,
    seed: u64,
    config: &str,
    trainer: F,
) -> Result<EvalReport>
where
    P: RowPredictor,
    F: Fn(&SampleSet, u64) -> Result<P> + Sync,
{
    check_raw(samples, "run_kfold")?;
    let mut rng = Rng::with_seed(seed);
    let folds = kfold_indices(samples.len(), k, &mut rng)?;

    let units = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let mut test_rows = fold.clone();
            test_rows.sort_unstable();
            let mut train_rows: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            train_rows.sort_unstable();

            let train_set = samples.select(&train_rows)?;
            let test_set = samples.select(&test_rows)?;

            let started = Instant::now();
            let predictor = trainer(&train_set, seed + i as u64)?;
            let train_seconds = started.elapsed().as_secs_f64();

            let started = Instant::now();
            let errors = evaluate_predictor(&predictor, &test_set)?;
            let test_seconds = started.elapsed().as_secs_f64();

            Ok(EvalUnit {
                label: format!("fold{}", i + 1),
                errors,
                train_seconds,
                test_seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_units(units, config.to_string())
}

/// Random 5-fold (or k-fold) cross-validation of the pretrained-and-
/// fine-tuned network.
pub fn run_kfold(
    samples: &SampleSet,
    arch: &DbnArchitecture,
    cd: &CdConfig,
    ft: &FineTuneConfig,
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    run_kfold_with(samples, k, seed, &config_summary(arch, cd, ft, seed), |train, s| {
        train_dbn(train, arch, cd, ft, s).map(|t| t.model)
    })
}

/// Chronological split at a fraction of the samples: the earliest
/// `train_fraction` of target hours train, the rest test.
pub fn holdout_split(samples: &SampleSet, train_fraction: f64) -> Result<(SampleSet, SampleSet)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let boundary_rank = (samples.len() as f64 * train_fraction).round() as usize;
    if boundary_rank == 0 || boundary_rank >= samples.len() {
        return Err(Error::InvalidConfig(format!(
            "train fraction {train_fraction} leaves an empty split for {} samples",
            samples.len()
        )));
    }
    let mut target_times: Vec<chrono::NaiveDateTime> =
        (0..samples.len()).map(|r| samples.target_time(r)).collect();
    target_times.sort_unstable();
    chronological_split(samples, target_times[boundary_rank])
}

/// Chronological hold-out under a caller-supplied trainer: the earliest
/// `train_fraction` of targets train, the rest test.
pub fn run_holdout_with<P, F>(
    samples: &SampleSet,
    train_fraction: f64,
    seed: u64,
    config: &str,
    trainer: F,
) -> Result<EvalReport>
where
    P: RowPredictor,
    F: Fn(&SampleSet, u64) -> Result<P> + Sync,
{
    check_raw(samples, "run_holdout")?;
    let (train_set, test_set) = holdout_split(samples, train_fraction)?;

    let started = Instant::now();
    let predictor = trainer(&train_set, seed)?;
    let train_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let errors = evaluate_predictor(&predictor, &test_set)?;
    let test_seconds = started.elapsed().as_secs_f64();

    EvalReport::from_units(
        vec![EvalUnit {
            label: "holdout".to_string(),
            errors,
            train_seconds,
            test_seconds,
        }],
        config.to_string(),
    )
}

/// Chronological hold-out of the pretrained-and-fine-tuned network.
pub fn run_holdout(
    samples: &SampleSet,
    arch: &DbnArchitecture,
    cd: &CdConfig,
    ft: &FineTuneConfig,
    train_fraction: f64,
    seed: u64,
) -> Result<EvalReport> {
    run_holdout_with(
        samples,
        train_fraction,
        seed,
        &config_summary(arch, cd, ft, seed),
        |train, s| train_dbn(train, arch, cd, ft, s).map(|t| t.model),
    )
}

/// Sorted per-metric curves and dispersion statistics over repeated
/// hold-out trainings.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// One unit per run, labeled by its seed.
    pub runs: EvalReport,
    pub sorted_rmse: Vec<f64>,
    pub sorted_mae: Vec<f64>,
    pub sorted_sde: Vec<f64>,
    /// Coefficient of variation (std / mean) per metric.
    pub cv_rmse: f64,
    pub cv_mae: f64,
    pub cv_sde: f64,
}

impl StabilityReport {
    fn new(runs: EvalReport) -> StabilityReport {
        let mut sorted_rmse: Vec<f64> = runs.units.iter().map(|u| u.errors.rmse).collect();
        let mut sorted_mae: Vec<f64> = runs.units.iter().map(|u| u.errors.mae).collect();
        let mut sorted_sde: Vec<f64> = runs.units.iter().map(|u| u.errors.sde).collect();
        for v in [&mut sorted_rmse, &mut sorted_mae, &mut sorted_sde] {
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
        }
        let cv = |std: f64, mean: f64| if mean == 0.0 { 0.0 } else { std / mean };
        StabilityReport {
            cv_rmse: cv(runs.std.rmse, runs.mean.rmse),
            cv_mae: cv(runs.std.mae, runs.mean.mae),
            cv_sde: cv(runs.std.sde, runs.mean.sde),
            sorted_rmse,
            sorted_mae,
            sorted_sde,
            runs,
        }
    }

    /// CSV of the sorted metric curves: `rank,rmse,mae,sde`.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("rank,rmse,mae,sde\n");
        for i in 0..self.sorted_rmse.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i + 1,
                self.sorted_rmse[i],
                self.sorted_mae[i],
                self.sorted_sde[i]
            ));
        }
        out
    }
}

/// Repeated independent hold-out trainings with seeds
/// `base_seed .. base_seed + n_runs`, under a caller-supplied trainer.
pub fn stability_runs_with<P, F>(
    samples: &SampleSet,
    n_runs: usize,
    base_seed: u64,
    train_fraction: f64,
    config: &str,
    trainer: F,
) -> Result<StabilityReport>
where
    P: RowPredictor,
    F: Fn(&SampleSet, u64) -> Result<P> + Sync,
{
    if n_runs < 2 {
        return Err(Error::InvalidConfig(format!(
            "stability analysis needs at least 2 runs, got {n_runs}"
        )));
    }
    let units = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = base_seed + run as u64;
            let report = run_holdout_with(samples, train_fraction, seed, config, &trainer)?;
            let unit = &report.units[0];
            Ok(EvalUnit {
                label: format!("seed{seed}"),
                errors: unit.errors,
                train_seconds: unit.train_seconds,
                test_seconds: unit.test_seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityReport::new(EvalReport::from_units(
        units,
        config.to_string(),
    )?))
}

/// Repeated hold-out trainings of the pretrained-and-fine-tuned network.
pub fn stability_runs(
    samples: &SampleSet,
    arch: &DbnArchitecture,
    cd: &CdConfig,
    ft: &FineTuneConfig,
    n_runs: usize,
    base_seed: u64,
    train_fraction: f64,
) -> Result<StabilityReport> {
    stability_runs_with(
        samples,
        n_runs,
        base_seed,
        train_fraction,
        &config_summary(arch, cd, ft, base_seed),
        |train, s| train_dbn(train, arch, cd, ft, s).map(|t| t.model),
    )
}
