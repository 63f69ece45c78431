//! Reference predictors for comparison tables: the persistence forecast and
//! a two-hidden-layer feedforward network trained without pretraining.

use crate::dataset::{SampleSet, FEATURE_WIDTH, POWER_BLOCK_START};
use crate::dbn::{finetune, DbnArchitecture, DbnModel, FineTuneConfig, Provenance};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_predictor, ErrorTriple, RowPredictor};
use crate::numerics::Rng;

/// A comparison predictor: parameter-free persistence, or a plain two-layer
/// network sharing the fine-tuning machinery of the main model.
#[derive(Debug, Clone)]
pub enum BaselineModel {
    /// "Power one hour ago persists."
    Persistence,
    TwoLayerNn(DbnModel),
}

impl RowPredictor for BaselineModel {
    fn predict_row(&self, set: &SampleSet, row: usize) -> Result<f64> {
        match self {
            BaselineModel::Persistence => persistence_predict(set, row),
            BaselineModel::TwoLayerNn(model) => model.predict(set.feature_row(row)),
        }
    }
}

/// Persistence forecast: the sample's `kp(t-1)` feature, denormalized if the
/// set carries scaling metadata.
pub fn persistence_predict(set: &SampleSet, row: usize) -> Result<f64> {
    if set.width() != FEATURE_WIDTH {
        return Err(Error::LengthMismatch {
            context: "persistence needs the lagged-power feature block",
            expected: FEATURE_WIDTH,
            found: set.width(),
        });
    }
    if row >= set.len() {
        return Err(Error::IndexOutOfRange {
            context: "persistence_predict",
            index: row,
            bound: set.len(),
        });
    }
    let lag = set.feature_row(row)[POWER_BLOCK_START];
    Ok(match set.normalization() {
        Some(meta) => meta.denormalize_feature(POWER_BLOCK_START, lag),
        None => lag,
    })
}

/// Trains the two-hidden-layer comparison network: random initialization
/// (no pretraining), then the same mini-batch momentum SGD used for the
/// main model. `train` must be raw; normalization is fitted on it.
pub fn train_two_layer_nn(
    train: &SampleSet,
    hidden_sizes: (usize, usize),
    ft: &FineTuneConfig,
    seed: u64,
) -> Result<BaselineModel> {
    if train.normalization().is_some() {
        return Err(Error::InvalidConfig(
            "train_two_layer_nn expects raw samples".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::EmptyInput("train_two_layer_nn samples"));
    }
    let arch = DbnArchitecture::new(train.width(), vec![hidden_sizes.0, hidden_sizes.1])?;
    let normalized = train.normalize(0..train.len())?;
    let mut rng = Rng::with_seed(seed);
    let provenance = Provenance {
        seed,
        config_summary: format!(
            "two-layer-nn;arch={arch};ft=lr{},m{},e{},b{};seed={seed}",
            ft.learning_rate, ft.momentum, ft.epochs, ft.batch_size
        ),
    };
    let mut model = DbnModel::random_init(
        arch,
        normalized.normalization().expect("just normalized").clone(),
        provenance,
        &mut rng,
    )?;
    finetune(&mut model, &normalized, ft, &mut rng)?;
    Ok(BaselineModel::TwoLayerNn(model))
}

/// One row of a model-comparison table.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub model: String,
    pub errors: ErrorTriple,
}

/// Scores every model on the same raw test rows. Rows come back sorted by
/// model name, so the table is canonical regardless of argument order.
pub fn compare(
    models: &[(&str, &dyn RowPredictor)],
    test: &SampleSet,
) -> Result<Vec<ComparisonRow>> {
    if models.is_empty() {
        return Err(Error::EmptyInput("compare models"));
    }
    let mut rows = Vec::with_capacity(models.len());
    for (name, predictor) in models {
        rows.push(ComparisonRow {
            model: name.to_string(),
            errors: evaluate_predictor(*predictor, test)?,
        });
    }
    rows.sort_by(|a, b| a.model.cmp(&b.model));
    Ok(rows)
}

/// CSV rendering of a comparison table: `model,rmse,mae,sde`.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("model,rmse,mae,sde\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.model, row.errors.rmse, row.errors.mae, row.errors.sde
        ));
    }
    out
}
