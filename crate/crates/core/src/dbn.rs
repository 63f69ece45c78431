//! Stacked-RBM network: greedy layer-wise pretraining, conversion to a
//! feedforward regressor with a single linear output neuron, and supervised
//! fine-tuning with momentum SGD on mean-squared error.
//!
//! During the supervised phases every hidden layer is a deterministic
//! mean-field sigmoid unit `a = sigmoid(c + Wᵀx)`; sampling only happens
//! inside contrastive divergence. Each RBM contributes its weight matrix and
//! hidden bias to the feedforward pass; visible biases are kept for
//! provenance but take no part in prediction.

use std::fmt;

use crate::dataset::{Normalization, SampleSet};
use crate::error::{Error, Result};
use crate::numerics::{gaussian_init, sigmoid, Matrix, Rng, Vector};
use crate::rbm::{train_rbm, CdConfig, RbmParams, INIT_WEIGHT_STD};

/// Layer widths of the network, input to output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbnArchitecture {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    /// Regression head width; always 1.
    pub output_dim: usize,
}

impl DbnArchitecture {
    pub fn new(input_dim: usize, hidden_sizes: Vec<usize>) -> Result<DbnArchitecture> {
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input dimension must be >= 1".into()));
        }
        if hidden_sizes.is_empty() || hidden_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig(
                "hidden sizes must be nonempty with every size >= 1".into(),
            ));
        }
        Ok(DbnArchitecture {
            input_dim,
            hidden_sizes,
            output_dim: 1,
        })
    }

    /// First preset: hidden layers `[100, 80, 50, 5]`.
    pub fn dbn1(input_dim: usize) -> DbnArchitecture {
        DbnArchitecture::new(input_dim, vec![100, 80, 50, 5]).expect("valid preset")
    }

    /// Second preset: hidden layers `[80, 50, 5]`.
    pub fn dbn2(input_dim: usize) -> DbnArchitecture {
        DbnArchitecture::new(input_dim, vec![80, 50, 5]).expect("valid preset")
    }
}

impl fmt::Display for DbnArchitecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.input_dim)?;
        for s in &self.hidden_sizes {
            write!(f, "-{s}")?;
        }
        write!(f, "-{}", self.output_dim)
    }
}

/// Supervised fine-tuning settings (mini-batch momentum SGD on MSE).
#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for FineTuneConfig {
    fn default() -> FineTuneConfig {
        FineTuneConfig {
            learning_rate: 0.87,
            momentum: 0.05,
            epochs: 100,
            batch_size: 100,
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "fine-tune learning rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "fine-tune momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("fine-tune epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "fine-tune batch size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Where a model came from: the seed and a canonical settings summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub config_summary: String,
}

/// Trained network: the RBM stack, the linear regression head, and the
/// feature/target scaling fitted on its training data.
#[derive(Debug, Clone, PartialEq)]
pub struct DbnModel {
    pub architecture: DbnArchitecture,
    pub rbm_stack: Vec<RbmParams>,
    pub head_weights: Vector,
    pub head_bias: f64,
    pub normalization: Normalization,
    pub provenance: Provenance,
}

impl DbnModel {
    /// Wraps explicit parts, checking that RBM dimensions chain, the head
    /// matches the last hidden layer, and the normalization covers the
    /// input width.
    pub fn new(
        architecture: DbnArchitecture,
        rbm_stack: Vec<RbmParams>,
        head_weights: Vector,
        head_bias: f64,
        normalization: Normalization,
        provenance: Provenance,
    ) -> Result<DbnModel> {
        if rbm_stack.len() != architecture.hidden_sizes.len() {
            return Err(Error::InvalidConfig(format!(
                "architecture lists {} hidden layers but stack has {}",
                architecture.hidden_sizes.len(),
                rbm_stack.len()
            )));
        }
        let mut expected_visible = architecture.input_dim;
        for (layer, (rbm, &hidden)) in rbm_stack
            .iter()
            .zip(&architecture.hidden_sizes)
            .enumerate()
        {
            if rbm.n_visible() != expected_visible || rbm.n_hidden() != hidden {
                return Err(Error::InvalidConfig(format!(
                    "layer {layer} has shape {}x{}, expected {expected_visible}x{hidden}",
                    rbm.n_visible(),
                    rbm.n_hidden()
                )));
            }
            expected_visible = hidden;
        }
        if head_weights.len() != expected_visible {
            return Err(Error::LengthMismatch {
                context: "regression head",
                expected: expected_visible,
                found: head_weights.len(),
            });
        }
        if normalization.width() != architecture.input_dim {
            return Err(Error::LengthMismatch {
                context: "normalization metadata",
                expected: architecture.input_dim,
                found: normalization.width(),
            });
        }
        Ok(DbnModel {
            architecture,
            rbm_stack,
            head_weights,
            head_bias,
            normalization,
            provenance,
        })
    }

    /// Assembles a model around a pretrained stack; the head starts at
    /// `Normal(0, 0.01²)` weights with zero bias.
    pub fn from_pretraining(
        architecture: DbnArchitecture,
        rbm_stack: Vec<RbmParams>,
        normalization: Normalization,
        provenance: Provenance,
        rng: &mut Rng,
    ) -> Result<DbnModel> {
        let last = *architecture.hidden_sizes.last().expect("validated nonempty");
        let head = gaussian_init(1, last, INIT_WEIGHT_STD, rng);
        DbnModel::new(
            architecture,
            rbm_stack,
            Vector::from_vec(head.data().to_vec())?,
            0.0,
            normalization,
            provenance,
        )
    }

    /// Feedforward network without pretraining: layer weights are
    /// `Normal(0, 1/fan_in)`, biases zero.
    pub fn random_init(
        architecture: DbnArchitecture,
        normalization: Normalization,
        provenance: Provenance,
        rng: &mut Rng,
    ) -> Result<DbnModel> {
        let mut stack = Vec::with_capacity(architecture.hidden_sizes.len());
        let mut fan_in = architecture.input_dim;
        for &hidden in &architecture.hidden_sizes {
            let std = 1.0 / (fan_in as f64).sqrt();
            stack.push(RbmParams::new(
                gaussian_init(fan_in, hidden, std, rng),
                Vector::zeros(fan_in),
                Vector::zeros(hidden),
            )?);
            fan_in = hidden;
        }
        let head_std = 1.0 / (fan_in as f64).sqrt();
        let head = gaussian_init(1, fan_in, head_std, rng);
        DbnModel::new(
            architecture,
            stack,
            Vector::from_vec(head.data().to_vec())?,
            0.0,
            normalization,
            provenance,
        )
    }

    /// Mean-field forward pass on an already-normalized feature vector.
    ///
    /// Returns the (normalized-scale, unclamped) prediction and every hidden
    /// layer's activations, input-side first.
    pub fn forward(&self, features: &Vector) -> Result<(f64, Vec<Vector>)> {
        if features.len() != self.architecture.input_dim {
            return Err(Error::LengthMismatch {
                context: "forward input",
                expected: self.architecture.input_dim,
                found: features.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.rbm_stack.len());
        let mut current = features;
        for rbm in &self.rbm_stack {
            let mut a = rbm.weights.tmul_vec(current)?;
            for (j, x) in a.as_mut_slice().iter_mut().enumerate() {
                *x = sigmoid(*x + rbm.hidden_bias.get(j));
            }
            activations.push(a);
            current = activations.last().expect("just pushed");
        }
        let output = self.head_weights.dot(current)? + self.head_bias;
        Ok((output, activations))
    }

    /// Mean batch MSE of the normalized-scale predictions against
    /// normalized targets.
    pub fn batch_loss(&self, features: &Matrix, targets: &[f64]) -> Result<f64> {
        if features.rows() != targets.len() {
            return Err(Error::LengthMismatch {
                context: "batch targets",
                expected: features.rows(),
                found: targets.len(),
            });
        }
        if features.rows() == 0 {
            return Err(Error::EmptyInput("batch_loss"));
        }
        let mut loss = 0.0;
        for (row, &target) in targets.iter().enumerate() {
            let x = Vector::from_vec(features.row(row).to_vec())?;
            let (y, _) = self.forward(&x)?;
            loss += (y - target) * (y - target);
        }
        Ok(loss / targets.len() as f64)
    }

    /// Batch MSE together with its exact gradient with respect to every
    /// trainable parameter (layer weights and hidden biases, head weights
    /// and bias), computed by backpropagation.
    pub fn batch_gradients(
        &self,
        features: &Matrix,
        targets: &[f64],
    ) -> Result<(f64, DbnGradients)> {
        if features.rows() != targets.len() {
            return Err(Error::LengthMismatch {
                context: "batch targets",
                expected: features.rows(),
                found: targets.len(),
            });
        }
        if features.rows() == 0 {
            return Err(Error::EmptyInput("batch_gradients"));
        }
        let mut grads = DbnGradients::zeros(self.shapes());
        let batch = targets.len() as f64;
        let mut loss = 0.0;

        for (row, &target) in targets.iter().enumerate() {
            let input = Vector::from_vec(features.row(row).to_vec())?;
            let (y, activations) = self.forward(&input)?;
            let error = y - target;
            loss += error * error;
            // d(mean squared error)/dy for this sample.
            let dy = 2.0 * error / batch;

            let top = activations.last().expect("at least one hidden layer");
            grads.head_weights.add_scaled(top, dy);
            grads.head_bias += dy;

            // Gradient flowing into the top activations.
            let mut upstream = self.head_weights.clone();
            upstream.scale(dy);

            for layer in (0..self.rbm_stack.len()).rev() {
                let a = &activations[layer];
                // δ = upstream ⊙ a(1 − a)
                let mut delta = upstream;
                for (d, &act) in delta.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    *d *= act * (1.0 - act);
                }
                let below: &Vector = if layer == 0 {
                    &input
                } else {
                    &activations[layer - 1]
                };
                outer_add(&mut grads.layer_weights[layer], below, &delta);
                grads.layer_biases[layer].add_scaled(&delta, 1.0);
                upstream = self.rbm_stack[layer].weights.mul_vec(&delta)?;
            }
        }
        Ok((loss / batch, grads))
    }

    /// Full prediction path from raw (unnormalized) features: normalize,
    /// forward, denormalize, clamp to `[0, 1]`.
    ///
    /// Features outside ±20% of the training range are logged as warnings
    /// and clamped.
    pub fn predict(&self, raw_features: &[f64]) -> Result<f64> {
        if raw_features.len() != self.architecture.input_dim {
            return Err(Error::LengthMismatch {
                context: "predict input",
                expected: self.architecture.input_dim,
                found: raw_features.len(),
            });
        }
        let mut scaled = Vec::with_capacity(raw_features.len());
        let mut out_of_band = 0usize;
        let mut first_bad_col = 0usize;
        for (col, &x) in raw_features.iter().enumerate() {
            let s = self.normalization.scale_feature(col, x);
            if !(-0.2..=1.2).contains(&s) {
                if out_of_band == 0 {
                    first_bad_col = col;
                }
                out_of_band += 1;
            }
            scaled.push(s.clamp(0.0, 1.0));
        }
        if out_of_band > 0 {
            log::warn!(
                "{out_of_band} feature(s) outside ±20% of the training range (first: column {first_bad_col}); clamped"
            );
        }
        let (y, _) = self.forward(&Vector::from_vec(scaled)?)?;
        Ok(self.normalization.denormalize_target(y).clamp(0.0, 1.0))
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        self.rbm_stack
            .iter()
            .map(|r| (r.n_visible(), r.n_hidden()))
            .collect()
    }

    fn check_finite(&self) -> bool {
        self.rbm_stack.iter().all(|r| {
            r.weights.data().iter().all(|x| x.is_finite())
                && r.hidden_bias.as_slice().iter().all(|x| x.is_finite())
        }) && self.head_weights.as_slice().iter().all(|x| x.is_finite())
            && self.head_bias.is_finite()
    }
}

/// Per-parameter gradients (or velocities) matching a model's trainable
/// parts.
#[derive(Debug, Clone)]
pub struct DbnGradients {
    pub layer_weights: Vec<Matrix>,
    pub layer_biases: Vec<Vector>,
    pub head_weights: Vector,
    pub head_bias: f64,
}

impl DbnGradients {
    fn zeros(shapes: Vec<(usize, usize)>) -> DbnGradients {
        let head_len = shapes.last().map(|&(_, h)| h).unwrap_or(0);
        DbnGradients {
            layer_weights: shapes.iter().map(|&(v, h)| Matrix::zeros(v, h)).collect(),
            layer_biases: shapes.iter().map(|&(_, h)| Vector::zeros(h)).collect(),
            head_weights: Vector::zeros(head_len),
            head_bias: 0.0,
        }
    }
}

/// Greedy layer-wise pretraining: trains the first RBM on the inputs, then
/// feeds each layer's mean hidden activations (not samples) to the next.
///
/// Returns the trained stack and the per-layer reconstruction-error traces.
pub fn pretrain(
    arch: &DbnArchitecture,
    inputs: &Matrix,
    cfg: &CdConfig,
    rng: &mut Rng,
) -> Result<(Vec<RbmParams>, Vec<Vec<f64>>)> {
    if inputs.cols() != arch.input_dim {
        return Err(Error::LengthMismatch {
            context: "pretrain input width",
            expected: arch.input_dim,
            found: inputs.cols(),
        });
    }
    let mut stack = Vec::with_capacity(arch.hidden_sizes.len());
    let mut traces = Vec::with_capacity(arch.hidden_sizes.len());
    let mut layer_input = inputs.clone();
    for &hidden in &arch.hidden_sizes {
        let (params, trace) = train_rbm(&layer_input, hidden, cfg, rng)?;
        let mut next = Vec::with_capacity(layer_input.rows() * hidden);
        for row in 0..layer_input.rows() {
            let v = Vector::from_vec(layer_input.row(row).to_vec())?;
            next.extend_from_slice(params.hidden_given_visible(&v)?.as_slice());
        }
        layer_input = Matrix::from_vec(layer_input.rows(), hidden, next)?;
        stack.push(params);
        traces.push(trace);
    }
    Ok((stack, traces))
}

/// Mini-batch momentum SGD on MSE over a normalized sample set, updating
/// every layer and the head in place.
///
/// Returns the per-epoch mean training loss.
pub fn finetune(
    model: &mut DbnModel,
    data: &SampleSet,
    cfg: &FineTuneConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("finetune data"));
    }
    if data.width() != model.architecture.input_dim {
        return Err(Error::LengthMismatch {
            context: "finetune input width",
            expected: model.architecture.input_dim,
            found: data.width(),
        });
    }

    let n = data.len();
    let mut velocity = DbnGradients::zeros(model.shapes());
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut weighted_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch_features = data.features().gather_rows(chunk)?;
            let batch_targets: Vec<f64> = chunk.iter().map(|&i| data.target(i)).collect();
            let (loss, grads) = model.batch_gradients(&batch_features, &batch_targets)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    what: "training loss",
                    epoch,
                    batch: 0,
                });
            }
            weighted_loss += loss * chunk.len() as f64;

            for layer in 0..model.rbm_stack.len() {
                velocity.layer_weights[layer].scale(cfg.momentum);
                velocity.layer_weights[layer].add_scaled(&grads.layer_weights[layer], -cfg.learning_rate);
                model.rbm_stack[layer]
                    .weights
                    .add_scaled(&velocity.layer_weights[layer], 1.0);

                velocity.layer_biases[layer].scale(cfg.momentum);
                velocity.layer_biases[layer].add_scaled(&grads.layer_biases[layer], -cfg.learning_rate);
                model.rbm_stack[layer]
                    .hidden_bias
                    .add_scaled(&velocity.layer_biases[layer], 1.0);
            }
            velocity.head_weights.scale(cfg.momentum);
            velocity.head_weights.add_scaled(&grads.head_weights, -cfg.learning_rate);
            model.head_weights.add_scaled(&velocity.head_weights, 1.0);
            velocity.head_bias =
                cfg.momentum * velocity.head_bias - cfg.learning_rate * grads.head_bias;
            model.head_bias += velocity.head_bias;
        }
        if !model.check_finite() {
            return Err(Error::Diverged {
                what: "model parameters",
                epoch,
                batch: 0,
            });
        }
        trace.push(weighted_loss / n as f64);
    }
    Ok(trace)
}

fn outer_add(target: &mut Matrix, below: &Vector, delta: &Vector) {
    let cols = target.cols();
    let data = target.data_mut();
    for (i, &x) in below.as_slice().iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let row = &mut data[i * cols..(i + 1) * cols];
        for (t, &d) in row.iter_mut().zip(delta.as_slice()) {
            *t += x * d;
        }
    }
}

/// Pretrained-and-fine-tuned model together with its training traces.
#[derive(Debug, Clone)]
pub struct TrainedDbn {
    pub model: DbnModel,
    /// Per-layer, per-epoch reconstruction error from pretraining.
    pub pretrain_traces: Vec<Vec<f64>>,
    /// Per-epoch fine-tuning loss.
    pub finetune_trace: Vec<f64>,
}

/// Full training pipeline on a raw sample set: fit normalization on the
/// given rows, pretrain the stack, then fine-tune the converted network.
pub fn train_dbn(
    train: &SampleSet,
    arch: &DbnArchitecture,
    cd: &CdConfig,
    ft: &FineTuneConfig,
    seed: u64,
) -> Result<TrainedDbn> {
    if train.normalization().is_some() {
        return Err(Error::InvalidConfig(
            "train_dbn expects raw samples; it fits normalization itself".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::EmptyInput("train_dbn samples"));
    }
    let normalized = train.normalize(0..train.len())?;
    let mut rng = Rng::with_seed(seed);
    let (stack, pretrain_traces) = pretrain(arch, normalized.features(), cd, &mut rng)?;
    let provenance = Provenance {
        seed,
        config_summary: config_summary(arch, cd, ft, seed),
    };
    let mut model = DbnModel::from_pretraining(
        arch.clone(),
        stack,
        normalized.normalization().expect("just normalized").clone(),
        provenance,
        &mut rng,
    )?;
    let finetune_trace = finetune(&mut model, &normalized, ft, &mut rng)?;
    Ok(TrainedDbn {
        model,
        pretrain_traces,
        finetune_trace,
    })
}

/// Canonical one-line settings description stored in model provenance.
pub fn config_summary(
    arch: &DbnArchitecture,
    cd: &CdConfig,
    ft: &FineTuneConfig,
    seed: u64,
) -> String {
    format!(
        "arch={arch};cd=lr{},m{},e{},b{},k{},hp{};ft=lr{},m{},e{},b{};seed={seed}",
        cd.learning_rate,
        cd.momentum,
        cd.epochs,
        cd.batch_size,
        cd.gibbs_steps,
        u8::from(cd.final_hidden_as_probability),
        ft.learning_rate,
        ft.momentum,
        ft.epochs,
        ft.batch_size,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_provenance() -> Provenance {
        Provenance {
            seed: 0,
            config_summary: "test".into(),
        }
    }

    fn uniform_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.next_f64()).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn pretrain_single_layer_is_one_rbm() {
        let arch = DbnArchitecture::new(6, vec![5]).unwrap();
        let mut rng = Rng::with_seed(3);
        let inputs = uniform_matrix(20, 6, &mut rng);
        let cfg = CdConfig {
            epochs: 2,
            batch_size: 10,
            ..CdConfig::default()
        };
        let (stack, traces) = pretrain(&arch, &inputs, &cfg, &mut rng).unwrap();
        assert_eq!(stack.len(), 1);
        assert_eq!((stack[0].n_visible(), stack[0].n_hidden()), (6, 5));
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].len(), 2);
    }

    #[test]
    fn pretrain_chains_preset_shapes() {
        let arch = DbnArchitecture::dbn2(124);
        let mut rng = Rng::with_seed(5);
        let inputs = uniform_matrix(30, 124, &mut rng);
        let cfg = CdConfig {
            epochs: 1,
            batch_size: 30,
            ..CdConfig::default()
        };
        let (stack, _) = pretrain(&arch, &inputs, &cfg, &mut rng).unwrap();
        let shapes: Vec<(usize, usize)> =
            stack.iter().map(|r| (r.n_visible(), r.n_hidden())).collect();
        assert_eq!(shapes, vec![(124, 80), (80, 50), (50, 5)]);
        // Adjacent layers chain.
        for pair in stack.windows(2) {
            assert_eq!(pair[0].n_hidden(), pair[1].n_visible());
        }
    }

    #[test]
    fn pretrain_same_seed_gives_identical_stacks() {
        let arch = DbnArchitecture::new(8, vec![4, 3]).unwrap();
        let inputs = uniform_matrix(16, 8, &mut Rng::with_seed(2));
        let cfg = CdConfig {
            epochs: 3,
            batch_size: 8,
            ..CdConfig::default()
        };
        let (a, _) = pretrain(&arch, &inputs, &cfg, &mut Rng::with_seed(7)).unwrap();
        let (b, _) = pretrain(&arch, &inputs, &cfg, &mut Rng::with_seed(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forward_zero_model_outputs_head_bias_and_half_activations() {
        let arch = DbnArchitecture::new(4, vec![3, 2]).unwrap();
        let model = DbnModel::new(
            arch,
            vec![RbmParams::zeros(4, 3), RbmParams::zeros(3, 2)],
            Vector::zeros(2),
            0.37,
            Normalization::identity(4),
            toy_provenance(),
        )
        .unwrap();
        let (y, activations) = model
            .forward(&Vector::from_vec(vec![0.1, 0.9, 0.4, 0.6]).unwrap())
            .unwrap();
        assert_eq!(y, 0.37);
        for a in &activations {
            assert!(a.as_slice().iter().all(|&x| x == 0.5));
        }
    }

    #[test]
    fn forward_single_unit_matches_hand_evaluation() {
        let arch = DbnArchitecture::new(2, vec![1]).unwrap();
        let rbm = RbmParams::new(
            Matrix::from_vec(2, 1, vec![0.5, -0.25]).unwrap(),
            Vector::zeros(2),
            Vector::from_vec(vec![0.1]).unwrap(),
        )
        .unwrap();
        let model = DbnModel::new(
            arch,
            vec![rbm],
            Vector::from_vec(vec![2.0]).unwrap(),
            -0.5,
            Normalization::identity(2),
            toy_provenance(),
        )
        .unwrap();
        let (y, _) = model
            .forward(&Vector::from_vec(vec![0.8, 0.4]).unwrap())
            .unwrap();
        let hand = 2.0 * sigmoid(0.5 * 0.8 - 0.25 * 0.4 + 0.1) - 0.5;
        assert!((y - hand).abs() < 1e-12, "{y} vs {hand}");
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = Rng::with_seed(19);
        let arch = DbnArchitecture::new(5, vec![4, 3]).unwrap();
        let model = DbnModel::random_init(
            arch,
            Normalization::identity(5),
            toy_provenance(),
            &mut rng,
        )
        .unwrap();
        let x = Vector::from_vec(vec![0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
        let (y1, _) = model.forward(&x).unwrap();
        let (y2, _) = model.forward(&x).unwrap();
        assert_eq!(y1.to_bits(), y2.to_bits());
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        // 6-[4,3]-1 network, random batch; the finite-difference oracle
        // perturbs every parameter by ±1e-6 and evaluates batch_loss.
        let mut rng = Rng::with_seed(23);
        let arch = DbnArchitecture::new(6, vec![4, 3]).unwrap();
        let mut model = DbnModel::random_init(
            arch,
            Normalization::identity(6),
            toy_provenance(),
            &mut rng,
        )
        .unwrap();
        // Non-trivial head and biases so no gradient path is degenerate.
        for j in 0..3 {
            model.head_weights.set(j, 0.5 + 0.2 * j as f64);
            model.rbm_stack[1].hidden_bias.set(j, 0.1 * (j as f64 - 1.0));
        }
        let features = uniform_matrix(5, 6, &mut rng);
        let targets: Vec<f64> = (0..5).map(|_| rng.next_f64()).collect();

        let (_, grads) = model.batch_gradients(&features, &targets).unwrap();

        let eps = 1e-6;
        let mut max_rel = 0.0f64;
        let mut check = |analytic: f64, loss_at: &mut dyn FnMut(f64) -> f64| {
            let plus = loss_at(eps);
            let minus = loss_at(-eps);
            let numeric = (plus - minus) / (2.0 * eps);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            if rel > max_rel {
                max_rel = rel;
            }
        };

        for layer in 0..model.rbm_stack.len() {
            for i in 0..model.rbm_stack[layer].weights.rows() {
                for j in 0..model.rbm_stack[layer].weights.cols() {
                    let base = model.rbm_stack[layer].weights.get(i, j);
                    let mut m = model.clone();
                    let f = &features;
                    let t = &targets;
                    check(grads.layer_weights[layer].get(i, j), &mut |d| {
                        m.rbm_stack[layer].weights.set(i, j, base + d);
                        m.batch_loss(f, t).unwrap()
                    });
                }
            }
            for j in 0..model.rbm_stack[layer].hidden_bias.len() {
                let base = model.rbm_stack[layer].hidden_bias.get(j);
                let mut m = model.clone();
                let f = &features;
                let t = &targets;
                check(grads.layer_biases[layer].get(j), &mut |d| {
                    m.rbm_stack[layer].hidden_bias.set(j, base + d);
                    m.batch_loss(f, t).unwrap()
                });
            }
        }
        for j in 0..model.head_weights.len() {
            let base = model.head_weights.get(j);
            let mut m = model.clone();
            let f = &features;
            let t = &targets;
            check(grads.head_weights.get(j), &mut |d| {
                m.head_weights.set(j, base + d);
                m.batch_loss(f, t).unwrap()
            });
        }
        {
            let base = model.head_bias;
            let mut m = model.clone();
            check(grads.head_bias, &mut |d| {
                m.head_bias = base + d;
                m.batch_loss(&features, &targets).unwrap()
            });
        }
        assert!(max_rel < 1e-4, "max relative gradient error {max_rel}");
    }

    #[test]
    fn finetune_vanishing_learning_rate_leaves_weights_unchanged() {
        let mut rng = Rng::with_seed(29);
        let arch = DbnArchitecture::new(4, vec![3]).unwrap();
        let mut model = DbnModel::random_init(
            arch,
            Normalization::identity(4),
            toy_provenance(),
            &mut rng,
        )
        .unwrap();
        let before = model.clone();
        let data = toy_samples(12, 4, &mut rng);
        let cfg = FineTuneConfig {
            learning_rate: 1e-15,
            momentum: 0.0,
            epochs: 1,
            batch_size: 4,
        };
        finetune(&mut model, &data, &cfg, &mut rng).unwrap();
        for (a, b) in model.head_weights.as_slice().iter().zip(before.head_weights.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        for layer in 0..model.rbm_stack.len() {
            for (a, b) in model.rbm_stack[layer]
                .weights
                .data()
                .iter()
                .zip(before.rbm_stack[layer].weights.data())
            {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    /// Normalized toy set: uniform features, target = mean of features.
    fn toy_samples(n: usize, width: usize, rng: &mut Rng) -> SampleSet {
        let features = uniform_matrix(n, width, rng);
        let targets: Vec<f64> = (0..n)
            .map(|r| features.row(r).iter().sum::<f64>() / width as f64)
            .collect();
        let base = chrono::NaiveDateTime::parse_from_str("2010-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S")
            .unwrap();
        let timestamps = (0..n as i64).map(|i| base + chrono::Duration::hours(i)).collect();
        let raw = SampleSet::new(features, Vector::from_vec(targets).unwrap(), timestamps).unwrap();
        // Attach identity scaling by fitting on data already in [0, 1].
        Normalization::identity(width).apply(&raw).unwrap()
    }

    #[test]
    fn finetune_learns_mean_of_features() {
        let mut rng = Rng::with_seed(31);
        let data = toy_samples(200, 6, &mut rng);
        let arch = DbnArchitecture::new(6, vec![4, 3]).unwrap();
        let mut model = DbnModel::random_init(
            arch,
            Normalization::identity(6),
            toy_provenance(),
            &mut rng,
        )
        .unwrap();
        let cfg = FineTuneConfig {
            learning_rate: 0.5,
            momentum: 0.05,
            epochs: 100,
            batch_size: 20,
        };
        let trace = finetune(&mut model, &data, &cfg, &mut rng).unwrap();
        assert_eq!(trace.len(), 100);
        assert!(
            trace[99] < 0.1 * trace[0],
            "loss {} did not fall below 10% of initial {}",
            trace[99],
            trace[0]
        );
    }

    #[test]
    fn finetune_loss_minimum_lands_late_or_small() {
        let mut rng = Rng::with_seed(37);
        let data = toy_samples(100, 5, &mut rng);
        let arch = DbnArchitecture::new(5, vec![4]).unwrap();
        let mut model = DbnModel::random_init(
            arch,
            Normalization::identity(5),
            toy_provenance(),
            &mut rng,
        )
        .unwrap();
        let cfg = FineTuneConfig {
            learning_rate: 0.3,
            momentum: 0.05,
            epochs: 50,
            batch_size: 10,
        };
        let trace = finetune(&mut model, &data, &cfg, &mut rng).unwrap();
        let min_at = trace
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let late = min_at >= trace.len() * 4 / 5;
        let small = trace[trace.len() - 1] < 0.1 * trace[0];
        assert!(late || small, "min at {min_at}, trace {trace:?}");
    }

    #[test]
    fn pretrained_and_random_initializations_are_distinguishable() {
        let mut data_rng = Rng::with_seed(41);
        let data = toy_samples(60, 8, &mut data_rng);
        let arch = DbnArchitecture::new(8, vec![5, 3]).unwrap();
        let cd = CdConfig {
            epochs: 10,
            batch_size: 20,
            learning_rate: 0.3,
            ..CdConfig::default()
        };
        let mut rng = Rng::with_seed(43);
        let (stack, _) = pretrain(&arch, data.features(), &cd, &mut rng).unwrap();
        let pretrained = DbnModel::from_pretraining(
            arch.clone(),
            stack,
            Normalization::identity(8),
            toy_provenance(),
            &mut rng,
        )
        .unwrap();
        let random = DbnModel::random_init(
            arch,
            Normalization::identity(8),
            toy_provenance(),
            &mut Rng::with_seed(43),
        )
        .unwrap();
        let targets: Vec<f64> = (0..data.len()).map(|i| data.target(i)).collect();
        let loss_pre = pretrained.batch_loss(data.features(), &targets).unwrap();
        let loss_rand = random.batch_loss(data.features(), &targets).unwrap();
        assert!(
            (loss_pre - loss_rand).abs() > 1e-10,
            "initial losses indistinguishable: {loss_pre} vs {loss_rand}"
        );
    }

    #[test]
    fn predict_constant_model_and_clamping() {
        let arch = DbnArchitecture::new(3, vec![2]).unwrap();
        let make = |bias: f64| {
            DbnModel::new(
                arch.clone(),
                vec![RbmParams::zeros(3, 2)],
                Vector::zeros(2),
                bias,
                Normalization::identity(3),
                toy_provenance(),
            )
            .unwrap()
        };
        let constant = make(0.4);
        assert_eq!(constant.predict(&[0.1, 0.5, 0.9]).unwrap(), 0.4);
        assert_eq!(constant.predict(&[0.9, 0.0, 0.3]).unwrap(), 0.4);
        // A head forced to emit 1.7 clamps to 1.0.
        let hot = make(1.7);
        assert_eq!(hot.predict(&[0.5, 0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn predict_matches_forward_on_training_scale() {
        // Build a model whose normalization was fitted on a raw range, then
        // check predict(raw) equals the denormalized forward(normalized).
        let mut rng = Rng::with_seed(47);
        let raw = Matrix::from_vec(4, 2, vec![2.0, 10.0, 4.0, 20.0, 6.0, 30.0, 8.0, 40.0]).unwrap();
        let targets = Vector::from_vec(vec![0.1, 0.3, 0.5, 0.7]).unwrap();
        let base = chrono::NaiveDateTime::parse_from_str("2010-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S")
            .unwrap();
        let timestamps = (0..4i64).map(|i| base + chrono::Duration::hours(i)).collect();
        let set = SampleSet::new(raw, targets, timestamps).unwrap();
        let normalized = set.normalize(0..4).unwrap();
        let norm = normalized.normalization().unwrap().clone();

        let arch = DbnArchitecture::new(2, vec![3]).unwrap();
        let model =
            DbnModel::random_init(arch, norm.clone(), toy_provenance(), &mut rng).unwrap();

        let row = 2;
        let scaled = Vector::from_vec(normalized.feature_row(row).to_vec()).unwrap();
        let (y, _) = model.forward(&scaled).unwrap();
        let expect = norm.denormalize_target(y).clamp(0.0, 1.0);
        let got = model.predict(set.feature_row(row)).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn train_dbn_is_reproducible() {
        let mut rng = Rng::with_seed(53);
        let features = uniform_matrix(60, 6, &mut rng);
        let targets: Vec<f64> = (0..60)
            .map(|r| features.row(r).iter().sum::<f64>() / 6.0)
            .collect();
        let base = chrono::NaiveDateTime::parse_from_str("2010-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S")
            .unwrap();
        let timestamps: Vec<chrono::NaiveDateTime> =
            (0..60i64).map(|i| base + chrono::Duration::hours(i)).collect();
        let set = SampleSet::new(features, Vector::from_vec(targets).unwrap(), timestamps).unwrap();

        let arch = DbnArchitecture::new(6, vec![4, 3]).unwrap();
        let cd = CdConfig {
            epochs: 5,
            batch_size: 20,
            ..CdConfig::default()
        };
        let ft = FineTuneConfig {
            epochs: 5,
            batch_size: 20,
            learning_rate: 0.3,
            momentum: 0.05,
        };
        let a = train_dbn(&set, &arch, &cd, &ft, 7).unwrap();
        let b = train_dbn(&set, &arch, &cd, &ft, 7).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.finetune_trace, b.finetune_trace);
        assert_eq!(a.pretrain_traces, b.pretrain_traces);
    }
}
