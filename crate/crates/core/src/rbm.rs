//! Restricted Boltzmann machine: energy, exact small-instance inference, and
//! contrastive-divergence training.
//!
//! # Sign convention
//!
//! Parameters are stored so that the energy of a joint binary configuration
//! is E(v, h) = −vᵀWh − bᵀv − cᵀh and the factorized conditionals are
//! `P(h_j = 1 | v) = sigmoid(c_j + W_jᵀ v)` and
//! `P(v_i = 1 | h) = sigmoid(b_i + W_i h)`, where `W_i` is row i and `W_j`
//! column j of the weight matrix. Under this convention the CD weight update
//! `ΔW = α(⟨vhᵀ⟩ − ⟨v'h'ᵀ⟩)` ascends the data likelihood.
//!
//! Some texts write the same model with every sign flipped
//! (E = vᵀWh + bᵀv + cᵀh, conditionals `sigmoid(−·)`). The two
//! parameterizations describe identical distributions and are exchanged by
//! negating all parameters; use [`RbmParams::negated`] to convert.

use crate::error::{Error, Result};
use crate::numerics::{bernoulli_sample, gaussian_init, sigmoid, Matrix, Rng, Vector};

/// Largest `n_visible + n_hidden` accepted by the exact-enumeration
/// operations. They exist as test oracles; beyond this the sums are
/// intractable.
pub const MAX_ENUMERATION_UNITS: usize = 24;

/// Default weight initialization spread: `Normal(0, 0.01²)`, biases zero.
pub const INIT_WEIGHT_STD: f64 = 0.01;

/// One RBM's parameters: weights `W` (`n_visible × n_hidden`), visible bias
/// `b`, hidden bias `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    pub weights: Matrix,
    pub visible_bias: Vector,
    pub hidden_bias: Vector,
}

impl RbmParams {
    /// Zero-initialized parameters.
    pub fn zeros(n_visible: usize, n_hidden: usize) -> RbmParams {
        RbmParams {
            weights: Matrix::zeros(n_visible, n_hidden),
            visible_bias: Vector::zeros(n_visible),
            hidden_bias: Vector::zeros(n_hidden),
        }
    }

    /// Wraps explicit parameters, checking shape consistency.
    pub fn new(weights: Matrix, visible_bias: Vector, hidden_bias: Vector) -> Result<RbmParams> {
        if visible_bias.len() != weights.rows() {
            return Err(Error::LengthMismatch {
                context: "visible bias",
                expected: weights.rows(),
                found: visible_bias.len(),
            });
        }
        if hidden_bias.len() != weights.cols() {
            return Err(Error::LengthMismatch {
                context: "hidden bias",
                expected: weights.cols(),
                found: hidden_bias.len(),
            });
        }
        Ok(RbmParams {
            weights,
            visible_bias,
            hidden_bias,
        })
    }

    /// Random initialization: `W ~ Normal(0, std²)`, biases zero.
    pub fn init(n_visible: usize, n_hidden: usize, weight_std: f64, rng: &mut Rng) -> RbmParams {
        RbmParams {
            weights: gaussian_init(n_visible, n_hidden, weight_std, rng),
            visible_bias: Vector::zeros(n_visible),
            hidden_bias: Vector::zeros(n_hidden),
        }
    }

    pub fn n_visible(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.cols()
    }

    /// Same distribution expressed in the opposite sign convention (all
    /// parameters negated). Involution: `p.negated().negated() == p`.
    pub fn negated(&self) -> RbmParams {
        let mut out = self.clone();
        out.weights.scale(-1.0);
        out.visible_bias.scale(-1.0);
        out.hidden_bias.scale(-1.0);
        out
    }

    /// Energy of a joint configuration: E(v, h) = −vᵀWh − bᵀv − cᵀh.
    ///
    /// To evaluate the flipped-sign form E = vᵀWh + bᵀv + cᵀh, pass the
    /// parameters through [`RbmParams::negated`] first.
    pub fn energy(&self, v: &Vector, h: &Vector) -> Result<f64> {
        if v.len() != self.n_visible() {
            return Err(Error::LengthMismatch {
                context: "energy visible vector",
                expected: self.n_visible(),
                found: v.len(),
            });
        }
        if h.len() != self.n_hidden() {
            return Err(Error::LengthMismatch {
                context: "energy hidden vector",
                expected: self.n_hidden(),
                found: h.len(),
            });
        }
        let coupling = self.weights.mul_vec(h)?.dot(v)?;
        let visible = self.visible_bias.dot(v)?;
        let hidden = self.hidden_bias.dot(h)?;
        Ok(-(coupling + visible + hidden))
    }

    /// Hidden conditional activation probabilities
    /// `P(h_j = 1 | v) = sigmoid(c_j + W_jᵀ v)`.
    ///
    /// Real-valued `v` in `[0, 1]` is accepted and treated as a vector of
    /// Bernoulli expectations.
    pub fn hidden_given_visible(&self, v: &Vector) -> Result<Vector> {
        let mut pre = self.weights.tmul_vec(v)?;
        for (j, x) in pre.as_mut_slice().iter_mut().enumerate() {
            *x = sigmoid(*x + self.hidden_bias.get(j));
        }
        Ok(pre)
    }

    /// Visible conditional activation probabilities
    /// `P(v_i = 1 | h) = sigmoid(b_i + W_i h)`.
    pub fn visible_given_hidden(&self, h: &Vector) -> Result<Vector> {
        let mut pre = self.weights.mul_vec(h)?;
        for (i, x) in pre.as_mut_slice().iter_mut().enumerate() {
            *x = sigmoid(*x + self.visible_bias.get(i));
        }
        Ok(pre)
    }

    /// Normalizing constant Z = Σ_{v,h} e^{−E(v,h)} over all binary
    /// configurations.
    ///
    /// Computed by enumerating visible states and marginalizing the hidden
    /// units analytically: Z = Σ_v e^{bᵀv} Π_j (1 + e^{c_j + W_jᵀv}).
    /// Guarded to small instances; this is an exactness oracle, not a
    /// training path.
    pub fn partition_function(&self) -> Result<f64> {
        self.check_enumerable()?;
        let n_v = self.n_visible();
        let n_h = self.n_hidden();
        let mut z = 0.0;
        for bits in 0u64..(1u64 << n_v) {
            let v = unpack_bits(bits, n_v);
            let mut term = self.visible_bias.dot(&v)?.exp();
            let pre = self.weights.tmul_vec(&v)?;
            for j in 0..n_h {
                term *= 1.0 + (pre.get(j) + self.hidden_bias.get(j)).exp();
            }
            z += term;
        }
        Ok(z)
    }

    /// Joint probability P(v, h) = e^{−E(v,h)} / Z. Small instances only.
    pub fn joint_probability(&self, v: &Vector, h: &Vector) -> Result<f64> {
        let z = self.partition_function()?;
        Ok((-self.energy(v, h)?).exp() / z)
    }

    fn check_enumerable(&self) -> Result<()> {
        let n_visible = self.n_visible();
        let n_hidden = self.n_hidden();
        if n_visible + n_hidden > MAX_ENUMERATION_UNITS {
            return Err(Error::InstanceTooLarge {
                n_visible,
                n_hidden,
                max: MAX_ENUMERATION_UNITS,
            });
        }
        Ok(())
    }

    fn check_finite(&self) -> std::result::Result<(), &'static str> {
        if self.weights.data().iter().any(|x| !x.is_finite()) {
            return Err("weights");
        }
        if self.visible_bias.as_slice().iter().any(|x| !x.is_finite()) {
            return Err("visible bias");
        }
        if self.hidden_bias.as_slice().iter().any(|x| !x.is_finite()) {
            return Err("hidden bias");
        }
        Ok(())
    }
}

/// Binary vector for the low `len` bits of `bits` (bit i → component i).
pub fn unpack_bits(bits: u64, len: usize) -> Vector {
    let mut v = Vector::zeros(len);
    for i in 0..len {
        if bits >> i & 1 == 1 {
            v.set(i, 1.0);
        }
    }
    v
}

/// Contrastive-divergence training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CdConfig {
    /// Step size α applied to the averaged gradient estimate. Zero is
    /// permitted and makes every update a no-op.
    pub learning_rate: f64,
    /// Fraction of the previous velocity carried into the next step.
    pub momentum: f64,
    /// Full passes over the training set.
    pub epochs: usize,
    /// Mini-batch size; a short final batch is used as-is.
    pub batch_size: usize,
    /// Gibbs steps per sample (CD-k).
    pub gibbs_steps: usize,
    /// Use the hidden probabilities instead of a sample for the final
    /// negative-phase statistics. Lowers gradient variance; switch off to
    /// sample every phase.
    pub final_hidden_as_probability: bool,
}

impl Default for CdConfig {
    fn default() -> CdConfig {
        CdConfig {
            learning_rate: 0.87,
            momentum: 0.05,
            epochs: 100,
            batch_size: 100,
            gibbs_steps: 1,
            final_hidden_as_probability: true,
        }
    }
}

impl CdConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "CD learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "CD momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("CD epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("CD batch size must be >= 1".into()));
        }
        if self.gibbs_steps == 0 {
            return Err(Error::InvalidConfig("CD gibbs steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Momentum accumulator for CD updates: `velocity ← momentum·velocity + Δ`,
/// `params ← params + velocity`.
#[derive(Debug, Clone)]
pub struct CdVelocity {
    pub weights: Matrix,
    pub visible_bias: Vector,
    pub hidden_bias: Vector,
}

impl CdVelocity {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> CdVelocity {
        CdVelocity {
            weights: Matrix::zeros(n_visible, n_hidden),
            visible_bias: Vector::zeros(n_visible),
            hidden_bias: Vector::zeros(n_hidden),
        }
    }
}

/// One CD-k mini-batch step.
///
/// Positive statistics come from the data and a sampled hidden vector;
/// negative statistics from the k-step Gibbs reconstruction. The averaged
/// deltas `ΔW = α(⟨vhᵀ⟩ − ⟨v'h'ᵀ⟩)`, `Δb = α⟨v − v'⟩`, `Δc = α⟨h − h'⟩` are
/// combined with the velocity and applied in place.
///
/// Returns the batch mean reconstruction error `⟨‖v − v'‖²⟩ / n_visible`.
pub fn cd_update(
    params: &mut RbmParams,
    batch: &Matrix,
    cfg: &CdConfig,
    rng: &mut Rng,
    velocity: &mut CdVelocity,
) -> Result<f64> {
    cfg.validate()?;
    if batch.rows() == 0 {
        return Err(Error::EmptyInput("cd_update batch"));
    }
    if batch.cols() != params.n_visible() {
        return Err(Error::LengthMismatch {
            context: "cd_update batch width",
            expected: params.n_visible(),
            found: batch.cols(),
        });
    }
    let n_visible = params.n_visible();
    let n_hidden = params.n_hidden();

    let mut grad_w = Matrix::zeros(n_visible, n_hidden);
    let mut grad_b = Vector::zeros(n_visible);
    let mut grad_c = Vector::zeros(n_hidden);
    let mut recon_error = 0.0;

    for row in 0..batch.rows() {
        let v0 = Vector::from_raw(batch.row(row).to_vec());
        check_unit_interval("cd_update visible data", v0.as_slice())?;

        let h0_probs = params.hidden_given_visible(&v0)?;
        let h0 = bernoulli_sample(&h0_probs, rng)?;

        accumulate_outer(&mut grad_w, &v0, &h0, 1.0);
        grad_b.add_scaled(&v0, 1.0);
        grad_c.add_scaled(&h0, 1.0);

        // k alternating Gibbs half-steps starting from the sampled hidden state.
        let mut hidden = h0;
        let mut visible = v0.clone();
        for step in 0..cfg.gibbs_steps {
            let v_probs = params.visible_given_hidden(&hidden)?;
            visible = bernoulli_sample(&v_probs, rng)?;
            let h_probs = params.hidden_given_visible(&visible)?;
            let last = step + 1 == cfg.gibbs_steps;
            hidden = if last && cfg.final_hidden_as_probability {
                h_probs
            } else {
                bernoulli_sample(&h_probs, rng)?
            };
        }

        accumulate_outer(&mut grad_w, &visible, &hidden, -1.0);
        grad_b.add_scaled(&visible, -1.0);
        grad_c.add_scaled(&hidden, -1.0);

        let mut sq = 0.0;
        for i in 0..n_visible {
            let d = v0.get(i) - visible.get(i);
            sq += d * d;
        }
        recon_error += sq / n_visible as f64;
    }

    let step_scale = cfg.learning_rate / batch.rows() as f64;
    velocity.weights.scale(cfg.momentum);
    velocity.weights.add_scaled(&grad_w, step_scale);
    velocity.visible_bias.scale(cfg.momentum);
    velocity.visible_bias.add_scaled(&grad_b, step_scale);
    velocity.hidden_bias.scale(cfg.momentum);
    velocity.hidden_bias.add_scaled(&grad_c, step_scale);

    params.weights.add_scaled(&velocity.weights, 1.0);
    params.visible_bias.add_scaled(&velocity.visible_bias, 1.0);
    params.hidden_bias.add_scaled(&velocity.hidden_bias, 1.0);

    if let Err(what) = params.check_finite() {
        return Err(Error::NonFiniteUpdate { what });
    }
    Ok(recon_error / batch.rows() as f64)
}

/// Trains one RBM with CD-k over shuffled mini-batches.
///
/// Returns the trained parameters and the per-epoch mean reconstruction
/// error trace.
pub fn train_rbm(
    data: &Matrix,
    n_hidden: usize,
    cfg: &CdConfig,
    rng: &mut Rng,
) -> Result<(RbmParams, Vec<f64>)> {
    cfg.validate()?;
    if data.rows() == 0 {
        return Err(Error::EmptyInput("train_rbm data"));
    }
    if n_hidden == 0 {
        return Err(Error::InvalidConfig("train_rbm needs n_hidden >= 1".into()));
    }
    check_unit_interval("train_rbm data", data.data())?;

    let n_samples = data.rows();
    let mut params = RbmParams::init(data.cols(), n_hidden, INIT_WEIGHT_STD, rng);
    let mut velocity = CdVelocity::zeros(data.cols(), n_hidden);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n_samples).collect();

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut weighted_error = 0.0;
        for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = data.gather_rows(chunk)?;
            let err = cd_update(&mut params, &batch, cfg, rng, &mut velocity).map_err(|e| {
                match e {
                    Error::NonFiniteUpdate { what } => Error::Diverged {
                        what,
                        epoch,
                        batch: batch_index,
                    },
                    other => other,
                }
            })?;
            weighted_error += err * chunk.len() as f64;
        }
        trace.push(weighted_error / n_samples as f64);
    }
    Ok((params, trace))
}

fn accumulate_outer(target: &mut Matrix, v: &Vector, h: &Vector, scale: f64) {
    let cols = target.cols();
    let data = target.data_mut();
    for (i, &vi) in v.as_slice().iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        let row = &mut data[i * cols..(i + 1) * cols];
        for (t, &hj) in row.iter_mut().zip(h.as_slice()) {
            *t += scale * vi * hj;
        }
    }
}

fn check_unit_interval(context: &'static str, data: &[f64]) -> Result<()> {
    for (index, &value) in data.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ProbabilityRange { index, value });
        }
    }
    let _ = context;
    Ok(())
}
