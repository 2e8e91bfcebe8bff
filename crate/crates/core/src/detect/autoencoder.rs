use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rms_threshold, AnomalyScoreSet, DetectError};
use crate::features::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    /// Hidden width as a fraction of the input width, rounded up.
    pub compression_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig { compression_rate: 0.5, epochs: 5, minibatch: 1024, learning_rate: 0.01, seed: 0 }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.compression_rate > 0.0 && self.compression_rate <= 1.0) {
            return Err(DetectError::InvalidConfig(format!(
                "compression rate must be in (0, 1], got {}",
                self.compression_rate
            )));
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return Err(DetectError::InvalidConfig("epochs and minibatch must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DetectError::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

pub fn hidden_width(input: usize, rate: f64) -> usize {
    ((input as f64 * rate - 1e-9).ceil() as usize).max(1)
}

/// Description of a trained model, stored with its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub hidden_activation: String,
    pub output_activation: String,
    pub loss: String,
    pub optimizer: String,
    pub initialization: String,
    pub input_scale: f64,
    pub epoch_losses: Vec<f64>,
    pub config: AutoencoderConfig,
}

/// Parameter gradients, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

/// One hidden ReLU layer and a linear output layer trained to reproduce
/// the input under mean squared error with plain minibatch SGD.
///
/// Inputs are divided by a single corpus-wide scale (the root mean square
/// of the vector norms) before entering the network and outputs are
/// multiplied back, so scores are distances in the original space.
#[derive(Debug, Clone)]
pub struct Autoencoder {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub input_scale: f64,
    pub epoch_losses: Vec<f64>,
    pub config: AutoencoderConfig,
}

fn dimension_of(vectors: &[FeatureVector]) -> Result<usize, DetectError> {
    let Some(first) = vectors.first() else {
        return Err(DetectError::TooFewPoints { needed: 1, got: 0 });
    };
    let dim = first.dimension();
    if dim == 0 {
        return Err(DetectError::InvalidConfig("input dimension is zero".into()));
    }
    match vectors.iter().find(|v| v.dimension() != dim) {
        Some(v) => Err(DetectError::DimensionMismatch { expected: dim, found: v.dimension() }),
        None => Ok(dim),
    }
}

/// Dense D x B matrix of the selected vectors, divided by `scale`.
fn densify(vectors: &[FeatureVector], rows: &[usize], dim: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, rows.len());
    for (col, &r) in rows.iter().enumerate() {
        match &vectors[r] {
            FeatureVector::Dense(v) => {
                for (i, x) in v.iter().enumerate() {
                    m[(i, col)] = x / scale;
                }
            }
            FeatureVector::Sparse(s) => {
                for &(i, x) in &s.pairs {
                    m[(i, col)] = x / scale;
                }
            }
        }
    }
    m
}

fn squared_norm(v: &FeatureVector) -> f64 {
    match v {
        FeatureVector::Dense(d) => d.iter().map(|x| x * x).sum(),
        FeatureVector::Sparse(s) => s.pairs.iter().map(|(_, x)| x * x).sum(),
    }
}

impl Autoencoder {
    /// Xavier-uniform weights and zero biases drawn from `rng`.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>) {
        let bound = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let w1 = DMatrix::from_fn(hidden_dim, input_dim, |_, _| rng.gen_range(-bound..bound));
        let w2 = DMatrix::from_fn(input_dim, hidden_dim, |_, _| rng.gen_range(-bound..bound));
        (w1, DVector::zeros(hidden_dim), w2, DVector::zeros(input_dim))
    }

    pub fn train(vectors: &[FeatureVector], config: &AutoencoderConfig) -> Result<Autoencoder, DetectError> {
        config.validate()?;
        let dim = dimension_of(vectors)?;
        let hidden = hidden_width(dim, config.compression_rate);
        let mean_sq = vectors.iter().map(squared_norm).sum::<f64>() / vectors.len() as f64;
        let input_scale = if mean_sq > 0.0 { mean_sq.sqrt() } else { 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (w1, b1, w2, b2) = Autoencoder::init(dim, hidden, &mut rng);
        let mut model = Autoencoder { w1, b1, w2, b2, input_scale, epoch_losses: Vec::new(), config: config.clone() };

        let mut order: Vec<usize> = (0..vectors.len()).collect();
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            for (batch, rows) in order.chunks(config.minibatch).enumerate() {
                let x = densify(vectors, rows, dim, input_scale);
                let (loss, grads) = model.loss_and_gradients(&x);
                if !loss.is_finite() {
                    return Err(DetectError::NonFiniteLoss { epoch: epoch + 1, batch: batch + 1, loss });
                }
                model.step(&grads, config.learning_rate);
            }
            let loss = model.corpus_loss(vectors, dim);
            log::debug!("autoencoder rate {} epoch {}: loss {loss}", config.compression_rate, epoch + 1);
            if !loss.is_finite() {
                return Err(DetectError::NonFiniteLoss { epoch: epoch + 1, batch: 0, loss });
            }
            model.epoch_losses.push(loss);
        }
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    fn hidden(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.w1 * x;
        for mut col in z.column_iter_mut() {
            col += &self.b1;
        }
        z
    }

    fn output(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = &self.w2 * h;
        for mut col in y.column_iter_mut() {
            col += &self.b2;
        }
        y
    }

    /// Network output for scaled inputs (columns).
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let h = self.hidden(x).map(|v| v.max(0.0));
        self.output(&h)
    }

    /// Mean over the batch of the per-sample mean squared error, on scaled
    /// inputs.
    pub fn batch_loss(&self, x: &DMatrix<f64>) -> f64 {
        let y = self.forward(x);
        (y - x).norm_squared() / (x.nrows() * x.ncols()) as f64
    }

    /// Batch loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: &DMatrix<f64>) -> (f64, Gradients) {
        let z = self.hidden(x);
        let h = z.map(|v| v.max(0.0));
        let y = self.output(&h);
        let diff = y - x;
        let count = (x.nrows() * x.ncols()) as f64;
        let loss = diff.norm_squared() / count;
        let dy = diff * (2.0 / count);
        let w2 = &dy * h.transpose();
        let b2 = DVector::from_iterator(dy.nrows(), dy.row_iter().map(|r| r.sum()));
        let mut dz = self.w2.transpose() * &dy;
        dz.zip_apply(&z, |g, pre| {
            if pre <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = &dz * x.transpose();
        let b1 = DVector::from_iterator(dz.nrows(), dz.row_iter().map(|r| r.sum()));
        (loss, Gradients { w1, b1, w2, b2 })
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        self.w1 -= &g.w1 * lr;
        self.b1 -= &g.b1 * lr;
        self.w2 -= &g.w2 * lr;
        self.b2 -= &g.b2 * lr;
    }

    fn corpus_loss(&self, vectors: &[FeatureVector], dim: usize) -> f64 {
        let rows: Vec<usize> = (0..vectors.len()).collect();
        let mut total = 0.0;
        for chunk in rows.chunks(self.config.minibatch) {
            let x = densify(vectors, chunk, dim, self.input_scale);
            total += (self.forward(&x) - &x).norm_squared();
        }
        total / (vectors.len() * dim) as f64
    }

    /// Reconstruction of one vector in the original space.
    pub fn reconstruct(&self, vector: &FeatureVector) -> Result<Vec<f64>, DetectError> {
        self.check_dim(vector)?;
        let x = densify(std::slice::from_ref(vector), &[0], self.input_dim(), self.input_scale);
        Ok(self.forward(&x).iter().map(|v| v * self.input_scale).collect())
    }

    /// Euclidean distance between a vector and its reconstruction.
    pub fn score(&self, vector: &FeatureVector) -> Result<f64, DetectError> {
        Ok(self.score_all(std::slice::from_ref(vector))?[0])
    }

    pub fn score_all(&self, vectors: &[FeatureVector]) -> Result<Vec<f64>, DetectError> {
        for v in vectors {
            self.check_dim(v)?;
        }
        let rows: Vec<usize> = (0..vectors.len()).collect();
        let mut scores = Vec::with_capacity(vectors.len());
        for chunk in rows.chunks(self.config.minibatch) {
            let x = densify(vectors, chunk, self.input_dim(), self.input_scale);
            let diff = self.forward(&x) - &x;
            scores.extend(diff.column_iter().map(|c| c.norm() * self.input_scale));
        }
        Ok(scores)
    }

    fn check_dim(&self, vector: &FeatureVector) -> Result<(), DetectError> {
        if vector.dimension() == self.input_dim() {
            Ok(())
        } else {
            Err(DetectError::DimensionMismatch { expected: self.input_dim(), found: vector.dimension() })
        }
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            input_dim: self.input_dim(),
            hidden_dim: self.hidden_dim(),
            hidden_activation: "relu".into(),
            output_activation: "linear".into(),
            loss: "mean squared error".into(),
            optimizer: format!("minibatch sgd, learning rate {}", self.config.learning_rate),
            initialization: "xavier uniform weights, zero biases".into(),
            input_scale: self.input_scale,
            epoch_losses: self.epoch_losses.clone(),
            config: self.config.clone(),
        }
    }
}

/// Trains one model and flags scores above `multiplier` times the RMS of
/// all scores.
pub fn autoencoder_scores(
    vectors: &[FeatureVector],
    unit_ids: &[String],
    config: &AutoencoderConfig,
    multiplier: f64,
) -> Result<(AnomalyScoreSet, ModelSummary), DetectError> {
    super::check_ids(vectors.len(), unit_ids)?;
    let model = Autoencoder::train(vectors, config)?;
    let scores = model.score_all(vectors)?;
    let (threshold, flagged) = rms_threshold(&scores, multiplier);
    let mut flagged: Vec<usize> = flagged;
    flagged.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| unit_ids[a].cmp(&unit_ids[b])));
    let set = AnomalyScoreSet {
        detector: format!("autoencoder-{}", config.compression_rate),
        unit_ids: unit_ids.to_vec(),
        scores,
        normality: None,
        threshold,
        flagged: flagged.into_iter().map(|i| unit_ids[i].clone()).collect(),
    };
    Ok((set, model.summary()))
}
