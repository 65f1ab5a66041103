use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mlp::{batch_gradients, normalize_features, FeatureStats, MlpModel};
use super::{ClassifierError, DiseaseClass};
use crate::features::FeatureVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub h1: usize,
    pub h2: usize,
    pub l2: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { learning_rate: 0.05, epochs: 300, batch_size: 16, seed: 42, h1: 16, h2: 8, l2: 1e-4 }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if self.h1 == 0 || self.h2 == 0 {
            return bad("hidden widths must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        Ok(())
    }
}

/// One training instance: a raw (unstandardized) input row and its class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub x: Vec<T>,
    pub class: DiseaseClass,
}

impl<T: Scalar> Sample<T> {
    pub fn from_features(f: &FeatureVector<T>, class: DiseaseClass) -> Self {
        Sample { x: f.to_array().to_vec(), class }
    }
}

/// Mean training loss per epoch, taken before each minibatch update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory<T> {
    pub epoch_loss: Vec<T>,
}

pub fn train<T: Scalar>(dataset: &[Sample<T>], cfg: &TrainingConfig) -> Result<MlpModel<T>, ClassifierError> {
    train_with_history(dataset, cfg).map(|(m, _)| m)
}

/// Minibatch SGD on cross-entropy with L2 weight decay. Initialization and
/// the per-epoch shuffles come from one ChaCha8 stream seeded by `cfg.seed`.
pub fn train_with_history<T: Scalar>(
    dataset: &[Sample<T>],
    cfg: &TrainingConfig,
) -> Result<(MlpModel<T>, TrainingHistory<T>), ClassifierError> {
    cfg.validate()?;
    let first = dataset.first().ok_or(ClassifierError::EmptyDataset)?;
    let d_in = first.x.len();
    if let Some(bad) = dataset.iter().find(|s| s.x.len() != d_in) {
        return Err(ClassifierError::DimensionMismatch { expected: d_in, got: bad.x.len() });
    }
    if dataset.iter().all(|s| s.class == first.class) {
        return Err(ClassifierError::SingleClassDataset(first.class));
    }

    let rows: Vec<&[T]> = dataset.iter().map(|s| s.x.as_slice()).collect();
    let stats = FeatureStats::fit(&rows);
    let inputs: Vec<Vec<T>> = rows.iter().map(|r| normalize_features(r, &stats)).collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::random(d_in, cfg.h1, cfg.h2, &mut rng);
    model.set_feature_stats(stats);

    let lr = T::of(cfg.learning_rate);
    let l2 = T::of(cfg.l2);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = TrainingHistory { epoch_loss: Vec::with_capacity(cfg.epochs) };

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[T], DiseaseClass)> = chunk.iter().map(|&i| (inputs[i].as_slice(), dataset[i].class)).collect();
            let (grads, loss) = batch_gradients(&model, &batch)?;
            epoch_loss = epoch_loss + loss;
            let scale = lr / T::of_usize(chunk.len());
            for (li, layer) in model.layers_mut().iter_mut().enumerate() {
                for (w, &g) in layer.weights.iter_mut().zip(&grads.weights[li]) {
                    *w = *w - scale * g - lr * l2 * *w;
                }
                for (b, &g) in layer.biases.iter_mut().zip(&grads.biases[li]) {
                    *b = *b - scale * g;
                }
            }
        }
        history.epoch_loss.push(epoch_loss / T::of_usize(dataset.len()));
    }
    Ok((model, history))
}
