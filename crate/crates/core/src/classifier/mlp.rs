use rand::Rng;

use super::{ClassifierError, DiseaseClass, SpotPrediction};
use crate::features::FeatureVector;
use crate::scalar::Scalar;

/// Dense layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer { inputs, outputs, weights: vec![T::zero(); inputs * outputs], biases: vec![T::zero(); outputs] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| T::of(rng.random_range(-limit..limit))).collect();
        Layer { inputs, outputs, weights, biases: vec![T::zero(); outputs] }
    }

    fn apply(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z = row.iter().zip(x).fold(self.biases[o], |acc, (&w, &v)| acc + w * v);
            out.push(z);
        }
    }
}

/// Per-feature standardization frozen at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats<T> {
    pub mean: Vec<T>,
    pub stddev: Vec<T>,
}

impl<T: Scalar> FeatureStats<T> {
    pub fn identity(dim: usize) -> Self {
        FeatureStats { mean: vec![T::zero(); dim], stddev: vec![T::one(); dim] }
    }

    /// Population mean and standard deviation; zero spread becomes 1.
    pub fn fit(rows: &[&[T]]) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let n = T::of_usize(rows.len().max(1));
        let mut mean = vec![T::zero(); dim];
        for r in rows {
            for (m, &v) in mean.iter_mut().zip(r.iter()) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); dim];
        for r in rows {
            for ((s, &v), &m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let stddev = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > T::zero() && sd.is_finite() { sd } else { T::one() }
            })
            .collect();
        FeatureStats { mean, stddev }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `(x - mean) / stddev` per feature.
pub fn normalize_features<T: Scalar>(x: &[T], stats: &FeatureStats<T>) -> Result<Vec<T>, ClassifierError> {
    if x.len() != stats.dim() {
        return Err(ClassifierError::DimensionMismatch { expected: stats.dim(), got: x.len() });
    }
    Ok(x.iter().zip(&stats.mean).zip(&stats.stddev).map(|((&v, &m), &s)| (v - m) / s).collect())
}

/// Sigmoid hidden layers, softmax over the two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    layers: Vec<Layer<T>>,
    stats: FeatureStats<T>,
}

impl<T: Scalar> MlpModel<T> {
    pub fn from_parts(layers: Vec<Layer<T>>, stats: FeatureStats<T>) -> Result<Self, ClassifierError> {
        let invalid = |m: String| Err(ClassifierError::InvalidModel(m));
        if layers.len() != 3 {
            return invalid(format!("expected 3 weight layers (two hidden), got {}", layers.len()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 {
                return invalid(format!("layer {i} has a zero dimension"));
            }
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return invalid(format!("layer {i} buffers do not match {}x{}", l.outputs, l.inputs));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return invalid(format!("layer {i} input {} does not chain from {}", l.inputs, layers[i - 1].outputs));
            }
        }
        if layers[2].outputs != 2 {
            return invalid(format!("output layer must have 2 units, got {}", layers[2].outputs));
        }
        if stats.dim() != layers[0].inputs || stats.stddev.len() != stats.dim() {
            return invalid("feature stats do not match the input width".into());
        }
        if stats.stddev.iter().any(|s| !(*s > T::zero())) {
            return invalid("feature stddev must be positive".into());
        }
        Ok(MlpModel { layers, stats })
    }

    /// Glorot-initialized network with identity feature stats.
    pub fn random<R: Rng>(d_in: usize, h1: usize, h2: usize, rng: &mut R) -> Self {
        let layers = vec![Layer::glorot(d_in, h1, rng), Layer::glorot(h1, h2, rng), Layer::glorot(h2, 2, rng)];
        MlpModel { layers, stats: FeatureStats::identity(d_in) }
    }

    pub fn zeros(d_in: usize, h1: usize, h2: usize) -> Self {
        let layers = vec![Layer::zeros(d_in, h1), Layer::zeros(h1, h2), Layer::zeros(h2, 2)];
        MlpModel { layers, stats: FeatureStats::identity(d_in) }
    }

    /// `[d_in, h1, h2, 2]`.
    pub fn layer_sizes(&self) -> [usize; 4] {
        [self.layers[0].inputs, self.layers[0].outputs, self.layers[1].outputs, self.layers[2].outputs]
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn feature_stats(&self) -> &FeatureStats<T> {
        &self.stats
    }

    pub(crate) fn set_feature_stats(&mut self, stats: FeatureStats<T>) {
        assert_eq!(stats.dim(), self.layers[0].inputs);
        self.stats = stats;
    }

    /// Standardizes a feature vector with the frozen stats and runs the network.
    pub fn predict(&self, features: &FeatureVector<T>) -> Result<SpotPrediction<T>, ClassifierError> {
        let x = normalize_features(&features.to_array(), &self.stats)?;
        forward(self, &x)
    }

    /// Activations per layer: input, two sigmoid layers, output probabilities.
    fn activations(&self, x: &[T]) -> Result<[Vec<T>; 4], ClassifierError> {
        let d_in = self.layers[0].inputs;
        if x.len() != d_in {
            return Err(ClassifierError::DimensionMismatch { expected: d_in, got: x.len() });
        }
        let mut h1 = Vec::new();
        self.layers[0].apply(x, &mut h1);
        h1.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut h2 = Vec::new();
        self.layers[1].apply(&h1, &mut h2);
        h2.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut z = Vec::new();
        self.layers[2].apply(&h2, &mut z);
        Ok([x.to_vec(), h1, h2, softmax(&z)])
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / sum).collect()
}

/// Forward pass on an already standardized input.
pub fn forward<T: Scalar>(m: &MlpModel<T>, x: &[T]) -> Result<SpotPrediction<T>, ClassifierError> {
    let [.., p] = m.activations(x)?;
    Ok(SpotPrediction::from_probabilities([p[0], p[1]]))
}

/// Loss gradients with the same shapes as the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(m: &MlpModel<T>) -> Self {
        Gradients {
            weights: m.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect(),
            biases: m.layers.iter().map(|l| vec![T::zero(); l.biases.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights).chain(self.biases.iter_mut().zip(&other.biases)) {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x = *x + y);
        }
    }

    pub fn norm(&self) -> T {
        self.weights.iter().chain(&self.biases).flatten().map(|&g| g * g).sum::<T>().sqrt()
    }
}

/// Cross-entropy loss of one sample and its analytic gradient.
pub fn backprop_gradients<T: Scalar>(
    m: &MlpModel<T>,
    x: &[T],
    target: DiseaseClass,
) -> Result<(Gradients<T>, T), ClassifierError> {
    let acts = m.activations(x)?;
    let p = &acts[3];
    let loss = -(p[target.index()].max(T::min_positive_value())).ln();

    let mut grads = Gradients::zeros_like(m);
    // softmax + cross-entropy: dL/dz = p - onehot
    let mut delta: Vec<T> = p.clone();
    delta[target.index()] = delta[target.index()] - T::one();

    for li in (0..3).rev() {
        let layer = &m.layers[li];
        let input = &acts[li];
        for o in 0..layer.outputs {
            grads.biases[li][o] = delta[o];
            let row = &mut grads.weights[li][o * layer.inputs..(o + 1) * layer.inputs];
            for (g, &a) in row.iter_mut().zip(input) {
                *g = delta[o] * a;
            }
        }
        if li > 0 {
            let mut prev = vec![T::zero(); layer.inputs];
            for o in 0..layer.outputs {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (acc, &w) in prev.iter_mut().zip(row) {
                    *acc = *acc + w * delta[o];
                }
            }
            for (d, &a) in prev.iter_mut().zip(input) {
                *d = *d * a * (T::one() - a);
            }
            delta = prev;
        }
    }
    Ok((grads, loss))
}

/// Summed gradient and summed loss over a batch.
pub fn batch_gradients<T: Scalar>(
    m: &MlpModel<T>,
    batch: &[(&[T], DiseaseClass)],
) -> Result<(Gradients<T>, T), ClassifierError> {
    let mut total = Gradients::zeros_like(m);
    let mut loss = T::zero();
    for &(x, target) in batch {
        let (g, l) = backprop_gradients(m, x, target)?;
        total.add_assign(&g);
        loss = loss + l;
    }
    Ok((total, loss))
}
