//! The receiver-side signal classifier: a softmax MLP over raw interleaved
//! I/Q samples, trained once on its nominal channel regime and frozen
//! afterwards. At run time it only classifies batches and emits feedback.

use std::path::Path;

use crate::config::Config;
use crate::dsp::IqBuffer;
use crate::error::{Error, Result};
use crate::nn::{adam_step, checkpoint, Activation, AdamState, Gradients, Mlp};
use crate::rng::{derive_seed, gauss, stream};

/// A trained classifier plus the metadata needed to use it.
#[derive(Debug, Clone)]
pub struct ClassifierBundle {
    net: Mlp,
    class_names: Vec<String>,
    input_len: usize,
    train_scenario: String,
}

/// What the receiver reports back for one batch of W waveforms.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    /// Winning label across per-waveform argmax votes; ties resolve to the
    /// lowest class index.
    pub majority_label: usize,
    /// Arithmetic mean of the per-waveform softmax vectors.
    pub mean_softmax: Vec<f64>,
    pub batch_size: usize,
}

/// Training knobs for [`train_classifier`].
#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub hidden: Vec<usize>,
    pub examples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of examples held out for validation.
    pub val_fraction: f64,
    /// Below this held-out accuracy the data pipeline is considered broken.
    pub min_accuracy: f64,
    /// Start the first hidden layer as per-position amplitude-threshold
    /// detectors instead of a dense random projection. Raw I/Q positions are
    /// exchangeable, so dense projections of them Gaussianize and carry no
    /// constellation-shape signal; sparse detectors restore it. All weights
    /// remain trainable.
    pub threshold_init: bool,
    /// Samples per symbol of the waveforms; aims the pair detectors one
    /// symbol apart.
    pub sps: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            hidden: vec![256, 64],
            examples: 4000,
            epochs: 40,
            batch_size: 32,
            learning_rate: 5e-4,
            val_fraction: 0.15,
            min_accuracy: 0.80,
            threshold_init: true,
            sps: 2,
        }
    }
}

/// Rebuild the first layer as sparse hinge detectors over the interleaved
/// I/Q layout. Three unit kinds, seeded at random positions/thresholds:
/// single-sample amplitude hinges, and difference/sum hinges over same-axis
/// samples one symbol apart (the latter respond strongly to short-lag
/// filtering and inter-symbol smear). A faint dense residual keeps every
/// weight trainable.
fn threshold_detector_init(net: &Mlp, input_dim: usize, sps: usize, seed: u64) -> Result<Mlp> {
    use rand::RngExt;
    let mut rng = stream(seed);
    let first = &net.layers()[0];
    let units = first.out_dim();
    let gain = 2.0;
    let residual = 0.02;
    let pair_stride = 2 * sps.max(1); // same axis, next symbol
    let mut weights = vec![0.0; units * input_dim];
    let mut biases = vec![0.0; units];
    for u in 0..units {
        let sign = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
        let threshold: f64 = rng.random_range(0.1..1.1);
        for i in 0..input_dim {
            weights[u * input_dim + i] = residual * gauss(&mut rng);
        }
        match u % 4 {
            0 | 1 => {
                let position = rng.random_range(0..input_dim);
                weights[u * input_dim + position] += sign * gain;
            }
            2 => {
                let position = rng.random_range(0..input_dim - pair_stride);
                weights[u * input_dim + position] += sign * gain;
                weights[u * input_dim + position + pair_stride] -= sign * gain;
            }
            _ => {
                let position = rng.random_range(0..input_dim - pair_stride);
                weights[u * input_dim + position] += sign * gain * 0.5;
                weights[u * input_dim + position + pair_stride] += sign * gain * 0.5;
            }
        }
        biases[u] = -gain * threshold;
    }
    let mut params: Vec<(Vec<f64>, Vec<f64>)> = net
        .layers()
        .iter()
        .map(|l| (l.weights().to_vec(), l.biases().to_vec()))
        .collect();
    params[0] = (weights, biases);
    Mlp::from_params(&net.dims(), &net.activations(), params)
}

/// Interleave a waveform into the 2L-real feature vector the net consumes.
pub fn featurize(buffer: &IqBuffer) -> Vec<f64> {
    buffer.to_interleaved()
}

/// Generator indices at and above this belong to the validation stream.
const VALIDATION_INDEX_BASE: u64 = 1 << 48;

/// Train a softmax classifier on labelled waveforms produced by `generate`.
///
/// Training streams fresh examples: epoch e consumes generator indices
/// `e*examples .. (e+1)*examples`, so the data is never revisited and the net
/// cannot memorize its way to a good score. Validation draws
/// `examples * val_fraction` extra examples from indices starting at
/// [`VALIDATION_INDEX_BASE`]. Fully deterministic given the seed. Fails with
/// [`Error::TrainingFailure`] if held-out accuracy ends up below
/// `spec.min_accuracy`.
pub fn train_classifier(
    generate: &mut dyn FnMut(u64) -> Result<(IqBuffer, usize)>,
    class_names: &[String],
    input_len: usize,
    train_scenario: &str,
    spec: &TrainSpec,
    seed: u64,
) -> Result<ClassifierBundle> {
    let num_classes = class_names.len();
    if num_classes < 2 {
        return Err(Error::invalid("a classifier needs at least two classes"));
    }
    if spec.examples < 10 * num_classes {
        return Err(Error::invalid("too few examples per epoch to learn from"));
    }

    let mut fetch = |index: u64| -> Result<(Vec<f64>, usize)> {
        let (buffer, label) = generate(index)?;
        if buffer.len() != input_len {
            return Err(Error::invalid(format!(
                "generator produced a waveform of length {}, expected {input_len}",
                buffer.len()
            )));
        }
        if label >= num_classes {
            return Err(Error::invalid(format!("label {label} out of range")));
        }
        Ok((featurize(&buffer), label))
    };

    let mut dims = vec![2 * input_len];
    dims.extend_from_slice(&spec.hidden);
    dims.push(num_classes);
    let mut activations = vec![Activation::Relu; spec.hidden.len()];
    activations.push(Activation::Softmax);
    let mut net = Mlp::new(&dims, &activations, derive_seed(seed, "classifier-init", 0))?;
    if spec.threshold_init && !spec.hidden.is_empty() {
        net = threshold_detector_init(
            &net,
            2 * input_len,
            spec.sps,
            derive_seed(seed, "classifier-thresholds", 0),
        )?;
    }

    let mut adam = AdamState::new(&net, spec.learning_rate);
    let mut next_index = 0u64;
    for _epoch in 0..spec.epochs {
        let mut remaining = spec.examples;
        while remaining > 0 {
            let take = remaining.min(spec.batch_size);
            let mut grads = Gradients::zeros_like(&net);
            for _ in 0..take {
                let (features, label) = fetch(next_index)?;
                next_index += 1;
                let cache = net.forward(&features)?;
                let probs = cache.output();
                // Cross-entropy on the softmax head: upstream gradient is
                // -(1/p_label) on the true class, zero elsewhere.
                let mut out_grad = vec![0.0; num_classes];
                out_grad[label] = -1.0 / probs[label].max(1e-12);
                let (g, _) = net.backward(&cache, &out_grad)?;
                grads.add_assign(&g);
            }
            grads.scale(1.0 / take as f64);
            adam_step(&mut net, &grads, &mut adam)?;
            remaining -= take;
        }
    }

    let bundle = ClassifierBundle {
        net,
        class_names: class_names.to_vec(),
        input_len,
        train_scenario: train_scenario.to_string(),
    };
    let val_len = ((spec.examples as f64 * spec.val_fraction) as usize).max(10 * num_classes);
    let accuracy = {
        let mut correct = 0usize;
        for i in 0..val_len {
            let (features, label) = fetch(VALIDATION_INDEX_BASE + i as u64)?;
            if bundle.classify_features(&features)?.0 == label {
                correct += 1;
            }
        }
        correct as f64 / val_len as f64
    };
    if accuracy < spec.min_accuracy {
        return Err(Error::TrainingFailure(format!(
            "held-out accuracy {accuracy:.3} below the {:.2} gate",
            spec.min_accuracy
        )));
    }
    Ok(bundle)
}

impl ClassifierBundle {
    pub fn from_parts(
        net: Mlp,
        class_names: Vec<String>,
        input_len: usize,
        train_scenario: String,
    ) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        if net.input_dim() != 2 * input_len {
            return Err(Error::invalid(format!(
                "network input {} does not match 2 x input_len {}",
                net.input_dim(),
                2 * input_len
            )));
        }
        if net.output_dim() != class_names.len() {
            return Err(Error::invalid("network output does not match class count"));
        }
        Ok(ClassifierBundle { net, class_names, input_len, train_scenario })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn train_scenario(&self) -> &str {
        &self.train_scenario
    }

    /// Checksum over the frozen parameters; must never change once trained.
    pub fn checksum(&self) -> u64 {
        self.net.checksum()
    }

    fn classify_features(&self, features: &[f64]) -> Result<(usize, Vec<f64>)> {
        let probs = self.net.infer(features)?;
        let mut best = 0usize;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        Ok((best, probs))
    }

    /// Classify one waveform: (argmax label, softmax vector).
    pub fn classify_one(&self, waveform: &IqBuffer) -> Result<(usize, Vec<f64>)> {
        if waveform.len() != self.input_len {
            return Err(Error::invalid(format!(
                "waveform length {} does not match classifier input {}",
                waveform.len(),
                self.input_len
            )));
        }
        self.classify_features(&featurize(waveform))
    }

    /// Vote over a batch and average the softmax vectors.
    pub fn classify_batch(&self, batch: &[IqBuffer]) -> Result<Feedback> {
        if batch.is_empty() {
            return Err(Error::invalid("batch must contain at least one waveform"));
        }
        let mut votes = vec![0usize; self.num_classes()];
        let mut mean_softmax = vec![0.0; self.num_classes()];
        for waveform in batch {
            let (label, probs) = self.classify_one(waveform)?;
            votes[label] += 1;
            for (acc, p) in mean_softmax.iter_mut().zip(&probs) {
                *acc += p;
            }
        }
        for p in &mut mean_softmax {
            *p /= batch.len() as f64;
        }
        let mut majority_label = 0usize;
        for (i, v) in votes.iter().enumerate() {
            if *v > votes[majority_label] {
                majority_label = i;
            }
        }
        Ok(Feedback { majority_label, mean_softmax, batch_size: batch.len() })
    }

    /// Write the CHNN checkpoint plus its metadata sidecar
    /// (`<base>.chnn`, `<base>.meta`).
    pub fn save(&self, base: &Path) -> Result<()> {
        checkpoint::write(&base.with_extension("chnn"), &self.net)?;
        let mut meta = Config::new();
        meta.set("classifier", "classes", self.class_names.join(","));
        meta.set("classifier", "input_len", self.input_len);
        meta.set("classifier", "scenario", &self.train_scenario);
        std::fs::write(base.with_extension("meta"), meta.to_text())?;
        Ok(())
    }

    pub fn load(base: &Path) -> Result<Self> {
        let net = checkpoint::read(&base.with_extension("chnn"))?;
        let meta = Config::from_path(&base.with_extension("meta"))
            .map_err(|e| Error::MissingDependency(format!("classifier sidecar: {e}")))?;
        let class_names: Vec<String> = meta.list_or("classifier", "classes", "");
        let input_len = meta.usize_or("classifier", "input_len", 0)?;
        let scenario = meta.str_or("classifier", "scenario", "unknown");
        ClassifierBundle::from_parts(net, class_names, input_len, scenario)
    }
}
