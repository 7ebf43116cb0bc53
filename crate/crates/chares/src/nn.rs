//! Dense feed-forward networks with analytic reverse-mode gradients and Adam.
//! Backs the classifier, the actor, and the critics.
//!
//! Everything is f64 and single-threaded by design: two runs from the same
//! seed produce bit-identical parameters.

use rand::RngExt;

use crate::error::{Error, Result};
use crate::rng::stream;

pub mod checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Softmax,
    Linear,
}

impl Activation {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Softmax => 2,
            Activation::Linear => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::Softmax),
            3 => Ok(Activation::Linear),
            other => Err(Error::Format(format!("unknown activation tag {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Row-major out_dim x in_dim.
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
    in_dim: usize,
    out_dim: usize,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    /// Bumped on every parameter mutation; forward caches remember the
    /// version they were computed against.
    version: u64,
}

/// Cached activations of one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    /// Post-activation output of every layer.
    activations: Vec<Vec<f64>>,
    net_version: u64,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("networks have at least one layer")
    }
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            d_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            d_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.d_weights.iter_mut().chain(self.d_biases.iter_mut()) {
            for g in layer {
                *g *= factor;
            }
        }
    }
}

impl Mlp {
    /// Build a network from `dims = [input, hidden..., output]` with one
    /// activation per layer. ReLU layers get He-uniform initialization,
    /// everything else Xavier-uniform; biases start at zero.
    pub fn new(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("network needs an input and an output dimension"));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::invalid(format!(
                "expected {} activations for {} layers, got {}",
                dims.len() - 1,
                dims.len() - 1,
                activations.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        for (i, act) in activations.iter().enumerate() {
            if *act == Activation::Softmax && i != activations.len() - 1 {
                return Err(Error::invalid("softmax is only allowed as the final activation"));
            }
        }

        let mut rng = stream(seed);
        let layers = (0..dims.len() - 1)
            .map(|i| {
                let (fan_in, fan_out) = (dims[i], dims[i + 1]);
                let limit = match activations[i] {
                    Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                    _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                };
                let weights =
                    (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
                Layer {
                    weights,
                    biases: vec![0.0; fan_out],
                    activation: activations[i],
                    in_dim: fan_in,
                    out_dim: fan_out,
                }
            })
            .collect();
        Ok(Mlp { layers, version: 0 })
    }

    /// Build a network with every parameter set explicitly (tests, handmade
    /// critics). `params` holds per-layer (weights, biases).
    pub fn from_params(
        dims: &[usize],
        activations: &[Activation],
        params: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut net = Mlp::new(dims, activations, 0)?;
        if params.len() != net.layers.len() {
            return Err(Error::invalid("parameter blocks do not match layer count"));
        }
        for (layer, (w, b)) in net.layers.iter_mut().zip(params) {
            if w.len() != layer.weights.len() || b.len() != layer.biases.len() {
                return Err(Error::invalid("parameter block shape mismatch"));
            }
            layer.weights = w;
            layer.biases = b;
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// FNV-1a over the exact parameter bits; changes iff a parameter changes.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for layer in &self.layers {
            layer.weights.iter().copied().for_each(&mut eat);
            layer.biases.iter().copied().for_each(&mut eat);
        }
        h
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} components, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut current = input;
        for layer in &self.layers {
            let mut out = vec![0.0; layer.out_dim];
            for r in 0..layer.out_dim {
                let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                let mut acc = layer.biases[r];
                for (w, x) in row.iter().zip(current) {
                    acc += w * x;
                }
                out[r] = acc;
            }
            apply_activation(layer.activation, &mut out);
            activations.push(out);
            current = activations.last().expect("just pushed");
        }
        Ok(ForwardCache { input: input.to_vec(), activations, net_version: self.version })
    }

    /// Output vector without keeping the cache.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward(input)?;
        Ok(cache.activations.pop().expect("networks have at least one layer"))
    }

    /// Exact reverse-mode gradients of a scalar loss given its gradient with
    /// respect to the network output. Also returns the gradient with respect
    /// to the input, so a critic's action-gradient can be chained through an
    /// actor.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_gradient: &[f64],
    ) -> Result<(Gradients, Vec<f64>)> {
        if cache.net_version != self.version {
            return Err(Error::ContractViolation(
                "forward cache is stale: parameters changed since it was computed".into(),
            ));
        }
        if cache.activations.len() != self.layers.len()
            || cache.input.len() != self.input_dim()
        {
            return Err(Error::ContractViolation("forward cache shape mismatch".into()));
        }
        if output_gradient.len() != self.output_dim() {
            return Err(Error::invalid("output gradient dimension mismatch"));
        }

        let mut grads = Gradients::zeros_like(self);
        let mut upstream = output_gradient.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let post = &cache.activations[idx];
            // Gradient with respect to the pre-activation.
            let gz: Vec<f64> = match layer.activation {
                Activation::Linear => upstream.clone(),
                Activation::Relu => upstream
                    .iter()
                    .zip(post)
                    .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                    .collect(),
                Activation::Tanh => {
                    upstream.iter().zip(post).map(|(g, a)| g * (1.0 - a * a)).collect()
                }
                Activation::Softmax => {
                    let dot: f64 = upstream.iter().zip(post).map(|(g, a)| g * a).sum();
                    upstream.iter().zip(post).map(|(g, a)| a * (g - dot)).collect()
                }
            };
            let prev: &[f64] =
                if idx == 0 { &cache.input } else { &cache.activations[idx - 1] };
            let dw = &mut grads.d_weights[idx];
            for r in 0..layer.out_dim {
                let g = gz[r];
                let row = &mut dw[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (slot, x) in row.iter_mut().zip(prev) {
                    *slot += g * x;
                }
            }
            grads.d_biases[idx].copy_from_slice(&gz);

            let mut down = vec![0.0; layer.in_dim];
            for r in 0..layer.out_dim {
                let g = gz[r];
                let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (slot, w) in down.iter_mut().zip(row) {
                    *slot += g * w;
                }
            }
            upstream = down;
        }
        Ok((grads, upstream))
    }

    /// In-place blend toward `source`: every parameter becomes
    /// `omega * source + (1 - omega) * self`.
    pub fn blend_from(&mut self, source: &Mlp, omega: f64) -> Result<()> {
        if self.dims() != source.dims() {
            return Err(Error::ContractViolation("blend between differently shaped networks".into()));
        }
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            for (d, s) in dst.weights.iter_mut().zip(&src.weights) {
                *d = omega * s + (1.0 - omega) * *d;
            }
            for (d, s) in dst.biases.iter_mut().zip(&src.biases) {
                *d = omega * s + (1.0 - omega) * *d;
            }
        }
        self.version += 1;
        Ok(())
    }

    fn assert_finite(&self) -> Result<()> {
        for layer in &self.layers {
            if layer.weights.iter().chain(&layer.biases).any(|p| !p.is_finite()) {
                return Err(Error::ContractViolation("non-finite parameter after update".into()));
            }
        }
        Ok(())
    }
}

fn apply_activation(activation: Activation, values: &mut [f64]) {
    match activation {
        Activation::Linear => {}
        Activation::Relu => {
            for v in values.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Activation::Tanh => {
            for v in values.iter_mut() {
                *v = v.tanh();
            }
        }
        Activation::Softmax => {
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in values.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in values.iter_mut() {
                *v /= sum;
            }
        }
    }
}

/// Adam optimizer state: one pair of moment accumulators per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        AdamState {
            m_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction. Gradients are for minimization.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    let shapes_ok = net.layers.len() == grads.d_weights.len()
        && net.layers.len() == state.m_weights.len()
        && net
            .layers
            .iter()
            .zip(&grads.d_weights)
            .zip(&state.m_weights)
            .all(|((l, g), m)| l.weights.len() == g.len() && l.weights.len() == m.len());
    if !shapes_ok {
        return Err(Error::ContractViolation(
            "gradient/optimizer shapes do not match the network".into(),
        ));
    }

    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);

    for (idx, layer) in net.layers.iter_mut().enumerate() {
        update_block(
            &mut layer.weights,
            &grads.d_weights[idx],
            &mut state.m_weights[idx],
            &mut state.v_weights[idx],
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
        update_block(
            &mut layer.biases,
            &grads.d_biases[idx],
            &mut state.m_biases[idx],
            &mut state.v_biases[idx],
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
    }
    net.version += 1;
    net.assert_finite()
}

#[allow(clippy::too_many_arguments)]
fn update_block(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::gauss;
    use rand::Rng;

    fn random_input(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| gauss(rng)).collect()
    }

    #[test]
    fn zero_linear_layer_outputs_zero() {
        let net = Mlp::from_params(
            &[3, 2],
            &[Activation::Linear],
            vec![(vec![0.0; 6], vec![0.0; 2])],
        )
        .unwrap();
        assert_eq!(net.infer(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_relu_clips_negatives() {
        let net = Mlp::from_params(
            &[2, 2],
            &[Activation::Relu],
            vec![(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0])],
        )
        .unwrap();
        assert_eq!(net.infer(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn softmax_head_is_a_probability_vector() {
        let net = Mlp::new(&[4, 8, 5], &[Activation::Relu, Activation::Softmax], 3).unwrap();
        let mut rng = stream(4);
        for _ in 0..20 {
            let out = net.infer(&random_input(&mut rng, 4)).unwrap();
            assert!(out.iter().all(|&p| p > 0.0));
            assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = Mlp::new(&[4, 2], &[Activation::Linear], 0).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn softmax_must_be_final() {
        assert!(Mlp::new(&[4, 4, 2], &[Activation::Softmax, Activation::Linear], 0).is_err());
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let net = Mlp::from_params(
            &[3, 2],
            &[Activation::Linear],
            vec![(vec![0.5, -1.0, 2.0, 0.0, 1.0, -0.5], vec![0.1, -0.2])],
        )
        .unwrap();
        let x = [1.0, -2.0, 0.5];
        let g = [2.0, -3.0];
        let cache = net.forward(&x).unwrap();
        let (grads, input_grad) = net.backward(&cache, &g).unwrap();
        // dW[r][c] = g[r] * x[c], row-major.
        let expected = [2.0, -4.0, 1.0, -3.0, 6.0, -1.5];
        for (got, want) in grads.d_weights[0].iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(grads.d_biases[0], vec![2.0, -3.0]);
        // input grad = W^T g.
        let expected_input = [0.5 * 2.0 + 0.0 * -3.0, -1.0 * 2.0 + 1.0 * -3.0, 2.0 * 2.0 + -0.5 * -3.0];
        for (got, want) in input_grad.iter().zip(expected_input) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn relu_at_exact_zero_uses_subgradient_zero() {
        // Pre-activation is exactly 0 for the first unit.
        let net = Mlp::from_params(
            &[1, 2],
            &[Activation::Relu],
            vec![(vec![0.0, 1.0], vec![0.0, 0.0])],
        )
        .unwrap();
        let cache = net.forward(&[3.0]).unwrap();
        assert_eq!(cache.output(), &[0.0, 3.0]);
        let (grads, input_grad) = net.backward(&cache, &[5.0, 5.0]).unwrap();
        assert_eq!(grads.d_weights[0][0], 0.0);
        assert_eq!(grads.d_biases[0][0], 0.0);
        assert_eq!(input_grad[0], 5.0);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = Mlp::new(&[2, 2], &[Activation::Tanh], 1).unwrap();
        let cache = net.forward(&[0.3, -0.4]).unwrap();
        let grads = {
            let (g, _) = net.backward(&cache, &[1.0, 1.0]).unwrap();
            g
        };
        let mut adam = AdamState::new(&net, 1e-3);
        adam_step(&mut net, &grads, &mut adam).unwrap();
        assert!(matches!(
            net.backward(&cache, &[1.0, 1.0]),
            Err(Error::ContractViolation(_))
        ));
    }

    /// Central finite differences against analytic gradients.
    fn gradient_check(net: &Mlp, input: &[f64], direction: &[f64]) -> f64 {
        let cache = net.forward(input).unwrap();
        let (grads, _) = net.backward(&cache, direction).unwrap();
        let loss = |net: &Mlp| -> f64 {
            net.infer(input).unwrap().iter().zip(direction).map(|(o, c)| o * c).sum()
        };

        let delta = 1e-5;
        let mut worst: f64 = 0.0;
        for layer_idx in 0..net.layers().len() {
            let n_w = net.layers()[layer_idx].weights.len();
            let n_b = net.layers()[layer_idx].biases.len();
            for param_idx in 0..n_w + n_b {
                let mut plus = net.clone();
                let mut minus = net.clone();
                {
                    let l = &mut plus.layers[layer_idx];
                    let p = if param_idx < n_w {
                        &mut l.weights[param_idx]
                    } else {
                        &mut l.biases[param_idx - n_w]
                    };
                    *p += delta;
                }
                {
                    let l = &mut minus.layers[layer_idx];
                    let p = if param_idx < n_w {
                        &mut l.weights[param_idx]
                    } else {
                        &mut l.biases[param_idx - n_w]
                    };
                    *p -= delta;
                }
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * delta);
                let bp = if param_idx < n_w {
                    grads.d_weights[layer_idx][param_idx]
                } else {
                    grads.d_biases[layer_idx][param_idx - n_w]
                };
                let denom = bp.abs().max(fd.abs()).max(1e-4);
                worst = worst.max((bp - fd).abs() / denom);
            }
        }
        worst
    }

    #[test]
    fn three_layer_gradients_match_finite_differences() {
        let net = Mlp::new(
            &[5, 8, 8, 3],
            &[Activation::Relu, Activation::Tanh, Activation::Softmax],
            42,
        )
        .unwrap();
        let mut rng = stream(43);
        let input = random_input(&mut rng, 5);
        let direction = random_input(&mut rng, 3);
        let err = gradient_check(&net, &input, &direction);
        assert!(err < 1e-4, "worst relative error {err}");
    }

    #[test]
    fn gradient_check_across_random_architectures() {
        let mut rng = stream(77);
        let acts = [Activation::Relu, Activation::Tanh, Activation::Linear];
        for case in 0..20u64 {
            let n_layers = rng.random_range(1..=4);
            let mut dims = vec![rng.random_range(1..=16)];
            let mut activations = Vec::new();
            for i in 0..n_layers {
                dims.push(rng.random_range(1..=16));
                if i == n_layers - 1 && rng.random_range(0..3) == 0 && dims[i + 1] >= 2 {
                    activations.push(Activation::Softmax);
                } else {
                    activations.push(acts[rng.random_range(0..acts.len())]);
                }
            }
            let net = Mlp::new(&dims, &activations, 1000 + case).unwrap();
            let input = random_input(&mut rng, dims[0]);
            let direction = random_input(&mut rng, *dims.last().unwrap());
            let err = gradient_check(&net, &input, &direction);
            assert!(err < 1e-4, "case {case} dims {dims:?}: relative error {err}");
        }
    }

    #[test]
    fn adam_with_zero_gradients_is_a_no_op() {
        let mut net = Mlp::new(&[3, 4, 2], &[Activation::Tanh, Activation::Linear], 5).unwrap();
        let before = net.clone();
        let grads = Gradients::zeros_like(&net);
        let mut state = AdamState::new(&net, 1e-2);
        adam_step(&mut net, &grads, &mut state).unwrap();
        for (a, b) in net.layers().iter().zip(before.layers()) {
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.biases, b.biases);
        }
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // f(w) = w^2 realized as a 1->1 linear net evaluated at input 1.
        let mut net =
            Mlp::from_params(&[1, 1], &[Activation::Linear], vec![(vec![1.0], vec![0.0])])
                .unwrap();
        let mut state = AdamState::new(&net, 0.1);
        let out0 = net.infer(&[1.0]).unwrap()[0];
        let cache = net.forward(&[1.0]).unwrap();
        let (grads, _) = net.backward(&cache, &[2.0 * out0]).unwrap();
        adam_step(&mut net, &grads, &mut state).unwrap();
        let out1 = net.infer(&[1.0]).unwrap()[0];
        assert!(out1.abs() < out0.abs());
    }

    #[test]
    fn adam_converges_on_the_scalar_quadratic() {
        let mut net =
            Mlp::from_params(&[1, 1], &[Activation::Linear], vec![(vec![1.0], vec![0.0])])
                .unwrap();
        let mut state = AdamState::new(&net, 0.01);
        let mut reached_at = None;
        for step in 0..1000 {
            let cache = net.forward(&[1.0]).unwrap();
            let out = cache.output()[0];
            let (grads, _) = net.backward(&cache, &[2.0 * out]).unwrap();
            adam_step(&mut net, &grads, &mut state).unwrap();
            if net.infer(&[1.0]).unwrap()[0].abs() < 1e-3 {
                reached_at = Some(step);
                break;
            }
        }
        assert!(reached_at.is_some(), "did not reach |f| < 1e-3 within 1000 steps");
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let mut net = Mlp::new(&[2, 2], &[Activation::Linear], 0).unwrap();
        let other = Mlp::new(&[3, 3], &[Activation::Linear], 0).unwrap();
        let grads = Gradients::zeros_like(&other);
        let mut state = AdamState::new(&net, 1e-3);
        assert!(matches!(
            adam_step(&mut net, &grads, &mut state),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn blend_mixes_parameters_elementwise() {
        let mut target = Mlp::new(&[2, 3], &[Activation::Tanh], 1).unwrap();
        let main = Mlp::new(&[2, 3], &[Activation::Tanh], 2).unwrap();
        let before = target.clone();
        let omega = 0.05;
        target.blend_from(&main, omega).unwrap();
        for ((t, b), m) in target.layers().iter().zip(before.layers()).zip(main.layers()) {
            for ((tv, bv), mv) in t.weights.iter().zip(&b.weights).zip(&m.weights) {
                assert!((tv - (omega * mv + (1.0 - omega) * bv)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Mlp::new(&[6, 10, 4], &[Activation::Relu, Activation::Linear], 9).unwrap();
        let input = vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
        let a = net.infer(&input).unwrap();
        let b = net.infer(&input).unwrap();
        assert_eq!(a, b);
    }
}
