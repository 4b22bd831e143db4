//! A minimal multilayer perceptron with hand-rolled backpropagation.
//!
//! One fixed architecture family covers every network in the crate: dense
//! layers, ReLU on hidden layers, linear output. The three loss heads are
//! the ones the trainers and the failure predictor need; gradients are
//! computed analytically and are checked against central finite differences
//! in the tests.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{rng, Error, Result};

/// Activation family: ReLU on hidden layers, linear output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

/// A dense feedforward network.
///
/// `weights[l]` is the row-major `(out x in)` matrix of layer `l`; layer `l`
/// maps activations of width `layer_sizes[l]` to width `layer_sizes[l + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Checkpoint", into = "Checkpoint")]
pub struct Network {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

/// On-disk form: row-major nested arrays, stable key order.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

impl From<Network> for Checkpoint {
    fn from(net: Network) -> Self {
        let weights = net
            .weights
            .iter()
            .enumerate()
            .map(|(l, flat)| {
                let cols = net.layer_sizes[l];
                flat.chunks(cols).map(<[f64]>::to_vec).collect()
            })
            .collect();
        Checkpoint {
            layer_sizes: net.layer_sizes,
            weights,
            biases: net.biases,
            activation: net.activation,
        }
    }
}

impl TryFrom<Checkpoint> for Network {
    type Error = Error;

    fn try_from(ckpt: Checkpoint) -> Result<Self> {
        let rows: Vec<Vec<f64>> = ckpt
            .weights
            .into_iter()
            .map(|m| m.into_iter().flatten().collect())
            .collect();
        Network::from_parts(ckpt.layer_sizes, rows, ckpt.biases)
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::arg(format!(
            "a network needs at least 2 layer sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::arg(format!("zero-width layer in {layer_sizes:?}")));
    }
    Ok(())
}

impl Network {
    /// Deterministic initialisation: weights uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        use rand::Rng;
        validate_sizes(layer_sizes)?;
        let mut stream = rng::stream(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_sizes.len() - 1 {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| stream.gen_range(-bound..=bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Network {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation: Activation::Relu,
        })
    }

    /// Build a network from explicit parameters (shape-checked).
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::ShapeMismatch {
                expected: format!("{layers} weight/bias layers"),
                got: format!("{}/{}", weights.len(), biases.len()),
            });
        }
        for l in 0..layers {
            if weights[l].len() != layer_sizes[l] * layer_sizes[l + 1] {
                return Err(Error::ShapeMismatch {
                    expected: format!("{}x{} weights in layer {l}", layer_sizes[l + 1], layer_sizes[l]),
                    got: format!("{} values", weights[l].len()),
                });
            }
            if biases[l].len() != layer_sizes[l + 1] {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} biases in layer {l}", layer_sizes[l + 1]),
                    got: format!("{} values", biases[l].len()),
                });
            }
        }
        Ok(Network {
            layer_sizes,
            weights,
            biases,
            activation: Activation::Relu,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter accessor, layer by layer, weights before biases.
    /// Indexing is stable; used by finite-difference checks and tests.
    pub fn get_param(&self, mut index: usize) -> f64 {
        for l in 0..self.weights.len() {
            if index < self.weights[l].len() {
                return self.weights[l][index];
            }
            index -= self.weights[l].len();
            if index < self.biases[l].len() {
                return self.biases[l][index];
            }
            index -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    /// Flat parameter setter matching [`Network::get_param`].
    pub fn set_param(&mut self, mut index: usize, value: f64) {
        for l in 0..self.weights.len() {
            if index < self.weights[l].len() {
                self.weights[l][index] = value;
                return;
            }
            index -= self.weights[l].len();
            if index < self.biases[l].len() {
                self.biases[l][index] = value;
                return;
            }
            index -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    /// SHA-256 over the little-endian parameter bytes; equal checksums mean
    /// bitwise-equal parameters.
    pub fn param_checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for size in &self.layer_sizes {
            hasher.update((*size as u64).to_le_bytes());
        }
        for l in 0..self.weights.len() {
            for v in self.weights[l].iter().chain(self.biases[l].iter()) {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Polyak blend: `self = tau * source + (1 - tau) * self`, elementwise.
    pub fn polyak_from(&mut self, source: &Network, tau: f64) -> Result<()> {
        if self.layer_sizes != source.layer_sizes {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.layer_sizes),
                got: format!("{:?}", source.layer_sizes),
            });
        }
        for l in 0..self.weights.len() {
            for (dst, src) in self.weights[l].iter_mut().zip(&source.weights[l]) {
                *dst = tau * src + (1.0 - tau) * *dst;
            }
            for (dst, src) in self.biases[l].iter_mut().zip(&source.biases[l]) {
                *dst = tau * src + (1.0 - tau) * *dst;
            }
        }
        Ok(())
    }

    /// Forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_full(input)?.pop().unwrap())
    }

    /// Forward pass keeping every layer's activation (index 0 is the input,
    /// the last entry is the linear output).
    fn forward_full(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("input of width {}", self.input_dim()),
                got: format!("width {}", input.len()),
            });
        }
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        for l in 0..layers {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let prev = &acts[l];
            let mut out = self.biases[l].clone();
            let w = &self.weights[l];
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let mut sum = 0.0;
                for (wi, xi) in row.iter().zip(prev.iter()) {
                    sum += wi * xi;
                }
                out[o] += sum;
            }
            if l + 1 < layers {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            acts.push(out);
        }
        Ok(acts)
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Max-shifted log-softmax; returns `(log_probs, probs)`.
fn log_softmax(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    let log_sum = sum.ln() + max;
    let log_probs: Vec<f64> = values.iter().map(|v| v - log_sum).collect();
    let probs = log_probs.iter().map(|lp| lp.exp()).collect();
    (log_probs, probs)
}

/// Loss families supported by [`backprop_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// Mean over the batch of `(output[index] - value)^2`; the gradient
    /// flows only through the selected output.
    MseSelected,
    /// Actor-critic composite on outputs `[logits.., value]`:
    /// policy gradient + `value_coef` * value MSE - `entropy_coef` * entropy.
    ActorCritic { value_coef: f64, entropy_coef: f64 },
    /// Weighted binary cross-entropy with logits on a single output.
    Logistic,
}

/// Per-example targets, one variant per loss family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// For [`Loss::MseSelected`].
    Selected { index: usize, value: f64 },
    /// For [`Loss::ActorCritic`]: the taken action, its (detached)
    /// advantage, and the n-step return the value head regresses to.
    ActorCritic {
        action: usize,
        advantage: f64,
        return_value: f64,
    },
    /// For [`Loss::Logistic`]: label in {0, 1} and an example weight.
    Label { value: f64, weight: f64 },
}

/// Per-example loss and gradient with respect to the network output.
fn loss_and_output_grad(loss: Loss, output: &[f64], target: &Target) -> Result<(f64, f64, Vec<f64>)> {
    let mut grad = vec![0.0; output.len()];
    match (loss, target) {
        (Loss::MseSelected, Target::Selected { index, value }) => {
            if *index >= output.len() {
                return Err(Error::arg(format!(
                    "selected output {index} out of range 0..{}",
                    output.len()
                )));
            }
            let diff = output[*index] - value;
            grad[*index] = 2.0 * diff;
            Ok((diff * diff, 1.0, grad))
        }
        (
            Loss::ActorCritic {
                value_coef,
                entropy_coef,
            },
            Target::ActorCritic {
                action,
                advantage,
                return_value,
            },
        ) => {
            let actions = output.len().checked_sub(1).filter(|&k| k >= 1).ok_or_else(|| {
                Error::arg("actor-critic output needs at least 2 entries (logits + value)")
            })?;
            if *action >= actions {
                return Err(Error::arg(format!(
                    "action {action} out of range 0..{actions}"
                )));
            }
            let (log_probs, probs) = log_softmax(&output[..actions]);
            let entropy: f64 = probs
                .iter()
                .zip(&log_probs)
                .map(|(p, lp)| -p * lp)
                .sum();
            let value = output[actions];
            let value_err = value - return_value;
            let loss_value = -advantage * log_probs[*action] + value_coef * value_err * value_err
                - entropy_coef * entropy;
            for k in 0..actions {
                let indicator = if k == *action { 1.0 } else { 0.0 };
                grad[k] = advantage * (probs[k] - indicator)
                    + entropy_coef * probs[k] * (log_probs[k] + entropy);
            }
            grad[actions] = 2.0 * value_coef * value_err;
            Ok((loss_value, 1.0, grad))
        }
        (Loss::Logistic, Target::Label { value, weight }) => {
            if output.len() != 1 {
                return Err(Error::ShapeMismatch {
                    expected: "single output for logistic loss".into(),
                    got: format!("{} outputs", output.len()),
                });
            }
            if *weight <= 0.0 {
                return Err(Error::arg(format!("non-positive example weight {weight}")));
            }
            let z = output[0];
            // log(1 + e^-|z|) + max(z, 0) - z*y, stable for large |z|.
            let loss_value = z.max(0.0) - z * value + (-z.abs()).exp().ln_1p();
            let p = 1.0 / (1.0 + (-z).exp());
            grad[0] = p - value;
            Ok((weight * loss_value, *weight, grad.iter().map(|g| g * weight).collect()))
        }
        _ => Err(Error::arg(
            "loss and target variants do not match".to_string(),
        )),
    }
}

/// Mean batch loss without touching parameters.
pub fn batch_loss(net: &Network, inputs: &[Vec<f64>], loss: Loss, targets: &[Target]) -> Result<f64> {
    validate_batch(inputs, targets)?;
    let mut total = 0.0;
    let mut denom = 0.0;
    for (input, target) in inputs.iter().zip(targets) {
        let output = net.forward(input)?;
        let (l, d, _) = loss_and_output_grad(loss, &output, target)?;
        total += l;
        denom += d;
    }
    Ok(total / denom)
}

fn validate_batch(inputs: &[Vec<f64>], targets: &[Target]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput("backprop batch".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} targets", inputs.len()),
            got: format!("{}", targets.len()),
        });
    }
    Ok(())
}

/// Gradient-descent flavour for [`OptimizerState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptKind {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

/// Optimizer with per-parameter state (Adam moments).
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptKind,
    learning_rate: f64,
    step: u64,
    moment1: Vec<Vec<f64>>,
    moment2: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerState {
            kind: OptKind::Sgd,
            learning_rate,
            step: 0,
            moment1: Vec::new(),
            moment2: Vec::new(),
        }
    }

    /// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerState {
            kind: OptKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            learning_rate,
            step: 0,
            moment1: Vec::new(),
            moment2: Vec::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Lazily allocate moment buffers shaped like the gradient set.
    fn ensure_moments(&mut self, shapes: &[usize]) {
        if self.moment1.len() != shapes.len() {
            self.moment1 = shapes.iter().map(|&n| vec![0.0; n]).collect();
            self.moment2 = shapes.iter().map(|&n| vec![0.0; n]).collect();
        }
    }
}

/// One optimisation step on a batch: forward, backward, parameter update.
/// Returns the pre-update mean loss.
pub fn backprop_step(
    net: &mut Network,
    opt: &mut OptimizerState,
    inputs: &[Vec<f64>],
    loss: Loss,
    targets: &[Target],
) -> Result<f64> {
    validate_batch(inputs, targets)?;
    let layers = net.weights.len();
    let mut grad_w: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = net.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut total = 0.0;
    let mut denom = 0.0;

    for (input, target) in inputs.iter().zip(targets) {
        let acts = net.forward_full(input)?;
        let (loss_value, d, output_grad) = loss_and_output_grad(loss, acts.last().unwrap(), target)?;
        total += loss_value;
        denom += d;

        // Backward: delta starts as dL/d(linear output).
        let mut delta = output_grad;
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let prev = &acts[l];
            for o in 0..fan_out {
                let d_o = delta[o];
                if d_o != 0.0 {
                    let row = &mut grad_w[l][o * fan_in..(o + 1) * fan_in];
                    for (g, x) in row.iter_mut().zip(prev.iter()) {
                        *g += d_o * x;
                    }
                    grad_b[l][o] += d_o;
                }
            }
            if l > 0 {
                // ReLU derivative from the stored post-activation.
                let mut prev_delta = vec![0.0; fan_in];
                let w = &net.weights[l];
                for o in 0..fan_out {
                    let d_o = delta[o];
                    if d_o != 0.0 {
                        let row = &w[o * fan_in..(o + 1) * fan_in];
                        for (pd, wi) in prev_delta.iter_mut().zip(row.iter()) {
                            *pd += d_o * wi;
                        }
                    }
                }
                for (pd, a) in prev_delta.iter_mut().zip(prev.iter()) {
                    if *a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                delta = prev_delta;
            }
        }
    }

    // Normalise and check finiteness layer by layer.
    for l in 0..layers {
        for g in grad_w[l].iter_mut().chain(grad_b[l].iter_mut()) {
            *g /= denom;
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient { layer: l });
            }
        }
    }

    apply_update(net, opt, &grad_w, &grad_b);
    Ok(total / denom)
}

fn apply_update(
    net: &mut Network,
    opt: &mut OptimizerState,
    grad_w: &[Vec<f64>],
    grad_b: &[Vec<f64>],
) {
    let layers = net.weights.len();
    match opt.kind {
        OptKind::Sgd => {
            let lr = opt.learning_rate;
            for l in 0..layers {
                for (p, g) in net.weights[l].iter_mut().zip(&grad_w[l]) {
                    *p -= lr * g;
                }
                for (p, g) in net.biases[l].iter_mut().zip(&grad_b[l]) {
                    *p -= lr * g;
                }
            }
            opt.step += 1;
        }
        OptKind::Adam {
            beta1,
            beta2,
            epsilon,
        } => {
            // Interleave weight/bias slots: 2 per layer.
            let shapes: Vec<usize> = (0..layers)
                .flat_map(|l| [net.weights[l].len(), net.biases[l].len()])
                .collect();
            opt.ensure_moments(&shapes);
            opt.step += 1;
            let t = opt.step as i32;
            let corr1 = 1.0 - beta1.powi(t);
            let corr2 = 1.0 - beta2.powi(t);
            let lr = opt.learning_rate;
            for l in 0..layers {
                for (slot, params, grads) in [
                    (2 * l, &mut net.weights[l], &grad_w[l]),
                    (2 * l + 1, &mut net.biases[l], &grad_b[l]),
                ] {
                    let m = &mut opt.moment1[slot];
                    let v = &mut opt.moment2[slot];
                    for i in 0..params.len() {
                        let g = grads[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        let m_hat = m[i] / corr1;
                        let v_hat = v[i] / corr2;
                        params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_difference_grad(
        net: &Network,
        inputs: &[Vec<f64>],
        loss: Loss,
        targets: &[Target],
        index: usize,
        h: f64,
    ) -> f64 {
        let mut plus = net.clone();
        plus.set_param(index, net.get_param(index) + h);
        let mut minus = net.clone();
        minus.set_param(index, net.get_param(index) - h);
        let lp = batch_loss(&plus, inputs, loss, targets).unwrap();
        let lm = batch_loss(&minus, inputs, loss, targets).unwrap();
        (lp - lm) / (2.0 * h)
    }

    /// Analytic gradient recovered from a unit-rate SGD step.
    fn analytic_grads(net: &Network, inputs: &[Vec<f64>], loss: Loss, targets: &[Target]) -> Vec<f64> {
        let mut stepped = net.clone();
        let mut opt = OptimizerState::sgd(1.0);
        backprop_step(&mut stepped, &mut opt, inputs, loss, targets).unwrap();
        (0..net.param_count())
            .map(|i| net.get_param(i) - stepped.get_param(i))
            .collect()
    }

    #[test]
    fn param_count_example() {
        let net = Network::init(&[4, 64, 64, 2], 0).unwrap();
        assert_eq!(net.param_count(), 4 * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2);
        assert_eq!(net.param_count(), 4610);
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(Network::init(&[4], 0).is_err());
        assert!(Network::init(&[], 0).is_err());
        assert!(Network::init(&[4, 0, 2], 0).is_err());
    }

    #[test]
    fn init_is_deterministic_and_fan_in_bounded() {
        let a = Network::init(&[3, 8, 2], 9).unwrap();
        let b = Network::init(&[3, 8, 2], 9).unwrap();
        assert_eq!(a.param_checksum(), b.param_checksum());
        let c = Network::init(&[3, 8, 2], 10).unwrap();
        assert_ne!(a.param_checksum(), c.param_checksum());
        for (l, fan_in) in [(0usize, 3.0f64), (1, 8.0)] {
            let bound = 1.0 / fan_in.sqrt();
            assert!(a.weights[l].iter().all(|w| w.abs() <= bound));
            assert!(a.biases[l].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::from_parts(
            vec![3, 4, 2],
            vec![vec![0.0; 12], vec![0.0; 8]],
            vec![vec![0.0; 4], vec![0.0; 2]],
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = Network::init(&[3, 2], 0).unwrap();
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn first_layer_scaling_scales_linear_output() {
        // With a single linear layer and zero biases the output is linear in
        // the weights, so scaling them scales the output.
        let mut net = Network::init(&[3, 2], 4).unwrap();
        for b in &mut net.biases[0] {
            *b = 0.0;
        }
        let base = net.forward(&[0.3, -1.2, 0.7]).unwrap();
        let mut scaled = net.clone();
        for w in &mut scaled.weights[0] {
            *w *= 2.5;
        }
        let out = scaled.forward(&[0.3, -1.2, 0.7]).unwrap();
        for (o, b) in out.iter().zip(&base) {
            assert!((o - 2.5 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_properties() {
        let p = softmax(&[1000.0, 999.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[0] > p[1] && p[1] > p[2]);

        let uniform = softmax(&[2.0, 2.0, 2.0, 2.0]);
        for v in uniform {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn sgd_step_on_square_loss() {
        // f(w) = (w * 1 - 0)^2 = w^2 at w = 1: one step with lr 0.1 gives 0.8.
        let mut net =
            Network::from_parts(vec![1, 1], vec![vec![1.0]], vec![vec![0.0]]).unwrap();
        let mut opt = OptimizerState::sgd(0.1);
        let loss = backprop_step(
            &mut net,
            &mut opt,
            &[vec![1.0]],
            Loss::MseSelected,
            &[Target::Selected {
                index: 0,
                value: 0.0,
            }],
        )
        .unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
        assert!((net.weights[0][0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut net = Network::init(&[3, 5, 2], 7).unwrap();
        let before = net.param_checksum();
        let mut opt = OptimizerState::adam(0.0);
        backprop_step(
            &mut net,
            &mut opt,
            &[vec![0.1, 0.2, 0.3]],
            Loss::MseSelected,
            &[Target::Selected {
                index: 1,
                value: 0.7,
            }],
        )
        .unwrap();
        assert_eq!(net.param_checksum(), before);
    }

    #[test]
    fn empty_batch_and_mismatched_targets_error() {
        let mut net = Network::init(&[2, 2], 0).unwrap();
        let mut opt = OptimizerState::sgd(0.1);
        assert!(matches!(
            backprop_step(&mut net, &mut opt, &[], Loss::MseSelected, &[]),
            Err(Error::EmptyInput(_))
        ));
        assert!(backprop_step(
            &mut net,
            &mut opt,
            &[vec![1.0, 2.0]],
            Loss::MseSelected,
            &[]
        )
        .is_err());
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut net = Network::init(&[2, 3, 1], 3).unwrap();
        net.weights[1][0] = f64::INFINITY;
        let mut opt = OptimizerState::sgd(0.1);
        let err = backprop_step(
            &mut net,
            &mut opt,
            &[vec![1.0, 1.0]],
            Loss::MseSelected,
            &[Target::Selected {
                index: 0,
                value: 0.0,
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { .. }));
    }

    #[test]
    fn logistic_loss_is_stable_at_extreme_logits() {
        let net = Network::from_parts(vec![1, 1], vec![vec![1000.0]], vec![vec![0.0]]).unwrap();
        let loss = batch_loss(
            &net,
            &[vec![1.0], vec![-1.0]],
            Loss::Logistic,
            &[
                Target::Label {
                    value: 1.0,
                    weight: 1.0,
                },
                Target::Label {
                    value: 0.0,
                    weight: 1.0,
                },
            ],
        )
        .unwrap();
        assert!(loss.is_finite());
        assert!(loss < 1e-6);
    }

    #[test]
    fn gradients_match_central_differences() {
        // One network per loss family; relative error < 1e-4 with h = 1e-5.
        let cases: Vec<(Vec<usize>, Loss, Vec<Vec<f64>>, Vec<Target>)> = vec![
            (
                vec![3, 6, 2],
                Loss::MseSelected,
                vec![vec![0.2, -0.4, 0.8], vec![-0.9, 0.3, 0.1]],
                vec![
                    Target::Selected {
                        index: 0,
                        value: 0.5,
                    },
                    Target::Selected {
                        index: 1,
                        value: -0.2,
                    },
                ],
            ),
            (
                vec![4, 6, 3],
                Loss::ActorCritic {
                    value_coef: 0.5,
                    entropy_coef: 0.01,
                },
                vec![vec![0.1, 0.7, -0.3, 0.4]],
                vec![Target::ActorCritic {
                    action: 1,
                    advantage: 0.8,
                    return_value: 1.3,
                }],
            ),
            (
                vec![2, 5, 1],
                Loss::Logistic,
                vec![vec![0.4, -0.6], vec![-0.2, 0.9]],
                vec![
                    Target::Label {
                        value: 1.0,
                        weight: 2.0,
                    },
                    Target::Label {
                        value: 0.0,
                        weight: 0.5,
                    },
                ],
            ),
        ];
        for (seed, (sizes, loss, inputs, targets)) in cases.into_iter().enumerate() {
            let net = Network::init(&sizes, 100 + seed as u64).unwrap();
            let grads = analytic_grads(&net, &inputs, loss, &targets);
            for (i, g) in grads.iter().enumerate() {
                let fd = finite_difference_grad(&net, &inputs, loss, &targets, i, 1e-5);
                let scale = g.abs().max(fd.abs());
                if scale > 1e-6 {
                    assert!(
                        ((g - fd) / scale).abs() < 1e-4,
                        "loss {loss:?} param {i}: analytic {g}, fd {fd}"
                    );
                } else {
                    assert!((g - fd).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_lossless() {
        let net = Network::init(&[4, 8, 3], 2024).unwrap();
        let text = serde_json::to_string(&net).unwrap();
        assert!(text.contains("\"layer_sizes\""));
        assert!(text.contains("\"activation\":\"relu\""));
        let back: Network = serde_json::from_str(&text).unwrap();
        assert_eq!(back.param_checksum(), net.param_checksum());
    }

    #[test]
    fn checkpoint_rejects_inconsistent_shapes() {
        let bad = r#"{
            "layer_sizes": [2, 3],
            "weights": [[[0.0, 0.0], [0.0, 0.0]]],
            "biases": [[0.0, 0.0, 0.0]],
            "activation": "relu"
        }"#;
        assert!(serde_json::from_str::<Network>(bad).is_err());
    }
}
