//! Small dense feed-forward networks trained with Adamax.
//!
//! Everything here is deliberately minimal: layers apply `act(x'W + b)`
//! with tanh or identity activations, gradients come from exact
//! backpropagation of a mean squared error halved per sample, and the
//! optimizer keeps per-parameter first-moment and infinity-norm
//! accumulators. Training shuffles with a counter-based generator, so a
//! seed pins the whole run.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output value.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Shape request for one layer of [`Mlp::init`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: DMatrix<f64>,
    bias: DVector<f64>,
    activation: Activation,
}

impl Layer {
    /// `weights` is input-by-output; `bias` must match the output width.
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>, activation: Activation) -> Result<Layer> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return invalid("layer dimensions must be positive");
        }
        if bias.len() != weights.ncols() {
            return invalid(format!(
                "bias has {} entries, layer outputs {}",
                bias.len(),
                weights.ncols()
            ));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return invalid("layer parameters must be finite");
        }
        Ok(Layer { weights, bias, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut pre = self.weights.tr_mul(x);
        pre += &self.bias;
        pre.apply(|v| *v = self.activation.apply(*v));
        pre
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    use_bias: bool,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>, use_bias: bool) -> Result<Mlp> {
        if layers.is_empty() {
            return invalid("network needs at least one layer");
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return invalid(format!(
                    "layer outputs {} values but the next expects {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                ));
            }
        }
        Ok(Mlp { layers, use_bias })
    }

    /// Random initialization: weights uniform in plus or minus
    /// `sqrt(6 / (in + out))`, biases zero.
    pub fn init(specs: &[LayerSpec], use_bias: bool, rng: &mut impl Rng) -> Result<Mlp> {
        let layers = specs
            .iter()
            .map(|spec| {
                let bound = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
                let weights = DMatrix::from_fn(spec.in_dim, spec.out_dim, |_, _| {
                    rng.random_range(-bound..bound)
                });
                Layer::new(weights, DVector::zeros(spec.out_dim), spec.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers, use_bias)
    }

    /// Builds specs from a width list: `dims[i] -> dims[i+1]` with
    /// `hidden` activations everywhere except the final layer.
    pub fn feedforward(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        use_bias: bool,
        rng: &mut impl Rng,
    ) -> Result<Mlp> {
        if dims.len() < 2 {
            return invalid("a network needs input and output widths");
        }
        let last = dims.len() - 2;
        let specs: Vec<LayerSpec> = dims
            .windows(2)
            .enumerate()
            .map(|(i, pair)| LayerSpec {
                in_dim: pair[0],
                out_dim: pair[1],
                activation: if i == last { output } else { hidden },
            })
            .collect();
        Mlp::init(&specs, use_bias, rng)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.input_dim(), "input width mismatch");
        let mut a = x.clone();
        for layer in &self.layers {
            a = layer.forward(&a);
        }
        a
    }

    /// Input followed by every layer's output.
    fn forward_chain(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut chain = Vec::with_capacity(self.layers.len() + 1);
        chain.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(chain.last().unwrap());
            chain.push(next);
        }
        chain
    }

    /// Splits off the first `n` layers; both halves keep the bias flag.
    pub fn split_at(mut self, n: usize) -> Result<(Mlp, Mlp)> {
        if n == 0 || n >= self.layers.len() {
            return invalid(format!(
                "cannot split a {}-layer network at {n}",
                self.layers.len()
            ));
        }
        let tail = self.layers.split_off(n);
        let use_bias = self.use_bias;
        Ok((
            Mlp { layers: self.layers, use_bias },
            Mlp { layers: tail, use_bias },
        ))
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flat parameter vector: per layer, weights row by row, then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            for r in 0..layer.in_dim() {
                for c in 0..layer.out_dim() {
                    out.push(layer.weights[(r, c)]);
                }
            }
            out.extend(layer.bias.iter());
        }
        out
    }

    /// Inverse of [`Mlp::params`].
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return invalid(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            ));
        }
        let mut i = 0;
        for layer in &mut self.layers {
            for r in 0..layer.weights.nrows() {
                for c in 0..layer.weights.ncols() {
                    layer.weights[(r, c)] = params[i];
                    i += 1;
                }
            }
            for b in 0..layer.bias.len() {
                layer.bias[b] = params[i];
                i += 1;
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        crate::iofmt::to_json_string(&MlpJson::from(self))
    }

    pub fn from_json_str(text: &str) -> Result<Mlp> {
        let raw: MlpJson = serde_json::from_str(text)?;
        raw.build()
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct MlpJson {
    use_bias: bool,
    layers: Vec<LayerJson>,
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl From<&Mlp> for MlpJson {
    fn from(net: &Mlp) -> Self {
        MlpJson {
            use_bias: net.use_bias,
            layers: net
                .layers
                .iter()
                .map(|l| LayerJson {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    weights: crate::linwfa::matrix_rows(&l.weights),
                    bias: l.bias.iter().copied().collect(),
                })
                .collect(),
        }
    }
}

impl MlpJson {
    pub(crate) fn build(self) -> Result<Mlp> {
        let layers = self
            .layers
            .into_iter()
            .map(|l| {
                let weights = crate::linwfa::matrix_from_rows(&l.weights, l.in_dim, l.out_dim)?;
                Layer::new(weights, DVector::from_vec(l.bias), l.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers, self.use_bias)
    }
}

/// Per-layer gradient tensors matching a network's shapes.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            weights: net
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.in_dim(), l.out_dim()))
                .collect(),
            biases: net.layers.iter().map(|l| DVector::zeros(l.out_dim())).collect(),
        }
    }

    /// Same layout as [`Mlp::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    out.push(w[(r, c)]);
                }
            }
            out.extend(b.iter());
        }
        out
    }
}

/// Mean over the batch of `0.5 * |output - target|^2`, plus its exact
/// gradient with respect to every weight and bias.
pub fn backprop(net: &Mlp, batch: &[(DVector<f64>, DVector<f64>)]) -> (f64, Gradients) {
    let indices: Vec<usize> = (0..batch.len()).collect();
    backprop_indices(net, batch, &indices)
}

fn backprop_indices(
    net: &Mlp,
    data: &[(DVector<f64>, DVector<f64>)],
    indices: &[usize],
) -> (f64, Gradients) {
    assert!(!indices.is_empty(), "empty batch");
    let mut grads = Gradients::zeros_like(net);
    let mut loss = 0.0;
    for &i in indices {
        let (x, target) = &data[i];
        let chain = net.forward_chain(x);
        let output = chain.last().unwrap();
        let diff = output - target;
        loss += 0.5 * diff.norm_squared();

        let mut delta_out = diff;
        for l in (0..net.layers.len()).rev() {
            let out_l = &chain[l + 1];
            let act = net.layers[l].activation;
            let delta_pre = delta_out.zip_map(out_l, |d, y| d * act.derivative_from_output(y));
            grads.weights[l] += &chain[l] * delta_pre.transpose();
            grads.biases[l] += &delta_pre;
            if l > 0 {
                delta_out = &net.layers[l].weights * &delta_pre;
            }
        }
    }
    let scale = 1.0 / indices.len() as f64;
    loss *= scale;
    for w in &mut grads.weights {
        *w *= scale;
    }
    for b in &mut grads.biases {
        *b *= scale;
    }
    (loss, grads)
}

/// Adamax: Adam with an infinity-norm second moment.
///
/// Per step `t`: `m = b1*m + (1-b1)*g`, `u = max(b2*u, |g|)`, and the
/// parameter moves by `-(alpha / (1 - b1^t)) * m / (u + eps)`.
#[derive(Debug, Clone)]
pub struct Adamax {
    alpha: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u32,
    m: Gradients,
    u: Gradients,
}

impl Adamax {
    pub fn new(alpha: f64, net: &Mlp) -> Adamax {
        Adamax {
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            u: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let scale = self.alpha / (1.0 - self.beta1.powi(self.t as i32));
        let b1 = self.beta1;
        let b2 = self.beta2;
        let eps = self.epsilon;
        for l in 0..net.layers.len() {
            let gw = &grads.weights[l];
            let mw = &mut self.m.weights[l];
            let uw = &mut self.u.weights[l];
            let w = &mut net.layers[l].weights;
            for i in 0..gw.len() {
                let g = gw[i];
                mw[i] = b1 * mw[i] + (1.0 - b1) * g;
                uw[i] = (b2 * uw[i]).max(g.abs());
                w[i] -= scale * mw[i] / (uw[i] + eps);
            }
            if net.use_bias {
                let gb = &grads.biases[l];
                let mb = &mut self.m.biases[l];
                let ub = &mut self.u.biases[l];
                let b = &mut net.layers[l].bias;
                for i in 0..gb.len() {
                    let g = gb[i];
                    mb[i] = b1 * mb[i] + (1.0 - b1) * g;
                    ub[i] = (b2 * ub[i]).max(g.abs());
                    b[i] -= scale * mb[i] / (ub[i] + eps);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Stop after this many epochs without a strict loss improvement.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 32,
            learning_rate: 0.015,
            seed: 0,
            shuffle: true,
            early_stop_patience: Some(50),
        }
    }
}

impl TrainConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Runs mini-batch Adamax on `data`, returning the trained network and
/// the per-epoch loss history.
pub fn train(
    net: Mlp,
    data: &[(DVector<f64>, DVector<f64>)],
    cfg: &TrainConfig,
) -> Result<(Mlp, Vec<f64>)> {
    if data.is_empty() {
        return invalid("training data must be nonempty");
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return invalid("epochs and batch size must be at least 1");
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return invalid("learning rate must be positive");
    }
    for (x, t) in data {
        if x.len() != net.input_dim() || t.len() != net.output_dim() {
            return invalid(format!(
                "pair shaped {}->{} fed to a {}->{} network",
                x.len(),
                t.len(),
                net.input_dim(),
                net.output_dim()
            ));
        }
    }

    let mut net = net;
    let mut optimizer = Adamax::new(cfg.learning_rate, &net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            indices.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for batch in indices.chunks(cfg.batch_size) {
            let (loss, grads) = backprop_indices(&net, data, batch);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            optimizer.step(&mut net, &grads);
            epoch_loss += loss * batch.len() as f64;
        }
        epoch_loss /= data.len() as f64;
        history.push(epoch_loss);

        if epoch_loss < best {
            best = epoch_loss;
            stale = 0;
        } else {
            stale += 1;
            if let Some(patience) = cfg.early_stop_patience {
                if stale >= patience {
                    break;
                }
            }
        }
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn scalar_net(w: f64) -> Mlp {
        let layer = Layer::new(
            DMatrix::from_row_slice(1, 1, &[w]),
            DVector::zeros(1),
            Activation::Identity,
        )
        .unwrap();
        Mlp::from_layers(vec![layer], true).unwrap()
    }

    fn scalar_grad(net: &Mlp, g: f64) -> Gradients {
        let mut grads = Gradients::zeros_like(net);
        grads.weights[0][(0, 0)] = g;
        grads
    }

    #[test]
    fn forward_identity_layer_is_identity() {
        let layer = Layer::new(DMatrix::identity(2, 2), DVector::zeros(2), Activation::Identity)
            .unwrap();
        let net = Mlp::from_layers(vec![layer], true).unwrap();
        let x = vec2(0.3, -1.7);
        assert_eq!(net.forward(&x), x);
    }

    #[test]
    fn forward_matches_manual_computation() {
        let layer = Layer::new(
            DMatrix::from_row_slice(2, 1, &[0.5, -0.25]),
            DVector::from_vec(vec![0.1]),
            Activation::Tanh,
        )
        .unwrap();
        let net = Mlp::from_layers(vec![layer], true).unwrap();
        let y = net.forward(&vec2(1.0, 2.0));
        let expected = (1.0 * 0.5 + 2.0 * (-0.25) + 0.1_f64).tanh();
        assert_abs_diff_eq!(y[0], expected, epsilon = 1e-15);
    }

    #[test]
    fn gradient_of_identity_layer_is_outer_product() {
        let layer = Layer::new(
            DMatrix::from_row_slice(2, 2, &[0.2, -0.4, 0.6, 0.8]),
            DVector::zeros(2),
            Activation::Identity,
        )
        .unwrap();
        let net = Mlp::from_layers(vec![layer], true).unwrap();
        let x = vec2(1.0, -2.0);
        let t = vec2(0.5, 0.25);
        let o = net.forward(&x);
        let (_, grads) = backprop(&net, &[(x.clone(), t.clone())]);
        let expected = &x * (&o - &t).transpose();
        for i in 0..4 {
            assert_abs_diff_eq!(grads.weights[0][i], expected[i], epsilon = 1e-12);
        }
        for i in 0..2 {
            assert_abs_diff_eq!(grads.biases[0][i], (&o - &t)[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = Mlp::feedforward(
            &[4, 5, 3, 2],
            Activation::Tanh,
            Activation::Identity,
            true,
            &mut rng,
        )
        .unwrap();
        let data: Vec<(DVector<f64>, DVector<f64>)> = (0..3)
            .map(|_| {
                (
                    DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)),
                    DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)),
                )
            })
            .collect();
        let (_, grads) = backprop(&net, &data);
        let analytic = grads.flatten();

        let h = 1e-5;
        let params = net.params();
        let mut worst = 0.0_f64;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += h;
            let mut minus = params.clone();
            minus[i] -= h;
            let mut net_p = net.clone();
            net_p.set_params(&plus).unwrap();
            let mut net_m = net.clone();
            net_m.set_params(&minus).unwrap();
            let (lp, _) = backprop(&net_p, &data);
            let (lm, _) = backprop(&net_m, &data);
            let fd = (lp - lm) / (2.0 * h);
            let denom = analytic[i].abs().max(fd.abs()).max(1e-10);
            worst = worst.max((analytic[i] - fd).abs() / denom);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn adamax_reproduces_worked_step() {
        let mut net = scalar_net(1.0);
        let grads = scalar_grad(&net, 2.0);
        let mut opt = Adamax::new(0.015, &net);
        opt.step(&mut net, &grads);
        assert_abs_diff_eq!(net.layers[0].weights[(0, 0)], 0.985, epsilon = 1e-8);
    }

    #[test]
    fn adamax_first_step_is_signed_learning_rate() {
        for &g in &[2.0, -0.5, 0.013, -3.0e3] {
            let mut net = scalar_net(1.0);
            let grads = scalar_grad(&net, g);
            let mut opt = Adamax::new(0.015, &net);
            opt.step(&mut net, &grads);
            let delta = net.layers[0].weights[(0, 0)] - 1.0;
            let ratio = delta / (-0.015 * g.signum());
            assert!((ratio - 1.0).abs() < 1e-6, "g={g}, ratio={ratio}");
        }
    }

    #[test]
    fn adamax_ignores_zero_gradient() {
        let mut net = scalar_net(0.7);
        let grads = scalar_grad(&net, 0.0);
        let mut opt = Adamax::new(0.015, &net);
        for _ in 0..5 {
            opt.step(&mut net, &grads);
        }
        assert_eq!(net.layers[0].weights[(0, 0)], 0.7);
    }

    #[test]
    fn adamax_descends_a_quadratic() {
        let mut net = scalar_net(1.0);
        let mut opt = Adamax::new(0.015, &net);
        for _ in 0..2000 {
            let theta = net.layers[0].weights[(0, 0)];
            let grads = scalar_grad(&net, 2.0 * theta);
            opt.step(&mut net, &grads);
        }
        assert!(net.layers[0].weights[(0, 0)].abs() < 1e-3);
    }

    fn identity_task(n: usize, dim: usize, seed: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = DVector::from_fn(dim, |_, _| rng.random_range(-0.5..0.5));
                (x.clone(), x)
            })
            .collect()
    }

    #[test]
    fn train_fits_an_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::feedforward(
            &[3, 6, 3],
            Activation::Tanh,
            Activation::Identity,
            true,
            &mut rng,
        )
        .unwrap();
        let data = identity_task(64, 3, 4);
        let cfg = TrainConfig { early_stop_patience: None, ..TrainConfig::default() };
        let (_, history) = train(net, &data, &cfg).unwrap();
        assert!(history.last().unwrap() < &1e-3, "final loss {}", history.last().unwrap());
        assert!(history.first().unwrap() > history.last().unwrap());
    }

    #[test]
    fn train_is_deterministic_for_a_seed() {
        let data = identity_task(32, 2, 9);
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            Mlp::feedforward(&[2, 4, 2], Activation::Tanh, Activation::Identity, true, &mut rng)
                .unwrap()
        };
        let cfg = TrainConfig { epochs: 20, ..TrainConfig::default() };
        let (net_a, hist_a) = train(make(), &data, &cfg).unwrap();
        let (net_b, hist_b) = train(make(), &data, &cfg).unwrap();
        assert_eq!(hist_a.len(), hist_b.len());
        for (a, b) in hist_a.iter().zip(&hist_b) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in net_a.params().iter().zip(net_b.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn train_stops_after_patience_without_improvement() {
        let net = scalar_net(0.5);
        let data = vec![(DVector::zeros(1), DVector::zeros(1))];
        let cfg = TrainConfig {
            epochs: 500,
            batch_size: 1,
            early_stop_patience: Some(3),
            ..TrainConfig::default()
        };
        let (_, history) = train(net, &data, &cfg).unwrap();
        assert_eq!(history.len(), 4);
    }

    #[test]
    fn train_reports_divergence_on_nonfinite_loss() {
        let net = scalar_net(1.0);
        let data = vec![(DVector::from_vec(vec![1.0]), DVector::from_vec(vec![f64::NAN]))];
        let cfg = TrainConfig { batch_size: 1, ..TrainConfig::default() };
        match train(net, &data, &cfg) {
            Err(Error::Diverged { epoch }) => assert_eq!(epoch, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn train_rejects_bad_configs() {
        let net = scalar_net(1.0);
        let pair = (DVector::zeros(1), DVector::zeros(1));
        assert!(train(net.clone(), &[], &TrainConfig::default()).is_err());
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(train(net.clone(), &[pair.clone()], &cfg).is_err());
        let cfg = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(train(net.clone(), &[pair.clone()], &cfg).is_err());
        let bad = (DVector::zeros(2), DVector::zeros(1));
        assert!(train(net, &[bad], &TrainConfig::default()).is_err());
    }

    #[test]
    fn init_respects_bounds_and_zero_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::feedforward(
            &[10, 6, 4],
            Activation::Tanh,
            Activation::Identity,
            true,
            &mut rng,
        )
        .unwrap();
        for layer in net.layers() {
            let bound = (6.0 / (layer.in_dim() + layer.out_dim()) as f64).sqrt();
            assert!(layer.weights().iter().all(|w| w.abs() <= bound));
            assert!(layer.bias().iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn split_at_partitions_the_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::feedforward(
            &[4, 3, 2, 4],
            Activation::Tanh,
            Activation::Identity,
            true,
            &mut rng,
        )
        .unwrap();
        let x = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let full = net.forward(&x);
        let (enc, dec) = net.split_at(2).unwrap();
        assert_eq!(enc.output_dim(), 2);
        let composed = dec.forward(&enc.forward(&x));
        for i in 0..4 {
            assert_abs_diff_eq!(composed[i], full[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Mlp::feedforward(
            &[3, 5, 3],
            Activation::Tanh,
            Activation::Identity,
            false,
            &mut rng,
        )
        .unwrap();
        let text = net.to_json_string().unwrap();
        let back = Mlp::from_json_str(&text).unwrap();
        assert_eq!(net, back);
    }
}
