use rand::Rng;

use super::lstm::{layer_backward, layer_forward, LstmLayerParams, StepCache};
use super::Parameters;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Shape of a stacked LSTM: `module_layers[k]` layers in module `k`, all of
/// width `hidden_size`. Modules are chained output-to-input.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_size: usize,
    pub hidden_size: usize,
    pub module_layers: Vec<usize>,
    pub dropout_p: f64,
}

impl Architecture {
    pub fn uniform(input_size: usize, hidden_size: usize, n_modules: usize, layers_per_module: usize, dropout_p: f64) -> Self {
        Architecture {
            input_size,
            hidden_size,
            module_layers: vec![layers_per_module; n_modules],
            dropout_p,
        }
    }

    pub fn total_layers(&self) -> usize {
        self.module_layers.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 {
            return Err(Error::InvalidArgument("input size must be at least 1".into()));
        }
        if self.hidden_size == 0 {
            return Err(Error::InvalidArgument("hidden size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} must lie in [0, 1)",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    pub input_size: usize,
    pub hidden_size: usize,
    pub module_layers: Vec<usize>,
    pub dropout_p: f64,
    pub layers: Vec<LstmLayerParams>,
}

impl LstmStack {
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let layers = (0..arch.total_layers())
            .map(|l| {
                let d = if l == 0 { arch.input_size } else { arch.hidden_size };
                LstmLayerParams::init(arch.hidden_size, d, rng)
            })
            .collect();
        Ok(LstmStack {
            input_size: arch.input_size,
            hidden_size: arch.hidden_size,
            module_layers: arch.module_layers.clone(),
            dropout_p: arch.dropout_p,
            layers,
        })
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_size: self.input_size,
            hidden_size: self.hidden_size,
            module_layers: self.module_layers.clone(),
            dropout_p: self.dropout_p,
        }
    }

    pub fn total_layers(&self) -> usize {
        self.layers.len()
    }

    /// Width of the representation the head reads.
    pub fn output_size(&self) -> usize {
        if self.layers.is_empty() {
            self.input_size
        } else {
            self.hidden_size
        }
    }

    fn check(&self) -> Result<()> {
        if self.module_layers.iter().sum::<usize>() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "module layout {:?} does not add up to {} layers",
                self.module_layers,
                self.layers.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.check()?;
            let d = if l == 0 { self.input_size } else { self.hidden_size };
            if layer.input != d || layer.hidden != self.hidden_size {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l} is {}x{}, expected {}x{d}",
                    layer.hidden, layer.input, self.hidden_size
                )));
            }
        }
        Ok(())
    }
}

/// Linear map from the final hidden state to (valence, arousal).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead {
    pub input: usize,
    /// `2 × input`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseHead {
    pub fn zeros(input: usize) -> Self {
        DenseHead {
            input,
            weights: vec![0.0; 2 * input],
            bias: vec![0.0; 2],
        }
    }

    pub fn init<R: Rng + ?Sized>(input: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let mut head = Self::zeros(input);
        for w in head.weights.iter_mut() {
            *w = rng.random_range(-bound..=bound);
        }
        head
    }

    pub fn apply(&self, h: &[f64]) -> [f64; 2] {
        let mut out = [self.bias[0], self.bias[1]];
        for (k, o) in out.iter_mut().enumerate() {
            *o += self.weights[k * self.input..(k + 1) * self.input]
                .iter()
                .zip(h)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        }
        out
    }
}

/// An LSTM stack followed by a dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub stack: LstmStack,
    pub head: DenseHead,
    generation: u64,
}

/// Gradient buffers with the same layout as a [`Network`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LstmLayerParams>,
    pub head: DenseHead,
}

impl Gradients {
    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|g| g.is_finite()))
    }
}

#[derive(Debug, Clone)]
struct LayerTrace {
    inputs: Vec<Vec<f64>>,
    steps: Vec<StepCache>,
    /// Inverted-dropout multipliers applied to this layer's outputs, if any.
    mask: Option<Vec<Vec<f64>>>,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    n_layers: usize,
    head_input: Vec<f64>,
    layers: Vec<LayerTrace>,
    pub prediction: [f64; 2],
}

impl Network {
    pub fn new(stack: LstmStack, head: DenseHead) -> Result<Self> {
        stack.check()?;
        if head.input != stack.output_size() || head.weights.len() != 2 * head.input || head.bias.len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "head reads {} features but the stack emits {}",
                head.input,
                stack.output_size()
            )));
        }
        Ok(Network {
            stack,
            head,
            generation: 0,
        })
    }

    pub fn init<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        let stack = LstmStack::init(arch, rng)?;
        let head = DenseHead::init(stack.output_size(), rng);
        Network::new(stack, head)
    }

    pub fn architecture(&self) -> Architecture {
        self.stack.architecture()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .stack
                .layers
                .iter()
                .map(|l| LstmLayerParams::zeros(l.hidden, l.input))
                .collect(),
            head: DenseHead::zeros(self.head.input),
        }
    }

    /// Runs the sequence (`features × time`) through the stack and head.
    ///
    /// Initial states are zero. In train mode, inverted dropout is applied to
    /// every layer's output sequence except the last layer's.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        seq: &Matrix,
        mode: Mode,
        rng: &mut R,
    ) -> Result<([f64; 2], ForwardCache)> {
        if seq.rows() != self.stack.input_size {
            return Err(Error::ShapeMismatch(format!(
                "sequence has {} features, network expects {}",
                seq.rows(),
                self.stack.input_size
            )));
        }
        if seq.cols() == 0 {
            return Err(Error::ShapeMismatch("sequence has no time steps".into()));
        }
        let p = self.stack.dropout_p;
        let keep = 1.0 - p;
        let n_layers = self.stack.layers.len();
        let mut current = seq.columns();
        let mut traces = Vec::with_capacity(n_layers);
        for (l, layer) in self.stack.layers.iter().enumerate() {
            let steps = layer_forward(&current, layer);
            let mut next: Vec<Vec<f64>> = steps.iter().map(|s| s.hidden.clone()).collect();
            let mask = if mode == Mode::Train && p > 0.0 && l + 1 < n_layers {
                let m: Vec<Vec<f64>> = next
                    .iter()
                    .map(|h| {
                        h.iter()
                            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect()
                    })
                    .collect();
                for (v, mv) in next.iter_mut().zip(&m) {
                    v.iter_mut().zip(mv).for_each(|(x, k)| *x *= k);
                }
                Some(m)
            } else {
                None
            };
            traces.push(LayerTrace {
                inputs: std::mem::replace(&mut current, next),
                steps,
                mask,
            });
        }
        let head_input = current.pop().expect("at least one time step");
        let prediction = self.head.apply(&head_input);
        Ok((
            prediction,
            ForwardCache {
                generation: self.generation,
                n_layers,
                head_input,
                layers: traces,
                prediction,
            },
        ))
    }

    /// Eval-mode prediction.
    pub fn predict(&self, seq: &Matrix) -> Result<[f64; 2]> {
        // eval mode never draws from the generator
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        Ok(self.forward(seq, Mode::Eval, &mut rng)?.0)
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the prediction is `d_pred`.
    pub fn backward_into(&self, cache: &ForwardCache, d_pred: [f64; 2], grads: &mut Gradients) -> Result<()> {
        if cache.generation != self.generation || cache.n_layers != self.stack.layers.len() {
            return Err(Error::StaleCache);
        }
        let n = self.head.input;
        for k in 0..2 {
            grads.head.bias[k] += d_pred[k];
            for (g, h) in grads.head.weights[k * n..(k + 1) * n].iter_mut().zip(&cache.head_input) {
                *g += d_pred[k] * h;
            }
        }
        let n_layers = cache.layers.len();
        if n_layers == 0 {
            return Ok(());
        }
        let t_len = cache.layers[0].steps.len();
        let mut d_hidden = vec![vec![0.0; self.stack.hidden_size]; t_len];
        for (j, dh) in d_hidden[t_len - 1].iter_mut().enumerate() {
            *dh = d_pred[0] * self.head.weights[j] + d_pred[1] * self.head.weights[n + j];
        }
        for l in (0..n_layers).rev() {
            let trace = &cache.layers[l];
            let d_inputs = layer_backward(
                &trace.inputs,
                &trace.steps,
                &d_hidden,
                &self.stack.layers[l],
                &mut grads.layers[l],
                l > 0,
            );
            if l > 0 {
                d_hidden = d_inputs;
                if let Some(mask) = &cache.layers[l - 1].mask {
                    for (dh, m) in d_hidden.iter_mut().zip(mask) {
                        dh.iter_mut().zip(m).for_each(|(g, k)| *g *= k);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn backward(&self, cache: &ForwardCache, d_pred: [f64; 2]) -> Result<Gradients> {
        let mut grads = self.zero_gradients();
        self.backward_into(cache, d_pred, &mut grads)?;
        Ok(grads)
    }

    /// Gradient of `mse(prediction, target)` for a single example.
    pub fn backward_mse(&self, cache: &ForwardCache, target: [f64; 2]) -> Result<(f64, Gradients)> {
        let loss = super::mse(&cache.prediction, &target);
        let d_pred = [
            cache.prediction[0] - target[0],
            cache.prediction[1] - target[1],
        ];
        Ok((loss, self.backward(cache, d_pred)?))
    }

    pub(crate) fn bump_generation(&mut self) {
        self.generation = self.generation.wrapping_add(1);
    }
}

impl Parameters for Network {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.stack.layers {
            out.extend(l.tensors());
        }
        out.push(&self.head.weights);
        out.push(&self.head.bias);
        out
    }

    /// Any mutable access invalidates outstanding forward caches.
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.bump_generation();
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.stack.layers {
            out.extend(l.tensors_mut());
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }
}

impl Parameters for Gradients {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.extend(l.tensors());
        }
        out.push(&self.head.weights);
        out.push(&self.head.bias);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(arch: &Architecture, seed: u64) -> Network {
        Network::init(arch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn seq(d: usize, t: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(d, t, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn no_dropout_means_train_equals_eval() {
        let n = net(&Architecture::uniform(3, 6, 2, 2, 0.0), 1);
        let x = seq(3, 7, 2);
        let (a, _) = n.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, n.predict(&x).unwrap());
    }

    #[test]
    fn eval_ignores_rng() {
        let n = net(&Architecture::uniform(3, 6, 2, 2, 0.5), 1);
        let x = seq(3, 7, 2);
        let (a, _) = n.forward(&x, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let (b, _) = n.forward(&x, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_step_is_cell_plus_head() {
        let arch = Architecture::uniform(2, 3, 1, 2, 0.0);
        let n = net(&arch, 3);
        let x = seq(2, 1, 4);
        let (h1, _) = super::super::lstm_cell_forward(&x.column(0), &[0.0; 3], &[0.0; 3], &n.stack.layers[0]).unwrap();
        let (h2, _) = super::super::lstm_cell_forward(&h1, &[0.0; 3], &[0.0; 3], &n.stack.layers[1]).unwrap();
        assert_eq!(n.predict(&x).unwrap(), n.head.apply(&h2));
    }

    #[test]
    fn zero_weights_predict_head_bias() {
        let arch = Architecture::uniform(4, 3, 1, 2, 0.0);
        let mut n = net(&arch, 0);
        for t in n.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        n.head.bias = vec![0.25, -0.5];
        assert_eq!(n.predict(&seq(4, 5, 1)).unwrap(), [0.25, -0.5]);
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let n = net(&Architecture::uniform(3, 4, 1, 2, 0.0), 1);
        let x = seq(3, 4, 2);
        let (pred, cache) = n.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let (loss, g) = n.backward_mse(&cache, pred).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn gradients_are_linear_in_upstream() {
        let n = net(&Architecture::uniform(3, 4, 2, 1, 0.3), 1);
        let x = seq(3, 4, 2);
        let (_, cache) = n.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let g1 = n.backward(&cache, [0.3, -0.2]).unwrap();
        let g2 = n.backward(&cache, [0.6, -0.4]).unwrap();
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((2.0 * x - y).abs() <= 1e-14 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut n = net(&Architecture::uniform(3, 4, 1, 1, 0.0), 1);
        let (_, cache) = n.forward(&seq(3, 2, 0), Mode::Train, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        n.tensors_mut()[0][0] += 0.1;
        assert!(matches!(n.backward(&cache, [1.0, 1.0]), Err(Error::StaleCache)));
    }

    #[test]
    fn input_shape_is_checked() {
        let n = net(&Architecture::uniform(3, 4, 1, 1, 0.0), 1);
        assert!(matches!(n.predict(&seq(2, 4, 0)), Err(Error::ShapeMismatch(_))));
        assert!(n.predict(&Matrix::zeros(3, 0)).is_err());
    }

    #[test]
    fn layer_widths_chain() {
        let n = net(&Architecture::uniform(128, 20, 2, 2, 0.1), 0);
        assert_eq!(n.stack.total_layers(), 4);
        assert_eq!(n.stack.layers[0].input, 128);
        assert!(n.stack.layers[1..].iter().all(|l| l.input == 20 && l.hidden == 20));
    }

    #[test]
    fn dropout_is_unbiased_in_expectation() {
        // Two layers: the first layer's output is dropped before the second.
        // Mean train-mode first-layer output over many masks matches eval.
        let arch = Architecture::uniform(2, 4, 1, 2, 0.3);
        let n = net(&arch, 7);
        let x = seq(2, 3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 20_000;
        let eval_h = {
            let (_, c) = n.forward(&x, Mode::Eval, &mut rng).unwrap();
            c.layers[1].inputs.clone()
        };
        let mut sum = vec![vec![0.0; 4]; 3];
        let mut sum_sq = vec![vec![0.0; 4]; 3];
        for _ in 0..draws {
            let (_, c) = n.forward(&x, Mode::Train, &mut rng).unwrap();
            for t in 0..3 {
                for j in 0..4 {
                    let v = c.layers[1].inputs[t][j];
                    sum[t][j] += v;
                    sum_sq[t][j] += v * v;
                }
            }
        }
        for t in 0..3 {
            for j in 0..4 {
                let mean = sum[t][j] / draws as f64;
                let var = sum_sq[t][j] / draws as f64 - mean * mean;
                let se = (var / draws as f64).sqrt();
                assert!((mean - eval_h[t][j]).abs() <= 3.0 * se + 1e-12, "t{t} j{j}");
            }
        }
    }
}
