use rand::Rng;

use crate::error::{Error, Result};

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parameters of one LSTM layer. Gate blocks are stacked in the order
/// input, forget, cell, output; each block has `hidden` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub hidden: usize,
    pub input: usize,
    /// `4h × d`, row-major.
    pub input_weights: Vec<f64>,
    /// `4h × h`, row-major.
    pub recurrent_weights: Vec<f64>,
    pub input_bias: Vec<f64>,
    pub recurrent_bias: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmLayerParams {
            hidden,
            input,
            input_weights: vec![0.0; 4 * hidden * input],
            recurrent_weights: vec![0.0; 4 * hidden * hidden],
            input_bias: vec![0.0; 4 * hidden],
            recurrent_bias: vec![0.0; 4 * hidden],
        }
    }

    /// Weights uniform in ±1/sqrt(h); forget-gate bias 1, other biases 0.
    pub fn init<R: Rng + ?Sized>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(hidden, input);
        for w in p.input_weights.iter_mut().chain(p.recurrent_weights.iter_mut()) {
            *w = rng.random_range(-bound..=bound);
        }
        for b in &mut p.input_bias[hidden..2 * hidden] {
            *b = 1.0;
        }
        p
    }

    pub(crate) fn check(&self) -> Result<()> {
        let (h, d) = (self.hidden, self.input);
        if self.input_weights.len() != 4 * h * d
            || self.recurrent_weights.len() != 4 * h * h
            || self.input_bias.len() != 4 * h
            || self.recurrent_bias.len() != 4 * h
        {
            return Err(Error::ShapeMismatch(format!(
                "LSTM layer buffers inconsistent with h={h}, d={d}"
            )));
        }
        Ok(())
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 4] {
        [
            &self.input_weights,
            &self.recurrent_weights,
            &self.input_bias,
            &self.recurrent_bias,
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            &mut self.input_weights,
            &mut self.recurrent_weights,
            &mut self.input_bias,
            &mut self.recurrent_bias,
        ]
    }
}

/// Activated gates and states for one time step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// i, f, g, o after their nonlinearities, `4h`.
    pub gates: Vec<f64>,
    pub cell: Vec<f64>,
    pub tanh_cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

fn step(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmLayerParams) -> StepCache {
    let h = p.hidden;
    let d = p.input;
    let mut gates = vec![0.0; 4 * h];
    for (r, z) in gates.iter_mut().enumerate() {
        let wx = &p.input_weights[r * d..(r + 1) * d];
        let wh = &p.recurrent_weights[r * h..(r + 1) * h];
        let mut acc = p.input_bias[r] + p.recurrent_bias[r];
        acc += wx.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        acc += wh.iter().zip(h_prev).map(|(w, v)| w * v).sum::<f64>();
        *z = acc;
    }
    for (r, z) in gates.iter_mut().enumerate() {
        *z = if (2 * h..3 * h).contains(&r) {
            z.tanh()
        } else {
            sigmoid(*z)
        };
    }
    let mut cell = vec![0.0; h];
    let mut tanh_cell = vec![0.0; h];
    let mut hidden = vec![0.0; h];
    for j in 0..h {
        let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
        cell[j] = f * c_prev[j] + i * g;
        tanh_cell[j] = cell[j].tanh();
        hidden[j] = o * tanh_cell[j];
    }
    StepCache {
        gates,
        cell,
        tanh_cell,
        hidden,
    }
}

/// One LSTM step: returns the new hidden and cell states.
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmLayerParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check()?;
    if x.len() != params.input || h_prev.len() != params.hidden || c_prev.len() != params.hidden {
        return Err(Error::ShapeMismatch(format!(
            "cell expects x:{} h:{} c:{}, got {} {} {}",
            params.input,
            params.hidden,
            params.hidden,
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let s = step(x, h_prev, c_prev, params);
    Ok((s.hidden, s.cell))
}

/// Runs a layer over a whole sequence from zero initial state.
pub(crate) fn layer_forward(inputs: &[Vec<f64>], p: &LstmLayerParams) -> Vec<StepCache> {
    let h = p.hidden;
    let zeros = vec![0.0; h];
    let mut out: Vec<StepCache> = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (h_prev, c_prev) = match out.last() {
            Some(s) => (&s.hidden[..], &s.cell[..]),
            None => (&zeros[..], &zeros[..]),
        };
        let s = step(x, h_prev, c_prev, p);
        out.push(s);
    }
    out
}

/// Backpropagation through time for one layer.
///
/// `d_hidden[t]` is the loss gradient flowing into `h_t` from above. Gradients
/// are accumulated into `grads`; the return value is the gradient with respect
/// to each input vector, or empty when `want_input_grad` is false.
pub(crate) fn layer_backward(
    inputs: &[Vec<f64>],
    steps: &[StepCache],
    d_hidden: &[Vec<f64>],
    p: &LstmLayerParams,
    grads: &mut LstmLayerParams,
    want_input_grad: bool,
) -> Vec<Vec<f64>> {
    let h = p.hidden;
    let d = p.input;
    let t_len = steps.len();
    let zeros = vec![0.0; h];
    let mut d_inputs = if want_input_grad {
        vec![vec![0.0; d]; t_len]
    } else {
        Vec::new()
    };
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];

    for t in (0..t_len).rev() {
        let s = &steps[t];
        let c_prev = if t > 0 { &steps[t - 1].cell } else { &zeros };
        let h_prev = if t > 0 { &steps[t - 1].hidden } else { &zeros };
        for j in 0..h {
            let (i, f, g, o) = (s.gates[j], s.gates[h + j], s.gates[2 * h + j], s.gates[3 * h + j]);
            let dh = d_hidden[t][j] + dh_next[j];
            let d_o = dh * s.tanh_cell[j];
            let dc = dh * o * (1.0 - s.tanh_cell[j] * s.tanh_cell[j]) + dc_next[j];
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * c_prev[j];
            dc_next[j] = dc * f;
            dz[j] = d_i * i * (1.0 - i);
            dz[h + j] = d_f * f * (1.0 - f);
            dz[2 * h + j] = d_g * (1.0 - g * g);
            dz[3 * h + j] = d_o * o * (1.0 - o);
        }

        let x = &inputs[t];
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr == 0.0 {
                continue;
            }
            grads.input_bias[r] += dzr;
            grads.recurrent_bias[r] += dzr;
            let gx = &mut grads.input_weights[r * d..(r + 1) * d];
            for (gw, xv) in gx.iter_mut().zip(x) {
                *gw += dzr * xv;
            }
            let gh = &mut grads.recurrent_weights[r * h..(r + 1) * h];
            for (gw, hv) in gh.iter_mut().zip(h_prev) {
                *gw += dzr * hv;
            }
            let wh = &p.recurrent_weights[r * h..(r + 1) * h];
            for (acc, w) in dh_next.iter_mut().zip(wh) {
                *acc += dzr * w;
            }
            if want_input_grad {
                let wx = &p.input_weights[r * d..(r + 1) * d];
                for (acc, w) in d_inputs[t].iter_mut().zip(wx) {
                    *acc += dzr * w;
                }
            }
        }
    }
    d_inputs
}
