//! Recurrent network core: LSTM layers, dropout, dense head, MSE, BPTT,
//! Adam and finite-difference gradient checking. Everything runs in `f64`.

mod adam;
mod checkpoint;
mod ddfloat;
mod gradcheck;
mod lstm;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, random_gradient_check, GradCheckReport};
pub use lstm::{lstm_cell_forward, LstmLayerParams};
pub use network::{Architecture, DenseHead, ForwardCache, Gradients, LstmStack, Mode, Network};

/// A set of flat parameter tensors visited in a fixed declaration order.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl Parameters for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

/// Mean of squared differences over both outputs.
pub fn mse(pred: &[f64; 2], target: &[f64; 2]) -> f64 {
    let dv = pred[0] - target[0];
    let da = pred[1] - target[1];
    (dv * dv + da * da) / 2.0
}

/// Mean over a batch and over both outputs.
pub fn batch_mse(preds: &[[f64; 2]], targets: &[[f64; 2]]) -> f64 {
    assert_eq!(preds.len(), targets.len());
    if preds.is_empty() {
        return 0.0;
    }
    preds.iter().zip(targets).map(|(p, t)| mse(p, t)).sum::<f64>() / preds.len() as f64
}
