use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ddfloat::{mse_dd, predict_dd, Dd};
use super::{mse, Architecture, Mode, Network, Parameters};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over parameters of |analytic − numeric| / max(|analytic|, |numeric|, 1e-12)
    pub max_rel_error: f64,
    pub n_params: usize,
    /// (tensor index, element index) of the worst parameter.
    pub worst: (usize, usize),
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    /// Parameters whose difference quotient was re-evaluated in double-double.
    pub n_refined: usize,
}

/// Relative disagreement above which the `f64` difference quotient is
/// recomputed with a double-double loss.
const REFINE_ABOVE: f64 = 1e-5;

/// Compares backpropagated gradients of the MSE loss against central
/// differences with step `fd_step`. Requires a dropout-free network.
///
/// Each difference quotient is first taken with `f64` losses. Its rounding
/// error is about `ε·L / fd_step` in absolute terms, which swamps gradients
/// near 1e-10; quotients that disagree with the analytic value by more than
/// 1e-5 relative are therefore recomputed with the loss evaluated in
/// double-double arithmetic, keeping the same perturbed `f64` parameters.
pub fn gradient_check(
    network: &Network,
    input: &Matrix,
    target: [f64; 2],
    fd_step: f64,
) -> Result<GradCheckReport> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step {fd_step}")));
    }
    if network.stack.dropout_p != 0.0 {
        return Err(Error::InvalidArgument(
            "gradient check needs dropout 0 for a deterministic loss".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, cache) = network.forward(input, Mode::Train, &mut rng)?;
    let (_, analytic) = network.backward_mse(&cache, target)?;

    let loss_at = |net: &Network| -> Result<f64> { Ok(mse(&net.predict(input)?, &target)) };

    let mut probe = network.clone();
    let shapes: Vec<usize> = network.tensors().iter().map(|t| t.len()).collect();
    let analytic_tensors = analytic.tensors();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        n_params: shapes.iter().sum(),
        worst: (0, 0),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        n_refined: 0,
    };
    let rel_error = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-12);
    for (ti, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let original = probe.tensors()[ti][i];
            let (up, down) = (original + fd_step, original - fd_step);
            probe.tensors_mut()[ti][i] = up;
            let plus = loss_at(&probe)?;
            probe.tensors_mut()[ti][i] = down;
            let minus = loss_at(&probe)?;

            let a = analytic_tensors[ti][i];
            let mut numeric = (plus - minus) / (up - down);
            let mut rel = rel_error(a, numeric);
            if rel > REFINE_ABOVE {
                let minus_dd = mse_dd(&predict_dd(&probe, input), &target);
                probe.tensors_mut()[ti][i] = up;
                let plus_dd = mse_dd(&predict_dd(&probe, input), &target);
                numeric = ((plus_dd - minus_dd) / (Dd::from_f64(up) - Dd::from_f64(down))).to_f64();
                rel = rel_error(a, numeric);
                report.n_refined += 1;
            }
            probe.tensors_mut()[ti][i] = original;

            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst = (ti, i);
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Gradient check on a freshly initialized network with a random input
/// sequence of `seq_len` steps and a random target in [-1, 1]².
pub fn random_gradient_check(
    arch: &Architecture,
    seq_len: usize,
    seed: u64,
    fd_step: f64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let network = Network::init(arch, &mut rng)?;
    let input = Matrix::from_fn(arch.input_size, seq_len, |_, _| rng.random_range(-1.0..1.0));
    let target = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    gradient_check(&network, &input, target, fd_step)
}
