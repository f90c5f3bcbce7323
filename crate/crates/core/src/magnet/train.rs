use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::laplacian::LaplacianBundle;
use super::model::{loss_and_gradients, Gradients, MagnetHyperparams, ModelState, SetSample};
use crate::error::Result;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

struct StepSize {
    lr: f64,
    decay: f64,
    bias1: f64,
    bias2: f64,
}

impl StepSize {
    fn delta(&self, m: f64, v: f64) -> f64 {
        self.lr * (m / self.bias1) / ((v / self.bias2).sqrt() + ADAM_EPS)
    }
}

fn update_real(x: &mut f64, g: f64, m: &mut f64, v: &mut f64, step: &StepSize) {
    *m = BETA1 * *m + (1.0 - BETA1) * g;
    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
    *x -= step.delta(*m, *v) + step.lr * step.decay * *x;
}

fn update_complex(x: &mut Complex64, g: Complex64, m: &mut Complex64, v: &mut Complex64, step: &StepSize) {
    update_real(&mut x.re, g.re, &mut m.re, &mut v.re, step);
    update_real(&mut x.im, g.im, &mut m.im, &mut v.im, step);
}

/// One Adam step with decoupled weight decay. The head bias is not decayed.
pub fn adam_step(state: &mut ModelState, grads: &Gradients, hp: &MagnetHyperparams) {
    state.adam_steps += 1;
    let t = state.adam_steps as i32;
    let mut step = StepSize {
        lr: hp.learning_rate,
        decay: hp.weight_decay,
        bias1: 1.0 - BETA1.powi(t),
        bias2: 1.0 - BETA2.powi(t),
    };
    for (l, layer) in state.filters.iter_mut().enumerate() {
        for (k, theta) in layer.iter_mut().enumerate() {
            let g = &grads.filters[l][k];
            let mom = &mut state.filter_moments[l][k];
            for idx in 0..theta.len() {
                update_complex(&mut theta[idx], g[idx], &mut mom.first[idx], &mut mom.second[idx], &step);
            }
        }
    }
    let hw = &mut state.head_weight_moments;
    for idx in 0..state.head_weight.len() {
        update_real(&mut state.head_weight[idx], grads.head_weight[idx], &mut hw.first[idx], &mut hw.second[idx], &step);
    }
    step.decay = 0.0;
    let hb = &mut state.head_bias_moments;
    for r in 0..2 {
        update_real(&mut state.head_bias[r], grads.head_bias[r], &mut hb.first[r], &mut hb.second[r], &step);
    }
}

/// Runs `epochs` full-batch epochs and returns the per-epoch training loss
/// (measured before that epoch's update). Dropout masks are seeded from the
/// state seed and the running epoch count, so a resumed run replays the
/// same sequence as an uninterrupted one.
pub fn train(
    state: &mut ModelState,
    bundle: &LaplacianBundle,
    features: &DMatrix<f64>,
    samples: &[SetSample],
    hp: &MagnetHyperparams,
    epochs: usize,
) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let seed = state.seed ^ state.epochs_done.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let dropout_seed = (hp.dropout > 0.0).then_some(seed);
        let (loss, grads) = loss_and_gradients(bundle, features, samples, state, hp, dropout_seed)?;
        adam_step(state, &grads, hp);
        state.epochs_done += 1;
        trace.push(loss);
    }
    Ok(trace)
}

pub fn write_loss_trace<W: Write>(trace: &[f64], first_epoch: u64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss"])?;
    for (i, loss) in trace.iter().enumerate() {
        w.write_record([(first_epoch + i as u64).to_string(), loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
