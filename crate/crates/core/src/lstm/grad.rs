use super::model::{check_inputs, dot, sigmoid, LstmModel, Step, INPUT_DIM};
use super::LabeledSequence;
use crate::exec::{self, Exec};
use crate::{Error, Result};

/// Parameter gradients, laid out exactly like [`LstmModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm {
            let s = max_norm / n;
            self.values.iter_mut().for_each(|g| *g *= s);
        }
    }
}

/// Binary cross-entropy from a logit, stable for large magnitudes.
pub(crate) fn bce_from_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Mean BCE loss over `batch` and its gradient.
pub fn backward(model: &LstmModel, batch: &[LabeledSequence]) -> Result<(Gradients, f64)> {
    backward_with(model, batch, Exec::default())
}

/// [`backward`] with an explicit execution mode. Per-sequence gradients are
/// summed in batch order, so both modes give bit-identical results.
pub fn backward_with(
    model: &LstmModel,
    batch: &[LabeledSequence],
    exec: Exec,
) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::Dataset("empty batch".into()));
    }
    let per_seq = exec::map_ordered(exec, batch, |i, seq| sequence_gradient(model, seq, i));
    let mut total = vec![0.0; model.params().len()];
    let mut loss = 0.0;
    for r in per_seq {
        let (g, l) = r?;
        for (t, v) in total.iter_mut().zip(&g) {
            *t += v;
        }
        loss += l;
    }
    let n = batch.len() as f64;
    total.iter_mut().for_each(|g| *g /= n);
    Ok((Gradients { values: total }, loss / n))
}

fn sequence_gradient(
    model: &LstmModel,
    seq: &LabeledSequence,
    index: usize,
) -> Result<(Vec<f64>, f64)> {
    check_inputs(&seq.inputs)?;
    let hd = model.hidden_dim();
    let cols = INPUT_DIM + hd;
    let steps = seq.inputs.len();

    // tape: per step the concatenated input, activated gates and cell state;
    // cell row 0 is the zero initial state
    let mut zs = vec![0.0; steps * cols];
    let mut gates = vec![0.0; steps * 4 * hd];
    let mut cells = vec![0.0; (steps + 1) * hd];
    let mut step = Step::new(hd, cols);
    for (t, x) in seq.inputs.iter().enumerate() {
        step.advance(model, x);
        zs[t * cols..(t + 1) * cols].copy_from_slice(&step.z);
        gates[t * 4 * hd..(t + 1) * 4 * hd].copy_from_slice(&step.gates);
        cells[(t + 1) * hd..(t + 2) * hd].copy_from_slice(&step.c);
    }
    let (w_out, b_out) = model.readout();
    let logit = b_out + dot(w_out, &step.h);
    let target = seq.target();
    let loss = bce_from_logit(logit, target);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { index });
    }

    let mut grad = vec![0.0; model.params().len()];
    let d_logit = sigmoid(logit) - target;
    for j in 0..hd {
        grad[model.readout_index(j)] = d_logit * step.h[j];
    }
    grad[model.readout_bias_index()] = d_logit;

    let w = model.gate_weights();
    let (gw, rest) = grad.split_at_mut(w.len());
    let gb = &mut rest[..4 * hd];

    let mut dh: Vec<f64> = w_out.iter().map(|w| d_logit * w).collect();
    let mut dc_next = vec![0.0; hd];
    let mut da = vec![0.0; 4 * hd];
    for t in (0..steps).rev() {
        let g_t = &gates[t * 4 * hd..(t + 1) * 4 * hd];
        let c_prev = &cells[t * hd..(t + 1) * hd];
        let c_t = &cells[(t + 1) * hd..(t + 2) * hd];
        let z = &zs[t * cols..(t + 1) * cols];
        for j in 0..hd {
            let (i, f, o, gv) = (g_t[j], g_t[hd + j], g_t[2 * hd + j], g_t[3 * hd + j]);
            let tc = c_t[j].tanh();
            let d_o = dh[j] * tc;
            let dc = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
            let d_i = dc * gv;
            let d_g = dc * i;
            let d_f = dc * c_prev[j];
            dc_next[j] = dc * f;
            da[j] = d_i * i * (1.0 - i);
            da[hd + j] = d_f * f * (1.0 - f);
            da[2 * hd + j] = d_o * o * (1.0 - o);
            da[3 * hd + j] = d_g * (1.0 - gv * gv);
        }
        dh.iter_mut().for_each(|v| *v = 0.0);
        for (r, &d) in da.iter().enumerate() {
            gb[r] += d;
            let row = &w[r * cols..(r + 1) * cols];
            let grow = &mut gw[r * cols..(r + 1) * cols];
            for (gc, zc) in grow.iter_mut().zip(z) {
                *gc += d * zc;
            }
            for (dhk, wk) in dh.iter_mut().zip(&row[INPUT_DIM..]) {
                *dhk += wk * d;
            }
        }
    }
    Ok((grad, loss))
}
