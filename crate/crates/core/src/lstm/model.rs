use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{self, Exec};
use crate::features::Window;
use crate::{Error, Result};

pub const INPUT_DIM: usize = 2;
pub const DEFAULT_HIDDEN: usize = 16;

/// Gate order inside the stacked weight matrix and bias vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// LSTM parameters stored in one flat vector.
///
/// Layout, with `Z = INPUT_DIM + hidden`:
///
/// | block | size | indexing |
/// |---|---|---|
/// | gate weights | `4 * hidden * Z` | row `gate * hidden + j`, column `c` over `[x; h]` |
/// | gate biases | `4 * hidden` | `gate * hidden + j` |
/// | readout weights | `hidden` | `j` |
/// | readout bias | `1` | |
///
/// Gates are ordered input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    hidden: usize,
    params: Vec<f64>,
}

impl LstmModel {
    pub fn param_count(hidden: usize) -> usize {
        let z = INPUT_DIM + hidden;
        4 * hidden * z + 4 * hidden + hidden + 1
    }

    pub fn zeros(hidden: usize) -> Self {
        assert!(hidden > 0, "hidden_dim must be positive");
        Self {
            hidden,
            params: vec![0.0; Self::param_count(hidden)],
        }
    }

    /// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) weights with forget-gate bias 1.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut m = Self::zeros(hidden);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut m.params {
            *p = rng.gen_range(-bound..bound);
        }
        for j in 0..hidden {
            let i = m.bias_index(Gate::Forget, j);
            m.params[i] = 1.0;
        }
        m
    }

    /// Rebuilds a model from a flat parameter vector in the documented layout.
    pub fn from_params(hidden: usize, params: Vec<f64>) -> Result<Self> {
        if hidden == 0 || params.len() != Self::param_count(hidden) {
            return Err(Error::Config(format!(
                "{} parameters do not match hidden_dim {hidden}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Self { hidden, params })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        INPUT_DIM
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn cols(&self) -> usize {
        INPUT_DIM + self.hidden
    }

    pub fn weight_index(&self, gate: Gate, row: usize, col: usize) -> usize {
        (gate as usize * self.hidden + row) * self.cols() + col
    }

    pub fn bias_index(&self, gate: Gate, row: usize) -> usize {
        4 * self.hidden * self.cols() + gate as usize * self.hidden + row
    }

    pub fn readout_index(&self, j: usize) -> usize {
        4 * self.hidden * self.cols() + 4 * self.hidden + j
    }

    pub fn readout_bias_index(&self) -> usize {
        self.params.len() - 1
    }

    pub(crate) fn gate_weights(&self) -> &[f64] {
        &self.params[..4 * self.hidden * self.cols()]
    }

    pub(crate) fn gate_biases(&self) -> &[f64] {
        let start = 4 * self.hidden * self.cols();
        &self.params[start..start + 4 * self.hidden]
    }

    pub(crate) fn readout(&self) -> (&[f64], f64) {
        let start = self.readout_index(0);
        (
            &self.params[start..start + self.hidden],
            self.params[self.params.len() - 1],
        )
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Runs the recurrence; returns the readout logit.
    pub fn forward_logit(&self, inputs: &[[f64; INPUT_DIM]]) -> Result<f64> {
        check_inputs(inputs)?;
        let h = self.hidden;
        let mut cell = Step::new(h, self.cols());
        for x in inputs {
            cell.advance(self, x);
        }
        let (w_out, b_out) = self.readout();
        Ok(b_out + dot(w_out, &cell.h))
    }

    /// Drowsiness probability for one input sequence.
    pub fn forward(&self, inputs: &[[f64; INPUT_DIM]]) -> Result<f64> {
        self.forward_logit(inputs).map(sigmoid)
    }

    pub fn predict(&self, window: &Window) -> Result<f64> {
        self.forward(&window.inputs())
    }
}

pub(crate) fn check_inputs(inputs: &[[f64; INPUT_DIM]]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Window("empty input sequence".into()));
    }
    if inputs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input sequence"));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Recurrent state plus the activations of the most recent step.
pub(crate) struct Step {
    pub z: Vec<f64>,
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl Step {
    pub fn new(hidden: usize, cols: usize) -> Self {
        Self {
            z: vec![0.0; cols],
            gates: vec![0.0; 4 * hidden],
            c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }

    /// One LSTM step. After the call `gates` holds the activated gate values
    /// (i, f, o, g blocks) and `z` the concatenated `[x; h_prev]`.
    pub fn advance(&mut self, model: &LstmModel, x: &[f64; INPUT_DIM]) {
        let h = model.hidden;
        let cols = model.cols();
        self.z[..INPUT_DIM].copy_from_slice(x);
        self.z[INPUT_DIM..].copy_from_slice(&self.h);
        let w = model.gate_weights();
        let b = model.gate_biases();
        for (r, a) in self.gates.iter_mut().enumerate() {
            let pre = b[r] + dot(&w[r * cols..(r + 1) * cols], &self.z);
            *a = if r < 3 * h { sigmoid(pre) } else { pre.tanh() };
        }
        let (ifo, g) = self.gates.split_at(3 * h);
        for j in 0..h {
            let (i, f, o) = (ifo[j], ifo[h + j], ifo[2 * h + j]);
            self.c[j] = f * self.c[j] + i * g[j];
            self.h[j] = o * self.c[j].tanh();
        }
    }
}

/// Batch inference over windows, in input order.
pub fn predict_batch(model: &LstmModel, windows: &[Window]) -> Result<Vec<f64>> {
    predict_batch_with(model, windows, Exec::default())
}

pub fn predict_batch_with(model: &LstmModel, windows: &[Window], exec: Exec) -> Result<Vec<f64>> {
    exec::map_ordered(exec, windows, |_, w| model.predict(w))
        .into_iter()
        .collect()
}

/// Probability cut-off for raising an alarm. Ties alarm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlarmThreshold(f64);

impl AlarmThreshold {
    pub fn new(threshold: f64) -> Result<Self> {
        if threshold > 0.0 && threshold < 1.0 {
            Ok(Self(threshold))
        } else {
            Err(Error::Config(format!(
                "alarm threshold {threshold} outside (0, 1)"
            )))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn alarm(&self, probability: f64) -> bool {
        probability >= self.0
    }
}

impl Default for AlarmThreshold {
    fn default() -> Self {
        Self(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};

    fn random_inputs(seed: u64, len: usize) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| [rng.gen(), rng.gen()]).collect()
    }

    /// Independent step-by-step recurrence with separately named matrices.
    fn oracle_forward(m: &LstmModel, xs: &[[f64; 2]]) -> f64 {
        let hd = m.hidden_dim();
        let p = m.params();
        let w = |g: Gate, r: usize, c: usize| p[m.weight_index(g, r, c)];
        let b = |g: Gate, r: usize| p[m.bias_index(g, r)];
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        for x in xs {
            let mut input = vec![0.0; hd];
            let mut forget = vec![0.0; hd];
            let mut output = vec![0.0; hd];
            let mut cand = vec![0.0; hd];
            for r in 0..hd {
                let lin = |g: Gate| {
                    let mut s = b(g, r) + w(g, r, 0) * x[0] + w(g, r, 1) * x[1];
                    for k in 0..hd {
                        s += w(g, r, 2 + k) * h[k];
                    }
                    s
                };
                input[r] = 1.0 / (1.0 + (-lin(Gate::Input)).exp());
                forget[r] = 1.0 / (1.0 + (-lin(Gate::Forget)).exp());
                output[r] = 1.0 / (1.0 + (-lin(Gate::Output)).exp());
                cand[r] = lin(Gate::Candidate).tanh();
            }
            for r in 0..hd {
                c[r] = forget[r] * c[r] + input[r] * cand[r];
                h[r] = output[r] * c[r].tanh();
            }
        }
        let mut logit = p[m.readout_bias_index()];
        for r in 0..hd {
            logit += p[m.readout_index(r)] * h[r];
        }
        1.0 / (1.0 + (-logit).exp())
    }

    #[test]
    fn zero_model_gives_half() {
        let m = LstmModel::zeros(DEFAULT_HIDDEN);
        assert_eq!(m.forward(&random_inputs(1, 50)).unwrap(), 0.5);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        for seed in 0..5 {
            let m = LstmModel::init(4, seed);
            let xs = random_inputs(100 + seed, 50);
            let p = m.forward(&xs).unwrap();
            let q = oracle_forward(&m, &xs);
            assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn forward_is_deterministic_and_stateless() {
        let m = LstmModel::init(16, 42);
        let a = random_inputs(7, 50);
        let b = random_inputs(8, 50);
        let pa = m.forward(&a).unwrap();
        let _ = m.forward(&b).unwrap();
        assert_eq!(pa.to_bits(), m.forward(&a).unwrap().to_bits());
        assert_eq!(
            pa.to_bits(),
            LstmModel::init(16, 42).forward(&a).unwrap().to_bits()
        );
    }

    #[test]
    fn rejects_non_finite_input() {
        let m = LstmModel::init(4, 0);
        let mut xs = random_inputs(0, 50);
        xs[10][1] = f64::NAN;
        assert!(matches!(m.forward(&xs), Err(Error::NonFinite(_))));
        assert!(m.forward(&[]).is_err());
    }

    #[test]
    fn layout_and_init() {
        let m = LstmModel::init(16, 3);
        assert_eq!(m.params().len(), 4 * 16 * 18 + 4 * 16 + 16 + 1);
        assert_eq!(m.readout_bias_index(), m.params().len() - 1);
        assert_eq!(m.readout_index(0), m.bias_index(Gate::Candidate, 15) + 1);
        for j in 0..16 {
            assert_eq!(m.params()[m.bias_index(Gate::Forget, j)], 1.0);
        }
        let bound = 0.25;
        assert!(m
            .params()
            .iter()
            .enumerate()
            .filter(
                |(i, _)| !(m.bias_index(Gate::Forget, 0)..=m.bias_index(Gate::Forget, 15))
                    .contains(i)
            )
            .all(|(_, p)| p.abs() < bound));
        assert!(LstmModel::from_params(16, vec![0.0; 3]).is_err());
    }

    #[test]
    fn thresholds() {
        let t = AlarmThreshold::default();
        assert!(!t.alarm(0.026));
        assert!(!t.alarm(0.16));
        assert!(t.alarm(0.5));
        assert!(t.alarm(0.93));
        assert!(AlarmThreshold::new(0.0).is_err());
        assert!(AlarmThreshold::new(1.0).is_err());
        assert!(AlarmThreshold::new(f64::NAN).is_err());
    }

    #[test]
    fn batch_modes_agree() {
        use crate::features::{windows, BehaviorSample};
        let samples: Vec<_> = (0..120u32)
            .map(|i| BehaviorSample {
                t_ms: u64::from(i) * 100,
                eye_closure_ms: (i * 97) % 10_000,
                since_yawn_ms: (i * 1000) % 120_000,
            })
            .collect();
        let ws = windows(&samples).unwrap();
        let m = LstmModel::init(8, 1);
        let a = predict_batch_with(&m, &ws, Exec::Sequential).unwrap();
        let b = predict_batch_with(&m, &ws, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn probabilities_in_open_unit_interval(seed in any::<u64>(), len in 1usize..60) {
            let m = LstmModel::init(6, seed);
            let p = m.forward(&random_inputs(seed ^ 0xabc, len)).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }

        #[test]
        fn gate_activations_bounded(seed in any::<u64>()) {
            let m = LstmModel::init(5, seed);
            let mut step = Step::new(5, m.cols());
            for x in random_inputs(seed, 50) {
                step.advance(&m, &x);
                let (sig, cand) = step.gates.split_at(15);
                prop_assert!(sig.iter().all(|&a| a > 0.0 && a < 1.0));
                prop_assert!(cand.iter().all(|&g| g > -1.0 && g < 1.0));
            }
        }
    }
}
