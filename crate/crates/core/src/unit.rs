//! A single predictive unit.
//!
//! Each unit is a three-layer perceptron with logistic activations. Its input
//! is the concatenation `[P; D; I; E; C]` of the current signal, the temporal
//! derivative, the running integral, the previous prediction error and the
//! context gathered from other units' hidden states. The output layer predicts
//! the signal the unit will receive on the next timestep.

#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, PvmError, Result};
use crate::topology::Rect;

/// Wiring and dimensions of one unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSpec {
    pub unit_id: usize,
    /// 0 is the input level.
    pub level: usize,
    pub signal_dim: usize,
    pub hidden_dim: usize,
    pub context_dim: usize,
    /// View-local pixel rectangle, present only on input-level units.
    pub tile: Option<Rect>,
}

impl UnitSpec {
    /// Width of the concatenated perceptron input `[P; D; I; E; C]`.
    pub fn input_dim(&self) -> usize {
        4 * self.signal_dim + self.context_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal_dim == 0 || self.hidden_dim == 0 {
            return config_err(format!("unit {}: zero signal or hidden dimension", self.unit_id));
        }
        if self.context_dim < self.hidden_dim {
            return config_err(format!(
                "unit {}: context ({}) must include at least its own hidden state ({})",
                self.unit_id, self.context_dim, self.hidden_dim
            ));
        }
        match (self.level, &self.tile) {
            (0, None) => config_err(format!("input unit {} has no tile", self.unit_id)),
            (0, Some(t)) if t.area() == 0 => {
                config_err(format!("input unit {} has an empty tile", self.unit_id))
            }
            (l, Some(_)) if l > 0 => {
                config_err(format!("unit {} above the input level has a tile", self.unit_id))
            }
            _ => Ok(()),
        }
    }
}

/// Parameters of one unit. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitWeights {
    /// `hidden_dim × input_dim`
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// `signal_dim × hidden_dim`
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl UnitWeights {
    pub fn zeros(spec: &UnitSpec) -> Self {
        Self {
            hidden_weights: vec![0.0; spec.hidden_dim * spec.input_dim()],
            hidden_bias: vec![0.0; spec.hidden_dim],
            output_weights: vec![0.0; spec.signal_dim * spec.hidden_dim],
            output_bias: vec![0.0; spec.signal_dim],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hidden_weights
            .iter()
            .chain(&self.hidden_bias)
            .chain(&self.output_weights)
            .chain(&self.output_bias)
            .all(|w| w.is_finite())
    }

    /// Total parameter count.
    pub fn len(&self) -> usize {
        self.hidden_weights.len()
            + self.hidden_bias.len()
            + self.output_weights.len()
            + self.output_bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Learning hyper-parameters shared by all units of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningConfig {
    pub learning_rate: f64,
    /// Decay of the integral input, `I ← τ·I + (1−τ)·P`.
    pub tau_integral: f64,
    pub seed: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            tau_integral: 0.99,
            seed: 0,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return config_err(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.tau_integral) {
            return config_err(format!("tau_integral must be in [0,1], got {}", self.tau_integral));
        }
        Ok(())
    }
}

/// Per-timestep activations of one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitState {
    /// Current signal `P_t`.
    pub signal: Vec<f64>,
    /// Previous signal `P_{t-1}`.
    pub prev_signal: Vec<f64>,
    pub integral: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Shifted previous prediction error `0.5 + (P* − P)/2`.
    pub error: Vec<f64>,
    pub context: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Prediction of the next signal.
    pub prediction: Vec<f64>,
    /// Input vector of the forward pass that produced `prediction`.
    pub last_input: Vec<f64>,
    /// Set once the first signal has arrived.
    pub primed: bool,
    /// Set once `last_input` holds a real forward pass.
    pub has_input: bool,
}

impl UnitState {
    pub fn new(spec: &UnitSpec) -> Self {
        let s = spec.signal_dim;
        Self {
            signal: vec![0.0; s],
            prev_signal: vec![0.0; s],
            integral: vec![0.0; s],
            derivative: vec![0.5; s],
            error: vec![0.5; s],
            context: vec![0.0; spec.context_dim],
            hidden: vec![0.0; spec.hidden_dim],
            prediction: vec![0.0; s],
            last_input: vec![0.0; spec.input_dim()],
            primed: false,
            has_input: false,
        }
    }

    /// Folds a newly arrived signal into the derivative, integral and
    /// previous-error features.
    ///
    /// On the very first call the previous signal, prediction and integral
    /// are seeded with `new_signal`, so the first derivative and error are
    /// exactly 0.5 and the first integral equals the signal.
    pub fn precompute_features(&mut self, new_signal: &[f64], tau: f64) -> Result<()> {
        if new_signal.len() != self.signal.len() {
            return config_err(format!(
                "signal length {} does not match signal_dim {}",
                new_signal.len(),
                self.signal.len()
            ));
        }
        if !self.primed {
            self.signal.copy_from_slice(new_signal);
            self.prediction.copy_from_slice(new_signal);
            self.integral.copy_from_slice(new_signal);
            self.primed = true;
        }
        for k in 0..new_signal.len() {
            let p = new_signal[k];
            self.integral[k] = tau * self.integral[k] + (1.0 - tau) * p;
            self.derivative[k] = 0.5 + (p - self.signal[k]) / 2.0;
            self.error[k] = 0.5 + (self.prediction[k] - p) / 2.0;
            self.prev_signal[k] = self.signal[k];
            self.signal[k] = p;
        }
        Ok(())
    }

    /// Squared error between the standing prediction and the current signal.
    pub fn squared_error(&self) -> impl Iterator<Item = f64> + '_ {
        self.prediction
            .iter()
            .zip(&self.signal)
            .map(|(p, s)| (p - s) * (p - s))
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Writes `[P; D; I; E; C]` into `out`.
fn assemble_input(state: &UnitState, out: &mut [f64]) {
    let s = state.signal.len();
    out[..s].copy_from_slice(&state.signal);
    out[s..2 * s].copy_from_slice(&state.derivative);
    out[2 * s..3 * s].copy_from_slice(&state.integral);
    out[3 * s..4 * s].copy_from_slice(&state.error);
    out[4 * s..].copy_from_slice(&state.context);
}

/// Hidden and output activations for a given input.
fn activations(spec: &UnitSpec, w: &UnitWeights, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n_in = spec.input_dim();
    let hidden: Vec<f64> = (0..spec.hidden_dim)
        .map(|j| {
            let row = &w.hidden_weights[j * n_in..(j + 1) * n_in];
            let z = row.iter().zip(input).fold(w.hidden_bias[j], |acc, (a, b)| acc + a * b);
            sigmoid(z)
        })
        .collect();
    let output: Vec<f64> = (0..spec.signal_dim)
        .map(|i| {
            let row = &w.output_weights[i * spec.hidden_dim..(i + 1) * spec.hidden_dim];
            let z = row.iter().zip(&hidden).fold(w.output_bias[i], |acc, (a, b)| acc + a * b);
            sigmoid(z)
        })
        .collect();
    (hidden, output)
}

/// Computes the hidden state and the next-signal prediction from the current
/// features and context, recording the input for the delayed training step.
pub fn forward(spec: &UnitSpec, weights: &UnitWeights, state: &mut UnitState) -> Result<()> {
    let mut input = std::mem::take(&mut state.last_input);
    input.resize(spec.input_dim(), 0.0);
    assemble_input(state, &mut input);
    let (hidden, output) = activations(spec, weights, &input);
    if !hidden.iter().chain(&output).all(|v| v.is_finite()) {
        state.last_input = input;
        return Err(PvmError::Numeric {
            unit_id: spec.unit_id,
            what: "non-finite activation",
        });
    }
    state.hidden = hidden;
    state.prediction = output;
    state.last_input = input;
    state.has_input = true;
    Ok(())
}

/// Gradient of `Σ(P* − target)²/2` with respect to every parameter, for the
/// forward pass driven by `input`.
pub fn gradients(spec: &UnitSpec, weights: &UnitWeights, input: &[f64], target: &[f64]) -> UnitWeights {
    let (hidden, output) = activations(spec, weights, input);
    let h = spec.hidden_dim;
    let n_in = spec.input_dim();

    let out_delta: Vec<f64> = output
        .iter()
        .zip(target)
        .map(|(&y, &t)| (y - t) * y * (1.0 - y))
        .collect();

    let mut grad = UnitWeights::zeros(spec);
    for (i, &d) in out_delta.iter().enumerate() {
        grad.output_bias[i] = d;
        for j in 0..h {
            grad.output_weights[i * h + j] = d * hidden[j];
        }
    }
    for j in 0..h {
        let back: f64 = out_delta
            .iter()
            .enumerate()
            .map(|(i, d)| weights.output_weights[i * h + j] * d)
            .sum();
        let d = back * hidden[j] * (1.0 - hidden[j]);
        grad.hidden_bias[j] = d;
        for k in 0..n_in {
            grad.hidden_weights[j * n_in + k] = d * input[k];
        }
    }
    grad
}

/// One online SGD step pairing the previous forward pass (`last_input`) with
/// the signal that actually arrived. A no-op before the first forward pass.
pub fn train_step(
    spec: &UnitSpec,
    weights: &mut UnitWeights,
    state: &UnitState,
    target: &[f64],
    learning_rate: f64,
) -> Result<()> {
    if !state.has_input || learning_rate == 0.0 {
        return Ok(());
    }
    let grad = gradients(spec, weights, &state.last_input, target);
    let apply = |w: &mut [f64], g: &[f64]| {
        for (w, g) in w.iter_mut().zip(g) {
            *w -= learning_rate * g;
        }
    };
    apply(&mut weights.output_weights, &grad.output_weights);
    apply(&mut weights.output_bias, &grad.output_bias);
    apply(&mut weights.hidden_weights, &grad.hidden_weights);
    apply(&mut weights.hidden_bias, &grad.hidden_bias);
    if !weights.is_finite() {
        return Err(PvmError::Numeric {
            unit_id: spec.unit_id,
            what: "non-finite weight after update",
        });
    }
    Ok(())
}

/// Uniform initialization in `±1/√fan_in` per layer, from a stream derived
/// from the master seed and the unit id.
pub fn init_weights(spec: &UnitSpec, seed: u64) -> UnitWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(spec.unit_id as u64);

    let mut w = UnitWeights::zeros(spec);
    let hidden_bound = 1.0 / (spec.input_dim() as f64).sqrt();
    let output_bound = 1.0 / (spec.hidden_dim as f64).sqrt();
    for v in w.hidden_weights.iter_mut().chain(w.hidden_bias.iter_mut()) {
        *v = rng.gen_range(-hidden_bound..=hidden_bound);
    }
    for v in w.output_weights.iter_mut().chain(w.output_bias.iter_mut()) {
        *v = rng.gen_range(-output_bound..=output_bound);
    }
    w
}
