//! Lockstep stepping of a whole hierarchy.
//!
//! Every timestep runs in three phases separated by barriers:
//!
//! 1. each unit gathers its signal (input units read their tile of the
//!    subframe, higher units read their inferiors' hidden states from the
//!    previous step) and folds it into its derivative/integral/error features;
//! 2. each unit assembles its context from the previous-step hidden snapshot,
//!    takes the delayed training step when training, and runs forward;
//! 3. the new hidden states become the snapshot for the next step.
//!
//! Cross-unit reads only touch the immutable snapshot, so the per-unit work
//! of a phase may run in any order or on any number of threads and the
//! result is bit-identical to sequential execution in unit id order.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};

use std::io::Write;

use crate::error::{config_err, Result};
#[cfg(test)]
use crate::error::PvmError;
use crate::par;
use crate::topology::{HierarchyTopology, ModelConfig};
use crate::unit::{self, LearningConfig, UnitState, UnitWeights};
use crate::vision_io::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Frozen,
}

/// A complete model: wiring, parameters and activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub topology: HierarchyTopology,
    pub learning: LearningConfig,
    pub weights: Vec<UnitWeights>,
    pub states: Vec<UnitState>,
    pub frame_counter: u64,
    pub mode: Mode,
}

/// What one timestep produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Next-frame prediction of the input level, laid out over the view.
    pub prediction_map: Frame,
    /// Per-pixel squared error between the standing prediction and the
    /// subframe that arrived.
    pub error_map: Frame,
    /// Hidden state of every unit after this step.
    pub hidden_snapshot: Vec<Vec<f64>>,
    /// Mean squared prediction error per level.
    pub level_errors: Vec<f64>,
}

impl StepOutput {
    pub fn mean_input_error(&self) -> f64 {
        self.level_errors[0]
    }
}

impl ModelState {
    /// Builds the topology and draws fresh weights.
    pub fn new(config: &ModelConfig, learning: LearningConfig) -> Result<Self> {
        learning.validate()?;
        let topology = HierarchyTopology::build(config)?;
        Ok(Self::from_topology(topology, learning))
    }

    pub fn from_topology(topology: HierarchyTopology, learning: LearningConfig) -> Self {
        let weights = topology.units.iter().map(|s| unit::init_weights(s, learning.seed)).collect();
        let states = topology.units.iter().map(UnitState::new).collect();
        Self {
            topology,
            learning,
            weights,
            states,
            frame_counter: 0,
            mode: Mode::Training,
        }
    }

    pub fn view_size(&self) -> (usize, usize) {
        (self.topology.config.view_w, self.topology.config.view_h)
    }

    /// Advances one timestep, spreading units over the current rayon pool.
    pub fn step(&mut self, subframe: &Frame) -> Result<StepOutput> {
        self.check_subframe(subframe)?;
        let ctx = self.phase_context();
        let snapshot = self.hidden_snapshot();
        let topo = &self.topology;

        let errors = par::map_indexed_mut(&mut self.states, |id, state| {
            gather_and_precompute(topo, &snapshot, subframe, ctx.tau, id, state)
        });
        let squared_errors = first_error(errors)?;

        let mut slots: Vec<(&mut UnitWeights, &mut UnitState)> =
            self.weights.iter_mut().zip(self.states.iter_mut()).collect();
        let results = par::map_indexed_mut(&mut slots, |id, (weights, state)| {
            contextualize_train_forward(topo, &snapshot, ctx, id, weights, state)
        });
        first_error(results)?;

        Ok(self.publish(squared_errors))
    }

    /// Reference path: every unit on the calling thread in unit id order.
    pub fn step_sequential(&mut self, subframe: &Frame) -> Result<StepOutput> {
        let order: Vec<usize> = (0..self.topology.n_units()).collect();
        self.step_in_order(subframe, &order)
    }

    /// Sequential step visiting units in `order` within each phase. `order`
    /// must be a permutation of the unit ids.
    pub fn step_in_order(&mut self, subframe: &Frame, order: &[usize]) -> Result<StepOutput> {
        self.check_subframe(subframe)?;
        let n = self.topology.n_units();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&id| id >= n || std::mem::replace(&mut seen[id], true)) {
            return config_err("execution order is not a permutation of the unit ids");
        }
        let ctx = self.phase_context();
        let snapshot = self.hidden_snapshot();
        let topo = &self.topology;

        let mut squared_errors = vec![Vec::new(); n];
        for &id in order {
            squared_errors[id] =
                gather_and_precompute(topo, &snapshot, subframe, ctx.tau, id, &mut self.states[id])?;
        }
        for &id in order {
            contextualize_train_forward(topo, &snapshot, ctx, id, &mut self.weights[id], &mut self.states[id])?;
        }
        Ok(self.publish(squared_errors))
    }

    fn check_subframe(&self, subframe: &Frame) -> Result<()> {
        let (vw, vh) = self.view_size();
        if (subframe.width, subframe.height) != (vw, vh) || subframe.data.len() != vw * vh * 3 {
            return config_err(format!(
                "subframe is {}x{}, model view is {vw}x{vh}",
                subframe.width, subframe.height
            ));
        }
        Ok(())
    }

    fn phase_context(&self) -> PhaseContext {
        PhaseContext {
            tau: self.learning.tau_integral,
            learning_rate: self.learning.learning_rate,
            training: self.mode == Mode::Training,
        }
    }

    fn hidden_snapshot(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.hidden.clone()).collect()
    }

    fn publish(&mut self, squared_errors: Vec<Vec<f64>>) -> StepOutput {
        let (vw, vh) = self.view_size();
        self.frame_counter += 1;
        let hidden_snapshot: Vec<Vec<f64>> = self.states.iter().map(|s| s.hidden.clone()).collect();

        let mut prediction_map = Frame::filled(vw, vh, 0.0);
        let mut error_map = Frame::filled(vw, vh, 0.0);
        for id in self.topology.input_level().unit_ids() {
            let tile = self.topology.units[id].tile.expect("input units have tiles");
            let state = &self.states[id];
            let mut k = 0;
            for y in tile.y..tile.bottom() {
                for x in tile.x..tile.right() {
                    for c in 0..3 {
                        prediction_map.set(x, y, c, state.prediction[k]);
                        error_map.set(x, y, c, squared_errors[id][k]);
                        k += 1;
                    }
                }
            }
        }

        let level_errors = self
            .topology
            .levels
            .iter()
            .map(|level| {
                let (sum, n) = level.unit_ids().fold((0.0, 0usize), |(s, n), id| {
                    (s + squared_errors[id].iter().sum::<f64>(), n + squared_errors[id].len())
                });
                sum / n as f64
            })
            .collect();

        StepOutput { prediction_map, error_map, hidden_snapshot, level_errors }
    }
}

#[derive(Clone, Copy)]
struct PhaseContext {
    tau: f64,
    learning_rate: f64,
    training: bool,
}

/// Phase 1 for one unit. Returns the squared error of the standing
/// prediction against the signal that just arrived.
fn gather_and_precompute(
    topo: &HierarchyTopology,
    snapshot: &[Vec<f64>],
    subframe: &Frame,
    tau: f64,
    id: usize,
    state: &mut UnitState,
) -> Result<Vec<f64>> {
    let spec = &topo.units[id];
    let mut signal = Vec::with_capacity(spec.signal_dim);
    match spec.tile {
        Some(t) => subframe.read_rect(t.x, t.y, t.w, t.h, &mut signal),
        None => {
            for &inf in &topo.inferior[id] {
                signal.extend_from_slice(&snapshot[inf]);
            }
        }
    }
    state.precompute_features(&signal, tau)?;
    Ok(state.squared_error().collect())
}

/// Phase 2 for one unit.
fn contextualize_train_forward(
    topo: &HierarchyTopology,
    snapshot: &[Vec<f64>],
    ctx: PhaseContext,
    id: usize,
    weights: &mut UnitWeights,
    state: &mut UnitState,
) -> Result<()> {
    let spec = &topo.units[id];
    state.context.clear();
    for &src in &topo.context[id] {
        state.context.extend_from_slice(&snapshot[src]);
    }
    if ctx.training {
        unit::train_step(spec, weights, state, &state.signal, ctx.learning_rate)?;
    }
    unit::forward(spec, weights, state)
}

/// Lowest-id error, so failures are reported the same way regardless of
/// scheduling.
fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// Writes the per-level mean error trace as CSV:
/// `frame,level0,level1,...`.
pub struct LevelTraceWriter<W: Write> {
    out: W,
}

impl<W: Write> LevelTraceWriter<W> {
    pub fn new(mut out: W, n_levels: usize) -> Result<Self> {
        let header: Vec<String> = (0..n_levels).map(|l| format!("level{l}")).collect();
        writeln!(out, "frame,{}", header.join(","))?;
        Ok(Self { out })
    }

    pub fn record(&mut self, frame: usize, output: &StepOutput) -> Result<()> {
        let cols: Vec<String> = output.level_errors.iter().map(|e| e.to_string()).collect();
        writeln!(self.out, "{frame},{}", cols.join(","))?;
        Ok(())
    }
}
