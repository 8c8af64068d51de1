//! Predictive Vision Model (PVM) hierarchies coupled to an error-driven
//! saccade controller.
//!
//! - [`unit`]: a single predictive unit (three-layer sigmoid perceptron with
//!   derivative, integral, previous-error and context inputs, trained online).
//! - [`topology`]: hierarchy construction for uniform, foveated and uniform
//!   high resolution input levels.
//! - [`engine`]: lockstep stepping of the whole hierarchy and checkpoints.
//! - [`saccade`]: window error aggregation, fixation selection and the
//!   damped-oscillator view dynamics.
//! - [`vision_io`]: frames, loaders and synthetic scenarios.
//! - [`analysis`]: local image entropy and the model comparison protocol.
//!
//! With the default `parallel` feature the per-unit work of a timestep and
//! independent trials are spread over rayon worker threads. Results are
//! bit-identical to the sequential path, which is what you get with
//! `--no-default-features`.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod par;
pub mod saccade;
pub mod topology;
pub mod unit;
pub mod vision_io;

pub use analysis::{
    local_entropy_map, run_comparison, view_entropy, ComparisonReport, EntropyConfig, EntropyMap,
    ModelTag, TrialSummary,
};
pub use engine::{Mode, ModelState, StepOutput};
pub use error::{PvmError, Result};
pub use saccade::{SaccadeConfig, SaccadeRunner, TrialRecord, ViewState};
pub use topology::{FoveaMode, HierarchyTopology, ModelConfig, Rect};
pub use unit::{LearningConfig, UnitSpec, UnitState, UnitWeights};
pub use vision_io::{Frame, FrameSequence, Scenario};
