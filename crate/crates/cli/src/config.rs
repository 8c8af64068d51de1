use std::path::{Path, PathBuf};

use pvm_core::{FoveaMode, LearningConfig, ModelConfig, ModelTag, SaccadeConfig, Scenario};
use serde::Deserialize;

use crate::CliError;

/// Everything a command needs, read from a TOML file and then overridden by
/// command-line flags. Missing keys take the library defaults.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub learning: LearningSection,
    pub saccade: SaccadeSection,
    pub io: IoSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    pub view_w: usize,
    pub view_h: usize,
    pub level_grids: Vec<usize>,
    pub hidden_dim: usize,
    /// Side of the subdivided central block; 0 means half the input grid.
    pub fovea_k: usize,
    pub corner_contact: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::default();
        Self {
            kind: "base".into(),
            view_w: d.view_w,
            view_h: d.view_h,
            level_grids: d.level_grids,
            hidden_dim: d.hidden_dim,
            fovea_k: 0,
            corner_contact: d.corner_contact,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSection {
    pub learning_rate: f64,
    pub tau_integral: f64,
    pub seed: u64,
}

impl Default for LearningSection {
    fn default() -> Self {
        let d = LearningConfig::default();
        Self { learning_rate: d.learning_rate, tau_integral: d.tau_integral, seed: d.seed }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaccadeSection {
    pub omega_dt: f64,
    pub gamma: f64,
    pub tau_threshold: f64,
    pub jitter: i64,
    pub window_w: usize,
    pub window_h: usize,
}

impl Default for SaccadeSection {
    fn default() -> Self {
        let d = SaccadeConfig::default();
        Self {
            omega_dt: d.omega_dt,
            gamma: d.gamma,
            tau_threshold: d.tau_threshold,
            jitter: d.jitter,
            window_w: d.window_w,
            window_h: d.window_h,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// Directory of PNG/PPM frames or an RGB8 container.
    pub frames: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Training frames for `train`, trace length for `run --trace`.
    pub n_frames: usize,
    pub n_trials: usize,
    /// Seeds the saccade controller, the trial seeds and synthetic scenes.
    pub seed: u64,
    /// Scene synthesized when no frames are given: `moving_texture`,
    /// `two_frame_alternator`, `uniform_gray` or `flicker_patch`.
    pub scenario: String,
    pub scenario_frames: usize,
    /// Frame size for the scenarios other than `moving_texture`; 0 means
    /// the model view size.
    pub scenario_w: usize,
    pub scenario_h: usize,
    /// Rows of progress.csv average this many training frames.
    pub progress_every: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            n_frames: 1000,
            n_trials: 100,
            seed: 0,
            scenario: "moving_texture".into(),
            scenario_frames: 300,
            scenario_w: 0,
            scenario_h: 0,
            progress_every: 100,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn model_tag(&self) -> Result<ModelTag, CliError> {
        self.model.kind.parse().map_err(CliError::usage)
    }

    pub fn model_config(&self) -> Result<ModelConfig, CliError> {
        let m = &self.model;
        let mut cfg = ModelConfig {
            view_w: m.view_w,
            view_h: m.view_h,
            level_grids: m.level_grids.clone(),
            fovea: FoveaMode::None,
            hidden_dim: m.hidden_dim,
            corner_contact: m.corner_contact,
        };
        cfg.fovea = match self.model_tag()? {
            ModelTag::Base => FoveaMode::None,
            ModelTag::Foveated if m.fovea_k == 0 => FoveaMode::Central(cfg.default_fovea_k()),
            ModelTag::Foveated => FoveaMode::Central(m.fovea_k),
            ModelTag::Uhr => FoveaMode::Full,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn learning_config(&self) -> Result<LearningConfig, CliError> {
        let l = &self.learning;
        let cfg = LearningConfig { learning_rate: l.learning_rate, tau_integral: l.tau_integral, seed: l.seed };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Saccade settings for a model with the given view.
    pub fn saccade_config(&self, view: (usize, usize)) -> Result<SaccadeConfig, CliError> {
        let s = &self.saccade;
        let cfg = SaccadeConfig {
            omega_dt: s.omega_dt,
            gamma: s.gamma,
            tau_threshold: s.tau_threshold,
            jitter: s.jitter,
            window_w: s.window_w,
            window_h: s.window_h,
            view_w: view.0,
            view_h: view.1,
            seed: self.experiment.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scenario(&self, view: (usize, usize)) -> Result<Scenario, CliError> {
        let e = &self.experiment;
        let w = if e.scenario_w == 0 { view.0 } else { e.scenario_w };
        let h = if e.scenario_h == 0 { view.1 } else { e.scenario_h };
        let n_frames = e.scenario_frames;
        Ok(match e.scenario.as_str() {
            "moving_texture" => Scenario::desk_moving_texture(n_frames),
            "two_frame_alternator" => Scenario::TwoFrameAlternator { width: w, height: h, n_frames },
            "uniform_gray" => Scenario::UniformGray { width: w, height: h, n_frames },
            "flicker_patch" => {
                let size = (w.min(h) / 4).max(1);
                Scenario::FlickerPatch { width: w, height: h, n_frames, x: w - size, y: 0, size, period: 2, checker: true }
            }
            other => return Err(CliError::usage(format!("unknown scenario `{other}`"))),
        })
    }

    /// Checks that every path the config names exists.
    pub fn validate_paths(&self) -> Result<(), CliError> {
        if let Some(p) = &self.io.frames {
            require_exists(p, "frames")?;
        }
        Ok(())
    }
}

pub fn require_exists(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} path {} does not exist", path.display())))
    }
}
