//! Error-driven saccades.
//!
//! Each frame the model sees a crop of the frame at the current view origin.
//! The squared prediction error is summed over every `window_w × window_h`
//! window of the view; when the largest window sum beats a running average
//! of past maxima, the fixation target moves to center the view on that
//! window. The view origin then follows a damped harmonic oscillator pulled
//! toward the fixation target, plus a small integer jitter.

use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{ModelState, StepOutput};
use crate::error::{config_err, PvmError, Result};
use crate::vision_io::Frame;

#[derive(Debug, Clone, PartialEq)]
pub struct SaccadeConfig {
    /// Product of the oscillator frequency and the timestep.
    pub omega_dt: f64,
    /// Damping; values just under 1 keep the motion underdamped.
    pub gamma: f64,
    /// Weight of the newest maximum in the threshold average.
    pub tau_threshold: f64,
    /// Jitter amplitude `l`; each axis moves by a uniform integer in `[−l, l]`.
    pub jitter: i64,
    pub window_w: usize,
    pub window_h: usize,
    pub view_w: usize,
    pub view_h: usize,
    pub seed: u64,
}

impl Default for SaccadeConfig {
    fn default() -> Self {
        Self {
            omega_dt: 0.8,
            gamma: 0.9,
            tau_threshold: 0.05,
            jitter: 1,
            window_w: 3,
            window_h: 3,
            view_w: 32,
            view_h: 32,
            seed: 0,
        }
    }
}

impl SaccadeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_dt.is_finite() && self.omega_dt > 0.0) {
            return config_err(format!("omega_dt must be > 0, got {}", self.omega_dt));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return config_err(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau_threshold) {
            return config_err(format!("tau_threshold must be in [0,1], got {}", self.tau_threshold));
        }
        if self.jitter < 0 {
            return config_err("jitter must be non-negative");
        }
        if self.window_w == 0 || self.window_h == 0 {
            return config_err("window must be non-empty");
        }
        if self.window_w > self.view_w || self.window_h > self.view_h {
            return config_err(format!(
                "window {}x{} larger than view {}x{}",
                self.window_w, self.window_h, self.view_w, self.view_h
            ));
        }
        Ok(())
    }
}

/// Largest legal view origin in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub max_x: i64,
    pub max_y: i64,
}

impl Bounds {
    pub fn new(frame_w: usize, frame_h: usize, view_w: usize, view_h: usize) -> Result<Self> {
        if frame_w < view_w || frame_h < view_h {
            return Err(PvmError::Input(format!(
                "frame {frame_w}x{frame_h} is smaller than the {view_w}x{view_h} view"
            )));
        }
        Ok(Self { max_x: (frame_w - view_w) as i64, max_y: (frame_h - view_h) as i64 })
    }

    fn clamp(&self, x: i64, y: i64) -> (i64, i64) {
        (x.clamp(0, self.max_x), y.clamp(0, self.max_y))
    }
}

/// Position history of the field of view, in frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewState {
    pub x: i64,
    pub x_prev: i64,
    pub y: i64,
    pub y_prev: i64,
    pub x_fix: i64,
    pub y_fix: i64,
    pub threshold: f64,
}

impl ViewState {
    /// At rest at `(x, y)`, fixating there, with a zero threshold.
    pub fn at(x: i64, y: i64) -> Self {
        Self { x, x_prev: x, y, y_prev: y, x_fix: x, y_fix: y, threshold: 0.0 }
    }
}

/// Sums the error map (all channels) over every window at stride 1 and
/// returns the largest sum with its window's top-left corner. Ties go to the
/// smallest `y`, then the smallest `x`.
pub fn window_error_map(error_map: &Frame, window_w: usize, window_h: usize) -> Result<(f64, (usize, usize))> {
    let (w, h) = (error_map.width, error_map.height);
    if window_w == 0 || window_h == 0 || window_w > w || window_h > h {
        return config_err(format!("window {window_w}x{window_h} does not fit the {w}x{h} view"));
    }
    let pixel: Vec<f64> = error_map.data.chunks_exact(3).map(|p| p[0] + p[1] + p[2]).collect();

    let nx = w - window_w + 1;
    let ny = h - window_h + 1;
    let mut rows = vec![0.0; h * nx];
    for y in 0..h {
        for x0 in 0..nx {
            rows[y * nx + x0] = pixel[y * w + x0..y * w + x0 + window_w].iter().sum();
        }
    }

    let mut best = (f64::NEG_INFINITY, (0, 0));
    for y0 in 0..ny {
        for x0 in 0..nx {
            let s: f64 = (y0..y0 + window_h).map(|y| rows[y * nx + x0]).sum();
            if s > best.0 {
                best = (s, (x0, y0));
            }
        }
    }
    Ok(best)
}

/// Retargets the fixation when `max_value` beats the threshold, then folds
/// `max_value` into the threshold average.
///
/// `argmax` is the view-local top-left of the winning window; the new target
/// is the origin that centers the view on that window.
pub fn update_fixation(
    view: &mut ViewState,
    max_value: f64,
    argmax: (usize, usize),
    config: &SaccadeConfig,
    bounds: Bounds,
) {
    if max_value > view.threshold {
        let cx = argmax.0 as i64 + (config.window_w / 2) as i64;
        let cy = argmax.1 as i64 + (config.window_h / 2) as i64;
        let fx = view.x + cx - (config.view_w / 2) as i64;
        let fy = view.y + cy - (config.view_h / 2) as i64;
        (view.x_fix, view.y_fix) = bounds.clamp(fx, fy);
    }
    let tau = config.tau_threshold;
    view.threshold = (1.0 - tau) * view.threshold + tau * max_value;
}

/// One oscillator update of a single axis, before jitter and clamping.
/// Rounds half away from zero.
pub fn oscillator_axis(current: i64, previous: i64, fixation: i64, omega_dt: f64, gamma: f64) -> i64 {
    let a2 = omega_dt * omega_dt;
    let num = (2.0 - a2) * current as f64 + (gamma * omega_dt - 1.0) * previous as f64 + a2 * fixation as f64;
    (num / (1.0 + gamma * omega_dt)).round() as i64
}

/// Moves the view one step toward the fixation target.
pub fn oscillator_step(view: &mut ViewState, config: &SaccadeConfig, bounds: Bounds, rng: &mut impl Rng) {
    let l = config.jitter;
    let nx = oscillator_axis(view.x, view.x_prev, view.x_fix, config.omega_dt, config.gamma)
        + rng.gen_range(-l..=l);
    let ny = oscillator_axis(view.y, view.y_prev, view.y_fix, config.omega_dt, config.gamma)
        + rng.gen_range(-l..=l);
    let (nx, ny) = bounds.clamp(nx, ny);
    view.x_prev = view.x;
    view.x = nx;
    view.y_prev = view.y;
    view.y = ny;
}

/// One row of a trial: the origin the frame was viewed at and the saccade
/// controller state after processing it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub x: i64,
    pub y: i64,
    pub x_fix: i64,
    pub y_fix: i64,
    pub max_err: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialRecord {
    pub rows: Vec<FrameRecord>,
}

impl TrialRecord {
    pub const CSV_HEADER: &'static str = "frame,x,y,x_fix,y_fix,max_err,threshold";

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.frame, r.x, r.y, r.x_fix, r.y_fix, r.max_err, r.threshold
            );
        }
        s
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        out.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Drives a model over frames, one saccade update per frame.
#[derive(Debug, Clone)]
pub struct SaccadeRunner {
    pub config: SaccadeConfig,
    pub view: ViewState,
    pub bounds: Bounds,
    /// Keep the view where it is (fixation and threshold still update).
    pub static_view: bool,
    rng: ChaCha8Rng,
    frame_idx: usize,
}

impl SaccadeRunner {
    /// Starts at an explicit origin.
    pub fn new(config: SaccadeConfig, frame_w: usize, frame_h: usize, start: (i64, i64)) -> Result<Self> {
        config.validate()?;
        let bounds = Bounds::new(frame_w, frame_h, config.view_w, config.view_h)?;
        let (x, y) = bounds.clamp(start.0, start.1);
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self { config, view: ViewState::at(x, y), bounds, static_view: false, rng, frame_idx: 0 })
    }

    /// Starts at an origin drawn uniformly from the legal range using the
    /// config seed; the same stream then drives the jitter.
    pub fn with_random_origin(config: SaccadeConfig, frame_w: usize, frame_h: usize) -> Result<Self> {
        let mut runner = Self::new(config, frame_w, frame_h, (0, 0))?;
        let x = runner.rng.gen_range(0..=runner.bounds.max_x);
        let y = runner.rng.gen_range(0..=runner.bounds.max_y);
        runner.view = ViewState::at(x, y);
        Ok(runner)
    }

    /// Center of the view in frame coordinates.
    pub fn center(&self) -> (i64, i64) {
        (self.view.x + (self.config.view_w / 2) as i64, self.view.y + (self.config.view_h / 2) as i64)
    }

    pub fn step(&mut self, model: &mut ModelState, frame: &Frame) -> Result<(FrameRecord, StepOutput)> {
        if model.view_size() != (self.config.view_w, self.config.view_h) {
            return config_err(format!(
                "model view {:?} differs from saccade view {}x{}",
                model.view_size(),
                self.config.view_w,
                self.config.view_h
            ));
        }
        let bounds = Bounds::new(frame.width, frame.height, self.config.view_w, self.config.view_h)?;
        if bounds != self.bounds {
            return Err(PvmError::Input("frame size changed mid-run".into()));
        }
        let (x, y) = (self.view.x, self.view.y);
        let subframe = frame.crop(x as usize, y as usize, self.config.view_w, self.config.view_h);
        let out = model.step(&subframe)?;
        let (max_err, argmax) = window_error_map(&out.error_map, self.config.window_w, self.config.window_h)?;
        update_fixation(&mut self.view, max_err, argmax, &self.config, self.bounds);
        if !self.static_view {
            oscillator_step(&mut self.view, &self.config, self.bounds, &mut self.rng);
        }
        let record = FrameRecord {
            frame: self.frame_idx,
            x,
            y,
            x_fix: self.view.x_fix,
            y_fix: self.view.y_fix,
            max_err,
            threshold: self.view.threshold,
        };
        self.frame_idx += 1;
        Ok((record, out))
    }
}

/// Runs the saccade loop over `frames` from a seeded random origin.
pub fn run_saccade_loop(model: &mut ModelState, frames: &[Frame], config: &SaccadeConfig) -> Result<TrialRecord> {
    let Some(first) = frames.first() else {
        return Ok(TrialRecord::default());
    };
    let mut runner = SaccadeRunner::with_random_origin(config.clone(), first.width, first.height)?;
    let mut record = TrialRecord::default();
    for frame in frames {
        let (row, _) = runner.step(model, frame)?;
        record.rows.push(row);
    }
    Ok(record)
}

/// Trains `model` for `n_frames` frames, cycling through `frames`, while the
/// saccade loop moves the view (unless `static_view`). `on_step` sees every
/// frame's record and step output.
pub fn train_with_saccades(
    model: &mut ModelState,
    frames: &[Frame],
    n_frames: usize,
    config: &SaccadeConfig,
    static_view: bool,
    mut on_step: impl FnMut(&FrameRecord, &StepOutput),
) -> Result<()> {
    if n_frames == 0 {
        return Ok(());
    }
    let Some(first) = frames.first() else {
        return Err(PvmError::Input("no frames to train on".into()));
    };
    let mut runner = if static_view {
        let bounds = Bounds::new(first.width, first.height, config.view_w, config.view_h)?;
        let mut r = SaccadeRunner::new(config.clone(), first.width, first.height, (bounds.max_x / 2, bounds.max_y / 2))?;
        r.static_view = true;
        r
    } else {
        SaccadeRunner::with_random_origin(config.clone(), first.width, first.height)?
    };
    model.mode = crate::engine::Mode::Training;
    for t in 0..n_frames {
        let (row, out) = runner.step(model, &frames[t % frames.len()])?;
        on_step(&row, &out);
    }
    Ok(())
}

/// Copy of `frame` with the view rectangle outlined in red.
pub fn overlay(frame: &Frame, row: &FrameRecord, view_w: usize, view_h: usize) -> Frame {
    let mut f = frame.clone();
    f.draw_rect_outline(row.x as usize, row.y as usize, view_w, view_h, [1.0, 0.0, 0.0]);
    f
}
