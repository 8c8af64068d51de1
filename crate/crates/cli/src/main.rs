//! `pvm`: build, train, run and compare saccading PVM models.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 data error, 4 numeric
//! fault.

mod config;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pvm_core::engine::{load_checkpoint, save_checkpoint, LevelTraceWriter};
use pvm_core::saccade::{overlay, train_with_saccades};
use pvm_core::vision_io::{load_sequence, synth_video, write_rgb8};
use pvm_core::{
    run_comparison, EntropyConfig, FoveaMode, FrameSequence, Mode, ModelState, ModelTag, PvmError, SaccadeRunner,
    TrialRecord,
};

use config::{require_exists, RunConfig};

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<PvmError> for CliError {
    fn from(e: PvmError) -> Self {
        let code = match e {
            PvmError::Config(_) => 2,
            PvmError::Input(_) | PvmError::Checkpoint(_) | PvmError::Io(_) => 3,
            PvmError::Numeric { .. } => 4,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        PvmError::Io(e).into()
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "pvm", version, about = "Predictive Vision Model with error-driven saccades")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a model with fresh weights and write its checkpoint.
    Build(Common),
    /// Train a checkpoint on a frame sequence while it saccades.
    Train(Common),
    /// Run a frozen model's saccade loop and record its trajectory.
    Run(Common),
    /// Compare models by the entropy of what they look at.
    Compare(Common),
    /// Write the configured synthetic scene as an RGB8 container.
    Synth(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Base,
    Foveated,
    Uhr,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Directory of PNG/PPM frames or an RGB8 container. Without it the
    /// configured scenario is synthesized.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Checkpoint to read, or to write for `build`. Repeat for `compare`.
    #[arg(long)]
    checkpoint: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_frames: Option<usize>,
    #[arg(long)]
    n_trials: Option<usize>,
    /// Overrides both the weight seed and the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Repeat the first frame and record the view-center trajectory.
    #[arg(long)]
    trace: bool,
    /// Also write every frame with the view rectangle drawn on it.
    #[arg(long)]
    overlays: bool,
    /// Train on a fixed central window instead of saccading.
    #[arg(long)]
    static_view: bool,
}

impl Common {
    fn run_config(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.model {
            cfg.model.kind = match m {
                ModelArg::Base => "base",
                ModelArg::Foveated => "foveated",
                ModelArg::Uhr => "uhr",
            }
            .into();
        }
        if let Some(f) = &self.frames {
            cfg.io.frames = Some(f.clone());
        }
        if let Some(o) = &self.out {
            cfg.io.out = Some(o.clone());
        }
        if let Some(n) = self.n_frames {
            cfg.experiment.n_frames = n;
        }
        if let Some(n) = self.n_trials {
            cfg.experiment.n_trials = n;
        }
        if let Some(s) = self.seed {
            cfg.learning.seed = s;
            cfg.experiment.seed = s;
        }
        cfg.validate_paths()?;
        Ok(cfg)
    }

    fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
        let dir = cfg.io.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn single_checkpoint(&self) -> CliResult<&Path> {
        match self.checkpoint.as_slice() {
            [one] => {
                require_exists(one, "checkpoint")?;
                Ok(one)
            }
            [] => Err(CliError::usage("--checkpoint is required")),
            _ => Err(CliError::usage("exactly one --checkpoint expected")),
        }
    }
}

fn frames_for(cfg: &RunConfig, view: (usize, usize)) -> CliResult<FrameSequence> {
    match &cfg.io.frames {
        Some(p) => Ok(load_sequence(p)?),
        None => Ok(synth_video(&cfg.scenario(view)?, cfg.experiment.seed)?),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)?;
    Ok(())
}

fn cmd_build(args: &Common) -> CliResult<()> {
    let cfg = args.run_config()?;
    let model = ModelState::new(&cfg.model_config()?, cfg.learning_config()?)?;
    let path = match args.checkpoint.as_slice() {
        [] => Common::out_dir(&cfg)?.join(format!("{}.pvms", cfg.model.kind)),
        [one] => one.clone(),
        _ => return Err(CliError::usage("build writes a single --checkpoint")),
    };
    save_checkpoint(&model, &path)?;
    let levels: Vec<usize> = model.topology.levels.iter().map(|l| l.n_units).collect();
    println!("{} model, units per level {levels:?}, written to {}", cfg.model.kind, path.display());
    Ok(())
}

fn cmd_train(args: &Common) -> CliResult<()> {
    let cfg = args.run_config()?;
    let input = args.single_checkpoint()?;
    let mut model = load_checkpoint(input)?;
    let out = Common::out_dir(&cfg)?;
    let view = model.view_size();
    let saccade = cfg.saccade_config(view)?;
    let seq = frames_for(&cfg, view)?;

    let every = cfg.experiment.progress_every.max(1);
    let mut progress = BufWriter::new(File::create(out.join("progress.csv"))?);
    writeln!(progress, "frame,mean_input_error")?;
    let mut window = 0.0;
    let mut seen = 0usize;
    let mut write_err = None;
    train_with_saccades(&mut model, &seq.frames, cfg.experiment.n_frames, &saccade, args.static_view, |_, step| {
        window += step.mean_input_error();
        seen += 1;
        if seen.is_multiple_of(every) || seen == cfg.experiment.n_frames {
            let n = (seen - 1) % every + 1;
            if let Err(e) = writeln!(progress, "{seen},{}", window / n as f64) {
                write_err.get_or_insert(e);
            }
            window = 0.0;
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    progress.flush()?;

    let path = out.join("trained.pvms");
    save_checkpoint(&model, &path)?;
    println!("trained {} frames, checkpoint {}", cfg.experiment.n_frames, path.display());
    Ok(())
}

fn cmd_run(args: &Common) -> CliResult<()> {
    let cfg = args.run_config()?;
    let mut model = load_checkpoint(args.single_checkpoint()?)?;
    model.mode = Mode::Frozen;
    let out = Common::out_dir(&cfg)?;
    let view = model.view_size();
    let saccade = cfg.saccade_config(view)?;
    let seq = frames_for(&cfg, view)?;
    let Some(first) = seq.frames.first() else {
        return Err(PvmError::Input("no frames".into()).into());
    };

    let frames: Vec<&pvm_core::Frame> = if args.trace {
        let n = args.n_frames.unwrap_or(100);
        vec![first; n]
    } else {
        seq.frames.iter().collect()
    };

    let mut runner = SaccadeRunner::with_random_origin(saccade.clone(), first.width, first.height)?;
    let mut record = TrialRecord::default();
    let mut levels = LevelTraceWriter::new(BufWriter::new(File::create(out.join("levels.csv"))?), model.topology.levels.len())?;
    let mut trajectory = String::from("iteration,center_x,center_y\n");
    let overlay_dir = out.join("overlays");
    if args.overlays {
        fs::create_dir_all(&overlay_dir)?;
    }
    for (t, frame) in frames.iter().enumerate() {
        let (row, step) = runner.step(&mut model, frame)?;
        levels.record(t, &step)?;
        let cx = row.x + (saccade.view_w / 2) as i64;
        let cy = row.y + (saccade.view_h / 2) as i64;
        trajectory.push_str(&format!("{t},{cx},{cy}\n"));
        if args.overlays {
            overlay(frame, &row, saccade.view_w, saccade.view_h).save_png(&overlay_dir.join(format!("{t:06}.png")))?;
        }
        record.rows.push(row);
    }
    record.write_csv(BufWriter::new(File::create(out.join("trial.csv"))?))?;
    if args.trace {
        write_file(&out.join("trajectory.csv"), &trajectory)?;
    }
    println!("{} frames, trial written to {}", record.len(), out.display());
    Ok(())
}

fn tag_of(model: &ModelState) -> ModelTag {
    match model.topology.config.fovea {
        FoveaMode::None | FoveaMode::Central(0) => ModelTag::Base,
        FoveaMode::Central(_) => ModelTag::Foveated,
        FoveaMode::Full => ModelTag::Uhr,
    }
}

fn cmd_compare(args: &Common) -> CliResult<()> {
    let cfg = args.run_config()?;
    if args.checkpoint.is_empty() {
        return Err(CliError::usage("compare needs one --checkpoint per model"));
    }
    let mut models = Vec::new();
    for path in &args.checkpoint {
        require_exists(path, "checkpoint")?;
        let m = load_checkpoint(path)?;
        let tag = tag_of(&m);
        if models.iter().any(|(t, _)| *t == tag) {
            return Err(CliError::usage(format!("two checkpoints are {tag} models")));
        }
        models.push((tag, m));
    }
    let view = models[0].1.view_size();
    if let Some((tag, m)) = models.iter().find(|(_, m)| m.view_size() != view) {
        return Err(CliError::usage(format!(
            "{tag} checkpoint has a {:?} view, expected {view:?}",
            m.view_size()
        )));
    }
    let out = Common::out_dir(&cfg)?;
    let saccade = cfg.saccade_config(view)?;
    let seq = frames_for(&cfg, view)?;
    let seeds: Vec<u64> = (0..cfg.experiment.n_trials as u64).map(|i| cfg.experiment.seed + i).collect();
    let refs: Vec<(ModelTag, &ModelState)> = models.iter().map(|(t, m)| (*t, m)).collect();
    let report = run_comparison(&refs, &seq, &seeds, &saccade, &EntropyConfig::default())?;
    write_file(&out.join("trials.csv"), &report.trials_csv())?;
    write_file(&out.join("density.csv"), &report.density_csv())?;
    write_file(&out.join("summary.csv"), &report.summary_csv())?;
    print!("{}", report.summary_csv());
    Ok(())
}

fn cmd_synth(args: &Common) -> CliResult<()> {
    let cfg = args.run_config()?;
    let model = cfg.model_config()?;
    let seq = synth_video(&cfg.scenario((model.view_w, model.view_h))?, cfg.experiment.seed)?;
    let path = Common::out_dir(&cfg)?.join(format!("{}.rgb8", cfg.experiment.scenario));
    write_rgb8(&seq, &path)?;
    println!("{} frames written to {}", seq.len(), path.display());
    Ok(())
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("PVM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("PVM_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Train(a) => cmd_train(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Synth(a) => cmd_synth(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
