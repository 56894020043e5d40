//! `crowdnav`: train policies, evaluate them, replay recorded episodes and
//! validate scenario files.
//!
//! Exit status: 0 on success, 2 on configuration or usage errors, 3 on
//! runtime faults.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crowdnav::env::{
    corridor_scenario, scripted_library, CurriculumSchedule, CurriculumStage, EnvConfig, MapSpec,
    RandomScenarioSettings, Scenario, ScenarioError, ScenarioSource,
};
use crowdnav::eval::{
    export_plot_data, load_records, read_training_log, replay, run_evaluation, Controller, EpisodeRecord, EvalConfig,
    EvalError, GoalSeeker, MetricsConfig, PlotInput, PlotKind,
};
use crowdnav::learner::{train, Checkpoint, LearnerError, TrainOutputs, TrainerConfig, TrainingSetup};
use crowdnav::rewards::RewardSystem;
use crowdnav::sim::DEFAULT_ROBOT_RADIUS;
use crowdnav::zones::ZoneModel;

#[derive(Parser)]
#[command(
    name = "crowdnav",
    version,
    about = "Crowd navigation with class-specific safety zones"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with PPO.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the straight-line baseline) and write metrics.
    Eval(EvalArgs),
    /// Re-simulate recorded episodes and check they are bit-identical.
    Replay(ReplayArgs),
    /// Scenario file utilities.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Write a plot table from a metrics report, record or training log.
    Export(ExportArgs),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Parse and check a scenario file or every `.toml` file in a directory.
    Validate { path: PathBuf },
    /// Write the built-in scripted scenarios as TOML files.
    Library {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ZoneArg {
    None,
    Static,
    Dynamic,
}

impl From<ZoneArg> for ZoneModel {
    fn from(z: ZoneArg) -> Self {
        match z {
            ZoneArg::None => ZoneModel::None,
            ZoneArg::Static => ZoneModel::Static,
            ZoneArg::Dynamic => ZoneModel::Dynamic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Raw,
    Sz,
    Dz,
}

impl From<RewardArg> for RewardSystem {
    fn from(r: RewardArg) -> Self {
        match r {
            RewardArg::Raw => RewardSystem::Raw,
            RewardArg::Sz => RewardSystem::StaticZone,
            RewardArg::Dz => RewardSystem::DynamicZone,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Mode {
    /// Scenarios from `--scenario`, jittered by `--jitter`.
    Scenario,
    /// Random layouts with a fixed pedestrian count.
    Random,
    /// Random layouts with the pedestrian-count curriculum.
    Staged,
}

#[derive(Args)]
struct MapArgs {
    /// Width of the generated map, m.
    #[arg(long, default_value_t = 20.0)]
    map_width: f64,
    /// Height of the generated map, m.
    #[arg(long, default_value_t = 15.0)]
    map_height: f64,
    /// Pedestrians per generated layout (random mode).
    #[arg(long, default_value_t = 0)]
    pedestrians: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Scenario file or directory; implies `--mode scenario` unless set.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum, default_value = "static")]
    zone: ZoneArg,
    #[arg(long, value_enum, default_value = "sz")]
    reward: RewardArg,
    /// Total environment steps.
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parallel environments.
    #[arg(long, default_value_t = 4)]
    envs: usize,
    /// Per-axis pedestrian jitter for scenario mode, m.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Randomly mirror scripted layouts in scenario mode.
    #[arg(long)]
    mirror: bool,
    #[command(flatten)]
    map: MapArgs,
    /// Output directory for `checkpoint.json` and `training_log.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy checkpoint; without it the straight-line goal seeker runs.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Scenario file or directory; random layouts when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Zone model for observations and zone-time metrics (default: the
    /// checkpoint's, else static).
    #[arg(long, value_enum)]
    zone: Option<ZoneArg>,
    #[arg(long, value_enum)]
    reward: Option<RewardArg>,
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    map: MapArgs,
    /// Output directory: `metrics.json`, `exceedance_bars.csv`, `records/`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// A `.json.gz` record or a records directory with `index.json`.
    path: PathBuf,
    /// Write the trajectory table of a single replayed record here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// exceedance_bars | trajectory | training_curve
    #[arg(long)]
    kind: String,
    /// metrics.json, a `.json.gz` record, or a training log CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<LearnerError> for Failure {
    fn from(e: LearnerError) -> Self {
        match e {
            LearnerError::Config(_) | LearnerError::ShapeMismatch(_) | LearnerError::UnsupportedVersion(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Usage(_) | EvalError::Load(_) | EvalError::Scenario(_) | EvalError::Format(_) => {
                Failure::Config(e.to_string())
            }
            EvalError::Learner(inner) => inner.into(),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Scenario(ScenarioCommand::Validate { path }) => cmd_validate(&path),
        Command::Scenario(ScenarioCommand::Library { out }) => cmd_library(&out),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Runtime(m) => eprintln!("runtime fault: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, Failure> {
    let list = if path.is_dir() {
        Scenario::load_set(path)?
    } else {
        vec![Scenario::load(path)?]
    };
    if list.is_empty() {
        return Err(Failure::Config(format!("no scenario files in {}", path.display())));
    }
    for s in &list {
        s.validate(DEFAULT_ROBOT_RADIUS)?;
    }
    Ok(list)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn random_stage(pedestrians: usize) -> CurriculumStage {
    CurriculumStage {
        index: 0,
        pedestrians,
        class_counts: None,
        promotion_threshold: f64::INFINITY,
        demotion_threshold: f64::NEG_INFINITY,
    }
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let mode = a.mode.unwrap_or(if a.scenario.is_some() {
        Mode::Scenario
    } else {
        Mode::Staged
    });
    let map = MapSpec::open(a.map.map_width, a.map.map_height);
    let settings = RandomScenarioSettings::default();
    let source = match mode {
        Mode::Scenario => {
            let path = a
                .scenario
                .as_ref()
                .ok_or_else(|| Failure::Config("--mode scenario needs --scenario".into()))?;
            let base = load_scenarios(path)?;
            if a.jitter > 0.0 || a.mirror {
                ScenarioSource::Jittered {
                    base,
                    jitter: a.jitter,
                    mirror: a.mirror,
                }
            } else {
                ScenarioSource::Fixed(base)
            }
        }
        Mode::Random => ScenarioSource::Random {
            map,
            stage: random_stage(a.map.pedestrians),
            settings,
        },
        Mode::Staged => ScenarioSource::Curriculum {
            map,
            schedule: CurriculumSchedule::default(),
            settings,
        },
    };
    let cfg = TrainerConfig {
        total_steps: a.steps,
        seed: a.seed,
        n_envs: a.envs,
        ..TrainerConfig::default()
    };
    let setup = TrainingSetup {
        source,
        env: EnvConfig::new(a.zone.into(), a.reward.into()),
    };
    create_dir(&a.out)?;
    let outputs = TrainOutputs {
        log_path: Some(a.out.join("training_log.csv")),
        checkpoint_path: Some(a.out.join("checkpoint.json")),
    };
    let result = train(&cfg, &setup, &outputs)?;
    let last = result.log.last();
    println!(
        "trained {} updates, {} episodes; recent success rate {:.3}, mean return {:.3}",
        result.log.len(),
        result.episodes.len(),
        last.map_or(0.0, |r| r.success_rate),
        last.map_or(0.0, |r| r.mean_return),
    );
    println!("checkpoint: {}", a.out.join("checkpoint.json").display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let checkpoint = a.checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    let trained_env = checkpoint.as_ref().and_then(|c| c.env);
    let zone: ZoneModel = a
        .zone
        .map(Into::into)
        .or(trained_env.map(|e| e.constraints.zone_model))
        .unwrap_or(ZoneModel::Static);
    let reward: RewardSystem = a
        .reward
        .map(Into::into)
        .or(trained_env.map(|e| e.reward_system))
        .unwrap_or(RewardSystem::StaticZone);
    let source = match &a.scenario {
        Some(p) => ScenarioSource::Fixed(load_scenarios(p)?),
        None => ScenarioSource::Random {
            map: MapSpec::open(a.map.map_width, a.map.map_height),
            stage: random_stage(a.map.pedestrians),
            settings: RandomScenarioSettings::default(),
        },
    };
    let cfg = EvalConfig {
        episodes: a.episodes,
        seed: a.seed,
        env: EnvConfig::new(zone, reward),
        metrics: MetricsConfig {
            zone_model: zone,
            ..MetricsConfig::default()
        },
    };
    let mut controller: Box<dyn Controller> = match checkpoint {
        Some(ck) => Box::new(ck.network),
        None => Box::new(GoalSeeker),
    };
    create_dir(&a.out)?;
    let (_, report) = run_evaluation(controller.as_mut(), &source, &cfg, Some(&a.out.join("records")))?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
    let metrics_path = a.out.join("metrics.json");
    fs::write(&metrics_path, &text).map_err(|e| Failure::Runtime(format!("{}: {e}", metrics_path.display())))?;
    let bars = a.out.join("exceedance_bars.csv");
    let file = fs::File::create(&bars).map_err(|e| Failure::Runtime(format!("{}: {e}", bars.display())))?;
    export_plot_data(PlotKind::ExceedanceBars, PlotInput::Report(&report), file)?;
    println!("{text}");
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> Result<(), Failure> {
    let records = if a.path.is_dir() {
        load_records(&a.path)?
    } else {
        vec![EpisodeRecord::read_gz(&a.path)?]
    };
    for r in &records {
        replay(r)?;
        println!(
            "episode {}: {} steps replayed bit-identically ({:?})",
            r.episode,
            r.rows.len(),
            r.cause
        );
    }
    if let Some(out) = a.out {
        let [single] = records.as_slice() else {
            return Err(Failure::Config("--out needs a single record".into()));
        };
        let file = fs::File::create(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
        export_plot_data(PlotKind::Trajectory, PlotInput::Record(single), file)?;
    }
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    for s in load_scenarios(path)? {
        println!("ok: {} ({} pedestrians)", s.name, s.peds.len());
    }
    Ok(())
}

fn cmd_library(out: &Path) -> Result<(), Failure> {
    create_dir(out)?;
    for s in scripted_library().into_iter().chain([corridor_scenario()]) {
        let path = out.join(format!("{}.toml", s.name));
        s.save(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_export(a: ExportArgs) -> Result<(), Failure> {
    let kind: PlotKind = a.kind.parse()?;
    let config_err = |e: &dyn std::fmt::Display| Failure::Config(format!("{}: {e}", a.input.display()));
    let file = || fs::File::create(&a.out).map_err(|e| Failure::Runtime(format!("{}: {e}", a.out.display())));
    match kind {
        PlotKind::ExceedanceBars => {
            let text = fs::read_to_string(&a.input).map_err(|e| config_err(&e))?;
            let report = serde_json::from_str(&text).map_err(|e| config_err(&e))?;
            export_plot_data(kind, PlotInput::Report(&report), file()?)?;
        }
        PlotKind::Trajectory => {
            let rec = EpisodeRecord::read_gz(&a.input)?;
            export_plot_data(kind, PlotInput::Record(&rec), file()?)?;
        }
        PlotKind::TrainingCurve => {
            let log = read_training_log(&a.input).map_err(|e| config_err(&e))?;
            export_plot_data(kind, PlotInput::TrainingLog(&log), file()?)?;
        }
    }
    Ok(())
}
