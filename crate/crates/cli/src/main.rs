use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use pike_core::config::{Config, SystemName, SCHEMA_VERSION};
use pike_core::experiments::{self, ExperimentKind, ExperimentReport};
use pike_core::{control, io as pio, EmbeddingMode, FittedEmbedding, PikeError, PriorModel, TransitionDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod error;

use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "pike",
    version,
    about = "Physics-informed kernel embeddings: fit, predict, control, experiments"
)]
struct Cli {
    /// Flat TOML configuration file; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// State kernel bandwidth for the active system.
    #[arg(long, global = true, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Regularizer for the active system.
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Sample size (for experiments: the single M to run).
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Output path; standard output when omitted (experiments: file prefix).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Pi,
    Dd,
}

impl From<ModeArg> for EmbeddingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pi => EmbeddingMode::PhysicsInformed,
            ModeArg::Dd => EmbeddingMode::DataDriven,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a transition dataset (CSV) from the configured system.
    Sample,
    /// Fit an embedding and write its container (JSON).
    Fit {
        /// Dataset CSV; sampled from the configuration when omitted.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Roll out an embedding and print the trajectory as CSV.
    Predict {
        #[arg(long, value_name = "PATH")]
        embedding: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Option<Vec<f64>>,
        /// Constant action applied at every step (controlled systems).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        action: Option<Vec<f64>>,
    },
    /// Closed-loop unicycle tracking; writes a JSON record.
    Control {
        /// Embedding container; fitted from the configuration when omitted.
        #[arg(long, value_name = "PATH")]
        embedding: Option<PathBuf>,
    },
    /// Run a study: smd_phase, smd_sweep or tracking.
    Experiment { name: String },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = cli.mode {
        cfg.mode = mode.into();
    }

    match &cli.command {
        Command::Experiment { name } => {
            let kind: ExperimentKind = name.parse().map_err(CliError::from)?;
            let system = match kind {
                ExperimentKind::Tracking => SystemName::Unicycle,
                _ => SystemName::Smd,
            };
            apply_overrides(&mut cfg, &cli, system);
            if let Some(m) = cli.samples {
                match kind {
                    ExperimentKind::SmdPhase => cfg.smd_phase_sizes = vec![m],
                    ExperimentKind::SmdSweep => cfg.smd_sweep_sizes = vec![m],
                    ExperimentKind::Tracking => {}
                }
            }
            cfg.validate()?;
            cmd_experiment(&cfg, kind, cli.out.as_deref())
        }
        Command::Control { embedding } => {
            apply_overrides(&mut cfg, &cli, SystemName::Unicycle);
            cfg.validate()?;
            cmd_control(&cfg, embedding.as_deref(), cli.out.as_deref())
        }
        command => {
            let system = cfg.system;
            apply_overrides(&mut cfg, &cli, system);
            cfg.validate()?;
            match command {
                Command::Sample => cmd_sample(&cfg, cli.out.as_deref()),
                Command::Fit { data } => cmd_fit(&cfg, data.as_deref(), cli.out.as_deref()),
                Command::Predict {
                    embedding,
                    steps,
                    x0,
                    action,
                } => cmd_predict(&cfg, embedding, *steps, x0.clone(), action.clone(), cli.out.as_deref()),
                Command::Experiment { .. } | Command::Control { .. } => unreachable!(),
            }
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PIKE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::User(format!("PIKE_THREADS must be a non-negative integer, got `{raw}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::User(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(&text, s.start));
        CliError::User(format!(
            "{}: parse error at line {line}, column {column}: {}",
            path.display(),
            e.message()
        ))
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = text.get(..offset).unwrap_or(text);
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn apply_overrides(cfg: &mut Config, cli: &Cli, system: SystemName) {
    match system {
        SystemName::Smd => {
            if let Some(s) = cli.sigma {
                cfg.smd_sigma = s;
            }
            if let Some(l) = cli.lambda {
                cfg.smd_lambda = l;
            }
        }
        SystemName::Unicycle => {
            if let Some(s) = cli.sigma {
                cfg.tracking_sigma = s;
            }
            if let Some(l) = cli.lambda {
                cfg.tracking_lambda = l;
            }
            if let Some(m) = cli.samples {
                cfg.tracking_samples = m;
            }
        }
    }
    if let Some(m) = cli.samples {
        cfg.samples = m;
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::User(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

/// Human-readable notes go to stdout unless stdout carries the data.
fn note(data_on_stdout: bool, msg: &str) {
    if data_on_stdout {
        eprintln!("{msg}");
    } else {
        println!("{msg}");
    }
}

fn sample_dataset(cfg: &Config) -> Result<TransitionDataset, CliError> {
    let (data, _) = match cfg.system {
        SystemName::Smd => experiments::smd_dataset(cfg, cfg.samples, 0)?,
        SystemName::Unicycle => experiments::tracking_dataset(cfg, cfg.samples, 0)?,
    };
    Ok(data)
}

fn cmd_sample(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let data = sample_dataset(cfg)?;
    pio::write_dataset_csv(&data, output(out)?)?;
    note(
        out.is_none(),
        &format!(
            "sampled {} {} transitions (seed {})",
            data.len(),
            cfg.system_spec().name(),
            cfg.seed
        ),
    );
    Ok(())
}

fn cmd_fit(cfg: &Config, data: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let out = out.ok_or_else(|| CliError::User("fit requires --out PATH for the embedding container".into()))?;
    let data = match data {
        Some(path) => pio::read_dataset_csv(open(path)?).map_err(|e| with_path(path, e))?,
        None => sample_dataset(cfg)?,
    };
    let system = cfg.system_spec();
    if data.state_dim() != system.state_dim() || data.action_dim() != system.action_dim() {
        return Err(CliError::User(format!(
            "dataset has state/action dimensions {}/{}, the {} system expects {}/{}",
            data.state_dim(),
            data.action_dim(),
            system.name(),
            system.state_dim(),
            system.action_dim()
        )));
    }
    let (spec_x, spec_u) = cfg.kernels()?;
    let prior: Option<Arc<dyn PriorModel>> = match cfg.mode {
        EmbeddingMode::PhysicsInformed => Some(Arc::new(system.prior())),
        EmbeddingMode::DataDriven => None,
    };
    let embedding = FittedEmbedding::fit(data, prior, spec_x, spec_u, cfg.lambda(), cfg.mode)?;
    let residual = embedding.solve_residual(&vec![1.0; embedding.len()])?;
    let mut w = output(Some(out))?;
    pio::write_embedding(&embedding, Some(&system), &mut w)?;
    w.flush().map_err(PikeError::from)?;
    println!(
        "fit {} embedding: system={} M={} sigma={} lambda={:e} residual={:.3e} -> {}",
        cfg.mode,
        system.name(),
        embedding.len(),
        spec_x.bandwidth,
        embedding.lambda(),
        residual,
        out.display()
    );
    Ok(())
}

fn cmd_predict(
    cfg: &Config,
    path: &Path,
    steps: Option<usize>,
    x0: Option<Vec<f64>>,
    action: Option<Vec<f64>>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let embedding = pio::read_embedding(open(path)?).map_err(|e| with_path(path, e))?;
    let data = embedding.dataset();
    let x0 = x0.unwrap_or_else(|| match data.state_dim() {
        3 => cfg.tracking_x0.clone(),
        _ => cfg.x0.clone(),
    });
    if x0.len() != data.state_dim() {
        return Err(CliError::User(format!(
            "initial state has {} entries, the embedding expects {}",
            x0.len(),
            data.state_dim()
        )));
    }
    let steps = steps.unwrap_or(cfg.steps);
    let controls = match (action, data.action_dim()) {
        (None, 0) => None,
        (Some(u), q) if u.len() == q => Some(pike_core::Points::from_rows(&vec![u; steps])?),
        (Some(u), q) => {
            return Err(CliError::User(format!(
                "action has {} entries, the embedding expects {q}",
                u.len()
            )))
        }
        (None, q) => {
            return Err(CliError::User(format!(
                "this embedding needs --action with {q} entries"
            )))
        }
    };
    let controls = controls.filter(|c| !c.is_empty());
    let traj = if steps == 0 {
        vec![x0]
    } else {
        embedding.rollout(&x0, controls.as_ref(), steps)?
    };
    pio::write_trajectory_csv(&traj, output(out)?)?;
    Ok(())
}

fn cmd_control(cfg: &Config, embedding: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let samples = cfg.tracking_samples;
    let (result, mode, samples) = match embedding {
        Some(path) => {
            let emb = pio::read_embedding(open(path)?).map_err(|e| with_path(path, e))?;
            if emb.dataset().state_dim() != 3 || emb.dataset().action_dim() != 2 {
                return Err(CliError::User(
                    "control requires a unicycle embedding (3 states, 2 actions)".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(experiments::tracking_noise_seed(cfg, 0));
            let result = control::track(
                &emb,
                &cfg.unicycle_system(),
                &cfg.tracking_x0,
                &cfg.target_track()?,
                &cfg.control_set()?,
                &mut rng,
            )?;
            (result, emb.mode(), emb.len())
        }
        None => {
            let (_, result) = experiments::tracking_arm(cfg, cfg.mode, samples, 0)?;
            (result, cfg.mode, samples)
        }
    };
    let record = pio::TrackRecord {
        schema_version: SCHEMA_VERSION,
        config_digest: cfg.digest(),
        seed: cfg.seed,
        mode,
        samples,
        mean_squared_error: result.mean_squared_error(),
        targets: cfg.target_track()?.waypoints().to_rows(),
        result,
    };
    pio::write_track_json(&record, output(out)?)?;
    note(
        out.is_none(),
        &format!(
            "tracking {mode} M={samples}: mean squared error {:.4e}, wall clock {:.1} ms",
            record.mean_squared_error, record.result.wall_clock_ms
        ),
    );
    Ok(())
}

fn cmd_experiment(cfg: &Config, kind: ExperimentKind, out: Option<&Path>) -> Result<(), CliError> {
    let report = experiments::run(kind, cfg)?;
    let prefix = out.map_or_else(|| PathBuf::from(format!("report_{kind}")), Path::to_path_buf);
    let json = prefix.with_extension("json");
    let csv = prefix.with_extension("csv");
    let mut w = output(Some(&json))?;
    pio::write_report_json(&report, &mut w)?;
    w.flush().map_err(PikeError::from)?;
    let mut w = output(Some(&csv))?;
    pio::write_report_csv(&report, &mut w)?;
    w.flush().map_err(PikeError::from)?;
    print_summary(&report);
    println!("wrote {} and {}", json.display(), csv.display());
    Ok(())
}

fn print_summary(report: &ExperimentReport) {
    println!(
        "{} (seed {}, {} trials, config {})",
        report.experiment, report.seed, report.trials, report.config_digest
    );
    println!(
        "{:<9} {:<4} {:>6} {:>12} {:>12} {:>12} {:>9} {:>12}",
        "regime", "mode", "M", "median", "q1", "q3", "diverged", "runtime_ms"
    );
    for a in &report.aggregates {
        println!(
            "{:<9} {:<4} {:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>9} {:>12.1}",
            a.regime,
            a.mode.short_name(),
            a.samples,
            a.median,
            a.q1,
            a.q3,
            a.diverged,
            a.total_runtime_ms / a.count as f64
        );
    }
}

fn with_path(path: &Path, e: PikeError) -> CliError {
    let code_numerical = e.is_numerical();
    let msg = format!("{}: {e}", path.display());
    if code_numerical {
        CliError::Numerical(msg)
    } else {
        CliError::User(msg)
    }
}
