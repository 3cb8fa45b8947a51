//! Seeded studies: spring-mass-damper phase portraits and sample-size
//! sweeps, and the unicycle tracking benchmark.
//!
//! Every cell `(regime, mode, M, trial)` derives its own seed from the base
//! seed, so reports are reproducible and cells can run in any order. Only
//! the `runtime_ms` fields depend on the machine.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::config::{Config, SCHEMA_VERSION};
use crate::control::{self, TrackResult};
use crate::dynamics::{self, SystemSpec};
use crate::embedding::{EmbeddingMode, FittedEmbedding, PriorModel, TransitionDataset};
use crate::error::{PikeError, Result};
use crate::kernel::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SmdPhase,
    SmdSweep,
    Tracking,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::SmdPhase,
        ExperimentKind::SmdSweep,
        ExperimentKind::Tracking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SmdPhase => "smd_phase",
            ExperimentKind::SmdSweep => "smd_sweep",
            ExperimentKind::Tracking => "tracking",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = PikeError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            PikeError::invalid(format!(
                "unknown experiment `{s}`; valid names: {}",
                Self::ALL.map(|k| k.name()).join(", ")
            ))
        })
    }
}

/// One `(regime, mode, M, trial)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub experiment: ExperimentKind,
    pub regime: String,
    pub mode: EmbeddingMode,
    pub samples: usize,
    pub trial: usize,
    pub seed: u64,
    /// Cumulative rollout error (SMD) or mean squared waypoint error (tracking).
    /// For a diverged rollout, the error accumulated before divergence.
    pub error: f64,
    pub diverged: bool,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub regime: String,
    pub mode: EmbeddingMode,
    pub samples: usize,
    pub count: usize,
    pub diverged: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
    pub total_runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// `truth`, `prior`, `target`, or an estimator label.
    pub label: String,
    pub regime: String,
    pub mode: Option<EmbeddingMode>,
    pub samples: Option<usize>,
    pub states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub config_digest: String,
    pub seed: u64,
    pub trials: usize,
    pub records: Vec<ErrorRecord>,
    pub aggregates: Vec<Aggregate>,
    pub trajectories: Vec<TrajectoryRecord>,
}

impl ExperimentReport {
    fn assemble(
        experiment: ExperimentKind,
        cfg: &Config,
        records: Vec<ErrorRecord>,
        trajectories: Vec<TrajectoryRecord>,
    ) -> Self {
        let aggregates = aggregate(&records);
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            config_digest: cfg.digest(),
            seed: cfg.seed,
            trials: cfg.trials,
            records,
            aggregates,
            trajectories,
        }
    }

    pub fn aggregate_for(&self, regime: &str, mode: EmbeddingMode, samples: usize) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.regime == regime && a.mode == mode && a.samples == samples)
    }

    /// Copy with every wall-clock field zeroed, for replay comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.records.iter_mut().for_each(|c| c.runtime_ms = 0.0);
        r.aggregates.iter_mut().for_each(|a| a.total_runtime_ms = 0.0);
        r
    }
}

/// `Σ_{t=1..N} ‖x̂_t - x_t‖₂`; index 0 holds the shared initial state.
pub fn cumulative_prediction_error(predicted: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(PikeError::invalid(format!(
            "trajectories have lengths {} and {}",
            predicted.len(),
            truth.len()
        )));
    }
    let mut total = 0.0;
    for (t, (p, x)) in predicted.iter().zip(truth).enumerate().skip(1) {
        if p.len() != x.len() {
            return Err(PikeError::invalid(format!("state dimensions differ at step {t}")));
        }
        total += p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    }
    Ok(total)
}

/// First quartile, median, third quartile with linear interpolation between
/// order statistics (the `numpy.percentile` default).
pub fn quartiles(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    Some((at(0.25), at(0.5), at(0.75)))
}

/// Groups records by `(regime, mode, samples)` in first-seen order.
pub fn aggregate(records: &[ErrorRecord]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, EmbeddingMode, usize)> = Vec::new();
    for r in records {
        let key = (r.regime.clone(), r.mode, r.samples);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(regime, mode, samples)| {
            let cell: Vec<&ErrorRecord> = records
                .iter()
                .filter(|r| r.regime == regime && r.mode == mode && r.samples == samples)
                .collect();
            let errors: Vec<f64> = cell.iter().map(|r| r.error).collect();
            let (q1, median, q3) = quartiles(&errors).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            Aggregate {
                count: cell.len(),
                diverged: cell.iter().filter(|r| r.diverged).count(),
                mean: errors.iter().sum::<f64>() / errors.len() as f64,
                total_runtime_ms: cell.iter().map(|r| r.runtime_ms).sum(),
                regime,
                mode,
                samples,
                q1,
                median,
                q3,
            }
        })
        .collect()
}

/// SplitMix64 mix of a base seed with a path of cell coordinates.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut z = base;
    for &p in path {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

fn map_cells<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

fn smd_cell_dataset(
    cfg: &Config,
    system: &SystemSpec,
    region: &dynamics::Region,
    regime_index: usize,
    samples: usize,
    trial: usize,
) -> Result<(TransitionDataset, u64)> {
    let seed = derive_seed(cfg.seed, &[trial as u64, samples as u64, regime_index as u64]);
    let data = dynamics::sample_transitions(system, region, None, samples, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok((data, seed))
}

/// The full-region spring-mass-damper sample used by trial `trial` of the
/// phase study, with its derived seed.
pub fn smd_dataset(cfg: &Config, samples: usize, trial: usize) -> Result<(TransitionDataset, u64)> {
    let region = Config::smd_region(cfg.smd_full_region)?;
    smd_cell_dataset(cfg, &cfg.smd_system(), &region, 1, samples, trial)
}

/// The unicycle sample used by trial `trial` of the tracking benchmark,
/// with its derived seed.
pub fn tracking_dataset(cfg: &Config, samples: usize, trial: usize) -> Result<(TransitionDataset, u64)> {
    let seed = derive_seed(cfg.seed, &[trial as u64, samples as u64]);
    let data = dynamics::sample_transitions(
        &cfg.unicycle_system(),
        &cfg.tracking_state_region()?,
        Some(&cfg.action_region()?),
        samples,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )?;
    Ok((data, seed))
}

/// Fits `mode` on `data`, using `system`'s prior for the physics-informed mode.
pub fn fit_mode(
    data: &TransitionDataset,
    system: &SystemSpec,
    spec_x: KernelSpec,
    spec_u: KernelSpec,
    lambda: f64,
    mode: EmbeddingMode,
) -> Result<FittedEmbedding> {
    let prior: Option<Arc<dyn PriorModel>> = match mode {
        EmbeddingMode::PhysicsInformed => Some(Arc::new(system.prior())),
        EmbeddingMode::DataDriven => None,
    };
    FittedEmbedding::fit(data.clone(), prior, spec_x, spec_u, lambda, mode)
}

/// Noiseless rollout of the true system.
fn true_trajectory(system: &SystemSpec, x0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let sys = system.without_noise();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut traj = vec![x0.to_vec()];
    for t in 0..steps {
        let next = sys.true_step(&traj[t], &[], &mut rng);
        traj.push(next);
    }
    traj
}

fn prior_trajectory(system: &SystemSpec, x0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let prior = system.prior();
    let mut traj = vec![x0.to_vec()];
    for t in 0..steps {
        let next = prior.predict(&traj[t], &[]);
        traj.push(next);
    }
    traj
}

/// Uncontrolled rollout scored against `truth`. Stops at the first
/// non-finite prediction and reports the error accumulated so far.
fn scored_rollout(embedding: &FittedEmbedding, truth: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64, bool)> {
    let mut traj = vec![truth[0].clone()];
    let mut err = 0.0;
    for t in 1..truth.len() {
        let next = embedding.predict_state(&traj[t - 1], &[])?;
        if !next.iter().all(|v| v.is_finite()) {
            return Ok((traj, err, true));
        }
        err += next
            .iter()
            .zip(&truth[t])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        traj.push(next);
    }
    Ok((traj, err, false))
}

const MODES: [EmbeddingMode; 2] = [EmbeddingMode::PhysicsInformed, EmbeddingMode::DataDriven];

/// Rollouts from a fixed initial state, for limited- and full-region data.
pub fn run_smd_phase(cfg: &Config) -> Result<ExperimentReport> {
    cfg.validate()?;
    let system = cfg.smd_system();
    let spec_x = KernelSpec::gaussian(cfg.smd_sigma)?;
    let spec_u = KernelSpec::constant_one();
    let truth = true_trajectory(&system, &cfg.smd_x0, cfg.smd_steps);
    let regimes = [
        ("limited", Config::smd_region(cfg.smd_limited_region)?),
        ("full", Config::smd_region(cfg.smd_full_region)?),
    ];

    let mut cells = Vec::new();
    for (ri, (regime, region)) in regimes.iter().enumerate() {
        for &m in &cfg.smd_phase_sizes {
            for trial in 0..cfg.trials {
                cells.push((ri, *regime, region.clone(), m, trial));
            }
        }
    }

    let results = map_cells(
        cells,
        |(ri, regime, region, m, trial)| -> Result<Vec<(ErrorRecord, Vec<Vec<f64>>)>> {
            let (data, seed) = smd_cell_dataset(cfg, &system, &region, ri, m, trial)?;
            MODES
                .iter()
                .map(|&mode| {
                    let start = Instant::now();
                    let emb = fit_mode(&data, &system, spec_x, spec_u, cfg.smd_lambda, mode)?;
                    let (traj, error, diverged) = scored_rollout(&emb, &truth)?;
                    let record = ErrorRecord {
                        experiment: ExperimentKind::SmdPhase,
                        regime: regime.to_owned(),
                        mode,
                        samples: m,
                        trial,
                        seed,
                        error,
                        diverged,
                        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                    };
                    Ok((record, traj))
                })
                .collect()
        },
    );

    let mut records = Vec::new();
    let mut trajectories = vec![
        TrajectoryRecord {
            label: "truth".into(),
            regime: String::new(),
            mode: None,
            samples: None,
            states: truth.clone(),
        },
        TrajectoryRecord {
            label: "prior".into(),
            regime: String::new(),
            mode: None,
            samples: None,
            states: prior_trajectory(&system, &cfg.smd_x0, cfg.smd_steps),
        },
    ];
    for cell in results {
        for (record, traj) in cell? {
            if record.trial == 0 {
                trajectories.push(TrajectoryRecord {
                    label: format!("{}_{}", record.mode.short_name(), record.samples),
                    regime: record.regime.clone(),
                    mode: Some(record.mode),
                    samples: Some(record.samples),
                    states: traj,
                });
            }
            records.push(record);
        }
    }
    Ok(ExperimentReport::assemble(
        ExperimentKind::SmdPhase,
        cfg,
        records,
        trajectories,
    ))
}

/// Median cumulative error over random initial states, per sample size.
pub fn run_smd_sweep(cfg: &Config) -> Result<ExperimentReport> {
    cfg.validate()?;
    let system = cfg.smd_system();
    let spec_x = KernelSpec::gaussian(cfg.smd_sigma)?;
    let spec_u = KernelSpec::constant_one();
    let data_region = Config::smd_region(cfg.smd_full_region)?;
    let init_region = Config::smd_region(cfg.smd_sweep_initial_region)?;

    let mut cells = Vec::new();
    for &m in &cfg.smd_sweep_sizes {
        for trial in 0..cfg.trials {
            cells.push((m, trial));
        }
    }

    let results = map_cells(cells, |(m, trial)| -> Result<Vec<ErrorRecord>> {
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[trial as u64, u64::MAX]));
        let truths: Vec<Vec<Vec<f64>>> = (0..cfg.smd_sweep_initial_states)
            .map(|_| true_trajectory(&system, &init_region.sample(&mut init_rng), cfg.smd_steps))
            .collect();
        let seed = derive_seed(cfg.seed, &[trial as u64, m as u64]);
        let data = dynamics::sample_transitions(&system, &data_region, None, m, &mut ChaCha8Rng::seed_from_u64(seed))?;
        MODES
            .iter()
            .map(|&mode| {
                let start = Instant::now();
                let emb = fit_mode(&data, &system, spec_x, spec_u, cfg.smd_lambda, mode)?;
                let mut errors = Vec::with_capacity(truths.len());
                let mut diverged = false;
                for truth in &truths {
                    let (_, e, d) = scored_rollout(&emb, truth)?;
                    errors.push(e);
                    diverged |= d;
                }
                let (_, median, _) = quartiles(&errors).ok_or_else(|| PikeError::invalid("no initial states"))?;
                Ok(ErrorRecord {
                    experiment: ExperimentKind::SmdSweep,
                    regime: "full".into(),
                    mode,
                    samples: m,
                    trial,
                    seed,
                    error: median,
                    diverged,
                    runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                })
            })
            .collect()
    });

    let mut records = Vec::new();
    for cell in results {
        records.extend(cell?);
    }
    Ok(ExperimentReport::assemble(
        ExperimentKind::SmdSweep,
        cfg,
        records,
        Vec::new(),
    ))
}

/// Seed of the disturbance stream shared by all arms of a tracking trial.
pub fn tracking_noise_seed(cfg: &Config, trial: usize) -> u64 {
    derive_seed(cfg.seed, &[trial as u64, u64::MAX])
}

/// One tracking arm: sample, fit and run the closed loop.
pub fn tracking_arm(
    cfg: &Config,
    mode: EmbeddingMode,
    samples: usize,
    trial: usize,
) -> Result<(ErrorRecord, TrackResult)> {
    let system = cfg.unicycle_system();
    let spec_x = KernelSpec::gaussian(cfg.tracking_sigma)?;
    let spec_u = KernelSpec::gaussian(cfg.tracking_sigma_u)?;
    let control_set = cfg.control_set()?;
    let targets = cfg.target_track()?;

    let (data, seed) = tracking_dataset(cfg, samples, trial)?;
    let start = Instant::now();
    let emb = fit_mode(&data, &system, spec_x, spec_u, cfg.tracking_lambda, mode)?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(tracking_noise_seed(cfg, trial));
    let result = control::track(&emb, &system, &cfg.tracking_x0, &targets, &control_set, &mut noise_rng)?;
    let record = ErrorRecord {
        experiment: ExperimentKind::Tracking,
        regime: "tracking".into(),
        mode,
        samples,
        trial,
        seed,
        error: result.mean_squared_error(),
        diverged: false,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((record, result))
}

/// Physics-informed at `tracking_samples` against data-driven at
/// `tracking_samples` and `tracking_large_samples`, under shared seeds.
///
/// Arms run sequentially so their wall-clock times are comparable.
pub fn run_tracking(cfg: &Config) -> Result<ExperimentReport> {
    cfg.validate()?;
    let arms = [
        (EmbeddingMode::PhysicsInformed, cfg.tracking_samples),
        (EmbeddingMode::DataDriven, cfg.tracking_samples),
        (EmbeddingMode::DataDriven, cfg.tracking_large_samples),
    ];
    let mut records = Vec::new();
    let mut trajectories = vec![TrajectoryRecord {
        label: "target".into(),
        regime: "tracking".into(),
        mode: None,
        samples: None,
        states: cfg.target_track()?.waypoints().to_rows(),
    }];
    for trial in 0..cfg.trials {
        for &(mode, samples) in &arms {
            let (record, result) = tracking_arm(cfg, mode, samples, trial)?;
            if trial == 0 {
                trajectories.push(TrajectoryRecord {
                    label: format!("{}_{}", mode.short_name(), samples),
                    regime: "tracking".into(),
                    mode: Some(mode),
                    samples: Some(samples),
                    states: result.trajectory(),
                });
            }
            records.push(record);
        }
    }
    Ok(ExperimentReport::assemble(
        ExperimentKind::Tracking,
        cfg,
        records,
        trajectories,
    ))
}

pub fn run(kind: ExperimentKind, cfg: &Config) -> Result<ExperimentReport> {
    match kind {
        ExperimentKind::SmdPhase => run_smd_phase(cfg),
        ExperimentKind::SmdSweep => run_smd_sweep(cfg),
        ExperimentKind::Tracking => run_tracking(cfg),
    }
}
