//! Scenario runner: participating-device search, per-round random device
//! selection and sub-channel allocation, sweeps and CSV output.
//!
//! A scenario is described by a TOML file (see `scenarios/` in this crate).
//! Trials are independent and run in parallel; every random draw comes from a
//! stream keyed by `(master seed, trial, round, purpose)` so results do not
//! depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{allocate, CoalitionGame, Method, SwapRule};
use crate::bound::{optimal_kse, DeltaAggregation, FlBoundParams, KseChoice};
use crate::error::{Error, Result};
use crate::fl::{self, FlRunConfig, TaskSpec, Trajectory};
use crate::radio::{rate_table, sample_topology, LinkBudget};
use crate::report;
use crate::rng::{derive_rng, Stream};

pub use crate::fl::select_devices;

/// Gradient deviations given either once for all devices or per device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GradVariance {
    Uniform(f64),
    PerDevice(Vec<f64>),
}

/// Bound constants as written in a scenario file; the device count comes
/// from the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSection {
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub grad_bound: f64,
    pub grad_variance: GradVariance,
    pub local_epochs: u32,
    pub heterogeneity: f64,
    pub compressor_loss: f64,
    pub epsilon: f64,
    pub delta_aggregation: DeltaAggregation,
}

impl Default for BoundSection {
    fn default() -> Self {
        Self {
            smoothness: 1.0,
            strong_convexity: 1.0,
            grad_bound: 1.0,
            grad_variance: GradVariance::Uniform(1.0),
            local_epochs: 2,
            heterogeneity: 1.0,
            compressor_loss: 1.0,
            epsilon: 1.0,
            delta_aggregation: DeltaAggregation::MeanAll,
        }
    }
}

impl BoundSection {
    pub fn to_params(&self, devices: usize) -> FlBoundParams {
        let grad_variance = match &self.grad_variance {
            GradVariance::Uniform(d) => vec![*d; devices],
            GradVariance::PerDevice(v) => v.clone(),
        };
        FlBoundParams {
            smoothness: self.smoothness,
            strong_convexity: self.strong_convexity,
            grad_bound: self.grad_bound,
            grad_variance,
            local_epochs: self.local_epochs,
            heterogeneity: self.heterogeneity,
            compressor_loss: self.compressor_loss,
            epsilon: self.epsilon,
            total_devices: devices,
            delta_aggregation: self.delta_aggregation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    Subchannels,
    Kse,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Subchannels => "subchannels",
            SweepAxis::Kse => "kse",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SweepAxis::None),
            "subchannels" => Ok(SweepAxis::Subchannels),
            "kse" => Ok(SweepAxis::Kse),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlSection {
    pub enabled: bool,
    pub task: TaskSpec,
    pub run: FlRunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    pub trials: usize,
    /// Worker threads for trials; 0 uses the global pool.
    pub workers: usize,
    pub devices: usize,
    pub subchannels: usize,
    pub cell_radius_m: f64,
    pub z_comp_bits: f64,
    pub method: Method,
    pub max_sweeps: usize,
    pub swap_rule: SwapRule,
    pub exchange_on_reject: bool,
    /// Fixes `K_SE` instead of searching it.
    pub kse: Option<usize>,
    /// Fixes the round count instead of using the bound.
    pub rounds: Option<u64>,
    pub link: LinkBudget,
    pub bound: BoundSection,
    pub sweep: SweepSection,
    pub fl: FlSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            seed: 1,
            trials: 1000,
            workers: 0,
            devices: 100,
            subchannels: 20,
            cell_radius_m: 200.0,
            z_comp_bits: 1e6,
            method: Method::Coalition,
            max_sweeps: CoalitionGame::default().max_sweeps,
            swap_rule: SwapRule::default(),
            exchange_on_reject: CoalitionGame::default().exchange_on_reject,
            kse: None,
            rounds: None,
            link: LinkBudget::default(),
            bound: BoundSection::default(),
            sweep: SweepSection::default(),
            fl: FlSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn bound_params(&self) -> FlBoundParams {
        self.bound.to_params(self.devices)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.devices == 0 || self.subchannels == 0 {
            return bad("devices and subchannels must be at least 1".into());
        }
        if !(self.cell_radius_m > 0.0) || !(self.z_comp_bits > 0.0) {
            return bad("cell radius and model size must be positive".into());
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be at least 1".into());
        }
        if let Some(k) = self.kse {
            if k == 0 || k > self.devices {
                return bad(format!("kse {k} outside [1, {}]", self.devices));
            }
            if self.sweep.axis != SweepAxis::Subchannels && k > self.subchannels {
                return bad(format!("kse {k} exceeds {} sub-channels", self.subchannels));
            }
        }
        if self.rounds == Some(0) {
            return bad("rounds must be at least 1".into());
        }
        if self.sweep.axis != SweepAxis::None && self.sweep.values.is_empty() {
            return bad("sweep needs a non-empty value list".into());
        }
        self.link.validate()?;
        self.bound_params().validate()?;
        if self.fl.enabled {
            if self.fl.task.devices == 0 {
                return bad("fl task needs devices".into());
            }
            self.fl.run.validate(self.fl.task.devices)?;
        }
        Ok(())
    }

    fn game(&self) -> CoalitionGame {
        CoalitionGame {
            max_sweeps: self.max_sweeps,
            swap_rule: self.swap_rule,
            exchange_on_reject: self.exchange_on_reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub trial: u64,
    pub round: u64,
    pub selected: Vec<usize>,
    pub method: Method,
    pub subchannels: usize,
    pub kse: usize,
    pub t_comp_seconds: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub method: Method,
    pub axis: SweepAxis,
    pub kse: usize,
    pub subchannels: usize,
    pub rounds: u64,
    pub trials: usize,
    /// Total transmission time of each trial, in trial order.
    pub totals: Vec<f64>,
    pub mean_total_s: f64,
    pub std_total_s: f64,
    /// Set when the device count came from the bound search.
    pub kse_choice: Option<KseChoice>,
}

impl ExperimentSummary {
    /// The value of the swept quantity.
    pub fn point(&self) -> Option<usize> {
        match self.axis {
            SweepAxis::None => None,
            SweepAxis::Subchannels => Some(self.subchannels),
            SweepAxis::Kse => Some(self.kse),
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std_total_s / (self.trials as f64).sqrt()
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Builds a summary from round reports of one configuration.
pub fn summarize(
    reports: &[RoundReport],
    method: Method,
    axis: SweepAxis,
    kse: usize,
    subchannels: usize,
    rounds: u64,
    trials: usize,
) -> ExperimentSummary {
    let mut totals = vec![0.0; trials];
    for r in reports {
        totals[r.trial as usize] += r.t_comp_seconds;
    }
    let (mean_total_s, std_total_s) = mean_std(&totals);
    ExperimentSummary {
        method,
        axis,
        kse,
        subchannels,
        rounds,
        trials,
        totals,
        mean_total_s,
        std_total_s,
        kse_choice: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub summary: ExperimentSummary,
    pub reports: Vec<RoundReport>,
}

fn run_trial(config: &ExperimentConfig, trial: u64, kse: usize, rounds: u64) -> Result<Vec<RoundReport>> {
    let master = config.seed;
    let topology = sample_topology(
        &mut derive_rng(master, trial, 0, Stream::Topology),
        config.devices,
        config.cell_radius_m,
    );
    let game = config.game();
    (0..rounds)
        .map(|round| {
            let table = rate_table(
                &topology,
                &config.link,
                config.subchannels,
                round,
                &mut derive_rng(master, trial, round, Stream::Fading),
            )?;
            let selected = select_devices(
                config.devices,
                kse,
                &mut derive_rng(master, trial, round, Stream::Selection),
            )?;
            let outcome = allocate(
                config.method,
                &table,
                &selected,
                config.z_comp_bits,
                &game,
                &mut derive_rng(master, trial, round, Stream::Allocation),
            )?;
            assert!(outcome.t_comp_seconds <= outcome.initial_t_comp);
            Ok(RoundReport {
                trial,
                round,
                selected,
                method: config.method,
                subchannels: config.subchannels,
                kse,
                t_comp_seconds: outcome.t_comp_seconds,
                iterations: outcome.iterations,
            })
        })
        .collect()
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `trials` independent trials of `rounds` rounds at `kse` devices.
fn run_fixed(config: &ExperimentConfig, kse: usize, rounds: u64, axis: SweepAxis) -> Result<PipelineRun> {
    if kse > config.subchannels {
        return Err(Error::TooFewChannels { devices: kse, subchannels: config.subchannels });
    }
    let per_trial: Vec<Vec<RoundReport>> = in_pool(config.workers, || {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|trial| run_trial(config, trial, kse, rounds))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut reports: Vec<RoundReport> = per_trial.into_iter().flatten().collect();
    reports.sort_by_key(|r| (r.trial, r.round));
    let summary = summarize(&reports, config.method, axis, kse, config.subchannels, rounds, config.trials);
    Ok(PipelineRun { summary, reports })
}

/// Searches `K_SE` (unless fixed), then accumulates the allocated upload time
/// over `R_min(K_SE)` rounds (unless fixed) for every trial.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineRun> {
    config.validate()?;
    let needs_bound = config.kse.is_none() || config.rounds.is_none();
    let choice = if needs_bound { Some(optimal_kse(&config.bound_params())?) } else { None };
    let kse = config.kse.or(choice.as_ref().map(|c| c.kse)).expect("kse resolved");
    let rounds = match config.rounds {
        Some(r) => r,
        None if config.kse.is_some() => crate::bound::r_min(&config.bound_params(), kse)?,
        None => choice.as_ref().expect("bound searched").r_min,
    };
    let mut run = run_fixed(config, kse, rounds, SweepAxis::None)?;
    run.summary.kse_choice = choice;
    Ok(run)
}

/// Per-point, per-method single-round results of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub summaries: Vec<ExperimentSummary>,
    pub reports: Vec<RoundReport>,
}

impl SweepResult {
    pub fn summary(&self, method: Method, point: usize) -> Option<&ExperimentSummary> {
        self.summaries.iter().find(|s| s.method == method && s.point() == Some(point))
    }

    pub fn means(&self, method: Method) -> Vec<f64> {
        self.summaries.iter().filter(|s| s.method == method).map(|s| s.mean_total_s).collect()
    }
}

pub const SWEEP_METHODS: [Method; 2] = [Method::Coalition, Method::Fairness];

fn sweep_kse_value(config: &ExperimentConfig) -> Result<usize> {
    match config.kse {
        Some(k) => Ok(k),
        None => Ok(optimal_kse(&config.bound_params())?.kse),
    }
}

/// Single-round upload time versus the number of sub-channels, for the
/// coalition game and the fairness baseline on identical random streams.
pub fn sweep_subchannels(config: &ExperimentConfig, values: &[usize]) -> Result<SweepResult> {
    config.validate()?;
    if values.is_empty() {
        return Err(Error::InvalidConfig("empty sub-channel sweep".into()));
    }
    let kse = sweep_kse_value(config)?;
    let mut result = SweepResult { axis: SweepAxis::Subchannels, summaries: Vec::new(), reports: Vec::new() };
    for &s in values {
        if s < kse {
            return Err(Error::TooFewChannels { devices: kse, subchannels: s });
        }
        for method in SWEEP_METHODS {
            let cfg = ExperimentConfig { subchannels: s, method, ..config.clone() };
            let run = run_fixed(&cfg, kse, 1, SweepAxis::Subchannels)?;
            result.summaries.push(run.summary);
            result.reports.extend(run.reports);
        }
    }
    Ok(result)
}

/// Single-round upload time versus the participating-device count.
pub fn sweep_kse(config: &ExperimentConfig, values: &[usize]) -> Result<SweepResult> {
    config.validate()?;
    if values.is_empty() {
        return Err(Error::InvalidConfig("empty K_SE sweep".into()));
    }
    let mut result = SweepResult { axis: SweepAxis::Kse, summaries: Vec::new(), reports: Vec::new() };
    for &k in values {
        if k == 0 || k > config.devices {
            return Err(Error::KseOutOfRange { kse: k, total: config.devices });
        }
        for method in SWEEP_METHODS {
            let cfg = ExperimentConfig { method, ..config.clone() };
            let run = run_fixed(&cfg, k, 1, SweepAxis::Kse)?;
            result.summaries.push(run.summary);
            result.reports.extend(run.reports);
        }
    }
    Ok(result)
}

pub const ROUNDS_HEADER: [&str; 8] =
    ["method", "subchannels", "kse", "trial", "round", "selected", "t_comp_s", "iterations"];

pub const SUMMARY_HEADER: [&str; 11] = [
    "method",
    "axis",
    "point",
    "kse",
    "subchannels",
    "rounds",
    "trials",
    "mean_total_s",
    "std_total_s",
    "kse_opt",
    "r_min",
];

/// Writes round reports; `selected` is a `;`-separated device list.
pub fn write_rounds_csv(path: &Path, reports: &[RoundReport]) -> Result<()> {
    let mut w = report::writer(path)?;
    let err = |source| Error::Csv { path: path.to_path_buf(), source };
    w.write_record(ROUNDS_HEADER).map_err(err)?;
    for r in reports {
        let selected = r.selected.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        w.write_record([
            r.method.to_string(),
            r.subchannels.to_string(),
            r.kse.to_string(),
            r.trial.to_string(),
            r.round.to_string(),
            selected,
            report::fmt_f64(r.t_comp_seconds),
            r.iterations.to_string(),
        ])
        .map_err(err)?;
    }
    report::finish(w, path)
}

pub fn write_summary_csv(path: &Path, summaries: &[ExperimentSummary]) -> Result<()> {
    let mut w = report::writer(path)?;
    let err = |source| Error::Csv { path: path.to_path_buf(), source };
    w.write_record(SUMMARY_HEADER).map_err(err)?;
    for s in summaries {
        let opt = |f: fn(&KseChoice) -> String| s.kse_choice.as_ref().map(f).unwrap_or_default();
        w.write_record([
            s.method.to_string(),
            s.axis.as_str().to_string(),
            s.point().map(|p| p.to_string()).unwrap_or_default(),
            s.kse.to_string(),
            s.subchannels.to_string(),
            s.rounds.to_string(),
            s.trials.to_string(),
            report::fmt_f64(s.mean_total_s),
            report::fmt_f64(s.std_total_s),
            opt(|c| c.kse.to_string()),
            opt(|c| c.r_min.to_string()),
        ])
        .map_err(err)?;
    }
    report::finish(w, path)
}

/// Files written by [`run_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub summaries: Vec<ExperimentSummary>,
    pub rounds_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub trajectory_csv: Option<PathBuf>,
    pub trajectory: Option<Trajectory>,
}

/// Runs whatever the config asks for and writes `rounds.csv`,
/// `summary.csv` and, for FL runs, `trajectory.csv` into `out_dir`.
pub fn run_scenario(config: &ExperimentConfig, out_dir: &Path) -> Result<ScenarioOutput> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Io { path: out_dir.to_path_buf(), source })?;

    let (summaries, reports) = match config.sweep.axis {
        SweepAxis::None => {
            let run = run_pipeline(config)?;
            (vec![run.summary], run.reports)
        }
        SweepAxis::Subchannels => {
            let r = sweep_subchannels(config, &config.sweep.values)?;
            (r.summaries, r.reports)
        }
        SweepAxis::Kse => {
            let r = sweep_kse(config, &config.sweep.values)?;
            (r.summaries, r.reports)
        }
    };
    let rounds_csv = out_dir.join("rounds.csv");
    let summary_csv = out_dir.join("summary.csv");
    write_rounds_csv(&rounds_csv, &reports)?;
    write_summary_csv(&summary_csv, &summaries)?;

    let (trajectory_csv, trajectory) = if config.fl.enabled {
        let run = FlRunConfig { seed: config.seed, ..config.fl.run.clone() };
        let task =
            fl::SyntheticTask::generate(&config.fl.task, &mut derive_rng(config.seed, 0, 0, Stream::Task))?;
        let traj = fl::run_fl(&run, &task)?;
        let path = out_dir.join("trajectory.csv");
        traj.write_csv(&path)?;
        (Some(path), Some(traj))
    } else {
        (None, None)
    };

    Ok(ScenarioOutput { summaries, rounds_csv, summary_csv, trajectory_csv, trajectory })
}
