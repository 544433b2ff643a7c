//! Toy federated training under compression distortion.
//!
//! Each device holds the quadratic `f_k(w) = ½‖w − b_k‖²`, so `L = μ = 1`
//! and the global optimum is the sample-weighted mean of the anchors. Every
//! round a random subset of devices runs `E` steps of noisy gradient descent
//! from the global model, each upload is perturbed by Gaussian noise with
//! standard deviation `√(2ℒ)/K_SE`, and the server takes the sample-weighted
//! average of the perturbed uploads.

use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::{step_size, DeltaAggregation, FlBoundParams};
use crate::error::{Error, Result};
use crate::report;
use crate::rng::{derive_rng, Stream};

/// Rounds a distance must stay under the threshold to count as reached.
pub const DEBOUNCE_ROUNDS: usize = 10;

/// Recipe for a [`SyntheticTask`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    pub devices: usize,
    pub dimension: usize,
    /// Standard deviation of the per-coordinate stochastic gradient noise.
    pub noise_scale: f64,
    pub samples_per_device: u64,
    /// Every coordinate of the initial global model.
    pub init_value: f64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self { devices: 100, dimension: 10, noise_scale: 0.1, samples_per_device: 100, init_value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub anchors: Vec<Vec<f64>>,
    pub noise_scale: f64,
    pub sample_counts: Vec<f64>,
    pub init: Vec<f64>,
}

impl SyntheticTask {
    /// Draws anchors from a unit Gaussian.
    pub fn generate<R: Rng + ?Sized>(spec: &TaskSpec, rng: &mut R) -> Result<Self> {
        if spec.devices == 0 || spec.dimension == 0 || spec.samples_per_device == 0 {
            return Err(Error::InvalidParams("task needs devices, dimension and samples".into()));
        }
        if !(spec.noise_scale >= 0.0) {
            return Err(Error::InvalidParams("noise scale must be nonnegative".into()));
        }
        let anchors = (0..spec.devices)
            .map(|_| (0..spec.dimension).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        Ok(Self {
            anchors,
            noise_scale: spec.noise_scale,
            sample_counts: vec![spec.samples_per_device as f64; spec.devices],
            init: vec![spec.init_value; spec.dimension],
        })
    }

    pub fn devices(&self) -> usize {
        self.anchors.len()
    }

    pub fn dimension(&self) -> usize {
        self.init.len()
    }

    /// Sample-weighted mean of the anchors.
    pub fn optimum(&self) -> Vec<f64> {
        let total: f64 = self.sample_counts.iter().sum();
        let mut w = vec![0.0; self.dimension()];
        for (b, d) in self.anchors.iter().zip(&self.sample_counts) {
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi += bi * d / total;
            }
        }
        w
    }

    pub fn local_loss(&self, device: usize, w: &[f64]) -> f64 {
        0.5 * sq_dist(w, &self.anchors[device])
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRate {
    /// `η_t = (E+1)/(E·μ·(a+t))` with the task's `L = μ = 1`.
    #[default]
    Decaying,
    Constant(f64),
}

impl LearningRate {
    pub fn at(&self, local_epochs: u32, t: u64) -> f64 {
        match *self {
            LearningRate::Decaying => step_size(1.0, 1.0, local_epochs, t),
            LearningRate::Constant(eta) => eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlRunConfig {
    pub kse: usize,
    pub local_epochs: u32,
    pub rounds: usize,
    pub seed: u64,
    pub compressor_loss: f64,
    pub learning_rate: LearningRate,
    pub threshold: f64,
}

impl Default for FlRunConfig {
    fn default() -> Self {
        Self {
            kse: 10,
            local_epochs: 1,
            rounds: 500,
            seed: 0,
            compressor_loss: 1.0,
            learning_rate: LearningRate::Decaying,
            threshold: 0.2,
        }
    }
}

impl FlRunConfig {
    pub fn validate(&self, devices: usize) -> Result<()> {
        if self.kse == 0 || self.kse > devices {
            return Err(Error::KseOutOfRange { kse: self.kse, total: devices });
        }
        if self.rounds == 0 || self.local_epochs == 0 {
            return Err(Error::InvalidParams("rounds and local epochs must be at least 1".into()));
        }
        if !(self.compressor_loss >= 0.0) || !(self.threshold > 0.0) {
            return Err(Error::InvalidParams("compressor loss must be ≥ 0 and threshold > 0".into()));
        }
        Ok(())
    }
}

/// `E` noisy gradient steps on `f_k` from `w_init`; step `e` uses the rate at
/// global iteration `first_step + e`.
pub fn local_update<R: Rng + ?Sized>(
    w_init: &[f64],
    task: &SyntheticTask,
    device: usize,
    local_epochs: u32,
    rate: LearningRate,
    first_step: u64,
    rng: &mut R,
) -> Vec<f64> {
    let anchor = &task.anchors[device];
    let mut w = w_init.to_vec();
    for e in 0..local_epochs {
        let eta = rate.at(local_epochs, first_step + e as u64);
        for (wi, bi) in w.iter_mut().zip(anchor) {
            let noise = if task.noise_scale > 0.0 {
                task.noise_scale * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            *wi -= eta * (*wi - bi + noise);
        }
    }
    w
}

/// Adds i.i.d. `N(0, 2ℒ/K_SE²)` noise to every coordinate.
pub fn apply_distortion<R: Rng + ?Sized>(
    w: &[f64],
    kse: usize,
    compressor_loss: f64,
    rng: &mut R,
) -> Vec<f64> {
    let sigma = (2.0 * compressor_loss).sqrt() / kse as f64;
    if sigma == 0.0 {
        return w.to_vec();
    }
    w.iter().map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Weighted average with weights normalised over the participants.
pub fn aggregate(models: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::EmptyParticipantSet);
    }
    if models.len() != weights.len() {
        return Err(Error::InvalidParams(format!("{} models with {} weights", models.len(), weights.len())));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidParams("aggregation weights must be positive".into()));
    }
    let dim = models[0].len();
    if models.iter().any(|m| m.len() != dim) {
        return Err(Error::InvalidParams("models differ in dimension".into()));
    }
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; dim];
    for (m, w) in models.iter().zip(weights) {
        let share = w / total;
        for (o, x) in out.iter_mut().zip(m) {
            *o += share * x;
        }
    }
    Ok(out)
}

/// Per-round record of a training run; entry `i` is the state after round `i + 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub distance: Vec<f64>,
    /// `(1/K)·Σ_k r_k f_k(w_g)` over the round's participants.
    pub global_loss: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.distance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distance.is_empty()
    }

    /// Writes `round,distance,global_loss` rows, rounds counted from 1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = report::writer(path)?;
        let err = |source| Error::Csv { path: path.to_path_buf(), source };
        w.write_record(["round", "distance", "global_loss"]).map_err(err)?;
        for (i, (d, l)) in self.distance.iter().zip(&self.global_loss).enumerate() {
            w.write_record([(i + 1).to_string(), report::fmt_f64(*d), report::fmt_f64(*l)]).map_err(err)?;
        }
        report::finish(w, path)
    }
}

/// Uniform sample of `kse` distinct devices out of `devices`, ascending.
pub fn select_devices<R: Rng + ?Sized>(devices: usize, kse: usize, rng: &mut R) -> Result<Vec<usize>> {
    if kse == 0 || kse > devices {
        return Err(Error::KseOutOfRange { kse, total: devices });
    }
    let mut picked = index::sample(rng, devices, kse).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn run_fl(config: &FlRunConfig, task: &SyntheticTask) -> Result<Trajectory> {
    let devices = task.devices();
    config.validate(devices)?;
    let optimum = task.optimum();
    let e = config.local_epochs;
    let mut global = task.init.clone();
    let mut traj = Trajectory {
        distance: Vec::with_capacity(config.rounds),
        global_loss: Vec::with_capacity(config.rounds),
    };

    for round in 0..config.rounds as u64 {
        let selected =
            select_devices(devices, config.kse, &mut derive_rng(config.seed, 0, round, Stream::Selection))?;
        let mut uploads = Vec::with_capacity(selected.len());
        let mut weights = Vec::with_capacity(selected.len());
        for &k in &selected {
            let mut rng = derive_rng(config.seed, k as u64 + 1, round, Stream::Training);
            let local = local_update(&global, task, k, e, config.learning_rate, round * e as u64, &mut rng);
            uploads.push(apply_distortion(&local, config.kse, config.compressor_loss, &mut rng));
            weights.push(task.sample_counts[k]);
        }
        global = aggregate(&uploads, &weights)?;
        traj.distance.push(sq_dist(&global, &optimum).sqrt());
        let loss: f64 = selected.iter().map(|&k| task.local_loss(k, &global)).sum();
        traj.global_loss.push(loss / devices as f64);
    }
    Ok(traj)
}

/// First round (counted from 1) whose distance, and the distances of the
/// following rounds up to [`DEBOUNCE_ROUNDS`] in total, are under `threshold`.
pub fn rounds_to_accuracy(trajectory: &Trajectory, threshold: f64) -> Option<usize> {
    trajectory.distance.windows(DEBOUNCE_ROUNDS).position(|w| w.iter().all(|d| *d < threshold)).map(|i| i + 1)
}

/// Per-round median over several trajectories of equal length.
pub fn median_trajectory(runs: &[Trajectory]) -> Trajectory {
    let len = runs.iter().map(Trajectory::len).min().unwrap_or(0);
    let median = |pick: &dyn Fn(&Trajectory) -> &Vec<f64>| -> Vec<f64> {
        (0..len).map(|i| median(runs.iter().map(|r| pick(r)[i]).collect())).collect()
    };
    Trajectory { distance: median(&|r| &r.distance), global_loss: median(&|r| &r.global_loss) }
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Runs `config` once per seed, each with its own task draw, in parallel.
pub fn run_seeds(config: &FlRunConfig, spec: &TaskSpec, seeds: &[u64]) -> Result<Vec<Trajectory>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let task = SyntheticTask::generate(spec, &mut derive_rng(seed, 0, 0, Stream::Task))?;
            run_fl(&FlRunConfig { seed, ..config.clone() }, &task)
        })
        .collect()
}

/// Derives bound parameters consistent with `task`.
///
/// `G²` is the largest squared stochastic gradient seen over a short
/// full-participation run without distortion, `δ_k² = noise_scale²·d`, and
/// `χ = Σ_k [f_k(w⁰) − f_k(b_k)]` at the initial model.
pub fn calibrate_bound_params(
    task: &SyntheticTask,
    config: &FlRunConfig,
    epsilon: f64,
    calibration_rounds: usize,
) -> FlBoundParams {
    let devices = task.devices();
    let e = config.local_epochs;
    let mut rng = derive_rng(config.seed, 0, 0, Stream::Calibration);
    let mut global = task.init.clone();
    let mut g2_max: f64 = 0.0;
    for round in 0..calibration_rounds as u64 {
        let mut uploads = Vec::with_capacity(devices);
        for k in 0..devices {
            let mut w = global.clone();
            for step in 0..e {
                let eta = config.learning_rate.at(e, round * e as u64 + step as u64);
                let mut g2 = 0.0;
                for (wi, bi) in w.iter_mut().zip(&task.anchors[k]) {
                    let g = *wi - bi + task.noise_scale * rng.sample::<f64, _>(StandardNormal);
                    g2 += g * g;
                    *wi -= eta * g;
                }
                g2_max = g2_max.max(g2);
            }
            uploads.push(w);
        }
        global = aggregate(&uploads, &task.sample_counts).expect("full participation");
    }

    let delta = task.noise_scale * (task.dimension() as f64).sqrt();
    let chi = (0..devices).map(|k| task.local_loss(k, &task.init)).sum();
    FlBoundParams {
        smoothness: 1.0,
        strong_convexity: 1.0,
        grad_bound: g2_max.sqrt(),
        grad_variance: vec![delta; devices],
        local_epochs: e,
        heterogeneity: chi,
        compressor_loss: config.compressor_loss,
        epsilon,
        total_devices: devices,
        delta_aggregation: DeltaAggregation::MeanAll,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(noise: f64) -> SyntheticTask {
        let spec = TaskSpec { devices: 8, dimension: 4, noise_scale: noise, ..TaskSpec::default() };
        SyntheticTask::generate(&spec, &mut derive_rng(1, 0, 0, Stream::Task)).unwrap()
    }

    #[test]
    fn unit_step_lands_on_anchor() {
        let t = task(0.0);
        let zero = vec![0.0; t.dimension()];
        let w = local_update(
            &zero,
            &t,
            3,
            1,
            LearningRate::Constant(1.0),
            0,
            &mut derive_rng(0, 0, 0, Stream::Training),
        );
        assert_eq!(w, t.anchors[3]);
    }

    #[test]
    fn many_small_steps_converge_to_anchor() {
        let t = task(0.0);
        let w = local_update(
            &t.init,
            &t,
            2,
            2000,
            LearningRate::Constant(0.05),
            0,
            &mut derive_rng(0, 0, 0, Stream::Training),
        );
        assert!(sq_dist(&w, &t.anchors[2]).sqrt() < 1e-12);
    }

    #[test]
    fn local_update_is_seeded() {
        let t = task(0.3);
        let a = local_update(
            &t.init,
            &t,
            1,
            5,
            LearningRate::Decaying,
            0,
            &mut derive_rng(4, 0, 0, Stream::Training),
        );
        let b = local_update(
            &t.init,
            &t,
            1,
            5,
            LearningRate::Decaying,
            0,
            &mut derive_rng(4, 0, 0, Stream::Training),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn zero_loss_means_no_distortion() {
        let w = vec![1.0, -2.0, 3.5];
        assert_eq!(apply_distortion(&w, 3, 0.0, &mut derive_rng(0, 0, 0, Stream::Training)), w);
    }

    #[test]
    fn aggregate_cases() {
        let u = vec![1.0, 2.0];
        let v = vec![5.0, -2.0];
        assert_eq!(aggregate(&[u.clone(), v.clone()], &[1.0, 1.0]).unwrap(), vec![3.0, 0.0]);
        assert_eq!(aggregate(std::slice::from_ref(&u), &[7.0]).unwrap(), u);
        assert_eq!(aggregate(&[u.clone(), v.clone()], &[1.0, 3.0]).unwrap(), vec![4.0, -1.0]);
        assert!(matches!(aggregate(&[], &[]), Err(Error::EmptyParticipantSet)));
        assert!(aggregate(std::slice::from_ref(&u), &[0.0]).is_err());
    }

    #[test]
    fn noiseless_full_participation_converges() {
        let t = task(0.0);
        let cfg = FlRunConfig {
            kse: 8,
            compressor_loss: 0.0,
            rounds: 200,
            learning_rate: LearningRate::Constant(0.2),
            ..FlRunConfig::default()
        };
        let traj = run_fl(&cfg, &t).unwrap();
        assert!(traj.distance.windows(2).all(|w| w[1] <= w[0]));
        assert!(*traj.distance.last().unwrap() < 1e-6);
    }

    #[test]
    fn global_loss_non_increasing_under_step_schedule() {
        let t = task(0.0);
        let cfg = FlRunConfig {
            kse: 8,
            compressor_loss: 0.0,
            rounds: 300,
            local_epochs: 3,
            ..FlRunConfig::default()
        };
        let traj = run_fl(&cfg, &t).unwrap();
        assert!(traj.distance.windows(2).all(|w| w[1] <= w[0]));
        assert!(traj.global_loss.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn run_is_reproducible() {
        let t = task(0.2);
        let cfg = FlRunConfig { kse: 3, rounds: 40, compressor_loss: 0.5, ..FlRunConfig::default() };
        let a = run_fl(&cfg, &t).unwrap();
        let b = run_fl(&cfg, &t).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
    }

    #[test]
    fn rounds_to_accuracy_cases() {
        let falling = Trajectory {
            distance: (0..100).map(|i| 1.0 - 0.02 * i as f64 + 0.0199).collect(),
            global_loss: vec![0.0; 100],
        };
        // 1.0199 - 0.02 i < 0.2 first at i = 41, i.e. round 42
        assert_eq!(rounds_to_accuracy(&falling, 0.2), Some(42));
        let flat = Trajectory { distance: vec![0.5; 50], global_loss: vec![0.0; 50] };
        assert_eq!(rounds_to_accuracy(&flat, 0.2), None);
        let mut blip = vec![0.5; 50];
        blip[5] = 0.1;
        let t = Trajectory { distance: blip, global_loss: vec![0.0; 50] };
        assert_eq!(rounds_to_accuracy(&t, 0.2), None);
    }

    #[test]
    fn select_devices_full_and_invalid() {
        let mut rng = derive_rng(0, 0, 0, Stream::Selection);
        assert_eq!(select_devices(5, 5, &mut rng).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(select_devices(5, 0, &mut rng).is_err());
        assert!(select_devices(5, 6, &mut rng).is_err());
    }

    #[test]
    fn calibration_is_consistent() {
        let t = task(0.1);
        let cfg = FlRunConfig { kse: 4, ..FlRunConfig::default() };
        let p = calibrate_bound_params(&t, &cfg, 0.1, 5);
        p.validate().unwrap();
        assert_eq!(p.total_devices, 8);
        assert!((p.grad_variance[0] - 0.2).abs() < 1e-12);
        assert!(p.grad_bound > 0.0 && p.heterogeneity > 0.0);
    }

    #[test]
    fn median_of_runs() {
        let runs = vec![
            Trajectory { distance: vec![1.0, 5.0], global_loss: vec![0.0, 0.0] },
            Trajectory { distance: vec![3.0, 1.0], global_loss: vec![1.0, 0.0] },
            Trajectory { distance: vec![2.0, 2.0], global_loss: vec![2.0, 0.0] },
        ];
        assert_eq!(median_trajectory(&runs).distance, vec![2.0, 2.0]);
    }
}
