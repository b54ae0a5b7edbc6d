//! Experiment runners measuring evaluations-to-convergence across problem
//! families.
//!
//! Every (setting, seed) pair builds its own instance with `global_seed =
//! seed`, calibrates it to a unit total variance split according to the
//! study's targets, computes a reference optimum and runs the GA with a run
//! seed derived from the GA seed and the instance seed. Runs are independent
//! and execute in parallel; results are sorted by seed before summarizing.

use rayon::prelude::*;

use super::ga::{run_ga, BenchmarkResult, GaConfig};
use super::reference::{reference_best, ReferenceBest};
use crate::calibration::{calibrate_weights, target_sigma, TargetShares};
use crate::composition::{
    build_deceptive, build_first_order, build_full_order, build_interaction_ensemble,
    CompositionSpec, DeceptiveParams,
};
use crate::error::{Error, Result};
use crate::io::content_hash;
use crate::mdrf::mix64;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub seeds: Vec<u64>,
    pub ga: GaConfig,
    pub epsilon: f64,
    /// Monte Carlo samples per calibration.
    pub calibration_samples: usize,
    /// Evaluation budget of the reference search for non-separable instances.
    pub reference_budget: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seeds: (0..20).collect(),
            ga: GaConfig::default(),
            epsilon: 1e-3,
            calibration_samples: 20_000,
            reference_budget: 200_000,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Argument("study needs at least one seed".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Argument("epsilon must be positive".into()));
        }
        self.ga.validate()
    }

    /// GA seed of the run on instance `seed`.
    pub fn run_seed(&self, seed: u64) -> u64 {
        mix64(self.ga.rng_seed ^ seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    /// Content hash of the instance's spec document.
    pub spec_hash: String,
    pub reference: ReferenceBest,
    pub result: BenchmarkResult,
}

impl RunRecord {
    /// N, or the full budget for a failed run.
    pub fn censored_n(&self, budget: u64) -> f64 {
        self.result.evaluations_to_converge.unwrap_or(budget) as f64
    }
}

/// Order statistics of N over the runs of one setting. Failed runs enter
/// censored at the evaluation budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub failures: usize,
    pub median: f64,
    pub mean: f64,
    pub p20: f64,
    pub p80: f64,
}

impl Summary {
    pub fn from_values(values: &[f64], failures: usize) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = if sorted.is_empty() {
            f64::NAN
        } else {
            sorted.iter().sum::<f64>() / sorted.len() as f64
        };
        Self {
            runs: sorted.len(),
            failures,
            median: percentile(&sorted, 0.5),
            mean,
            p20: percentile(&sorted, 0.2),
            p80: percentile(&sorted, 0.8),
        }
    }

    pub fn spread(&self) -> f64 {
        self.p80 - self.p20
    }
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = q.clamp(0.0, 1.0) * (len - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingResult {
    /// Display name, e.g. `"k=10"`.
    pub label: String,
    /// Name of the swept parameter, e.g. `"k"`.
    pub parameter: String,
    pub value: f64,
    pub runs: Vec<RunRecord>,
    pub summary: Summary,
}

impl SettingResult {
    /// Sorts `runs` by seed and summarizes them with failures censored at
    /// `budget`.
    pub fn from_runs(
        label: String,
        parameter: &str,
        value: f64,
        mut runs: Vec<RunRecord>,
        budget: u64,
    ) -> Self {
        runs.sort_by_key(|r| r.seed);
        let values: Vec<f64> = runs.iter().map(|r| r.censored_n(budget)).collect();
        let failures = runs.iter().filter(|r| !r.result.success).count();
        Self {
            label,
            parameter: parameter.to_string(),
            value,
            summary: Summary::from_values(&values, failures),
            runs,
        }
    }

    fn swept(parameter: &str, value: f64, runs: Vec<RunRecord>, budget: u64) -> Self {
        Self::from_runs(
            format!("{parameter}={value}"),
            parameter,
            value,
            runs,
            budget,
        )
    }

    /// Whether every reference optimum of this setting was certified.
    pub fn certified(&self) -> bool {
        self.runs.iter().all(|r| r.reference.certified)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub study: String,
    pub settings: Vec<SettingResult>,
}

impl StudyResult {
    pub fn medians(&self) -> Vec<f64> {
        self.settings.iter().map(|s| s.summary.median).collect()
    }

    /// Slopes of `ln(median N)` against the setting value between
    /// consecutive settings.
    pub fn log_growth_rates(&self) -> Vec<f64> {
        self.settings
            .windows(2)
            .map(|w| {
                (w[1].summary.median.ln() - w[0].summary.median.ln()) / (w[1].value - w[0].value)
            })
            .collect()
    }

    /// Least-squares slope of `ln(median N)` against the setting value.
    pub fn log_growth_fit(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .settings
            .iter()
            .map(|s| (s.value, s.summary.median.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }
}

/// Problem family of a study setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// First-order fields calibrated to `target_sigma(n, k)`.
    FirstOrder { n: usize, r: u32, k: f64 },
    /// Every subset up to order `max_order`, weighted by interaction shares.
    Interaction { n: usize, r: u32, max_order: usize },
    /// One field over all `d` variables, unit variance.
    FullOrder { d: usize, r: u32 },
    /// Uncalibrated deceptive composition.
    Deceptive(DeceptiveParams),
}

/// A generated problem and the targets it was calibrated to.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub spec: CompositionSpec,
    pub targets: Option<TargetShares>,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::FirstOrder { .. } => "first_order",
            Family::Interaction { .. } => "interaction",
            Family::FullOrder { .. } => "full_order",
            Family::Deceptive(_) => "deceptive",
        }
    }

    /// Builds the instance with `global_seed = seed`; calibration uses
    /// `seed` as its Monte Carlo seed.
    pub fn build(&self, seed: u64, calibration_samples: usize) -> Result<Instance> {
        let (spec, targets) = match *self {
            Family::FirstOrder { n, r, k } => (
                build_first_order(n, r, seed, &vec![1.0; n])?,
                TargetShares::per_term(&target_sigma(n, k))?,
            ),
            Family::Interaction { n, r, max_order } => {
                let spec = build_interaction_ensemble(n, max_order, r, seed)?;
                let targets = TargetShares::interaction(&spec)?;
                (spec, targets)
            }
            Family::FullOrder { d, r } => (
                build_full_order(d, r, seed)?,
                TargetShares::per_term(&[1.0])?,
            ),
            Family::Deceptive(params) => {
                return Ok(Instance {
                    spec: build_deceptive(params, seed)?,
                    targets: None,
                })
            }
        };
        let spec = calibrate_weights(&spec, &targets, calibration_samples, seed)?;
        Ok(Instance {
            spec,
            targets: Some(targets),
        })
    }

    /// Construction parameters as a JSON object for spec metadata.
    pub fn recipe(&self, seed: u64, calibration_samples: usize) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("builder".into(), Value::from(self.name()));
        m.insert("seed".into(), Value::from(seed));
        match *self {
            Family::FirstOrder { n, r, k } => {
                m.insert("n".into(), Value::from(n));
                m.insert("r".into(), Value::from(r));
                m.insert("k".into(), Value::from(k));
            }
            Family::Interaction { n, r, max_order } => {
                m.insert("n".into(), Value::from(n));
                m.insert("r".into(), Value::from(r));
                m.insert("max_order".into(), Value::from(max_order));
            }
            Family::FullOrder { d, r } => {
                m.insert("d".into(), Value::from(d));
                m.insert("r".into(), Value::from(r));
            }
            Family::Deceptive(p) => {
                m.insert("n".into(), Value::from(p.n));
                m.insert("r_low".into(), Value::from(p.r_low));
                m.insert("r_high".into(), Value::from(p.r_high));
                m.insert("spike_prob".into(), Value::from(p.spike_prob));
                m.insert("spike_depth".into(), Value::from(p.spike_depth));
                return m;
            }
        }
        m.insert(
            "calibration_samples".into(),
            Value::from(calibration_samples),
        );
        m
    }
}

/// Reference and GA run on one instance.
pub fn run_instance(comp: &CompositionSpec, cfg: &StudyConfig, seed: u64) -> Result<RunRecord> {
    let reference = reference_best(comp, cfg.reference_budget);
    let ga = GaConfig {
        rng_seed: cfg.run_seed(seed),
        ..cfg.ga.clone()
    };
    let result = run_ga(comp, &ga, reference.value, cfg.epsilon)?;
    Ok(RunRecord {
        seed,
        spec_hash: content_hash(comp),
        reference,
        result,
    })
}

fn sweep<F>(
    study: &str,
    parameter: &str,
    values: &[f64],
    cfg: &StudyConfig,
    build: F,
) -> Result<StudyResult>
where
    F: Fn(f64) -> Family + Sync,
{
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::Argument(format!(
            "{study} study needs at least one {parameter} value"
        )));
    }
    let jobs: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let records: Vec<(usize, RunRecord)> = jobs
        .par_iter()
        .map(|&(s, seed)| {
            let instance = build(values[s]).build(seed, cfg.calibration_samples)?;
            Ok((s, run_instance(&instance.spec, cfg, seed)?))
        })
        .collect::<Result<_>>()?;
    let mut per_setting: Vec<Vec<RunRecord>> = vec![Vec::new(); values.len()];
    for (s, record) in records {
        per_setting[s].push(record);
    }
    let settings = per_setting
        .into_iter()
        .zip(values)
        .map(|(runs, &v)| SettingResult::swept(parameter, v, runs, cfg.ga.max_evaluations))
        .collect();
    Ok(StudyResult {
        study: study.to_string(),
        settings,
    })
}

/// First-order family calibrated to `target_sigma(n, k)` for each `k`.
pub fn run_study_k(n: usize, r: u32, k_values: &[f64], cfg: &StudyConfig) -> Result<StudyResult> {
    sweep("k", "k", k_values, cfg, |k| Family::FirstOrder { n, r, k })
}

/// Interaction ensembles up to order `Q`, weighted by the interaction shares.
pub fn run_study_interaction(
    n: usize,
    r: u32,
    q_values: &[usize],
    cfg: &StudyConfig,
) -> Result<StudyResult> {
    let values: Vec<f64> = q_values.iter().map(|&q| q as f64).collect();
    sweep("interaction", "Q", &values, cfg, |q| Family::Interaction {
        n,
        r,
        max_order: q as usize,
    })
}

/// First-order family with equal shares at each resolution.
pub fn run_study_resolution(n: usize, r_values: &[u32], cfg: &StudyConfig) -> Result<StudyResult> {
    let values: Vec<f64> = r_values.iter().map(|&r| r as f64).collect();
    sweep("resolution", "r", &values, cfg, |r| Family::FirstOrder {
        n,
        r: r as u32,
        k: 0.0,
    })
}

/// One full-order field over `d` variables, unit variance.
pub fn run_study_dimension(r: u32, d_values: &[usize], cfg: &StudyConfig) -> Result<StudyResult> {
    let values: Vec<f64> = d_values.iter().map(|&d| d as f64).collect();
    sweep("dimension", "d", &values, cfg, |d| Family::FullOrder {
        d: d as usize,
        r,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeceptionReport {
    pub params: DeceptiveParams,
    /// Runs on the instance with spikes.
    pub deceptive: Vec<RunRecord>,
    /// Runs on the same base terms without spikes.
    pub control: Vec<RunRecord>,
    /// Deceptive runs that ended in the basin of the base optimum instead.
    pub trapped: usize,
}

impl DeceptionReport {
    pub fn deceptive_success(&self) -> f64 {
        success_fraction(&self.deceptive)
    }

    pub fn control_success(&self) -> f64 {
        success_fraction(&self.control)
    }

    pub fn trapped_fraction(&self) -> f64 {
        self.trapped as f64 / self.deceptive.len().max(1) as f64
    }
}

fn success_fraction(runs: &[RunRecord]) -> f64 {
    runs.iter().filter(|r| r.result.success).count() as f64 / runs.len().max(1) as f64
}

/// Deceptive instances against spike-free controls with identical base terms,
/// one instance pair per seed. Weights are used as built, without
/// calibration.
pub fn run_study_deception(params: DeceptiveParams, cfg: &StudyConfig) -> Result<DeceptionReport> {
    cfg.validate()?;
    let control_params = DeceptiveParams {
        spike_prob: 0.0,
        ..params
    };
    let pairs: Vec<(RunRecord, RunRecord, bool)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let deceptive = run_instance(&build_deceptive(params, seed)?, cfg, seed)?;
            let control = run_instance(&build_deceptive(control_params, seed)?, cfg, seed)?;
            let trapped = !deceptive.result.success
                && deceptive.result.best_value <= control.reference.value + cfg.epsilon;
            Ok((deceptive, control, trapped))
        })
        .collect::<Result<_>>()?;
    let mut pairs = pairs;
    pairs.sort_by_key(|p| p.0.seed);
    let trapped = pairs.iter().filter(|p| p.2).count();
    let (deceptive, control) = pairs.into_iter().map(|(d, c, _)| (d, c)).unzip();
    Ok(DeceptionReport {
        params,
        deceptive,
        control,
        trapped,
    })
}
