use std::fmt;
use std::path::Path;

use rfcgen::bench::ga::GaConfig;
use rfcgen::bench::study::{
    run_instance, run_study_deception, run_study_dimension, run_study_interaction, run_study_k,
    run_study_resolution, RunRecord, SettingResult, StudyConfig, StudyResult,
};
use rfcgen::calibration::{calibrate_weights, target_sigma, TargetShares};
use rfcgen::composition::{eval as eval_point, grid_sample, CompositionSpec};
use rfcgen::io::{hash_text, parse_document, serialize_document, SpecDocument};
use rfcgen::sensitivity::{anova_grid, estimate_first_order, SensitivityReport};
use rfcgen::Error;
use serde_json::{json, Value};

use crate::output::{csv_writer, num, read_points, read_text, write_text};
use crate::presets::{family_from_flags, Overrides, Preset};
use crate::{
    BenchArgs, CalibrateArgs, EvalArgs, Format, GaArgs, GenArgs, GridArgs, SobolArgs, SobolMethod,
    StudyArgs,
};

pub const THREADS_VAR: &str = "RFCGEN_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Core(Error),
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                Error::Argument(_) => 1,
                Error::Resource(_) => 3,
                Error::Degenerate(_) | Error::Calibration { .. } => 4,
                _ => 2,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Caps the rayon pool at `RFCGEN_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "{THREADS_VAR} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn load(path: &Path) -> Result<(SpecDocument, String)> {
    let text = read_text(path)?;
    let doc = parse_document(&text)?;
    // Hash the canonical form so formatting differences do not matter.
    let hash = hash_text(&serialize_document(&doc));
    Ok((doc, hash))
}

pub fn gen(a: GenArgs) -> Result<()> {
    let overrides = Overrides {
        n: a.n,
        r: a.r,
        k: a.k,
        q: a.q,
        d: a.d,
    };
    let family = match (a.preset, a.family) {
        (Some(p), _) => p.family(&overrides),
        (None, Some(kind)) => family_from_flags(kind, &overrides),
        (None, None) => return Err(CliError::Usage("gen needs --preset or --family".into())),
    };
    let instance = family.build(a.seed, a.samples)?;
    let mut doc = SpecDocument::new(instance.spec);
    doc.metadata.recipe = Some(family.recipe(a.seed, a.samples));
    doc.metadata.targets = instance.targets.map(|t| t.shares().to_vec());
    write_text(a.out.as_deref(), &serialize_document(&doc))
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let (doc, hash) = load(&a.spec)?;
    let spec = &doc.spec;
    let points = read_points(&a.points)?;
    if points.is_empty() {
        return write_text(a.out.as_deref(), "");
    }
    let mut w = csv_writer(a.out.as_deref())?;
    let mut header: Vec<String> = (0..spec.n_vars()).map(|d| format!("x{d}")).collect();
    header.push("f".into());
    header.push("spec_hash".into());
    w.write_record(&header)?;
    for (i, x) in points.iter().enumerate() {
        let f = eval_point(spec, x).map_err(|e| match e {
            Error::Argument(m) => CliError::Validation(format!("point {}: {m}", i + 1)),
            other => CliError::Validation(format!("point {}: {other}", i + 1)),
        })?;
        let mut row: Vec<String> = x.iter().map(|&v| num(v)).collect();
        row.push(num(f));
        row.push(hash.clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn grid(a: GridArgs) -> Result<()> {
    let (doc, hash) = load(&a.spec)?;
    let spec = &doc.spec;
    let axes = a
        .axes
        .unwrap_or_else(|| (0..spec.n_vars().min(2)).collect());
    let slice = match a.slice.as_slice() {
        [v] => vec![*v; spec.n_vars()],
        full => full.to_vec(),
    };
    let table = grid_sample(spec, a.points_per_axis, &axes, &slice)?;
    let mut w = csv_writer(a.out.as_deref())?;
    let mut header: Vec<String> = table.axes.iter().map(|d| format!("x{d}")).collect();
    header.push("f".into());
    header.push("spec_hash".into());
    w.write_record(&header)?;
    for (p, f) in table.points.iter().zip(&table.values) {
        let mut row: Vec<String> = table.axes.iter().map(|&d| num(p[d])).collect();
        row.push(num(*f));
        row.push(hash.clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn subset_label(subset: &[usize]) -> String {
    subset
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

pub fn sobol(a: SobolArgs) -> Result<()> {
    let (doc, hash) = load(&a.spec)?;
    let report: SensitivityReport = match a.method {
        SobolMethod::Pickfreeze => estimate_first_order(&doc.spec, a.samples, a.seed)?,
        SobolMethod::Anova => anova_grid(&doc.spec, a.cells)?,
    };
    match a.format {
        Format::Json => {
            let subsets: Option<Value> = report.subset_indices.as_ref().map(|m| {
                Value::Object(m.iter().map(|(k, v)| (subset_label(k), json!(v))).collect())
            });
            let doc = json!({
                "estimator": report.estimator.as_str(),
                "mean": report.mean,
                "total_variance": report.total_variance,
                "first_order": report.first_order,
                "first_order_se": report.first_order_se,
                "subset_indices": subsets,
                "sample_count": report.sample_count,
                "spec_hash": hash,
            });
            let mut text =
                serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
            text.push('\n');
            write_text(a.out.as_deref(), &text)
        }
        Format::Csv => {
            let mut w = csv_writer(a.out.as_deref())?;
            w.write_record([
                "kind",
                "subset",
                "index",
                "std_error",
                "estimator",
                "mean",
                "total_variance",
                "samples",
                "spec_hash",
            ])?;
            let common =
                |w: &mut csv::Writer<_>, kind: &str, subset: String, index: f64, se: String| {
                    w.write_record([
                        kind.to_string(),
                        subset,
                        num(index),
                        se,
                        report.estimator.as_str().to_string(),
                        num(report.mean),
                        num(report.total_variance),
                        report.sample_count.to_string(),
                        hash.clone(),
                    ])
                };
            for (i, &d) in report.first_order.iter().enumerate() {
                let se = report
                    .first_order_se
                    .as_ref()
                    .map(|s| num(s[i]))
                    .unwrap_or_default();
                common(&mut w, "first_order", i.to_string(), d, se)?;
            }
            if let Some(subsets) = &report.subset_indices {
                for (subset, &d) in subsets {
                    common(&mut w, "subset", subset_label(subset), d, String::new())?;
                }
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn targets_for(a: &CalibrateArgs, spec: &CompositionSpec) -> Result<TargetShares> {
    let k = spec.terms().len();
    if let Some(values) = &a.targets {
        return Ok(TargetShares::per_term(values)?);
    }
    if let Some(path) = &a.targets_file {
        let rows = read_points(path)?;
        let mut pairs = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            match row.as_slice() {
                [term, share] if *term >= 0.0 && term.fract() == 0.0 => {
                    pairs.push((*term as usize, *share))
                }
                _ => {
                    return Err(CliError::Validation(format!(
                        "{}: row {} must be `term,share`",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
        return Ok(TargetShares::new(pairs)?);
    }
    if let Some(sigma_k) = a.sigma_k {
        return Ok(TargetShares::per_term(&target_sigma(k, sigma_k))?);
    }
    if a.interaction {
        return Ok(TargetShares::interaction(spec)?);
    }
    Err(CliError::Usage(
        "calibrate needs one of --targets, --targets-file, --sigma-k, --interaction".into(),
    ))
}

pub fn calibrate(a: CalibrateArgs) -> Result<()> {
    let (doc, _) = load(&a.spec)?;
    let targets = targets_for(&a, &doc.spec)?;
    let spec = calibrate_weights(&doc.spec, &targets, a.samples, a.seed)?;
    let mut out = SpecDocument::new(spec);
    out.metadata.recipe = doc.metadata.recipe;
    out.metadata.targets = Some(targets.shares().to_vec());
    write_text(a.out.as_deref(), &serialize_document(&out))
}

fn study_config(
    ga: &GaArgs,
    seeds: u64,
    default_budget: u64,
    calibration_samples: usize,
) -> StudyConfig {
    StudyConfig {
        seeds: (0..seeds).collect(),
        ga: GaConfig {
            population_size: ga.population,
            max_evaluations: ga.budget.unwrap_or(default_budget),
            rng_seed: ga.ga_seed,
            ..GaConfig::default()
        },
        epsilon: ga.epsilon,
        calibration_samples,
        reference_budget: ga.reference_budget,
    }
}

const RUN_HEADER: [&str; 10] = [
    "setting",
    "seed",
    "N",
    "success",
    "best",
    "reference",
    "certified",
    "evaluations",
    "relative_to",
    "spec_hash",
];

fn run_row(setting: &str, r: &RunRecord) -> Vec<String> {
    vec![
        setting.to_string(),
        r.seed.to_string(),
        r.result
            .evaluations_to_converge
            .map(|n| n.to_string())
            .unwrap_or_default(),
        r.result.success.to_string(),
        num(r.result.best_value),
        num(r.reference.value),
        r.reference.certified.to_string(),
        r.result.evaluations_used.to_string(),
        if r.reference.certified {
            "certified"
        } else {
            "best_known"
        }
        .to_string(),
        r.spec_hash.clone(),
    ]
}

const SUMMARY_HEADER: [&str; 8] = [
    "setting",
    "runs",
    "failures",
    "median",
    "mean",
    "p20",
    "p80",
    "certified",
];

fn summary_row(s: &SettingResult) -> Vec<String> {
    let m = &s.summary;
    vec![
        s.label.clone(),
        m.runs.to_string(),
        m.failures.to_string(),
        num(m.median),
        num(m.mean),
        num(m.p20),
        num(m.p80),
        s.certified().to_string(),
    ]
}

fn write_study(ga: &GaArgs, result: &StudyResult) -> Result<()> {
    if let Some(path) = &ga.runs {
        let mut w = csv_writer(Some(path))?;
        w.write_record(RUN_HEADER)?;
        for s in &result.settings {
            for r in &s.runs {
                w.write_record(run_row(&s.label, r))?;
            }
        }
        w.flush()?;
    }
    let mut w = csv_writer(ga.summary.as_deref())?;
    w.write_record(SUMMARY_HEADER)?;
    for s in &result.settings {
        w.write_record(summary_row(s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let (doc, _) = load(&a.spec)?;
    let cfg = study_config(&a.ga, a.seeds, GaConfig::default().max_evaluations, 0);
    cfg.validate()?;
    let runs = cfg
        .seeds
        .iter()
        .map(|&seed| run_instance(&doc.spec, &cfg, seed))
        .collect::<rfcgen::Result<Vec<_>>>()?;
    let result = StudyResult {
        study: "bench".into(),
        settings: vec![SettingResult::from_runs(
            "spec".into(),
            "spec",
            0.0,
            runs,
            cfg.ga.max_evaluations,
        )],
    };
    write_study(&a.ga, &result)
}

pub fn study(a: StudyArgs) -> Result<()> {
    let p = a.preset;
    let seeds = a.seeds.unwrap_or(p.default_seeds());
    let cfg = study_config(&a.ga, seeds, p.default_budget(), a.calibration_samples);
    let values = a.values.clone().unwrap_or_else(|| p.sweep());
    let as_int = |v: &[f64]| -> Result<Vec<usize>> {
        v.iter()
            .map(|&x| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(CliError::Usage(format!(
                        "sweep value {x} must be a non-negative integer"
                    )))
                }
            })
            .collect()
    };
    let result = match p {
        Preset::Fig4 => run_study_k(10, 20, &values, &cfg)?,
        Preset::Fig5 => run_study_interaction(5, 5, &as_int(&values)?, &cfg)?,
        Preset::Fig6 => {
            let r: Vec<u32> = as_int(&values)?.into_iter().map(|r| r as u32).collect();
            run_study_resolution(5, &r, &cfg)?
        }
        Preset::Fig7 => run_study_dimension(10, &as_int(&values)?, &cfg)?,
        Preset::Fig8 => {
            let params = match p.family(&Overrides::default()) {
                rfcgen::bench::study::Family::Deceptive(params) => params,
                _ => unreachable!("the deceptive preset builds a deceptive family"),
            };
            let report = run_study_deception(params, &cfg)?;
            let budget = cfg.ga.max_evaluations;
            StudyResult {
                study: "deception".into(),
                settings: vec![
                    SettingResult::from_runs(
                        "deceptive".into(),
                        "spike_prob",
                        params.spike_prob,
                        report.deceptive,
                        budget,
                    ),
                    SettingResult::from_runs(
                        "control".into(),
                        "spike_prob",
                        0.0,
                        report.control,
                        budget,
                    ),
                ],
            }
        }
    };
    write_study(&a.ga, &result)
}
