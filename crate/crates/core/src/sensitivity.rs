//! Variance-based sensitivity analysis of compositions.
//!
//! Two estimators are provided: a Monte Carlo pick-freeze estimator of the
//! first-order indices, usable at any dimension, and an exact ANOVA
//! decomposition on a tensor midpoint grid, usable only for a handful of
//! variables. The grid estimator doubles as the oracle for the Monte Carlo
//! one. [`summand_correlation`] measures how far the summands of a
//! composition are from being orthogonal.

use std::collections::BTreeMap;

use crate::composition::CompositionSpec;
use crate::error::{Error, Result};
use crate::sampling::{fill_point, map_indexed};

/// Largest grid the ANOVA oracle accepts.
pub const MAX_ANOVA_CELLS: u128 = 10_000_000;
pub const MAX_ANOVA_VARS: usize = 4;

const STREAM_MOMENTS: u64 = 0;
const STREAM_A: u64 = 1;
const STREAM_B: u64 = 2;
const STREAM_CORRELATION: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    MonteCarlo,
    AnovaGrid,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::MonteCarlo => "monte_carlo",
            Estimator::AnovaGrid => "anova_grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub mean: f64,
    pub total_variance: f64,
    /// Raw first-order indices, one per variable. Monte Carlo values may be
    /// slightly negative.
    pub first_order: Vec<f64>,
    /// Standard errors of `first_order` (Monte Carlo only).
    pub first_order_se: Option<Vec<f64>>,
    /// Index of every variable subset (grid only), keyed by sorted variables.
    pub subset_indices: Option<BTreeMap<Vec<usize>, f64>>,
    pub estimator: Estimator,
    pub sample_count: usize,
}

impl SensitivityReport {
    /// First-order indices clamped to [0, 1] for display.
    pub fn clamped_first_order(&self) -> Vec<f64> {
        self.first_order.iter().map(|d| d.clamp(0.0, 1.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

fn mean_and_variance(values: &[f64]) -> Moments {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Moments { mean, variance }
}

fn sample_values(comp: &CompositionSpec, count: usize, seed: u64, stream: u64) -> Vec<f64> {
    let n = comp.n_vars();
    map_indexed(count, |i| {
        let mut x = vec![0.0; n];
        fill_point(seed, stream, i as u64, &mut x);
        comp.eval_unchecked(&x)
    })
}

/// Plain Monte Carlo mean and unbiased variance over the unit hypercube.
pub fn estimate_moments(
    comp: &CompositionSpec,
    sample_count: usize,
    mc_seed: u64,
) -> Result<Moments> {
    if sample_count < 2 {
        return Err(Error::Argument(
            "moment estimation needs at least 2 samples".into(),
        ));
    }
    Ok(mean_and_variance(&sample_values(
        comp,
        sample_count,
        mc_seed,
        STREAM_MOMENTS,
    )))
}

/// First-order Sobol indices by the covariance form of the pick-freeze
/// estimator: `D_i = Cov(f(A), f(B_i)) / Var(f)` where `B_i` is `B` with
/// column `i` taken from `A`.
pub fn estimate_first_order(
    comp: &CompositionSpec,
    sample_count: usize,
    mc_seed: u64,
) -> Result<SensitivityReport> {
    if sample_count < 100 {
        return Err(Error::Argument(
            "pick-freeze estimation needs at least 100 samples".into(),
        ));
    }
    let n = comp.n_vars();
    let f_a = sample_values(comp, sample_count, mc_seed, STREAM_A);
    let f_b = sample_values(comp, sample_count, mc_seed, STREAM_B);

    let pooled: Vec<f64> = f_a.iter().chain(&f_b).copied().collect();
    let Moments { mean, variance } = mean_and_variance(&pooled);
    if !(variance > 0.0) {
        return Err(Error::Degenerate("total variance is zero".into()));
    }
    let mean_a = f_a.iter().sum::<f64>() / sample_count as f64;

    let mut first_order = Vec::with_capacity(n);
    let mut first_order_se = Vec::with_capacity(n);
    for i in 0..n {
        let f_bi = map_indexed(sample_count, |j| {
            let mut a = vec![0.0; n];
            let mut x = vec![0.0; n];
            fill_point(mc_seed, STREAM_A, j as u64, &mut a);
            fill_point(mc_seed, STREAM_B, j as u64, &mut x);
            x[i] = a[i];
            comp.eval_unchecked(&x)
        });
        let mean_bi = f_bi.iter().sum::<f64>() / sample_count as f64;
        let products: Vec<f64> = f_a
            .iter()
            .zip(&f_bi)
            .map(|(a, b)| (a - mean_a) * (b - mean_bi))
            .collect();
        let Moments {
            mean: cov_mean,
            variance: product_var,
        } = mean_and_variance(&products);
        let cov = cov_mean * sample_count as f64 / (sample_count as f64 - 1.0);
        first_order.push(cov / variance);
        first_order_se.push((product_var / sample_count as f64).sqrt() / variance);
    }

    Ok(SensitivityReport {
        mean,
        total_variance: variance,
        first_order,
        first_order_se: Some(first_order_se),
        subset_indices: None,
        estimator: Estimator::MonteCarlo,
        sample_count,
    })
}

/// Exact ANOVA decomposition of `comp` sampled on the tensor midpoint grid
/// with `cells_per_axis` points per variable.
pub fn anova_grid(comp: &CompositionSpec, cells_per_axis: usize) -> Result<SensitivityReport> {
    let n = comp.n_vars();
    if n > MAX_ANOVA_VARS {
        return Err(Error::Resource(format!(
            "ANOVA grid supports at most {MAX_ANOVA_VARS} variables, got {n}"
        )));
    }
    if cells_per_axis == 0 {
        return Err(Error::Argument("cells_per_axis must be >= 1".into()));
    }
    let m = cells_per_axis;
    let total = (m as u128).pow(n as u32);
    if total > MAX_ANOVA_CELLS {
        return Err(Error::Resource(format!(
            "{total} grid cells exceed {MAX_ANOVA_CELLS}"
        )));
    }
    let total = total as usize;
    let values = map_indexed(total, |flat| {
        let mut x = vec![0.0; n];
        let mut rest = flat;
        for d in (0..n).rev() {
            x[d] = ((rest % m) as f64 + 0.5) / m as f64;
            rest /= m;
        }
        comp.eval_unchecked(&x)
    });
    let f0 = values.iter().sum::<f64>() / total as f64;
    let total_variance = values.iter().map(|v| (v - f0) * (v - f0)).sum::<f64>() / total as f64;
    if !(total_variance > 0.0) {
        return Err(Error::Degenerate("total variance is zero".into()));
    }

    // Coordinates of a flat full-grid index, first variable slowest.
    let digits = |flat: usize| -> Vec<usize> {
        let mut c = vec![0; n];
        let mut rest = flat;
        for d in (0..n).rev() {
            c[d] = rest % m;
            rest /= m;
        }
        c
    };
    let project = |coords: &[usize], mask: usize| -> usize {
        (0..n)
            .filter(|d| mask & (1 << d) != 0)
            .fold(0, |acc, d| acc * m + coords[d])
    };

    // Masks ordered so every proper subset precedes its supersets.
    let mut masks: Vec<usize> = (1..(1usize << n)).collect();
    masks.sort_by_key(|mask| (mask.count_ones(), *mask));

    let mut effects: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &mask in &masks {
        let k = mask.count_ones() as usize;
        let size = m.pow(k as u32);
        let mut marginal = vec![0.0; size];
        for (flat, v) in values.iter().enumerate() {
            marginal[project(&digits(flat), mask)] += v;
        }
        let scale = (m.pow((n - k) as u32)) as f64;
        let vars: Vec<usize> = (0..n).filter(|d| mask & (1 << d) != 0).collect();
        let effect: Vec<f64> = (0..size)
            .map(|local| {
                // Expand the local index back to full coordinates.
                let mut coords = vec![0; n];
                let mut rest = local;
                for &d in vars.iter().rev() {
                    coords[d] = rest % m;
                    rest /= m;
                }
                let lower: f64 = effects
                    .iter()
                    .filter(|(&sub, _)| sub & mask == sub && sub != mask)
                    .map(|(&sub, e)| e[project(&coords, sub)])
                    .sum();
                marginal[local] / scale - f0 - lower
            })
            .collect();
        effects.insert(mask, effect);
    }

    let mut subset_indices = BTreeMap::new();
    let mut first_order = vec![0.0; n];
    for (&mask, effect) in &effects {
        let var = effect.iter().map(|e| e * e).sum::<f64>() / effect.len() as f64;
        let index = var / total_variance;
        let vars: Vec<usize> = (0..n).filter(|d| mask & (1 << d) != 0).collect();
        if vars.len() == 1 {
            first_order[vars[0]] = index;
        }
        subset_indices.insert(vars, index);
    }

    Ok(SensitivityReport {
        mean: f0,
        total_variance,
        first_order,
        first_order_se: None,
        subset_indices: Some(subset_indices),
        estimator: Estimator::AnovaGrid,
        sample_count: total,
    })
}

/// Pearson correlations between the weighted term values of a composition.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    /// `None` where a term has zero sample variance.
    pub matrix: Vec<Vec<Option<f64>>>,
    pub sample_count: usize,
}

impl CorrelationReport {
    /// Off-diagonal pairs `(i, j, rho)` with `i < j` and `|rho| > threshold`.
    pub fn flagged_pairs(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, rho) in row.iter().enumerate().skip(i + 1) {
                if let Some(rho) = rho {
                    if rho.abs() > threshold {
                        out.push((i, j, *rho));
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_off_diagonal(&self) -> f64 {
        self.flagged_pairs(-1.0)
            .iter()
            .fold(0.0, |m, &(_, _, rho)| m.max(rho.abs()))
    }
}

/// Per-term weighted values over a shared uniform sample, sample-major.
pub(crate) fn term_samples(
    comp: &CompositionSpec,
    sample_count: usize,
    mc_seed: u64,
    stream: u64,
) -> Vec<Vec<f64>> {
    let n = comp.n_vars();
    let k = comp.terms().len();
    map_indexed(sample_count, |i| {
        let mut x = vec![0.0; n];
        fill_point(mc_seed, stream, i as u64, &mut x);
        (0..k).map(|t| comp.term_value_unchecked(t, &x)).collect()
    })
}

pub fn summand_correlation(
    comp: &CompositionSpec,
    sample_count: usize,
    mc_seed: u64,
) -> Result<CorrelationReport> {
    let k = comp.terms().len();
    if k < 2 {
        return Err(Error::Argument(
            "correlation analysis needs at least 2 terms".into(),
        ));
    }
    if sample_count < 2 {
        return Err(Error::Argument(
            "correlation analysis needs at least 2 samples".into(),
        ));
    }
    let samples = term_samples(comp, sample_count, mc_seed, STREAM_CORRELATION);
    let nf = sample_count as f64;
    let means: Vec<f64> = (0..k)
        .map(|t| samples.iter().map(|row| row[t]).sum::<f64>() / nf)
        .collect();
    let mut cov = vec![vec![0.0; k]; k];
    for row in &samples {
        for a in 0..k {
            let da = row[a] - means[a];
            for b in a..k {
                cov[a][b] += da * (row[b] - means[b]);
            }
        }
    }
    let matrix = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    let denom = (cov[a][a] * cov[b][b]).sqrt();
                    if !(cov[a][a] > 0.0 && cov[b][b] > 0.0) {
                        None
                    } else if a == b {
                        Some(1.0)
                    } else {
                        Some((cov[lo][hi] / denom).clamp(-1.0, 1.0))
                    }
                })
                .collect()
        })
        .collect();
    Ok(CorrelationReport {
        matrix,
        sample_count,
    })
}
