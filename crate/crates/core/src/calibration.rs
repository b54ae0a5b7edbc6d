//! Weight calibration towards target variance shares.

use crate::composition::{binomial, CompositionSpec};
use crate::error::{Error, Result};
use crate::sampling::{fill_point, map_indexed};
use crate::sensitivity::{summand_correlation, CorrelationReport};

const STREAM_CALIBRATION: u64 = 16;

/// Target share of the total variance for each term, by term index.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetShares {
    shares: Vec<(usize, f64)>,
}

impl TargetShares {
    pub fn new(mut shares: Vec<(usize, f64)>) -> Result<Self> {
        shares.sort_by_key(|&(k, _)| k);
        if shares.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("shares", "duplicate term index"));
        }
        if let Some(&(k, s)) = shares.iter().find(|(_, s)| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid(
                format!("shares[{k}]"),
                format!("share must be >= 0, got {s}"),
            ));
        }
        let total: f64 = shares.iter().map(|(_, s)| s).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "shares",
                format!("shares sum to {total}, expected 1"),
            ));
        }
        Ok(Self { shares })
    }

    /// Share `values[k]` for term `k`.
    pub fn per_term(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().copied().enumerate().collect())
    }

    /// Each term on a subset of size `q` gets `1 / (Q * C(n, q))`, where `Q`
    /// is the largest subset size present.
    pub fn interaction(comp: &CompositionSpec) -> Result<Self> {
        let max_order = comp
            .terms()
            .iter()
            .map(|t| t.field.dimension())
            .max()
            .unwrap_or(0);
        if max_order == 0 {
            return Err(Error::Argument(
                "composition has no variable-dependent terms".into(),
            ));
        }
        let n = comp.n_vars();
        let shares = comp
            .terms()
            .iter()
            .map(|t| interaction_share(n, t.field.dimension(), max_order))
            .collect::<Result<Vec<_>>>()?;
        Self::per_term(&shares)
    }

    pub fn shares(&self) -> &[(usize, f64)] {
        &self.shares
    }
}

/// Power-law target distribution `(i/n)^k / sum_j (j/n)^k` for `i = 1..n`.
pub fn target_sigma(n: usize, k: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n).map(|i| (i as f64 / n as f64).powf(k)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// Variance share of one order-`q` term when each of the `Q` orders gets an
/// equal slice split evenly over its `C(n, q)` subsets.
pub fn interaction_share(n: usize, q: usize, max_order: usize) -> Result<f64> {
    if !(1 <= q && q <= max_order && max_order <= n) {
        return Err(Error::Argument(format!(
            "need 1 <= q <= Q <= n, got q = {q}, Q = {max_order}, n = {n}"
        )));
    }
    Ok(1.0 / (max_order as f64 * binomial(n, q) as f64))
}

/// Monte Carlo variance of every unweighted term over one shared sample.
pub fn term_variances(
    comp: &CompositionSpec,
    sample_count: usize,
    mc_seed: u64,
) -> Result<Vec<f64>> {
    if sample_count < 2 {
        return Err(Error::Argument(
            "variance estimation needs at least 2 samples".into(),
        ));
    }
    let n = comp.n_vars();
    let k = comp.terms().len();
    let seed = comp.global_seed();
    let rows: Vec<Vec<f64>> = map_indexed(sample_count, |i| {
        let mut x = vec![0.0; n];
        fill_point(mc_seed, STREAM_CALIBRATION, i as u64, &mut x);
        comp.terms()
            .iter()
            .map(|t| t.field.eval_smoothed_unchecked(seed, &x))
            .collect()
    });
    let nf = sample_count as f64;
    Ok((0..k)
        .map(|t| {
            let mean = rows.iter().map(|r| r[t]).sum::<f64>() / nf;
            rows.iter().map(|r| (r[t] - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        })
        .collect())
}

/// New spec whose targeted terms have weight `sqrt(share / Var_k)`, so each
/// weighted term contributes its share of a unit total variance. Terms
/// without a target keep their weight.
pub fn calibrate_weights(
    comp: &CompositionSpec,
    targets: &TargetShares,
    sample_count: usize,
    mc_seed: u64,
) -> Result<CompositionSpec> {
    let k = comp.terms().len();
    if let Some(&(t, _)) = targets.shares().iter().find(|(t, _)| *t >= k) {
        return Err(Error::Argument(format!(
            "target refers to term {t}, composition has {k}"
        )));
    }
    let variances = term_variances(comp, sample_count, mc_seed)?;
    let mut weights = comp.weights();
    for &(t, share) in targets.shares() {
        let var = variances[t];
        if !(var > 0.0) {
            return Err(Error::Calibration {
                term: t,
                variance: var,
            });
        }
        weights[t] = (share / var).sqrt();
    }
    comp.with_weights(&weights)
}

/// Summand correlations of a calibrated spec together with the pairs whose
/// correlation exceeds `threshold` in magnitude.
pub fn calibration_residuals(
    comp: &CompositionSpec,
    sample_count: usize,
    mc_seed: u64,
    threshold: f64,
) -> Result<(CorrelationReport, Vec<(usize, usize, f64)>)> {
    let report = summand_correlation(comp, sample_count, mc_seed)?;
    let flagged = report.flagged_pairs(threshold);
    Ok((report, flagged))
}
