//! Test functions built as a constant plus a weighted sum of smoothed fields
//! over variable subsets.

use crate::error::{Error, Result};
use crate::mdrf::{mix64, CodomainDistribution, FieldSpec};
use crate::smoothing::default_exponent;

/// Largest number of grid points [`grid_sample`] will evaluate.
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Largest number of terms a builder will emit.
pub const MAX_TERMS: usize = 1_000_000;

/// Role tags mixed into generated field identifiers.
pub const ROLE_BASE: u64 = 0;
pub const ROLE_SPIKE: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TermSpec {
    pub weight: f64,
    pub field: FieldSpec,
}

/// A complete test function. Objective sense is always minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionSpec {
    n_vars: usize,
    w0: f64,
    terms: Vec<TermSpec>,
    global_seed: u64,
}

impl CompositionSpec {
    pub fn new(n_vars: usize, w0: f64, terms: Vec<TermSpec>, global_seed: u64) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::invalid("n_vars", "must be positive"));
        }
        if !w0.is_finite() {
            return Err(Error::invalid("w0", "must be finite"));
        }
        for (k, term) in terms.iter().enumerate() {
            if !term.weight.is_finite() {
                return Err(Error::invalid(
                    format!("terms[{k}].weight"),
                    "must be finite",
                ));
            }
            if let Some(&v) = term.field.active_vars().iter().find(|&&v| v >= n_vars) {
                return Err(Error::invalid(
                    format!("terms[{k}].field.active_vars"),
                    format!("variable {v} out of range for n_vars = {n_vars}"),
                ));
            }
        }
        Ok(Self {
            n_vars,
            w0,
            terms,
            global_seed,
        })
    }

    pub fn constant(n_vars: usize, w0: f64, global_seed: u64) -> Result<Self> {
        Self::new(n_vars, w0, Vec::new(), global_seed)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn terms(&self) -> &[TermSpec] {
        &self.terms
    }

    pub fn global_seed(&self) -> u64 {
        self.global_seed
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.weight).collect()
    }

    /// Copy with the term weights replaced.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.terms.len() {
            return Err(Error::Argument(format!(
                "expected {} weights, got {}",
                self.terms.len(),
                weights.len()
            )));
        }
        let terms = self
            .terms
            .iter()
            .zip(weights)
            .map(|(t, &weight)| TermSpec {
                weight,
                field: t.field.clone(),
            })
            .collect();
        Self::new(self.n_vars, self.w0, terms, self.global_seed)
    }

    /// Copy with the constant and every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let weights: Vec<f64> = self.terms.iter().map(|t| t.weight * factor).collect();
        let mut out = self.with_weights(&weights)?;
        out.w0 *= factor;
        Ok(out)
    }

    pub fn with_w0(mut self, w0: f64) -> Self {
        self.w0 = w0;
        self
    }

    /// True when every term depends on a single variable.
    pub fn is_separable(&self) -> bool {
        self.terms.iter().all(|t| t.field.dimension() <= 1)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_vars {
            return Err(Error::Argument(format!(
                "point has {} coordinates, function has {} variables",
                x.len(),
                self.n_vars
            )));
        }
        if let Some((index, &value)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Domain { index, value });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.w0
            + self
                .terms
                .iter()
                .map(|t| t.weight * t.field.eval_smoothed_unchecked(self.global_seed, x))
                .sum::<f64>()
    }

    /// Weighted value of term `k` alone.
    #[inline]
    pub(crate) fn term_value_unchecked(&self, k: usize, x: &[f64]) -> f64 {
        let t = &self.terms[k];
        t.weight * t.field.eval_smoothed_unchecked(self.global_seed, x)
    }

    pub fn term_value(&self, k: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.term_value_unchecked(k, x))
    }
}

/// Objective value `w0 + sum_k w_k * field_k(x)`.
pub fn eval(comp: &CompositionSpec, x: &[f64]) -> Result<f64> {
    comp.check_point(x)?;
    Ok(comp.eval_unchecked(x))
}

/// Analytic gradient of [`eval`].
pub fn eval_grad(comp: &CompositionSpec, x: &[f64]) -> Result<Vec<f64>> {
    comp.check_point(x)?;
    let mut grad = vec![0.0; comp.n_vars];
    for term in &comp.terms {
        let field = &term.field;
        let scale = term.weight * field.eval_discrete_unchecked(comp.global_seed, x);
        if scale == 0.0 {
            continue;
        }
        let partial = field.smoothing().weight_grad_active(x)?;
        for (position, &v) in field.active_vars().iter().enumerate() {
            grad[v] += scale * partial[position];
        }
    }
    Ok(grad)
}

/// Identifier of a generated field, a function of its role and variable subset.
pub fn subset_field_id(role: u64, vars: &[usize]) -> u64 {
    vars.iter()
        .fold(mix64(role ^ 0x5EED_F1E1_D000_0000), |h, &v| {
            mix64(h ^ (v as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        })
}

fn default_field(
    role: u64,
    vars: Vec<usize>,
    r: u32,
    codomain: CodomainDistribution,
) -> Result<FieldSpec> {
    let p = default_exponent(vars.len());
    FieldSpec::uniform_lattice(subset_field_id(role, &vars), vars, r, codomain, p)
}

/// One smoothed field per variable, resolution `r`, default codomain.
pub fn build_first_order(n: usize, r: u32, seed: u64, weights: &[f64]) -> Result<CompositionSpec> {
    if weights.len() != n {
        return Err(Error::Argument(format!(
            "expected {n} weights, got {}",
            weights.len()
        )));
    }
    check_resolution(r)?;
    let terms = (0..n)
        .zip(weights)
        .map(|(i, &weight)| {
            Ok(TermSpec {
                weight,
                field: default_field(
                    ROLE_BASE,
                    vec![i],
                    r,
                    CodomainDistribution::default_uniform(),
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CompositionSpec::new(n, 0.0, terms, seed)
}

/// All subsets of `{0..n}` of size `q`, lexicographic.
pub fn subsets_of_size(n: usize, q: usize) -> Vec<Vec<usize>> {
    fn recurse(
        start: usize,
        n: usize,
        q: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == q {
            out.push(current.clone());
            return;
        }
        for v in start..n {
            if n - v < q - current.len() {
                break;
            }
            current.push(v);
            recurse(v + 1, n, q, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    if q <= n {
        recurse(0, n, q, &mut Vec::with_capacity(q), &mut out);
    }
    out
}

/// Binomial coefficient, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

/// Unit-weight terms on every subset of size 1 through `max_order`.
pub fn build_interaction_ensemble(
    n: usize,
    max_order: usize,
    r: u32,
    seed: u64,
) -> Result<CompositionSpec> {
    if max_order == 0 || max_order > n {
        return Err(Error::Argument(format!(
            "interaction order must satisfy 1 <= Q <= n, got Q = {max_order}, n = {n}"
        )));
    }
    check_resolution(r)?;
    let total: u128 = (1..=max_order).map(|q| binomial(n, q)).sum();
    if total > MAX_TERMS as u128 {
        return Err(Error::Resource(format!(
            "{total} interaction terms exceed {MAX_TERMS}"
        )));
    }
    let mut terms = Vec::with_capacity(total as usize);
    for q in 1..=max_order {
        for vars in subsets_of_size(n, q) {
            terms.push(TermSpec {
                weight: 1.0,
                field: default_field(ROLE_BASE, vars, r, CodomainDistribution::default_uniform())?,
            });
        }
    }
    CompositionSpec::new(n, 0.0, terms, seed)
}

/// A single unit-weight field over all `d` variables.
pub fn build_full_order(d: usize, r: u32, seed: u64) -> Result<CompositionSpec> {
    check_resolution(r)?;
    let field = default_field(
        ROLE_BASE,
        (0..d).collect(),
        r,
        CodomainDistribution::default_uniform(),
    )?;
    CompositionSpec::new(d, 0.0, vec![TermSpec { weight: 1.0, field }], seed)
}

/// Parameters of [`build_deceptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeceptiveParams {
    pub n: usize,
    pub r_low: u32,
    pub r_high: u32,
    pub spike_prob: f64,
    pub spike_depth: f64,
}

impl Default for DeceptiveParams {
    fn default() -> Self {
        Self {
            n: 2,
            r_low: 4,
            r_high: 100,
            spike_prob: 1e-3,
            spike_depth: 5.0,
        }
    }
}

/// Low-resolution first-order trend plus a rare-spike full-order field.
///
/// The base terms carry weight `1/n` so their sum ranges over at most
/// `[-1, 1]`. The spike field takes the value `-spike_depth` in a fraction
/// `spike_prob` of its cells and 0 elsewhere. With `spike_prob = 0` the spike
/// field is omitted.
pub fn build_deceptive(params: DeceptiveParams, seed: u64) -> Result<CompositionSpec> {
    let DeceptiveParams {
        n,
        r_low,
        r_high,
        spike_prob,
        spike_depth,
    } = params;
    if n == 0 {
        return Err(Error::Argument("deceptive function needs n >= 1".into()));
    }
    check_resolution(r_low)?;
    check_resolution(r_high)?;
    if r_high <= r_low {
        return Err(Error::Argument(format!(
            "spike resolution {r_high} must exceed base resolution {r_low}"
        )));
    }
    if !(0.0..1.0).contains(&spike_prob) {
        return Err(Error::Argument(format!(
            "spike probability {spike_prob} outside [0, 1)"
        )));
    }
    let base_range = 2.0;
    if !(spike_depth > base_range && spike_depth.is_finite()) {
        return Err(Error::Argument(format!(
            "spike depth {spike_depth} must exceed the base amplitude range {base_range}"
        )));
    }
    let w = 1.0 / n as f64;
    let mut terms = (0..n)
        .map(|i| {
            Ok(TermSpec {
                weight: w,
                field: default_field(
                    ROLE_BASE,
                    vec![i],
                    r_low,
                    CodomainDistribution::default_uniform(),
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if spike_prob > 0.0 {
        let codomain =
            CodomainDistribution::new(vec![0.0, -spike_depth], vec![1.0 - spike_prob, spike_prob])?;
        terms.push(TermSpec {
            weight: 1.0,
            field: default_field(ROLE_SPIKE, (0..n).collect(), r_high, codomain)?,
        });
    }
    CompositionSpec::new(n, 0.0, terms, seed)
}

fn check_resolution(r: u32) -> Result<()> {
    if r == 0 {
        Err(Error::Argument("resolution must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Function values over a regular grid spanning a few axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub axes: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// Evaluates `comp` on a regular grid over `axes`, other coordinates fixed at
/// `slice`. Rows are row-major with the last axis varying fastest. With one
/// point per axis the slice value is used.
pub fn grid_sample(
    comp: &CompositionSpec,
    points_per_axis: usize,
    axes: &[usize],
    slice: &[f64],
) -> Result<GridTable> {
    if points_per_axis == 0 {
        return Err(Error::Argument("points_per_axis must be >= 1".into()));
    }
    if axes.is_empty() || axes.len() > 3 {
        return Err(Error::Argument(format!(
            "grid needs 1 to 3 axes, got {}",
            axes.len()
        )));
    }
    if let Some(&a) = axes.iter().find(|&&a| a >= comp.n_vars) {
        return Err(Error::Argument(format!("axis {a} out of range")));
    }
    if slice.len() != comp.n_vars {
        return Err(Error::Argument(format!(
            "slice has {} coordinates, function has {}",
            slice.len(),
            comp.n_vars
        )));
    }
    comp.check_point(slice)?;
    let total = (points_per_axis as u128).pow(axes.len() as u32);
    if total > MAX_GRID_POINTS as u128 {
        return Err(Error::Resource(format!(
            "{total} grid points exceed {MAX_GRID_POINTS}"
        )));
    }
    let total = total as usize;
    let coordinate = |axis: usize, i: usize| {
        if points_per_axis == 1 {
            slice[axis]
        } else {
            i as f64 / (points_per_axis - 1) as f64
        }
    };
    let mut points = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for flat in 0..total {
        let mut x = slice.to_vec();
        let mut rest = flat;
        for &axis in axes.iter().rev() {
            x[axis] = coordinate(axis, rest % points_per_axis);
            rest /= points_per_axis;
        }
        values.push(comp.eval_unchecked(&x));
        points.push(x);
    }
    Ok(GridTable {
        axes: axes.to_vec(),
        points,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::eval_smoothed;

    #[test]
    fn constant_composition() {
        let c = CompositionSpec::constant(3, 2.5, 0).unwrap();
        assert_eq!(eval(&c, &[0.1, 0.2, 0.3]).unwrap(), 2.5);
        assert_eq!(eval_grad(&c, &[0.1, 0.2, 0.3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn single_term_linearity() {
        let base = build_first_order(1, 5, 3, &[1.0]).unwrap();
        let doubled = base.with_weights(&[2.0]).unwrap();
        for i in 0..50 {
            let x = [i as f64 / 49.0];
            let field = eval_smoothed(&base.terms()[0].field, 3, &x).unwrap();
            assert_eq!(eval(&doubled, &x).unwrap(), 2.0 * field);
        }
    }

    #[test]
    fn additive_terms_on_distinct_variables() {
        let c = build_first_order(2, 6, 8, &[0.7, -1.3])
            .unwrap()
            .with_w0(0.25);
        for i in 0..40 {
            let x = [(i as f64 * 0.37) % 1.0, (i as f64 * 0.73) % 1.0];
            let parts: f64 = (0..2).map(|k| c.term_value(k, &x).unwrap()).sum();
            assert!((eval(&c, &x).unwrap() - 0.25 - parts).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_support_is_local() {
        let field = FieldSpec::uniform_lattice(
            4,
            vec![1, 2],
            5,
            CodomainDistribution::default_uniform(),
            1.0,
        )
        .unwrap();
        let c = CompositionSpec::new(4, 0.0, vec![TermSpec { weight: 1.0, field }], 1).unwrap();
        let g = eval_grad(&c, &[0.3, 0.33, 0.61, 0.9]).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3], 0.0);
    }

    #[test]
    fn first_order_builder() {
        assert_eq!(build_first_order(1, 5, 0, &[1.0]).unwrap().terms().len(), 1);
        let c = build_first_order(10, 20, 0, &[1.0; 10]).unwrap();
        assert_eq!(c.terms().len(), 10);
        let ids: std::collections::BTreeSet<u64> =
            c.terms().iter().map(|t| t.field.field_id()).collect();
        assert_eq!(ids.len(), 10);
        assert!(c
            .terms()
            .iter()
            .all(|t| t.field.resolution() == [20] && t.field.codomain().len() == 101));
        let zero = build_first_order(3, 5, 0, &[0.0; 3]).unwrap();
        assert_eq!(eval(&zero, &[0.1, 0.5, 0.7]).unwrap(), 0.0);
        assert!(build_first_order(3, 5, 0, &[1.0; 2]).is_err());
    }

    #[test]
    fn interaction_ensemble_term_counts() {
        assert_eq!(
            build_interaction_ensemble(5, 5, 5, 0)
                .unwrap()
                .terms()
                .len(),
            31
        );
        assert_eq!(
            build_interaction_ensemble(3, 1, 5, 0)
                .unwrap()
                .terms()
                .len(),
            3
        );
        assert_eq!(
            build_interaction_ensemble(5, 2, 5, 0)
                .unwrap()
                .terms()
                .len(),
            15
        );
        assert!(matches!(
            build_interaction_ensemble(3, 4, 5, 0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            build_interaction_ensemble(3, 0, 5, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn ensemble_of_order_one_equals_first_order() {
        assert_eq!(
            build_interaction_ensemble(5, 1, 5, 9).unwrap(),
            build_first_order(5, 5, 9, &[1.0; 5]).unwrap()
        );
    }

    #[test]
    fn subsets_and_binomials() {
        for n in 0..8 {
            for q in 0..=n {
                assert_eq!(subsets_of_size(n, q).len() as u128, binomial(n, q));
            }
        }
        assert_eq!(subsets_of_size(4, 2)[0], vec![0, 1]);
        assert_eq!(subsets_of_size(4, 2)[5], vec![2, 3]);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn deceptive_without_spikes_is_base_only() {
        let params = DeceptiveParams {
            spike_prob: 0.0,
            ..Default::default()
        };
        let c = build_deceptive(params, 4).unwrap();
        assert_eq!(c.terms().len(), 2);
        assert!(c.is_separable());
        let spiky = build_deceptive(DeceptiveParams::default(), 4).unwrap();
        assert_eq!(&spiky.terms()[..2], c.terms());
    }

    #[test]
    fn deceptive_spike_cells_are_rare() {
        let c = build_deceptive(DeceptiveParams::default(), 4).unwrap();
        let spike = &c.terms()[2].field;
        let mut count = 0;
        for a in 0..100u64 {
            for b in 0..100u64 {
                if spike.cell_value(4, &crate::mdrf::IndexVector(vec![a, b])) != 0.0 {
                    count += 1;
                }
            }
        }
        // Binomial(10^4, 1e-3): mean 10, far outside [0, 40] is implausible.
        assert!(count > 0 && count < 40, "{count} spike cells");
    }

    #[test]
    fn deceptive_argument_checks() {
        let bad = |p: DeceptiveParams| build_deceptive(p, 0).is_err();
        let d = DeceptiveParams::default();
        assert!(bad(DeceptiveParams {
            spike_prob: 1.0,
            ..d
        }));
        assert!(bad(DeceptiveParams {
            spike_prob: -0.1,
            ..d
        }));
        assert!(bad(DeceptiveParams {
            spike_depth: 1.0,
            ..d
        }));
        assert!(bad(DeceptiveParams { r_high: 4, ..d }));
    }

    #[test]
    fn grid_examples() {
        let c = build_first_order(3, 4, 1, &[1.0, 1.0, 1.0]).unwrap();
        let slice = [0.3, 0.4, 0.5];
        let one = grid_sample(&c, 1, &[0, 1], &slice).unwrap();
        assert_eq!(one.values, vec![eval(&c, &slice).unwrap()]);

        let g = grid_sample(&c, 5, &[0, 2], &slice).unwrap();
        assert_eq!(g.values.len(), 25);
        assert_eq!(g.points[1], vec![0.0, 0.4, 0.25]);
        assert_eq!(g.points[5], vec![0.25, 0.4, 0.0]);

        let flat = CompositionSpec::constant(2, 1.5, 0).unwrap();
        let g = grid_sample(&flat, 10, &[0, 1], &[0.5, 0.5]).unwrap();
        assert!(g.values.iter().all(|&v| v == 1.5));

        assert!(matches!(
            grid_sample(&c, 1000, &[0, 1, 2], &slice),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn out_of_domain_points_are_rejected() {
        let c = build_first_order(2, 4, 1, &[1.0, 1.0]).unwrap();
        assert!(matches!(
            eval(&c, &[0.5, 1.01]),
            Err(Error::Domain { index: 1, .. })
        ));
        assert!(matches!(eval(&c, &[0.5]), Err(Error::Argument(_))));
    }
}
