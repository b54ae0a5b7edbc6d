//! Virtual multidimensional discrete random fields.
//!
//! A field assigns a value from a finite codomain to every cell of a regular
//! lattice over a subset of the input variables. Cell values are never stored:
//! the cell index vector is hashed together with the global seed and the field
//! identifier, and the hash is mapped to a codomain element by CDF inversion.
//! Evaluation therefore costs O(number of active variables) regardless of how
//! many cells the lattice has.

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn prm_start(global_seed: u64, field_id: u64) -> u64 {
    mix64(global_seed ^ field_id)
}

#[inline]
fn prm_step(state: u64, position: usize, index: u64) -> u64 {
    mix64(
        state
            ^ index
                .wrapping_mul(GOLDEN_GAMMA)
                .wrapping_add(position as u64 + 1),
    )
}

/// Finite set of field values with their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CodomainDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CodomainDistribution {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid(
                "values",
                "codomain must contain at least one value",
            ));
        }
        if values.len() != probs.len() {
            return Err(Error::invalid(
                "probs",
                format!(
                    "expected {} probabilities, got {}",
                    values.len(),
                    probs.len()
                ),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                format!("values[{i}]"),
                "value must be finite",
            ));
        }
        if let Some(i) = probs.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::invalid(
                format!("probs[{i}]"),
                format!("probability must be > 0, got {}", probs[i]),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "probs",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        let cumulative = probs
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            values,
            probs,
            cumulative,
        })
    }

    /// `count` equispaced values on `[lo, hi]` with equal probability.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Argument("uniform codomain needs count >= 1".into()));
        }
        let values = if count == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count).map(|i| lo + step * i as f64).collect()
        };
        Self::new(values, vec![1.0 / count as f64; count])
    }

    /// The default codomain of generated terms: 101 equispaced values on [-1, 1].
    pub fn default_uniform() -> Self {
        Self::uniform(-1.0, 1.0, 101).expect("static codomain is valid")
    }

    pub fn constant(value: f64) -> Self {
        Self::new(vec![value], vec![1.0]).expect("single value")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }

    /// Position of the element selected by `u64 / 2^64`.
    ///
    /// The comparison `cumulative[i] > u64 / 2^64` is carried out exactly.
    pub fn index_of(&self, u64_value: u64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| exceeds_unit_fraction(c, u64_value))
            .unwrap_or(self.values.len() - 1)
    }

    #[inline]
    pub fn sample(&self, u64_value: u64) -> f64 {
        self.values[self.index_of(u64_value)]
    }
}

/// Exact test of `c > u / 2^64` for a double `c`.
#[inline]
fn exceeds_unit_fraction(c: f64, u: u64) -> bool {
    let scaled = c * TWO_POW_64;
    if scaled >= TWO_POW_64 {
        return true;
    }
    if scaled <= 0.0 {
        return false;
    }
    let whole = scaled.floor();
    let whole_int = whole as u64;
    whole_int > u || (whole_int == u && scaled > whole)
}

/// Inverts the cumulative distribution of `dist` at `u64 / 2^64`.
pub fn sample_codomain(dist: &CodomainDistribution, u64_value: u64) -> f64 {
    dist.sample(u64_value)
}

/// Cell index vector of a point, one entry per active variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexVector(pub Vec<u64>);

impl IndexVector {
    pub fn indices(&self) -> &[u64] {
        &self.0
    }
}

/// One parameterized random field over a subset of the variables.
///
/// Variable indices are zero based.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    field_id: u64,
    active_vars: Vec<usize>,
    resolution: Vec<u32>,
    shift: Vec<f64>,
    codomain: CodomainDistribution,
    smooth_exponent: f64,
}

impl FieldSpec {
    pub fn new(
        field_id: u64,
        active_vars: Vec<usize>,
        resolution: Vec<u32>,
        shift: Vec<f64>,
        codomain: CodomainDistribution,
        smooth_exponent: f64,
    ) -> Result<Self> {
        if active_vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "active_vars",
                "variables must be strictly ascending without duplicates",
            ));
        }
        if resolution.len() != active_vars.len() {
            return Err(Error::invalid(
                "resolution",
                format!(
                    "expected {} entries, got {}",
                    active_vars.len(),
                    resolution.len()
                ),
            ));
        }
        if shift.len() != active_vars.len() {
            return Err(Error::invalid(
                "shift",
                format!(
                    "expected {} entries, got {}",
                    active_vars.len(),
                    shift.len()
                ),
            ));
        }
        if let Some(i) = resolution.iter().position(|&r| r == 0) {
            return Err(Error::invalid(
                format!("resolution[{i}]"),
                "resolution must be >= 1",
            ));
        }
        if let Some(i) = shift.iter().position(|s| !(0.0..1.0).contains(s)) {
            return Err(Error::invalid(
                format!("shift[{i}]"),
                format!("shift must lie in [0, 1), got {}", shift[i]),
            ));
        }
        if !(smooth_exponent >= 0.0 && smooth_exponent.is_finite()) {
            return Err(Error::invalid(
                "smooth_exponent",
                format!("exponent must be finite and >= 0, got {smooth_exponent}"),
            ));
        }
        Ok(Self {
            field_id,
            active_vars,
            resolution,
            shift,
            codomain,
            smooth_exponent,
        })
    }

    /// Field with the same resolution on every active variable and zero shift.
    pub fn uniform_lattice(
        field_id: u64,
        active_vars: Vec<usize>,
        resolution: u32,
        codomain: CodomainDistribution,
        smooth_exponent: f64,
    ) -> Result<Self> {
        let d = active_vars.len();
        Self::new(
            field_id,
            active_vars,
            vec![resolution; d],
            vec![0.0; d],
            codomain,
            smooth_exponent,
        )
    }

    pub fn field_id(&self) -> u64 {
        self.field_id
    }

    pub fn active_vars(&self) -> &[usize] {
        &self.active_vars
    }

    pub fn resolution(&self) -> &[u32] {
        &self.resolution
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn codomain(&self) -> &CodomainDistribution {
        &self.codomain
    }

    pub fn smooth_exponent(&self) -> f64 {
        self.smooth_exponent
    }

    pub fn dimension(&self) -> usize {
        self.active_vars.len()
    }

    /// Number of lattice cells, saturating at `u128::MAX`.
    pub fn cell_count(&self) -> u128 {
        self.resolution
            .iter()
            .fold(1u128, |acc, &r| acc.saturating_mul(r as u128))
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        for &v in &self.active_vars {
            let value = *x.get(v).ok_or_else(|| {
                Error::Argument(format!(
                    "point has {} coordinates, field uses variable {v}",
                    x.len()
                ))
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Domain { index: v, value });
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn cell_index(&self, position: usize, coordinate: f64) -> u64 {
        let r = self.resolution[position];
        let t = r as f64 * coordinate + self.shift[position];
        (t.floor() as u64) % r as u64
    }

    /// Hash of the cell containing `x`, without allocating the index vector.
    #[inline]
    pub(crate) fn cell_hash_unchecked(&self, global_seed: u64, x: &[f64]) -> u64 {
        let mut state = prm_start(global_seed, self.field_id);
        for (position, &v) in self.active_vars.iter().enumerate() {
            state = prm_step(state, position, self.cell_index(position, x[v]));
        }
        state
    }

    #[inline]
    pub(crate) fn eval_discrete_unchecked(&self, global_seed: u64, x: &[f64]) -> f64 {
        self.codomain
            .sample(self.cell_hash_unchecked(global_seed, x))
    }

    /// Value of the cell with the given index vector.
    pub fn cell_value(&self, global_seed: u64, cell: &IndexVector) -> f64 {
        self.codomain.sample(prm(global_seed, self.field_id, cell))
    }
}

/// Maps a point to the index vector of the cell of `spec` containing it.
///
/// Along each active variable the index is `floor(r * x + shift) mod r`, so a
/// coordinate of exactly 1 wraps onto the first cell.
pub fn discretize(x: &[f64], spec: &FieldSpec) -> Result<IndexVector> {
    spec.check_point(x)?;
    Ok(IndexVector(
        spec.active_vars
            .iter()
            .enumerate()
            .map(|(position, &v)| spec.cell_index(position, x[v]))
            .collect(),
    ))
}

/// Stateless pseudo-random mapping of a cell index vector to 64 bits.
pub fn prm(global_seed: u64, field_id: u64, cell: &IndexVector) -> u64 {
    cell.0
        .iter()
        .enumerate()
        .fold(prm_start(global_seed, field_id), |state, (position, &j)| {
            prm_step(state, position, j)
        })
}

/// Piecewise-constant field value at `x`.
pub fn eval_discrete(spec: &FieldSpec, global_seed: u64, x: &[f64]) -> Result<f64> {
    spec.check_point(x)?;
    Ok(spec.eval_discrete_unchecked(global_seed, x))
}
