//! Multiplicative cosine window that turns piecewise-constant fields into
//! continuous, differentiable ones.
//!
//! Per active variable the window is
//! `g(t) = (1 - exp(cos(2 pi t) - 1)) / (1 - exp(-2))` with `t = r x + shift`,
//! which is 1 at cell centers and vanishes together with its derivative on
//! cell boundaries. The field window is the product of the per-variable
//! factors raised to the exponent `p`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::mdrf::FieldSpec;

/// `1 - exp(-2)`
const NORMALIZER: f64 = 0.864_664_716_763_387_3;

/// Borrowed lattice and exponent of one field.
#[derive(Debug, Clone, Copy)]
pub struct SmoothingParams<'a> {
    pub active_vars: &'a [usize],
    pub resolution: &'a [u32],
    pub shift: &'a [f64],
    pub exponent: f64,
}

impl FieldSpec {
    pub fn smoothing(&self) -> SmoothingParams<'_> {
        SmoothingParams {
            active_vars: self.active_vars(),
            resolution: self.resolution(),
            shift: self.shift(),
            exponent: self.smooth_exponent(),
        }
    }
}

/// Default exponent for a field with `active` variables: 1 up to ten
/// variables, `2 / active` beyond.
pub fn default_exponent(active: usize) -> f64 {
    if active <= 10 {
        1.0
    } else {
        2.0 / active as f64
    }
}

#[inline]
fn phase(r: u32, shift: f64, x: f64) -> f64 {
    let t = r as f64 * x + shift;
    t - t.floor()
}

/// One-dimensional window factor at lattice phase `theta` in [0, 1).
#[inline]
pub fn window_factor(theta: f64) -> f64 {
    let c = (TAU * theta).cos();
    // exp_m1 keeps the factor exactly zero when cos rounds to 1.
    -(c - 1.0).exp_m1() / NORMALIZER
}

/// Derivative of the window factor with respect to the phase.
#[inline]
pub fn window_factor_derivative(theta: f64) -> f64 {
    let arg = TAU * theta;
    TAU * arg.sin() * (arg.cos() - 1.0).exp() / NORMALIZER
}

impl SmoothingParams<'_> {
    #[inline]
    fn factor(&self, position: usize, x: &[f64]) -> f64 {
        let v = self.active_vars[position];
        window_factor(phase(self.resolution[position], self.shift[position], x[v]))
    }

    #[inline]
    pub(crate) fn weight_unchecked(&self, x: &[f64]) -> f64 {
        if self.exponent == 0.0 {
            return 1.0;
        }
        let product: f64 = (0..self.active_vars.len())
            .map(|d| self.factor(d, x))
            .product();
        if self.exponent == 1.0 {
            product
        } else {
            product.powf(self.exponent)
        }
    }

    /// Gradient of the window with respect to each active variable, in
    /// active-variable order.
    pub(crate) fn weight_grad_active(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.active_vars.len();
        if self.exponent == 0.0 {
            return Ok(vec![0.0; d]);
        }
        let mut factors = Vec::with_capacity(d);
        let mut slopes = Vec::with_capacity(d);
        for position in 0..d {
            let r = self.resolution[position];
            let theta = phase(r, self.shift[position], x[self.active_vars[position]]);
            factors.push(window_factor(theta));
            slopes.push(r as f64 * window_factor_derivative(theta));
        }
        let product: f64 = factors.iter().product();
        let outer = if self.exponent == 1.0 {
            1.0
        } else if product == 0.0 {
            if self.exponent < 1.0 {
                let position = factors.iter().position(|&g| g == 0.0).unwrap_or(0);
                return Err(Error::Singular {
                    var: self.active_vars[position],
                    exponent: self.exponent,
                });
            }
            0.0
        } else {
            self.exponent * product.powf(self.exponent - 1.0)
        };
        // Prefix and suffix products avoid dividing by a vanishing factor.
        let mut grad = vec![0.0; d];
        let mut prefix = 1.0;
        for position in 0..d {
            let suffix: f64 = factors[position + 1..].iter().product();
            grad[position] = outer * slopes[position] * prefix * suffix;
            prefix *= factors[position];
        }
        Ok(grad)
    }
}

/// Window value `C(x)` in [0, 1].
pub fn weight_c(x: &[f64], params: &SmoothingParams<'_>) -> Result<f64> {
    check(x, params)?;
    Ok(params.weight_unchecked(x))
}

/// Gradient of `C` as a full vector over all coordinates of `x`.
pub fn weight_c_grad(x: &[f64], params: &SmoothingParams<'_>) -> Result<Vec<f64>> {
    check(x, params)?;
    let active = params.weight_grad_active(x)?;
    let mut grad = vec![0.0; x.len()];
    for (position, &v) in params.active_vars.iter().enumerate() {
        grad[v] = active[position];
    }
    Ok(grad)
}

/// Smoothed field value: discrete cell value times the window.
pub fn eval_smoothed(spec: &FieldSpec, global_seed: u64, x: &[f64]) -> Result<f64> {
    spec.check_point(x)?;
    Ok(spec.eval_smoothed_unchecked(global_seed, x))
}

impl FieldSpec {
    #[inline]
    pub(crate) fn eval_smoothed_unchecked(&self, global_seed: u64, x: &[f64]) -> f64 {
        self.eval_discrete_unchecked(global_seed, x) * self.smoothing().weight_unchecked(x)
    }
}

fn check(x: &[f64], params: &SmoothingParams<'_>) -> Result<()> {
    for &v in params.active_vars {
        let value = *x
            .get(v)
            .ok_or_else(|| Error::Argument(format!("point has no coordinate {v}")))?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain { index: v, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdrf::{eval_discrete, CodomainDistribution};

    fn spec(active: Vec<usize>, r: Vec<u32>, shift: Vec<f64>, p: f64) -> FieldSpec {
        FieldSpec::new(
            3,
            active,
            r,
            shift,
            CodomainDistribution::default_uniform(),
            p,
        )
        .unwrap()
    }

    // Direct transcription of the window formula, used as the reference.
    fn reference_window(x: &[f64], r: &[u32], shift: &[f64], p: f64) -> f64 {
        let mut prod = 1.0;
        for d in 0..x.len() {
            let c = (2.0 * std::f64::consts::PI * (r[d] as f64 * x[d] + shift[d])).cos();
            prod *= (1.0 - (c - 1.0).exp()) * (1.0 / (1.0 - (-2.0f64).exp()));
        }
        prod.powf(p)
    }

    #[test]
    fn normalizer_constant() {
        assert_eq!(NORMALIZER, 1.0 - (-2.0f64).exp());
    }

    #[test]
    fn window_is_one_at_centers_and_zero_on_boundaries() {
        let f = spec(vec![0, 1], vec![4, 7], vec![0.0, 0.0], 1.0);
        let p = f.smoothing();
        for a in 0..4 {
            for b in 0..7 {
                let x = [(a as f64 + 0.5) / 4.0, (b as f64 + 0.5) / 7.0];
                assert!((weight_c(&x, &p).unwrap() - 1.0).abs() < 1e-15);
                let edge = [a as f64 / 4.0, (b as f64 + 0.5) / 7.0];
                assert_eq!(weight_c(&edge, &p).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn window_matches_scalar_reference() {
        let x = [0.125];
        let expected =
            (1.0 - ((std::f64::consts::PI / 2.0).cos() - 1.0).exp()) / (1.0 - (-2.0f64).exp());
        let f = spec(vec![0], vec![2], vec![0.0], 1.0);
        assert!((weight_c(&x, &f.smoothing()).unwrap() - expected).abs() < 1e-14);
        assert!((expected - reference_window(&x, &[2], &[0.0], 1.0)).abs() < 1e-15);

        let f = spec(vec![0, 1, 2], vec![3, 5, 8], vec![0.1, 0.7, 0.0], 1.7);
        for i in 0..200 {
            let x = [
                (i as f64 * 0.618_034) % 1.0,
                (i as f64 * 0.414_213) % 1.0,
                (i as f64 * 0.732_050) % 1.0,
            ];
            let want = reference_window(&x, &[3, 5, 8], &[0.1, 0.7, 0.0], 1.7);
            assert!((weight_c(&x, &f.smoothing()).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_vanishes_at_center_and_is_antisymmetric() {
        let f = spec(vec![0], vec![5], vec![0.0], 1.0);
        let p = f.smoothing();
        assert!(weight_c_grad(&[0.5], &p).unwrap()[0].abs() < 1e-12);
        let left = weight_c_grad(&[0.5 - 0.03], &p).unwrap()[0];
        let right = weight_c_grad(&[0.5 + 0.03], &p).unwrap()[0];
        assert!(left > 0.0 && right < 0.0);
        assert!((left + right).abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = spec(vec![0, 2], vec![6, 3], vec![0.2, 0.55], 1.3);
        let p = f.smoothing();
        let h = 1e-6;
        for i in 0..100 {
            let x = [
                0.05 + 0.9 * ((i as f64 * 0.618_034) % 1.0),
                0.3,
                0.05 + 0.9 * ((i as f64 * 0.381_966) % 1.0),
            ];
            let g = weight_c_grad(&x, &p).unwrap();
            assert_eq!(g[1], 0.0);
            for &v in &[0usize, 2] {
                let mut hi = x;
                let mut lo = x;
                hi[v] += h;
                lo[v] -= h;
                let fd = (weight_c(&hi, &p).unwrap() - weight_c(&lo, &p).unwrap()) / (2.0 * h);
                let scale = g[v].abs().max(1e-3);
                assert!(
                    (fd - g[v]).abs() / scale < 1e-5,
                    "x={x:?} v={v} fd={fd} g={}",
                    g[v]
                );
            }
        }
    }

    #[test]
    fn boundary_gradient_for_small_exponent_is_singular() {
        let f = spec(vec![0], vec![4], vec![0.0], 0.5);
        assert!(matches!(
            weight_c_grad(&[0.25], &f.smoothing()),
            Err(Error::Singular { .. })
        ));
        let f = spec(vec![0], vec![4], vec![0.0], 2.0);
        assert_eq!(weight_c_grad(&[0.25], &f.smoothing()).unwrap(), vec![0.0]);
    }

    #[test]
    fn smoothed_field_reduces_correctly() {
        let constant = FieldSpec::new(
            1,
            vec![0],
            vec![3],
            vec![0.0],
            CodomainDistribution::constant(1.0),
            1.0,
        )
        .unwrap();
        for i in 0..=50 {
            let x = [i as f64 / 50.0];
            assert_eq!(
                eval_smoothed(&constant, 0, &x).unwrap(),
                weight_c(&x, &constant.smoothing()).unwrap()
            );
        }
        let f = spec(vec![0], vec![3], vec![0.0], 1.0);
        for b in 0..=3 {
            assert_eq!(eval_smoothed(&f, 5, &[b as f64 / 3.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn three_bumps_for_three_cells() {
        let f = spec(vec![0], vec![3], vec![0.0], 1.0);
        let cells: Vec<f64> = (0..3)
            .map(|j| eval_discrete(&f, 5, &[(j as f64 + 0.5) / 3.0]).unwrap())
            .collect();
        for i in 0..300 {
            let x = (i as f64 + 0.5) / 300.0;
            let j = (x * 3.0).floor() as usize;
            let v = eval_smoothed(&f, 5, &[x]).unwrap();
            if cells[j] != 0.0 {
                assert_eq!(v.signum(), cells[j].signum());
            }
            assert!(v.abs() <= cells[j].abs() + 1e-15);
        }
        for j in 0..3 {
            let peak = eval_smoothed(&f, 5, &[(j as f64 + 0.5) / 3.0]).unwrap();
            assert!((peak - cells[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_exponent_means_discrete() {
        let f = spec(vec![0], vec![4], vec![0.0], 0.0);
        assert_eq!(weight_c(&[0.25], &f.smoothing()).unwrap(), 1.0);
        assert_eq!(
            eval_smoothed(&f, 2, &[0.3]).unwrap(),
            eval_discrete(&f, 2, &[0.3]).unwrap()
        );
    }

    #[test]
    fn default_exponent_rule() {
        assert_eq!(default_exponent(1), 1.0);
        assert_eq!(default_exponent(10), 1.0);
        assert_eq!(default_exponent(20), 0.1);
        for d in 1..100 {
            assert!(default_exponent(d) >= 1.0 / d as f64);
        }
    }
}
