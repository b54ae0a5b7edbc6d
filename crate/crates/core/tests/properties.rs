use proptest::prelude::*;

use rfcgen::composition::{eval, eval_grad, CompositionSpec, TermSpec};
use rfcgen::io::{parse, serialize};
use rfcgen::mdrf::{discretize, sample_codomain, CodomainDistribution, FieldSpec};
use rfcgen::smoothing::window_factor;

fn codomain() -> impl Strategy<Value = CodomainDistribution> {
    prop::collection::vec((-5.0f64..5.0, 1u32..100), 1..6)
        .prop_map(|pairs| {
            let total: u32 = pairs.iter().map(|p| p.1).sum();
            let values = pairs.iter().map(|p| p.0).collect();
            let mut probs: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / total as f64).collect();
            // Put the rounding residue on the last entry so the sum is 1.
            let head: f64 = probs[..probs.len() - 1].iter().sum();
            *probs.last_mut().unwrap() = 1.0 - head;
            (values, probs)
        })
        .prop_filter_map("valid codomain", |(v, p)| {
            CodomainDistribution::new(v, p).ok()
        })
}

fn field(n_vars: usize) -> impl Strategy<Value = FieldSpec> {
    (
        any::<u64>(),
        prop::sample::subsequence((0..n_vars).collect::<Vec<_>>(), 1..=n_vars.min(3)),
        codomain(),
        prop::sample::select(vec![0.0, 0.5, 1.0, 2.0]),
    )
        .prop_flat_map(|(id, vars, codomain, p)| {
            let d = vars.len();
            (
                Just((id, vars, codomain, p)),
                prop::collection::vec(1u32..12, d),
                prop::collection::vec(0.0f64..1.0, d),
            )
        })
        .prop_map(|((id, vars, codomain, p), r, shift)| {
            FieldSpec::new(id, vars, r, shift, codomain, p).unwrap()
        })
}

fn composition() -> impl Strategy<Value = CompositionSpec> {
    (1usize..5)
        .prop_flat_map(|n| {
            (
                Just(n),
                -2.0f64..2.0,
                prop::collection::vec((-3.0f64..3.0, field(n)), 0..5),
                any::<u64>(),
            )
        })
        .prop_map(|(n, w0, terms, seed)| {
            let terms = terms
                .into_iter()
                .map(|(weight, field)| TermSpec { weight, field })
                .collect();
            CompositionSpec::new(n, w0, terms, seed).unwrap()
        })
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, n)
}

fn with_point() -> impl Strategy<Value = (CompositionSpec, Vec<f64>)> {
    composition().prop_flat_map(|c| {
        let n = c.n_vars();
        (Just(c), point(n))
    })
}

proptest! {
    #[test]
    fn evaluation_is_deterministic((c, x) in with_point()) {
        let a = eval(&c, &x).unwrap();
        let b = eval(&c.clone(), &x.clone()).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn value_is_bounded_by_weighted_codomain((c, x) in with_point()) {
        let bound: f64 = c.terms().iter().map(|t| t.weight.abs() * t.field.codomain().max_abs()).sum();
        let v = eval(&c, &x).unwrap();
        prop_assert!((v - c.w0()).abs() <= bound * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn scaling_is_linear((c, x) in with_point(), factor in -4.0f64..4.0) {
        let scaled = c.scaled(factor).unwrap();
        let expected = factor * eval(&c, &x).unwrap();
        let got = eval(&scaled, &x).unwrap();
        prop_assert!((got - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
    }

    #[test]
    fn constant_shift_is_additive((c, x) in with_point(), shift in -3.0f64..3.0) {
        let base = eval(&c, &x).unwrap();
        let moved = eval(&c.clone().with_w0(c.w0() + shift), &x).unwrap();
        prop_assert!((moved - base - shift).abs() < 1e-12);
    }

    #[test]
    fn terms_ignore_inactive_variables((c, x) in with_point(), y in point(4)) {
        for (k, t) in c.terms().iter().enumerate() {
            let mut moved = x.clone();
            for (d, slot) in moved.iter_mut().enumerate() {
                if !t.field.active_vars().contains(&d) {
                    *slot = y[d];
                }
            }
            prop_assert_eq!(c.term_value(k, &x).unwrap().to_bits(), c.term_value(k, &moved).unwrap().to_bits());
        }
    }

    #[test]
    fn gradient_vanishes_on_unused_variables((c, x) in with_point()) {
        if let Ok(g) = eval_grad(&c, &x) {
            for (d, gd) in g.iter().enumerate() {
                let used = c.terms().iter().any(|t| t.field.active_vars().contains(&d));
                if !used {
                    prop_assert_eq!(*gd, 0.0);
                }
            }
        }
    }

    #[test]
    fn round_trip_is_a_fixpoint((c, x) in with_point()) {
        let text = serialize(&c);
        let back = parse(&text).unwrap();
        prop_assert_eq!(serialize(&back), text);
        prop_assert_eq!(eval(&back, &x).unwrap().to_bits(), eval(&c, &x).unwrap().to_bits());
    }

    #[test]
    fn discretized_indices_are_in_range(f in field(4), x in point(4)) {
        let j = discretize(&x, &f).unwrap();
        for (d, &jd) in j.0.iter().enumerate() {
            prop_assert!(jd < f.resolution()[d] as u64);
        }
    }

    #[test]
    fn sampled_codomain_value_is_a_member(dist in codomain(), bits in any::<u64>()) {
        let v = sample_codomain(&dist, bits);
        prop_assert!(dist.values().contains(&v));
    }

    #[test]
    fn window_stays_in_unit_interval(theta in -3.0f64..3.0) {
        let g = window_factor(theta);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&g));
        prop_assert!((g - window_factor(theta + 1.0)).abs() < 1e-12);
    }
}
