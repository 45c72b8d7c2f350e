use proptest::prelude::*;

use scalar_asym::exprlang::parse;
use scalar_asym::greens::{GreenKernel, Side};
use scalar_asym::problem::biharmonic;
use scalar_asym::spectra::{order_and_check_h1, CharacteristicData, RootTolerances};
use scalar_asym::synthesis::integration_identity;
use scalar_asym::Result;

fn separated_roots() -> impl Strategy<Value = [f64; 4]> {
    (-4.0..4.0f64, 0.2..2.0f64, 0.2..2.0f64, 0.2..2.0f64)
        .prop_map(|(top, g1, g2, g3)| [top, top - g1, top - g1 - g2, top - g1 - g2 - g3])
}

fn gamma_triple() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-5.0..5.0f64)
        .prop_map(|mut g| {
            g.sort_by(|a, b| b.total_cmp(a));
            g
        })
        .prop_filter("separated and away from zero", |g| {
            g.iter().all(|x| x.abs() >= 0.2) && g.windows(2).all(|w| w[0] - w[1] >= 0.2)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solver_recovers_roots(roots in separated_roots()) {
        let coefficients = order_and_check_h1(roots, 1e-8).unwrap().coefficients;
        let cd = CharacteristicData::from_coefficients(coefficients, &RootTolerances::default()).unwrap();
        for (got, want) in cd.lambda.iter().zip(roots) {
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }

    #[test]
    fn kernel_is_dominated_by_its_bound(g in gamma_triple(), t in 0.0..10.0f64, s in 0.0..10.0f64) {
        let k = GreenKernel::characteristic(g).unwrap();
        for d in 0..3 {
            prop_assert!(k.eval(t, s, d).abs() <= k.bound(d).bound_at(t, s) * (1.0 + 1e-12));
        }
        let jump = k.eval_side(Side::Causal, 0.0, 2) - k.eval_side(Side::AntiCausal, 0.0, 2);
        prop_assert!((jump - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn expressions_agree_with_closures(c in -3.0..3.0f64, k in 0.1..2.0f64, t in 0.0..20.0f64) {
        let e = parse(&format!("{c}*exp(-{k}*t) + t^2/(1+t)")).unwrap();
        let want = c * (-k * t).exp() + t * t / (1.0 + t);
        prop_assert!((e.eval(t).unwrap() - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn integration_identity_holds(a in prop_oneof![-2.0..-0.2f64, 0.2..2.0f64], extra in 0.5..3.0f64, t in 0.5..5.0f64) {
        let decay = a.max(0.0) + extra;
        let h = move |s: f64| -> Result<f64> { Ok((-decay * s).exp() * (1.0 + 0.5 * s.sin())) };
        let check = integration_identity(a, &h, 0.0, t, 1e-12).unwrap();
        prop_assert!(check.relative_error <= 1e-8, "{check:?}");
    }

    #[test]
    fn biharmonic_coefficients_match_their_roots(n in 5u32..12, excess in 0.1..5.0f64) {
        let n = n as f64;
        let p = (n + 4.0) / (n - 4.0) + excess;
        let b = biharmonic(n, p).unwrap();
        let vieta = order_and_check_h1(b.roots, 1e-12).unwrap().coefficients;
        for (k, v) in b.k.iter().zip(vieta) {
            prop_assert!((k - v).abs() <= 1e-10 * (1.0 + v.abs()), "{:?} vs {:?}", b.k, vieta);
        }
    }
}
