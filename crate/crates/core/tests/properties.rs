mod common;

use proptest::prelude::*;
use wefe_core::expr::coordinate_jets;
use wefe_core::{Bindings, Jet, Univariate};

use common::{jet_vs_fd, parse_in, random_expr, rng};

fn jet_strategy(dim: usize, order: usize) -> impl Strategy<Value = Jet> {
    let len = Jet::zero(dim, order).coefficients().len();
    prop::collection::vec(-2.0f64..2.0, len)
        .prop_map(move |c| Jet::from_coefficients(dim, order, c))
}

fn three_jets() -> impl Strategy<Value = (Jet, Jet, Jet)> {
    (1usize..=3, 0usize..=4).prop_flat_map(|(dim, order)| {
        (
            jet_strategy(dim, order),
            jet_strategy(dim, order),
            jet_strategy(dim, order),
        )
    })
}

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    let scale = 1.0 + a.max_abs().max(b.max_abs());
    a.coefficients()
        .iter()
        .zip(b.coefficients())
        .all(|(x, y)| (x - y).abs() <= tol * scale)
}

const COORDS: [&str; 3] = ["x", "y", "z"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jets_form_a_commutative_ring((a, b, c) in three_jets()) {
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-12));
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), 1e-12));
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-15));
        prop_assert!(close(&(&a + &b), &(&b + &a), 0.0));
        prop_assert!(close(&(&a * &a.constant_like(1.0)), &a, 0.0));
        prop_assert!(close(&(&a - &a), &a.constant_like(0.0), 0.0));
    }

    #[test]
    fn division_inverts_multiplication((a, b, _) in three_jets()) {
        // shift b away from zero so the quotient is well conditioned
        let b = &b + &b.constant_like(3.0 * b.value().signum().max(0.0) + 3.0);
        let q = a.checked_div(&b).unwrap();
        prop_assert!(close(&(&q * &b), &a, 1e-11));
    }

    #[test]
    fn log_inverts_exp((a, _, _) in three_jets()) {
        let back = a.apply(Univariate::Exp).unwrap().apply(Univariate::Log).unwrap();
        prop_assert!(close(&back, &a, 1e-12));
        let s = a.apply(Univariate::Sin).unwrap();
        let c = a.apply(Univariate::Cos).unwrap();
        prop_assert!(close(&(&(&s * &s) + &(&c * &c)), &a.constant_like(1.0), 1e-12));
    }

    #[test]
    fn serialize_round_trips(seed in any::<u64>()) {
        let src = random_expr(&mut rng(seed), &COORDS, 4);
        let e = parse_in(&src, &COORDS);
        let text = e.serialize();
        prop_assert_eq!(parse_in(&text, &COORDS), e, "{} -> {}", src, text);
    }

    #[test]
    fn jet_values_agree_with_plain_evaluation(
        seed in any::<u64>(),
        point in prop::array::uniform3(-1.0f64..1.0),
        order in 0usize..=3,
    ) {
        let src = random_expr(&mut rng(seed), &COORDS, 4);
        let e = parse_in(&src, &COORDS);
        let b = Bindings::default();
        let plain = e.eval(&point, &b).unwrap();
        let jet = e.eval_jet(&coordinate_jets(&point, order), &b).unwrap();
        prop_assert!((jet.value() - plain).abs() <= 1e-13 * (1.0 + plain.abs()), "{}: {} vs {}", src, jet.value(), plain);
    }
}

#[test]
fn jet_partials_match_finite_differences() {
    let mut r = rng(20_240);
    for _ in 0..40 {
        let src = random_expr(&mut r, &COORDS, 3);
        let point: Vec<f64> = (0..3)
            .map(|_| rand::Rng::random_range(&mut r, -1.0..1.0))
            .collect();
        let err = jet_vs_fd(&src, &COORDS, &point, 3);
        assert!(err < 1e-5, "`{src}` at {point:?}: {err:e}");
    }
}
