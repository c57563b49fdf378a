use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tancat::random::{dag, depth, fiber};
use tancat::tolerance::rel_residual;
use tancat::{Expr, Tower};

fn tower(order: usize) -> impl Strategy<Value = Tower> {
    prop::collection::vec(-3.0f64..3.0, 1 << order)
        .prop_map(move |c| Tower::new(order, &c).unwrap())
}

fn close(a: &Tower, b: &Tower) -> bool {
    rel_residual(a.coeffs(), b.coeffs()) < 1e-12
}

/// First-order tower input `x + e1 u`.
fn along(x: &[f64], u: &[f64]) -> Vec<Tower> {
    x.iter()
        .zip(u)
        .map(|(a, b)| Tower::new(1, &[*a, *b]).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn towers_form_a_commutative_ring(a in tower(3), b in tower(3), c in tower(3)) {
        let ab = a.try_mul(&b).unwrap();
        prop_assert!(close(&ab, &b.try_mul(&a).unwrap()));
        prop_assert!(close(&ab.try_mul(&c).unwrap(), &a.try_mul(&b.try_mul(&c).unwrap()).unwrap()));
        let lhs = a.try_mul(&b.try_add(&c).unwrap()).unwrap();
        let rhs = ab.try_add(&a.try_mul(&c).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs));
        prop_assert!(close(&a.try_sub(&a).unwrap(), &Tower::zero(3).unwrap()));
    }

    #[test]
    fn mixed_second_derivative_is_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let e = dag(&mut rng, n, 1, 6);
        let (x, u, w) = (fiber(&mut rng, n), fiber(&mut rng, n), fiber(&mut rng, n));
        let second = |p: &[f64], q: &[f64]| -> f64 {
            let ins: Vec<Tower> = (0..n).map(|i| Tower::new(2, &[x[i], p[i], q[i], 0.0]).unwrap()).collect();
            e.eval(&ins).unwrap()[0].coeff(0b11)
        };
        prop_assert!(rel_residual(&[second(&u, &w)], &[second(&w, &u)]) < 1e-10);
    }
}

#[test]
fn first_order_eval_matches_central_differences_on_random_dags() {
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=3);
        let e: Expr = dag(&mut rng, n, 2, 6);
        assert!(depth(&e) <= 6);
        let x = fiber(&mut rng, n);
        let u = fiber(&mut rng, n);
        let jet: Vec<f64> = e
            .eval(&along(&x, &u))
            .unwrap()
            .iter()
            .map(|t| t.coeff(1))
            .collect();
        let shift = |s: f64| {
            x.iter()
                .zip(&u)
                .map(|(a, b)| a + s * h * b)
                .collect::<Vec<_>>()
        };
        let (plus, minus) = (
            e.eval_f64(&shift(1.0)).unwrap(),
            e.eval_f64(&shift(-1.0)).unwrap(),
        );
        let fd: Vec<f64> = plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect();
        let r = rel_residual(&jet, &fd);
        assert!(r <= 1e-5, "{e:?} at {x:?} along {u:?}: {jet:?} vs {fd:?}");
        worst = worst.max(r);
    }
    assert!(worst > 0.0);
}
