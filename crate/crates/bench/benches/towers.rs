use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tancat::random::{corpus, dag, fiber};
use tancat::spec::{builtin_groupoid, default_sections};
use tancat::{lie_bracket, Algebroid, Tower};

fn tower_mul(c: &mut Criterion) {
    let mut group = c.benchmark_group("tower_mul");
    for order in [1, 2, 4, 6] {
        let coeffs: Vec<f64> = (0..1 << order).map(|i| 0.5 + i as f64 * 0.01).collect();
        let a = Tower::new(order, &coeffs).unwrap();
        let b = a.scale(-0.7);
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |bench, _| {
            bench.iter(|| black_box(&a).try_mul(black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn expr_eval(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let e = dag(&mut rng, 3, 2, 6);
    let x = fiber(&mut rng, 3);
    let mut group = c.benchmark_group("expr_eval");
    for order in [0, 1, 2, 3] {
        let ins: Vec<Tower> = x
            .iter()
            .map(|v| Tower::constant(order, *v).unwrap())
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |bench, _| {
            bench.iter(|| e.eval_at(order, black_box(&ins)).unwrap())
        });
    }
    group.finish();
}

fn field_bracket(c: &mut Criterion) {
    let (fields, _) = corpus(3, 7);
    let x = [0.3, -0.2, 0.5];
    c.bench_function("lie_bracket_r3", |bench| {
        bench.iter(|| {
            lie_bracket(&fields[0], &fields[1])
                .unwrap()
                .fiber_at(black_box(&x))
                .unwrap()
        })
    });
}

fn algebroid_bracket(c: &mut Criterion) {
    let alg = Algebroid::unchecked(&builtin_groupoid("matrix_group:2").unwrap()).unwrap();
    let s = default_sections(0, 4);
    c.bench_function("algebroid_bracket_gl2", |bench| {
        bench.iter(|| {
            alg.bracket(&s[1], &s[2])
                .unwrap()
                .value_at(black_box(&[]))
                .unwrap()
        })
    });
}

criterion_group!(
    benches,
    tower_mul,
    expr_eval,
    field_bracket,
    algebroid_bracket
);
criterion_main!(benches);
