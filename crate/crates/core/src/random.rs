//! Random expressions and tangent points for the sampled suites.

use rand::Rng;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::Domain;
use crate::error::Result;
use crate::expr::{Expr, Term};
use crate::fields::{ScalarField, VectorField};
use crate::tangent::TanPoint;

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// A vector with entries uniform in `[-1, 1]`.
pub fn fiber<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| uniform(rng, -1.0, 1.0)).collect()
}

/// An order-`n` point over `dom` with fiber blocks uniform in `[-1, 1]`.
pub fn tan_point<R: Rng + ?Sized>(rng: &mut R, dom: &Domain, order: usize) -> Result<TanPoint> {
    let mut blocks = vec![dom.sample(rng)?];
    blocks.extend((1..1usize << order).map(|_| fiber(rng, dom.dim)));
    TanPoint::from_blocks(&blocks)
}

/// Redraws every block containing own index `level`, keeping the rest, so the
/// result shares `p`'s projection along that level.
pub fn fiber_partner<R: Rng + ?Sized>(rng: &mut R, p: &TanPoint, level: usize) -> Result<TanPoint> {
    let blocks: Vec<Vec<f64>> = p
        .blocks()
        .into_iter()
        .enumerate()
        .map(|(mask, b)| {
            if mask & (1 << (level - 1)) != 0 {
                fiber(rng, b.len())
            } else {
                b
            }
        })
        .collect();
    TanPoint::from_blocks(&blocks)
}

/// One smooth summand in the variables `0..dim`.
fn smooth_term<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Term {
    let c = uniform(rng, -1.0, 1.0);
    let x = Term::var(rng.gen_range(0..dim));
    let y = Term::var(rng.gen_range(0..dim));
    match rng.gen_range(0..7) {
        0 => c * x,
        1 => c * (x * y),
        2 => c * (uniform(rng, -2.0, 2.0) * x + uniform(rng, -1.0, 1.0)).sin(),
        3 => c * (x * y).cos(),
        4 => c * (0.5 * x).exp(),
        5 => c * x.powi(3),
        _ => Term::c(c),
    }
}

/// Polynomial and trigonometric map `R^inputs -> R^outputs`, defined everywhere.
pub fn smooth_map<R: Rng + ?Sized>(rng: &mut R, inputs: usize, outputs: usize) -> Expr {
    let outs: Vec<Term> = (0..outputs)
        .map(|_| {
            let n = rng.gen_range(2..=4);
            (1..n).fold(smooth_term(rng, inputs), |acc, _| {
                acc + smooth_term(rng, inputs)
            })
        })
        .collect();
    Expr::from_terms(inputs, &outs).expect("generated map is well formed")
}

/// Three polynomial and trigonometric vector fields and two functions on
/// `R^dim`, fixed by `seed`.
pub fn corpus(dim: usize, seed: u64) -> (Vec<VectorField>, Vec<ScalarField>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ dim as u64);
    let on = Arc::new(Domain::euclidean(dim, 1.0));
    let fields = ["u", "v", "w"]
        .iter()
        .map(|n| {
            VectorField::from_expr(*n, on.clone(), smooth_map(&mut rng, dim, dim))
                .expect("square map")
        })
        .collect();
    let functions = ["f", "g"]
        .iter()
        .map(|n| {
            ScalarField::from_expr(*n, on.clone(), smooth_map(&mut rng, dim, 1))
                .expect("scalar map")
        })
        .collect();
    (fields, functions)
}

/// A generated node with its depth and a bound on `|value|` over `[-1, 1]^n`.
#[derive(Clone)]
struct Node {
    term: Term,
    depth: usize,
    bound: f64,
}

const DAG_BOUND: f64 = 20.0;

/// Random DAG over every primitive, with shared subterms and depth at most
/// `max_depth`. Partial primitives are guarded (`log(c + a^2)`,
/// `a / (c + b^2)`, ...) so the result is defined on all of `[-1, 1]^inputs`,
/// and value bounds are tracked to keep magnitudes moderate.
pub fn dag<R: Rng + ?Sized>(rng: &mut R, inputs: usize, outputs: usize, max_depth: usize) -> Expr {
    let mut pool: Vec<Node> = (0..inputs)
        .map(|i| Node {
            term: Term::var(i),
            depth: 0,
            bound: 1.0,
        })
        .collect();
    let target = rng.gen_range(3..=12);
    let mut attempts = 0;
    while pool.len() < inputs + target && attempts < 200 {
        attempts += 1;
        let a = pool[rng.gen_range(0..pool.len())].clone();
        let b = pool[rng.gen_range(0..pool.len())].clone();
        let c = uniform(rng, 0.5, 1.5);
        let square_plus = |s: &Node| Node {
            term: c + &s.term * &s.term,
            depth: s.depth + 2,
            bound: c + s.bound * s.bound,
        };
        let next = match rng.gen_range(0..13) {
            0 => Node {
                term: &a.term + &b.term,
                depth: a.depth.max(b.depth) + 1,
                bound: a.bound + b.bound,
            },
            1 => Node {
                term: &a.term - &b.term,
                depth: a.depth.max(b.depth) + 1,
                bound: a.bound + b.bound,
            },
            2 => Node {
                term: &a.term * &b.term,
                depth: a.depth.max(b.depth) + 1,
                bound: a.bound * b.bound,
            },
            3 => {
                let den = square_plus(&b);
                Node {
                    term: &a.term / &den.term,
                    depth: a.depth.max(den.depth) + 1,
                    bound: a.bound / c,
                }
            }
            4 => Node {
                term: -&a.term,
                depth: a.depth + 1,
                bound: a.bound,
            },
            5 => {
                let k = rng.gen_range(2..=3);
                Node {
                    term: a.term.powi(k),
                    depth: a.depth + 1,
                    bound: a.bound.powi(k),
                }
            }
            6 => {
                let base = square_plus(&a);
                Node {
                    term: base.term.powi(-1),
                    depth: base.depth + 1,
                    bound: 1.0 / c,
                }
            }
            7 => Node {
                term: a.term.exp(),
                depth: a.depth + 1,
                bound: a.bound.exp(),
            },
            8 => {
                let arg = square_plus(&a);
                Node {
                    term: arg.term.ln(),
                    depth: arg.depth + 1,
                    bound: arg.bound.ln().abs().max(c.ln().abs()),
                }
            }
            9 => Node {
                term: a.term.sin(),
                depth: a.depth + 1,
                bound: 1.0,
            },
            10 => Node {
                term: a.term.cos(),
                depth: a.depth + 1,
                bound: 1.0,
            },
            11 => {
                let arg = square_plus(&a);
                Node {
                    term: arg.term.sqrt(),
                    depth: arg.depth + 1,
                    bound: arg.bound.sqrt(),
                }
            }
            _ => {
                let k = uniform(rng, -2.0, 2.0);
                Node {
                    term: k * &a.term,
                    depth: a.depth + 1,
                    bound: k.abs() * a.bound,
                }
            }
        };
        if next.depth <= max_depth && next.bound <= DAG_BOUND {
            pool.push(next);
        }
    }
    let last = pool.len() - 1;
    let outs: Vec<Term> = (0..outputs)
        .map(|k| {
            if k == 0 {
                pool[last].term.clone()
            } else {
                pool[rng.gen_range(0..pool.len())].term.clone()
            }
        })
        .collect();
    Expr::from_terms(inputs, &outs).expect("generated DAG is well formed")
}

/// Longest input-to-output path, counting operation nodes.
pub fn depth(e: &Expr) -> usize {
    let mut d = vec![0usize; e.nodes().len()];
    for (i, n) in e.nodes().iter().enumerate() {
        d[i] = n.args.iter().map(|&a| d[a] + 1).max().unwrap_or(0);
    }
    e.output_ids().iter().map(|&o| d[o]).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dags_respect_depth_and_are_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let n = rng.gen_range(1..=3);
            let e = dag(&mut rng, n, 2, 6);
            assert!(depth(&e) <= 6);
            let x = fiber(&mut rng, n);
            assert!(e.eval_f64(&x).unwrap().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn corpus_passes_bracket_laws() {
        use crate::fields::check_bracket_laws;
        use crate::report::SuiteConfig;
        for dim in 1..=3 {
            let (v, f) = corpus(dim, 11);
            let r = check_bracket_laws(
                &v,
                &f,
                &SuiteConfig {
                    samples: 300,
                    ..SuiteConfig::default()
                },
            );
            for c in &r.checks {
                assert!(c.pass, "dim {dim}: {c:?}");
            }
        }
    }

    #[test]
    fn partner_shares_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = tan_point(&mut rng, &Domain::euclidean(2, 1.0), 2).unwrap();
        for level in 1..=2 {
            let q = fiber_partner(&mut rng, &p, level).unwrap();
            assert_eq!(p.proj(level).unwrap(), q.proj(level).unwrap());
            assert_ne!(p, q);
        }
    }
}
