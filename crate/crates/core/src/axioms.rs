//! Sampled verification of the Euclidean tangent structure: functoriality,
//! naturality, axioms T1 to T6, cartesianness and the scalar multiplication.

use std::sync::Arc;

use rand::Rng as _;

use crate::domain::{Domain, SmoothMap};
use crate::error::Result;
use crate::expr::{Expr, Term};
use crate::random::{fiber, fiber_partner, smooth_map, tan_point, uniform};
use crate::report::{run_checks, Check, Mutation, Report, Rng, SuiteConfig};
use crate::tangent::{apply_tn, eta_fiber, partial_tangent, Slot, TanPoint};
use crate::tolerance::{rel_residual, EXACT};

/// The transformations under test; only `tau` can be swapped out.
#[derive(Clone, Copy)]
struct Structure {
    corrupt_tau: bool,
}

impl Structure {
    fn tau(&self, p: &TanPoint, j: usize) -> Result<TanPoint> {
        let q = p.swap_tau(j)?;
        if !self.corrupt_tau {
            return Ok(q);
        }
        let mut blocks = q.blocks();
        let (a, b) = (1 << (j - 1), 1 << j);
        let cross: Vec<f64> = blocks[a]
            .iter()
            .zip(&blocks[b])
            .map(|(u, v)| u * v)
            .collect();
        blocks[a | b]
            .iter_mut()
            .zip(cross)
            .for_each(|(c, d)| *c += d);
        TanPoint::from_blocks(&blocks)
    }
}

/// Names of checks whose diagrams involve `tau`.
pub const USES_TAU: &[&str] = &[
    "nat.tau",
    "scalar.mult3",
    "t3.additive",
    "t3.braid",
    "t3.involution",
    "t3.proj",
    "t3.zero",
    "t5.hexagon",
    "t5.tau_lambda",
];

/// Chart dimensions cycle through `1..=max_dim` across samples.
fn chart(i: usize, config: &SuiteConfig) -> (usize, Domain) {
    let d = 1 + i % config.max_dim.max(1);
    (d, Domain::euclidean(d, 1.0))
}

fn map(rng: &mut Rng, din: usize, dout: usize) -> SmoothMap {
    let body = smooth_map(rng, din, dout);
    SmoothMap::new(
        Arc::new(Domain::euclidean(din, 1.0)),
        Arc::new(Domain::euclidean(dout, 1.0)),
        body,
    )
    .expect("arity matches")
}

/// A map into a codomain of random dimension 1 to 3.
fn any_map(rng: &mut Rng, din: usize) -> SmoothMap {
    let dout = rng.gen_range(1..=3);
    map(rng, din, dout)
}

fn point(rng: &mut Rng, dom: &Domain, lo: usize, hi: usize) -> Result<(usize, TanPoint)> {
    let n = rng.gen_range(lo..=hi);
    Ok((n, tan_point(rng, dom, n)?))
}

fn res(a: &TanPoint, b: &TanPoint) -> f64 {
    a.residual(b)
}

/// `kappa_X: R x TX -> TX` on `R^1 x R^(2d)`.
fn kappa_map(d: usize) -> SmoothMap {
    let r = Term::var(0);
    let outs: Vec<Term> = (0..d)
        .map(|i| Term::var(1 + i))
        .chain((0..d).map(|i| &r * Term::var(1 + d + i)))
        .collect();
    let dom = Domain::product(&Domain::euclidean(1, 2.0), &Domain::euclidean(2 * d, 1.0));
    let body = Expr::from_terms(1 + 2 * d, &outs).expect("kappa is well formed");
    SmoothMap::new(Arc::new(dom), Arc::new(Domain::euclidean(2 * d, 1.0)), body)
        .expect("arity matches")
}

/// Fiber addition `T_2 X -> TX` on `R^(3d)`.
fn plus_map(d: usize) -> SmoothMap {
    let outs: Vec<Term> = (0..d)
        .map(Term::var)
        .chain((0..d).map(|i| Term::var(d + i) + Term::var(2 * d + i)))
        .collect();
    let body = Expr::from_terms(3 * d, &outs).expect("plus is well formed");
    SmoothMap::new(
        Arc::new(Domain::euclidean(3 * d, 1.0)),
        Arc::new(Domain::euclidean(2 * d, 1.0)),
        body,
    )
    .expect("arity matches")
}

/// Block-diagonal product `f x g`.
fn product_map(f: &SmoothMap, g: &SmoothMap) -> SmoothMap {
    let (a, b) = (f.dom.dim, g.dom.dim);
    let fx = f
        .body
        .substitute(&(0..a).map(Term::var).collect::<Vec<_>>())
        .expect("arity matches");
    let gx = g
        .body
        .substitute(&(0..b).map(|i| Term::var(a + i)).collect::<Vec<_>>())
        .expect("arity matches");
    let body = Expr::from_terms(a + b, &[fx, gx].concat()).expect("product is well formed");
    let dom = Domain::product(&f.dom, &g.dom);
    let cod = Domain::product(&f.cod, &g.cod);
    SmoothMap::new(Arc::new(dom), Arc::new(cod), body).expect("arity matches")
}

/// Pairing `<f, g>` of two maps with a shared domain.
fn pairing(f: &SmoothMap, g: &SmoothMap) -> SmoothMap {
    let x: Vec<Term> = (0..f.dom.dim).map(Term::var).collect();
    let outs = [
        f.body.substitute(&x).expect("arity"),
        g.body.substitute(&x).expect("arity"),
    ]
    .concat();
    let body = Expr::from_terms(f.dom.dim, &outs).expect("pairing is well formed");
    let cod = Domain::product(&f.cod, &g.cod);
    SmoothMap::new(f.dom.clone(), Arc::new(cod), body).expect("arity matches")
}

pub fn check_axiom_suite(config: &SuiteConfig) -> Report {
    let st = Structure {
        corrupt_tau: config.mutation == Some(Mutation::CorruptTau),
    };
    let checks = build_checks(config, st);
    Report::new("axioms", config, run_checks(config, checks))
}

fn build_checks(config: &SuiteConfig, st: Structure) -> Vec<Check<'static>> {
    let cfg = config.clone();
    let c = move |name: &'static str,
                  diagram: &'static str,
                  f: fn(&mut Rng, usize, &Domain, usize, Structure) -> Result<f64>| {
        let cfg = cfg.clone();
        Check::new(name, diagram, EXACT, move |rng: &mut Rng, i| {
            let (d, dom) = chart(i, &cfg);
            f(rng, d, &dom, i, st)
        })
    };

    vec![
        c("functor.identity", "T(id) = id", |rng, _, dom, _, _| {
            let (_, p) = point(rng, dom, 0, 3)?;
            Ok(res(
                &apply_tn(&SmoothMap::identity(Arc::new(dom.clone())), &p)?,
                &p,
            ))
        }),
        c("functor.compose", "T(g f) = Tg Tf", |rng, d, dom, _, _| {
            let e = rng.gen_range(1..=3);
            let k = rng.gen_range(1..=3);
            let (f, g) = (map(rng, d, e), map(rng, e, k));
            let (_, p) = point(rng, dom, 1, 3)?;
            Ok(res(
                &apply_tn(&g.after(&f)?, &p)?,
                &apply_tn(&g, &apply_tn(&f, &p)?)?,
            ))
        }),
        c("nat.pi", "pi Tf = f pi", |rng, d, dom, _, _| {
            let f = any_map(rng, d);
            let (n, p) = point(rng, dom, 1, 3)?;
            let l = rng.gen_range(1..=n);
            Ok(res(
                &apply_tn(&f, &p)?.proj(l)?,
                &apply_tn(&f, &p.proj(l)?)?,
            ))
        }),
        c("nat.zero", "0 f = Tf 0", |rng, d, dom, _, _| {
            let f = any_map(rng, d);
            let (n, p) = point(rng, dom, 0, 2)?;
            let l = rng.gen_range(1..=n + 1);
            Ok(res(
                &apply_tn(&f, &p)?.zero_at(l)?,
                &apply_tn(&f, &p.zero_at(l)?)?,
            ))
        }),
        c(
            "nat.add",
            "Tf (p + q) = Tf p + Tf q",
            |rng, d, dom, _, _| {
                let f = any_map(rng, d);
                let (n, p) = point(rng, dom, 1, 3)?;
                let l = rng.gen_range(1..=n);
                let q = fiber_partner(rng, &p, l)?;
                let lhs = apply_tn(&f, &p.add_at(&q, l)?)?;
                Ok(res(&lhs, &apply_tn(&f, &p)?.add_at(&apply_tn(&f, &q)?, l)?))
            },
        ),
        c(
            "nat.sub",
            "Tf (p - q) = Tf p - Tf q",
            |rng, d, dom, _, _| {
                let f = any_map(rng, d);
                let (n, p) = point(rng, dom, 1, 3)?;
                let l = rng.gen_range(1..=n);
                let q = fiber_partner(rng, &p, l)?;
                let lhs = apply_tn(&f, &p.sub_at(&q, l)?)?;
                Ok(res(&lhs, &apply_tn(&f, &p)?.sub_at(&apply_tn(&f, &q)?, l)?))
            },
        ),
        c("nat.tau", "tau T^2 f = T^2 f tau", |rng, d, dom, _, st| {
            let f = any_map(rng, d);
            let (n, p) = point(rng, dom, 2, 3)?;
            let j = rng.gen_range(1..n);
            Ok(res(
                &apply_tn(&f, &st.tau(&p, j)?)?,
                &st.tau(&apply_tn(&f, &p)?, j)?,
            ))
        }),
        c(
            "nat.lambda",
            "lambda Tf = T^2 f lambda",
            |rng, d, dom, _, _| {
                let f = any_map(rng, d);
                let (n, p) = point(rng, dom, 1, 2)?;
                let l = rng.gen_range(1..=n);
                Ok(res(
                    &apply_tn(&f, &p.vlift_at(l)?)?,
                    &apply_tn(&f, &p)?.vlift_at(l)?,
                ))
            },
        ),
        c(
            "nat.kappa",
            "kappa (r, Tf p) = Tf kappa (r, p)",
            |rng, d, dom, _, _| {
                let f = any_map(rng, d);
                let (n, p) = point(rng, dom, 1, 3)?;
                let l = rng.gen_range(1..=n);
                let r = uniform(rng, -2.0, 2.0);
                Ok(res(
                    &apply_tn(&f, &p.scalar_kappa(r, l)?)?,
                    &apply_tn(&f, &p)?.scalar_kappa(r, l)?,
                ))
            },
        ),
        c(
            "t1.nu2_roundtrip",
            "T^n X = T^(n-1) (TX) is bijective",
            |rng, _, dom, _, _| {
                let (_, p) = point(rng, dom, 1, 3)?;
                let peeled = p.peel_inner()?;
                let back = peeled.unpeel_inner()?;
                Ok(res(&back, &p).max(res(&back.peel_inner()?, &peeled)))
            },
        ),
        c(
            "t1.tangent_of_sum",
            "T(+) nu = T+ on T^2 X x_TX T^2 X",
            |rng, d, dom, _, _| {
                let p = tan_point(rng, dom, 2)?;
                let q = fiber_partner(rng, &p, 1)?;
                let nu = TanPoint::pair(&p.peel_inner()?, &q.peel_inner()?.slice(d..2 * d))?;
                let lhs = apply_tn(&plus_map(d), &nu)?.unpeel_inner()?;
                Ok(res(&lhs, &p.add_at(&q, 1)?))
            },
        ),
        c(
            "t2.assoc",
            "(p + q) + r = p + (q + r)",
            |rng, _, dom, _, _| {
                let (n, p) = point(rng, dom, 1, 3)?;
                let l = rng.gen_range(1..=n);
                let (q, r) = (fiber_partner(rng, &p, l)?, fiber_partner(rng, &p, l)?);
                Ok(res(
                    &p.add_at(&q, l)?.add_at(&r, l)?,
                    &p.add_at(&q.add_at(&r, l)?, l)?,
                ))
            },
        ),
        c("t2.comm", "p + q = q + p", |rng, _, dom, _, _| {
            let (n, p) = point(rng, dom, 1, 3)?;
            let l = rng.gen_range(1..=n);
            let q = fiber_partner(rng, &p, l)?;
            Ok(res(&p.add_at(&q, l)?, &q.add_at(&p, l)?))
        }),
        c("t2.unit", "p + 0 = p", |rng, _, dom, _, _| {
            let (n, p) = point(rng, dom, 1, 3)?;
            let l = rng.gen_range(1..=n);
            let zero = p.proj(l)?.zero_at(l)?;
            Ok(res(&p.add_at(&zero, l)?, &p).max(res(&zero.add_at(&p, l)?, &p)))
        }),
        c("t2.inverse", "p + (-p) = 0", |rng, _, dom, _, _| {
            let (n, p) = point(rng, dom, 1, 3)?;
            let l = rng.gen_range(1..=n);
            let zero = p.proj(l)?.zero_at(l)?;
            Ok(res(&p.add_at(&p.neg_at(l)?, l)?, &zero).max(res(&p.sub_at(&p, l)?, &zero)))
        }),
        c("t3.involution", "tau tau = id", |rng, _, dom, _, st| {
            let (n, p) = point(rng, dom, 2, 3)?;
            let j = rng.gen_range(1..n);
            Ok(res(&st.tau(&st.tau(&p, j)?, j)?, &p))
        }),
        c(
            "t3.braid",
            "T tau . tau T . T tau = tau T . T tau . tau T",
            |rng, _, dom, _, st| {
                let p = tan_point(rng, dom, 3)?;
                let lhs = st.tau(&st.tau(&st.tau(&p, 1)?, 2)?, 1)?;
                let rhs = st.tau(&st.tau(&st.tau(&p, 2)?, 1)?, 2)?;
                Ok(res(&lhs, &rhs))
            },
        ),
        c("t3.proj", "pi T . tau = T pi", |rng, _, dom, _, st| {
            let (n, p) = point(rng, dom, 2, 3)?;
            let j = rng.gen_range(1..n);
            Ok(res(&st.tau(&p, j)?.proj(j + 1)?, &p.proj(j)?))
        }),
        c(
            "t3.additive",
            "tau (T+) = (+T) (tau x tau)",
            |rng, _, dom, _, st| {
                let (n, p) = point(rng, dom, 2, 3)?;
                let j = rng.gen_range(1..n);
                let q = fiber_partner(rng, &p, j)?;
                let lhs = st.tau(&p.add_at(&q, j)?, j)?;
                Ok(res(&lhs, &st.tau(&p, j)?.add_at(&st.tau(&q, j)?, j + 1)?))
            },
        ),
        c("t3.zero", "tau . T0 = 0T", |rng, _, dom, _, st| {
            let p = tan_point(rng, dom, 1)?;
            Ok(res(&st.tau(&p.zero_at(1)?, 1)?, &p.zero_at(2)?))
        }),
        c(
            "t4.proj",
            "pi T . lambda = 0 . pi = T pi . lambda",
            |rng, _, dom, _, _| {
                let p = tan_point(rng, dom, 1)?;
                let l = p.vlift_lambda()?;
                let z = p.proj(1)?.zero_at(1)?;
                Ok(res(&l.proj(2)?, &z).max(res(&l.proj(1)?, &z)))
            },
        ),
        c(
            "t4.coassoc",
            "lambda T . lambda = T lambda . lambda",
            |rng, _, dom, _, _| {
                let l = tan_point(rng, dom, 1)?.vlift_lambda()?;
                Ok(res(&l.vlift_at(2)?, &l.vlift_at(1)?))
            },
        ),
        c(
            "t4.additive",
            "lambda (p + q) = lambda p (T+) lambda q",
            |rng, _, dom, _, _| {
                let p = tan_point(rng, dom, 1)?;
                let q = fiber_partner(rng, &p, 1)?;
                let lhs = p.add_fiber(&q)?.vlift_lambda()?;
                Ok(res(&lhs, &p.vlift_lambda()?.add_at(&q.vlift_lambda()?, 1)?))
            },
        ),
        c(
            "t5.tau_lambda",
            "tau . lambda = lambda",
            |rng, _, dom, _, st| {
                let l = tan_point(rng, dom, 1)?.vlift_lambda()?;
                Ok(res(&st.tau(&l, 1)?, &l))
            },
        ),
        c(
            "t5.hexagon",
            "T tau . tau T . T lambda = lambda T . tau",
            |rng, _, dom, _, st| {
                let p = tan_point(rng, dom, 2)?;
                let lhs = st.tau(&st.tau(&p.vlift_at(1)?, 2)?, 1)?;
                Ok(res(&lhs, &st.tau(&p, 1)?.vlift_at(2)?))
            },
        ),
        c(
            "t6.kernel",
            "ker T pi = image of lambda_2",
            |rng, _, dom, _, _| {
                let mut blocks = tan_point(rng, dom, 2)?.blocks();
                blocks[2].iter_mut().for_each(|x| *x = 0.0);
                let xi = TanPoint::from_blocks(&blocks)?;
                let zero = xi.proj(1)?.proj(1)?.zero_at(1)?;
                let (w, v) = xi.lambda2_retract()?;
                let forward =
                    res(&xi.proj(1)?, &zero).max(res(&TanPoint::vlift_lambda2(&w, &v)?, &xi));
                let w = tan_point(rng, dom, 1)?;
                let v = fiber_partner(rng, &w, 1)?;
                let l2 = TanPoint::vlift_lambda2(&w, &v)?;
                Ok(forward.max(res(&l2.proj(1)?, &w.proj(1)?.zero_at(1)?)))
            },
        ),
        c(
            "t6.lambda2_from_lambda",
            "lambda_2 = T+ . (0T x lambda)",
            |rng, _, dom, _, _| {
                let w = tan_point(rng, dom, 1)?;
                let v = fiber_partner(rng, &w, 1)?;
                let rhs = w.zero_at(2)?.add_at(&v.vlift_lambda()?, 1)?;
                Ok(res(&TanPoint::vlift_lambda2(&w, &v)?, &rhs))
            },
        ),
        c(
            "t6.lambda2_retract",
            "lambda_2 is split by its {1}, {1,2} blocks",
            |rng, _, dom, _, _| {
                let w = tan_point(rng, dom, 1)?;
                let v = fiber_partner(rng, &w, 1)?;
                let (w2, v2) = TanPoint::vlift_lambda2(&w, &v)?.lambda2_retract()?;
                Ok(res(&w2, &w).max(res(&v2, &v)))
            },
        ),
        c(
            "cartesian.chi",
            "T(X x Y) = TX x TY",
            |rng, d, dom, _, _| {
                let e = rng.gen_range(1..=3);
                let (f, g) = (any_map(rng, d), any_map(rng, d));
                let (n, p) = point(rng, dom, 1, 3)?;
                let paired = res(
                    &apply_tn(&pairing(&f, &g), &p)?,
                    &TanPoint::pair(&apply_tn(&f, &p)?, &apply_tn(&g, &p)?)?,
                );
                let h = any_map(rng, e);
                let q = tan_point(rng, &Domain::euclidean(e, 1.0), n)?;
                let prod = apply_tn(&product_map(&f, &h), &TanPoint::pair(&p, &q)?)?;
                Ok(paired.max(res(
                    &prod,
                    &TanPoint::pair(&apply_tn(&f, &p)?, &apply_tn(&h, &q)?)?,
                )))
            },
        ),
        c(
            "scalar.eta_zero",
            "eta . Tf . 0 = 0",
            |rng, d, dom, _, _| {
                let f = map(rng, d, 1);
                let x = dom.sample(rng)?;
                let v = eta_fiber(&apply_tn(&f, &TanPoint::base_point(&x).zero_at(1)?)?)?;
                Ok(rel_residual(&[v], &[0.0]))
            },
        ),
        c(
            "scalar.mult1",
            "lambda . kappa = kappa T . (id x lambda)",
            |rng, _, dom, _, _| {
                let p = tan_point(rng, dom, 1)?;
                let r = uniform(rng, -2.0, 2.0);
                Ok(res(
                    &p.scalar_kappa(r, 1)?.vlift_lambda()?,
                    &p.vlift_lambda()?.scalar_kappa(r, 2)?,
                ))
            },
        ),
        c(
            "scalar.mult2",
            "T<1> kappa = lambda_2 . (kappa x kappa) . ((pi, eta) x id)",
            |rng, d, dom, _, _| {
                let p = tan_point(rng, dom, 1)?;
                let (r, rdot) = (uniform(rng, -2.0, 2.0), uniform(rng, -1.0, 1.0));
                let scalar = TanPoint::from_blocks(&[vec![r], vec![rdot]])?;
                let junk =
                    TanPoint::from_blocks(&[[p.block(0), p.block(1)].concat(), fiber(rng, 2 * d)])?;
                let lhs =
                    partial_tangent(&kappa_map(d), Slot::First, &TanPoint::pair(&scalar, &junk)?)?
                        .unpeel_inner()?;
                let rhs =
                    TanPoint::vlift_lambda2(&p.scalar_kappa(r, 1)?, &p.scalar_kappa(rdot, 1)?)?;
                Ok(res(&lhs, &rhs))
            },
        ),
        c(
            "scalar.mult3",
            "T<2> kappa = tau . kappa T . (id x tau)",
            |rng, d, dom, _, st| {
                let big = tan_point(rng, dom, 2)?;
                let r = uniform(rng, -2.0, 2.0);
                let scalar = TanPoint::from_blocks(&[vec![r], fiber(rng, 1)])?;
                let pt = TanPoint::pair(&scalar, &big.peel_inner()?)?;
                let lhs = partial_tangent(&kappa_map(d), Slot::Second, &pt)?.unpeel_inner()?;
                let rhs = st.tau(&st.tau(&big, 1)?.scalar_kappa(r, 2)?, 1)?;
                Ok(res(&lhs, &rhs))
            },
        ),
        c(
            "module.assoc",
            "kappa (r, kappa (s, p)) = kappa (rs, p)",
            |rng, _, dom, _, _| {
                let (n, p) = point(rng, dom, 1, 3)?;
                let l = rng.gen_range(1..=n);
                let (r, s) = (uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0));
                Ok(res(
                    &p.scalar_kappa(s, l)?.scalar_kappa(r, l)?,
                    &p.scalar_kappa(r * s, l)?,
                ))
            },
        ),
        c("module.unit", "kappa (1, p) = p", |rng, _, dom, _, _| {
            let (n, p) = point(rng, dom, 1, 3)?;
            let l = rng.gen_range(1..=n);
            Ok(res(&p.scalar_kappa(1.0, l)?, &p))
        }),
        c(
            "module.scalar_linear",
            "kappa (r + s, p) = kappa (r, p) + kappa (s, p)",
            |rng, _, dom, _, _| {
                let (n, p) = point(rng, dom, 1, 3)?;
                let l = rng.gen_range(1..=n);
                let (r, s) = (uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0));
                let rhs = p.scalar_kappa(r, l)?.add_at(&p.scalar_kappa(s, l)?, l)?;
                let zero = res(&p.scalar_kappa(0.0, l)?, &p.proj(l)?.zero_at(l)?);
                Ok(res(&p.scalar_kappa(r + s, l)?, &rhs).max(zero))
            },
        ),
        c(
            "module.vector_linear",
            "kappa (r, p + q) = kappa (r, p) + kappa (r, q)",
            |rng, _, dom, _, _| {
                let (n, p) = point(rng, dom, 1, 3)?;
                let l = rng.gen_range(1..=n);
                let q = fiber_partner(rng, &p, l)?;
                let r = uniform(rng, -2.0, 2.0);
                let rhs = p.scalar_kappa(r, l)?.add_at(&q.scalar_kappa(r, l)?, l)?;
                Ok(res(&p.add_at(&q, l)?.scalar_kappa(r, l)?, &rhs))
            },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteConfig {
        SuiteConfig {
            samples: 60,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn suite_passes() {
        let r = check_axiom_suite(&small());
        for c in &r.checks {
            assert!(c.pass, "{c:?}");
        }
        assert!(r.checks.len() >= 30);
    }

    #[test]
    fn zero_tolerance_fails_everything() {
        let r = check_axiom_suite(&SuiteConfig {
            tolerance: Some(0.0),
            samples: 5,
            ..small()
        });
        assert!(r.checks.iter().all(|c| !c.pass));
    }

    #[test]
    fn corrupted_tau_is_caught_only_where_tau_appears() {
        let r = check_axiom_suite(&SuiteConfig {
            mutation: Some(Mutation::CorruptTau),
            ..small()
        });
        assert!(!r.check("t3.involution").unwrap().pass);
        for c in r
            .checks
            .iter()
            .filter(|c| !USES_TAU.contains(&c.name.as_str()))
        {
            assert!(c.pass, "{c:?}");
        }
    }
}
