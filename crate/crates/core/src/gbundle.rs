//! Right groupoid bundles in fibered charts, vertical vectors and the
//! bracket-closure suite for invariant fields.

use std::sync::Arc;

use crate::domain::{Domain, SmoothMap};
use crate::error::{Error, Result};
use crate::expr::{Expr, Term};
use crate::fields::{lie_bracket, ScalarField, VectorField};
use crate::groupoid::{base_direction_residual, FiberedGroupoid};
use crate::random::{fiber, uniform};
use crate::report::{failed_row, run_checks, Check, Report, Rng, SuiteConfig};
use crate::tangent::{apply_expr, apply_tn, TanPoint};
use crate::tolerance::{rel_residual, sup_norm, ADJACENCY, VERTICAL};
use crate::tower::Tower;

pub const BUNDLE_TOL: f64 = 1e-10;
pub const INVARIANCE_TOL: f64 = 1e-9;
pub const CLOSURE_TOL: f64 = 1e-8;

/// `r: E -> G0` with a right action `beta: E x_G0 G1 -> E`.
#[derive(Clone, Debug)]
pub struct GBundle {
    pub name: String,
    pub gpd: Arc<FiberedGroupoid>,
    /// Chart of `E` in `R^(p+e)`, base-first.
    pub total: Arc<Domain>,
    pub fiber_dim: usize,
    pub action: SmoothMap,
    /// Factors of a fiber product, for the diagonal-action checks.
    pub factors: Option<Box<(GBundle, GBundle)>>,
}

/// A tangent vector to `E` in the kernel of `Tr`.
#[derive(Clone, Debug, PartialEq)]
pub struct VerticalVector {
    pub at: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl VerticalVector {
    pub fn point(&self, p: usize) -> Result<TanPoint> {
        TanPoint::vector(&self.at, &[vec![0.0; p], self.zeta.clone()].concat())
    }
}

impl GBundle {
    pub fn new(
        name: impl Into<String>,
        gpd: Arc<FiberedGroupoid>,
        total: Domain,
        action: Expr,
    ) -> Result<GBundle> {
        let p = gpd.base_dim();
        if total.dim < p {
            return Err(Error::Dim {
                expected: p,
                got: total.dim,
            });
        }
        let total = Arc::new(total);
        let dom = Arc::new(Domain::product(&total, &gpd.arrows));
        Ok(GBundle {
            name: name.into(),
            fiber_dim: total.dim - p,
            action: SmoothMap::new(dom, total.clone(), action)?,
            gpd,
            total,
            factors: None,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.gpd.base_dim()
    }

    pub fn r(&self, e: &[f64]) -> Vec<f64> {
        e[..self.base_dim()].to_vec()
    }

    pub fn act(&self, e: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.action.eval_f64(&[e, g].concat())
    }

    /// A point over `t(g)`: drawn freely, then moved onto the fiber.
    pub fn sample_over(&self, rng: &mut Rng, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.base_dim();
        for _ in 0..self.total.budget.max(1) {
            let mut e = self.total.sample(rng)?;
            e[..p].copy_from_slice(x);
            if self.total.contains(&e) {
                return Ok(e);
            }
        }
        Err(Error::SamplerExhausted(
            format!("fiber of {}", self.name),
            self.total.budget,
        ))
    }

    /// `(e, g)` with `r(e) = t(g)`.
    pub fn sample_pair(&self, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.gpd.sample_arrow(rng)?;
        let e = self.sample_over(rng, &self.gpd.target(&g)?)?;
        Ok((e, g))
    }

    /// `(e, g, h)` with `r(e) = t(g)` and `s(g) = t(h)`.
    pub fn sample_triple(&self, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let s = self.gpd.sample_string(rng, 2)?;
        let e = self.sample_over(rng, &self.gpd.target(&s.arrows[0])?)?;
        let [g, h]: [Vec<f64>; 2] = s.arrows.try_into().expect("two arrows");
        Ok((e, g, h))
    }

    /// `T beta` at a vertical vector over `at` and the zero vector at `g`,
    /// on inner-order towers. Returns the full fiber of the result.
    pub fn act_vertical_towers(
        &self,
        at: &[Tower],
        zeta: &[Tower],
        g: &[Tower],
    ) -> Result<Vec<Tower>> {
        let order = g.first().or(at.first()).map_or(0, Tower::order);
        let zero = Tower::zero(order)?;
        let dir: Vec<Tower> = vec![zero; self.base_dim()]
            .into_iter()
            .chain(zeta.iter().cloned())
            .collect();
        let v = TanPoint::vector_over(at, &dir)?;
        let g = TanPoint::from_coords(0, g.to_vec())?.zero_lift(1)?;
        Ok(apply_expr(&self.action.body, &TanPoint::pair(&v, &g)?)?.block_towers(1))
    }

    /// Order-`n` point of `E x G1` with `x` in front and `g` at the zero section.
    fn lift_pair(&self, x: &TanPoint, g: &[f64]) -> Result<TanPoint> {
        TanPoint::pair(x, &TanPoint::base_point(g).zero_lift(x.order())?)
    }
}

fn vars(range: std::ops::Range<usize>) -> Vec<Term> {
    range.map(Term::var).collect()
}

/// `G1` acting on itself by multiplication.
pub fn unit_bundle(g: &Arc<FiberedGroupoid>) -> Result<GBundle> {
    GBundle::new(
        format!("unit({})", g.name),
        g.clone(),
        (*g.arrows).clone(),
        (*g.m.body).clone(),
    )
}

/// `G0` with `x . g = s(g)`.
pub fn base_bundle(g: &Arc<FiberedGroupoid>) -> Result<GBundle> {
    let p = g.base_dim();
    let n = g.arrow_dim();
    let beta = Expr::from_terms(p + n, &vars(p..2 * p))?;
    GBundle::new(
        format!("base({})", g.name),
        g.clone(),
        (*g.base).clone(),
        beta,
    )
}

/// `A x_G0 B` with the diagonal action, chart `(b; fA, fB)`.
pub fn fiber_product_bundle(a: &GBundle, b: &GBundle) -> Result<GBundle> {
    if a.gpd.name != b.gpd.name || a.gpd.arrows != b.gpd.arrows {
        return Err(Error::DomainMismatch(
            a.gpd.name.clone(),
            b.gpd.name.clone(),
        ));
    }
    let p = a.base_dim();
    let (ea, eb) = (a.fiber_dim, b.fiber_dim);
    let n = p + ea + eb;
    let an = a.gpd.arrow_dim();
    let a_pt = [vars(0..p), vars(p..p + ea)].concat();
    let b_pt = [vars(0..p), vars(p + ea..n)].concat();
    let arrow = vars(n..n + an);
    let ya = a
        .action
        .body
        .substitute(&[a_pt.clone(), arrow.clone()].concat())?;
    let yb = b.action.body.substitute(&[b_pt.clone(), arrow].concat())?;
    let beta = [ya, yb[p..].to_vec()].concat();
    let (ta, tb) = (&a.total, &b.total);
    let lo = [&ta.lo[..], &tb.lo[p..]].concat();
    let hi = [&ta.hi[..], &tb.hi[p..]].concat();
    let mut total = Domain::boxed(format!("{}x{}", ta.name, tb.name), lo, hi)
        .with_budget(ta.budget.max(tb.budget));
    for c in &ta.constraints {
        total = total.with_constraint(Expr::from_terms(n, &c.substitute(&a_pt)?)?)?;
    }
    for c in &tb.constraints {
        total = total.with_constraint(Expr::from_terms(n, &c.substitute(&b_pt)?)?)?;
    }
    let mut bundle = GBundle::new(
        format!("{} x {}", a.name, b.name),
        a.gpd.clone(),
        total,
        Expr::from_terms(n + an, &beta)?,
    )?;
    bundle.factors = Some(Box::new((a.clone(), b.clone())));
    Ok(bundle)
}

pub fn act_on_vertical(bundle: &GBundle, v: &VerticalVector, g: &[f64]) -> Result<VerticalVector> {
    let p = bundle.base_dim();
    let adjacency = rel_residual(&bundle.r(&v.at), &bundle.gpd.target(g)?);
    if !(adjacency <= ADJACENCY) {
        return Err(Error::Composability(adjacency));
    }
    let point = TanPoint::pair(&v.point(p)?, &TanPoint::vector(g, &vec![0.0; g.len()])?)?;
    let out = apply_tn(&bundle.action, &point)?;
    let dir = out.block(1);
    let residual = sup_norm(&dir[..p]);
    let bound = VERTICAL * (1.0 + sup_norm(&dir));
    if !(residual <= bound) {
        return Err(Error::Verticality { residual, bound });
    }
    Ok(VerticalVector {
        at: out.block(0),
        zeta: dir[p..].to_vec(),
    })
}

/// Base-direction part of `v(e)` relative to its size.
fn verticality(v: &VectorField, e: &[f64], p: usize) -> Result<f64> {
    let d = v.fiber_at(e)?;
    Ok(sup_norm(&d[..p]) / (1.0 + sup_norm(&d)))
}

/// `v(e . g)` against `T beta (v(e), 0_g)`.
fn equivariance(bundle: &GBundle, v: &VectorField, e: &[f64], g: &[f64]) -> Result<f64> {
    let p = bundle.base_dim();
    let d = v.fiber_at(e)?;
    let moved = act_on_vertical(
        bundle,
        &VerticalVector {
            at: e.to_vec(),
            zeta: d[p..].to_vec(),
        },
        g,
    )?;
    let expected = [vec![0.0; p], moved.zeta].concat();
    Ok(rel_residual(&v.fiber_at(&bundle.act(e, g)?)?, &expected))
}

pub fn check_bundle_axioms(bundle: &GBundle, config: &SuiteConfig) -> Report {
    let b = bundle;
    let p = b.base_dim();
    let mut checks = vec![
        Check::new(
            "fibers",
            "r . beta = s . pr2",
            BUNDLE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                Ok(rel_residual(&b.r(&b.act(&e, &g)?), &b.gpd.source(&g)))
            },
        ),
        Check::new(
            "unit",
            "beta . (id, 1 . r) = id",
            BUNDLE_TOL,
            move |rng: &mut Rng, _| {
                let e = b.total.sample(rng)?;
                Ok(rel_residual(&b.act(&e, &b.gpd.identity(&b.r(&e))?)?, &e))
            },
        ),
        Check::new(
            "assoc",
            "beta . (beta x id) = beta . (id x m)",
            BUNDLE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g, h) = b.sample_triple(rng)?;
                Ok(rel_residual(
                    &b.act(&b.act(&e, &g)?, &h)?,
                    &b.act(&e, &b.gpd.mul(&g, &h)?)?,
                ))
            },
        ),
        Check::new(
            "tangent.assoc",
            "T beta intertwines the lifted actions of TG",
            INVARIANCE_TOL,
            move |rng: &mut Rng, _| {
                let g1 = &b.gpd;
                let (e, g, h) = b.sample_triple(rng)?;
                let eta = TanPoint::vector(&h, &fiber(rng, h.len()))?;
                let tt = apply_tn(&g1.t, &eta)?.block(1);
                let gamma = TanPoint::vector(&g, &[tt, fiber(rng, g1.fiber_dim)].concat())?;
                let te = apply_tn(&g1.t, &gamma)?.block(1);
                let eps = TanPoint::vector(&e, &[te, fiber(rng, b.fiber_dim)].concat())?;
                let once = apply_tn(&b.action, &TanPoint::pair(&eps, &gamma)?)?;
                let left = apply_tn(&b.action, &TanPoint::pair(&once, &eta)?)?;
                let gh = apply_tn(&g1.m, &TanPoint::pair(&gamma, &eta)?)?;
                let right = apply_tn(&b.action, &TanPoint::pair(&eps, &gh)?)?;
                let fibers = once.slice(0..p).residual(&gamma.slice(0..p));
                Ok(left.residual(&right).max(fibers))
            },
        ),
    ];
    if let Some(factors) = &b.factors {
        let (fa, fb) = (&factors.0, &factors.1);
        let ea = fa.fiber_dim;
        checks.push(Check::new(
            "diagonal.pr1",
            "pr1 . beta = beta_A . (pr1 x id)",
            BUNDLE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                let out = b.act(&e, &g)?;
                Ok(rel_residual(&out[..p + ea], &fa.act(&e[..p + ea], &g)?))
            },
        ));
        checks.push(Check::new(
            "diagonal.pr2",
            "pr2 . beta = beta_B . (pr2 x id)",
            BUNDLE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                let out = b.act(&e, &g)?;
                let pick = |x: &[f64]| [&x[..p], &x[p + ea..]].concat();
                Ok(rel_residual(&pick(&out), &fb.act(&pick(&e), &g)?))
            },
        ));
    }
    Report::new("bundle", config, run_checks(config, checks))
}

/// Verticality and equivariance of `v` on `E`.
pub fn is_invariant(bundle: &GBundle, v: &VectorField, config: &SuiteConfig) -> Report {
    invariance_rows("invariance", bundle, v, INVARIANCE_TOL, config)
}

fn invariance_rows(
    suite: &str,
    b: &GBundle,
    v: &VectorField,
    tol: f64,
    config: &SuiteConfig,
) -> Report {
    if *b.total != *v.on {
        let why = format!(
            "precondition: field on `{}`, bundle chart `{}`",
            v.on.name, b.total.name
        );
        return Report::new(
            suite,
            config,
            vec![failed_row("precondition", "field lives on E", tol, why)],
        );
    }
    let p = b.base_dim();
    let checks = vec![
        Check::new(
            "vertical",
            "Tr . v = 0 . r",
            tol,
            move |rng: &mut Rng, _| verticality(v, &b.total.sample(rng)?, p),
        ),
        Check::new(
            "equivariant",
            "v . beta = T beta . (v x 0)",
            tol,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                equivariance(b, v, &e, &g)
            },
        ),
    ];
    Report::new(suite, config, run_checks(config, checks))
}

/// `f . beta = f . pr1`.
pub fn is_invariant_function(bundle: &GBundle, f: &ScalarField, config: &SuiteConfig) -> Report {
    let b = bundle;
    let check = Check::new(
        "function",
        "f . beta = f . pr1",
        INVARIANCE_TOL,
        move |rng: &mut Rng, _| {
            let (e, g) = b.sample_pair(rng)?;
            Ok(rel_residual(
                &[f.value_at(&b.act(&e, &g)?)?],
                &[f.value_at(&e)?],
            ))
        },
    );
    Report::new(
        "invariant_function",
        config,
        run_checks(config, vec![check]),
    )
}

/// Closure of invariant fields under bracket, sum and invariant scaling, and
/// the restricted tangent transformations on vertical data.
pub fn check_invariant_closure(
    bundle: &GBundle,
    v: &VectorField,
    w: &VectorField,
    f: &ScalarField,
    config: &SuiteConfig,
) -> Report {
    let pre = [
        is_invariant(bundle, v, config),
        is_invariant(bundle, w, config),
        is_invariant_function(bundle, f, config),
    ];
    let failing: Vec<String> = pre
        .iter()
        .zip([&v.name, &w.name, &f.name])
        .filter(|(r, _)| !r.passed())
        .map(|(r, name)| {
            format!(
                "{name} fails {}",
                r.failures()
                    .map(|c| c.name.as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            )
        })
        .collect();
    if !failing.is_empty() {
        let why = format!("precondition: {}", failing.join("; "));
        return Report::new(
            "closure",
            config,
            vec![failed_row(
                "precondition",
                "inputs are invariant",
                CLOSURE_TOL,
                why,
            )],
        );
    }
    let derived =
        (|| -> Result<[VectorField; 3]> { Ok([lie_bracket(v, w)?, v.add(w)?, v.times(f)?]) })();
    let [bracket, sum, scaled] = match derived {
        Ok(d) => d,
        Err(e) => {
            return Report::new(
                "closure",
                config,
                vec![failed_row(
                    "derived",
                    "derived fields",
                    CLOSURE_TOL,
                    e.to_string(),
                )],
            )
        }
    };
    let mut report = Report::new("closure", config, Vec::new());
    for (prefix, field) in [("bracket", &bracket), ("sum", &sum), ("scaled", &scaled)] {
        report.absorb(
            prefix,
            invariance_rows(prefix, bundle, field, CLOSURE_TOL, config),
        );
    }
    report.absorb("restricted", restricted_rows(bundle, v, w, config));
    report
}

/// The tangent transformations restricted to vertical data commute with the
/// lifted action.
fn restricted_rows(b: &GBundle, v: &VectorField, w: &VectorField, config: &SuiteConfig) -> Report {
    let p = b.base_dim();
    let vertical_at = move |f: &VectorField, e: &[f64]| -> Result<VerticalVector> {
        Ok(VerticalVector {
            at: e.to_vec(),
            zeta: f.fiber_at(e)?[p..].to_vec(),
        })
    };
    let lift2 = move |x: &TanPoint, g: &[f64]| -> Result<TanPoint> {
        apply_tn(&b.action, &b.lift_pair(x, g)?)
    };
    let vertical2 = move |x: &TanPoint| base_direction_residual(x, p);
    let checks = vec![
        Check::new(
            "plus",
            "+' : V2E -> VE commutes with the action",
            BUNDLE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                let (a, c) = (vertical_at(v, &e)?, vertical_at(w, &e)?);
                let both = VerticalVector {
                    at: e.clone(),
                    zeta: a.zeta.iter().zip(&c.zeta).map(|(x, y)| x + y).collect(),
                };
                let (ma, mc) = (act_on_vertical(b, &a, &g)?, act_on_vertical(b, &c, &g)?);
                let sum: Vec<f64> = ma.zeta.iter().zip(&mc.zeta).map(|(x, y)| x + y).collect();
                Ok(rel_residual(&act_on_vertical(b, &both, &g)?.zeta, &sum))
            },
        ),
        Check::new(
            "kappa",
            "kappa' : R x VE -> VE commutes with the action",
            BUNDLE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                let r = uniform(rng, -2.0, 2.0);
                let a = vertical_at(v, &e)?;
                let ra = VerticalVector {
                    at: e.clone(),
                    zeta: a.zeta.iter().map(|x| r * x).collect(),
                };
                let expected: Vec<f64> = act_on_vertical(b, &a, &g)?
                    .zeta
                    .iter()
                    .map(|x| r * x)
                    .collect();
                Ok(rel_residual(&act_on_vertical(b, &ra, &g)?.zeta, &expected))
            },
        ),
        Check::new(
            "lambda",
            "lambda' : VE -> V(VE) commutes with the action",
            CLOSURE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                let a = vertical_at(v, &e)?;
                let out = lift2(&a.point(p)?.vlift_lambda()?, &g)?;
                let expected = act_on_vertical(b, &a, &g)?.point(p)?.vlift_lambda()?;
                Ok(out.residual(&expected).max(vertical2(&out)))
            },
        ),
        Check::new(
            "lambda2",
            "lambda2' : V2E -> V(VE) commutes with the action",
            CLOSURE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                let (a, c) = (vertical_at(v, &e)?, vertical_at(w, &e)?);
                let out = lift2(&TanPoint::vlift_lambda2(&a.point(p)?, &c.point(p)?)?, &g)?;
                let (ma, mc) = (act_on_vertical(b, &a, &g)?, act_on_vertical(b, &c, &g)?);
                let expected = TanPoint::vlift_lambda2(&ma.point(p)?, &mc.point(p)?)?;
                Ok(out.residual(&expected).max(vertical2(&out)))
            },
        ),
        Check::new(
            "tau",
            "tau' on V^[2]E commutes with the action",
            CLOSURE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                let blocks: Vec<Vec<f64>> = (0..4)
                    .map(|mask| {
                        if mask == 0 {
                            e.clone()
                        } else {
                            [vec![0.0; p], fiber(rng, b.fiber_dim)].concat()
                        }
                    })
                    .collect();
                let x = TanPoint::from_blocks(&blocks)?;
                let out = lift2(&x.swap_tau(1)?, &g)?;
                let expected = lift2(&x, &g)?.swap_tau(1)?;
                Ok(out.residual(&expected).max(vertical2(&out)))
            },
        ),
        Check::new(
            "zero",
            "0' : E -> VE commutes with the action",
            BUNDLE_TOL,
            move |rng: &mut Rng, _| {
                let (e, g) = b.sample_pair(rng)?;
                let zero = VerticalVector {
                    at: e.clone(),
                    zeta: vec![0.0; b.fiber_dim],
                };
                let moved = act_on_vertical(b, &zero, &g)?;
                Ok(sup_norm(&moved.zeta).max(rel_residual(&moved.at, &b.act(&e, &g)?)))
            },
        ),
    ];
    Report::new("restricted", config, run_checks(config, checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::{action_gl2_r2, interval, matrix_group, pair_groupoid};

    fn cfg(samples: usize) -> SuiteConfig {
        SuiteConfig {
            samples,
            ..SuiteConfig::default()
        }
    }

    fn all_pass(r: &Report) {
        for c in &r.checks {
            assert!(c.pass, "{}: {c:?}", r.suite);
        }
    }

    fn pair() -> Arc<FiberedGroupoid> {
        Arc::new(pair_groupoid(interval(0.0, 1.0).unwrap()).unwrap())
    }

    fn gl2() -> Arc<FiberedGroupoid> {
        Arc::new(matrix_group(2).unwrap())
    }

    /// `v(g) = A g` on `GL(2)`.
    fn right_invariant(g: &Arc<FiberedGroupoid>, a: [f64; 4]) -> VectorField {
        let x = vars(0..4);
        let outs: Vec<Term> = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| a[2 * i] * &x[j] + a[2 * i + 1] * &x[2 + j])
            .collect();
        VectorField::from_expr("Ag", g.arrows.clone(), Expr::from_terms(4, &outs).unwrap()).unwrap()
    }

    /// `v(y; x) = (0, a(x))` on the pair groupoid.
    fn target_field(g: &Arc<FiberedGroupoid>, a: Term, name: &str) -> VectorField {
        VectorField::from_expr(
            name,
            g.arrows.clone(),
            Expr::from_terms(2, &[Term::c(0.0), a]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn builders_satisfy_bundle_axioms() {
        for g in [pair(), gl2(), Arc::new(action_gl2_r2().unwrap())] {
            let u = unit_bundle(&g).unwrap();
            let base = base_bundle(&g).unwrap();
            let r = check_bundle_axioms(&u, &cfg(100));
            all_pass(&r);
            all_pass(&check_bundle_axioms(&base, &cfg(100)));
            let both = fiber_product_bundle(&u, &base).unwrap();
            let r = check_bundle_axioms(&both, &cfg(100));
            assert!(r.check("diagonal.pr1").is_some());
            all_pass(&r);
        }
        let r = check_bundle_axioms(&unit_bundle(&pair()).unwrap(), &cfg(100));
        assert!(r
            .checks
            .iter()
            .filter(|c| c.name != "tangent.assoc")
            .all(|c| c.max_residual.unwrap() <= 1e-12));
    }

    #[test]
    fn base_bundle_action_is_source() {
        let g = pair();
        let b = base_bundle(&g).unwrap();
        assert_eq!(b.act(&[0.3], &[0.6, 0.3]).unwrap(), vec![0.6]);
    }

    #[test]
    fn vertical_action_examples() {
        let g = pair();
        let u = unit_bundle(&g).unwrap();
        let v = VerticalVector {
            at: vec![0.4, 0.2],
            zeta: vec![0.7],
        };
        let moved = act_on_vertical(&u, &v, &[0.9, 0.4]).unwrap();
        assert_eq!(
            moved,
            VerticalVector {
                at: vec![0.9, 0.2],
                zeta: vec![0.7]
            }
        );
        let unit = act_on_vertical(&u, &v, &g.identity(&[0.4]).unwrap()).unwrap();
        assert_eq!(unit, v);
        assert!(matches!(
            act_on_vertical(&u, &v, &[0.9, 0.5]),
            Err(Error::Composability(_))
        ));

        let gl = gl2();
        let u = unit_bundle(&gl).unwrap();
        let mut rng = crate::report::substream(2, "two_step");
        for _ in 0..50 {
            let (e, a, b) = u.sample_triple(&mut rng).unwrap();
            let v = VerticalVector {
                at: e,
                zeta: fiber(&mut rng, 4),
            };
            let two = act_on_vertical(&u, &act_on_vertical(&u, &v, &a).unwrap(), &b).unwrap();
            let one = act_on_vertical(&u, &v, &gl.mul(&a, &b).unwrap()).unwrap();
            assert!(rel_residual(&two.zeta, &one.zeta) <= 1e-9);
        }
    }

    #[test]
    fn invariance_examples() {
        let g = pair();
        let u = unit_bundle(&g).unwrap();
        let x = Term::var(1);
        let v = target_field(&g, x.sin() + 0.5 * &x * &x, "a");
        all_pass(&is_invariant(&u, &v, &cfg(200)));
        let bad = VectorField::from_expr(
            "b",
            g.arrows.clone(),
            Expr::from_terms(2, &[Term::c(0.3), Term::c(0.0)]).unwrap(),
        )
        .unwrap();
        assert!(
            !is_invariant(&u, &bad, &cfg(20))
                .check("vertical")
                .unwrap()
                .pass
        );
        let source_dependent = target_field(&g, Term::var(0), "y");
        assert!(
            !is_invariant(&u, &source_dependent, &cfg(20))
                .check("equivariant")
                .unwrap()
                .pass
        );

        let gl = gl2();
        let r = is_invariant(
            &unit_bundle(&gl).unwrap(),
            &right_invariant(&gl, [0.3, -1.0, 0.5, 0.2]),
            &cfg(200),
        );
        all_pass(&r);
        assert!(r.max_residual() <= 1e-10);
    }

    #[test]
    fn closure_examples() {
        let gl = gl2();
        let u = unit_bundle(&gl).unwrap();
        let v = right_invariant(&gl, [0.3, -1.0, 0.5, 0.2]);
        let w = right_invariant(&gl, [-0.7, 0.1, 0.4, 0.9]);
        let one = ScalarField::constant(gl.arrows.clone(), 2.0);
        all_pass(&check_invariant_closure(&u, &v, &w, &one, &cfg(200)));
        let zero = VectorField::zero(gl.arrows.clone());
        all_pass(&check_invariant_closure(&u, &zero, &w, &one, &cfg(50)));

        let g = pair();
        let u = unit_bundle(&g).unwrap();
        let x = Term::var(1);
        let v = target_field(&g, x.cos(), "a");
        let w = target_field(&g, &x * &x * &x - 0.2, "b");
        let f = ScalarField::from_expr(
            "x^2",
            g.arrows.clone(),
            Expr::from_terms(2, &[&x * &x]).unwrap(),
        )
        .unwrap();
        let r = check_invariant_closure(&u, &v, &w, &f, &cfg(200));
        all_pass(&r);
        assert!(
            r.check("bracket.equivariant").is_some() && r.check("restricted.lambda2").is_some()
        );

        let y = ScalarField::from_expr(
            "y",
            g.arrows.clone(),
            Expr::from_terms(2, &[Term::var(0)]).unwrap(),
        )
        .unwrap();
        let r = check_invariant_closure(&u, &v, &w, &y, &cfg(50));
        assert_eq!(r.checks.len(), 1);
        assert!(r.checks[0]
            .error
            .as_deref()
            .unwrap()
            .starts_with("precondition"));
    }
}
