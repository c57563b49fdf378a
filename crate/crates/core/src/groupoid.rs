//! Differentiable groupoids in fibered charts.
//!
//! Arrows live in a chart `G1 ⊆ G0 x F` with base-first coordinates and the
//! source is the projection onto the base block. Target, multiplication,
//! unit and inverse are expressions defined on open supersets of their loci;
//! the axioms are only asserted on composable samples.

use std::sync::Arc;

use crate::domain::{Domain, SmoothMap};
use crate::error::{Error, Result};
use crate::expr::{Expr, Term};
use crate::random::{fiber, tan_point};
use crate::report::{run_checks, Check, Mutation, Report, Rng, SuiteConfig};
use crate::tangent::{apply_tn, TanPoint};
use crate::tolerance::{rel_residual, sup_norm, ADJACENCY};

#[derive(Clone, Debug)]
pub struct FiberedGroupoid {
    pub name: String,
    /// Chart of `G0`, dimension `p`.
    pub base: Arc<Domain>,
    /// `q`, the dimension of the source fibers.
    pub fiber_dim: usize,
    /// Chart of `G1` in `R^(p+q)`.
    pub arrows: Arc<Domain>,
    pub t: SmoothMap,
    pub m: SmoothMap,
    pub unit: SmoothMap,
    pub inv: SmoothMap,
    /// Default tolerance of this groupoid's checks.
    pub tolerance: f64,
}

/// `g_1, ..., g_k` with `s(g_i) = t(g_{i+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComposableString {
    pub arrows: Vec<Vec<f64>>,
    /// Largest relative adjacency defect.
    pub adjacency: f64,
}

pub const GROUPOID_TOL: f64 = 1e-10;
pub const TANGENT_TOL: f64 = 1e-9;

impl FiberedGroupoid {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        base: Domain,
        fiber_dim: usize,
        arrows: Domain,
        t: Expr,
        m: Expr,
        unit: Expr,
        inv: Expr,
    ) -> Result<FiberedGroupoid> {
        let p = base.dim;
        if arrows.dim != p + fiber_dim {
            return Err(Error::Dim {
                expected: p + fiber_dim,
                got: arrows.dim,
            });
        }
        let base = Arc::new(base);
        let arrows = Arc::new(arrows);
        let pairs =
            Arc::new(Domain::product(&arrows, &arrows).renamed(format!("{}^2", arrows.name)));
        Ok(FiberedGroupoid {
            name: name.into(),
            t: SmoothMap::new(arrows.clone(), base.clone(), t)?,
            m: SmoothMap::new(pairs, arrows.clone(), m)?,
            unit: SmoothMap::new(base.clone(), arrows.clone(), unit)?,
            inv: SmoothMap::new(arrows.clone(), arrows.clone(), inv)?,
            base,
            fiber_dim,
            arrows,
            tolerance: GROUPOID_TOL,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim
    }

    pub fn arrow_dim(&self) -> usize {
        self.arrows.dim
    }

    pub fn source(&self, g: &[f64]) -> Vec<f64> {
        g[..self.base_dim()].to_vec()
    }

    pub fn target(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.t.eval_f64(g)
    }

    pub fn mul(&self, g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.m.eval_f64(&[g, h].concat())
    }

    pub fn identity(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.unit.eval_f64(x)
    }

    pub fn inverse(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.inv.eval_f64(g)
    }

    pub fn sample_arrow(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        self.arrows.sample(rng)
    }

    /// Draws `g_k` freely, then each earlier arrow freely with its base block
    /// overwritten by the target of its successor.
    pub fn sample_string(&self, rng: &mut Rng, k: usize) -> Result<ComposableString> {
        let p = self.base_dim();
        let mut arrows = vec![self.sample_arrow(rng)?];
        for _ in 1..k {
            let next = self.target(&arrows[0])?;
            let mut accepted = None;
            for _ in 0..self.arrows.budget.max(1) {
                let mut g = self.sample_arrow(rng)?;
                g[..p].copy_from_slice(&next);
                if self.arrows.contains(&g) {
                    accepted = Some(g);
                    break;
                }
            }
            let g = accepted.ok_or_else(|| {
                Error::SamplerExhausted(format!("{} strings", self.name), self.arrows.budget)
            })?;
            arrows.insert(0, g);
        }
        let mut adjacency: f64 = 0.0;
        for pair in arrows.windows(2) {
            adjacency = adjacency.max(rel_residual(
                &self.source(&pair[0]),
                &self.target(&pair[1])?,
            ));
        }
        if !(adjacency <= ADJACENCY) {
            return Err(Error::Composability(adjacency));
        }
        Ok(ComposableString { arrows, adjacency })
    }

    /// A deliberately broken copy; `CorruptTau` leaves the groupoid unchanged.
    pub fn mutated(&self, mutation: Mutation) -> Result<FiberedGroupoid> {
        let mut g = self.clone();
        let n = self.arrow_dim();
        match mutation {
            Mutation::TransposeM => {
                let swapped: Vec<Term> = (n..2 * n).chain(0..n).map(Term::var).collect();
                let body = Expr::from_terms(2 * n, &self.m.body.substitute(&swapped)?)?;
                g.m = SmoothMap::new(self.m.dom.clone(), self.m.cod.clone(), body)?;
                g.name = format!("{} (transposed m)", self.name);
            }
            Mutation::DropUnit => {
                let p = self.base_dim();
                let x: Vec<Term> = (0..p).map(Term::var).collect();
                let outs: Vec<Term> = self
                    .unit
                    .body
                    .substitute(&x)?
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| if i < p { t } else { 1.5 * t })
                    .collect();
                g.unit = SmoothMap::new(
                    self.unit.dom.clone(),
                    self.unit.cod.clone(),
                    Expr::from_terms(p, &outs)?,
                )?;
                g.name = format!("{} (shifted unit)", self.name);
            }
            Mutation::CorruptTau => {}
        }
        Ok(g)
    }

    fn apply_mutation(&self, config: &SuiteConfig) -> Result<FiberedGroupoid> {
        match config.mutation {
            Some(m) => self.mutated(m),
            None => Ok(self.clone()),
        }
    }
}

/// Names of checks that the unit and multiplication mutations target.
pub const UNIT_CHECKS: &[&str] = &["inv_left", "inv_right", "t_unit", "unit_left", "unit_right"];
pub const MULT_CHECKS: &[&str] = &[
    "assoc",
    "inv_left",
    "inv_right",
    "s_m",
    "t_m",
    "unit_left",
    "unit_right",
];

fn vres(a: &[f64], b: &[f64]) -> f64 {
    rel_residual(a, b)
}

pub fn check_groupoid_axioms(g: &FiberedGroupoid, config: &SuiteConfig) -> Report {
    let g = match g.apply_mutation(config) {
        Ok(g) => g,
        Err(e) => {
            let row =
                crate::report::failed_row("mutation", "mutated structure maps", 0.0, e.to_string());
            return Report::new("groupoid", config, vec![row]);
        }
    };
    let tol = g.tolerance;
    let g = &g;
    type Sample = fn(&FiberedGroupoid, &mut Rng) -> Result<f64>;
    let c = |name: &'static str, diagram: &'static str, f: Sample| {
        Check::new(name, diagram, tol, move |rng: &mut Rng, _| f(g, rng))
    };
    let checks = vec![
        c("s_m", "s . m = s . pr2", |g, rng| {
            let s = g.sample_string(rng, 2)?;
            let (a, b) = (&s.arrows[0], &s.arrows[1]);
            Ok(vres(&g.source(&g.mul(a, b)?), &g.source(b)))
        }),
        c("t_m", "t . m = t . pr1", |g, rng| {
            let s = g.sample_string(rng, 2)?;
            let (a, b) = (&s.arrows[0], &s.arrows[1]);
            Ok(vres(&g.target(&g.mul(a, b)?)?, &g.target(a)?))
        }),
        c("s_unit", "s . 1 = id", |g, rng| {
            let x = g.base.sample(rng)?;
            Ok(vres(&g.source(&g.identity(&x)?), &x))
        }),
        c("t_unit", "t . 1 = id", |g, rng| {
            let x = g.base.sample(rng)?;
            Ok(vres(&g.target(&g.identity(&x)?)?, &x))
        }),
        c("s_inv", "s . i = t", |g, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(&g.source(&g.inverse(&a)?), &g.target(&a)?))
        }),
        c("t_inv", "t . i = s", |g, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(&g.target(&g.inverse(&a)?)?, &g.source(&a)))
        }),
        c("assoc", "m . (m x id) = m . (id x m)", |g, rng| {
            let s = g.sample_string(rng, 3)?;
            let (a, b, k) = (&s.arrows[0], &s.arrows[1], &s.arrows[2]);
            Ok(vres(&g.mul(&g.mul(a, b)?, k)?, &g.mul(a, &g.mul(b, k)?)?))
        }),
        c("unit_left", "m . (1 . t, id) = id", |g, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(&g.mul(&g.identity(&g.target(&a)?)?, &a)?, &a))
        }),
        c("unit_right", "m . (id, 1 . s) = id", |g, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(&g.mul(&a, &g.identity(&g.source(&a))?)?, &a))
        }),
        c("inv_left", "m . (i, id) = 1 . s", |g, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(
                &g.mul(&g.inverse(&a)?, &a)?,
                &g.identity(&g.source(&a))?,
            ))
        }),
        c("inv_right", "m . (id, i) = 1 . t", |g, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(
                &g.mul(&a, &g.inverse(&a)?)?,
                &g.identity(&g.target(&a)?)?,
            ))
        }),
        c("inv_involution", "i . i = id", |g, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(&g.inverse(&g.inverse(&a)?)?, &a))
        }),
        c(
            "adjacency",
            "s(g_i) = t(g_(i+1)) on sampled nerve strings",
            |g, rng| Ok(g.sample_string(rng, 3)?.adjacency),
        ),
    ];
    Report::new("groupoid", config, run_checks(config, checks))
}

/// `T` of an expression with tangent coordinates interleaved per object:
/// each object `(b, f)` of sizes `(bp, fq)` becomes `(b, db, f, df)`.
pub fn lift_expr(e: &Expr, ins: &[(usize, usize)], outs: &[(usize, usize)]) -> Result<Expr> {
    let n = e.inputs();
    let k = e.outputs();
    let te = e.tangent();
    let mut args = vec![Term::c(0.0); 2 * n];
    for (old, new) in interleave(ins, n) {
        args[old] = Term::var(new);
    }
    let y = te.substitute(&args)?;
    let mut out = vec![Term::c(0.0); 2 * k];
    for (old, new) in interleave(outs, k) {
        out[new] = y[old].clone();
    }
    Expr::from_terms(2 * n, &out)
}

/// Pairs `(index in (x, dx) layout, index in interleaved layout)`.
fn interleave(layout: &[(usize, usize)], n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let (mut o, mut o2) = (0, 0);
    for &(bp, fq) in layout {
        for b in 0..bp {
            pairs.push((o + b, o2 + b));
            pairs.push((n + o + b, o2 + bp + b));
        }
        for f in 0..fq {
            pairs.push((o + bp + f, o2 + 2 * bp + f));
            pairs.push((n + o + bp + f, o2 + 2 * bp + fq + f));
        }
        o += bp + fq;
        o2 += 2 * (bp + fq);
    }
    pairs
}

/// The chart `T G1` with coordinates `(b, db, f, df)`.
fn tangent_arrows(g: &FiberedGroupoid) -> Result<Domain> {
    let (p, q) = (g.base_dim(), g.fiber_dim);
    let a = &g.arrows;
    let pick = |v: &[f64], d: f64| -> Vec<f64> {
        [&v[..p], &vec![d; p][..], &v[p..], &vec![d; q][..]].concat()
    };
    let mut dom = Domain::boxed(format!("T{}", a.name), pick(&a.lo, -1.0), pick(&a.hi, 1.0));
    let vars: Vec<Term> = (0..p)
        .map(Term::var)
        .chain((0..q).map(|i| Term::var(2 * p + i)))
        .collect();
    for c in &a.constraints {
        dom = dom.with_constraint(Expr::from_terms(2 * (p + q), &c.substitute(&vars)?)?)?;
    }
    Ok(dom.with_budget(a.budget))
}

/// The tangent groupoid `TG1 => TG0`, all structure maps lifted.
pub fn tangent_groupoid(g: &FiberedGroupoid) -> Result<FiberedGroupoid> {
    let (p, q) = (g.base_dim(), g.fiber_dim);
    let arrow = (p, q);
    let point = (p, 0);
    let mut tg = FiberedGroupoid::new(
        format!("T({})", g.name),
        g.base.tangent(),
        2 * q,
        tangent_arrows(g)?,
        lift_expr(&g.t.body, &[arrow], &[point])?,
        lift_expr(&g.m.body, &[arrow, arrow], &[arrow])?,
        lift_expr(&g.unit.body, &[point], &[arrow])?,
        lift_expr(&g.inv.body, &[arrow], &[arrow])?,
    )?;
    tg.tolerance = TANGENT_TOL;
    Ok(tg)
}

/// Zero section of `G1` in the tangent chart.
fn zero_arrow(g: &[f64], p: usize) -> Vec<f64> {
    let q = g.len() - p;
    [&g[..p], &vec![0.0; p][..], &g[p..], &vec![0.0; q][..]].concat()
}

fn zero_base(x: &[f64]) -> Vec<f64> {
    [x, &vec![0.0; x.len()][..]].concat()
}

/// Axioms of `TG`, prefixed `tangent.`, and the zero section `G -> TG` as a
/// morphism on all five structure maps.
pub fn check_tangent_groupoid(g: &FiberedGroupoid, config: &SuiteConfig) -> Result<Report> {
    let tg = tangent_groupoid(g)?;
    let mut report = Report::new("tangent_groupoid", config, Vec::new());
    let mut axioms = check_groupoid_axioms(
        &tg,
        &SuiteConfig {
            mutation: None,
            ..config.clone()
        },
    );
    axioms.suite = "tangent".into();
    report.absorb("tangent", axioms);
    let p = g.base_dim();
    let tol = 1e-10;
    let (g, tg) = (&g.apply_mutation(config)?, &tg);
    type Sample = fn(&FiberedGroupoid, &FiberedGroupoid, usize, &mut Rng) -> Result<f64>;
    let c = |name: &'static str, diagram: &'static str, f: Sample| {
        Check::new(name, diagram, tol, move |rng: &mut Rng, _| f(g, tg, p, rng))
    };
    let checks = vec![
        c("zero_section.s", "Ts . 0 = 0 . s", |g, tg, p, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(
                &tg.source(&zero_arrow(&a, p)),
                &zero_base(&g.source(&a)),
            ))
        }),
        c("zero_section.t", "Tt . 0 = 0 . t", |g, tg, p, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(
                &tg.target(&zero_arrow(&a, p))?,
                &zero_base(&g.target(&a)?),
            ))
        }),
        c("zero_section.m", "Tm . (0 x 0) = 0 . m", |g, tg, p, rng| {
            let s = g.sample_string(rng, 2)?;
            let (a, b) = (&s.arrows[0], &s.arrows[1]);
            Ok(vres(
                &tg.mul(&zero_arrow(a, p), &zero_arrow(b, p))?,
                &zero_arrow(&g.mul(a, b)?, p),
            ))
        }),
        c("zero_section.unit", "T1 . 0 = 0 . 1", |g, tg, p, rng| {
            let x = g.base.sample(rng)?;
            Ok(vres(
                &tg.identity(&zero_base(&x))?,
                &zero_arrow(&g.identity(&x)?, p),
            ))
        }),
        c("zero_section.inv", "Ti . 0 = 0 . i", |g, tg, p, rng| {
            let a = g.sample_arrow(rng)?;
            Ok(vres(
                &tg.inverse(&zero_arrow(&a, p))?,
                &zero_arrow(&g.inverse(&a)?, p),
            ))
        }),
    ];
    let mut zero = Report::new("zero_section", config, run_checks(config, checks));
    zero.checks
        .iter_mut()
        .for_each(|c| c.name = c.name.trim_start_matches("zero_section.").to_string());
    report.absorb("zero_section", zero);
    Ok(report)
}

/// Largest own-direction coefficient of the first `dims` coordinates,
/// relative to `1 + |p|`.
pub fn base_direction_residual(p: &TanPoint, dims: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for c in &p.coords()[..dims] {
        let inner = 1usize << p.inner();
        for (mask, v) in c.coeffs().iter().enumerate() {
            if mask >= inner {
                worst = worst.max(v.abs());
            }
        }
    }
    worst / (1.0 + sup_norm(&p.flat()))
}

/// An order-`n` point over `G1` at `g` with zero base directions.
pub fn vertical_point(rng: &mut Rng, g: &[f64], p: usize, n: usize) -> Result<TanPoint> {
    let mut blocks = vec![g.to_vec()];
    for _ in 1..1usize << n {
        blocks.push([vec![0.0; p], fiber(rng, g.len() - p)].concat());
    }
    TanPoint::from_blocks(&blocks)
}

/// `G2` as a graph over `G1 x F`: `(h, f) -> ((t(h), f), h)`.
fn nerve_chart(g: &FiberedGroupoid) -> Result<Expr> {
    let (p, q) = (g.base_dim(), g.fiber_dim);
    let n = p + q;
    let h: Vec<Term> = (0..n).map(Term::var).collect();
    let th = g.t.body.substitute(&h)?;
    let outs: Vec<Term> = th
        .into_iter()
        .chain((0..q).map(|i| Term::var(n + i)))
        .chain(h)
        .collect();
    Expr::from_terms(n + q, &outs)
}

/// Sanity checks that the fibered chart realizes the pullbacks behind
/// differentiability for `n in {1, 2}` and `k in {0, 1, 2}`.
pub fn check_differentiability(g: &FiberedGroupoid, config: &SuiteConfig) -> Report {
    let g = match g.apply_mutation(config) {
        Ok(g) => g,
        Err(e) => {
            let row =
                crate::report::failed_row("mutation", "mutated structure maps", 0.0, e.to_string());
            return Report::new("differentiability", config, vec![row]);
        }
    };
    let nerve = match nerve_chart(&g) {
        Ok(e) => e,
        Err(e) => {
            let row = crate::report::failed_row("nerve", "G2 chart", 0.0, e.to_string());
            return Report::new("differentiability", config, vec![row]);
        }
    };
    let tol = g.tolerance;
    let (g, nerve) = (&g, &nerve);
    let mut checks = Vec::new();
    for n in 1..=2usize {
        checks.push(Check::new(
            format!("n{n}.pairing"),
            "T^n of the nerve chart = pairing of lifted arrows",
            tol,
            move |rng: &mut Rng, _| {
                let (p, q) = (g.base_dim(), g.fiber_dim);
                let s = g.sample_string(rng, 2)?;
                let (a, b) = (&s.arrows[0], &s.arrows[1]);
                let mut pt = tan_point(rng, &Domain::euclidean(p + 2 * q, 1.0), n)?.blocks();
                pt[0] = [&b[..], &a[p..]].concat();
                let pt = TanPoint::from_blocks(&pt)?;
                let joint = crate::tangent::apply_expr(nerve, &pt)?;
                let th = pt.slice(0..p + q);
                let tg = TanPoint::pair(&apply_tn(&g.t, &th)?, &pt.slice(p + q..p + 2 * q))?;
                Ok(joint.residual(&TanPoint::pair(&tg, &th)?))
            },
        ));
        checks.push(Check::new(
            format!("n{n}.adjacency"),
            "T^n s . T^n m = T^n s . pr2 and T^n t . T^n m = T^n t . pr1 on lifted pairs",
            tol,
            move |rng: &mut Rng, _| {
                let (p, q) = (g.base_dim(), g.fiber_dim);
                let s = g.sample_string(rng, 2)?;
                let (a, b) = (&s.arrows[0], &s.arrows[1]);
                let mut hb = tan_point(rng, &Domain::euclidean(p + q, 1.0), n)?.blocks();
                hb[0] = b.clone();
                let th = TanPoint::from_blocks(&hb)?;
                let mut fb = tan_point(rng, &Domain::euclidean(q, 1.0), n)?.blocks();
                fb[0] = a[p..].to_vec();
                let tg = TanPoint::pair(&apply_tn(&g.t, &th)?, &TanPoint::from_blocks(&fb)?)?;
                let prod = apply_tn(&g.m, &TanPoint::pair(&tg, &th)?)?;
                let src = prod.slice(0..p).residual(&th.slice(0..p));
                let tgt = apply_tn(&g.t, &prod)?.residual(&apply_tn(&g.t, &tg)?);
                Ok(src.max(tgt))
            },
        ));
        for k in 0..=2usize {
            checks.push(Check::new(
                format!("n{n}.k{k}"),
                "T^n G1 x_(T^n G0) G_k is closed in the block representation",
                tol,
                move |rng: &mut Rng, _| {
                    let p = g.base_dim();
                    let s = g.sample_string(rng, k + 1)?;
                    let xi = vertical_point(rng, &s.arrows[0], p, n)?;
                    let src = xi
                        .slice(0..p)
                        .residual(&TanPoint::base_point(&g.source(&s.arrows[0])).zero_lift(n)?);
                    let mut moved = xi.clone();
                    for h in &s.arrows[1..] {
                        let zero = TanPoint::base_point(h).zero_lift(n)?;
                        moved = apply_tn(&g.m, &TanPoint::pair(&moved, &zero)?)?;
                    }
                    let mut worst = src.max(base_direction_residual(&moved, p));
                    if k == 2 {
                        let hk = g.mul(&s.arrows[1], &s.arrows[2])?;
                        let once = apply_tn(
                            &g.m,
                            &TanPoint::pair(&xi, &TanPoint::base_point(&hk).zero_lift(n)?)?,
                        )?;
                        worst = worst.max(moved.residual(&once));
                    }
                    Ok(worst)
                },
            ));
        }
    }
    let mut report = Report::new("differentiability", config, run_checks(config, checks));
    report.checks.sort_by(|a, b| a.name.cmp(&b.name));
    report
}

fn vars(range: std::ops::Range<usize>) -> Vec<Term> {
    range.map(Term::var).collect()
}

/// `D x D => D` with arrows `(y; x)` from `y` to `x`.
pub fn pair_groupoid(d: Domain) -> Result<FiberedGroupoid> {
    let p = d.dim;
    let arrows = Domain::product(&d, &d).renamed(format!("{}x{}", d.name, d.name));
    let t = Expr::from_terms(2 * p, &vars(p..2 * p))?;
    let m = Expr::from_terms(4 * p, &[vars(2 * p..3 * p), vars(p..2 * p)].concat())?;
    let unit = Expr::from_terms(p, &[vars(0..p), vars(0..p)].concat())?;
    let inv = Expr::from_terms(2 * p, &[vars(p..2 * p), vars(0..p)].concat())?;
    FiberedGroupoid::new(format!("pair({})", d.name), d, p, arrows, t, m, unit, inv)
}

fn mat_mul(a: &[Term], b: &[Term], n: usize) -> Vec<Term> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = &a[i * n] * &b[j];
            for k in 1..n {
                acc = acc + &a[i * n + k] * &b[k * n + j];
            }
            out.push(acc);
        }
    }
    out
}

fn minor(a: &[Term], n: usize, row: usize, col: usize) -> Vec<Term> {
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for i in (0..n).filter(|&i| i != row) {
        for j in (0..n).filter(|&j| j != col) {
            out.push(a[i * n + j].clone());
        }
    }
    out
}

/// Laplace expansion along the first row.
pub fn det(a: &[Term], n: usize) -> Term {
    match n {
        0 => Term::c(1.0),
        1 => a[0].clone(),
        _ => {
            let mut acc: Option<Term> = None;
            for j in 0..n {
                let term = &a[j] * det(&minor(a, n, 0, j), n - 1);
                acc = Some(match acc {
                    None => term,
                    Some(s) if j % 2 == 0 => s + term,
                    Some(s) => s - term,
                });
            }
            acc.expect("n >= 2")
        }
    }
}

/// `adj(A) / det(A)`.
pub fn mat_inv(a: &[Term], n: usize) -> Vec<Term> {
    let d = det(a, n);
    let mut out = vec![Term::c(0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let cof = det(&minor(a, n, j, i), n - 1);
            out[i * n + j] = if (i + j) % 2 == 0 {
                cof / &d
            } else {
                -cof / &d
            };
        }
    }
    out
}

/// `GL(n)` on the open chart `det != 0`, as a groupoid over a point.
pub fn matrix_group(n: usize) -> Result<FiberedGroupoid> {
    if n == 0 || n > 3 {
        return Err(Error::Builder(format!(
            "matrix_group supports n in 1..=3, got {n}"
        )));
    }
    let q = n * n;
    let a = vars(0..q);
    let b = vars(q..2 * q);
    let d = det(&a, n);
    let lo: Vec<f64> = (0..q)
        .map(|k| if k / n == k % n { 0.7 } else { -0.3 })
        .collect();
    let hi: Vec<f64> = (0..q)
        .map(|k| if k / n == k % n { 1.3 } else { 0.3 })
        .collect();
    let arrows = Domain::boxed(format!("GL({n})"), lo, hi)
        .with_constraint(Expr::from_terms(q, &[&d * &d])?)?;
    let ident: Vec<Term> = (0..q)
        .map(|k| Term::c(if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    FiberedGroupoid::new(
        format!("GL({n})"),
        Domain::point(),
        q,
        arrows,
        Expr::from_terms(q, &[])?,
        Expr::from_terms(2 * q, &mat_mul(&a, &b, n))?,
        Expr::from_terms(0, &ident)?,
        Expr::from_terms(q, &mat_inv(&a, n))?,
    )
}

/// `G x M => M` for a left action `a(g, m)` of a group over a point; arrows
/// are `(m; g)` from `m` to `a(g, m)`.
pub fn action_groupoid(
    group: &FiberedGroupoid,
    space: Domain,
    action: Expr,
) -> Result<FiberedGroupoid> {
    if group.base_dim() != 0 {
        return Err(Error::Builder(format!("{} is not a group", group.name)));
    }
    let (d, q) = (space.dim, group.fiber_dim);
    if action.inputs() != q + d || action.outputs() != d {
        return Err(Error::Builder(format!(
            "action must map R^{} -> R^{d}",
            q + d
        )));
    }
    let e = group.identity(&[])?;
    let mut rng = crate::report::substream(0, "action_unit_law");
    for _ in 0..200 {
        let x = space.sample(&mut rng)?;
        let moved = action.eval_f64(&[&e[..], &x[..]].concat())?;
        let r = rel_residual(&moved, &x);
        if !(r <= GROUPOID_TOL) {
            return Err(Error::Builder(format!(
                "action is not unital: a(e, m) differs from m by {r:e}"
            )));
        }
    }
    let n = d + q;
    let arrows = Domain::product(&space, &group.arrows)
        .renamed(format!("{}x{}", space.name, group.arrows.name));
    let act = |g: Vec<Term>, m: Vec<Term>| action.substitute(&[g, m].concat());
    let t = act(vars(d..n), vars(0..d))?;
    let prod = group
        .m
        .body
        .substitute(&[vars(d..n), vars(n + d..2 * n)].concat())?;
    let m = [vars(n..n + d), prod].concat();
    let ident: Vec<Term> = group.unit.body.substitute(&[])?;
    let unit = [vars(0..d), ident].concat();
    let ginv = group.inv.body.substitute(&vars(d..n))?;
    let inv = [act(vars(d..n), vars(0..d))?, ginv].concat();
    FiberedGroupoid::new(
        format!("{} x {}", group.name, space.name),
        space,
        q,
        arrows,
        Expr::from_terms(n, &t)?,
        Expr::from_terms(2 * n, &m)?,
        Expr::from_terms(d, &unit)?,
        Expr::from_terms(n, &inv)?,
    )
}

/// `GL(2)` acting on `R^2` by matrix-vector multiplication.
pub fn action_gl2_r2() -> Result<FiberedGroupoid> {
    let g = vars(0..4);
    let m = vars(4..6);
    let act = vec![&g[0] * &m[0] + &g[1] * &m[1], &g[2] * &m[0] + &g[3] * &m[1]];
    action_groupoid(
        &matrix_group(2)?,
        Domain::euclidean(2, 1.0),
        Expr::from_terms(6, &act)?,
    )
}

/// `G x H` with chart `(bG, bH; fG, fH)`.
pub fn product_groupoid(g: &FiberedGroupoid, h: &FiberedGroupoid) -> Result<FiberedGroupoid> {
    let (pg, qg, ph, qh) = (g.base_dim(), g.fiber_dim, h.base_dim(), h.fiber_dim);
    let (ng, nh) = (pg + qg, ph + qh);
    let n = ng + nh;
    // Positions of G's and H's arrow coordinates inside a product arrow at `off`.
    let garrow = |off: usize| -> Vec<Term> {
        [vars(off..off + pg), vars(off + pg + ph..off + pg + ph + qg)].concat()
    };
    let harrow = |off: usize| -> Vec<Term> {
        [
            vars(off + pg..off + pg + ph),
            vars(off + pg + ph + qg..off + n),
        ]
        .concat()
    };
    let split = |gv: Vec<Term>, hv: Vec<Term>| -> Vec<Term> {
        [&gv[..pg], &hv[..ph], &gv[pg..], &hv[ph..]].concat()
    };
    let t = [
        g.t.body.substitute(&garrow(0))?,
        h.t.body.substitute(&harrow(0))?,
    ]
    .concat();
    let m = split(
        g.m.body.substitute(&[garrow(0), garrow(n)].concat())?,
        h.m.body.substitute(&[harrow(0), harrow(n)].concat())?,
    );
    let unit = split(
        g.unit.body.substitute(&vars(0..pg))?,
        h.unit.body.substitute(&vars(pg..pg + ph))?,
    );
    let inv = split(
        g.inv.body.substitute(&garrow(0))?,
        h.inv.body.substitute(&harrow(0))?,
    );
    let base = Domain::product(&g.base, &h.base);
    let (ga, ha) = (&g.arrows, &h.arrows);
    let lo = [&ga.lo[..pg], &ha.lo[..ph], &ga.lo[pg..], &ha.lo[ph..]].concat();
    let hi = [&ga.hi[..pg], &ha.hi[..ph], &ga.hi[pg..], &ha.hi[ph..]].concat();
    let mut arrows = Domain::boxed(format!("{}x{}", ga.name, ha.name), lo, hi);
    for c in &ga.constraints {
        arrows = arrows.with_constraint(Expr::from_terms(n, &c.substitute(&garrow(0))?)?)?;
    }
    for c in &ha.constraints {
        arrows = arrows.with_constraint(Expr::from_terms(n, &c.substitute(&harrow(0))?)?)?;
    }
    FiberedGroupoid::new(
        format!("{} x {}", g.name, h.name),
        base,
        qg + qh,
        arrows,
        Expr::from_terms(n, &t)?,
        Expr::from_terms(2 * n, &m)?,
        Expr::from_terms(pg + ph, &unit)?,
        Expr::from_terms(n, &inv)?,
    )
}

/// The open interval `(lo, hi)` as a one-dimensional chart.
pub fn interval(lo: f64, hi: f64) -> Result<Domain> {
    let x = Term::var(0);
    Domain::boxed(format!("({lo},{hi})"), vec![lo], vec![hi])
        .with_constraint(Expr::from_terms(1, &[(&x - lo) * (hi - &x)])?)
}
