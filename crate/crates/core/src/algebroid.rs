//! The algebroid of a differentiable groupoid: the vertical bundle restricted
//! to the identity bisection, its anchor, and the bracket transported from
//! invariant vector fields.
//!
//! `A` is trivialized by the chart, so a section is any map `G0 -> R^q`.
//! Right-invariant extension means constant sections of a matrix group
//! bracket as `BA - AB`.

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{act_on_function, lie_bracket, ScalarField, VectorField};
use crate::gbundle::{unit_bundle, GBundle};
use crate::groupoid::{
    action_gl2_r2, check_differentiability, check_groupoid_axioms, matrix_group, pair_groupoid,
    FiberedGroupoid,
};
use crate::random::{corpus, fiber, uniform};
use crate::report::{run_checks, BracketRow, Check, Report, Rng, SuiteConfig};
use crate::tangent::{apply_expr, apply_tn, TanPoint};
use crate::tolerance::{rel_residual, sup_norm, VERTICAL};
use crate::tower::Tower;

pub type SectionEval = Arc<dyn Fn(usize, &[Tower]) -> Result<Vec<Tower>> + Send + Sync>;

/// A section of the trivialized `A`, evaluated at inner-order towers. The
/// order is explicit because `G0` may be a point.
#[derive(Clone)]
pub struct AlgebroidSection {
    pub name: String,
    pub base_dim: usize,
    pub fiber_dim: usize,
    eval: SectionEval,
}

impl fmt::Debug for AlgebroidSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "AlgebroidSection({}: R^{} -> R^{})",
            self.name, self.base_dim, self.fiber_dim
        )
    }
}

fn towers(x: &[f64]) -> Vec<Tower> {
    x.iter().map(|&v| Tower::real(v)).collect()
}

fn reals(t: &[Tower]) -> Vec<f64> {
    t.iter().map(Tower::base).collect()
}

/// Raises a scalar's order when it was evaluated on an empty chart.
fn at_order(t: Tower, order: usize) -> Result<Tower> {
    if t.order() < order {
        t.embed(order)
    } else {
        Ok(t)
    }
}

impl AlgebroidSection {
    pub fn new(
        name: impl Into<String>,
        base_dim: usize,
        fiber_dim: usize,
        eval: impl Fn(usize, &[Tower]) -> Result<Vec<Tower>> + Send + Sync + 'static,
    ) -> AlgebroidSection {
        AlgebroidSection {
            name: name.into(),
            base_dim,
            fiber_dim,
            eval: Arc::new(eval),
        }
    }

    pub fn from_expr(name: impl Into<String>, e: Expr) -> AlgebroidSection {
        let (p, q) = (e.inputs(), e.outputs());
        AlgebroidSection::new(name, p, q, move |order, x| e.eval_at(order, x))
    }

    pub fn constant(name: impl Into<String>, base_dim: usize, value: Vec<f64>) -> AlgebroidSection {
        let q = value.len();
        AlgebroidSection::new(name, base_dim, q, move |order, _| {
            value.iter().map(|&v| Tower::constant(order, v)).collect()
        })
    }

    pub fn zero(base_dim: usize, fiber_dim: usize) -> AlgebroidSection {
        AlgebroidSection::constant("0", base_dim, vec![0.0; fiber_dim])
    }

    /// A vector field on `U` as a section of the pair groupoid's algebroid.
    pub fn from_field(v: &VectorField) -> AlgebroidSection {
        let v = v.clone();
        AlgebroidSection::new(v.name.clone(), v.dim(), v.dim(), move |_, x| v.eval(x))
    }

    pub fn eval(&self, order: usize, x: &[Tower]) -> Result<Vec<Tower>> {
        if x.len() != self.base_dim {
            return Err(Error::Dim {
                expected: self.base_dim,
                got: x.len(),
            });
        }
        let out = (self.eval)(order, x)?;
        if out.len() != self.fiber_dim {
            return Err(Error::Dim {
                expected: self.fiber_dim,
                got: out.len(),
            });
        }
        Ok(out)
    }

    pub fn value_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(reals(&self.eval(0, &towers(x))?))
    }

    pub fn rename(mut self, name: impl Into<String>) -> AlgebroidSection {
        self.name = name.into();
        self
    }

    fn shape(&self, other: &AlgebroidSection) -> Result<()> {
        if (self.base_dim, self.fiber_dim) != (other.base_dim, other.fiber_dim) {
            return Err(Error::Dim {
                expected: self.fiber_dim,
                got: other.fiber_dim,
            });
        }
        Ok(())
    }

    /// `r a + s b`.
    pub fn combine(&self, r: f64, other: &AlgebroidSection, s: f64) -> Result<AlgebroidSection> {
        self.shape(other)?;
        let (a, b) = (self.clone(), other.clone());
        let name = format!("({r} {} + {s} {})", self.name, other.name);
        Ok(AlgebroidSection::new(
            name,
            self.base_dim,
            self.fiber_dim,
            move |order, x| {
                let (u, v) = (a.eval(order, x)?, b.eval(order, x)?);
                u.iter()
                    .zip(&v)
                    .map(|(u, v)| u.scale(r).try_add(&v.scale(s)))
                    .collect()
            },
        ))
    }

    pub fn add(&self, other: &AlgebroidSection) -> Result<AlgebroidSection> {
        self.combine(1.0, other, 1.0)
    }

    /// `f a`, the module structure over functions on `G0`.
    pub fn times(&self, f: &ScalarField) -> Result<AlgebroidSection> {
        if f.on.dim != self.base_dim {
            return Err(Error::Dim {
                expected: self.base_dim,
                got: f.on.dim,
            });
        }
        let (a, f) = (self.clone(), f.clone());
        Ok(AlgebroidSection::new(
            format!("{} {}", f.name, self.name),
            self.base_dim,
            self.fiber_dim,
            move |order, x| {
                let r = at_order(f.eval(x)?, order)?;
                a.eval(order, x)?.iter().map(|t| r.try_mul(t)).collect()
            },
        ))
    }
}

#[derive(Clone, Debug)]
pub struct Algebroid {
    pub gpd: Arc<FiberedGroupoid>,
    /// `G1` acting on itself; its vertical vectors at units form `A`.
    pub bundle: GBundle,
    pub fiber_dim: usize,
}

/// Builds `A` after the groupoid passes its axiom and differentiability suites.
pub fn algebroid_of(g: &FiberedGroupoid, config: &SuiteConfig) -> Result<Algebroid> {
    let mut report = check_groupoid_axioms(g, config);
    report.absorb("differentiability", check_differentiability(g, config));
    if !report.passed() {
        return Err(Error::SuiteFailed(Box::new(report)));
    }
    Algebroid::unchecked(g)
}

impl Algebroid {
    /// `A` without running the suites, for callers that already did.
    pub fn unchecked(g: &FiberedGroupoid) -> Result<Algebroid> {
        let gpd = Arc::new(g.clone());
        Ok(Algebroid {
            bundle: unit_bundle(&gpd)?,
            fiber_dim: g.fiber_dim,
            gpd,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.gpd.base_dim()
    }

    pub fn base(&self) -> Arc<Domain> {
        self.gpd.base.clone()
    }

    fn check_section(&self, a: &AlgebroidSection) -> Result<()> {
        if a.base_dim != self.base_dim() || a.fiber_dim != self.fiber_dim {
            return Err(Error::Dim {
                expected: self.fiber_dim,
                got: a.fiber_dim,
            });
        }
        Ok(())
    }

    /// `i_A (x, zeta)`: the vertical vector `zeta` at `1(x)`.
    fn include(&self, order: usize, x: &[Tower], zeta: &[Tower]) -> Result<TanPoint> {
        let unit = self.gpd.unit.body.eval_at(order, x)?;
        let zero = Tower::zero(order)?;
        let dir: Vec<Tower> = vec![zero; self.base_dim()]
            .into_iter()
            .chain(zeta.iter().cloned())
            .collect();
        TanPoint::vector_over(&unit, &dir)
    }

    /// `rho . a = Tt . i_A . a`.
    pub fn anchor(&self, a: &AlgebroidSection) -> Result<VectorField> {
        self.check_section(a)?;
        let (me, a) = (self.clone(), a.clone());
        Ok(VectorField::new(
            format!("rho({})", a.name),
            self.base(),
            move |x| {
                let order = x.first().map_or(0, Tower::order);
                let v = me.include(order, x, &a.eval(order, x)?)?;
                Ok(apply_expr(&me.gpd.t.body, &v)?.block_towers(1))
            },
        ))
    }

    /// `phi(a)(g) = T beta (i_A a(t g), 0_g)`, a right-invariant field on `G1`.
    pub fn extend_to_invariant(&self, a: &AlgebroidSection) -> Result<VectorField> {
        self.check_section(a)?;
        let (me, a) = (self.clone(), a.clone());
        Ok(VectorField::new(
            format!("phi({})", a.name),
            self.gpd.arrows.clone(),
            move |g| {
                let order = g.first().map_or(0, Tower::order);
                let tg = me.gpd.t.body.eval_at(order, g)?;
                let unit = me.gpd.unit.body.eval_at(order, &tg)?;
                me.bundle
                    .act_vertical_towers(&unit, &a.eval(order, &tg)?, g)
            },
        ))
    }

    /// `psi(v)(x)`: the fiber part of `v(1(x))`, refusing when `v` is not
    /// vertical there.
    pub fn restrict_to_unit(&self, v: &VectorField) -> Result<AlgebroidSection> {
        if *v.on != *self.gpd.arrows {
            return Err(Error::DomainMismatch(
                v.on.name.clone(),
                self.gpd.arrows.name.clone(),
            ));
        }
        let (me, v) = (self.clone(), v.clone());
        let p = self.base_dim();
        Ok(AlgebroidSection::new(
            format!("psi({})", v.name),
            p,
            self.fiber_dim,
            move |order, x| {
                let unit = me.gpd.unit.body.eval_at(order, x)?;
                let d = v.eval(&unit)?;
                let residual = d[..p]
                    .iter()
                    .map(Tower::base)
                    .map(f64::abs)
                    .fold(0.0, f64::max);
                let bound = VERTICAL * (1.0 + sup_norm(&reals(&d)));
                if !(residual <= bound) {
                    return Err(Error::Verticality { residual, bound });
                }
                Ok(d[p..].to_vec())
            },
        ))
    }

    /// `[a, b] = psi [phi a, phi b]`.
    pub fn bracket(&self, a: &AlgebroidSection, b: &AlgebroidSection) -> Result<AlgebroidSection> {
        let field = lie_bracket(&self.extend_to_invariant(a)?, &self.extend_to_invariant(b)?)?;
        Ok(self
            .restrict_to_unit(&field)?
            .rename(format!("[{}, {}]", a.name, b.name)))
    }

    /// Brackets of every ordered pair `i < j` at `x`.
    pub fn bracket_table(
        &self,
        sections: &[AlgebroidSection],
        x: &[f64],
    ) -> Result<Vec<BracketRow>> {
        let mut rows = Vec::new();
        for (i, a) in sections.iter().enumerate() {
            for b in &sections[i + 1..] {
                rows.push(BracketRow {
                    inputs: vec![a.name.clone(), b.name.clone()],
                    point: x.to_vec(),
                    value: self.bracket(a, b)?.value_at(x)?,
                });
            }
        }
        Ok(rows)
    }
}

pub fn algebroid_bracket(
    alg: &Algebroid,
    a: &AlgebroidSection,
    b: &AlgebroidSection,
) -> Result<AlgebroidSection> {
    alg.bracket(a, b)
}

fn pick<'a, T>(rng: &mut Rng, xs: &'a [T]) -> &'a T {
    &xs[rng.gen_range(0..xs.len())]
}

fn diff(a: &[f64], b: &[f64]) -> f64 {
    rel_residual(a, b)
}

/// Abstract-algebroid laws on the given sections and functions on `G0`.
/// Functions default to the constant 1.
pub fn check_algebroid_laws(
    alg: &Algebroid,
    sections: &[AlgebroidSection],
    functions: &[ScalarField],
    config: &SuiteConfig,
) -> Report {
    let defaults;
    let functions = if functions.is_empty() {
        defaults = [ScalarField::constant(alg.base(), 1.0)];
        &defaults[..]
    } else {
        functions
    };
    let pre = sections
        .iter()
        .map(|a| alg.check_section(a))
        .chain(functions.iter().map(|f| {
            if *f.on == *alg.gpd.base {
                Ok(())
            } else {
                Err(Error::DomainMismatch(
                    f.on.name.clone(),
                    alg.gpd.base.name.clone(),
                ))
            }
        }))
        .find_map(|r| r.err())
        .or_else(|| {
            sections
                .is_empty()
                .then(|| Error::Refused("no sections".into()))
        });
    if let Some(e) = pre {
        let row = crate::report::failed_row(
            "precondition",
            "sections and functions live on A and G0",
            0.0,
            format!("precondition: {e}"),
        );
        return Report::new("algebroid", config, vec![row]);
    }
    let a = alg;
    let base = &alg.gpd.base;
    let sample = move |rng: &mut Rng| -> Result<(Vec<f64>, [&AlgebroidSection; 3])> {
        let x = base.sample(rng)?;
        Ok((
            x,
            [
                pick(rng, sections),
                pick(rng, sections),
                pick(rng, sections),
            ],
        ))
    };
    let checks = vec![
        Check::new(
            "antisymmetry",
            "[a, b] = -[b, a]",
            1e-9,
            move |rng: &mut Rng, _| {
                let (x, [s, t, _]) = sample(rng)?;
                let neg: Vec<f64> = a.bracket(t, s)?.value_at(&x)?.iter().map(|v| -v).collect();
                Ok(diff(&a.bracket(s, t)?.value_at(&x)?, &neg))
            },
        ),
        Check::new(
            "bilinearity",
            "[r a + s b, c] = r [a, c] + s [b, c]",
            1e-9,
            move |rng: &mut Rng, _| {
                let (x, [s, t, u]) = sample(rng)?;
                let (r1, r2) = (uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0));
                let left = a.bracket(&s.combine(r1, t, r2)?, u)?.value_at(&x)?;
                let right = a
                    .bracket(s, u)?
                    .combine(r1, &a.bracket(t, u)?, r2)?
                    .value_at(&x)?;
                Ok(diff(&left, &right))
            },
        ),
        Check::new(
            "jacobi",
            "[a, [b, c]] + [b, [c, a]] + [c, [a, b]] = 0",
            1e-8,
            move |rng: &mut Rng, _| {
                let (x, [s, t, u]) = sample(rng)?;
                let terms = [
                    a.bracket(s, &a.bracket(t, u)?)?,
                    a.bracket(t, &a.bracket(u, s)?)?,
                    a.bracket(u, &a.bracket(s, t)?)?,
                ];
                let vals: Vec<Vec<f64>> = terms
                    .iter()
                    .map(|c| c.value_at(&x))
                    .collect::<Result<_>>()?;
                let sum: Vec<f64> = (0..vals[0].len())
                    .map(|i| vals.iter().map(|v| v[i]).sum())
                    .collect();
                let scale: f64 = vals.iter().map(|v| sup_norm(v)).fold(0.0, f64::max);
                Ok(sup_norm(&sum) / scale.max(crate::tolerance::SCALE_FLOOR))
            },
        ),
        Check::new(
            "leibniz",
            "[a, f b] = f [a, b] + ((rho a) . f) b",
            1e-9,
            move |rng: &mut Rng, _| {
                let (x, [s, t, _]) = sample(rng)?;
                let f = pick(rng, functions);
                let left = a.bracket(s, &t.times(f)?)?.value_at(&x)?;
                let df = act_on_function(&a.anchor(s)?, f)?;
                let right = a
                    .bracket(s, t)?
                    .times(f)?
                    .add(&t.times(&df)?)?
                    .value_at(&x)?;
                Ok(diff(&left, &right))
            },
        ),
        Check::new(
            "anchor_morphism",
            "rho . [a, b] = [rho . a, rho . b]",
            1e-8,
            move |rng: &mut Rng, _| {
                let (x, [s, t, _]) = sample(rng)?;
                let left = a.anchor(&a.bracket(s, t)?)?.fiber_at(&x)?;
                let right = lie_bracket(&a.anchor(s)?, &a.anchor(t)?)?.fiber_at(&x)?;
                Ok(diff(&left, &right))
            },
        ),
        Check::new(
            "anchor_linear",
            "rho is fiberwise linear",
            1e-10,
            move |rng: &mut Rng, _| {
                let (x, [s, t, _]) = sample(rng)?;
                let (r1, r2) = (uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0));
                let left = a.anchor(&s.combine(r1, t, r2)?)?.fiber_at(&x)?;
                let (u, v) = (a.anchor(s)?.fiber_at(&x)?, a.anchor(t)?.fiber_at(&x)?);
                let right: Vec<f64> = u.iter().zip(&v).map(|(u, v)| r1 * u + r2 * v).collect();
                Ok(diff(&left, &right))
            },
        ),
        Check::new(
            "psi_phi",
            "psi . phi = id",
            1e-10,
            move |rng: &mut Rng, _| {
                let (x, [s, _, _]) = sample(rng)?;
                Ok(diff(
                    &a.restrict_to_unit(&a.extend_to_invariant(s)?)?
                        .value_at(&x)?,
                    &s.value_at(&x)?,
                ))
            },
        ),
        Check::new(
            "phi_psi",
            "phi . psi = id on invariant fields",
            1e-9,
            move |rng: &mut Rng, _| {
                let (_, [s, t, _]) = sample(rng)?;
                let g = a.gpd.sample_arrow(rng)?;
                let v = lie_bracket(&a.extend_to_invariant(s)?, &a.extend_to_invariant(t)?)?;
                Ok(diff(
                    &a.extend_to_invariant(&a.restrict_to_unit(&v)?)?
                        .fiber_at(&g)?,
                    &v.fiber_at(&g)?,
                ))
            },
        ),
        Check::new(
            "phi_module",
            "phi(f a) = (f . t) phi(a)",
            1e-9,
            move |rng: &mut Rng, _| {
                let (_, [s, _, _]) = sample(rng)?;
                let f = pick(rng, functions);
                let g = a.gpd.sample_arrow(rng)?;
                let ft = f.value_at(&a.gpd.target(&g)?)?;
                let right: Vec<f64> = a
                    .extend_to_invariant(s)?
                    .fiber_at(&g)?
                    .iter()
                    .map(|v| ft * v)
                    .collect();
                Ok(diff(
                    &a.extend_to_invariant(&s.times(f)?)?.fiber_at(&g)?,
                    &right,
                ))
            },
        ),
        Check::new(
            "anchor_related",
            "Tt . phi(a) = rho(a) . t",
            1e-9,
            move |rng: &mut Rng, _| {
                let (_, [s, _, _]) = sample(rng)?;
                let g = a.gpd.sample_arrow(rng)?;
                let v = TanPoint::vector(&g, &a.extend_to_invariant(s)?.fiber_at(&g)?)?;
                let left = apply_tn(&a.gpd.t, &v)?.block(1);
                Ok(diff(&left, &a.anchor(s)?.fiber_at(&a.gpd.target(&g)?)?))
            },
        ),
    ];
    Report::new("algebroid", config, run_checks(config, checks))
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    (0..n * n)
        .map(|k| (0..n).map(|l| a[(k / n) * n + l] * b[l * n + k % n]).sum())
        .collect()
}

/// `BA - AB`, the bracket of constant sections under right-invariant extension.
pub fn matrix_oracle(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    mat_mul(b, a, n)
        .iter()
        .zip(mat_mul(a, b, n))
        .map(|(x, y)| x - y)
        .collect()
}

/// Brackets and anchors of the classical examples against closed forms.
pub fn check_classical_oracles(config: &SuiteConfig) -> Result<Report> {
    let gl2 = Algebroid::unchecked(&matrix_group(2)?)?;
    let action = Algebroid::unchecked(&action_gl2_r2()?)?;
    let pairs: Vec<(Algebroid, Vec<VectorField>)> = (1..=config.max_dim.max(1))
        .map(|d| {
            let g = pair_groupoid(Domain::euclidean(d, 1.0))?;
            Ok((Algebroid::unchecked(&g)?, corpus(d, config.seed).0))
        })
        .collect::<Result<_>>()?;
    let (gl2, action, pairs) = (&gl2, &action, &pairs);
    let constant = |name: &str, p: usize, v: Vec<f64>| AlgebroidSection::constant(name, p, v);
    let checks = vec![
        Check::new(
            "matrix.bracket",
            "[A, B] = BA - AB on gl(2)",
            1e-10,
            move |rng: &mut Rng, _| {
                let (x, y) = (fiber(rng, 4), fiber(rng, 4));
                let value = gl2
                    .bracket(&constant("A", 0, x.clone()), &constant("B", 0, y.clone()))?
                    .value_at(&[])?;
                Ok(diff(&value, &matrix_oracle(&x, &y, 2)))
            },
        )
        .samples(100),
        Check::new(
            "matrix.phi",
            "phi(A)(g) = A g",
            1e-10,
            move |rng: &mut Rng, _| {
                let x = fiber(rng, 4);
                let g = gl2.gpd.sample_arrow(rng)?;
                Ok(diff(
                    &gl2.extend_to_invariant(&constant("A", 0, x.clone()))?
                        .fiber_at(&g)?,
                    &mat_mul(&x, &g, 2),
                ))
            },
        ),
        Check::new(
            "pair.bracket",
            "[a, b]_A = [a, b] as vector fields",
            1e-9,
            move |rng: &mut Rng, i| {
                let (alg, fields) = &pairs[i % pairs.len()];
                let (u, v) = (pick(rng, fields), pick(rng, fields));
                let x = alg.gpd.base.sample(rng)?;
                let value = alg
                    .bracket(
                        &AlgebroidSection::from_field(u),
                        &AlgebroidSection::from_field(v),
                    )?
                    .value_at(&x)?;
                Ok(diff(&value, &lie_bracket(u, v)?.fiber_at(&x)?))
            },
        ),
        Check::new(
            "pair.phi",
            "phi(a)(y; x) = (0, a(x))",
            1e-10,
            move |rng: &mut Rng, i| {
                let (alg, fields) = &pairs[i % pairs.len()];
                let u = pick(rng, fields);
                let g = alg.gpd.sample_arrow(rng)?;
                let d = alg.base_dim();
                let expected = [vec![0.0; d], u.fiber_at(&g[d..])?].concat();
                Ok(diff(
                    &alg.extend_to_invariant(&AlgebroidSection::from_field(u))?
                        .fiber_at(&g)?,
                    &expected,
                ))
            },
        ),
        Check::new(
            "pair.anchor",
            "rho = id on TU",
            1e-10,
            move |rng: &mut Rng, i| {
                let (alg, fields) = &pairs[i % pairs.len()];
                let u = pick(rng, fields);
                let x = alg.gpd.base.sample(rng)?;
                Ok(diff(
                    &alg.anchor(&AlgebroidSection::from_field(u))?.fiber_at(&x)?,
                    &u.fiber_at(&x)?,
                ))
            },
        ),
        Check::new(
            "action.anchor",
            "rho(xi)(m) = xi m",
            1e-10,
            move |rng: &mut Rng, _| {
                let xi = fiber(rng, 4);
                let m = action.gpd.base.sample(rng)?;
                let expected = [xi[0] * m[0] + xi[1] * m[1], xi[2] * m[0] + xi[3] * m[1]];
                Ok(diff(
                    &action.anchor(&constant("xi", 2, xi))?.fiber_at(&m)?,
                    &expected,
                ))
            },
        ),
        Check::new(
            "action.bracket",
            "[xi, eta] = eta xi - xi eta for constant sections",
            1e-9,
            move |rng: &mut Rng, _| {
                let (x, y) = (fiber(rng, 4), fiber(rng, 4));
                let m = action.gpd.base.sample(rng)?;
                let value = action
                    .bracket(
                        &constant("xi", 2, x.clone()),
                        &constant("eta", 2, y.clone()),
                    )?
                    .value_at(&m)?;
                Ok(diff(&value, &matrix_oracle(&x, &y, 2)))
            },
        ),
    ];
    Ok(Report::new("oracles", config, run_checks(config, checks)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Term;
    use crate::groupoid::interval;
    use crate::report::Mutation;

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

    fn e(i: usize) -> Vec<f64> {
        (0..4).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn fiber_dimensions() {
        let pair =
            algebroid_of(&pair_groupoid(Domain::euclidean(3, 1.0)).unwrap(), &cfg(30)).unwrap();
        assert_eq!((pair.base_dim(), pair.fiber_dim), (3, 3));
        let gl = algebroid_of(&matrix_group(3).unwrap(), &cfg(30)).unwrap();
        assert_eq!((gl.base_dim(), gl.fiber_dim), (0, 9));
        let action = algebroid_of(&action_gl2_r2().unwrap(), &cfg(30)).unwrap();
        assert_eq!((action.base_dim(), action.fiber_dim), (2, 4));
    }

    #[test]
    fn broken_groupoids_are_refused() {
        let bad = SuiteConfig {
            mutation: Some(Mutation::DropUnit),
            ..cfg(20)
        };
        match algebroid_of(&matrix_group(2).unwrap(), &bad) {
            Err(Error::SuiteFailed(report)) => assert!(!report.passed()),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn gl2_bracket_of_elementary_matrices() {
        let a = Algebroid::unchecked(&matrix_group(2).unwrap()).unwrap();
        let e12 = AlgebroidSection::constant("E12", 0, e(1));
        let e21 = AlgebroidSection::constant("E21", 0, e(2));
        let value = a.bracket(&e12, &e21).unwrap().value_at(&[]).unwrap();
        assert_eq!(value, vec![-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            a.bracket(&e12, &e12).unwrap().value_at(&[]).unwrap(),
            vec![0.0; 4]
        );
        let table = a.bracket_table(&[e12, e21], &[]).unwrap();
        assert_eq!(table[0].inputs, ["E12", "E21"]);
        assert_eq!(table[0].value, vec![-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            a.anchor(&AlgebroidSection::constant("A", 0, e(0)))
                .unwrap()
                .fiber_at(&[])
                .unwrap(),
            Vec::<f64>::new()
        );
    }

    #[test]
    fn pair_bracket_on_the_line() {
        let a =
            Algebroid::unchecked(&pair_groupoid(interval(-2.0, 2.0).unwrap()).unwrap()).unwrap();
        let x = AlgebroidSection::from_expr("x", Expr::from_terms(1, &[Term::var(0)]).unwrap());
        let one = AlgebroidSection::constant("1", 1, vec![1.0]);
        for p in [-1.5, 0.0, 0.3, 1.9] {
            assert_eq!(
                a.bracket(&x, &one).unwrap().value_at(&[p]).unwrap(),
                vec![-1.0]
            );
            assert_eq!(a.anchor(&x).unwrap().fiber_at(&[p]).unwrap(), vec![p]);
        }
        let phi = a.extend_to_invariant(&x).unwrap();
        assert_eq!(phi.fiber_at(&[0.7, -0.4]).unwrap(), vec![0.0, -0.4]);
        let zero = a
            .extend_to_invariant(&AlgebroidSection::zero(1, 1))
            .unwrap();
        assert_eq!(zero.fiber_at(&[0.7, -0.4]).unwrap(), vec![0.0, 0.0]);
        let psi = a
            .restrict_to_unit(&VectorField::zero(a.gpd.arrows.clone()))
            .unwrap();
        assert_eq!(psi.value_at(&[0.2]).unwrap(), vec![0.0]);
    }

    #[test]
    fn psi_refuses_non_vertical_fields() {
        let a = Algebroid::unchecked(&pair_groupoid(interval(0.0, 1.0).unwrap()).unwrap()).unwrap();
        let v = VectorField::from_expr(
            "v",
            a.gpd.arrows.clone(),
            Expr::from_terms(2, &[Term::c(1.0), Term::c(0.0)]).unwrap(),
        )
        .unwrap();
        let psi = a.restrict_to_unit(&v).unwrap();
        assert!(matches!(
            psi.value_at(&[0.5]),
            Err(Error::Verticality { .. })
        ));
    }

    #[test]
    fn phi_psi_on_closed_form_invariant_fields() {
        let a = Algebroid::unchecked(&matrix_group(2).unwrap()).unwrap();
        let x: Vec<Term> = (0..4).map(Term::var).collect();
        // A g with A = [[0.5, -1], [2, 0.25]].
        let ag = [
            0.5 * &x[0] - &x[2],
            0.5 * &x[1] - &x[3],
            2.0 * &x[0] + 0.25 * &x[2],
            2.0 * &x[1] + 0.25 * &x[3],
        ];
        let v = VectorField::from_expr(
            "Ag",
            a.gpd.arrows.clone(),
            Expr::from_terms(4, &ag).unwrap(),
        )
        .unwrap();
        let psi = a.restrict_to_unit(&v).unwrap();
        assert_eq!(psi.value_at(&[]).unwrap(), vec![0.5, -1.0, 2.0, 0.25]);
        let phi = a.extend_to_invariant(&psi).unwrap();
        let mut rng = crate::report::substream(5, "phi_psi");
        for _ in 0..100 {
            let g = a.gpd.sample_arrow(&mut rng).unwrap();
            assert!(rel_residual(&phi.fiber_at(&g).unwrap(), &v.fiber_at(&g).unwrap()) <= 1e-9);
        }
    }

    fn sections_for(a: &Algebroid) -> Vec<AlgebroidSection> {
        let (p, q) = (a.base_dim(), a.fiber_dim);
        let mut rng = crate::report::substream(9, "sections");
        (0..3)
            .map(|i| match p {
                0 => AlgebroidSection::constant(format!("s{i}"), 0, fiber(&mut rng, q)),
                _ => AlgebroidSection::from_expr(
                    format!("s{i}"),
                    crate::random::smooth_map(&mut rng, p, q),
                ),
            })
            .collect()
    }

    #[test]
    fn laws_hold_on_every_builder() {
        for g in [
            pair_groupoid(Domain::euclidean(2, 1.0)).unwrap(),
            matrix_group(2).unwrap(),
            action_gl2_r2().unwrap(),
        ] {
            let a = Algebroid::unchecked(&g).unwrap();
            let sections = sections_for(&a);
            let mut rng = crate::report::substream(3, "functions");
            let f = if a.base_dim() == 0 {
                ScalarField::constant(a.base(), 1.7)
            } else {
                ScalarField::from_expr(
                    "f",
                    a.base(),
                    crate::random::smooth_map(&mut rng, a.base_dim(), 1),
                )
                .unwrap()
            };
            all_pass(&check_algebroid_laws(&a, &sections, &[f], &cfg(40)));
        }
    }

    #[test]
    fn constant_functions_reduce_leibniz_to_scaling() {
        let a = Algebroid::unchecked(&action_gl2_r2().unwrap()).unwrap();
        let sections = sections_for(&a);
        let c = ScalarField::constant(a.base(), 3.0);
        let r = check_algebroid_laws(&a, &sections, &[c], &cfg(20));
        all_pass(&r);
        let (s, t) = (&sections[0], &sections[1]);
        let x = [0.3, -0.2];
        let left = a
            .bracket(s, &t.times(&ScalarField::constant(a.base(), 3.0)).unwrap())
            .unwrap()
            .value_at(&x)
            .unwrap();
        let right: Vec<f64> = a
            .bracket(s, t)
            .unwrap()
            .value_at(&x)
            .unwrap()
            .iter()
            .map(|v| 3.0 * v)
            .collect();
        assert!(rel_residual(&left, &right) <= 1e-12);
    }

    #[test]
    fn classical_oracles_pass() {
        let r = check_classical_oracles(&cfg(60)).unwrap();
        all_pass(&r);
        assert_eq!(r.check("matrix.bracket").unwrap().samples, 100);
    }
}
