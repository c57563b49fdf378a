//! JSON input formats and the named builtin examples.
//!
//! A groupoid is either a builtin name (`"builtin:matrix_group:2"`) or an
//! object with a base chart, fiber dimension and the four structure maps as
//! expression ASTs. Parse errors carry line and column.

use std::sync::Arc;

use serde::Deserialize;

use crate::algebroid::AlgebroidSection;
use crate::domain::{Domain, SmoothMap};
use crate::error::{Error, Result};
use crate::expr::{Expr, ExprAst, Term};
use crate::fields::{check_related, Related, ScalarField, VectorField};
use crate::groupoid::{action_gl2_r2, interval, matrix_group, pair_groupoid, FiberedGroupoid};
use crate::random::corpus;
use crate::report::{BracketRow, Report, SuiteConfig};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub constraints: Vec<ExprAst>,
    #[serde(default)]
    pub budget: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupoidSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub base: DomainSpec,
    pub fiber_dim: usize,
    /// Sampling box of the fiber coordinates; `[-1, 1]` by default.
    #[serde(default)]
    pub fiber_lo: Option<Vec<f64>>,
    #[serde(default)]
    pub fiber_hi: Option<Vec<f64>>,
    /// Constraints on the arrow chart `R^(p+q)`.
    #[serde(default)]
    pub constraints: Vec<ExprAst>,
    pub t: ExprAst,
    pub m: ExprAst,
    pub unit: ExprAst,
    pub inv: ExprAst,
}

/// A builtin name or an inline spec.
#[derive(Clone, Debug)]
pub enum GroupoidRef {
    Builtin(String),
    Inline(Box<GroupoidSpec>),
}

impl<'de> Deserialize<'de> for GroupoidRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl<'de> serde::de::Visitor<'de> for Visitor {
            type Value = GroupoidRef;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a builtin groupoid name or a groupoid object")
            }

            fn visit_str<E: serde::de::Error>(
                self,
                v: &str,
            ) -> std::result::Result<GroupoidRef, E> {
                Ok(GroupoidRef::Builtin(v.to_string()))
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                map: A,
            ) -> std::result::Result<GroupoidRef, A::Error> {
                let spec =
                    GroupoidSpec::deserialize(serde::de::value::MapAccessDeserializer::new(map))?;
                Ok(GroupoidRef::Inline(Box::new(spec)))
            }
        }
        d.deserialize_any(Visitor)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedExpr {
    pub name: String,
    pub expr: ExprAst,
}

/// Input of `differentiate`: a groupoid with optional sections of its
/// algebroid and functions on its base.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifferentiateSpec {
    pub groupoid: GroupoidRef,
    #[serde(default)]
    pub sections: Vec<NamedExpr>,
    #[serde(default)]
    pub functions: Vec<NamedExpr>,
    #[serde(default)]
    pub brackets: Vec<BracketRequest>,
}

/// Input of `bracket`: fields and functions on one chart.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSpec {
    pub domain: DomainSpec,
    pub fields: Vec<NamedExpr>,
    #[serde(default)]
    pub functions: Vec<NamedExpr>,
    #[serde(default)]
    pub brackets: Vec<BracketRequest>,
}

/// A named input or the bracket of two requests, so
/// `{"bracket": ["u", {"bracket": ["v", "w"]}]}` asks for `[u, [v, w]]`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BracketRequest {
    Name(String),
    Bracket {
        bracket: Box<(BracketRequest, BracketRequest)>,
    },
}

impl From<&str> for BracketRequest {
    fn from(name: &str) -> BracketRequest {
        BracketRequest::Name(name.to_string())
    }
}

impl BracketRequest {
    pub fn label(&self) -> String {
        match self {
            BracketRequest::Name(n) => n.clone(),
            BracketRequest::Bracket { bracket } => {
                format!("[{}, {}]", bracket.0.label(), bracket.1.label())
            }
        }
    }

    /// Looks names up in `items` and folds brackets with `bracket`.
    pub fn resolve<T: Clone>(
        &self,
        items: &[T],
        name_of: &impl Fn(&T) -> &str,
        bracket: &impl Fn(&T, &T) -> Result<T>,
    ) -> Result<T> {
        match self {
            BracketRequest::Name(n) => items
                .iter()
                .find(|t| name_of(t) == n)
                .cloned()
                .ok_or_else(|| Error::Spec(format!("bracket request names unknown input `{n}`"))),
            BracketRequest::Bracket { bracket: pair } => bracket(
                &pair.0.resolve(items, name_of, bracket)?,
                &pair.1.resolve(items, name_of, bracket)?,
            ),
        }
    }
}

/// `[a, b]` for every pair of names with `a` before `b`.
pub fn pairwise(names: &[&str]) -> Vec<BracketRequest> {
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            out.push(BracketRequest::Bracket {
                bracket: Box::new(((*a).into(), (*b).into())),
            });
        }
    }
    out
}

/// Table rows for top-level bracket requests, evaluated at `x`.
pub fn bracket_rows<T: Clone>(
    requests: &[BracketRequest],
    items: &[T],
    name_of: impl Fn(&T) -> &str,
    bracket: impl Fn(&T, &T) -> Result<T>,
    value_at: impl Fn(&T, &[f64]) -> Result<Vec<f64>>,
    x: &[f64],
) -> Result<Vec<BracketRow>> {
    requests
        .iter()
        .map(|r| {
            let BracketRequest::Bracket { bracket: pair } = r else {
                return Err(Error::Spec(format!(
                    "`{}` is not a bracket request",
                    r.label()
                )));
            };
            let (a, b) = (
                pair.0.resolve(items, &name_of, &bracket)?,
                pair.1.resolve(items, &name_of, &bracket)?,
            );
            Ok(BracketRow {
                inputs: vec![pair.0.label(), pair.1.label()],
                point: x.to_vec(),
                value: value_at(&bracket(&a, &b)?, x)?,
            })
        })
        .collect()
}

/// Fields, functions and bracket requests on one chart.
pub struct FieldSet {
    pub fields: Vec<VectorField>,
    pub functions: Vec<ScalarField>,
    pub brackets: Vec<BracketRequest>,
}

pub const BUILTIN_PREFIX: &str = "builtin:";

/// The groupoids used by the default runs.
pub const BUILTIN_GROUPOIDS: &[&str] =
    &["pair", "matrix_group:2", "matrix_group:3", "action_gl2_r2"];

/// Parses JSON with line and column in the error.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
}

fn expr(ast: &ExprAst, what: &str) -> Result<Expr> {
    Expr::try_from(ast.clone()).map_err(|e| Error::Spec(format!("{what}: {e}")))
}

impl DomainSpec {
    pub fn build(&self, default_name: &str) -> Result<Domain> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::Spec(format!(
                "domain `{default_name}`: lo and hi differ in length"
            )));
        }
        let name = self
            .name
            .clone()
            .unwrap_or_else(|| default_name.to_string());
        let mut d = Domain::boxed(name, self.lo.clone(), self.hi.clone());
        for (i, c) in self.constraints.iter().enumerate() {
            d = d.with_constraint(expr(c, &format!("constraints[{i}]"))?)?;
        }
        if let Some(b) = self.budget {
            d = d.with_budget(b);
        }
        Ok(d)
    }
}

impl GroupoidSpec {
    pub fn build(&self) -> Result<FiberedGroupoid> {
        let base = self.base.build("G0")?;
        let (p, q) = (base.dim, self.fiber_dim);
        let flo = self.fiber_lo.clone().unwrap_or_else(|| vec![-1.0; q]);
        let fhi = self.fiber_hi.clone().unwrap_or_else(|| vec![1.0; q]);
        if flo.len() != q || fhi.len() != q {
            return Err(Error::Spec(format!("fiber box must have {q} entries")));
        }
        let name = self.name.clone().unwrap_or_else(|| "G".into());
        let mut arrows = Domain::boxed(
            format!("{name}1"),
            [base.lo.clone(), flo].concat(),
            [base.hi.clone(), fhi].concat(),
        )
        .with_budget(base.budget);
        let lifted: Vec<Term> = (0..p).map(Term::var).collect();
        for c in &base.constraints {
            arrows = arrows.with_constraint(Expr::from_terms(p + q, &c.substitute(&lifted)?)?)?;
        }
        for (i, c) in self.constraints.iter().enumerate() {
            arrows = arrows.with_constraint(expr(c, &format!("constraints[{i}]"))?)?;
        }
        let g = FiberedGroupoid::new(
            name,
            base,
            q,
            arrows,
            expr(&self.t, "t")?,
            expr(&self.m, "m")?,
            expr(&self.unit, "unit")?,
            expr(&self.inv, "inv")?,
        )
        .map_err(|e| Error::Spec(format!("structure maps: {e}")))?;
        Ok(g)
    }
}

/// `(0, 1)^d` as an open chart.
pub fn open_cube(d: usize) -> Result<Domain> {
    if d == 1 {
        return interval(0.0, 1.0);
    }
    let mut dom = Domain::boxed(format!("(0,1)^{d}"), vec![0.0; d], vec![1.0; d]);
    for i in 0..d {
        let x = Term::var(i);
        dom = dom.with_constraint(Expr::from_terms(d, &[&x * (1.0 - &x)])?)?;
    }
    Ok(dom)
}

fn param(name: &str, arg: Option<&str>, default: usize) -> Result<usize> {
    arg.map_or(Ok(default), |a| {
        a.parse()
            .map_err(|_| Error::Spec(format!("builtin `{name}`: bad parameter `{a}`")))
    })
}

/// Builtins: `pair[:d]` on `(0,1)^d`, `matrix_group:n`, `action_gl2_r2`.
pub fn builtin_groupoid(name: &str) -> Result<FiberedGroupoid> {
    let name = name.strip_prefix(BUILTIN_PREFIX).unwrap_or(name);
    let mut parts = name.splitn(2, ':');
    let head = parts.next().unwrap_or_default();
    let arg = parts.next();
    match head {
        "pair" => pair_groupoid(open_cube(param(head, arg, 1)?)?),
        "matrix_group" => matrix_group(param(head, arg, 2)?),
        "action_gl2_r2" if arg.is_none() => action_gl2_r2(),
        _ => Err(Error::Spec(format!("unknown builtin groupoid `{name}`"))),
    }
}

impl GroupoidRef {
    pub fn build(&self) -> Result<FiberedGroupoid> {
        match self {
            GroupoidRef::Builtin(name) => builtin_groupoid(name),
            GroupoidRef::Inline(spec) => spec.build(),
        }
    }
}

/// A groupoid from a builtin name or JSON text.
pub fn load_groupoid(text: &str) -> Result<FiberedGroupoid> {
    let trimmed = text.trim();
    if trimmed.starts_with(BUILTIN_PREFIX) {
        return builtin_groupoid(trimmed);
    }
    parse::<GroupoidRef>(text)?.build()
}

/// Elementary matrices for square fibers, unit vectors otherwise, and two
/// non-constant sections when the base is not a point.
pub fn default_sections(p: usize, q: usize) -> Vec<AlgebroidSection> {
    let n = (q as f64).sqrt().round() as usize;
    let square = n * n == q;
    let mut out: Vec<AlgebroidSection> = (0..q)
        .map(|k| {
            let name = if square {
                format!("E{}{}", k / n + 1, k % n + 1)
            } else {
                format!("e{}", k + 1)
            };
            let value = (0..q).map(|j| if j == k { 1.0 } else { 0.0 }).collect();
            AlgebroidSection::constant(name, p, value)
        })
        .collect();
    if p > 0 {
        let x = |i: usize| Term::var(i % p);
        let poly: Vec<Term> = (0..q).map(|k| 0.5 + x(k) * x(k) - 0.3 * x(k + 1)).collect();
        let trig: Vec<Term> = (0..q).map(|k| (x(k) + 0.7 * k as f64).sin()).collect();
        for (name, terms) in [("poly", poly), ("trig", trig)] {
            let e = Expr::from_terms(p, &terms).expect("default section is well formed");
            out.push(AlgebroidSection::from_expr(name, e));
        }
    }
    out
}

/// `f = 1 + x0^2 + sin(x_last) / 2` and `g = x_last cos(x0)`; a constant on a point.
pub fn default_functions(base: &Arc<Domain>) -> Vec<ScalarField> {
    let p = base.dim;
    if p == 0 {
        return vec![ScalarField::constant(base.clone(), 2.0)];
    }
    let (x0, xl) = (Term::var(0), Term::var(p - 1));
    let f = 1.0 + &x0 * &x0 + 0.5 * xl.sin();
    let g = &xl * x0.cos();
    [("f", f), ("g", g)]
        .into_iter()
        .map(|(n, t)| {
            ScalarField::from_expr(
                n,
                base.clone(),
                Expr::from_terms(p, &[t]).expect("well formed"),
            )
            .expect("scalar")
        })
        .collect()
}

pub fn sections_from(spec: &[NamedExpr], p: usize, q: usize) -> Result<Vec<AlgebroidSection>> {
    spec.iter()
        .map(|s| {
            let e = expr(&s.expr, &format!("section `{}`", s.name))?;
            if e.inputs() != p || e.outputs() != q {
                return Err(Error::Spec(format!(
                    "section `{}` must map R^{p} -> R^{q}",
                    s.name
                )));
            }
            Ok(AlgebroidSection::from_expr(s.name.clone(), e))
        })
        .collect()
}

pub fn functions_from(spec: &[NamedExpr], on: &Arc<Domain>) -> Result<Vec<ScalarField>> {
    spec.iter()
        .map(|f| {
            let e = expr(&f.expr, &format!("function `{}`", f.name))?;
            ScalarField::from_expr(f.name.clone(), on.clone(), e)
                .map_err(|e| Error::Spec(format!("function `{}`: {e}", f.name)))
        })
        .collect()
}

pub fn fields_from(spec: &FieldsSpec) -> Result<(Vec<VectorField>, Vec<ScalarField>)> {
    let on = Arc::new(spec.domain.build("U")?);
    let fields = spec
        .fields
        .iter()
        .map(|v| {
            let e = expr(&v.expr, &format!("field `{}`", v.name))?;
            VectorField::from_expr(v.name.clone(), on.clone(), e)
                .map_err(|e| Error::Spec(format!("field `{}`: {e}", v.name)))
        })
        .collect::<Result<_>>()?;
    Ok((fields, functions_from(&spec.functions, &on)?))
}

/// Fields from `builtin:corpus:d` or JSON text.
pub fn load_fields(text: &str, seed: u64) -> Result<FieldSet> {
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix(BUILTIN_PREFIX) {
        let d = match rest.split_once(':') {
            Some(("corpus", d)) => param("corpus", Some(d), 2)?,
            None if rest == "corpus" => 2,
            _ => return Err(Error::Spec(format!("unknown builtin field set `{rest}`"))),
        };
        if d == 0 {
            return Err(Error::Spec("corpus dimension must be positive".into()));
        }
        let (fields, functions) = corpus(d, seed);
        return Ok(FieldSet {
            fields,
            functions,
            brackets: Vec::new(),
        });
    }
    let spec = parse::<FieldsSpec>(text)?;
    let (fields, functions) = fields_from(&spec)?;
    Ok(FieldSet {
        fields,
        functions,
        brackets: spec.brackets,
    })
}

/// Relatedness under the shear `phi(x, y) = (x, y + x^2)`, with the pushed
/// fields written in closed form through `phi^-1(u, v) = (u, v - u^2)`.
pub fn check_shear_related(config: &SuiteConfig) -> Result<Report> {
    let on = Arc::new(Domain::euclidean(2, 1.0));
    let (x, y) = (Term::var(0), Term::var(1));
    let phi = SmoothMap::new(
        on.clone(),
        on.clone(),
        Expr::from_terms(2, &[x.clone(), &y + &x * &x])?,
    )?;
    let inverse = [x.clone(), &y - &x * &x];
    let field = |name: &str, a: Term, b: Term| -> Result<(VectorField, VectorField)> {
        let e = Expr::from_terms(2, &[a, b])?;
        let back = e.substitute(&inverse)?;
        let pushed = [back[0].clone(), &back[1] + 2.0 * &x * &back[0]];
        Ok((
            VectorField::from_expr(name, on.clone(), e)?,
            VectorField::from_expr(
                format!("{name}'"),
                on.clone(),
                Expr::from_terms(2, &pushed)?,
            )?,
        ))
    };
    let (v, v2) = field("v", x.sin() + 0.3 * &y, &x * &y - 0.5)?;
    let (w, w2) = field("w", y.cos(), &x * &x * &x + &y)?;
    let f2 = ScalarField::from_expr(
        "f'",
        on.clone(),
        Expr::from_terms(2, &[(&x * 0.5).exp() + &x * &y])?,
    )?;
    Ok(check_related(
        &Related {
            phi: &phi,
            v: &v,
            v2: &v2,
            w: &w,
            w2: &w2,
            f2: &f2,
        },
        config,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ast(e: Expr) -> serde_json::Value {
        serde_json::to_value(ExprAst::from(e)).unwrap()
    }

    #[test]
    fn builtins_resolve() {
        assert_eq!(
            builtin_groupoid("builtin:matrix_group:3")
                .unwrap()
                .fiber_dim,
            9
        );
        assert_eq!(builtin_groupoid("pair:2").unwrap().base_dim(), 2);
        assert_eq!(builtin_groupoid("action_gl2_r2").unwrap().arrow_dim(), 6);
        assert!(matches!(
            builtin_groupoid("matrix_group:x"),
            Err(Error::Spec(_))
        ));
        assert!(matches!(builtin_groupoid("torus"), Err(Error::Spec(_))));
        for name in BUILTIN_GROUPOIDS {
            builtin_groupoid(name).unwrap();
        }
    }

    #[test]
    fn inline_pair_groupoid_matches_builder() {
        let v = |i| Term::var(i);
        let spec = serde_json::json!({
            "name": "pair",
            "base": { "lo": [0.0], "hi": [1.0] },
            "fiber_dim": 1,
            "t": ast(Expr::from_terms(2, &[v(1)]).unwrap()),
            "m": ast(Expr::from_terms(4, &[v(2), v(1)]).unwrap()),
            "unit": ast(Expr::from_terms(1, &[v(0), v(0)]).unwrap()),
            "inv": ast(Expr::from_terms(2, &[v(1), v(0)]).unwrap()),
        });
        let g = load_groupoid(&spec.to_string()).unwrap();
        assert_eq!(g.mul(&[0.5, 0.2], &[0.7, 0.5]).unwrap(), vec![0.7, 0.2]);
        let builtin = load_groupoid("builtin:pair").unwrap();
        assert_eq!(
            g.inverse(&[0.1, 0.9]).unwrap(),
            builtin.inverse(&[0.1, 0.9]).unwrap()
        );
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = load_groupoid(
            "{\n  \"base\": {\"lo\": [0.0], \"hi\": [1.0]},\n  \"fiber_dim\": \"two\"\n}",
        )
        .unwrap_err();
        assert!(
            matches!(&err, Error::Spec(m) if m.contains("line")),
            "{err}"
        );
        let err = parse::<FieldsSpec>("{\"domain\": {\"lo\": [0], \"hi\": [1]}, \"fields\": [}")
            .unwrap_err();
        assert!(err.to_string().contains("column"), "{err}");
    }

    #[test]
    fn default_sections_are_named_and_shaped() {
        let s = default_sections(0, 4);
        let names: Vec<&str> = s.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["E11", "E12", "E21", "E22"]);
        let s = default_sections(2, 4);
        assert_eq!(s.len(), 6);
        assert_eq!(s[4].value_at(&[0.5, 1.0]).unwrap()[0], 0.5 + 0.25 - 0.3);
    }

    #[test]
    fn nested_bracket_requests() {
        let (x, y) = (Term::var(0), Term::var(1));
        let field = |name: &str, t: [Term; 2]| serde_json::json!({ "name": name, "expr": ast(Expr::from_terms(2, &t).unwrap()) });
        let spec = serde_json::json!({
            "domain": { "lo": [-1.0, -1.0], "hi": [1.0, 1.0] },
            "fields": [field("v", [-&y, x.clone()]), field("w", [Term::c(1.0), Term::c(0.0)])],
            "brackets": [
                { "bracket": ["v", "w"] },
                { "bracket": ["v", { "bracket": ["v", "w"] }] },
            ],
        });
        let set = load_fields(&spec.to_string(), 0).unwrap();
        let rows = bracket_rows(
            &set.brackets,
            &set.fields,
            |v: &VectorField| v.name.as_str(),
            crate::fields::lie_bracket,
            |v, x| v.fiber_at(x),
            &[0.3, -0.4],
        )
        .unwrap();
        assert_eq!(rows[1].inputs, ["v", "[v, w]"]);
        // [v, w] = (0, -1) and [v, (0, -1)] = -Dv (0, -1) = (-1, 0).
        assert_eq!(rows[0].value, [0.0, -1.0]);
        assert_eq!(rows[1].value, [-1.0, 0.0]);
        let unknown = vec![BracketRequest::Bracket {
            bracket: Box::new(("v".into(), "z".into())),
        }];
        let err = bracket_rows(
            &unknown,
            &set.fields,
            |v| v.name.as_str(),
            crate::fields::lie_bracket,
            |v, x| v.fiber_at(x),
            &[0.0, 0.0],
        );
        assert!(matches!(err, Err(Error::Spec(m)) if m.contains("`z`")));
    }

    #[test]
    fn corpus_and_shear_builtins() {
        let set = load_fields("builtin:corpus:3", 7).unwrap();
        let (v, f) = (set.fields, set.functions);
        assert_eq!((v.len(), f.len(), v[0].dim()), (3, 2, 3));
        assert!(load_fields("builtin:corpus:0", 7).is_err());
        let r = check_shear_related(&SuiteConfig {
            samples: 100,
            ..SuiteConfig::default()
        })
        .unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
