//! Open chart domains and smooth maps between them.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::{Expr, Term};

const DEFAULT_BUDGET: usize = 10_000;

/// An open subset of `R^dim`: every constraint evaluates strictly positive.
///
/// The box `[lo, hi]` only drives sampling; membership is decided by the
/// constraints alone.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub name: String,
    pub dim: usize,
    pub constraints: Vec<Expr>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// `(d1, d2)` when the domain is declared as a product `R^d1 x R^d2`.
    pub split: Option<(usize, usize)>,
    /// Rejection attempts before the sampler gives up.
    pub budget: usize,
}

impl Domain {
    pub fn boxed(name: impl Into<String>, lo: Vec<f64>, hi: Vec<f64>) -> Domain {
        assert_eq!(
            lo.len(),
            hi.len(),
            "sampling box bounds must have equal length"
        );
        Domain {
            name: name.into(),
            dim: lo.len(),
            constraints: Vec::new(),
            lo,
            hi,
            split: None,
            budget: DEFAULT_BUDGET,
        }
    }

    /// All of `R^dim`, sampled from the cube `[-r, r]^dim`.
    pub fn euclidean(dim: usize, r: f64) -> Domain {
        Domain::boxed(format!("R^{dim}"), vec![-r; dim], vec![r; dim])
    }

    pub fn point() -> Domain {
        Domain::boxed("point", Vec::new(), Vec::new())
    }

    pub fn with_constraint(mut self, c: Expr) -> Result<Domain> {
        if c.inputs() != self.dim || c.outputs() != 1 {
            return Err(Error::Dim {
                expected: self.dim,
                got: c.inputs(),
            });
        }
        self.constraints.push(c);
        Ok(self)
    }

    pub fn with_split(mut self, first: usize) -> Result<Domain> {
        if first > self.dim {
            return Err(Error::Dim {
                expected: self.dim,
                got: first,
            });
        }
        self.split = Some((first, self.dim - first));
        Ok(self)
    }

    pub fn with_budget(mut self, budget: usize) -> Domain {
        self.budget = budget;
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter().all(|v| v.is_finite())
            && self
                .constraints
                .iter()
                .all(|c| matches!(c.eval_f64(x).as_deref(), Ok([v]) if *v > 0.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        for _ in 0..self.budget.max(1) {
            let x: Vec<f64> = self
                .lo
                .iter()
                .zip(&self.hi)
                .map(|(&lo, &hi)| lo + (hi - lo) * rng.gen::<f64>())
                .collect();
            if self.contains(&x) {
                return Ok(x);
            }
        }
        Err(Error::SamplerExhausted(self.name.clone(), self.budget))
    }

    /// Cartesian product with its split recorded.
    pub fn product(a: &Domain, b: &Domain) -> Domain {
        let mut d = Domain::boxed(
            format!("{}x{}", a.name, b.name),
            [a.lo.clone(), b.lo.clone()].concat(),
            [a.hi.clone(), b.hi.clone()].concat(),
        );
        d.constraints = pulled_back(a, 0, d.dim)
            .chain(pulled_back(b, a.dim, d.dim))
            .collect();
        d.split = Some((a.dim, b.dim));
        d
    }

    /// `TU = U x R^dim`, fibers sampled from `[-1, 1]`.
    pub fn tangent(&self) -> Domain {
        Domain::product(self, &Domain::euclidean(self.dim, 1.0)).renamed(format!("T{}", self.name))
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Domain {
        self.name = name.into();
        self
    }
}

/// Constraints of `d` re-expressed on a larger chart where `d` sits at `offset`.
fn pulled_back(d: &Domain, offset: usize, total: usize) -> impl Iterator<Item = Expr> + '_ {
    d.constraints.iter().map(move |c| {
        let args: Vec<Term> = (0..d.dim).map(|i| Term::var(offset + i)).collect();
        let out = c
            .substitute(&args)
            .expect("constraint arity matches its domain");
        Expr::from_terms(total, &out).expect("pulled-back constraint is well formed")
    })
}

/// A morphism of Euclidean charts, given by an expression body.
#[derive(Clone, Debug)]
pub struct SmoothMap {
    pub dom: Arc<Domain>,
    pub cod: Arc<Domain>,
    pub body: Arc<Expr>,
}

impl SmoothMap {
    pub fn new(dom: Arc<Domain>, cod: Arc<Domain>, body: Expr) -> Result<SmoothMap> {
        if body.inputs() != dom.dim {
            return Err(Error::Arity {
                expected: dom.dim,
                got: body.inputs(),
            });
        }
        if body.outputs() != cod.dim {
            return Err(Error::Dim {
                expected: cod.dim,
                got: body.outputs(),
            });
        }
        Ok(SmoothMap {
            dom,
            cod,
            body: Arc::new(body),
        })
    }

    pub fn identity(dom: Arc<Domain>) -> SmoothMap {
        let body = Expr::identity(dom.dim);
        SmoothMap {
            cod: dom.clone(),
            dom,
            body: Arc::new(body),
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.body.eval_f64(x)
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &SmoothMap) -> Result<SmoothMap> {
        if inner.cod.dim != self.dom.dim {
            return Err(Error::Dim {
                expected: self.dom.dim,
                got: inner.cod.dim,
            });
        }
        let body = Expr::compose(&self.body, &inner.body)?;
        SmoothMap::new(inner.dom.clone(), self.cod.clone(), body)
    }
}
