//! Expression DAGs: the concrete carrier for smooth maps between charts.
//!
//! An [`Expr`] is a topologically ordered node list with a fixed input arity
//! and a vector of output nodes. Evaluating over [`Tower`]s of order `n`
//! yields the `n`-fold tangent lift of the denoted map. Expressions are built
//! ergonomically through [`Term`], which overloads arithmetic operators.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tower::{Tower, Unary};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Input(usize),
    Const(f64),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    PowInt(i32),
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Op {
    fn arity(self) -> usize {
        match self {
            Op::Input(_) | Op::Const(_) => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Op::Input(_) => "input",
            Op::Const(_) => "const",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::PowInt(_) => "pow_int",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub op: Op,
    pub args: Vec<usize>,
}

/// A validated expression DAG `R^inputs -> R^outputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExprAst", into = "ExprAst")]
pub struct Expr {
    inputs: usize,
    nodes: Vec<Node>,
    outputs: Vec<usize>,
}

impl Expr {
    /// Builds from raw parts, checking arities, input indices and ordering.
    pub fn from_parts(inputs: usize, nodes: Vec<Node>, outputs: Vec<usize>) -> Result<Expr> {
        for (id, node) in nodes.iter().enumerate() {
            if node.args.len() != node.op.arity() {
                return Err(Error::InvalidExpr(format!(
                    "node {id} ({}) takes {} operands, got {}",
                    node.op.name(),
                    node.op.arity(),
                    node.args.len()
                )));
            }
            if let Some(&bad) = node.args.iter().find(|&&a| a >= id) {
                return Err(Error::InvalidExpr(format!(
                    "node {id} refers to node {bad}; operands must precede their users"
                )));
            }
            match node.op {
                Op::Input(i) if i >= inputs => {
                    return Err(Error::InvalidExpr(format!(
                        "node {id} reads input {i} but arity is {inputs}"
                    )));
                }
                Op::Const(c) if !c.is_finite() => {
                    return Err(Error::InvalidExpr(format!(
                        "node {id} has a non-finite constant"
                    )));
                }
                _ => {}
            }
        }
        if let Some(&bad) = outputs.iter().find(|&&o| o >= nodes.len()) {
            return Err(Error::InvalidExpr(format!(
                "output refers to missing node {bad}"
            )));
        }
        Ok(Expr {
            inputs,
            nodes,
            outputs,
        })
    }

    /// Compiles term trees into a DAG, sharing every node reachable twice.
    pub fn from_terms(inputs: usize, outputs: &[Term]) -> Result<Expr> {
        let mut nodes = Vec::new();
        let mut memo = HashMap::new();
        let outs = outputs
            .iter()
            .map(|t| t.compile(&mut nodes, &mut memo))
            .collect();
        Expr::from_parts(inputs, nodes, outs)
    }

    /// The identity map on `R^dim`.
    pub fn identity(dim: usize) -> Expr {
        let vars: Vec<Term> = (0..dim).map(Term::var).collect();
        Expr::from_terms(dim, &vars).expect("identity is well formed")
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn output_ids(&self) -> &[usize] {
        &self.outputs
    }

    /// Evaluates over towers sharing one order (order 0 when there are no inputs).
    pub fn eval(&self, inputs: &[Tower]) -> Result<Vec<Tower>> {
        self.eval_at(inputs.first().map_or(0, Tower::order), inputs)
    }

    /// Evaluates with an explicit order, which fixes the order of constant
    /// outputs of input-free expressions.
    pub fn eval_at(&self, order: usize, inputs: &[Tower]) -> Result<Vec<Tower>> {
        if inputs.len() != self.inputs {
            return Err(Error::Arity {
                expected: self.inputs,
                got: inputs.len(),
            });
        }
        if order > crate::tower::MAX_ORDER {
            return Err(Error::OrderTooLarge(order));
        }
        if let Some(t) = inputs.iter().find(|t| t.order() != order) {
            return Err(Error::OrderMismatch(order, t.order()));
        }
        let mut vals: Vec<Tower> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let arg = |k: usize| &vals[node.args[k]];
            let v = match node.op {
                Op::Input(i) => Ok(inputs[i].clone()),
                Op::Const(c) => Tower::constant(order, c),
                Op::Add => arg(0).try_add(arg(1)),
                Op::Sub => arg(0).try_sub(arg(1)),
                Op::Mul => arg(0).try_mul(arg(1)),
                Op::Div => arg(0).try_div(arg(1)),
                Op::Neg => Ok(arg(0).scale(-1.0)),
                Op::PowInt(k) => arg(0).powi(k),
                Op::Exp => arg(0).lift(Unary::Exp),
                Op::Log => arg(0).lift(Unary::Log),
                Op::Sin => arg(0).lift(Unary::Sin),
                Op::Cos => arg(0).lift(Unary::Cos),
                Op::Sqrt => arg(0).lift(Unary::Sqrt),
            }
            .map_err(|e| Error::at_node(id, e))?;
            vals.push(v);
        }
        Ok(self.outputs.iter().map(|&o| vals[o].clone()).collect())
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        let towers: Vec<Tower> = x.iter().map(|&v| Tower::real(v)).collect();
        Ok(self.eval(&towers)?.iter().map(Tower::base).collect())
    }

    /// Inlines this expression with its inputs replaced by `args`.
    pub fn substitute(&self, args: &[Term]) -> Result<Vec<Term>> {
        if args.len() != self.inputs {
            return Err(Error::Arity {
                expected: self.inputs,
                got: args.len(),
            });
        }
        let mut terms: Vec<Term> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let t = match node.op {
                Op::Input(i) => args[i].clone(),
                op => Term::node(op, node.args.iter().map(|&a| terms[a].clone()).collect()),
            };
            terms.push(t);
        }
        Ok(self.outputs.iter().map(|&o| terms[o].clone()).collect())
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &Expr, inner: &Expr) -> Result<Expr> {
        let vars: Vec<Term> = (0..inner.inputs).map(Term::var).collect();
        let mid = inner.substitute(&vars)?;
        let out = outer.substitute(&mid)?;
        Expr::from_terms(inner.inputs, &out)
    }

    /// Forward-mode source transform: inputs `(x, dx)`, outputs `(f, df)`.
    pub fn tangent(&self) -> Expr {
        let n = self.inputs;
        let mut prim: Vec<Term> = Vec::with_capacity(self.nodes.len());
        let mut tan: Vec<Option<Term>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let a = node
                .args
                .first()
                .map(|&i| (prim[i].clone(), tan[i].clone()));
            let b = node.args.get(1).map(|&i| (prim[i].clone(), tan[i].clone()));
            let p = match node.op {
                Op::Input(i) => Term::var(i),
                op => Term::node(op, node.args.iter().map(|&i| prim[i].clone()).collect()),
            };
            let d = match node.op {
                Op::Input(i) => Some(Term::var(n + i)),
                Op::Const(_) => None,
                Op::Add => sum(a.unwrap().1, b.unwrap().1),
                Op::Sub => sum(a.unwrap().1, b.unwrap().1.map(|t| -t)),
                Op::Mul => {
                    let (x, dx) = a.unwrap();
                    let (y, dy) = b.unwrap();
                    sum(dx.map(|d| d * y), dy.map(|d| x * d))
                }
                Op::Div => {
                    let (_, dx) = a.unwrap();
                    let (y, dy) = b.unwrap();
                    sum(dx, dy.map(|d| -(p.clone() * d))).map(|num| num / y)
                }
                Op::Neg => a.unwrap().1.map(|d| -d),
                Op::PowInt(0) => None,
                Op::PowInt(1) => a.unwrap().1,
                Op::PowInt(k) => {
                    let (x, dx) = a.unwrap();
                    dx.map(|d| (k as f64) * x.powi(k - 1) * d)
                }
                Op::Exp => a.unwrap().1.map(|d| p.clone() * d),
                Op::Log => {
                    let (x, dx) = a.unwrap();
                    dx.map(|d| d / x)
                }
                Op::Sin => {
                    let (x, dx) = a.unwrap();
                    dx.map(|d| x.cos() * d)
                }
                Op::Cos => {
                    let (x, dx) = a.unwrap();
                    dx.map(|d| -(x.sin() * d))
                }
                Op::Sqrt => a.unwrap().1.map(|d| d / (2.0 * p.clone())),
            };
            prim.push(p);
            tan.push(d);
        }
        let mut outs: Vec<Term> = self.outputs.iter().map(|&o| prim[o].clone()).collect();
        outs.extend(
            self.outputs
                .iter()
                .map(|&o| tan[o].clone().unwrap_or_else(|| Term::c(0.0))),
        );
        Expr::from_terms(2 * n, &outs).expect("tangent of a valid expression is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("expression serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Expr, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn sum(a: Option<Term>, b: Option<Term>) -> Option<Term> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a + b),
        (a, None) => a,
        (None, b) => b,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Expr({} -> {}, {} nodes)",
            self.inputs,
            self.outputs.len(),
            self.nodes.len()
        )
    }
}

/// Builder handle for expression trees. Cloning shares the node.
#[derive(Clone, Debug)]
pub struct Term(Arc<TermNode>);

#[derive(Debug)]
struct TermNode {
    op: Op,
    args: Vec<Term>,
}

impl Term {
    fn node(op: Op, args: Vec<Term>) -> Term {
        Term(Arc::new(TermNode { op, args }))
    }

    pub fn var(i: usize) -> Term {
        Term::node(Op::Input(i), Vec::new())
    }

    pub fn c(value: f64) -> Term {
        Term::node(Op::Const(value), Vec::new())
    }

    pub fn exp(&self) -> Term {
        Term::node(Op::Exp, vec![self.clone()])
    }

    pub fn ln(&self) -> Term {
        Term::node(Op::Log, vec![self.clone()])
    }

    pub fn sin(&self) -> Term {
        Term::node(Op::Sin, vec![self.clone()])
    }

    pub fn cos(&self) -> Term {
        Term::node(Op::Cos, vec![self.clone()])
    }

    pub fn sqrt(&self) -> Term {
        Term::node(Op::Sqrt, vec![self.clone()])
    }

    pub fn powi(&self, k: i32) -> Term {
        Term::node(Op::PowInt(k), vec![self.clone()])
    }

    fn compile(&self, nodes: &mut Vec<Node>, memo: &mut HashMap<usize, usize>) -> usize {
        let key = Arc::as_ptr(&self.0) as usize;
        if let Some(&id) = memo.get(&key) {
            return id;
        }
        let args = self.0.args.iter().map(|a| a.compile(nodes, memo)).collect();
        nodes.push(Node {
            op: self.0.op,
            args,
        });
        let id = nodes.len() - 1;
        memo.insert(key, id);
        id
    }
}

macro_rules! term_binop {
    ($tr:ident, $method:ident, $op:expr) => {
        impl $tr<Term> for Term {
            type Output = Term;
            fn $method(self, rhs: Term) -> Term {
                Term::node($op, vec![self, rhs])
            }
        }
        impl $tr<&Term> for &Term {
            type Output = Term;
            fn $method(self, rhs: &Term) -> Term {
                Term::node($op, vec![self.clone(), rhs.clone()])
            }
        }
        impl $tr<f64> for Term {
            type Output = Term;
            fn $method(self, rhs: f64) -> Term {
                Term::node($op, vec![self, Term::c(rhs)])
            }
        }
        impl $tr<Term> for f64 {
            type Output = Term;
            fn $method(self, rhs: Term) -> Term {
                Term::node($op, vec![Term::c(self), rhs])
            }
        }
        impl $tr<&Term> for f64 {
            type Output = Term;
            fn $method(self, rhs: &Term) -> Term {
                Term::node($op, vec![Term::c(self), rhs.clone()])
            }
        }
        impl $tr<f64> for &Term {
            type Output = Term;
            fn $method(self, rhs: f64) -> Term {
                Term::node($op, vec![self.clone(), Term::c(rhs)])
            }
        }
        impl $tr<&Term> for Term {
            type Output = Term;
            fn $method(self, rhs: &Term) -> Term {
                Term::node($op, vec![self, rhs.clone()])
            }
        }
        impl $tr<Term> for &Term {
            type Output = Term;
            fn $method(self, rhs: Term) -> Term {
                Term::node($op, vec![self.clone(), rhs])
            }
        }
    };
}

term_binop!(Add, add, Op::Add);
term_binop!(Sub, sub, Op::Sub);
term_binop!(Mul, mul, Op::Mul);
term_binop!(Div, div, Op::Div);

impl Neg for Term {
    type Output = Term;
    fn neg(self) -> Term {
        Term::node(Op::Neg, vec![self])
    }
}

impl Neg for &Term {
    type Output = Term;
    fn neg(self) -> Term {
        Term::node(Op::Neg, vec![self.clone()])
    }
}

/// JSON form of a node.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeAst {
    pub op: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<i64>,
}

/// JSON form of an expression: `{"inputs", "nodes", "outputs"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExprAst {
    pub inputs: usize,
    pub nodes: Vec<NodeAst>,
    pub outputs: Vec<usize>,
}

impl From<Expr> for ExprAst {
    fn from(e: Expr) -> ExprAst {
        let nodes = e
            .nodes
            .iter()
            .map(|n| {
                let (value, index) = match n.op {
                    Op::Input(i) => (None, Some(i as i64)),
                    Op::Const(c) => (Some(c), None),
                    Op::PowInt(k) => (None, Some(k as i64)),
                    _ => (None, None),
                };
                NodeAst {
                    op: n.op.name().to_string(),
                    args: n.args.clone(),
                    value,
                    index,
                }
            })
            .collect();
        ExprAst {
            inputs: e.inputs,
            nodes,
            outputs: e.outputs,
        }
    }
}

impl TryFrom<ExprAst> for Expr {
    type Error = Error;

    fn try_from(ast: ExprAst) -> Result<Expr> {
        let mut nodes = Vec::with_capacity(ast.nodes.len());
        for (id, n) in ast.nodes.into_iter().enumerate() {
            let bad = |what: &str| Error::InvalidExpr(format!("node {id} ({}): {what}", n.op));
            let op = match n.op.as_str() {
                "input" => {
                    let i = n.index.ok_or_else(|| bad("missing \"index\""))?;
                    Op::Input(usize::try_from(i).map_err(|_| bad("negative input index"))?)
                }
                "const" => Op::Const(n.value.ok_or_else(|| bad("missing \"value\""))?),
                "pow_int" => {
                    let k = n.index.ok_or_else(|| bad("missing \"index\" exponent"))?;
                    Op::PowInt(i32::try_from(k).map_err(|_| bad("exponent out of range"))?)
                }
                "add" => Op::Add,
                "sub" => Op::Sub,
                "mul" => Op::Mul,
                "div" => Op::Div,
                "neg" => Op::Neg,
                "exp" => Op::Exp,
                "log" => Op::Log,
                "sin" => Op::Sin,
                "cos" => Op::Cos,
                "sqrt" => Op::Sqrt,
                _ => return Err(bad("unknown op")),
            };
            nodes.push(Node { op, args: n.args });
        }
        Expr::from_parts(ast.inputs, nodes, ast.outputs)
    }
}
