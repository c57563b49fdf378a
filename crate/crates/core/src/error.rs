use thiserror::Error;

use crate::tower::MAX_ORDER;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("tower order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),

    #[error("tower order {0} exceeds the maximum of {MAX_ORDER}")]
    OrderTooLarge(usize),

    #[error("{prim} is undefined at base value {value}")]
    Domain { prim: &'static str, value: f64 },

    #[error("node {node}: {source}")]
    AtNode { node: usize, source: Box<Error> },

    #[error("arity mismatch: expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },

    #[error("invalid expression: {0}")]
    InvalidExpr(String),

    #[error("level {level} is out of range for order {order}")]
    Level { level: usize, order: usize },

    #[error("fiber mismatch: shared blocks differ by {0:e}")]
    FiberMismatch(f64),

    #[error("point lies outside domain `{0}`")]
    OutsideDomain(String),

    #[error("sampler for `{0}` exhausted after {1} attempts")]
    SamplerExhausted(String, usize),

    #[error("kernel violation: T(pi) block of delta is {residual:e}, bound {bound:e}")]
    KernelViolation { residual: f64, bound: f64 },

    #[error("verticality violation: base-direction part is {residual:e}, bound {bound:e}")]
    Verticality { residual: f64, bound: f64 },

    #[error("domain mismatch: `{0}` vs `{1}`")]
    DomainMismatch(String, String),

    #[error("composability violation: adjacency residual {0:e}")]
    Composability(f64),

    #[error("missing product split on domain `{0}`")]
    NoSplit(String),

    #[error("builder rejected input: {0}")]
    Builder(String),

    #[error("malformed spec: {0}")]
    Spec(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("refused: suite `{}` has failing checks", .0.suite)]
    SuiteFailed(Box<crate::report::Report>),
}

impl Error {
    pub(crate) fn at_node(node: usize, e: Error) -> Error {
        match e {
            e @ Error::AtNode { .. } => e,
            e => Error::AtNode {
                node,
                source: Box::new(e),
            },
        }
    }
}
