//! Tangent-category differential geometry on Euclidean charts.
//!
//! The crate evaluates smooth maps over truncated nilpotent scalars to
//! realize iterated tangent functors, builds the categorical Lie bracket of
//! vector fields from the tangent structure, and differentiates groupoids
//! given in fibered charts into their Lie algebroids. Every structural law
//! is checked numerically by seeded suites that emit JSON reports.

// Negated comparisons keep NaN residuals on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebroid;
pub mod axioms;
pub mod domain;
pub mod error;
pub mod expr;
pub mod fields;
pub mod gbundle;
pub mod groupoid;
pub mod random;
pub mod report;
pub mod spec;
pub mod tangent;
pub mod tolerance;
pub mod tower;

pub use algebroid::{algebroid_of, Algebroid, AlgebroidSection};
pub use domain::{Domain, SmoothMap};
pub use error::{Error, Result};
pub use expr::{Expr, Term};
pub use fields::{act_on_function, lie_bracket, ScalarField, VectorField};
pub use gbundle::{act_on_vertical, GBundle, VerticalVector};
pub use groupoid::{tangent_groupoid, ComposableString, FiberedGroupoid};
pub use report::{Check, CheckResult, Mutation, Report, SuiteConfig};
pub use tangent::{apply_tn, eta_fiber, partial_tangent, Slot, TanPoint};
pub use tower::{Tower, Unary, MAX_ORDER};
