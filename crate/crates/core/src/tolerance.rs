//! Tolerances and the residual metric shared by every check.
//!
//! Residuals are sup-norm differences divided by the larger sup-norm of the
//! compared quantities, floored at [`SCALE_FLOOR`]. With the default exact
//! tolerance this gives relative `1e-9` and an absolute floor of `1e-12`.

/// Identities that hold exactly in jet arithmetic.
pub const EXACT: f64 = 1e-9;

/// Comparisons against central finite differences.
pub const FINITE_DIFFERENCE: f64 = 1e-5;

/// Step for central finite differences.
pub const FD_STEP: f64 = 1e-4;

/// Bound on the `T(pi)` block of `delta(v, w)`, scaled by `1 + magnitude`.
pub const KERNEL: f64 = 1e-10;

/// Shared blocks of fiber-sum operands must agree to this.
pub const FIBER_MATCH: f64 = 1e-9;

/// `s(g_i) = t(g_{i+1})` adjacency in composable strings.
pub const ADJACENCY: f64 = 1e-9;

/// Base-direction components of supposedly vertical vectors, scaled by `1 + magnitude`.
pub const VERTICAL: f64 = 1e-9;

/// Smallest scale used when normalizing a residual.
pub const SCALE_FLOOR: f64 = 1e-3;

pub fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `|a - b|_inf / max(|a|_inf, |b|_inf, SCALE_FLOOR)`; NaN propagates as infinity.
pub fn rel_residual(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| {
        let d = (x - y).abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            m.max(d)
        }
    });
    scaled(diff, sup_norm(a).max(sup_norm(b)))
}

/// `magnitude / max(scale, SCALE_FLOOR)`, for sums that should cancel.
pub fn scaled(magnitude: f64, scale: f64) -> f64 {
    if magnitude.is_nan() || scale.is_nan() {
        return f64::INFINITY;
    }
    magnitude / scale.max(SCALE_FLOOR)
}
