//! Vector fields, scalar fields, the Lie bracket built from the tangent
//! structure, and the derivation action on functions.
//!
//! Fields are evaluators on towers of any order, so a bracket is again a
//! field that can be differentiated: its internal tangent indices sit above
//! whatever order the caller evaluates at.

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;

use crate::domain::{Domain, SmoothMap};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::random::uniform;
use crate::report::{failed_row, run_checks, Check, Report, Rng, SuiteConfig};
use crate::tangent::{apply_tn, eta_fiber_tower, TanPoint};
use crate::tolerance::{self, rel_residual, scaled, sup_norm, EXACT};
use crate::tower::Tower;

pub type VectorEval = Arc<dyn Fn(&[Tower]) -> Result<Vec<Tower>> + Send + Sync>;
pub type ScalarEval = Arc<dyn Fn(&[Tower]) -> Result<Tower> + Send + Sync>;

/// A section `v: X -> TX`, stored by its fiber part.
#[derive(Clone)]
pub struct VectorField {
    pub name: String,
    pub on: Arc<Domain>,
    eval: VectorEval,
}

/// A morphism `f: X -> R`.
#[derive(Clone)]
pub struct ScalarField {
    pub name: String,
    pub on: Arc<Domain>,
    eval: ScalarEval,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({} on {})", self.name, self.on.name)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({} on {})", self.name, self.on.name)
    }
}

fn same_domain(a: &Domain, b: &Domain) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DomainMismatch(a.name.clone(), b.name.clone()))
    }
}

fn towers(x: &[f64]) -> Vec<Tower> {
    x.iter().map(|&v| Tower::real(v)).collect()
}

fn reals(t: &[Tower]) -> Vec<f64> {
    t.iter().map(Tower::base).collect()
}

impl VectorField {
    pub fn new(
        name: impl Into<String>,
        on: Arc<Domain>,
        eval: impl Fn(&[Tower]) -> Result<Vec<Tower>> + Send + Sync + 'static,
    ) -> VectorField {
        VectorField {
            name: name.into(),
            on,
            eval: Arc::new(eval),
        }
    }

    pub fn from_expr(name: impl Into<String>, on: Arc<Domain>, e: Expr) -> Result<VectorField> {
        if e.inputs() != on.dim {
            return Err(Error::Arity {
                expected: on.dim,
                got: e.inputs(),
            });
        }
        if e.outputs() != on.dim {
            return Err(Error::Dim {
                expected: on.dim,
                got: e.outputs(),
            });
        }
        Ok(VectorField::new(name, on, move |x| e.eval(x)))
    }

    pub fn zero(on: Arc<Domain>) -> VectorField {
        VectorField::new("0", on, |x| {
            x.iter().map(|t| Tower::zero(t.order())).collect()
        })
    }

    pub fn dim(&self) -> usize {
        self.on.dim
    }

    /// Fiber components at towers of any common order.
    pub fn eval(&self, x: &[Tower]) -> Result<Vec<Tower>> {
        if x.len() != self.dim() {
            return Err(Error::Dim {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let out = (self.eval)(x)?;
        if out.len() != self.dim() {
            return Err(Error::Dim {
                expected: self.dim(),
                got: out.len(),
            });
        }
        Ok(out)
    }

    pub fn fiber_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(reals(&self.eval(&towers(x))?))
    }

    /// `v(x)` as a point of `TX`.
    pub fn at(&self, x: &[f64]) -> Result<TanPoint> {
        if !self.on.contains(x) {
            return Err(Error::OutsideDomain(self.on.name.clone()));
        }
        TanPoint::vector(x, &self.fiber_at(x)?)
    }

    /// `v(x)` for inner-order towers `x`.
    pub fn section_over(&self, x: &[Tower]) -> Result<TanPoint> {
        TanPoint::vector_over(x, &self.eval(x)?)
    }

    /// `T^k v` at an order-`k` point; the section's own direction becomes
    /// the innermost own index of the result.
    pub fn section_lift(&self, p: &TanPoint) -> Result<TanPoint> {
        let coords = p.coords();
        let fiber = self.eval(coords)?;
        TanPoint::from_coords(p.order(), [coords.to_vec(), fiber].concat())?.unpeel_inner()
    }

    pub fn rename(mut self, name: impl Into<String>) -> VectorField {
        self.name = name.into();
        self
    }

    /// Pointwise fiber sum.
    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        same_domain(&self.on, &other.on)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(VectorField::new(
            format!("({} + {})", self.name, other.name),
            self.on.clone(),
            move |x| {
                a.section_over(x)?
                    .add_fiber(&b.section_over(x)?)
                    .map(|p| p.block_towers(1))
            },
        ))
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        same_domain(&self.on, &other.on)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(VectorField::new(
            format!("({} - {})", self.name, other.name),
            self.on.clone(),
            move |x| {
                a.section_over(x)?
                    .sub_fiber(&b.section_over(x)?)
                    .map(|p| p.block_towers(1))
            },
        ))
    }

    /// `r v`.
    pub fn scale(&self, r: f64) -> VectorField {
        let a = self.clone();
        VectorField::new(format!("{r} {}", self.name), self.on.clone(), move |x| {
            Ok(a.eval(x)?.iter().map(|t| t.scale(r)).collect())
        })
    }

    /// `f v := kappa (f, v)`.
    pub fn times(&self, f: &ScalarField) -> Result<VectorField> {
        same_domain(&self.on, &f.on)?;
        let (a, f) = (self.clone(), f.clone());
        Ok(VectorField::new(
            format!("{} {}", f.name, self.name),
            self.on.clone(),
            move |x| {
                let mut r = f.eval(x)?;
                if let Some(order) = x.first().map(Tower::order).filter(|&o| o > r.order()) {
                    r = r.embed(order)?;
                }
                a.eval(x)?.iter().map(|t| r.try_mul(t)).collect()
            },
        ))
    }
}

impl ScalarField {
    pub fn new(
        name: impl Into<String>,
        on: Arc<Domain>,
        eval: impl Fn(&[Tower]) -> Result<Tower> + Send + Sync + 'static,
    ) -> ScalarField {
        ScalarField {
            name: name.into(),
            on,
            eval: Arc::new(eval),
        }
    }

    pub fn from_expr(name: impl Into<String>, on: Arc<Domain>, e: Expr) -> Result<ScalarField> {
        if e.inputs() != on.dim {
            return Err(Error::Arity {
                expected: on.dim,
                got: e.inputs(),
            });
        }
        if e.outputs() != 1 {
            return Err(Error::Dim {
                expected: 1,
                got: e.outputs(),
            });
        }
        Ok(ScalarField::new(name, on, move |x| {
            Ok(e.eval(x)?.remove(0))
        }))
    }

    pub fn constant(on: Arc<Domain>, c: f64) -> ScalarField {
        ScalarField::new(format!("{c}"), on, move |x| {
            Tower::constant(x.first().map_or(0, Tower::order), c)
        })
    }

    pub fn eval(&self, x: &[Tower]) -> Result<Tower> {
        if x.len() != self.on.dim {
            return Err(Error::Dim {
                expected: self.on.dim,
                got: x.len(),
            });
        }
        (self.eval)(x)
    }

    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(&towers(x))?.base())
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        same_domain(&self.on, &other.on)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(ScalarField::new(
            format!("({} + {})", self.name, other.name),
            self.on.clone(),
            move |x| a.eval(x)?.try_add(&b.eval(x)?),
        ))
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        same_domain(&self.on, &other.on)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(ScalarField::new(
            format!("({} {})", self.name, other.name),
            self.on.clone(),
            move |x| a.eval(x)?.try_mul(&b.eval(x)?),
        ))
    }

    /// `f . phi`.
    pub fn pullback(&self, phi: &SmoothMap) -> Result<ScalarField> {
        same_domain(&self.on, &phi.cod)?;
        let (f, body) = (self.clone(), phi.body.clone());
        Ok(ScalarField::new(
            format!("{} . phi", self.name),
            phi.dom.clone(),
            move |x| f.eval(&body.eval(x)?),
        ))
    }
}

/// `delta(v, w)` at `x` with the size of its kernel block.
#[derive(Clone, Debug)]
pub struct Delta {
    pub delta: TanPoint,
    /// Largest coefficient of the `T pi` block, which must vanish.
    pub kernel: f64,
    /// Largest coefficient of the two points that were subtracted.
    pub magnitude: f64,
}

impl Delta {
    pub fn kernel_ratio(&self) -> f64 {
        self.kernel / (1.0 + self.magnitude)
    }
}

/// `delta(v, w) = T w . v  -_{TX}  tau . T v . w` at inner-order towers `x`.
pub fn bracket_delta(v: &VectorField, w: &VectorField, x: &[Tower]) -> Result<Delta> {
    let a = w.section_lift(&v.section_over(x)?)?;
    let b = v.section_lift(&w.section_over(x)?)?.swap_tau(1)?;
    let delta = a.sub_fiber(&b)?;
    let kernel = delta
        .block_towers(0b10)
        .iter()
        .map(Tower::max_abs)
        .fold(0.0, f64::max);
    let magnitude = sup_norm(&a.flat()).max(sup_norm(&b.flat()));
    Ok(Delta {
        delta,
        kernel,
        magnitude,
    })
}

/// The bracket with an explicit kernel tolerance.
pub fn lie_bracket_tol(v: &VectorField, w: &VectorField, kernel_tol: f64) -> Result<VectorField> {
    same_domain(&v.on, &w.on)?;
    let (a, b) = (v.clone(), w.clone());
    Ok(VectorField::new(
        format!("[{}, {}]", v.name, w.name),
        v.on.clone(),
        move |x| {
            let d = bracket_delta(&a, &b, x)?;
            let bound = kernel_tol * (1.0 + d.magnitude);
            if !(d.kernel <= bound) {
                return Err(Error::KernelViolation {
                    residual: d.kernel,
                    bound,
                });
            }
            Ok(d.delta.block_towers(0b11))
        },
    ))
}

/// `[v, w]`: the field with `delta(v, w) = lambda_2 (w, [v, w])`.
pub fn lie_bracket(v: &VectorField, w: &VectorField) -> Result<VectorField> {
    lie_bracket_tol(v, w, tolerance::KERNEL)
}

/// `v . f = eta . Tf . v`.
pub fn act_on_function(v: &VectorField, f: &ScalarField) -> Result<ScalarField> {
    same_domain(&v.on, &f.on)?;
    let (v, f) = (v.clone(), f.clone());
    Ok(ScalarField::new(
        format!("{} . {}", v.name, f.name),
        v.on.clone(),
        move |x| {
            let p = v.section_over(x)?;
            let mut fx = f.eval(p.coords())?;
            if fx.order() < p.inner() + 1 {
                fx = fx.embed(p.inner() + 1)?;
            }
            let image = TanPoint::from_coords(1, vec![fx])?;
            eta_fiber_tower(&image)
        },
    ))
}

/// `Dw v - Dv w` from first-order jets: the coordinate bracket formula.
pub fn coordinate_bracket(v: &VectorField, w: &VectorField, x: &[f64]) -> Result<Vec<f64>> {
    let jvp = |f: &VectorField, dir: &[f64]| -> Result<Vec<f64>> {
        let p = TanPoint::vector(x, dir)?;
        Ok(TanPoint::from_coords(1, f.eval(p.coords())?)?.block(1))
    };
    let (vx, wx) = (v.fiber_at(x)?, w.fiber_at(x)?);
    let (dw_v, dv_w) = (jvp(w, &vx)?, jvp(v, &wx)?);
    Ok(dw_v.iter().zip(&dv_w).map(|(a, b)| a - b).collect())
}

/// The same formula with central differences of step `h` along the fields.
pub fn fd_bracket(v: &VectorField, w: &VectorField, x: &[f64], h: f64) -> Result<Vec<f64>> {
    // Five-point central stencil with steps of length h along the unit direction.
    let dir = |f: &VectorField, along: &[f64]| -> Result<Vec<f64>> {
        let norm = along.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let shift = |s: f64| {
            x.iter()
                .zip(along)
                .map(|(a, b)| a + s * h * b / norm)
                .collect::<Vec<_>>()
        };
        let at = [
            f.fiber_at(&shift(2.0))?,
            f.fiber_at(&shift(1.0))?,
            f.fiber_at(&shift(-1.0))?,
            f.fiber_at(&shift(-2.0))?,
        ];
        Ok((0..x.len())
            .map(|i| norm * (8.0 * (at[1][i] - at[2][i]) - (at[0][i] - at[3][i])) / (12.0 * h))
            .collect())
    };
    let (vx, wx) = (v.fiber_at(x)?, w.fiber_at(x)?);
    let (dw_v, dv_w) = (dir(w, &vx)?, dir(v, &wx)?);
    Ok(dw_v.iter().zip(&dv_w).map(|(a, b)| a - b).collect())
}

fn vsum(terms: &[&[f64]]) -> Vec<f64> {
    (0..terms[0].len())
        .map(|i| terms.iter().map(|t| t[i]).sum())
        .collect()
}

fn pick<'a, T>(rng: &mut Rng, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

/// Antisymmetry, bilinearity, Jacobi, Leibniz, kernel and coordinate
/// agreement of the bracket, plus the derivation laws of `v . f`.
pub fn check_bracket_laws(
    fields: &[VectorField],
    functions: &[ScalarField],
    config: &SuiteConfig,
) -> Report {
    let on = match fields.first() {
        Some(v) => v.on.clone(),
        None => return Report::new("bracket", config, Vec::new()),
    };
    let mismatch = fields
        .iter()
        .map(|v| &v.on)
        .chain(functions.iter().map(|f| &f.on))
        .find(|d| ***d != *on)
        .map(|d| Error::DomainMismatch(on.name.clone(), d.name.clone()));
    if let Some(e) = mismatch {
        let row = failed_row("precondition", "fields share a domain", 0.0, e.to_string());
        return Report::new("bracket", config, vec![row]);
    }
    let fallback = [ScalarField::constant(on.clone(), 1.0)];
    let functions = if functions.is_empty() {
        &fallback[..]
    } else {
        functions
    };
    let dom = on.clone();
    let sample = move |rng: &mut Rng| dom.sample(rng);

    let mut checks = Vec::new();
    let s = sample.clone();
    checks.push(Check::new(
        "bracket.antisymmetry",
        "[v, w] = -[w, v]",
        EXACT,
        move |rng: &mut Rng, _| {
            let (v, w) = (pick(rng, fields), pick(rng, fields));
            let x = s(rng)?;
            let vw = lie_bracket(v, w)?.fiber_at(&x)?;
            let wv: Vec<f64> = lie_bracket(w, v)?
                .fiber_at(&x)?
                .iter()
                .map(|t| -t)
                .collect();
            Ok(rel_residual(&vw, &wv))
        },
    ));
    let s = sample.clone();
    checks.push(Check::new(
        "bracket.bilinearity",
        "[a u + b v, w] = a [u, w] + b [v, w]",
        EXACT,
        move |rng: &mut Rng, _| {
            let (u, v, w) = (pick(rng, fields), pick(rng, fields), pick(rng, fields));
            let (a, b) = (uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0));
            let x = s(rng)?;
            let comb = u.scale(a).add(&v.scale(b))?;
            let left = lie_bracket(&comb, w)?.fiber_at(&x)?;
            let (uw, vw) = (
                lie_bracket(u, w)?.fiber_at(&x)?,
                lie_bracket(v, w)?.fiber_at(&x)?,
            );
            let rhs: Vec<f64> = uw.iter().zip(&vw).map(|(p, q)| a * p + b * q).collect();
            let right = lie_bracket(w, &comb)?.fiber_at(&x)?;
            let (wu, wv) = (
                lie_bracket(w, u)?.fiber_at(&x)?,
                lie_bracket(w, v)?.fiber_at(&x)?,
            );
            let rhs2: Vec<f64> = wu.iter().zip(&wv).map(|(p, q)| a * p + b * q).collect();
            Ok(rel_residual(&left, &rhs).max(rel_residual(&right, &rhs2)))
        },
    ));
    let s = sample.clone();
    checks.push(Check::new(
        "bracket.jacobi",
        "[[u, v], w] + [[v, w], u] + [[w, u], v] = 0",
        1e-8,
        move |rng: &mut Rng, _| {
            let (u, v, w) = (pick(rng, fields), pick(rng, fields), pick(rng, fields));
            let x = s(rng)?;
            let t1 = lie_bracket(&lie_bracket(u, v)?, w)?.fiber_at(&x)?;
            let t2 = lie_bracket(&lie_bracket(v, w)?, u)?.fiber_at(&x)?;
            let t3 = lie_bracket(&lie_bracket(w, u)?, v)?.fiber_at(&x)?;
            let scale = sup_norm(&t1).max(sup_norm(&t2)).max(sup_norm(&t3));
            Ok(scaled(sup_norm(&vsum(&[&t1, &t2, &t3])), scale))
        },
    ));
    let s = sample.clone();
    checks.push(Check::new(
        "bracket.leibniz",
        "[v, f w] = (v . f) w + f [v, w]",
        EXACT,
        move |rng: &mut Rng, _| {
            let (v, w, f) = (pick(rng, fields), pick(rng, fields), pick(rng, functions));
            let x = s(rng)?;
            let lhs = lie_bracket(v, &w.times(f)?)?.fiber_at(&x)?;
            let vf = act_on_function(v, f)?.value_at(&x)?;
            let fx = f.value_at(&x)?;
            let (wx, vw) = (w.fiber_at(&x)?, lie_bracket(v, w)?.fiber_at(&x)?);
            let rhs: Vec<f64> = wx.iter().zip(&vw).map(|(a, b)| vf * a + fx * b).collect();
            Ok(rel_residual(&lhs, &rhs))
        },
    ));
    let s = sample.clone();
    checks.push(Check::new(
        "bracket.kernel",
        "T pi . delta(v, w) = 0",
        tolerance::KERNEL,
        move |rng: &mut Rng, _| {
            let (v, w) = (pick(rng, fields), pick(rng, fields));
            let x = s(rng)?;
            Ok(bracket_delta(v, w, &towers(&x))?.kernel_ratio())
        },
    ));
    let s = sample.clone();
    checks.push(Check::new(
        "bracket.coordinate_ad",
        "[v, w] = Dw v - Dv w (jets)",
        1e-10,
        move |rng: &mut Rng, _| {
            let (v, w) = (pick(rng, fields), pick(rng, fields));
            let x = s(rng)?;
            Ok(rel_residual(
                &lie_bracket(v, w)?.fiber_at(&x)?,
                &coordinate_bracket(v, w, &x)?,
            ))
        },
    ));
    let s = sample.clone();
    checks.push(Check::new(
        "bracket.coordinate_fd",
        "[v, w] = Dw v - Dv w (central differences)",
        tolerance::FINITE_DIFFERENCE,
        move |rng: &mut Rng, _| {
            let (v, w) = (pick(rng, fields), pick(rng, fields));
            let x = s(rng)?;
            Ok(rel_residual(
                &lie_bracket(v, w)?.fiber_at(&x)?,
                &fd_bracket(v, w, &x, tolerance::FD_STEP)?,
            ))
        },
    ));
    let s = sample.clone();
    checks.push(Check::new(
        "derivation.additive_function",
        "v . (f + g) = v . f + v . g",
        EXACT,
        move |rng: &mut Rng, _| {
            let (v, f, g) = (
                pick(rng, fields),
                pick(rng, functions),
                pick(rng, functions),
            );
            let x = s(rng)?;
            let lhs = act_on_function(v, &f.add(g)?)?.value_at(&x)?;
            let rhs = act_on_function(v, f)?.value_at(&x)? + act_on_function(v, g)?.value_at(&x)?;
            Ok(rel_residual(&[lhs], &[rhs]))
        },
    ));
    let s = sample.clone();
    checks.push(Check::new(
        "derivation.additive_field",
        "(v + w) . f = v . f + w . f",
        EXACT,
        move |rng: &mut Rng, _| {
            let (v, w, f) = (pick(rng, fields), pick(rng, fields), pick(rng, functions));
            let x = s(rng)?;
            let lhs = act_on_function(&v.add(w)?, f)?.value_at(&x)?;
            let rhs = act_on_function(v, f)?.value_at(&x)? + act_on_function(w, f)?.value_at(&x)?;
            Ok(rel_residual(&[lhs], &[rhs]))
        },
    ));
    let s = sample.clone();
    checks.push(Check::new(
        "derivation.commutator",
        "[v, w] . f = v . (w . f) - w . (v . f)",
        EXACT,
        move |rng: &mut Rng, _| {
            let (v, w, f) = (pick(rng, fields), pick(rng, fields), pick(rng, functions));
            let x = s(rng)?;
            let lhs = act_on_function(&lie_bracket(v, w)?, f)?.value_at(&x)?;
            let vwf = act_on_function(v, &act_on_function(w, f)?)?.value_at(&x)?;
            let wvf = act_on_function(w, &act_on_function(v, f)?)?.value_at(&x)?;
            Ok(scaled(
                (lhs - vwf + wvf).abs(),
                lhs.abs().max(vwf.abs()).max(wvf.abs()),
            ))
        },
    ));
    let s = sample;
    checks.push(Check::new(
        "derivation.product",
        "v . (f g) = (v . f) g + f (v . g)",
        EXACT,
        move |rng: &mut Rng, _| {
            let (v, f, g) = (
                pick(rng, fields),
                pick(rng, functions),
                pick(rng, functions),
            );
            let x = s(rng)?;
            let lhs = act_on_function(v, &f.mul(g)?)?.value_at(&x)?;
            let (vf, vg) = (
                act_on_function(v, f)?.value_at(&x)?,
                act_on_function(v, g)?.value_at(&x)?,
            );
            let rhs = vf * g.value_at(&x)? + f.value_at(&x)? * vg;
            Ok(rel_residual(&[lhs], &[rhs]))
        },
    ));
    Report::new("bracket", config, run_checks(config, checks))
}

/// Fields, functions and the map relating them.
pub struct Related<'a> {
    pub phi: &'a SmoothMap,
    pub v: &'a VectorField,
    pub v2: &'a VectorField,
    pub w: &'a VectorField,
    pub w2: &'a VectorField,
    /// A function on the codomain; its pullback is used on the domain.
    pub f2: &'a ScalarField,
}

/// `T phi . v(x)` fiber.
fn push(phi: &SmoothMap, v: &VectorField, x: &[f64]) -> Result<Vec<f64>> {
    Ok(apply_tn(phi, &v.at(x)?)?.block(1))
}

fn related_residual(phi: &SmoothMap, v: &VectorField, v2: &VectorField, x: &[f64]) -> Result<f64> {
    let y = phi.eval_f64(x)?;
    Ok(rel_residual(&push(phi, v, x)?, &v2.fiber_at(&y)?))
}

/// Relatedness of brackets, sums, scalings and actions, after checking that
/// the inputs are related at all.
pub fn check_related(r: &Related<'_>, config: &SuiteConfig) -> Report {
    let tol = 1e-8;
    let dom = r.phi.dom.clone();
    let pre = (|| -> Result<()> {
        same_domain(&r.v.on, &dom)?;
        same_domain(&r.w.on, &dom)?;
        same_domain(&r.v2.on, &r.phi.cod)?;
        same_domain(&r.w2.on, &r.phi.cod)?;
        let mut rng = crate::report::substream(config.seed, "related.precondition");
        for _ in 0..config.samples {
            let x = dom.sample(&mut rng)?;
            for (a, b, label) in [(r.v, r.v2, "v"), (r.w, r.w2, "w")] {
                let e = related_residual(r.phi, a, b, &x)?;
                if !(e < config.tol(tol)) {
                    return Err(Error::Refused(format!(
                        "{label} is not phi-related to {label}' (residual {e:e})"
                    )));
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = pre {
        let row = failed_row(
            "related.precondition",
            "v ~ v', w ~ w' under phi",
            config.tol(tol),
            format!("precondition: {e}"),
        );
        return Report::new("related", config, vec![row]);
    }
    let f = match r.f2.pullback(r.phi) {
        Ok(f) => f,
        Err(e) => {
            let row = failed_row(
                "related.precondition",
                "f = f' . phi",
                config.tol(tol),
                format!("precondition: {e}"),
            );
            return Report::new("related", config, vec![row]);
        }
    };
    let (phi, v, v2, w, w2, f2) = (r.phi, r.v, r.v2, r.w, r.w2, r.f2);
    let f = &f;
    let d1 = dom.clone();
    let d2 = dom.clone();
    let d3 = dom.clone();
    let d4 = dom.clone();
    let d5 = dom;
    let checks = vec![
        Check::new(
            "related.bracket",
            "T phi . [v, w] = [v', w'] . phi",
            tol,
            move |rng: &mut Rng, _| {
                let x = d1.sample(rng)?;
                related_residual(phi, &lie_bracket(v, w)?, &lie_bracket(v2, w2)?, &x)
            },
        ),
        Check::new(
            "related.sum",
            "T phi . (v + w) = (v' + w') . phi",
            tol,
            move |rng: &mut Rng, _| {
                let x = d2.sample(rng)?;
                related_residual(phi, &v.add(w)?, &v2.add(w2)?, &x)
            },
        ),
        Check::new(
            "related.scaled",
            "T phi . f v = f' v' . phi",
            tol,
            move |rng: &mut Rng, _| {
                let x = d3.sample(rng)?;
                related_residual(phi, &v.times(f)?, &v2.times(f2)?, &x)
            },
        ),
        Check::new(
            "related.constant",
            "T phi . r v = r v' . phi",
            tol,
            move |rng: &mut Rng, _| {
                let x = d4.sample(rng)?;
                let c = uniform(rng, -2.0, 2.0);
                related_residual(phi, &v.scale(c), &v2.scale(c), &x)
            },
        ),
        Check::new(
            "related.action",
            "v . (f' . phi) = (v' . f') . phi",
            tol,
            move |rng: &mut Rng, _| {
                let x = d5.sample(rng)?;
                let lhs = act_on_function(v, f)?.value_at(&x)?;
                let rhs = act_on_function(v2, f2)?.value_at(&phi.eval_f64(&x)?)?;
                Ok(rel_residual(&[lhs], &[rhs]))
            },
        ),
    ];
    Report::new("related", config, run_checks(config, checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Term;

    fn plane() -> Arc<Domain> {
        Arc::new(Domain::euclidean(2, 2.0))
    }

    fn field(on: &Arc<Domain>, outs: &[Term]) -> VectorField {
        VectorField::from_expr("v", on.clone(), Expr::from_terms(on.dim, outs).unwrap()).unwrap()
    }

    #[test]
    fn rotation_against_translation() {
        let on = plane();
        let (x, y) = (Term::var(0), Term::var(1));
        let v = field(&on, &[-&y, x.clone()]);
        let w = field(&on, &[Term::c(1.0), Term::c(0.0)]);
        let b = lie_bracket(&v, &w).unwrap();
        for p in [[0.3, -0.7], [1.5, 0.2]] {
            let got = b.fiber_at(&p).unwrap();
            assert!(rel_residual(&got, &[0.0, -1.0]) < 1e-12);
            assert!(rel_residual(&fd_bracket(&v, &w, &p, 1e-4).unwrap(), &[0.0, -1.0]) < 1e-8);
        }
        let vv = lie_bracket(&v, &v).unwrap().fiber_at(&[0.4, 0.9]).unwrap();
        assert_eq!(sup_norm(&vv), 0.0);
    }

    #[test]
    fn euler_against_translation_on_the_line() {
        let on = Arc::new(Domain::euclidean(1, 2.0));
        let v = field(&on, &[Term::var(0)]);
        let w = field(&on, &[Term::c(1.0)]);
        let got = lie_bracket(&v, &w).unwrap().fiber_at(&[0.8]).unwrap();
        assert!((got[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn action_examples() {
        let on = Arc::new(Domain::euclidean(1, 5.0));
        let x = Term::var(0);
        let dx = field(&on, &[Term::c(1.0)]);
        let sq =
            ScalarField::from_expr("x^2", on.clone(), Expr::from_terms(1, &[&x * &x]).unwrap())
                .unwrap();
        assert!((act_on_function(&dx, &sq).unwrap().value_at(&[3.0]).unwrap() - 6.0).abs() < 1e-14);
        let zero = VectorField::zero(on.clone());
        assert_eq!(
            act_on_function(&zero, &sq)
                .unwrap()
                .value_at(&[3.0])
                .unwrap(),
            0.0
        );
        let euler = field(&on, std::slice::from_ref(&x));
        let log =
            ScalarField::from_expr("log", on.clone(), Expr::from_terms(1, &[x.ln()]).unwrap())
                .unwrap();
        assert!(
            (act_on_function(&euler, &log)
                .unwrap()
                .value_at(&[2.0])
                .unwrap()
                - 1.0)
                .abs()
                < 1e-14
        );
    }

    #[test]
    fn field_algebra_examples() {
        let on = Arc::new(Domain::euclidean(1, 10.0));
        let x = Term::var(0);
        let v = field(&on, &[x.sin()]);
        let z = VectorField::zero(on.clone());
        assert_eq!(
            v.add(&z).unwrap().fiber_at(&[0.7]).unwrap(),
            v.fiber_at(&[0.7]).unwrap()
        );
        let fx = ScalarField::from_expr(
            "x",
            on.clone(),
            Expr::from_terms(1, std::slice::from_ref(&x)).unwrap(),
        )
        .unwrap();
        let dx = field(&on, &[Term::c(1.0)]);
        assert_eq!(dx.times(&fx).unwrap().fiber_at(&[5.0]).unwrap(), vec![5.0]);
        let five = v
            .scale(2.0)
            .add(&v.scale(3.0))
            .unwrap()
            .fiber_at(&[0.7])
            .unwrap();
        assert!(rel_residual(&five, &v.scale(5.0).fiber_at(&[0.7]).unwrap()) < 1e-15);
    }

    #[test]
    fn bracket_fields_are_differentiable() {
        let on = plane();
        let (x, y) = (Term::var(0), Term::var(1));
        let v = field(&on, &[&x * &y, y.sin()]);
        let w = field(&on, &[x.cos(), &x * &x]);
        let b = lie_bracket(&v, &w).unwrap();
        let p = [0.4, -0.3];
        let jets = TanPoint::vector(&p, &[1.0, 0.5]).unwrap();
        let lifted = TanPoint::from_coords(1, b.eval(jets.coords()).unwrap()).unwrap();
        assert!(rel_residual(&lifted.block(0), &b.fiber_at(&p).unwrap()) < 1e-15);
        let fd = fd_bracket(&v, &w, &p, 1e-4).unwrap();
        assert!(rel_residual(&b.fiber_at(&p).unwrap(), &fd) < 1e-7);
    }

    #[test]
    fn kernel_violation_is_reported() {
        let on = plane();
        let v = field(&on, &[Term::c(1.0), Term::c(0.0)]);
        let bad = VectorField::new("bad", on.clone(), |x: &[Tower]| {
            x.iter()
                .map(|t| Tower::constant(t.order(), t.coeffs().iter().sum()))
                .collect::<Result<Vec<_>>>()
        });
        let err = lie_bracket(&v, &bad).unwrap().fiber_at(&[0.1, 0.2]);
        assert!(
            matches!(
                err,
                Err(Error::KernelViolation { .. }) | Err(Error::FiberMismatch(_))
            ),
            "{err:?}"
        );
    }

    #[test]
    fn zero_fields_give_exact_zeros() {
        let on = plane();
        let z = VectorField::zero(on.clone());
        let f = ScalarField::constant(on.clone(), 1.0);
        let r = check_bracket_laws(
            &[z.clone(), z],
            &[f],
            &SuiteConfig {
                samples: 20,
                ..SuiteConfig::default()
            },
        );
        assert!(r.passed());
        assert!(
            r.checks.iter().all(|c| c.max_residual == Some(0.0)),
            "{r:?}"
        );
    }
}
