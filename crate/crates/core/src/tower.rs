//! Truncated nilpotent scalars `R[e_1..e_n]/(e_i^2)`.
//!
//! A [`Tower`] of order `n` stores `2^n` coefficients indexed by bitmask:
//! bit `i - 1` set in the mask means the monomial contains `e_i`. Index 1 is
//! the innermost tangent direction; each further application of the tangent
//! functor adds the next index on the outside.
//!
//! Evaluating a program over towers of order `n` computes its `n`-fold
//! tangent lift.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Largest supported order. Nested algebroid brackets need five stacked
/// directions on top of a plain point; one more is kept spare.
pub const MAX_ORDER: usize = 6;

type Coeffs = SmallVec<[f64; 8]>;

#[derive(Clone, PartialEq)]
pub struct Tower {
    order: usize,
    coeffs: Coeffs,
}

/// Unary primitives that can be lifted to towers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Recip,
    PowInt(i32),
}

impl Unary {
    pub fn name(self) -> &'static str {
        match self {
            Unary::Exp => "exp",
            Unary::Log => "log",
            Unary::Sin => "sin",
            Unary::Cos => "cos",
            Unary::Sqrt => "sqrt",
            Unary::Recip => "recip",
            Unary::PowInt(_) => "pow_int",
        }
    }

    /// Normalized Taylor coefficients `g^(k)(x) / k!` for `k = 0..=n`.
    fn taylor(self, x: f64, n: usize) -> Result<[f64; MAX_ORDER + 1]> {
        let mut c = [0.0; MAX_ORDER + 1];
        let domain = |ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Domain {
                    prim: self.name(),
                    value: x,
                })
            }
        };
        match self {
            Unary::Exp => {
                let e = x.exp();
                let mut fact = 1.0;
                for (k, ck) in c.iter_mut().enumerate().take(n + 1) {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    *ck = e / fact;
                }
            }
            Unary::Sin | Unary::Cos => {
                let (s, co) = x.sin_cos();
                let cycle = if self == Unary::Sin {
                    [s, co, -s, -co]
                } else {
                    [co, -s, -co, s]
                };
                let mut fact = 1.0;
                for (k, ck) in c.iter_mut().enumerate().take(n + 1) {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    *ck = cycle[k % 4] / fact;
                }
            }
            Unary::Log => {
                domain(x > 0.0)?;
                c[0] = x.ln();
                for (k, ck) in c.iter_mut().enumerate().take(n + 1).skip(1) {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    *ck = sign / (k as f64 * x.powi(k as i32));
                }
            }
            Unary::Sqrt => {
                domain(x > 0.0)?;
                binomial_series(0.5, x, n, &mut c);
            }
            Unary::Recip => {
                domain(x != 0.0)?;
                binomial_series(-1.0, x, n, &mut c);
            }
            Unary::PowInt(p) => {
                if p < 0 {
                    domain(x != 0.0)?;
                }
                if p >= 0 {
                    // exact integer powers; coefficients vanish past degree p
                    let mut binom = 1.0;
                    for (k, ck) in c.iter_mut().enumerate().take(n + 1) {
                        if k as i32 > p {
                            break;
                        }
                        if k > 0 {
                            binom *= (p - k as i32 + 1) as f64 / k as f64;
                        }
                        *ck = binom * x.powi(p - k as i32);
                    }
                } else {
                    binomial_series(p as f64, x, n, &mut c);
                }
            }
        }
        Ok(c)
    }
}

fn binomial_series(alpha: f64, x: f64, n: usize, c: &mut [f64; MAX_ORDER + 1]) {
    let mut binom = 1.0;
    for (k, ck) in c.iter_mut().enumerate().take(n + 1) {
        if k > 0 {
            binom *= (alpha - (k as f64 - 1.0)) / k as f64;
        }
        *ck = binom * x.powf(alpha - k as f64);
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        Err(Error::OrderTooLarge(order))
    } else {
        Ok(())
    }
}

impl Tower {
    pub fn new(order: usize, coeffs: &[f64]) -> Result<Self> {
        check_order(order)?;
        if coeffs.len() != 1 << order {
            return Err(Error::Dim {
                expected: 1 << order,
                got: coeffs.len(),
            });
        }
        Ok(Tower {
            order,
            coeffs: coeffs.iter().copied().collect(),
        })
    }

    pub fn zero(order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Tower {
            order,
            coeffs: SmallVec::from_elem(0.0, 1 << order),
        })
    }

    pub fn constant(order: usize, value: f64) -> Result<Self> {
        let mut t = Self::zero(order)?;
        t.coeffs[0] = value;
        Ok(t)
    }

    /// Order-0 tower holding a plain real.
    pub fn real(value: f64) -> Self {
        Tower {
            order: 0,
            coeffs: SmallVec::from_elem(value, 1),
        }
    }

    /// `value + e_index`, the seed for differentiating along one direction.
    pub fn variable(order: usize, value: f64, index: usize) -> Result<Self> {
        let mut t = Self::constant(order, value)?;
        if index == 0 || index > order {
            return Err(Error::Level {
                level: index,
                order,
            });
        }
        t.coeffs[1 << (index - 1)] = 1.0;
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: usize) -> f64 {
        self.coeffs[mask]
    }

    pub(crate) fn set(&mut self, mask: usize, value: f64) {
        self.coeffs[mask] = value;
    }

    /// The coefficient of the empty monomial.
    pub fn base(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn same_order(&self, other: &Tower) -> Result<()> {
        if self.order == other.order {
            Ok(())
        } else {
            Err(Error::OrderMismatch(self.order, other.order))
        }
    }

    pub fn try_add(&self, other: &Tower) -> Result<Tower> {
        self.same_order(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Tower) -> Result<Tower> {
        self.same_order(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    /// Truncated product: subset convolution over disjoint index sets.
    pub fn try_mul(&self, other: &Tower) -> Result<Tower> {
        self.same_order(other)?;
        let len = self.coeffs.len();
        let mut out: Coeffs = SmallVec::from_elem(0.0, len);
        for (s, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut t = s;
            loop {
                acc += self.coeffs[t] * other.coeffs[s ^ t];
                if t == 0 {
                    break;
                }
                t = (t - 1) & s;
            }
            *slot = acc;
        }
        Ok(Tower {
            order: self.order,
            coeffs: out,
        })
    }

    pub fn try_div(&self, other: &Tower) -> Result<Tower> {
        self.try_mul(&other.lift(Unary::Recip)?)
    }

    pub fn scale(&self, r: f64) -> Tower {
        Tower {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * r).collect(),
        }
    }

    fn zip(&self, other: &Tower, f: impl Fn(f64, f64) -> f64) -> Tower {
        Tower {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    /// Applies a unary primitive via its Taylor expansion at the base value.
    pub fn lift(&self, prim: Unary) -> Result<Tower> {
        let n = self.order;
        let c = prim.taylor(self.base(), n)?;
        let mut nil = self.clone();
        nil.coeffs[0] = 0.0;
        let mut acc = Tower::constant(n, c[n])?;
        for k in (0..n).rev() {
            acc = acc.try_mul(&nil)?;
            acc.coeffs[0] += c[k];
        }
        Ok(acc)
    }

    /// Integer power; negative exponents need a nonzero base.
    pub fn powi(&self, p: i32) -> Result<Tower> {
        self.lift(Unary::PowInt(p))
    }

    /// Same element viewed at a higher order; the new indices sit outside.
    pub fn embed(&self, order: usize) -> Result<Tower> {
        check_order(order)?;
        if order < self.order {
            return Err(Error::OrderMismatch(self.order, order));
        }
        let mut out = Tower::zero(order)?;
        out.coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        Ok(out)
    }

    /// Rebuilds the tower at `order`, sending each source mask through `map`;
    /// masks mapped to `None` are dropped. Targets left unset are zero.
    pub fn remap(&self, order: usize, map: impl Fn(usize) -> Option<usize>) -> Result<Tower> {
        let mut out = Tower::zero(order)?;
        for (mask, c) in self.coeffs.iter().enumerate() {
            if let Some(target) = map(mask) {
                out.coeffs[target] += *c;
            }
        }
        Ok(out)
    }

    /// The part of the tower whose monomials avoid `bit`, with `bit` removed.
    pub fn without_index(&self, bit: usize) -> Result<Tower> {
        debug_assert!(bit < self.order);
        self.remap(self.order - 1, |m| {
            (m & (1 << bit) == 0).then(|| squeeze(m, bit))
        })
    }

    /// Coefficient of `e_{bit+1}`, as a tower with that index removed.
    pub fn along_index(&self, bit: usize) -> Result<Tower> {
        debug_assert!(bit < self.order);
        self.remap(self.order - 1, |m| {
            (m & (1 << bit) != 0).then(|| squeeze(m, bit))
        })
    }
}

/// Removes `bit` from `mask`, shifting higher bits down by one.
pub(crate) fn squeeze(mask: usize, bit: usize) -> usize {
    let low = mask & ((1 << bit) - 1);
    let high = mask >> (bit + 1);
    low | (high << bit)
}

/// Opens a zero slot at `bit`, shifting higher bits up by one.
pub(crate) fn spread(mask: usize, bit: usize) -> usize {
    let low = mask & ((1 << bit) - 1);
    let high = mask >> bit;
    low | (high << (bit + 1))
}

impl fmt::Debug for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.coeffs[0])?;
        for (i, c) in self.coeffs.iter().enumerate().skip(1) {
            write!(f, "{}{}", if i == 1 { "; " } else { ", " }, c)?;
        }
        write!(f, ")")
    }
}

macro_rules! panicking_op {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl $tr<&Tower> for &Tower {
            type Output = Tower;
            fn $method(self, rhs: &Tower) -> Tower {
                self.$checked(rhs)
                    .expect("tower operands must share an order")
            }
        }
    };
}

panicking_op!(Add, add, try_add);
panicking_op!(Sub, sub, try_sub);
panicking_op!(Mul, mul, try_mul);

impl Neg for &Tower {
    type Output = Tower;
    fn neg(self) -> Tower {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(order: usize, c: &[f64]) -> Tower {
        Tower::new(order, c).unwrap()
    }

    /// Multiplies by expanding both operands into explicit monomial lists.
    fn brute_mul(a: &Tower, b: &Tower) -> Vec<f64> {
        let len = a.coeffs().len();
        let mut out = vec![0.0; len];
        for i in 0..len {
            for j in 0..len {
                if i & j == 0 {
                    out[i | j] += a.coeff(i) * b.coeff(j);
                }
            }
        }
        out
    }

    #[test]
    fn mul_examples() {
        assert_eq!(
            (&t(1, &[3.0, 1.0]) * &t(1, &[2.0, 5.0])).coeffs(),
            &[6.0, 17.0]
        );
        let a = t(2, &[1.0, 1.0, 1.0, 0.0]);
        let expected = brute_mul(&a, &a);
        assert_eq!(expected, vec![1.0, 2.0, 2.0, 2.0]);
        assert_eq!((&a * &a).coeffs(), expected.as_slice());
        assert_eq!((&Tower::real(4.0) * &Tower::real(5.0)).coeffs(), &[20.0]);
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let err = t(1, &[1.0, 0.0])
            .try_mul(&t(2, &[1.0, 0.0, 0.0, 0.0]))
            .unwrap_err();
        assert_eq!(err, Error::OrderMismatch(1, 2));
        assert!(Tower::zero(MAX_ORDER + 1).is_err());
        assert!(Tower::new(2, &[1.0]).is_err());
    }

    #[test]
    fn lift_examples() {
        let e = t(1, &[0.0, 1.0]).lift(Unary::Exp).unwrap();
        assert_eq!(e.coeffs(), &[1.0, 1.0]);

        // sin(u + e1 + e2) = sin u + cos u (e1 + e2) - sin u e1 e2; at u = 0
        let s = t(2, &[0.0, 1.0, 1.0, 0.0]).lift(Unary::Sin).unwrap();
        assert_eq!(s.coeffs(), &[0.0, 1.0, 1.0, 0.0]);

        for base in [0.0, -1.0] {
            let err = t(1, &[base, 1.0]).lift(Unary::Sqrt).unwrap_err();
            assert!(matches!(err, Error::Domain { prim: "sqrt", .. }));
        }
        assert!(t(0, &[0.0]).lift(Unary::Log).is_err());
        assert!(t(0, &[0.0]).lift(Unary::Recip).is_err());
        assert!(t(0, &[0.0]).powi(-2).is_err());
    }

    #[test]
    fn taylor_lift_matches_repeated_products() {
        // x^3 at order 3 via Taylor vs via two products
        let x = t(3, &[0.7, 1.0, -0.5, 0.25, 2.0, 0.1, -0.3, 0.9]);
        let cube = x.powi(3).unwrap();
        let prod = &(&x * &x) * &x;
        for (a, b) in cube.coeffs().iter().zip(prod.coeffs()) {
            assert!((a - b).abs() < 1e-14, "{cube} vs {prod}");
        }
        // 1/x times x is one
        let one = &x.lift(Unary::Recip).unwrap() * &x;
        assert!((one.base() - 1.0).abs() < 1e-15);
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
        // sqrt(x)^2 = x, exp(log x) = x
        let s = x.lift(Unary::Sqrt).unwrap();
        let back = &s * &s;
        let el = x.lift(Unary::Log).unwrap().lift(Unary::Exp).unwrap();
        for i in 0..8 {
            assert!((back.coeff(i) - x.coeff(i)).abs() < 1e-12);
            assert!((el.coeff(i) - x.coeff(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn index_surgery() {
        // (u, u1, u2, u12) = (1, 2, 3, 4)
        let p = t(2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.without_index(1).unwrap().coeffs(), &[1.0, 2.0]);
        assert_eq!(p.without_index(0).unwrap().coeffs(), &[1.0, 3.0]);
        assert_eq!(p.along_index(1).unwrap().coeffs(), &[3.0, 4.0]);
        assert_eq!(
            p.embed(3).unwrap().coeffs(),
            &[1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0]
        );
        for m in 0..16 {
            for b in 0..4 {
                assert_eq!(squeeze(spread(m, b), b), m);
            }
        }
    }
}
