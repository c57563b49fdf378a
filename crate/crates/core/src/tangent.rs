//! Points of iterated tangent bundles and the natural transformations of the
//! Euclidean tangent structure.
//!
//! A [`TanPoint`] of order `n` over a `d`-dimensional chart stores `d`
//! towers. Its own tangent indices `1..=n` occupy the top `n` tower indices;
//! anything below them (the *inner* order) belongs to a caller that is
//! itself differentiating, which is how brackets and sections stay
//! order-polymorphic. Block `S` of the point is the coefficient of
//! `prod_{j in S} e_j` and is itself a tower of the inner order.
//!
//! Transformations take a `level`: level `j` acts on own index `j`. Level
//! `order` is the outermost direction (`alpha T`-style), level 1 the
//! innermost (`T alpha`-style). For order 2 this gives
//! `pi_{TU}(u, u1, u2, u12) = (u, u1)` at level 2 and
//! `T pi_U(...) = (u, u2)` at level 1.

use crate::domain::SmoothMap;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::tolerance::{self, rel_residual};
use crate::tower::{spread, squeeze, Tower, MAX_ORDER};

#[derive(Clone, Debug, PartialEq)]
pub struct TanPoint {
    order: usize,
    inner: usize,
    coords: Vec<Tower>,
}

/// Which factor of a product domain a partial tangent differentiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    First,
    Second,
}

impl TanPoint {
    /// Builds a point from real blocks indexed by subset bitmask.
    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<TanPoint> {
        let order = blocks.len().trailing_zeros() as usize;
        if blocks.is_empty() || blocks.len() != 1 << order {
            return Err(Error::Dim {
                expected: 1 << order,
                got: blocks.len(),
            });
        }
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge(order));
        }
        let dim = blocks[0].len();
        if let Some(b) = blocks.iter().find(|b| b.len() != dim) {
            return Err(Error::Dim {
                expected: dim,
                got: b.len(),
            });
        }
        let coords = (0..dim)
            .map(|i| {
                let c: Vec<f64> = blocks.iter().map(|b| b[i]).collect();
                Tower::new(order, &c)
            })
            .collect::<Result<_>>()?;
        Ok(TanPoint {
            order,
            inner: 0,
            coords,
        })
    }

    /// Wraps towers whose top `order` indices are this point's own.
    pub fn from_coords(order: usize, coords: Vec<Tower>) -> Result<TanPoint> {
        let total = coords.first().map_or(order, Tower::order);
        if let Some(c) = coords.iter().find(|c| c.order() != total) {
            return Err(Error::OrderMismatch(total, c.order()));
        }
        if order > total {
            return Err(Error::Level {
                level: order,
                order: total,
            });
        }
        Ok(TanPoint {
            order,
            inner: total - order,
            coords,
        })
    }

    pub fn base_point(x: &[f64]) -> TanPoint {
        TanPoint {
            order: 0,
            inner: 0,
            coords: x.iter().map(|&v| Tower::real(v)).collect(),
        }
    }

    /// The order-1 point `(x; v)`.
    pub fn vector(x: &[f64], v: &[f64]) -> Result<TanPoint> {
        TanPoint::from_blocks(&[x.to_vec(), v.to_vec()])
    }

    /// Order-1 point with inner towers `x` and fiber towers `v`.
    pub fn vector_over(x: &[Tower], v: &[Tower]) -> Result<TanPoint> {
        if x.len() != v.len() {
            return Err(Error::Dim {
                expected: x.len(),
                got: v.len(),
            });
        }
        let coords = x
            .iter()
            .zip(v)
            .map(|(a, b)| {
                let m = a.order();
                if b.order() != m {
                    return Err(Error::OrderMismatch(m, b.order()));
                }
                let mut c = a.embed(m + 1)?;
                for (mask, &coef) in b.coeffs().iter().enumerate() {
                    c.set(mask | (1 << m), coef);
                }
                Ok(c)
            })
            .collect::<Result<_>>()?;
        Ok(TanPoint {
            order: 1,
            inner: x.first().map_or(0, Tower::order),
            coords,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn inner(&self) -> usize {
        self.inner
    }

    pub fn coords(&self) -> &[Tower] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<Tower> {
        self.coords
    }

    fn bit(&self, level: usize) -> usize {
        self.inner + level - 1
    }

    fn own_mask(&self, mask: usize) -> usize {
        mask << self.inner
    }

    /// Block `mask` (bits over own indices), as inner-order towers.
    pub fn block_towers(&self, mask: usize) -> Vec<Tower> {
        let inner_len = 1usize << self.inner;
        let shift = self.own_mask(mask);
        self.coords
            .iter()
            .map(|c| {
                let coeffs: Vec<f64> = (0..inner_len).map(|i| c.coeff(shift | i)).collect();
                Tower::new(self.inner, &coeffs).expect("inner order is in range")
            })
            .collect()
    }

    /// Block `mask` as reals (the inner-base coefficient).
    pub fn block(&self, mask: usize) -> Vec<f64> {
        let shift = self.own_mask(mask);
        self.coords.iter().map(|c| c.coeff(shift)).collect()
    }

    pub fn blocks(&self) -> Vec<Vec<f64>> {
        (0..1 << self.order).map(|m| self.block(m)).collect()
    }

    /// The underlying point of the chart.
    pub fn base(&self) -> Vec<f64> {
        self.coords.iter().map(Tower::base).collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.coords
            .iter()
            .flat_map(|c| c.coeffs().iter().copied())
            .collect()
    }

    pub fn residual(&self, other: &TanPoint) -> f64 {
        if self.dim() != other.dim() || self.order != other.order || self.inner != other.inner {
            return f64::INFINITY;
        }
        rel_residual(&self.flat(), &other.flat())
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.order {
            Err(Error::Level {
                level,
                order: self.order,
            })
        } else {
            Ok(())
        }
    }

    fn map_coords(&self, order: usize, f: impl Fn(&Tower) -> Result<Tower>) -> Result<TanPoint> {
        let coords = self.coords.iter().map(f).collect::<Result<_>>()?;
        Ok(TanPoint {
            order,
            inner: self.inner,
            coords,
        })
    }

    fn same_shape(&self, other: &TanPoint) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dim {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if self.order != other.order || self.inner != other.inner {
            return Err(Error::OrderMismatch(
                self.order + self.inner,
                other.order + other.inner,
            ));
        }
        Ok(())
    }

    /// Bundle projection along own index `level`.
    pub fn proj(&self, level: usize) -> Result<TanPoint> {
        self.check_level(level)?;
        let bit = self.bit(level);
        self.map_coords(self.order - 1, |c| c.without_index(bit))
    }

    /// Iterated zero section: `k` new outermost indices, all blocks zero.
    pub fn zero_lift(&self, k: usize) -> Result<TanPoint> {
        let total = self.inner + self.order + k;
        self.map_coords(self.order + k, |c| c.embed(total))
    }

    /// Zero section inserted at own index `level` (`T^{level-1} 0 T^{...}`).
    pub fn zero_at(&self, level: usize) -> Result<TanPoint> {
        if level == 0 || level > self.order + 1 {
            return Err(Error::Level {
                level,
                order: self.order + 1,
            });
        }
        let bit = self.bit(level);
        let total = self.inner + self.order + 1;
        self.map_coords(self.order + 1, |c| c.remap(total, |m| Some(spread(m, bit))))
    }

    /// Blocks not containing `level` must agree; blocks containing it combine.
    fn fiber_combine(&self, other: &TanPoint, level: usize, sign: f64) -> Result<TanPoint> {
        self.same_shape(other)?;
        self.check_level(level)?;
        let bit = self.bit(level);
        let shared = |p: &TanPoint| -> Result<Vec<f64>> {
            Ok(p.coords
                .iter()
                .map(|c| c.without_index(bit))
                .collect::<Result<Vec<_>>>()?
                .iter()
                .flat_map(|t| t.coeffs().to_vec())
                .collect())
        };
        let mismatch = rel_residual(&shared(self)?, &shared(other)?);
        if !(mismatch <= tolerance::FIBER_MATCH) {
            return Err(Error::FiberMismatch(mismatch));
        }
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| {
                let mut c = a.clone();
                for mask in (0..a.coeffs().len()).filter(|m| m & (1 << bit) != 0) {
                    c.set(mask, a.coeff(mask) + sign * b.coeff(mask));
                }
                c
            })
            .collect();
        Ok(TanPoint {
            order: self.order,
            inner: self.inner,
            coords,
        })
    }

    /// Fiber sum over the projection along `level`.
    pub fn add_at(&self, other: &TanPoint, level: usize) -> Result<TanPoint> {
        self.fiber_combine(other, level, 1.0)
    }

    pub fn sub_at(&self, other: &TanPoint, level: usize) -> Result<TanPoint> {
        self.fiber_combine(other, level, -1.0)
    }

    /// Fiber sum along the outermost index.
    pub fn add_fiber(&self, other: &TanPoint) -> Result<TanPoint> {
        self.add_at(other, self.order.max(1))
    }

    pub fn sub_fiber(&self, other: &TanPoint) -> Result<TanPoint> {
        self.sub_at(other, self.order.max(1))
    }

    /// Fiberwise negation along `level`.
    pub fn neg_at(&self, level: usize) -> Result<TanPoint> {
        self.scalar_kappa(-1.0, level)
    }

    /// Exchanges own indices `j` and `j + 1`.
    pub fn swap_tau(&self, j: usize) -> Result<TanPoint> {
        if j == 0 || j + 1 > self.order {
            return Err(Error::Level {
                level: j + 1,
                order: self.order,
            });
        }
        let (a, b) = (self.bit(j), self.bit(j + 1));
        let total = self.inner + self.order;
        self.map_coords(self.order, |c| {
            c.remap(total, |m| {
                let (x, y) = ((m >> a) & 1, (m >> b) & 1);
                Some((m & !((1 << a) | (1 << b))) | (y << a) | (x << b))
            })
        })
    }

    /// Vertical lift `lambda: T -> T^2` on an order-1 point.
    pub fn vlift_lambda(&self) -> Result<TanPoint> {
        if self.order != 1 {
            return Err(Error::Level {
                level: 1,
                order: self.order,
            });
        }
        self.vlift_at(1)
    }

    /// Vertical lift at own index `level`: that index becomes the pair
    /// `{level, level + 1}` and later indices move up by one.
    pub fn vlift_at(&self, level: usize) -> Result<TanPoint> {
        self.check_level(level)?;
        let bit = self.bit(level);
        let total = self.inner + self.order + 1;
        self.map_coords(self.order + 1, |c| {
            c.remap(total, |m| {
                let opened = spread(m, bit + 1);
                Some(if m & (1 << bit) != 0 {
                    opened | (1 << (bit + 1))
                } else {
                    opened
                })
            })
        })
    }

    /// `lambda_2(u, w, v) = (u, w, 0, v)` for two order-1 points over one base.
    pub fn vlift_lambda2(w: &TanPoint, v: &TanPoint) -> Result<TanPoint> {
        if w.order != 1 {
            return Err(Error::Level {
                level: 1,
                order: w.order,
            });
        }
        w.same_shape(v)?;
        let shared = rel_residual(&w.proj(1)?.flat(), &v.proj(1)?.flat());
        if !(shared <= tolerance::FIBER_MATCH) {
            return Err(Error::FiberMismatch(shared));
        }
        let bit = w.inner;
        let coords = w
            .coords
            .iter()
            .zip(&v.coords)
            .map(|(a, b)| {
                let mut c = a.embed(bit + 2)?;
                for mask in (0..b.coeffs().len()).filter(|m| m & (1 << bit) != 0) {
                    c.set(mask | (1 << (bit + 1)), b.coeff(mask));
                }
                Ok(c)
            })
            .collect::<Result<_>>()?;
        Ok(TanPoint {
            order: 2,
            inner: w.inner,
            coords,
        })
    }

    /// Left inverse of [`TanPoint::vlift_lambda2`]: blocks `{1}` and `{1,2}`.
    pub fn lambda2_retract(&self) -> Result<(TanPoint, TanPoint)> {
        if self.order != 2 {
            return Err(Error::Level {
                level: 2,
                order: self.order,
            });
        }
        let (a, b) = (self.bit(1), self.bit(2));
        let w = self.proj(2)?;
        let v = self.map_coords(1, |c| {
            c.remap(self.inner + 1, |m| {
                let (x, y) = (m & (1 << a) != 0, m & (1 << b) != 0);
                (x == y).then(|| squeeze(m, b))
            })
        })?;
        Ok((w, v))
    }

    /// Scalar multiplication by `r` on every block containing `level`.
    pub fn scalar_kappa(&self, r: f64, level: usize) -> Result<TanPoint> {
        self.check_level(level)?;
        let bit = self.bit(level);
        self.map_coords(self.order, |c| {
            let mut out = c.clone();
            for mask in (0..c.coeffs().len()).filter(|m| m & (1 << bit) != 0) {
                out.set(mask, r * c.coeff(mask));
            }
            Ok(out)
        })
    }

    /// Reads `T^n X` as `T^{n-1}(TX)`: own index 1 becomes chart coordinates
    /// `(u, u_1)` of a space of twice the dimension.
    pub fn peel_inner(&self) -> Result<TanPoint> {
        self.check_level(1)?;
        let bit = self.bit(1);
        let base: Vec<Tower> = self
            .coords
            .iter()
            .map(|c| c.without_index(bit))
            .collect::<Result<_>>()?;
        let fiber: Vec<Tower> = self
            .coords
            .iter()
            .map(|c| c.along_index(bit))
            .collect::<Result<_>>()?;
        Ok(TanPoint {
            order: self.order - 1,
            inner: self.inner,
            coords: [base, fiber].concat(),
        })
    }

    /// Inverse of [`TanPoint::peel_inner`].
    pub fn unpeel_inner(&self) -> Result<TanPoint> {
        if !self.dim().is_multiple_of(2) {
            return Err(Error::Dim {
                expected: self.dim() + 1,
                got: self.dim(),
            });
        }
        let d = self.dim() / 2;
        let bit = self.inner;
        let total = self.inner + self.order + 1;
        let coords = (0..d)
            .map(|i| {
                let base = self.coords[i].remap(total, |m| Some(spread(m, bit)))?;
                let fiber =
                    self.coords[d + i].remap(total, |m| Some(spread(m, bit) | (1 << bit)))?;
                base.try_add(&fiber)
            })
            .collect::<Result<_>>()?;
        Ok(TanPoint {
            order: self.order + 1,
            inner: self.inner,
            coords,
        })
    }

    /// Concatenates two points of the same order: the `chi` isomorphism.
    pub fn pair(a: &TanPoint, b: &TanPoint) -> Result<TanPoint> {
        if a.order != b.order || a.inner != b.inner {
            return Err(Error::OrderMismatch(a.order + a.inner, b.order + b.inner));
        }
        Ok(TanPoint {
            order: a.order,
            inner: a.inner,
            coords: [a.coords.clone(), b.coords.clone()].concat(),
        })
    }

    /// Coordinates `range` as a point of the same order.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TanPoint {
        TanPoint {
            order: self.order,
            inner: self.inner,
            coords: self.coords[range].to_vec(),
        }
    }
}

/// `T^n` of an expression at a point, with no domain check.
pub fn apply_expr(e: &Expr, p: &TanPoint) -> Result<TanPoint> {
    if e.inputs() != p.dim() {
        return Err(Error::Dim {
            expected: e.inputs(),
            got: p.dim(),
        });
    }
    let coords = e.eval_at(p.inner + p.order, &p.coords)?;
    Ok(TanPoint {
        order: p.order,
        inner: p.inner,
        coords,
    })
}

/// `T^n f (p)`.
pub fn apply_tn(f: &SmoothMap, p: &TanPoint) -> Result<TanPoint> {
    if p.dim() != f.dom.dim {
        return Err(Error::Dim {
            expected: f.dom.dim,
            got: p.dim(),
        });
    }
    if !f.dom.contains(&p.base()) {
        return Err(Error::OutsideDomain(f.dom.name.clone()));
    }
    apply_expr(&f.body, p)
}

/// Partial tangent along one factor of a product domain: the other factor's
/// tangent components are zeroed before applying `T f`.
pub fn partial_tangent(f: &SmoothMap, slot: Slot, p: &TanPoint) -> Result<TanPoint> {
    let (d1, _) = f
        .dom
        .split
        .ok_or_else(|| Error::NoSplit(f.dom.name.clone()))?;
    if p.order != 1 {
        return Err(Error::Level {
            level: 1,
            order: p.order,
        });
    }
    if p.dim() != f.dom.dim {
        return Err(Error::Dim {
            expected: f.dom.dim,
            got: p.dim(),
        });
    }
    let bit = p.bit(1);
    let frozen = match slot {
        Slot::First => d1..p.dim(),
        Slot::Second => 0..d1,
    };
    let mut q = p.clone();
    for i in frozen {
        let c = &p.coords[i];
        q.coords[i] = c.remap(c.order(), |m| (m & (1 << bit) == 0).then_some(m))?;
    }
    apply_tn(f, &q)
}

/// `eta_R`: the fiber component of a tangent vector to the scalar line.
pub fn eta_fiber(p: &TanPoint) -> Result<f64> {
    Ok(eta_fiber_tower(p)?.base())
}

/// Order-polymorphic `eta_R`, returning an inner-order tower.
pub fn eta_fiber_tower(p: &TanPoint) -> Result<Tower> {
    if p.dim() != 1 {
        return Err(Error::Dim {
            expected: 1,
            got: p.dim(),
        });
    }
    if p.order != 1 {
        return Err(Error::Level {
            level: 1,
            order: p.order,
        });
    }
    Ok(p.block_towers(1).remove(0))
}
