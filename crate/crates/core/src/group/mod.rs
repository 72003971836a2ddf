//! Carnot groups in exponential coordinates of the first kind.
//!
//! A point is identified with the algebra element `Σ x_i X_i`; the group law
//! is the Baker–Campbell–Hausdorff series, which terminates at the step of the
//! algebra and is therefore exact here:
//!
//! ```text
//! x·y = x + y + ½[x,y] + (1/12)([x,[x,y]] − [y,[x,y]]) − (1/24)[y,[x,[x,y]]]
//! ```

mod builtin;
pub mod file;
mod interval;
mod schema;

use serde::{Deserialize, Serialize};

pub use builtin::{abelian, builtin_schema, engel, free_step2, heisenberg};
pub use interval::{Interval, Scalar};
pub use schema::{parse_rational, BracketRule, GroupSchema, StructureConstant, MAX_STEP};

use crate::error::{Error, Result};

/// Group element in canonical coordinates of the first kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

/// Lie algebra element in the graded basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlgebraVector(Vec<f64>);

macro_rules! coordinate_newtype {
    ($t:ident) => {
        impl $t {
            pub fn new(coords: Vec<f64>) -> Self {
                Self(coords)
            }

            pub fn zeros(n: usize) -> Self {
                Self(vec![0.0; n])
            }

            pub fn coords(&self) -> &[f64] {
                &self.0
            }

            pub fn coords_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }
        }

        impl From<Vec<f64>> for $t {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }

        impl std::ops::Index<usize> for $t {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

coordinate_newtype!(Point);
coordinate_newtype!(AlgebraVector);

impl AlgebraVector {
    /// True iff every coordinate outside the first `n1` vanishes.
    pub fn is_horizontal(&self, n1: usize) -> bool {
        self.0[n1..].iter().all(|&v| v == 0.0)
    }
}

#[derive(Clone, Copy, Debug)]
struct BracketTerm {
    i: usize,
    j: usize,
    k: usize,
    c: f64,
}

/// A validated Carnot group with its structure constants unpacked for
/// floating-point evaluation. Immutable and cheap to share across threads.
#[derive(Clone, Debug)]
pub struct Group {
    schema: GroupSchema,
    terms: Vec<BracketTerm>,
    n1: usize,
}

impl Group {
    pub fn new(schema: GroupSchema) -> Result<Self> {
        schema.validate()?;
        let mut terms = Vec::new();
        for c in &schema.structure_constants {
            if c.i < c.j {
                let v = *c.value.numer() as f64 / *c.value.denom() as f64;
                if v != 0.0 {
                    terms.push(BracketTerm { i: c.i, j: c.j, k: c.k, c: v });
                }
            }
        }
        terms.sort_by_key(|t| (t.k, t.i, t.j));
        let n1 = schema.strata_dims[0];
        Ok(Self { schema, terms, n1 })
    }

    pub fn builtin(name: &str) -> Result<Self> {
        Self::new(builtin_schema(name)?)
    }

    pub fn schema(&self) -> &GroupSchema {
        &self.schema
    }

    pub fn name(&self) -> &str {
        &self.schema.name
    }

    pub fn dim(&self) -> usize {
        self.schema.dim()
    }

    /// Dimension of the horizontal (first) stratum.
    pub fn horizontal_dim(&self) -> usize {
        self.n1
    }

    pub fn step(&self) -> usize {
        self.schema.step()
    }

    pub fn homogeneous_dim(&self) -> usize {
        self.schema.homogeneous_dim()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.schema.degrees
    }

    pub fn origin(&self) -> Point {
        Point::zeros(self.dim())
    }

    /// Checks dimension and finiteness before wrapping coordinates.
    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        self.check_dim(coords.len())?;
        if let Some(v) = coords.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("point coordinate {v}")));
        }
        Ok(Point(coords))
    }

    pub fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), got })
        }
    }

    pub fn check_horizontal_index(&self, j: usize) -> Result<()> {
        if j < self.n1 {
            Ok(())
        } else {
            Err(Error::NotHorizontal { j, n1: self.n1 })
        }
    }

    /// `[u, v]` from the structure constants, written into a fresh vector.
    pub fn bracket_generic<T: Scalar>(&self, u: &[T], v: &[T]) -> Vec<T> {
        let mut out = vec![T::constant(0.0); u.len()];
        for t in &self.terms {
            out[t.k] = out[t.k] + T::constant(t.c) * (u[t.i] * v[t.j] - u[t.j] * v[t.i]);
        }
        out
    }

    /// BCH product evaluated over any [`Scalar`] (reals or intervals).
    pub fn product_generic<T: Scalar>(&self, x: &[T], y: &[T]) -> Vec<T> {
        let step = self.step();
        let mut z: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a + b).collect();
        if step < 2 {
            return z;
        }
        let xy = self.bracket_generic(x, y);
        let half = T::constant(0.5);
        for (zi, &b) in z.iter_mut().zip(&xy) {
            *zi = *zi + half * b;
        }
        if step < 3 {
            return z;
        }
        let x_xy = self.bracket_generic(x, &xy);
        let y_xy = self.bracket_generic(y, &xy);
        let twelfth = T::constant(1.0 / 12.0);
        for i in 0..z.len() {
            z[i] = z[i] + twelfth * (x_xy[i] - y_xy[i]);
        }
        if step < 4 {
            return z;
        }
        let y_x_xy = self.bracket_generic(y, &x_xy);
        let c = T::constant(1.0 / 24.0);
        for i in 0..z.len() {
            z[i] = z[i] - c * y_x_xy[i];
        }
        z
    }

    /// Unchecked product on raw coordinate slices.
    #[inline]
    pub fn product(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.product_generic(x, y)
    }

    pub fn mul(&self, x: &Point, y: &Point) -> Result<Point> {
        self.check_dim(x.dim())?;
        self.check_dim(y.dim())?;
        Ok(Point(self.product(&x.0, &y.0)))
    }

    /// `exp(V)⁻¹ = exp(−V)`.
    pub fn inverse(&self, x: &Point) -> Point {
        Point(x.0.iter().map(|v| -v).collect())
    }

    pub fn dilate_raw(&self, lambda: f64, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.schema.degrees).map(|(&v, &d)| lambda.powi(d as i32) * v).collect()
    }

    pub fn dilate(&self, lambda: f64, x: &Point) -> Result<Point> {
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveDilation(lambda));
        }
        self.check_dim(x.dim())?;
        Ok(Point(self.dilate_raw(lambda, &x.0)))
    }

    pub fn bracket(&self, u: &AlgebraVector, v: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_dim(u.dim())?;
        self.check_dim(v.dim())?;
        Ok(AlgebraVector(self.bracket_generic(&u.0, &v.0)))
    }

    /// `exp(t X_j)`.
    pub fn exp_axis(&self, j: usize, t: f64) -> Point {
        let mut p = self.origin();
        p.0[j] = t;
        p
    }

    /// Coordinates of the left-invariant field generated by `v`, evaluated at
    /// `x`: the derivative of `x·exp(tv)` at `t = 0`. The series
    /// `v + ½[x,v] + (1/12)[x,[x,v]]` is exact up to step 4.
    pub fn left_invariant_field(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        if self.step() < 2 {
            return out;
        }
        let xv = self.bracket_generic(x, v);
        for (o, b) in out.iter_mut().zip(&xv) {
            *o += 0.5 * b;
        }
        if self.step() >= 3 {
            let xxv = self.bracket_generic(x, &xv);
            for (o, b) in out.iter_mut().zip(&xxv) {
                *o += b / 12.0;
            }
        }
        out
    }
}
