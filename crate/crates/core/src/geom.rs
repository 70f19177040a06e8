//! Dimension tag, points and integer Fourier indices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Spatial dimension of the problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn new(n: usize) -> Result<Self> {
        match n {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            other => Err(Error::InvalidDimension(other)),
        }
    }

    #[inline]
    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }
}

impl TryFrom<usize> for Dim {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Dim::new(n)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.n()
    }
}

/// A point (or vector) in R^2 or R^3. Unused trailing components are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point<T> {
    dim: Dim,
    c: [T; 3],
}

impl<T: Real> Point<T> {
    pub fn new(coords: &[T]) -> Result<Self> {
        let dim = Dim::new(coords.len())?;
        let mut c = [T::zero(); 3];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Point { dim, c })
    }

    pub fn xy(x: T, y: T) -> Self {
        Point {
            dim: Dim::Two,
            c: [x, y, T::zero()],
        }
    }

    pub fn xyz(x: T, y: T, z: T) -> Self {
        Point {
            dim: Dim::Three,
            c: [x, y, z],
        }
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.c[..self.dim.n()]
    }

    /// Vertical (interface-normal) component.
    #[inline]
    pub fn last(&self) -> T {
        self.c[self.dim.n() - 1]
    }

    #[inline]
    pub fn dot(&self, other: &Point<T>) -> T {
        self.coords()
            .iter()
            .zip(other.coords())
            .fold(T::zero(), |acc, (a, b)| acc + *a * *b)
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        let mut c = self.c;
        for v in c.iter_mut() {
            *v = *v * s;
        }
        Point { dim: self.dim, c }
    }

    /// Reflection across the interface: negates the last coordinate.
    pub fn mirror(&self) -> Self {
        let mut c = self.c;
        let k = self.dim.n() - 1;
        c[k] = -c[k];
        Point { dim: self.dim, c }
    }
}

impl<T> std::ops::Index<usize> for Point<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.c[i]
    }
}

/// An integer Fourier index `l` in Z^2 or Z^3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Index {
    dim: Dim,
    c: [i32; 3],
}

impl Index {
    pub fn new(comps: &[i32]) -> Result<Self> {
        let dim = Dim::new(comps.len())?;
        let mut c = [0; 3];
        c[..comps.len()].copy_from_slice(comps);
        Ok(Index { dim, c })
    }

    pub fn zero(dim: Dim) -> Self {
        Index { dim, c: [0; 3] }
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    #[inline]
    pub fn comps(&self) -> &[i32] {
        &self.c[..self.dim.n()]
    }

    #[inline]
    pub fn last(&self) -> i32 {
        self.c[self.dim.n() - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.c == [0; 3]
    }

    pub fn neg(&self) -> Self {
        Index {
            dim: self.dim,
            c: [-self.c[0], -self.c[1], -self.c[2]],
        }
    }

    pub fn max_norm(&self) -> u32 {
        self.comps().iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }

    /// Squared Euclidean norm; identifies the frequency shell of the index.
    pub fn norm_sq(&self) -> i64 {
        self.comps().iter().map(|&v| (v as i64) * (v as i64)).sum()
    }

    /// Squared norm of the horizontal part (all but the last component).
    pub fn horizontal_norm_sq(&self) -> i64 {
        let n = self.dim.n();
        self.c[..n - 1].iter().map(|&v| (v as i64) * (v as i64)).sum()
    }

    /// Every index with `|l|_inf <= order`, in lexicographic order.
    pub fn cube(dim: Dim, order: i32) -> Vec<Index> {
        let r = -order..=order;
        match dim {
            Dim::Two => r
                .clone()
                .flat_map(|a| r.clone().map(move |b| Index { dim, c: [a, b, 0] }))
                .collect(),
            Dim::Three => r
                .clone()
                .flat_map(|a| {
                    let r = r.clone();
                    r.clone()
                        .flat_map(move |b| r.clone().map(move |c| Index { dim, c: [a, b, c] }))
                })
                .collect(),
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.comps().iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}
