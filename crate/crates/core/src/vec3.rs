use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<F>(pub [F; 3]);

impl<F: Real> Vec3<F> {
    #[inline]
    pub fn new(x: F, y: F, z: F) -> Self {
        Self([x, y, z])
    }

    #[inline]
    pub fn zero() -> Self {
        Self([F::zero(); 3])
    }

    #[inline]
    pub fn x(&self) -> F {
        self.0[0]
    }
    #[inline]
    pub fn y(&self) -> F {
        self.0[1]
    }
    #[inline]
    pub fn z(&self) -> F {
        self.0[2]
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> F {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Self([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }

    #[inline]
    pub fn norm(&self) -> F {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn normalized(&self) -> Self {
        *self * (F::one() / self.norm())
    }

    pub fn cast<G: Real>(&self) -> Vec3<G> {
        Vec3(self.0.map(|v| G::lit(v.as_f64())))
    }
}

impl<F: Real> Add for Vec3<F> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<F: Real> AddAssign for Vec3<F> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.0[0] += o.0[0];
        self.0[1] += o.0[1];
        self.0[2] += o.0[2];
    }
}

impl<F: Real> Sub for Vec3<F> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<F: Real> Mul<F> for Vec3<F> {
    type Output = Self;
    #[inline]
    fn mul(self, s: F) -> Self {
        Self([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl<F: Real> Neg for Vec3<F> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<F> Index<usize> for Vec3<F> {
    type Output = F;
    #[inline]
    fn index(&self, i: usize) -> &F {
        &self.0[i]
    }
}

impl<F> IndexMut<usize> for Vec3<F> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut F {
        &mut self.0[i]
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<F>(pub [[F; 3]; 3]);

impl<F: Real> Mat3<F> {
    pub fn identity() -> Self {
        let (o, z) = (F::one(), F::zero());
        Self([[o, z, z], [z, o, z], [z, z, o]])
    }

    /// Builds a matrix whose columns are `a`, `b`, `c`.
    pub fn from_columns(a: Vec3<F>, b: Vec3<F>, c: Vec3<F>) -> Self {
        Self([[a[0], b[0], c[0]], [a[1], b[1], c[1]], [a[2], b[2], c[2]]])
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vec3<F>) -> Vec3<F> {
        let m = &self.0;
        Vec3([
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ])
    }

    #[inline]
    pub fn transpose_mul_vec(&self, v: &Vec3<F>) -> Vec3<F> {
        let m = &self.0;
        Vec3([
            m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
            m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
            m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
        ])
    }

    pub fn determinant(&self) -> F {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn cast<G: Real>(&self) -> Mat3<G> {
        Mat3(self.0.map(|r| r.map(|v| G::lit(v.as_f64()))))
    }
}

impl<F: Serialize> Serialize for Vec3<F> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de, F: Deserialize<'de>> Deserialize<'de> for Vec3<F> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        <[F; 3]>::deserialize(d).map(Vec3)
    }
}
