//! Small dense 2-tensors and forward-mode dual numbers.
//!
//! Constitutive laws are written once against [`Scalar`] and evaluated either
//! with plain `f64` or with [`Dual`] to obtain exact derivatives.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub type Vec2 = [f64; 2];
/// Row-major 2x2 matrix; for gradients `m[i][j] = d u_i / d x_j`.
pub type Mat2 = [[f64; 2]; 2];

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn re(&self) -> f64;
    fn ln(self) -> Self;
    fn powf(self, e: f64) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::cst(1.0),
            1 => self,
            2 => self * self,
            3 => self * self * self,
            _ => self.powf(n as f64),
        }
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
}

/// Dual number carrying `N` directional derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub eps: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(re: f64) -> Self {
        Self { re, eps: [0.0; N] }
    }

    /// Independent variable seeded in direction `k`.
    pub fn variable(re: f64, k: usize) -> Self {
        let mut eps = [0.0; N];
        eps[k] = 1.0;
        Self { re, eps }
    }

    fn chain(self, f: f64, df: f64) -> Self {
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e *= df;
        }
        Self { re: f, eps }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.re += o.re;
        for (a, b) in self.eps.iter_mut().zip(o.eps) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> AddAssign for Dual<N> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        self.re -= o.re;
        for (a, b) in self.eps.iter_mut().zip(o.eps) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut eps = [0.0; N];
        for k in 0..N {
            eps[k] = self.eps[k] * o.re + self.re * o.eps[k];
        }
        Self { re: self.re * o.re, eps }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        let re = self.re * inv;
        let mut eps = [0.0; N];
        for k in 0..N {
            eps[k] = (self.eps[k] - re * o.eps[k]) * inv;
        }
        Self { re, eps }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.chain(-self.re, -1.0)
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    fn add(mut self, o: f64) -> Self {
        self.re += o;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    fn sub(mut self, o: f64) -> Self {
        self.re -= o;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        self.chain(self.re * o, o)
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        self.chain(self.re / o, 1.0 / o)
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn re(&self) -> f64 {
        self.re
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re)
    }
    fn powf(self, e: f64) -> Self {
        self.chain(self.re.powf(e), e * self.re.powf(e - 1.0))
    }
}

/// Generic 2x2 helpers.
pub type M2<T> = [[T; 2]; 2];

pub fn m_zero<T: Scalar>() -> M2<T> {
    [[T::zero(); 2]; 2]
}

pub fn m_identity<T: Scalar>() -> M2<T> {
    [[T::cst(1.0), T::zero()], [T::zero(), T::cst(1.0)]]
}

pub fn m_mul<T: Scalar>(a: &M2<T>, b: &M2<T>) -> M2<T> {
    let mut c = m_zero();
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn m_transpose<T: Scalar>(a: &M2<T>) -> M2<T> {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn m_det<T: Scalar>(a: &M2<T>) -> T {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn m_trace<T: Scalar>(a: &M2<T>) -> T {
    a[0][0] + a[1][1]
}

pub fn m_inverse<T: Scalar>(a: &M2<T>) -> M2<T> {
    let d = m_det(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

pub fn m_add<T: Scalar>(a: &M2<T>, b: &M2<T>) -> M2<T> {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn m_scale<T: Scalar>(a: &M2<T>, s: T) -> M2<T> {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

/// Frobenius product `a : b`.
pub fn m_ddot<T: Scalar>(a: &M2<T>, b: &M2<T>) -> T {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub fn m_vec(a: &Mat2, v: &Vec2) -> Vec2 {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

pub fn to_real<T: Scalar>(a: &M2<T>) -> Mat2 {
    [[a[0][0].re(), a[0][1].re()], [a[1][0].re(), a[1][1].re()]]
}

pub fn lift<T: Scalar>(a: &Mat2) -> M2<T> {
    [
        [T::cst(a[0][0]), T::cst(a[0][1])],
        [T::cst(a[1][0]), T::cst(a[1][1])],
    ]
}

pub fn dot(a: &Vec2, b: &Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: &Vec2) -> f64 {
    dot(a, a).sqrt()
}
