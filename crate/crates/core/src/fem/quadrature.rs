//! Quadrature on the reference triangle `{x, y >= 0, x + y <= 1}` and on `[0, 1]`.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Quadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Rule on the reference triangle exact for total degree `order` (at most 8).
/// Weights sum to 1/2.
pub fn triangle(order: usize) -> Result<Quadrature> {
    match order {
        0 | 1 => Ok(Quadrature {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        }),
        2 => Ok(Quadrature {
            points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            weights: vec![1.0 / 6.0; 3],
        }),
        3..=5 => Ok(radon7()),
        6..=8 => Ok(collapsed_gauss(order / 2 + 1)),
        _ => Err(Error::UnsupportedQuadrature(order)),
    }
}

/// Radon's seven-point rule, degree 5.
fn radon7() -> Quadrature {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 2400.0;
    let w2 = (155.0 + s15) / 2400.0;
    let b1 = 1.0 - 2.0 * a1;
    let b2 = 1.0 - 2.0 * a2;
    Quadrature {
        points: vec![
            [1.0 / 3.0, 1.0 / 3.0],
            [a1, a1],
            [b1, a1],
            [a1, b1],
            [a2, a2],
            [b2, a2],
            [a2, b2],
        ],
        weights: vec![9.0 / 80.0, w1, w1, w1, w2, w2, w2],
    }
}

/// Tensor Gauss rule mapped by the Duffy transform `x = u, y = v (1 - u)`.
fn collapsed_gauss(n: usize) -> Quadrature {
    let (t, w) = gauss_legendre(n + 1);
    let (s, ws) = gauss_legendre(n);
    let mut points = Vec::with_capacity(t.len() * s.len());
    let mut weights = Vec::with_capacity(t.len() * s.len());
    for (u, wu) in t.iter().zip(&w) {
        for (v, wv) in s.iter().zip(&ws) {
            points.push([*u, v * (1.0 - u)]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    Quadrature { points, weights }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Gauss rule on `[0, 1]` exact for degree `order`.
pub fn line(order: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(order / 2 + 1)
}
