//! Lagrange shape functions of degree 1..=3 on the reference triangle.
//!
//! Local node order: the three vertices, then `k - 1` nodes on each local
//! edge `i` (opposite vertex `i`, running from vertex `i+1` to vertex `i+2`),
//! then interior nodes.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use super::quadrature::Quadrature;
use crate::error::{Error, Result};
use crate::mesh::local_edge;
use crate::tensor::Mat2;

#[derive(Clone, Debug)]
pub struct LagrangeElement {
    pub degree: usize,
    pub nodes: Vec<[f64; 2]>,
    monomials: Vec<(i32, i32)>,
    /// `coef[m * n + i]`: coefficient of monomial `m` in basis function `i`.
    coef: Vec<f64>,
}

/// Shape functions tabulated at the points of a reference rule.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
    pub hessians: Vec<Vec<Mat2>>,
}

pub fn n_nodes(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

pub fn reference_vertices() -> [[f64; 2]; 3] {
    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
}

fn reference_nodes(k: usize) -> Vec<[f64; 2]> {
    let v = reference_vertices();
    let mut nodes = v.to_vec();
    for i in 0..3 {
        let (a, b) = local_edge(i);
        for j in 1..k {
            let t = j as f64 / k as f64;
            nodes.push([
                v[a][0] + t * (v[b][0] - v[a][0]),
                v[a][1] + t * (v[b][1] - v[a][1]),
            ]);
        }
    }
    if k == 3 {
        nodes.push([1.0 / 3.0, 1.0 / 3.0]);
    }
    nodes
}

fn powi(x: f64, n: i32) -> f64 {
    if n < 0 {
        0.0
    } else {
        x.powi(n)
    }
}

impl LagrangeElement {
    fn build(k: usize) -> Self {
        let nodes = reference_nodes(k);
        let mut monomials = Vec::new();
        for d in 0..=k as i32 {
            for b in 0..=d {
                monomials.push((d - b, b));
            }
        }
        let n = nodes.len();
        let v = DMatrix::from_fn(n, n, |i, m| {
            let (a, b) = monomials[m];
            nodes[i][0].powi(a) * nodes[i][1].powi(b)
        });
        let inv = v.try_inverse().expect("Lagrange nodes are unisolvent");
        let mut coef = vec![0.0; n * n];
        for m in 0..n {
            for i in 0..n {
                coef[m * n + i] = inv[(m, i)];
            }
        }
        Self {
            degree: k,
            nodes,
            monomials,
            coef,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn combine<const D: usize>(&self, mono: impl Fn(i32, i32) -> [f64; D]) -> Vec<[f64; D]> {
        let n = self.n_nodes();
        let mut out = vec![[0.0; D]; n];
        for (m, &(a, b)) in self.monomials.iter().enumerate() {
            let val = mono(a, b);
            if val.iter().all(|v| *v == 0.0) {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                let c = self.coef[m * n + i];
                for d in 0..D {
                    o[d] += c * val[d];
                }
            }
        }
        out
    }

    pub fn values(&self, xi: &[f64; 2]) -> Vec<f64> {
        let (x, y) = (xi[0], xi[1]);
        self.combine(|a, b| [powi(x, a) * powi(y, b)])
            .into_iter()
            .map(|v| v[0])
            .collect()
    }

    pub fn grads(&self, xi: &[f64; 2]) -> Vec<[f64; 2]> {
        let (x, y) = (xi[0], xi[1]);
        self.combine(|a, b| {
            [
                a as f64 * powi(x, a - 1) * powi(y, b),
                b as f64 * powi(x, a) * powi(y, b - 1),
            ]
        })
    }

    pub fn hessians(&self, xi: &[f64; 2]) -> Vec<Mat2> {
        let (x, y) = (xi[0], xi[1]);
        self.combine(|a, b| {
            let (af, bf) = (a as f64, b as f64);
            let xx = af * (af - 1.0) * powi(x, a - 2) * powi(y, b);
            let xy = af * bf * powi(x, a - 1) * powi(y, b - 1);
            let yy = bf * (bf - 1.0) * powi(x, a) * powi(y, b - 2);
            [xx, xy, yy]
        })
        .into_iter()
        .map(|h| [[h[0], h[1]], [h[1], h[2]]])
        .collect()
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> Tabulation {
        Tabulation {
            values: points.iter().map(|p| self.values(p)).collect(),
            grads: points.iter().map(|p| self.grads(p)).collect(),
            hessians: points.iter().map(|p| self.hessians(p)).collect(),
        }
    }

    pub fn tabulate_rule(&self, rule: &Quadrature) -> Tabulation {
        self.tabulate(&rule.points)
    }
}

/// Shared element of the given degree.
pub fn element(degree: usize) -> Result<&'static LagrangeElement> {
    static CACHE: [OnceLock<LagrangeElement>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    match degree {
        1..=3 => Ok(CACHE[degree - 1].get_or_init(|| LagrangeElement::build(degree))),
        _ => Err(Error::UnsupportedDegree(degree)),
    }
}
