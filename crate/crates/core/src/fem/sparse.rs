//! Compressed sparse row matrices, Dirichlet elimination and direct solves.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Default::default()
        }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        Self {
            n,
            rows: Vec::with_capacity(nnz),
            cols: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.rows.push(i);
        self.cols.push(j);
        self.vals.push(v);
    }

    /// Adds a dense row-major block.
    pub fn add_block(&mut self, dofs: &[usize], block: &[f64]) {
        let n = dofs.len();
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                let v = block[a * n + b];
                if v != 0.0 {
                    self.push(i, j, v);
                }
            }
        }
    }

    /// Adds a rectangular block `rows x cols`.
    pub fn add_rect(&mut self, rows: &[usize], cols: &[usize], block: &[f64]) {
        let m = cols.len();
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                let v = block[a * m + b];
                if v != 0.0 {
                    self.push(i, j, v);
                }
            }
        }
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.n, &self.rows, &self.cols, &self.vals)
    }
}

/// Square CSR matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, rows: &[usize], cols: &[usize], vals: &[f64]) -> Self {
        let mut count = vec![0usize; n + 1];
        for &r in rows {
            count[r + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut tmp = vec![(0usize, 0.0f64); rows.len()];
        for k in 0..rows.len() {
            let r = rows[k];
            tmp[next[r]] = (cols[k], vals[k]);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(rows.len());
        let mut out_vals = Vec::with_capacity(rows.len());
        row_ptr.push(0);
        for i in 0..n {
            let seg = &mut tmp[count[i]..count[i + 1]];
            seg.sort_unstable_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(c, v) in seg.iter() {
                if c == last {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    out_vals.push(v);
                    last = c;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            vals: out_vals,
        }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let mut b = TripletBuilder::new(n);
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut rows = Vec::with_capacity(self.nnz());
        let mut cols = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                rows.push(j);
                cols.push(i);
            }
        }
        Self::from_triplets(self.n, &rows, &cols, &self.vals)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry of `A - A^T`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                m = m.max((v - self.get(i, j)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol * self.max_abs()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    fn to_faer(&self) -> SparseColMat<usize, f64> {
        // CSR of A is CSC of A^T; transpose first to get CSC of A.
        let t = self.transpose();
        let sym =
            SymbolicSparseColMat::new_checked(self.n, self.n, t.row_ptr.clone(), None, t.col_idx.clone());
        SparseColMat::new(sym, t.vals)
    }
}

/// Linear system on the free dofs left after eliminating constraints.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Full dof index of each reduced unknown.
    pub free: Vec<usize>,
    n_full: usize,
    constraints: BTreeMap<usize, f64>,
}

impl SparseSystem {
    /// Eliminates the constrained dofs of a full system symmetrically: rows
    /// and columns of constrained dofs are dropped and their prescribed values
    /// are lifted into the right-hand side.
    pub fn eliminate(full: &CsrMatrix, rhs: &[f64], constraints: &BTreeMap<usize, f64>) -> Self {
        let n = full.dim();
        let mut map = vec![usize::MAX; n];
        let mut free = Vec::with_capacity(n - constraints.len());
        for i in 0..n {
            if !constraints.contains_key(&i) {
                map[i] = free.len();
                free.push(i);
            }
        }
        let mut b = TripletBuilder::with_capacity(free.len(), full.nnz());
        let mut r = Vec::with_capacity(free.len());
        for &i in &free {
            let mut ri = rhs[i];
            for (j, v) in full.row(i) {
                if map[j] != usize::MAX {
                    b.push(map[i], map[j], v);
                } else {
                    ri -= v * constraints[&j];
                }
            }
            r.push(ri);
        }
        Self {
            matrix: b.build(),
            rhs: r,
            free,
            n_full: n,
            constraints: constraints.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Full vector from reduced unknowns and the prescribed values.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_full];
        for (&d, &v) in &self.constraints {
            out[d] = v;
        }
        for (k, &d) in self.free.iter().enumerate() {
            out[d] = x[k];
        }
        out
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Solves and returns the full vector.
    pub fn solve_full(&self) -> Result<Vec<f64>> {
        let x = solve(&self.matrix, &self.rhs).map_err(|e| match e {
            Error::SingularMatrix { dof } => Error::SingularMatrix {
                dof: self.free.get(dof).copied().unwrap_or(dof),
            },
            other => other,
        })?;
        Ok(self.expand(&x))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct sparse LU solve. One step of iterative refinement is applied when
/// the residual exceeds `1e-12 (||A|| ||x|| + ||b||)`.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    for i in 0..n {
        if a.row(i).all(|(_, v)| v == 0.0) {
            return Err(Error::SingularMatrix { dof: i });
        }
    }
    let fa = a.to_faer();
    let lu = fa.sp_lu().map_err(|_| Error::SingularMatrix { dof: 0 })?;
    let run = |rhs: &[f64]| -> Vec<f64> {
        let mut m = faer::Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        lu.solve_in_place(m.as_mut());
        (0..n).map(|i| m[(i, 0)]).collect()
    };
    let mut x = run(b);
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix { dof: i });
    }
    let scale = a.norm_frobenius() * norm(&x) + norm(b);
    let ax = a.matvec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    if norm(&r) > 1e-12 * scale {
        let dx = run(&r);
        for (x, d) in x.iter_mut().zip(&dx) {
            *x += d;
        }
    }
    let ax = a.matvec(&x);
    let res = norm(&b.iter().zip(&ax).map(|(b, ax)| b - ax).collect::<Vec<_>>());
    if !(res <= 1e-6 * (a.norm_frobenius() * norm(&x) + norm(b))) {
        let i = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        return Err(Error::SingularMatrix { dof: i });
    }
    Ok(x)
}
