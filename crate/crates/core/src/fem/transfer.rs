//! Transfers between Lagrange spaces on one mesh: nodal interpolation `i_h`
//! (which is also the exact embedding into higher degree) and the patchwise
//! least-squares extrapolation `E_h` into the next higher degree.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::space::{Field, Space};
use crate::error::{Error, Result};

fn check_compatible(source: &Space, target: &Space) -> Result<()> {
    if !source.same_mesh(target) {
        return Err(Error::MeshMismatch);
    }
    if source.n_components() != target.n_components() {
        return Err(Error::IncompatibleSpaces(format!(
            "{} vs {} components",
            source.n_components(),
            target.n_components()
        )));
    }
    Ok(())
}

/// Evaluates `field` at the Lagrange nodes of `target`. For a lower target
/// degree this is the Lagrange interpolant; for a higher one it is the exact
/// embedding. Constraints of `target` are not applied.
pub fn interpolate(field: &Field, target: Arc<Space>) -> Result<Field> {
    let source = &field.space;
    check_compatible(source, &target)?;
    let nc = target.n_components();
    let src_el = source.element();
    let tgt_el = target.element();
    // Tabulate the source basis at the target element's nodes once.
    let table: Vec<Vec<f64>> = tgt_el.nodes.iter().map(|p| src_el.values(p)).collect();
    let mut out = vec![0.0; target.n_dofs()];
    let mut done = vec![false; target.n_nodes()];
    for c in 0..target.mesh().n_cells() {
        let loc = field.local(c);
        for (l, &node) in target.cell_nodes(c).iter().enumerate() {
            if done[node] {
                continue;
            }
            done[node] = true;
            for comp in 0..nc {
                out[node * nc + comp] = table[l]
                    .iter()
                    .enumerate()
                    .map(|(i, phi)| phi * loc[i * nc + comp])
                    .sum();
            }
        }
    }
    Ok(Field::new(target, out))
}

fn monomials(deg: usize) -> Vec<(i32, i32)> {
    let mut m = Vec::new();
    for d in 0..=deg as i32 {
        for b in 0..=d {
            m.push((d - b, b));
        }
    }
    m
}

/// Patchwise least-squares extrapolation from degree `k` to `target`
/// (degree `k + 1`). For every vertex, a degree-`k + 1` polynomial is fitted
/// to the nodal values on the cells around it; the fit is evaluated at the
/// target nodes of those cells, and values at nodes shared by several patches
/// are averaged. Patches with too few nodes are enlarged by one ring of cells
/// (twice at most) and otherwise fall back to the plain embedding. Constrained
/// target dofs take their prescribed values.
pub fn extrapolate(field: &Field, target: Arc<Space>) -> Result<Field> {
    let source = &field.space;
    check_compatible(source, &target)?;
    if target.degree() != source.degree() + 1 {
        return Err(Error::IncompatibleSpaces(format!(
            "extrapolation needs degree {} -> {}, got {}",
            source.degree(),
            source.degree() + 1,
            target.degree()
        )));
    }
    let mesh = target.mesh().clone();
    let nc = target.n_components();
    let mono = monomials(target.degree());
    let nm = mono.len();
    let vcells = mesh.vertex_cells();
    let embedded = interpolate(field, target.clone())?;

    let mut sum = vec![0.0; target.n_dofs()];
    let mut count = vec![0u32; target.n_nodes()];
    let mut fallbacks = 0usize;

    for (v, patch) in vcells.iter().enumerate() {
        if patch.is_empty() {
            continue;
        }
        let center = mesh.vertices()[v];
        let mut cells: BTreeSet<usize> = patch.iter().copied().collect();
        let mut fit = None;
        for _ in 0..3 {
            let nodes: BTreeSet<usize> = cells
                .iter()
                .flat_map(|&c| source.cell_nodes(c).iter().copied())
                .collect();
            if nodes.len() >= nm {
                let pts: Vec<_> = nodes.iter().map(|&n| source.node_coords()[n]).collect();
                let h = pts
                    .iter()
                    .map(|p| (p[0] - center[0]).hypot(p[1] - center[1]))
                    .fold(0.0, f64::max);
                let a = DMatrix::from_fn(pts.len(), nm, |i, m| {
                    let (ea, eb) = mono[m];
                    ((pts[i][0] - center[0]) / h).powi(ea) * ((pts[i][1] - center[1]) / h).powi(eb)
                });
                let svd = a.svd(true, true);
                let smax = svd.singular_values.max();
                let smin = svd.singular_values.min();
                if smin > 1e-10 * smax {
                    let mut coef = Vec::with_capacity(nc);
                    for comp in 0..nc {
                        let b = DVector::from_iterator(
                            pts.len(),
                            nodes.iter().map(|&n| field.coeffs[n * nc + comp]),
                        );
                        coef.push(svd.solve(&b, 1e-14).expect("svd has both factors"));
                    }
                    fit = Some((coef, h));
                    break;
                }
            }
            let ring: Vec<usize> = cells
                .iter()
                .flat_map(|&c| mesh.cells()[c])
                .flat_map(|w| vcells[w].iter().copied())
                .collect();
            let before = cells.len();
            cells.extend(ring);
            if cells.len() == before {
                break;
            }
        }
        let targets: BTreeSet<usize> = patch
            .iter()
            .flat_map(|&c| target.cell_nodes(c).iter().copied())
            .collect();
        match fit {
            Some((coef, h)) => {
                for &n in &targets {
                    let x = target.node_coords()[n];
                    let (sx, sy) = ((x[0] - center[0]) / h, (x[1] - center[1]) / h);
                    for comp in 0..nc {
                        let val: f64 = mono
                            .iter()
                            .enumerate()
                            .map(|(m, &(ea, eb))| coef[comp][m] * sx.powi(ea) * sy.powi(eb))
                            .sum();
                        sum[n * nc + comp] += val;
                    }
                    count[n] += 1;
                }
            }
            None => {
                fallbacks += 1;
                for &n in &targets {
                    for comp in 0..nc {
                        sum[n * nc + comp] += embedded.coeffs[n * nc + comp];
                    }
                    count[n] += 1;
                }
            }
        }
    }
    if fallbacks > 0 {
        log::warn!("extrapolation fell back to plain embedding on {fallbacks} vertex patches");
    }
    let coeffs = (0..target.n_dofs())
        .map(|d| {
            let c = count[d / nc];
            if c == 0 {
                embedded.coeffs[d]
            } else {
                sum[d] / c as f64
            }
        })
        .collect();
    let mut out = Field::new(target, coeffs);
    out.apply_constraints();
    Ok(out)
}

/// Moves `field` from a coarse mesh onto `target`, whose mesh was obtained by
/// refining it: every target node is evaluated in the parent cell of its
/// owning cell. Constrained target dofs take their prescribed values.
pub fn prolongate(field: &Field, target: Arc<Space>) -> Result<Field> {
    let source = &field.space;
    if source.n_components() != target.n_components() {
        return Err(Error::IncompatibleSpaces("component count differs".into()));
    }
    let old = source.mesh();
    let new = target.mesh();
    let nc = target.n_components();
    let mut out = vec![0.0; target.n_dofs()];
    for (node, x) in target.node_coords().iter().enumerate() {
        let (cell, _) = target.node_owner(node);
        let parent = match new.parent(cell) {
            Some(p) if p < old.n_cells() => p,
            _ => return Err(Error::MeshMismatch),
        };
        let v = field.value_at(parent, &old.to_reference(parent, x));
        out[node * nc..(node + 1) * nc].copy_from_slice(&v);
    }
    let mut f = Field::new(target, out);
    f.apply_constraints();
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::rectangle;

    fn spaces(k: usize, nc: usize) -> (Arc<Space>, Arc<Space>) {
        let m = Arc::new(rectangle([0.0, 0.0], [1.0, 1.0], 4, 4, 0));
        (
            Arc::new(Space::unconstrained(m.clone(), k, nc).unwrap()),
            Arc::new(Space::unconstrained(m, k + 1, nc).unwrap()),
        )
    }

    #[test]
    fn interpolation_of_x_squared_to_p1() {
        let (p1, p2) = spaces(1, 1);
        let f = Field::from_fn(p2, |x, _| x[0] * x[0]);
        let g = interpolate(&f, p1.clone()).unwrap();
        for (n, x) in p1.node_coords().iter().enumerate() {
            assert!((g.coeffs[n] - x[0] * x[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn embed_then_interpolate_is_identity() {
        let (p1, p2) = spaces(1, 2);
        let f = Field::from_fn(p1.clone(), |x, c| (3.0 * x[0] + c as f64 * x[1]).sin());
        let up = interpolate(&f, p2).unwrap();
        let back = interpolate(&up, p1).unwrap();
        for (a, b) in f.coeffs.iter().zip(&back.coeffs) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn extrapolation_reproduces_higher_degree_polynomials() {
        for k in 1..=2 {
            let (lo, hi) = spaces(k, 1);
            let poly = |x: &[f64; 2]| {
                let (a, b) = (x[0], x[1]);
                if k == 1 {
                    1.0 + a - 2.0 * b + a * a - 0.5 * a * b + 3.0 * b * b
                } else {
                    0.3 + a * a * a - 2.0 * a * a * b + b * b * b + a * b
                }
            };
            let f = Field::from_fn(lo, |x, _| poly(x));
            let e = extrapolate(&f, hi.clone()).unwrap();
            for (n, x) in hi.node_coords().iter().enumerate() {
                assert!((e.coeffs[n] - poly(x)).abs() < 1e-10, "k={k} node {n}");
            }
        }
    }

    #[test]
    fn zero_stays_zero_and_nonpolynomial_differs_from_embedding() {
        let (p1, p2) = spaces(1, 1);
        let z = extrapolate(&Field::zeros(p1.clone()), p2.clone()).unwrap();
        assert!(z.norm_max() == 0.0);
        let f = Field::from_fn(p1, |x, _| (4.0 * x[0]).sin() * x[1].exp());
        let e = extrapolate(&f, p2.clone()).unwrap();
        let emb = interpolate(&f, p2).unwrap();
        let diff = e
            .coeffs
            .iter()
            .zip(&emb.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff > 1e-4);
    }

    #[test]
    fn mismatched_meshes_are_rejected() {
        let (p1, _) = spaces(1, 1);
        let other = Arc::new(rectangle([0.0, 0.0], [1.0, 1.0], 3, 3, 0));
        let q = Arc::new(Space::unconstrained(other, 1, 1).unwrap());
        assert!(matches!(
            interpolate(&Field::zeros(p1), q),
            Err(Error::MeshMismatch)
        ));
    }

    #[test]
    fn prolongation_is_exact_for_the_space_polynomials() {
        let (p2, _) = spaces(2, 2);
        let f = Field::from_fn(p2.clone(), |x, c| if c == 0 { x[0] * x[1] } else { 1.0 - x[1] * x[1] });
        let fine = Arc::new(crate::mesh::uniform_refine(p2.mesh()));
        let q = Arc::new(Space::unconstrained(fine, 2, 2).unwrap());
        let g = prolongate(&f, q.clone()).unwrap();
        let exact = Field::from_fn(q, |x, c| if c == 0 { x[0] * x[1] } else { 1.0 - x[1] * x[1] });
        for (a, b) in g.coeffs.iter().zip(&exact.coeffs) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
