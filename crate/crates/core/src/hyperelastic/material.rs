//! Plane-strain hyperelastic laws with an active fiber stress.
//!
//! The in-plane deformation gradient is embedded with `F33 = 1`. Invariant
//! based laws use the distortional invariants of the 3D right Cauchy-Green
//! tensor; compressible variants add `kappa/2 (J - 1)^2`, incompressible ones
//! the pressure term `-p J C^-1`. Thin-sheet materials are incompressible in
//! plane stress instead: `C33 = 1 / det C` and no pressure field.

use crate::error::{Error, Result};
use crate::goals::{Constitutive, Tangent};
use crate::tensor::{
    lift, m_add, m_det, m_identity, m_inverse, m_mul, m_scale, m_trace, m_transpose, to_real, Dual,
    Mat2, Scalar, Vec2, M2,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Law {
    StVenantKirchhoff { mu: f64, lambda: f64 },
    Mooney { c10: f64, c01: f64 },
    Gent { e: f64, jm: f64 },
    HainesWilson {
        c10: f64,
        c01: f64,
        c20: f64,
        c02: f64,
        c30: f64,
        c11: f64,
    },
}

impl Law {
    /// Initial shear modulus.
    pub fn shear_modulus(&self) -> f64 {
        match *self {
            Law::StVenantKirchhoff { mu, .. } => mu,
            Law::Mooney { c10, c01 } | Law::HainesWilson { c10, c01, .. } => 2.0 * (c10 + c01),
            Law::Gent { e, .. } => e / 3.0,
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            Law::StVenantKirchhoff { mu, lambda } => vec![mu, lambda],
            Law::Mooney { c10, c01 } => vec![c10, c01],
            Law::Gent { e, jm } => vec![e, jm],
            Law::HainesWilson {
                c10,
                c01,
                c20,
                c02,
                c30,
                c11,
            } => vec![c10, c01, c20, c02, c30, c11],
        }
    }
}

/// Active stress `beta T_a (F f0) (x) f0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveTension {
    pub beta: f64,
    pub tension: f64,
    pub f0: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperMaterial {
    pub law: Law,
    pub incompressible: bool,
    /// Bulk modulus of the compressible variant (unused when incompressible).
    pub bulk: f64,
    /// Incompressible plane stress, enforced pointwise through `C33`.
    pub thin_sheet: bool,
    pub active: Option<ActiveTension>,
}

impl HyperMaterial {
    pub fn compressible(law: Law, bulk: f64) -> Result<Self> {
        Self {
            law,
            incompressible: false,
            bulk,
            thin_sheet: false,
            active: None,
        }
        .validated()
    }

    pub fn incompressible(law: Law) -> Result<Self> {
        Self {
            law,
            incompressible: true,
            bulk: 0.0,
            thin_sheet: false,
            active: None,
        }
        .validated()
    }

    /// Incompressible sheet in plane stress; a pure displacement model.
    pub fn thin_sheet(law: Law) -> Result<Self> {
        if matches!(law, Law::StVenantKirchhoff { .. }) {
            return Err(Error::InvalidArgument("thin sheet needs an invariant-based law".into()));
        }
        Self {
            law,
            incompressible: false,
            bulk: 0.0,
            thin_sheet: true,
            active: None,
        }
        .validated()
    }

    pub fn with_active(mut self, active: ActiveTension) -> Result<Self> {
        self.active = Some(active);
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.law.params().iter().any(|p| !p.is_finite()) || !self.bulk.is_finite() || self.bulk < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid material parameters {:?}", self.law)));
        }
        if let Law::Gent { jm, .. } = self.law {
            if jm <= 0.0 {
                return Err(Error::InvalidArgument("Gent needs Jm > 0".into()));
            }
        }
        if let Some(a) = self.active {
            let n = a.f0[0].hypot(a.f0[1]);
            if !(0.0..=1.0).contains(&a.beta) || (n - 1.0).abs() > 1e-12 || !a.tension.is_finite() {
                return Err(Error::InvalidArgument(format!("invalid active tension {a:?}")));
            }
        }
        Ok(self)
    }

    /// `(dW/dI1, dW/dI2)` at distortional invariants.
    fn invariant_derivatives<T: Scalar>(&self, cell: usize, i1: T, i2: T) -> Result<(T, T)> {
        let (a, b) = (i1 - 3.0, i2 - 3.0);
        Ok(match self.law {
            Law::Mooney { c10, c01 } => (T::cst(c10), T::cst(c01)),
            Law::Gent { e, jm } => {
                if a.re() >= jm {
                    return Err(Error::GentSingularity { cell, value: a.re() });
                }
                (T::cst(e / 6.0) / (T::cst(1.0) - a / jm), T::zero())
            }
            Law::HainesWilson {
                c10,
                c01,
                c20,
                c02,
                c30,
                c11,
            } => (
                b * c11 + a * (2.0 * c20) + a * a * (3.0 * c30) + c10,
                a * c11 + b * (2.0 * c02) + c01,
                ),
            Law::StVenantKirchhoff { .. } => unreachable!("no invariant form"),
        })
    }

    /// First Piola-Kirchhoff stress for displacement gradient `g` and
    /// pressure `p` (ignored by compressible materials).
    pub fn pk1_generic<T: Scalar>(&self, cell: usize, g: &M2<T>, p: T) -> Result<M2<T>> {
        let f = m_add(&m_identity(), g);
        let j = m_det(&f);
        if !(j.re() > 0.0) {
            return Err(Error::InvertedElement { cell, det: j.re() });
        }
        let c = m_mul(&m_transpose(&f), &f);
        let cinv = m_inverse(&c);
        let id: M2<T> = m_identity();
        let mut s = match self.law {
            Law::StVenantKirchhoff { mu, lambda } => {
                let e = m_scale(&m_add(&c, &m_scale(&id, T::cst(-1.0))), T::cst(0.5));
                m_add(&m_scale(&id, m_trace(&e) * lambda), &m_scale(&e, T::cst(2.0 * mu)))
            }
            _ if self.thin_sheet => {
                let c33 = T::cst(1.0) / (j * j);
                let i1 = m_trace(&c) + c33;
                let trc2 = c[0][0] * c[0][0] + c[0][1] * c[1][0] * 2.0 + c[1][1] * c[1][1] + c33 * c33;
                let i2 = (i1 * i1 - trc2) * 0.5;
                let (w1, w2) = self.invariant_derivatives(cell, i1, i2)?;
                // dI1/dC = I - C33 C^-1, dI2/dC = I1 dI1/dC - C + C33^2 C^-1
                let d1 = m_add(&id, &m_scale(&cinv, -c33));
                let d2 = m_add(
                    &m_add(&m_scale(&d1, i1), &m_scale(&c, T::cst(-1.0))),
                    &m_scale(&cinv, c33 * c33),
                );
                m_scale(&m_add(&m_scale(&d1, w1), &m_scale(&d2, w2)), T::cst(2.0))
            }
            _ => {
                let i1 = m_trace(&c) + 1.0;
                let trc2 = c[0][0] * c[0][0] + c[0][1] * c[1][0] * 2.0 + c[1][1] * c[1][1] + 1.0;
                let i2 = (i1 * i1 - trc2) * 0.5;
                let j23 = j.powf(-2.0 / 3.0);
                let j43 = j23 * j23;
                let (w1, w2) = self.invariant_derivatives(cell, i1 * j23, i2 * j43)?;
                let t1 = m_add(&id, &m_scale(&cinv, -(i1 / 3.0)));
                let t2 = m_add(
                    &m_add(&m_scale(&id, i1), &m_scale(&c, T::cst(-1.0))),
                    &m_scale(&cinv, -(i2 * (2.0 / 3.0))),
                );
                m_scale(&m_add(&m_scale(&t1, w1 * j23), &m_scale(&t2, w2 * j43)), T::cst(2.0))
            }
        };
        if self.incompressible {
            s = m_add(&s, &m_scale(&cinv, -(p * j)));
        } else if self.bulk > 0.0 {
            s = m_add(&s, &m_scale(&cinv, (j - 1.0) * j * self.bulk));
        }
        let mut pk = m_mul(&f, &s);
        if let Some(a) = self.active {
            let bt = a.beta * a.tension;
            let f0: [T; 2] = [T::cst(a.f0[0]), T::cst(a.f0[1])];
            for i in 0..2 {
                let ff = f[i][0] * f0[0] + f[i][1] * f0[1];
                for k in 0..2 {
                    pk[i][k] += ff * f0[k] * bt;
                }
            }
        }
        Ok(pk)
    }

    /// `det C - 1` (the incompressibility residual density).
    pub fn constraint_generic<T: Scalar>(g: &M2<T>) -> T {
        let f = m_add(&m_identity(), g);
        let j = m_det(&f);
        j * j - 1.0
    }

    /// Strain energy density of the passive part (compressible form).
    pub fn energy(&self, cell: usize, g: &Mat2) -> Result<f64> {
        let f = m_add(&m_identity(), g);
        let j = m_det(&f);
        if j <= 0.0 {
            return Err(Error::InvertedElement { cell, det: j });
        }
        let c = m_mul(&m_transpose(&f), &f);
        let vol = if self.incompressible { 0.0 } else { 0.5 * self.bulk * (j - 1.0).powi(2) };
        if let Law::StVenantKirchhoff { mu, lambda } = self.law {
            let e = [[0.5 * (c[0][0] - 1.0), 0.5 * c[0][1]], [0.5 * c[1][0], 0.5 * (c[1][1] - 1.0)]];
            let tr = e[0][0] + e[1][1];
            let e2 = e[0][0] * e[0][0] + 2.0 * e[0][1] * e[1][0] + e[1][1] * e[1][1];
            return Ok(mu * e2 + 0.5 * lambda * tr * tr);
        }
        let (c33, jd) = if self.thin_sheet { (1.0 / (j * j), 1.0) } else { (1.0, j) };
        let i1 = c[0][0] + c[1][1] + c33;
        let i2 = 0.5 * (i1 * i1 - (c[0][0] * c[0][0] + 2.0 * c[0][1] * c[1][0] + c[1][1] * c[1][1] + c33 * c33));
        let a = i1 * jd.powf(-2.0 / 3.0) - 3.0;
        let b = i2 * jd.powf(-4.0 / 3.0) - 3.0;
        let w = match self.law {
            Law::Mooney { c10, c01 } => c10 * a + c01 * b,
            Law::Gent { e, jm } => {
                if a >= jm {
                    return Err(Error::GentSingularity { cell, value: a });
                }
                -(e / 6.0) * jm * (1.0 - a / jm).ln()
            }
            Law::HainesWilson {
                c10,
                c01,
                c20,
                c02,
                c30,
                c11,
            } => c10 * a + c01 * b + c11 * a * b + c20 * a * a + c02 * b * b + c30 * a * a * a,
            Law::StVenantKirchhoff { .. } => unreachable!(),
        };
        Ok(w + vol)
    }

    /// Stress and its derivatives with respect to `(G, p)`, plus the
    /// constraint density and its gradient derivative.
    pub fn linearize(&self, cell: usize, g: &Mat2, p: f64) -> Result<PointResponse> {
        let gd: M2<Dual<5>> = [
            [Dual::variable(g[0][0], 0), Dual::variable(g[0][1], 1)],
            [Dual::variable(g[1][0], 2), Dual::variable(g[1][1], 3)],
        ];
        let pd = Dual::variable(p, 4);
        let pk = self.pk1_generic(cell, &gd, pd)?;
        let con = Self::constraint_generic(&gd);
        let mut dp = [[[[0.0; 2]; 2]; 2]; 2];
        let mut dpp = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        dp[i][j][k][l] = pk[i][j].eps[2 * k + l];
                    }
                }
                dpp[i][j] = pk[i][j].eps[4];
            }
        }
        Ok(PointResponse {
            stress: to_real(&pk),
            dstress: dp,
            dstress_dp: dpp,
            constraint: con.re,
            dconstraint: [[con.eps[0], con.eps[1]], [con.eps[2], con.eps[3]]],
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PointResponse {
    pub stress: Mat2,
    pub dstress: Tangent,
    pub dstress_dp: Mat2,
    pub constraint: f64,
    pub dconstraint: Mat2,
}

/// `Pi = F S + beta T_a (F f0) (x) f0`; `p` must be given iff the material is incompressible.
pub fn pk1(mat: &HyperMaterial, grad_u: &Mat2, p: Option<f64>) -> Result<Mat2> {
    if p.is_some() != mat.incompressible {
        return Err(Error::InvalidArgument(
            "pressure must be supplied exactly for incompressible materials".into(),
        ));
    }
    Ok(to_real(&mat.pk1_generic(0, &lift::<f64>(grad_u), p.unwrap_or(0.0))?))
}

impl Constitutive for HyperMaterial {
    fn stress(&self, cell: usize, grad: &Mat2, p: f64) -> Result<Mat2> {
        self.pk1_generic(cell, grad, p)
    }

    fn stress_derivative(&self, cell: usize, grad: &Mat2, p: f64) -> Result<(Tangent, Mat2)> {
        let r = self.linearize(cell, grad, p)?;
        Ok((r.dstress, r.dstress_dp))
    }

    fn is_affine(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laws() -> Vec<Law> {
        vec![
            Law::StVenantKirchhoff { mu: 0.3, lambda: 0.5 },
            Law::Mooney { c10: 0.14, c01: 0.023 },
            Law::Gent { e: 0.97, jm: 13.0 },
            Law::HainesWilson {
                c10: 0.14,
                c01: 0.033,
                c20: -0.0026,
                c02: 0.00095,
                c30: 0.0038,
                c11: -0.0049,
            },
        ]
    }

    fn mat(law: Law) -> HyperMaterial {
        let bulk = if matches!(law, Law::StVenantKirchhoff { .. }) { 0.0 } else { 2.0 };
        HyperMaterial::compressible(law, bulk).unwrap()
    }

    #[test]
    fn reference_state_is_stress_free() {
        for law in laws() {
            let s = pk1(&mat(law), &[[0.0; 2]; 2], None).unwrap();
            assert!(s.iter().flatten().all(|v| v.abs() < 1e-14), "{law:?}");
            let inc = HyperMaterial::incompressible(law).unwrap();
            let s = pk1(&inc, &[[0.0; 2]; 2], Some(0.0)).unwrap();
            assert!(s.iter().flatten().all(|v| v.abs() < 1e-14), "{law:?}");
        }
        for m in sheets() {
            let s = pk1(&m, &[[0.0; 2]; 2], None).unwrap();
            assert!(s.iter().flatten().all(|v| v.abs() < 1e-14), "{:?}", m.law);
        }
    }

    fn sheets() -> Vec<HyperMaterial> {
        laws()[1..].iter().map(|&l| HyperMaterial::thin_sheet(l).unwrap()).collect()
    }

    #[test]
    fn thin_sheet_uniaxial_tension() {
        // F = diag(l, l^-1/2, l^-1/2): P22 = 0 and P11 = 2 (W1 + W2 / l) (l - l^-2)
        for m in sheets() {
            for l in [0.8, 1.3, 1.69] {
                let g = [[l - 1.0, 0.0], [0.0, l.powf(-0.5) - 1.0]];
                let s = pk1(&m, &g, None).unwrap();
                let i1 = l * l + 2.0 / l;
                let i2 = 2.0 * l + 1.0 / (l * l);
                let (w1, w2) = m.invariant_derivatives::<f64>(0, i1, i2).unwrap();
                let expect = 2.0 * (w1 + w2 / l) * (l - 1.0 / (l * l));
                assert!((s[0][0] - expect).abs() < 1e-13, "{:?}: {} vs {expect}", m.law, s[0][0]);
                assert!(s[1][1].abs() < 1e-13 && s[0][1].abs() < 1e-15 && s[1][0].abs() < 1e-15);
            }
        }
        assert!(HyperMaterial::thin_sheet(laws()[0]).is_err());
    }

    #[test]
    fn stvk_simple_shear() {
        let (mu, lambda, g) = (0.3, 0.5, 0.1);
        let s = pk1(&mat(Law::StVenantKirchhoff { mu, lambda }), &[[0.0, g], [0.0, 0.0]], None).unwrap();
        // F = [[1, g], [0, 1]], E = [[0, g/2], [g/2, g^2/2]], S = lambda tr E I + 2 mu E
        let tr = g * g / 2.0;
        let sm = [[lambda * tr, mu * g], [mu * g, lambda * tr + mu * g * g]];
        let expect = [
            [sm[0][0] + g * sm[1][0], sm[0][1] + g * sm[1][1]],
            [sm[1][0], sm[1][1]],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((s[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn active_stress_at_rest() {
        let m = mat(Law::Mooney { c10: 0.1, c01: 0.0 })
            .with_active(ActiveTension {
                beta: 1.0,
                tension: 0.7,
                f0: [0.0, 1.0],
            })
            .unwrap();
        let s = pk1(&m, &[[0.0; 2]; 2], None).unwrap();
        assert_eq!(s, [[0.0, 0.0], [0.0, 0.7]]);
    }

    #[test]
    fn stress_is_energy_gradient() {
        let g = [[0.12, -0.05], [0.08, -0.1]];
        let h = 1e-6;
        for m in laws().into_iter().map(mat).chain(sheets()) {
            let law = m.law;
            let s = pk1(&m, &g, None).unwrap();
            for k in 0..2 {
                for l in 0..2 {
                    let mut gp = g;
                    let mut gm = g;
                    gp[k][l] += h;
                    gm[k][l] -= h;
                    let fd = (m.energy(0, &gp).unwrap() - m.energy(0, &gm).unwrap()) / (2.0 * h);
                    assert!((fd - s[k][l]).abs() < 1e-8, "{law:?} {k}{l}: {fd} vs {}", s[k][l]);
                }
            }
        }
    }

    #[test]
    fn energy_is_frame_indifferent() {
        let g: Mat2 = [[0.2, 0.1], [-0.05, 0.15]];
        for m in laws().into_iter().map(mat).chain(sheets()) {
            let w = m.energy(0, &g).unwrap();
            for k in 0..10 {
                let t = 0.6 * k as f64 + 0.1;
                let r = [[t.cos(), -t.sin()], [t.sin(), t.cos()]];
                let f = m_add(&m_identity::<f64>(), &g);
                let rf = m_mul(&r, &f);
                let gr = m_add(&rf, &m_scale(&m_identity::<f64>(), -1.0));
                assert!((m.energy(0, &gr).unwrap() - w).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tangent_matches_central_differences() {
        let g = [[0.1, 0.04], [-0.03, 0.07]];
        let h = 1e-6;
        for law in laws() {
            let sheet = HyperMaterial::thin_sheet(law).ok();
            for m in [mat(law), HyperMaterial::incompressible(law).unwrap()].into_iter().chain(sheet) {
                let p = if m.incompressible { 0.03 } else { 0.0 };
                let r = m.linearize(0, &g, p).unwrap();
                for k in 0..2 {
                    for l in 0..2 {
                        let mut gp = g;
                        let mut gm = g;
                        gp[k][l] += h;
                        gm[k][l] -= h;
                        let sp = m.pk1_generic(0, &gp, p).unwrap();
                        let sm = m.pk1_generic(0, &gm, p).unwrap();
                        for i in 0..2 {
                            for j in 0..2 {
                                let fd = (sp[i][j] - sm[i][j]) / (2.0 * h);
                                assert!((fd - r.dstress[i][j][k][l]).abs() < 1e-7);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn inverted_and_gent_errors() {
        let m = mat(Law::Mooney { c10: 0.1, c01: 0.0 });
        assert!(matches!(
            pk1(&m, &[[-2.0, 0.0], [0.0, 0.0]], None),
            Err(Error::InvertedElement { .. })
        ));
        let gent = mat(Law::Gent { e: 1.0, jm: 0.5 });
        assert!(matches!(
            pk1(&gent, &[[1.0, 0.0], [0.0, 0.0]], None),
            Err(Error::GentSingularity { .. })
        ));
        assert!(pk1(&m, &[[0.0; 2]; 2], Some(1.0)).is_err());
    }
}
