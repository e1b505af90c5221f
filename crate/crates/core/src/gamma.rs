//! Pointwise Γ-calculus of the sub-Laplacian.
//!
//! Everything is evaluated by differentiating jets along the orthonormal
//! horizontal fields `A_a` and vertical fields `V_s`. With `L = Σ A_a² − Z₀`
//! (the drift `Z₀ = Σ ∇̊_{A_a} A_a` vanishes on unimodular models):
//!
//! * `Γ^h(f, g) = Σ (A_a f)(A_a g)`, `Γ^v(f, g) = Σ (V_s f)(V_s g)`
//! * `Γ₂^•(f) = ½ L Γ^•(f) − Γ^•(f, Lf)`

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry;
use crate::jet::{apply_with, chart_field_jets_in, Jet, JetSpace, TestFunction};
use crate::model_zoo::{DeclaredConstants, LieModel};
use crate::{Error, Result};

/// Which half of the metric a Γ form refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    H,
    V,
}

/// Selector for [`gamma2`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gamma2Kind {
    H,
    V,
    /// `Γ₂^h + ℓ Γ₂^v`.
    Mixed(f64),
}

/// Orthonormal frame fields as jets around one base point; reusable across functions.
#[derive(Clone, Debug)]
pub struct PointContext {
    space: Arc<JetSpace>,
    base: Arc<[f64]>,
    order: usize,
    horizontal: Vec<Vec<Jet>>,
    vertical: Vec<Vec<Jet>>,
    drift: Vec<Jet>,
}

impl PointContext {
    /// Frame jets for functions lifted to order `order` at `x`.
    pub fn new(model: &LieModel, x: &[f64], order: usize) -> Result<PointContext> {
        if order == 0 {
            return Err(Error::OrderExhausted("Γ-calculus needs jets of order ≥ 1".into()));
        }
        let d = model.dim();
        let space = JetSpace::get(d, order);
        let base: Arc<[f64]> = x.into();
        let raw = chart_field_jets_in(model, &space, &base, order - 1)?;
        let m = model.orthonormal_frame();
        let combine = |a: usize| -> Vec<Jet> {
            (0..d)
                .map(|k| {
                    let mut comp = Jet::zeros(&space, &base, order - 1);
                    for (i, field) in raw.iter().enumerate() {
                        let w = m[(i, a)];
                        if w != 0.0 {
                            comp.axpy(w, &field[k]);
                        }
                    }
                    comp
                })
                .collect()
        };
        let horizontal: Vec<Vec<Jet>> = (0..model.dim_h()).map(combine).collect();
        let vertical: Vec<Vec<Jet>> = (model.dim_h()..d).map(combine).collect();
        let z0 = model.algebra().horizontal_drift();
        let drift = (0..d)
            .map(|k| {
                let mut comp = Jet::zeros(&space, &base, order - 1);
                for (c, w) in z0.iter().enumerate() {
                    if *w != 0.0 {
                        // Z₀ = Σ_c w_c F_c, each F_c a combination of raw fields.
                        for (i, field) in raw.iter().enumerate() {
                            let mic = m[(i, c)];
                            if mic != 0.0 {
                                comp.axpy(w * mic, &field[k]);
                            }
                        }
                    }
                }
                comp
            })
            .collect();
        Ok(PointContext { space, base, order, horizontal, vertical, drift })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base
    }

    pub fn lift(&self, f: &TestFunction) -> Result<Jet> {
        f.lift_in(&self.space, &self.base, self.order)
    }

    pub fn dim_h(&self) -> usize {
        self.horizontal.len()
    }

    pub fn dim_v(&self) -> usize {
        self.vertical.len()
    }

    /// `A_a f`.
    pub fn horizontal(&self, a: usize, f: &Jet) -> Result<Jet> {
        apply_with(&self.horizontal[a], f)
    }

    /// `V_s f`.
    pub fn vertical(&self, s: usize, f: &Jet) -> Result<Jet> {
        apply_with(&self.vertical[s], f)
    }

    fn fields(&self, part: Part) -> &[Vec<Jet>] {
        match part {
            Part::H => &self.horizontal,
            Part::V => &self.vertical,
        }
    }

    /// `Lf` as a jet of order `f.order() − 2`.
    pub fn sublaplacian(&self, f: &Jet) -> Result<Jet> {
        if f.order() < 2 {
            return Err(Error::OrderExhausted("L needs jets of order ≥ 2".into()));
        }
        let mut out = Jet::zeros(&self.space, &self.base, f.order() - 2);
        for field in &self.horizontal {
            let af = apply_with(field, f)?;
            out.axpy(1.0, &apply_with(field, &af)?);
        }
        if self.drift.iter().any(|j| j.coeffs().iter().any(|c| *c != 0.0)) {
            out.axpy(-1.0, &apply_with(&self.drift, f)?);
        }
        Ok(out)
    }

    /// `Σ_s V_s² f`.
    pub fn vertical_laplacian(&self, f: &Jet) -> Result<Jet> {
        if f.order() < 2 {
            return Err(Error::OrderExhausted("vertical Laplacian needs jets of order ≥ 2".into()));
        }
        let mut out = Jet::zeros(&self.space, &self.base, f.order() - 2);
        for field in &self.vertical {
            let vf = apply_with(field, f)?;
            out.axpy(1.0, &apply_with(field, &vf)?);
        }
        Ok(out)
    }

    /// `Γ^•(f, g)` as a jet of order `min − 1`.
    pub fn gamma(&self, f: &Jet, g: &Jet, part: Part) -> Result<Jet> {
        let order = f.order().min(g.order());
        if order == 0 {
            return Err(Error::OrderExhausted("Γ needs jets of order ≥ 1".into()));
        }
        let mut out = Jet::zeros(&self.space, &self.base, order - 1);
        for field in self.fields(part) {
            let a = apply_with(field, f)?;
            let b = apply_with(field, g)?;
            out.axpy(1.0, &a.mul_jet(&b));
        }
        Ok(out)
    }

    /// `Γ₂^•(f)` as a jet of order `f.order() − 3`.
    pub fn gamma2(&self, f: &Jet, part: Part) -> Result<Jet> {
        if f.order() < 3 {
            return Err(Error::OrderExhausted("Γ₂ needs jets of order ≥ 3".into()));
        }
        let lf = self.sublaplacian(f)?;
        let g = self.gamma(f, f, part)?;
        let mut out = self.sublaplacian(&g)?.scale(0.5);
        out.axpy(-1.0, &self.gamma(f, &lf, part)?);
        Ok(out)
    }

    /// All pointwise quantities needed by the CD inequality.
    pub fn point_report(&self, f: &Jet, ells: &[f64]) -> Result<GammaPointReport> {
        let lf = self.sublaplacian(f)?.value();
        let gh = self.gamma(f, f, Part::H)?.value();
        let gv = self.gamma(f, f, Part::V)?.value();
        let g2h = self.gamma2(f, Part::H)?.value();
        let g2v = self.gamma2(f, Part::V)?.value();
        Ok(GammaPointReport {
            lf,
            gamma_h: gh,
            gamma_v: gv,
            gamma2_h: g2h,
            gamma2_v: g2v,
            gamma2_mixed: ells.iter().map(|&l| (l, g2h + l * g2v)).collect(),
        })
    }
}

/// Pointwise Γ quantities of one function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPointReport {
    pub lf: f64,
    pub gamma_h: f64,
    pub gamma_v: f64,
    pub gamma2_h: f64,
    pub gamma2_v: f64,
    /// `(ℓ, Γ₂^h + ℓΓ₂^v)` pairs.
    pub gamma2_mixed: Vec<(f64, f64)>,
}

/// Both sides of the CD inequality at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdTerms {
    pub lhs: f64,
    pub rhs: f64,
}

impl CdTerms {
    pub fn residual(&self) -> f64 {
        self.lhs - self.rhs
    }

    /// Tolerance scale `1 + |LHS| + |RHS|`.
    pub fn scale(&self) -> f64 {
        1.0 + self.lhs.abs() + self.rhs.abs()
    }
}

impl GammaPointReport {
    /// `Γ₂^{h+ℓv}(f)` against `(Lf)²/n + (ρ₁ − 1/ℓ)Γ^h(f) + (ρ₂,₀ + ℓρ₂,₁)Γ^v(f)`.
    pub fn cd_terms(&self, ell: f64, k: &DeclaredConstants) -> CdTerms {
        let lhs = self.gamma2_h + ell * self.gamma2_v;
        let rhs = self.lf * self.lf / k.n as f64
            + (k.rho1 - 1.0 / ell) * self.gamma_h
            + (k.rho20 + ell * k.rho21) * self.gamma_v;
        CdTerms { lhs, rhs }
    }
}

fn context_for(model: &LieModel, f: &TestFunction, x: &[f64], order: usize) -> Result<(PointContext, Jet)> {
    if f.nvars() != model.dim() {
        return Err(Error::InvalidArgument(format!(
            "function has {} variables, model has dimension {}",
            f.nvars(),
            model.dim()
        )));
    }
    let ctx = PointContext::new(model, x, order)?;
    let j = ctx.lift(f)?;
    Ok((ctx, j))
}

pub fn sublaplacian(model: &LieModel, f: &TestFunction, x: &[f64]) -> Result<f64> {
    let (ctx, j) = context_for(model, f, x, 2)?;
    Ok(ctx.sublaplacian(&j)?.value())
}

pub fn gamma(model: &LieModel, f: &TestFunction, g: &TestFunction, x: &[f64], part: Part) -> Result<f64> {
    let (ctx, jf) = context_for(model, f, x, 1)?;
    let jg = ctx.lift(g)?;
    Ok(ctx.gamma(&jf, &jg, part)?.value())
}

pub fn gamma2(model: &LieModel, f: &TestFunction, x: &[f64], kind: Gamma2Kind) -> Result<f64> {
    let (ctx, j) = context_for(model, f, x, 3)?;
    Ok(match kind {
        Gamma2Kind::H => ctx.gamma2(&j, Part::H)?.value(),
        Gamma2Kind::V => ctx.gamma2(&j, Part::V)?.value(),
        Gamma2Kind::Mixed(l) => ctx.gamma2(&j, Part::H)?.value() + l * ctx.gamma2(&j, Part::V)?.value(),
    })
}

fn check_ell(ell: f64) -> Result<()> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::InvalidArgument(format!("ℓ must be positive, got {ell}")));
    }
    Ok(())
}

/// LHS − RHS of the CD inequality; nonnegative iff it holds for this `f`, `ℓ` at `x`.
pub fn cd_residual(model: &LieModel, f: &TestFunction, x: &[f64], ell: f64, k: &DeclaredConstants) -> Result<f64> {
    Ok(cd_terms(model, f, x, ell, k)?.residual())
}

pub fn cd_terms(model: &LieModel, f: &TestFunction, x: &[f64], ell: f64, k: &DeclaredConstants) -> Result<CdTerms> {
    check_ell(ell)?;
    let (ctx, j) = context_for(model, f, x, 3)?;
    Ok(ctx.point_report(&j, &[])?.cd_terms(ell, k))
}

/// RHS − LHS of the two "Γ of Γ" inequalities, horizontal first.
pub fn double_gamma_residuals(model: &LieModel, f: &TestFunction, x: &[f64], ell: f64, c: f64) -> Result<(f64, f64)> {
    check_ell(ell)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    let report = geometry::geometry_report(model)?;
    let (ctx, j) = context_for(model, f, x, 3)?;
    double_gamma_with(&ctx, &j, ell, report.rho_h - 1.0 / c, -c * report.m_hv * report.m_hv)
}

/// Same as [`double_gamma_residuals`] with `ϱ₁`, `ϱ₂` supplied.
pub fn double_gamma_with(ctx: &PointContext, j: &Jet, ell: f64, varrho1: f64, varrho2: f64) -> Result<(f64, f64)> {
    let gh = ctx.gamma(j, j, Part::H)?;
    let gv = ctx.gamma(j, j, Part::V)?;
    let g2h = ctx.gamma2(j, Part::H)?.value();
    let g2v = ctx.gamma2(j, Part::V)?.value();
    let gh_gh = ctx.gamma(&gh, &gh, Part::H)?.value();
    let gh_gv = ctx.gamma(&gv, &gv, Part::H)?.value();
    let (h, v) = (gh.value(), gv.value());
    let first = h * (g2h + ell * g2v - (varrho1 - 1.0 / ell) * h - varrho2 * v) - 0.25 * gh_gh;
    let second = v * g2v - 0.25 * gh_gv;
    Ok((first, second))
}

/// `|Γ^h(f, Γ^v(f)) − Γ^v(f, Γ^h(f))|` at `x`.
pub fn condb_residual(model: &LieModel, f: &TestFunction, x: &[f64]) -> Result<f64> {
    let (ctx, j) = context_for(model, f, x, 2)?;
    condb_with(&ctx, &j)
}

pub fn condb_with(ctx: &PointContext, j: &Jet) -> Result<f64> {
    let gh = ctx.gamma(j, j, Part::H)?;
    let gv = ctx.gamma(j, j, Part::V)?;
    let a = ctx.gamma(j, &gv, Part::H)?.value();
    let b = ctx.gamma(j, &gh, Part::V)?.value();
    Ok((a - b).abs())
}

/// `Δ_h Δ f` and `Δ Δ_h f` with `Δ = L + Σ V_s²`.
pub fn commutation_terms(ctx: &PointContext, j: &Jet) -> Result<(f64, f64)> {
    if j.order() < 4 {
        return Err(Error::OrderExhausted("commutation needs jets of order ≥ 4".into()));
    }
    let full = |g: &Jet| -> Result<Jet> {
        let mut out = ctx.sublaplacian(g)?;
        out.axpy(1.0, &ctx.vertical_laplacian(g)?);
        Ok(out)
    };
    let a = ctx.sublaplacian(&full(j)?)?.value();
    let b = full(&ctx.sublaplacian(j)?)?.value();
    Ok((a, b))
}

/// `|Δ_h Δ f − Δ Δ_h f|` at `x`.
pub fn commutation_residual(model: &LieModel, f: &TestFunction, x: &[f64]) -> Result<f64> {
    let (ctx, j) = context_for(model, f, x, 4)?;
    let (a, b) = commutation_terms(&ctx, &j)?;
    Ok((a - b).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Term;
    use crate::model_zoo::{build_abelian, build_engel, build_heisenberg};

    fn heis_k() -> DeclaredConstants {
        DeclaredConstants { n: 2, rho1: 0.0, rho20: 0.5, rho21: 0.0 }
    }

    #[test]
    fn sublaplacian_examples() {
        let m = build_heisenberg();
        let x2 = TestFunction::monomial(&[2, 0, 0]);
        assert!((sublaplacian(&m, &x2, &[0.3, -1.2, 0.7]).unwrap() - 2.0).abs() < 1e-14);
        let z = TestFunction::coordinate(3, 2);
        assert!(sublaplacian(&m, &z, &[0.3, -1.2, 0.7]).unwrap().abs() < 1e-14);
        let c = TestFunction::constant(3, 4.0);
        assert_eq!(sublaplacian(&m, &c, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn gamma_examples() {
        let m = build_heisenberg();
        let z = TestFunction::coordinate(3, 2);
        let x = TestFunction::coordinate(3, 0);
        let o = [0.0; 3];
        assert_eq!(gamma(&m, &z, &z, &o, Part::H).unwrap(), 0.0);
        assert_eq!(gamma(&m, &z, &z, &o, Part::V).unwrap(), 1.0);
        let p = [0.4, -0.6, 1.0];
        assert!((gamma(&m, &z, &z, &p, Part::H).unwrap() - (0.16 + 0.36) / 4.0).abs() < 1e-15);
        assert_eq!(gamma(&m, &x, &x, &p, Part::H).unwrap(), 1.0);
        assert_eq!(gamma(&m, &x, &x, &p, Part::V).unwrap(), 0.0);
        let c = TestFunction::constant(3, 2.0);
        assert_eq!(gamma(&m, &z, &c, &p, Part::H).unwrap(), 0.0);
    }

    #[test]
    fn gamma2_examples() {
        let m = build_heisenberg();
        let z = TestFunction::coordinate(3, 2);
        let o = [0.0; 3];
        assert!((gamma2(&m, &z, &o, Gamma2Kind::H).unwrap() - 0.5).abs() < 1e-15);
        assert!(gamma2(&m, &z, &o, Gamma2Kind::V).unwrap().abs() < 1e-15);
        let x = TestFunction::coordinate(3, 0);
        assert!(gamma2(&m, &x, &[0.2, 0.5, -0.1], Gamma2Kind::H).unwrap().abs() < 1e-15);
        let flat = build_abelian(3, 0).unwrap();
        let lin = TestFunction::polynomial(
            3,
            vec![Term { exponents: vec![1, 0, 0], coeff: 2.0 }, Term { exponents: vec![0, 0, 1], coeff: -1.0 }],
        );
        assert_eq!(gamma2(&flat, &lin, &[0.3, 0.1, 0.2], Gamma2Kind::Mixed(2.0)).unwrap(), 0.0);
    }

    #[test]
    fn cd_examples() {
        let m = build_heisenberg();
        let z = TestFunction::coordinate(3, 2);
        for ell in [0.1, 1.0, 10.0] {
            assert!(cd_residual(&m, &z, &[0.0; 3], ell, &heis_k()).unwrap().abs() < 1e-12);
        }
        let x = TestFunction::coordinate(3, 0);
        assert!((cd_residual(&m, &x, &[0.0; 3], 1.0, &heis_k()).unwrap() - 1.0).abs() < 1e-15);
        let c = TestFunction::constant(3, 1.0);
        assert_eq!(cd_residual(&m, &c, &[0.5; 3], 0.3, &heis_k()).unwrap(), 0.0);
        assert!(cd_residual(&m, &x, &[0.0; 3], 0.0, &heis_k()).is_err());
    }

    #[test]
    fn double_gamma_examples() {
        let m = build_heisenberg();
        let z = TestFunction::coordinate(3, 2);
        let (_, second) = double_gamma_residuals(&m, &z, &[0.0; 3], 1.0, 1.0).unwrap();
        assert!(second.abs() < 1e-15);
        let c = TestFunction::constant(3, 1.0);
        assert_eq!(double_gamma_residuals(&m, &c, &[0.1; 3], 1.0, 1.0).unwrap(), (0.0, 0.0));
        assert!(double_gamma_residuals(&m, &c, &[0.1; 3], 1.0, 0.0).is_err());
    }

    #[test]
    fn condb_heisenberg_vs_engel() {
        let h = build_heisenberg();
        let f = TestFunction::random_polynomial(3, 4, 9);
        assert!(condb_residual(&h, &f, &[0.3, -0.2, 0.5]).unwrap() <= 1e-12);
        let e = build_engel();
        let f = TestFunction::monomial(&[0, 0, 0, 2]);
        assert!(condb_residual(&e, &f, &[0.4, 0.7, -0.3, 0.2]).unwrap() > 1e-6);
    }

    #[test]
    fn commutation_heisenberg() {
        let h = build_heisenberg();
        let f = TestFunction::random_polynomial(3, 4, 4);
        let r = commutation_residual(&h, &f, &[0.5, 0.1, -0.4]).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn order_checks() {
        let h = build_heisenberg();
        let ctx = PointContext::new(&h, &[0.0; 3], 2).unwrap();
        let j = ctx.lift(&TestFunction::coordinate(3, 0)).unwrap();
        assert!(matches!(ctx.gamma2(&j, Part::H), Err(Error::OrderExhausted(_))));
    }
}
