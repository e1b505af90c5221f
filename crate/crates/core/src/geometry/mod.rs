//! Curvature invariants of a model, computed in its orthonormal frame.
//!
//! Left invariance makes every quantity point independent, so all tensors
//! are plain arrays of frame components.

mod constants;
mod ricci;

pub use constants::{assemble_constants, closed_form_alpha, grad_bound_rate, CChoice, CDConstants, Objective};
pub use ricci::{ricci_components, riemann_ricci_compare, RicciComparison};

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model_zoo::{FrameAlgebra, LieModel};
use crate::util::sym_eigenvalues;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub model: String,
    /// Upper curvature bound, the sup of `‖R(v,·)‖` over unit horizontal `v`.
    pub m_r_max: f64,
    /// Lower curvature bound, `√λ_min` of the vertical Gram matrix.
    pub m_r_min: f64,
    pub rho_h: f64,
    pub m_hv: f64,
    pub m_grad_v: f64,
    pub rho_lv: f64,
    /// Whether `m_r_max = 1` holds for the metric as given.
    pub normalized: bool,
    /// Horizontal Ricci form in the orthonormal horizontal frame.
    pub ric_h: Vec<Vec<f64>>,
}

impl GeometryReport {
    /// `½ m_R² ρ_H − M_HV²`.
    pub fn kappa(&self) -> f64 {
        0.5 * self.m_r_min * self.m_r_min * self.rho_h - self.m_hv * self.m_hv
    }
}

/// Flat 4-tensor `R^p_{ijl}` of a left-invariant connection; index `((p*d + i)*d + j)*d + l`.
pub(crate) fn curvature(alg: &FrameAlgebra, conn: impl Fn(usize, usize, usize) -> f64) -> Vec<f64> {
    let d = alg.dim();
    let mut gam = vec![0.0; d * d * d];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                gam[(a * d + b) * d + c] = conn(c, a, b);
            }
        }
    }
    let g = |c: usize, a: usize, b: usize| gam[(a * d + b) * d + c];
    let mut r = vec![0.0; d * d * d * d];
    for p in 0..d {
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    let mut s = 0.0;
                    for m in 0..d {
                        s += g(m, j, l) * g(p, i, m) - g(m, i, l) * g(p, j, m) - alg.c(m, i, j) * g(p, m, l);
                    }
                    r[((p * d + i) * d + j) * d + l] = s;
                }
            }
        }
    }
    r
}

/// `(M_R, m_R)`: horizontal curvature bounds in the metric as given.
pub fn curvature_bounds(model: &LieModel) -> (f64, f64) {
    let a = model.algebra();
    let (n, d) = (model.dim_h(), model.dim());
    if n == d {
        return (0.0, 0.0);
    }
    // Q_ik = Σ_{j∈H, s∈V} C^s_ij C^s_kj: sup of ‖R(v,·)‖² over unit v is λ_max(Q).
    let q = DMatrix::from_fn(n, n, |i, k| {
        let mut s = 0.0;
        for j in 0..n {
            for t in n..d {
                s += a.c(t, i, j) * a.c(t, k, j);
            }
        }
        s
    });
    let g = DMatrix::from_fn(d - n, d - n, |s, t| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                acc += a.c(n + s, i, j) * a.c(n + t, i, j);
            }
        }
        acc
    });
    let qmax = sym_eigenvalues(&q).last().copied().unwrap_or(0.0).max(0.0);
    let gmin = sym_eigenvalues(&g).first().copied().unwrap_or(0.0).max(0.0);
    (qmax.sqrt(), gmin.sqrt())
}

/// Rescales the vertical metric so that the upper curvature bound becomes 1.
pub fn normalize_vertical(model: &LieModel) -> Result<LieModel> {
    let (mr, _) = curvature_bounds(model);
    if mr <= 1e-14 {
        return Err(Error::Hypothesis(format!("{}: curvature bound is zero, cannot normalize", model.name())));
    }
    if (mr - 1.0).abs() <= 1e-15 {
        return Ok(model.clone());
    }
    model.with_vertical_scale(1.0 / (mr * mr))
}

/// `(ρ_H, Ric_H)`: the smallest eigenvalue and the horizontal Ricci form.
pub fn ricci_h(model: &LieModel) -> (f64, DMatrix<f64>) {
    let a = model.algebra();
    let (n, d) = (model.dim_h(), model.dim());
    let r = curvature(a, |c, x, y| a.adapted(c, x, y));
    let ric = DMatrix::from_fn(n, n, |b, c| (0..n).map(|q| r[((q * d + q) * d + b) * d + c]).sum());
    let sym = (&ric + ric.transpose()) * 0.5;
    let rho = sym_eigenvalues(&sym).first().copied().unwrap_or(0.0);
    (rho, sym)
}

/// `(∇̊_a R)^p_{ij}` for the horizontal curvature 2-form, index `((a*d + p)*d + i)*d + j`.
pub(crate) fn curvature_form_derivative(alg: &FrameAlgebra) -> Vec<f64> {
    let d = alg.dim();
    let n = alg.dim_h();
    let rr = |p: usize, i: usize, j: usize| {
        if p >= n && i < n && j < n {
            alg.c(p, i, j)
        } else {
            0.0
        }
    };
    let mut out = vec![0.0; d * d * d * d];
    for a in 0..d {
        for p in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for m in 0..d {
                        s += alg.adapted(p, a, m) * rr(m, i, j)
                            - alg.adapted(m, a, i) * rr(p, m, j)
                            - alg.adapted(m, a, j) * rr(p, i, m);
                    }
                    out[((a * d + p) * d + i) * d + j] = s;
                }
            }
        }
    }
    out
}

/// Symmetric matrix of `Ric_HV` on the whole frame.
pub fn ric_hv(model: &LieModel) -> DMatrix<f64> {
    let alg = model.algebra();
    let d = alg.dim();
    let dr = curvature_form_derivative(alg);
    // T(A, Z) = Σ_a g(A, (∇̊_a R)(F_a, Z))
    let t = DMatrix::from_fn(d, d, |p, j| (0..d).map(|a| dr[((a * d + p) * d + a) * d + j]).sum());
    (&t + t.transpose()) * 0.5
}

/// `(M_HV, M_∇v, ρ_Lv)`.
pub fn mixed_bounds(model: &LieModel) -> (f64, f64, f64) {
    let alg = model.algebra();
    let (n, d) = (model.dim_h(), model.dim());
    let ric = ric_hv(model);

    // Ric_HV(Z,Z) ≥ −2M‖Z_v‖‖Z_h‖ needs PSD diagonal blocks; then M is the
    // largest singular value of the mixed block.
    let hh = ric.view((0, 0), (n, n)).into_owned();
    let vv = ric.view((n, n), (d - n, d - n)).into_owned();
    let psd = |m: &DMatrix<f64>| sym_eigenvalues(m).first().is_none_or(|e| *e >= -1e-12);
    let m_hv = if psd(&hh) && psd(&vv) {
        if d > n {
            ric.view((n, 0), (d - n, n)).into_owned().singular_values().max()
        } else {
            0.0
        }
    } else {
        f64::INFINITY
    };

    // (∇̊_a v*)^{pq} = Γ̊^p_{aq}[q∈V] + Γ̊^q_{ap}[p∈V]
    let deriv = |a: usize, t: &DMatrix<f64>| {
        DMatrix::from_fn(d, d, |p, q| {
            (0..d).map(|m| alg.adapted(p, a, m) * t[(m, q)] + alg.adapted(q, a, m) * t[(p, m)]).sum::<f64>()
        })
    };
    let vstar = DMatrix::from_fn(d, d, |p, q| if p == q && p >= n { 1.0 } else { 0.0 });
    let first: Vec<DMatrix<f64>> = (0..d).map(|a| deriv(a, &vstar)).collect();
    let m_grad_v = first.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();

    // Δ'_h v* = Σ_{a∈H} (∇̊_a ∇̊_a v* − ∇̊_{∇̊_a F_a} v*)
    let mut lap = DMatrix::zeros(d, d);
    for a in 0..n {
        lap += deriv(a, &first[a]);
        for m in 0..d {
            let w = alg.adapted(m, a, a);
            if w != 0.0 {
                lap -= &first[m] * w;
            }
        }
    }
    let rho_lv = if d == n { 0.0 } else { laplacian_lower_bound(&lap, n) };
    (m_hv, m_grad_v, rho_lv)
}

/// Largest `ρ` with `Q(α, α) ≥ ρ ‖α_V‖²` for every covector `α`.
fn laplacian_lower_bound(q: &DMatrix<f64>, n: usize) -> f64 {
    let d = q.nrows();
    let sym = (q + q.transpose()) * 0.5;
    let hh = sym.view((0, 0), (n, n)).into_owned();
    let hv = sym.view((0, n), (n, d - n)).into_owned();
    let vv = sym.view((n, n), (d - n, d - n)).into_owned();
    if hh.iter().all(|x| x.abs() <= 1e-12) && hv.iter().all(|x| x.abs() <= 1e-12) {
        return sym_eigenvalues(&vv)[0];
    }
    // Minimizing over α_H leaves the Schur complement; unbounded below if Q_HH is not positive definite.
    match hh.clone().try_inverse() {
        Some(inv) if sym_eigenvalues(&hh)[0] > 1e-12 => sym_eigenvalues(&(vv - hv.transpose() * inv * hv))[0],
        _ => f64::NEG_INFINITY,
    }
}

type ReportCache = RwLock<HashMap<String, Arc<GeometryReport>>>;

fn report_cache() -> &'static ReportCache {
    static CACHE: OnceLock<ReportCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Invariants of the model with its metric as given (no normalization), cached by model identity.
pub fn geometry_report(model: &LieModel) -> Result<Arc<GeometryReport>> {
    if let Some(r) = report_cache().read().expect("geometry cache").get(model.id()) {
        return Ok(r.clone());
    }
    let (m_r_max, m_r_min) = curvature_bounds(model);
    let (rho_h, ric) = ricci_h(model);
    let (m_hv, m_grad_v, rho_lv) = mixed_bounds(model);
    let n = model.dim_h();
    let report = Arc::new(GeometryReport {
        model: model.name().to_string(),
        m_r_max,
        m_r_min,
        rho_h,
        m_hv,
        m_grad_v,
        rho_lv,
        normalized: (m_r_max - 1.0).abs() <= 1e-12,
        ric_h: (0..n).map(|i| (0..n).map(|j| ric[(i, j)]).collect()).collect(),
    });
    Ok(report_cache()
        .write()
        .expect("geometry cache")
        .entry(model.id().to_string())
        .or_insert(report)
        .clone())
}

/// Normalizes the vertical metric and reports on the normalized model.
pub fn normalized_geometry(model: &LieModel) -> Result<(LieModel, Arc<GeometryReport>)> {
    let m = normalize_vertical(model)?;
    let r = geometry_report(&m)?;
    Ok((m, r))
}

/// Normalized model with its default constants: the best decay rate if one exists, else `ρ₁ = 0`.
pub fn canonical_constants(model: &LieModel) -> Result<(LieModel, CDConstants)> {
    let (m, r) = normalized_geometry(model)?;
    let n = m.dim_h();
    let k = assemble_constants(&r, n, CChoice::Optimize(Objective::MaxAlpha))
        .or_else(|_| assemble_constants(&r, n, CChoice::Optimize(Objective::Rho1Zero)))?;
    Ok((m, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{build_abelian, build_engel, build_free_nilpotent, build_heisenberg, build_su2_pair};

    #[test]
    fn canonical_choices() {
        let (_, k) = canonical_constants(&build_heisenberg()).unwrap();
        assert_eq!((k.rho1, k.rho20, k.rho21, k.c), (0.0, 0.5, 0.0, None));
        let (_, k) = canonical_constants(&build_su2_pair(1.0).unwrap()).unwrap();
        assert!((k.rho1 - 4.0).abs() < 1e-12 && (k.rho20 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_invariants() {
        let r = geometry_report(&build_heisenberg()).unwrap();
        assert!((r.m_r_max - 1.0).abs() < 1e-15);
        assert!((r.m_r_min - 1.0).abs() < 1e-15);
        assert_eq!((r.rho_h, r.m_hv, r.m_grad_v, r.rho_lv), (0.0, 0.0, 0.0, 0.0));
        assert!(r.normalized);
    }

    #[test]
    fn abelian_invariants() {
        let m = build_abelian(2, 1).unwrap();
        assert_eq!(curvature_bounds(&m), (0.0, 0.0));
        assert_eq!(ricci_h(&m).0, 0.0);
        assert_eq!(mixed_bounds(&m), (0.0, 0.0, 0.0));
        assert!(normalize_vertical(&m).is_err());
    }

    #[test]
    fn free_nilpotent_normalization() {
        let m = build_free_nilpotent(3).unwrap();
        let (mr, mmin) = curvature_bounds(&m);
        assert!((mr * mr - 2.0).abs() < 1e-12);
        assert!((mmin - 1.0).abs() < 1e-12);
        let (nm, r) = normalized_geometry(&m).unwrap();
        assert!((r.m_r_max - 1.0).abs() < 1e-12);
        assert!((r.m_r_min * r.m_r_min - 0.5).abs() < 1e-12);
        // doubling first, then normalizing, lands on the same metric
        let doubled = m.with_vertical_scale(2.0).unwrap();
        let again = normalize_vertical(&doubled).unwrap();
        assert!((again.frame_metric() - nm.frame_metric()).abs().max() < 1e-12);
    }

    #[test]
    fn su2_pair_invariants() {
        for rho in [0.5, 1.0, 2.5] {
            let r = geometry_report(&build_su2_pair(rho).unwrap()).unwrap();
            assert!((r.m_r_max - 1.0).abs() < 1e-12, "{r:?}");
            assert!((r.m_r_min * r.m_r_min - 0.5).abs() < 1e-12);
            assert!((r.rho_h - 4.0 * rho).abs() < 1e-9 * rho, "{r:?}");
            assert!(r.m_hv.abs() < 1e-12 && r.m_grad_v.abs() < 1e-12 && r.rho_lv.abs() < 1e-12);
        }
    }

    #[test]
    fn engel_is_not_parallel() {
        let r = geometry_report(&build_engel()).unwrap();
        assert_eq!(r.m_r_min, 0.0);
        assert!(r.m_grad_v > 0.1);
    }
}
