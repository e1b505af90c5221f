use nalgebra::DMatrix;

use super::group::Realization;
use super::{DeclaredConstants, LieModel};
use crate::{Error, Result};

/// Flat structure-constant buffer with antisymmetric insertion.
struct Brackets {
    d: usize,
    c: Vec<f64>,
}

impl Brackets {
    fn new(d: usize) -> Brackets {
        Brackets { d, c: vec![0.0; d * d * d] }
    }

    /// Adds `w · E_k` to `[E_i, E_j]` and the negative to `[E_j, E_i]`.
    fn set(&mut self, i: usize, j: usize, k: usize, w: f64) {
        let d = self.d;
        self.c[(i * d + j) * d + k] += w;
        self.c[(j * d + i) * d + k] -= w;
    }
}

pub fn build_heisenberg() -> LieModel {
    let mut b = Brackets::new(3);
    b.set(0, 1, 2, 1.0);
    let declared = DeclaredConstants { n: 2, rho1: 0.0, rho20: 0.5, rho21: 0.0 };
    LieModel::new("heisenberg", 2, 1, b.c, DMatrix::identity(3, 3), Some(declared))
        .expect("heisenberg algebra is well formed")
}

/// Free step-2 nilpotent algebra on `n` generators; `V_{ij}` for `i < j` in lexicographic order.
pub fn build_free_nilpotent(n: usize) -> Result<LieModel> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("free nilpotent algebra needs n ≥ 2, got {n}")));
    }
    let nv = n * (n - 1) / 2;
    let d = n + nv;
    let mut b = Brackets::new(d);
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            b.set(i, j, k, 1.0);
            k += 1;
        }
    }
    let declared = DeclaredConstants { n, rho1: 0.0, rho20: 1.0 / (2.0 * (n as f64 - 1.0)), rho21: 0.0 };
    LieModel::new(format!("free_nilpotent_{n}"), n, nv, b.c, DMatrix::identity(d, d), Some(declared))
}

/// Step-3 Engel algebra `[X₁,X₂] = X₃`, `[X₁,X₃] = X₄` with `H = span(X₁, X₂)`.
pub fn build_engel() -> LieModel {
    let mut b = Brackets::new(4);
    b.set(0, 1, 2, 1.0);
    b.set(0, 2, 3, 1.0);
    LieModel::new("engel", 2, 2, b.c, DMatrix::identity(4, 4), None).expect("engel algebra is well formed")
}

/// `su(2) ⊕ su(2)` with horizontal fields `(A, 2A)` and vertical fields `(A, 0)`.
///
/// The frame is `(A_0, A_1, A_2, W_0, W_1, W_2)` built from a basis `X_i`
/// that is orthonormal for `−tr(ad·ad)/(4ρ)`, so `[X_i, X_j] = √(2ρ) ε_ijk X_k`.
pub fn build_su2_pair(rho: f64) -> Result<LieModel> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("su2_pair needs ρ > 0, got {rho}")));
    }
    let s = (2.0 * rho).sqrt();
    let mut metric = DMatrix::identity(6, 6);
    for i in 3..6 {
        metric[(i, i)] = 1.0 / (4.0 * rho);
    }
    let declared = DeclaredConstants { n: 3, rho1: 4.0 * rho, rho20: 0.25, rho21: 0.0 };
    let name = if rho == 1.0 { "su2_pair".to_string() } else { format!("su2_pair_{rho}") };
    let model = LieModel::new(name, 3, 3, su2_pair_constants(s), metric, Some(declared))?;
    Ok(model.with_realization(Realization::su2_pair(s)))
}

/// Raw structure constants of the `su(2) ⊕ su(2)` frame with bracket scale `s`.
pub(crate) fn su2_pair_constants(s: f64) -> Vec<f64> {
    let mut b = Brackets::new(6);
    for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        b.set(i, j, k, 2.0 * s);
        b.set(i, j, 3 + k, -s);
        b.set(i, 3 + j, 3 + k, s);
        b.set(3 + i, j, 3 + k, s);
        b.set(3 + i, 3 + j, 3 + k, s);
    }
    b.c
}

/// Flat model `R^{n+v}` with all brackets zero.
pub fn build_abelian(n: usize, v: usize) -> Result<LieModel> {
    let d = n + v;
    LieModel::new(format!("abelian_{n}"), n, v, vec![0.0; d * d * d], DMatrix::identity(d, d), None)
}

/// Every model the suite knows by default.
pub fn shipped_models() -> Vec<LieModel> {
    vec![
        build_heisenberg(),
        build_free_nilpotent(3).expect("n = 3"),
        build_free_nilpotent(4).expect("n = 4"),
        build_engel(),
        build_su2_pair(1.0).expect("ρ = 1"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_bracket() {
        let m = build_heisenberg();
        assert_eq!(m.c(2, 0, 1), 1.0);
        assert_eq!(m.c(2, 1, 0), -1.0);
        assert_eq!(m.algebra().jacobi_residual(), 0.0);
    }

    #[test]
    fn free_nilpotent_dimensions() {
        assert_eq!(build_free_nilpotent(3).unwrap().dim(), 6);
        let m = build_free_nilpotent(4).unwrap();
        assert_eq!((m.dim(), m.dim_v()), (10, 6));
        assert_eq!(m.declared_constants().unwrap().rho20, 1.0 / 6.0);
        assert!(build_free_nilpotent(1).is_err());
    }

    #[test]
    fn free_nilpotent_two_is_heisenberg() {
        let a = build_free_nilpotent(2).unwrap();
        let b = build_heisenberg();
        assert_eq!(a.raw_constants(), b.raw_constants());
        assert_eq!(a.frame_metric(), b.frame_metric());
    }

    #[test]
    fn su2_pair_is_lie_algebra() {
        let m = build_su2_pair(1.7).unwrap();
        assert!(m.algebra().jacobi_residual() < 1e-12);
        assert!(build_su2_pair(0.0).is_err());
        assert!(build_su2_pair(-1.0).is_err());
    }

    #[test]
    fn su2_pair_killing_form_normalization() {
        // ⟨X, X⟩ = −tr(ad X ad X)/(4ρ) must be 1 on the first factor's generators.
        let rho: f64 = 0.6;
        let s = (2.0 * rho).sqrt();
        let ad = |i: usize| {
            DMatrix::from_fn(3, 3, |k, j| {
                let eps = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];
                eps.iter()
                    .map(|&(a, b, c)| {
                        if a == i && b == j && c == k {
                            s
                        } else if b == i && a == j && c == k {
                            -s
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
            })
        };
        for i in 0..3 {
            let a = ad(i);
            let norm = -(&a * &a).trace() / (4.0 * rho);
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn engel_is_step_three() {
        let m = build_engel();
        assert_eq!(m.realization().nilpotency_step(), Some(3));
    }
}
