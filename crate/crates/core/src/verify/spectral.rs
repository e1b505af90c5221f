//! Spectrum of the horizontal sub-Laplacian on SU(2)×SU(2) from explicit spin matrices.
//!
//! With `X_i` an orthonormal basis of su(2) for the shipped metric,
//! `[X_i, X_j] = s ε_ijk X_k` with `s = √(2ρ)`, and `X_i ↦ −i s J_i` in spin `j`.
//! The horizontal fields are `X_i⁽¹⁾ + 2X_i⁽²⁾`, so on the summand `(j₁, j₂)`
//! of Peter-Weyl the operator `Δ_h` acts as `−2ρ Σ_i K_i²` with
//! `K_i = J_i⊗1 + 2·1⊗J_i`. `J_y` is imaginary; writing `J_y = −iB` with `B`
//! real antisymmetric gives the real symmetric form `K_x² − B_K² + K_z²`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::result::{CaseRow, CheckResult, Verdict};
use crate::geometry::{assemble_constants, geometry_report, CChoice};
use crate::model_zoo::build_su2_pair;
use crate::{Error, Result};

/// Real matrices `(J_x, B, J_z)` for spin `j = twice_j / 2`, with `J_y = −iB`.
fn spin_matrices(twice_j: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let dim = twice_j + 1;
    let j = twice_j as f64 / 2.0;
    let mut jp = DMatrix::zeros(dim, dim);
    let mut jz = DMatrix::zeros(dim, dim);
    // Basis index k has m = j − k.
    for k in 0..dim {
        let m = j - k as f64;
        jz[(k, k)] = m;
        if k > 0 {
            // J₊|m⟩ = √(j(j+1) − m(m+1)) |m+1⟩
            jp[(k - 1, k)] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        }
    }
    let jm = jp.transpose();
    let jx = (&jp + &jm) * 0.5;
    let b = (&jp - &jm) * 0.5;
    (jx, b, jz)
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Eigenvalues of `Δ_h` on the `(j₁, j₂)` summand, ascending.
pub fn pair_eigenvalues(rho: f64, twice_j1: usize, twice_j2: usize) -> Vec<f64> {
    let (x1, b1, z1) = spin_matrices(twice_j1);
    let (x2, b2, z2) = spin_matrices(twice_j2);
    let i1 = DMatrix::identity(twice_j1 + 1, twice_j1 + 1);
    let i2 = DMatrix::identity(twice_j2 + 1, twice_j2 + 1);
    let k = |a: &DMatrix<f64>, b: &DMatrix<f64>| kron(a, &i2) + kron(&i1, b) * 2.0;
    let kx = k(&x1, &x2);
    let kb = k(&b1, &b2);
    let kz = k(&z1, &z2);
    let casimir = &kx * &kx - &kb * &kb + &kz * &kz;
    let op = casimir * (-2.0 * rho);
    let sym = (&op + op.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Nonzero eigenvalue of smallest magnitude over all pairs with `j₁, j₂ ≤ j_max`.
pub fn first_eigenvalue(rho: f64, twice_j_max: usize) -> f64 {
    let zero = 1e-9 * rho.abs().max(1.0);
    let mut best = f64::NEG_INFINITY;
    for a in 0..=twice_j_max {
        for b in 0..=twice_j_max {
            for ev in pair_eigenvalues(rho, a, b) {
                if ev.abs() > zero && ev > best {
                    best = ev;
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralGap {
    pub rho: f64,
    pub j_max: f64,
    /// Eigenvalue of the unhalved `Δ_h` closest to zero.
    pub lambda1: f64,
    /// Change in `λ₁` when `j_max` grows by one.
    pub stability: f64,
}

/// `λ₁` plus checks of the decay-rate bound `α ≤ −λ₁` and the curvature spectral bound.
pub fn spectral_gap_su2_pair(rho: f64, j_max: f64) -> Result<(SpectralGap, CheckResult, CheckResult)> {
    if !(j_max >= 1.0) || (2.0 * j_max).fract() != 0.0 {
        return Err(Error::InvalidArgument(format!("j_max must be a half-integer ≥ 1, got {j_max}")));
    }
    let twice = (2.0 * j_max) as usize;
    let lambda1 = first_eigenvalue(rho, twice);
    let next = first_eigenvalue(rho, twice + 2);
    let stability = (next - lambda1).abs();
    let gap = SpectralGap { rho, j_max, lambda1, stability };

    let model = build_su2_pair(rho)?;
    let k = assemble_constants(&*geometry_report(&model)?, 3, CChoice::Infinite)?;
    let alpha = k.alpha.ok_or_else(|| Error::Hypothesis("no decay rate for these constants".into()))?;
    let bound = k
        .spectral_gap_bound
        .ok_or_else(|| Error::Hypothesis("no spectral bound for these constants".into()))?;
    let stable = stability <= 1e-9;
    let make = |anchor: &str, lower: f64, name: &str| {
        let mut r = CheckResult::new("spectral_gap", anchor, model.name(), &(rho, j_max, name), -lambda1 - lower, 1e-9, 0.0)
            .detail("lambda1", lambda1)
            .detail("bound", lower)
            .detail("stability", stability)
            // Whether the first eigenfunction turns the inequality into an equality.
            .detail("equality_attained", if (-lambda1 - lower).abs() <= 1e-9 { 1.0 } else { 0.0 })
            .with_rows(vec![CaseRow { case: name.to_string(), lhs: lower, rhs: -lambda1, margin: -lambda1 - lower, error: stability }]);
        if !stable {
            r.verdict = Verdict::Inconclusive;
            r = r.note("gap not yet stable under j_max → j_max + 1");
        }
        r
    };
    let by_rate = make("poincare.c", alpha, "decay_rate");
    let by_curvature = make("spectral_bound", bound, "curvature_bound");
    Ok((gap, by_rate, by_curvature))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_commutators() {
        for tj in 1..5 {
            let (x, b, z) = spin_matrices(tj);
            // [J_x, J_y] = i J_z becomes [J_x, B] = −J_z with J_y = −iB.
            let c = &x * &b - &b * &x;
            assert!((c + &z).abs().max() < 1e-12);
            // Casimir j(j+1)
            let j = tj as f64 / 2.0;
            let cas = &x * &x - &b * &b + &z * &z;
            let id = DMatrix::<f64>::identity(tj + 1, tj + 1) * (j * (j + 1.0));
            assert!((cas - id).abs().max() < 1e-12);
        }
    }

    #[test]
    fn trivial_pair_is_zero() {
        assert_eq!(pair_eigenvalues(1.0, 0, 0), vec![0.0]);
    }

    #[test]
    fn matches_coupling_formula() {
        // −2ρ[2J(J+1) + 2j₂(j₂+1) − j₁(j₁+1)] with J the coupled spin.
        let ev = pair_eigenvalues(1.0, 1, 1);
        let mut expected: Vec<f64> = vec![-2.0 * (1.5 - 0.75), -2.0 * (4.0 + 1.5 - 0.75), -2.0 * (4.0 + 1.5 - 0.75), -2.0 * (4.0 + 1.5 - 0.75)];
        expected.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in ev.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn gap_bounds_and_scaling() {
        let (g, a, b) = spectral_gap_su2_pair(1.0, 2.0).unwrap();
        assert!(a.passed() && b.passed(), "{a:?} {b:?}");
        assert!(g.stability <= 1e-9);
        let (g2, _, _) = spectral_gap_su2_pair(2.5, 2.0).unwrap();
        assert!((g2.lambda1 - 2.5 * g.lambda1).abs() < 1e-9);
    }
}
