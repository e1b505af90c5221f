//! Closed-form values computed independently of the library's pipelines.

use std::f64::consts::PI;

use gammalab::geometry::canonical_constants;
use gammalab::heat::{cc_distance, heat_kernel_series, mc_semigroup, McSettings, PdeSettings};
use gammalab::jet::TestFunction;
use gammalab::model_zoo::{build_heisenberg, model_by_name};
use gammalab::verify::spectral::pair_eigenvalues;

/// Eigenvalues of `−2ρ(J₁ + 2J₂)²` from `(J₁ + 2J₂)² = 2J² + 2J₂² − J₁²`, with `J = J₁ + J₂`.
fn coupled_spectrum(rho: f64, twice_j1: usize, twice_j2: usize) -> Vec<f64> {
    let (j1, j2) = (twice_j1 as f64 / 2.0, twice_j2 as f64 / 2.0);
    let mut out = Vec::new();
    let mut twice_j = twice_j1.abs_diff(twice_j2);
    while twice_j <= twice_j1 + twice_j2 {
        let j = twice_j as f64 / 2.0;
        let ev = -2.0 * rho * (2.0 * j * (j + 1.0) + 2.0 * j2 * (j2 + 1.0) - j1 * (j1 + 1.0));
        out.extend(std::iter::repeat_n(ev, twice_j + 1));
        twice_j += 2;
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

#[test]
fn su2_pair_spectrum_matches_angular_momentum_coupling() {
    for a in 0..=4 {
        for b in 0..=4 {
            let got = pair_eigenvalues(1.0, a, b);
            let want = coupled_spectrum(1.0, a, b);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10, "({a}, {b}): {got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn heisenberg_li_yau_factors() {
    // N = (n/4)(√(4n−3) + √(2n−1))², D = √((2n−1)(4n−3)) at n = 2.
    let (_, k) = canonical_constants(&build_heisenberg()).unwrap();
    let n = 2.0f64;
    let big_n = n / 4.0 * ((4.0 * n - 3.0).sqrt() + (2.0 * n - 1.0).sqrt()).powi(2);
    let big_d = ((2.0 * n - 1.0) * (4.0 * n - 3.0)).sqrt();
    assert!((k.big_n.unwrap() - big_n).abs() < 1e-12);
    assert!((k.big_d.unwrap() - big_d).abs() < 1e-12);
    assert!((big_n - 7.873).abs() < 1e-3);
}

#[test]
fn free_nilpotent_vertical_constant() {
    for n in 2..=5usize {
        let (_, k) = canonical_constants(&model_by_name(&format!("free_nilpotent_{n}")).unwrap()).unwrap();
        assert!((k.rho20 - 1.0 / (2.0 * (n as f64 - 1.0))).abs() < 1e-12, "n = {n}: {}", k.rho20);
        assert_eq!(k.rho1, 0.0);
    }
}

#[test]
fn heisenberg_distance_to_the_centre() {
    // The shortest loop enclosing area |z| is a circle: d(0, (0,0,z)) = √(4π|z|).
    let h = build_heisenberg();
    for z in [0.01, 0.3, 1.0, 2.5] {
        let d = cc_distance(&h, &[0.0; 3], &[0.0, 0.0, z]).unwrap();
        assert!((d.value - (4.0 * PI * z).sqrt()).abs() < 1e-8, "z = {z}: {d:?}");
    }
}

#[test]
fn heisenberg_moments_by_monte_carlo() {
    // With P_t = e^{tL/2}: P_t x₀² = x₀² + t, P_t(x₀x₁) = x₀x₁ and P_t z² = z² + (t(x₀² + x₁²) + t²)/4.
    let h = build_heisenberg();
    let x = [0.3, -0.2, 0.5];
    let t = 0.8;
    let s = McSettings::new(40_000, 100, 11);
    let cases = [
        (vec![2, 0, 0], x[0] * x[0] + t),
        (vec![1, 1, 0], x[0] * x[1]),
        (vec![0, 0, 2], x[2] * x[2] + (t * (x[0] * x[0] + x[1] * x[1]) + t * t) / 4.0),
    ];
    for (e, want) in cases {
        let est = mc_semigroup(&h, &TestFunction::monomial(&e), &x, t, &s).unwrap();
        assert!((est.value - want).abs() <= 4.0 * est.error + 1e-3, "{e:?}: {} ± {} vs {want}", est.value, est.error);
    }
}

#[test]
fn heisenberg_kernel_on_the_diagonal() {
    // Fourier transform in z turns L into a Landau Hamiltonian; the result is p_t(0,0) = 1/(4t²).
    let s = PdeSettings { half_width: 4.0, h: 0.2, dt: 0.02, ..PdeSettings::default() };
    let series = heat_kernel_series(&[0.0; 3], &[0.0; 3], &[0.7, 1.0], &s, 0.15).unwrap();
    for e in series {
        let exact = 0.25 / (e.t * e.t);
        assert!((e.value - exact).abs() <= e.error, "t = {}: {} ± {} vs {exact}", e.t, e.value, e.error);
    }
}
