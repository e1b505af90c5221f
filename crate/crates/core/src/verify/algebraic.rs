//! Pointwise checks on jets: the CD inequality, condition (B), commutation,
//! constant reproduction and the Ricci comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::result::{CaseRow, CheckResult};
use crate::gamma::{commutation_terms, condb_with, PointContext};
use crate::geometry::{canonical_constants, geometry_report, riemann_ricci_compare, CDConstants};
use crate::jet::TestFunction;
use crate::model_zoo::{validate, DeclaredConstants, LieModel};
use crate::util::mix_seed;
use crate::{Error, Result};

fn heisenberg() -> Vec<String> {
    vec!["heisenberg".into()]
}

fn window_point(d: usize, window: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d).map(|_| rng.random_range(-window..=window)).collect()
}

/// `10^k` for `steps` values of `k` evenly spaced in `[min_exp, max_exp]`.
pub fn ell_grid(min_exp: f64, max_exp: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![10f64.powf(min_exp)];
    }
    (0..steps)
        .map(|i| 10f64.powf(min_exp + (max_exp - min_exp) * i as f64 / (steps - 1) as f64))
        .collect()
}

/// Model to test on and the constants it is tested against.
///
/// Declared constants refer to the vertically normalized metric, so the sweep runs on that model.
pub fn model_and_constants(model: &LieModel) -> Result<(LieModel, DeclaredConstants, CDConstants)> {
    let (normalized, k) = canonical_constants(model)?;
    let declared = model.declared_constants().unwrap_or_else(|| k.declared());
    Ok((normalized, declared, k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdParams {
    pub models: Vec<String>,
    pub functions: usize,
    pub points: usize,
    pub degree: u32,
    pub window: f64,
    pub ell_min_exp: f64,
    pub ell_max_exp: f64,
    pub ell_steps: usize,
    /// Relative to `1 + |LHS| + |RHS|`.
    pub tolerance: f64,
    pub witness_tolerance: f64,
}

impl Default for CdParams {
    fn default() -> Self {
        CdParams {
            models: heisenberg(),
            functions: 10_000,
            points: 20,
            degree: 4,
            window: 1.0,
            ell_min_exp: -1.0,
            ell_max_exp: 1.0,
            ell_steps: 9,
            tolerance: 1e-9,
            witness_tolerance: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Worst {
    value: f64,
    function: usize,
    point: usize,
    ell: usize,
}

fn better(a: Worst, b: Worst) -> Worst {
    match a.value.total_cmp(&b.value) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if (a.function, a.point, a.ell) <= (b.function, b.point, b.ell) {
                a
            } else {
                b
            }
        }
    }
}

/// Minimum of `(LHS − RHS)/(1 + |LHS| + |RHS|)` over random polynomials, points and `ℓ`.
pub fn check_cd_inequality(model: &LieModel, p: &CdParams, seed: u64) -> Result<CheckResult> {
    let (m, k, _) = model_and_constants(model)?;
    let d = m.dim();
    let ells = ell_grid(p.ell_min_exp, p.ell_max_exp, p.ell_steps);
    let contexts: Vec<PointContext> = (0..p.points)
        .map(|i| PointContext::new(&m, &window_point(d, p.window, mix_seed(seed, (1 << 40) + i as u64)), 3))
        .collect::<Result<_>>()?;
    let per_function: Vec<Result<Vec<Worst>>> = (0..p.functions)
        .into_par_iter()
        .map(|fi| {
            let f = TestFunction::random_polynomial(d, p.degree, mix_seed(seed, fi as u64));
            let mut worst: Vec<Worst> = (0..ells.len())
                .map(|l| Worst { value: f64::INFINITY, function: fi, point: 0, ell: l })
                .collect();
            for (pi, ctx) in contexts.iter().enumerate() {
                let report = ctx.point_report(&ctx.lift(&f)?, &[])?;
                for (li, &ell) in ells.iter().enumerate() {
                    let t = report.cd_terms(ell, &k);
                    let w = Worst { value: t.residual() / t.scale(), function: fi, point: pi, ell: li };
                    worst[li] = better(worst[li], w);
                }
            }
            Ok(worst)
        })
        .collect();
    let mut by_ell: Vec<Worst> = (0..ells.len())
        .map(|l| Worst { value: f64::INFINITY, function: 0, point: 0, ell: l })
        .collect();
    for r in per_function {
        for (li, w) in r?.into_iter().enumerate() {
            by_ell[li] = better(by_ell[li], w);
        }
    }
    let overall = by_ell.iter().copied().fold(by_ell[0], better);
    let rows = by_ell
        .iter()
        .zip(&ells)
        .map(|(w, ell)| CaseRow { case: format!("ell={ell:.6}"), lhs: 0.0, rhs: 0.0, margin: w.value, error: 0.0 })
        .collect();
    let inputs = (model.name(), &k, p, seed);
    Ok(CheckResult::new("cd_inequality", "cd_inequality", model.name(), &inputs, overall.value, p.tolerance, 0.0)
        .detail("evaluations", (p.functions * p.points * ells.len()) as f64)
        .detail("worst_function", overall.function as f64)
        .detail("worst_point", overall.point as f64)
        .detail("worst_ell", ells[overall.ell])
        .note("margin is the relative residual (LHS − RHS)/(1 + |LHS| + |RHS|)")
        .note(format!("polynomials of degree ≤ {} on the window [−{w}, {w}]^{d}", p.degree, w = p.window))
        .with_rows(rows))
}

/// Equality case: the first vertical coordinate at the origin makes both sides equal for every `ℓ`.
pub fn check_cd_witness(model: &LieModel, p: &CdParams) -> Result<CheckResult> {
    let (m, k, _) = model_and_constants(model)?;
    if m.dim_v() == 0 {
        return Err(Error::InvalidArgument("witness needs a vertical direction".into()));
    }
    let d = m.dim();
    let f = TestFunction::coordinate(d, m.dim_h());
    let ctx = PointContext::new(&m, &vec![0.0; d], 3)?;
    let report = ctx.point_report(&ctx.lift(&f)?, &[])?;
    let ells = ell_grid(p.ell_min_exp, p.ell_max_exp, p.ell_steps);
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for &ell in &ells {
        let t = report.cd_terms(ell, &k);
        worst = worst.max(t.residual().abs());
        rows.push(CaseRow { case: format!("ell={ell:.6}"), lhs: t.lhs, rhs: t.rhs, margin: -t.residual().abs(), error: 0.0 });
    }
    Ok(CheckResult::new("cd_witness", "cd_inequality.sharpness", model.name(), &(model.name(), &k, &ells), -worst, p.witness_tolerance, 0.0)
        .detail("max_abs_residual", worst)
        .note(format!("f = {} at the origin", f.label()))
        .with_rows(rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsParams {
    pub models: Vec<String>,
    pub tolerance: f64,
}

impl Default for ConstantsParams {
    fn default() -> Self {
        ConstantsParams {
            models: vec![
                "heisenberg".into(),
                "free_nilpotent_3".into(),
                "free_nilpotent_4".into(),
                "su2_pair".into(),
            ],
            tolerance: 1e-9,
        }
    }
}

/// Assembled constants against the declared ones, plus vanishing mixed terms on metric-parallel models.
pub fn check_constants(model: &LieModel, p: &ConstantsParams) -> Result<Vec<CheckResult>> {
    let (_, k) = canonical_constants(model)?;
    let mut out = Vec::new();
    if let Some(declared) = model.declared_constants() {
        let dev = [k.rho1 - declared.rho1, k.rho20 - declared.rho20, k.rho21 - declared.rho21]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let rows = vec![
            CaseRow { case: "rho1".into(), lhs: k.rho1, rhs: declared.rho1, margin: -(k.rho1 - declared.rho1).abs(), error: 0.0 },
            CaseRow { case: "rho20".into(), lhs: k.rho20, rhs: declared.rho20, margin: -(k.rho20 - declared.rho20).abs(), error: 0.0 },
            CaseRow { case: "rho21".into(), lhs: k.rho21, rhs: declared.rho21, margin: -(k.rho21 - declared.rho21).abs(), error: 0.0 },
        ];
        let mut r = CheckResult::new("constants", "constants.reproduction", model.name(), &(model.name(), &k, &declared), -dev, p.tolerance, 0.0)
            .detail("rho1", k.rho1)
            .detail("rho20", k.rho20)
            .detail("rho21", k.rho21)
            .with_rows(rows);
        if let (Some(n), Some(d)) = (k.big_n, k.big_d) {
            r = r.detail("N", n).detail("D", d);
        }
        out.push(r.note(match k.c {
            Some(c) => format!("c = {c}"),
            None => "c = ∞".into(),
        }));
    }
    if validate(model).metric_parallel {
        let g = geometry_report(model)?;
        let worst = g.m_hv.abs().max(g.m_grad_v.abs());
        out.push(
            CheckResult::new("constants", "constants.mixed_terms", model.name(), &(model.name(), "mixed"), -worst, p.tolerance, 0.0)
                .detail("m_hv", g.m_hv)
                .detail("m_grad_v", g.m_grad_v),
        );
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CondBParams {
    pub models: Vec<String>,
    pub samples: usize,
    pub degree: u32,
    pub window: f64,
    /// Largest residual allowed on models where the condition should hold.
    pub tolerance: f64,
    /// A residual above this counts as a violation.
    pub violation_threshold: f64,
    /// Fraction of violations required on models where the condition should fail.
    pub violation_fraction: f64,
}

impl Default for CondBParams {
    fn default() -> Self {
        CondBParams {
            models: vec![
                "heisenberg".into(),
                "free_nilpotent_3".into(),
                "free_nilpotent_4".into(),
                "su2_pair".into(),
                "engel".into(),
            ],
            samples: 1000,
            degree: 4,
            // Roundoff in Γ-of-Γ terms grows with the polynomial's size; ±0.5 keeps it near 1e-14.
            window: 0.5,
            tolerance: 1e-12,
            violation_threshold: 1e-6,
            violation_fraction: 0.1,
        }
    }
}

/// Condition (B) on random `(f, x)`: it should hold exactly on metric-parallel models and visibly fail elsewhere.
pub fn check_condition_b(model: &LieModel, p: &CondBParams, seed: u64) -> Result<CheckResult> {
    let d = model.dim();
    let residuals: Vec<f64> = (0..p.samples)
        .into_par_iter()
        .map(|i| {
            let x = window_point(d, p.window, mix_seed(seed, (1 << 40) + i as u64));
            let f = TestFunction::random_polynomial(d, p.degree, mix_seed(seed, i as u64));
            let ctx = PointContext::new(model, &x, 2)?;
            condb_with(&ctx, &ctx.lift(&f)?)
        })
        .collect::<Result<_>>()?;
    let max = residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    let violations = residuals.iter().filter(|r| **r > p.violation_threshold).count();
    let fraction = violations as f64 / p.samples.max(1) as f64;
    let inputs = (model.name(), p, seed);
    let parallel = validate(model).metric_parallel;
    let r = if parallel {
        CheckResult::new("condition_b", "condition_b", model.name(), &inputs, -max, p.tolerance, 0.0)
    } else {
        CheckResult::new("condition_b", "condition_b.violation", model.name(), &inputs, fraction - p.violation_fraction, 0.0, 0.0)
            .note("model is not metric-parallel, so the condition is expected to fail")
    };
    Ok(r.detail("max_residual", max).detail("violation_fraction", fraction))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommutationParams {
    pub models: Vec<String>,
    pub samples: usize,
    pub degree: u32,
    pub window: f64,
    pub tolerance: f64,
}

impl Default for CommutationParams {
    fn default() -> Self {
        CommutationParams {
            models: vec![
                "heisenberg".into(),
                "free_nilpotent_3".into(),
                "free_nilpotent_4".into(),
                "su2_pair".into(),
            ],
            samples: 1000,
            degree: 4,
            window: 1.0,
            tolerance: 1e-9,
        }
    }
}

/// `Δ_h Δ f = Δ Δ_h f` on random quartics, relative to `1 + |Δ_hΔf| + |ΔΔ_hf|`.
pub fn check_commutation(model: &LieModel, p: &CommutationParams, seed: u64) -> Result<CheckResult> {
    let d = model.dim();
    let rel: Vec<f64> = (0..p.samples)
        .into_par_iter()
        .map(|i| {
            let x = window_point(d, p.window, mix_seed(seed, (1 << 40) + i as u64));
            let f = TestFunction::random_polynomial(d, p.degree, mix_seed(seed, i as u64));
            let ctx = PointContext::new(model, &x, 4)?;
            let (a, b) = commutation_terms(&ctx, &ctx.lift(&f)?)?;
            Ok((a - b).abs() / (1.0 + a.abs() + b.abs()))
        })
        .collect::<Result<_>>()?;
    let max = rel.iter().fold(0.0f64, |m, r| m.max(*r));
    Ok(CheckResult::new("commutation", "commutation", model.name(), &(model.name(), p, seed), -max, p.tolerance, 0.0)
        .detail("max_relative_residual", max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RicciParams {
    pub models: Vec<String>,
    pub directions: usize,
    pub tolerance: f64,
}

impl Default for RicciParams {
    fn default() -> Self {
        RicciParams { models: vec!["heisenberg".into(), "su2_pair".into()], directions: 50, tolerance: 1e-10 }
    }
}

/// Riemannian Ricci curvature against its split into horizontal, mixed and vertical terms.
///
/// The stated split carries a coefficient ¾ on `‖R(Y,·)‖²`; the
/// Heisenberg group gives `Ric(X, X) = −½` for unit horizontal `X`, which
/// forces ½. Both coefficients are reported.
pub fn check_ricci(model: &LieModel, p: &RicciParams, seed: u64) -> Result<Vec<CheckResult>> {
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..p.directions)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    let cmp = riemann_ricci_compare(model, &dirs)?;
    let inputs = (model.name(), p, seed);
    let stated = CheckResult::new("ricci_comparison", "riemann_ricci", model.name(), &inputs, -cmp.max_residual, p.tolerance, 0.0)
        .detail("max_residual", cmp.max_residual)
        .detail("max_residual_half_coefficient", cmp.max_corrected_residual)
        .note("coefficient ¾ on the curvature norm, as stated");
    let corrected = CheckResult::new(
        "ricci_comparison",
        "riemann_ricci.half_coefficient",
        model.name(),
        &inputs,
        -cmp.max_corrected_residual,
        p.tolerance,
        0.0,
    )
    .detail("max_residual", cmp.max_corrected_residual)
    .note("coefficient ½ on the curvature norm");
    Ok(vec![stated, corrected])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{build_engel, build_heisenberg, build_su2_pair};

    #[test]
    fn grid_endpoints() {
        let g = ell_grid(-1.0, 1.0, 9);
        assert_eq!(g.len(), 9);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[8] - 10.0).abs() < 1e-12 && (g[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_cd_sweep_passes() {
        let p = CdParams { functions: 40, points: 4, ..CdParams::default() };
        let r = check_cd_inequality(&build_heisenberg(), &p, 3).unwrap();
        assert!(r.passed(), "{r:?}");
        let w = check_cd_witness(&build_heisenberg(), &p).unwrap();
        assert!(w.passed(), "{w:?}");
    }

    #[test]
    fn cd_fails_with_inflated_constants() {
        let mut m = build_heisenberg().to_document();
        m.declared_constants = Some(DeclaredConstants { n: 2, rho1: 0.0, rho20: 5.0, rho21: 0.0 });
        let m = LieModel::from_document(&m).unwrap();
        let p = CdParams { functions: 20, points: 4, ..CdParams::default() };
        assert!(!check_cd_inequality(&m, &p, 3).unwrap().passed());
    }

    #[test]
    fn engel_violates_condition_b() {
        let p = CondBParams { samples: 100, ..CondBParams::default() };
        let r = check_condition_b(&build_engel(), &p, 1).unwrap();
        assert_eq!(r.anchor, "condition_b.violation");
        assert!(r.passed(), "{r:?}");
        let r = check_condition_b(&build_heisenberg(), &p, 1).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn su2_constants_match() {
        let r = check_constants(&build_su2_pair(1.0).unwrap(), &ConstantsParams::default()).unwrap();
        assert!(r.iter().all(|c| c.passed()), "{r:?}");
    }
}
