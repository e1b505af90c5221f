//! Semigroup inequalities evaluated with the Monte Carlo and PDE estimators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::algebraic::model_and_constants;
use super::result::{CaseRow, CheckResult};
use crate::geometry::{geometry_report, CDConstants};
use crate::heat::pde::normalized_bump;
use crate::heat::{cc_distance, frame_gradient, mc_semigroup, mc_stencil, pde_evolve, pde_evolve_with, HeatField, HeisenbergGrid, KernelEstimate, McSettings, PdeSettings};
use crate::jet::TestFunction;
use crate::model_zoo::LieModel;
use crate::util::mix_seed;
use crate::{Error, Result};

/// Monte Carlo runs below this many paths are rejected outright.
pub const MIN_PATHS: usize = 1000;

fn heisenberg() -> Vec<String> {
    vec!["heisenberg".into()]
}

fn require_paths(paths: usize) -> Result<()> {
    if paths < MIN_PATHS {
        return Err(Error::InvalidArgument(format!("at least {MIN_PATHS} paths are required, got {paths}")));
    }
    Ok(())
}

fn require_heisenberg(model: &LieModel) -> Result<()> {
    if model.dim() != 3 || model.dim_h() != 2 || model.c(2, 0, 1) != 1.0 {
        return Err(Error::Unsupported(format!("PDE checks run on the Heisenberg group only, not {}", model.name())));
    }
    Ok(())
}

fn rho2_positive(k: &CDConstants) -> Result<(f64, f64)> {
    match (k.big_n, k.big_d) {
        (Some(n), Some(d)) if k.rho20 > 0.0 => Ok((n, d)),
        _ => Err(Error::Hypothesis(format!("these bounds need ρ₂,₀ > 0, got {}", k.rho20))),
    }
}

/// `(1 − e^{−ρt})/ρ`, read as `t` when `ρ = 0`.
fn damped(rho: f64, t: f64) -> f64 {
    if rho == 0.0 {
        t
    } else {
        -(-rho * t).exp_m1() / rho
    }
}

/// Collapses per-case rows into one result, keeping the case furthest below its own tolerance.
fn worst_case(check_id: &str, anchor: &str, model: &str, inputs: &impl Serialize, rows: Vec<CaseRow>, sigmas: f64) -> CheckResult {
    let worst = rows
        .iter()
        .min_by(|a, b| (a.margin + sigmas * a.error).total_cmp(&(b.margin + sigmas * b.error)))
        .cloned()
        .unwrap_or(CaseRow { case: "none".into(), lhs: 0.0, rhs: 0.0, margin: 0.0, error: 0.0 });
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    CheckResult::new(check_id, anchor, model, inputs, worst.margin, sigmas * worst.error, worst.error)
        .detail("cases", rows.len() as f64)
        .detail("min_margin", min_margin)
        .note(format!("worst case {}", worst.case))
        .with_rows(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelityParams {
    pub models: Vec<String>,
    pub paths: usize,
    pub steps: usize,
    pub t: f64,
    /// Points at which `P_t 1 = 1` is checked.
    pub constant_points: usize,
    pub sigmas: f64,
}

impl Default for FidelityParams {
    fn default() -> Self {
        FidelityParams { models: heisenberg(), paths: 100_000, steps: 200, t: 1.0, constant_points: 5, sigmas: 3.0 }
    }
}

/// `P_t 1 = 1` exactly, and `P_t(x₀²)(0) = t` within the error bar.
///
/// The second identity uses `Lx₀² = 2`, which holds when `A₀ = ∂₀ + (vertical terms)`
/// as on step-2 groups in exponential coordinates.
pub fn check_semigroup_fidelity(model: &LieModel, p: &FidelityParams, seed: u64) -> Result<Vec<CheckResult>> {
    require_paths(p.paths)?;
    let d = model.dim();
    let settings = McSettings::new(p.paths.min(10_000), p.steps, seed);
    let one = TestFunction::constant(d, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for i in 0..p.constant_points {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let e = mc_semigroup(model, &one, &x, p.t, &settings)?;
        let dev = (e.value - 1.0).abs().max(e.error);
        worst = worst.max(dev);
        rows.push(CaseRow { case: format!("point {i}"), lhs: e.value, rhs: 1.0, margin: -dev, error: e.error });
    }
    let constant = CheckResult::new("semigroup_fidelity", "stochastic_completeness", model.name(), &(model.name(), p, seed), -worst, 0.0, 0.0)
        .with_rows(rows);

    let mut e = vec![0; d];
    e[0] = 2;
    let square = TestFunction::monomial(&e);
    let full = McSettings::new(p.paths, p.steps, mix_seed(seed, 2));
    let est = mc_semigroup(model, &square, &vec![0.0; d], p.t, &full)?;
    let dev = (est.value - p.t).abs();
    let moment = CheckResult::new("semigroup_fidelity", "semigroup.second_moment", model.name(), &(model.name(), p, seed), -dev, p.sigmas * est.error, est.error)
        .detail("estimate", est.value)
        .detail("std_error", est.error)
        .detail("expected", p.t)
        .with_rows(vec![CaseRow { case: "x0^2 at origin".into(), lhs: est.value, rhs: p.t, margin: -dev, error: est.error }]);
    Ok(vec![constant, moment])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientParams {
    pub models: Vec<String>,
    pub cases: usize,
    pub paths: usize,
    pub steps: usize,
    /// Finite-difference step along each frame field.
    pub delta: f64,
    pub degree: u32,
    pub window: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Fixed `ℓ` for variant (a).
    pub ell: f64,
    /// `ℓ₀` for variant (d).
    pub ell0: f64,
    pub sigmas: f64,
}

impl Default for GradientParams {
    fn default() -> Self {
        GradientParams {
            models: heisenberg(),
            cases: 10,
            paths: 20_000,
            steps: 50,
            delta: 1e-3,
            degree: 3,
            window: 0.5,
            t_min: 0.25,
            t_max: 1.0,
            ell: 1.0,
            ell0: 1.0,
            sigmas: 3.0,
        }
    }
}

/// One gradient-bound case: its inputs and the per-variant rows.
struct GradientCase {
    label: String,
    rows: Vec<(&'static str, CaseRow)>,
}

/// Gradient bounds (a)–(d) and both vertical-gradient displays on seeded `(f, x, t)`.
///
/// Everything comes from one common-random-number stencil run per case, with
/// centre observables `f², Γ^h f, Γ^v f, √Γ^v f, √Γ^h f`. Error bars are delta-method
/// standard errors with the full covariance, plus the upward bias of squared means.
pub fn check_gradient_bounds(model: &LieModel, p: &GradientParams, seed: u64) -> Result<Vec<CheckResult>> {
    require_paths(p.paths)?;
    let (m, _, k) = model_and_constants(model)?;
    let geo = geometry_report(&m)?;
    let kk = (-geo.rho_h).max(geo.m_hv * geo.m_hv);
    let d = m.dim();
    let nh = m.dim_h();
    let mut cases = Vec::new();
    for ci in 0..p.cases {
        let cs = mix_seed(seed, ci as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(cs);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-p.window..=p.window)).collect();
        let t = rng.random_range(p.t_min..=p.t_max);
        let f = TestFunction::random_polynomial(d, p.degree, mix_seed(cs, 1));
        let grad = |y: &[f64]| -> (f64, f64) {
            let g = frame_gradient(&m, &f, y).unwrap_or_else(|_| vec![f64::NAN; d]);
            (g[..nh].iter().map(|v| v * v).sum(), g[nh..].iter().map(|v| v * v).sum())
        };
        let f_sq = |y: &[f64]| f.eval(y).powi(2);
        let gh = |y: &[f64]| grad(y).0;
        let gv = |y: &[f64]| grad(y).1;
        let sqrt_gv = |y: &[f64]| grad(y).1.sqrt();
        let sqrt_gh = |y: &[f64]| grad(y).0.sqrt();
        let settings = McSettings::new(p.paths, p.steps, mix_seed(cs, 2));
        let run = mc_stencil(&m, &f, &x, t, &settings, p.delta, &[&f_sq, &gh, &gv, &sqrt_gv, &sqrt_gh])?;
        let s = &run.stats;
        let mean = |i: usize| s.mean(i);
        let se = |i: usize| s.std_error(i);
        let (e_sq, e_gh, e_gv, e_sgv, e_sgh) = (run.extra_index(0), run.extra_index(1), run.extra_index(2), run.extra_index(3), run.extra_index(4));
        let di = |a: usize| run.derivative_index(a);
        let sum_sq = |range: std::ops::Range<usize>| range.map(|a| mean(di(a)).powi(2)).sum::<f64>();
        let bias = |range: std::ops::Range<usize>| range.map(|a| se(di(a)).powi(2)).sum::<f64>();
        let (h_sq, v_sq) = (sum_sq(0..nh), sum_sq(nh..d));
        let (h_bias, v_bias) = (bias(0..nh), bias(nh..d));
        let var = mean(e_sq) - mean(0).powi(2);
        let var_bias = se(0).powi(2);
        let label = format!("{} x={:?} t={t:.4}", f.label(), x.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());
        let row = |lhs: f64, rhs: f64, err: f64| CaseRow { case: label.clone(), lhs, rhs, margin: rhs - lhs, error: err };
        let mut rows = Vec::new();

        // (a): Γ^{h+ℓv}(P_t f) ≤ e^{−α(ℓ)t} P_t Γ^{h+ℓv}(f)
        let alpha = crate::geometry::grad_bound_rate(&k, p.ell);
        let ea = (-alpha * t).exp();
        let mut g: Vec<(usize, f64)> = vec![(e_gh, ea), (e_gv, ea * p.ell)];
        g.extend((0..d).map(|a| (di(a), -2.0 * if a < nh { 1.0 } else { p.ell } * mean(di(a)))));
        let lhs = h_sq + p.ell * v_sq;
        let rhs = ea * (mean(e_gh) + p.ell * mean(e_gv));
        rows.push(("gradient_bound.a", row(lhs, rhs, s.linear_error(&g) + h_bias + p.ell * v_bias)));

        // (b): tΓ^h(P_t f) ≤ (1 + 2/ρ₂,₀ + (k₁ + k₂/ρ₂,₀)t)(P_t f² − (P_t f)²)
        if k.rho20 > 0.0 {
            let c = 1.0 + 2.0 / k.rho20 + (k.k1() + k.k2() / k.rho20) * t;
            let mut g = vec![(e_sq, c), (0, -2.0 * c * mean(0))];
            g.extend((0..nh).map(|a| (di(a), -2.0 * t * mean(di(a)))));
            rows.push(("gradient_bound.b", row(t * h_sq, c * var, s.linear_error(&g) + t * h_bias + c * var_bias)));
        }

        // (c): ((1 − e^{−ρ₁t})/ρ₁)Γ^h(P_t f) ≤ (1 + 2/ρ₂,₀)(P_t f² − (P_t f)²)
        if k.rho1 > 0.0 && k.rho21 >= 0.0 && k.rho20 > 0.0 {
            let w = damped(k.rho1, t);
            let c = 1.0 + 2.0 / k.rho20;
            let mut g = vec![(e_sq, c), (0, -2.0 * c * mean(0))];
            g.extend((0..nh).map(|a| (di(a), -2.0 * w * mean(di(a)))));
            rows.push(("gradient_bound.c", row(w * h_sq, c * var, s.linear_error(&g) + w * h_bias + c * var_bias)));
        }

        // (d): ℓ₀/(ℓ₀ + t)(P_t f² − (P_t f)²) ≤ t P_t Γ^{h+(ℓ₀+t)v}(f)
        if k.rho1 >= 0.0 && k.rho20 >= 0.0 && k.rho21 >= 0.0 {
            let w = p.ell0 / (p.ell0 + t);
            let g = vec![(e_gh, t), (e_gv, t * (p.ell0 + t)), (e_sq, -w), (0, 2.0 * w * mean(0))];
            let rhs = t * (mean(e_gh) + (p.ell0 + t) * mean(e_gv));
            rows.push(("gradient_bound.d", row(w * var, rhs, s.linear_error(&g) + w * var_bias)));
        }

        if d > nh {
            // √Γ^v(P_t f) ≤ P_t √Γ^v(f)
            let lhs = v_sq.sqrt();
            let mut g = vec![(e_sgv, 1.0)];
            if lhs > 0.0 {
                g.extend((nh..d).map(|a| (di(a), -mean(di(a)) / lhs)));
            }
            rows.push(("vertical_gradient", row(lhs, mean(e_sgv), s.linear_error(&g) + v_bias.sqrt())));

            // √Γ^h(P_t f) + Γ^v(P_t f) ≤ e^{kt/2}P_t(√Γ^h f + Γ^v f) + F_k(t)
            let lhs = h_sq.sqrt() + v_sq;
            let growth = (0.5 * kk * t).exp();
            let extra = if kk == 0.0 { t } else { 2.0 / kk * (growth - 1.0) };
            let rhs = growth * (mean(e_sgh) + mean(e_gv)) + extra;
            let mut g = vec![(e_sgh, growth), (e_gv, growth)];
            if h_sq > 0.0 {
                g.extend((0..nh).map(|a| (di(a), -mean(di(a)) / h_sq.sqrt())));
            }
            g.extend((nh..d).map(|a| (di(a), -2.0 * mean(di(a)))));
            rows.push(("vertical_gradient.mixed", row(lhs, rhs, s.linear_error(&g) + h_bias.sqrt() + v_bias)));
        }
        cases.push(GradientCase { label, rows });
    }
    let mut anchors: Vec<&'static str> = Vec::new();
    for c in &cases {
        for (a, _) in &c.rows {
            if !anchors.contains(a) {
                anchors.push(a);
            }
        }
    }
    let labels: Vec<&str> = cases.iter().map(|c| c.label.as_str()).collect();
    let inputs = (model.name(), p, seed, &labels);
    Ok(anchors
        .into_iter()
        .map(|anchor| {
            let all: Vec<CaseRow> = cases.iter().flat_map(|c| c.rows.iter().filter(|(a, _)| *a == anchor).map(|(_, r)| r.clone())).collect();
            let total = all.len();
            // A case is dropped when some path left the domain where the chart is evaluated.
            let rows: Vec<CaseRow> = all.into_iter().filter(|r| r.margin.is_finite() && r.error.is_finite()).collect();
            let dropped = total - rows.len();
            let check_id = if anchor.starts_with("vertical") { "vertical_gradient" } else { "gradient_bounds" };
            let mut r = if rows.is_empty() {
                CheckResult::new(check_id, anchor, model.name(), &(&inputs, anchor), f64::NAN, 0.0, 0.0).note("no case could be evaluated")
            } else {
                worst_case(check_id, anchor, model.name(), &(&inputs, anchor), rows, p.sigmas)
            };
            r = r
                .detail("dropped_cases", dropped as f64)
                .note(format!("margins ≥ −{}σ pass; polynomials of degree ≤ {} near a window of half-width {}", p.sigmas, p.degree, p.window));
            if dropped > 0 {
                r = r.note(format!("{dropped} of {total} cases dropped: a sample path left the chart domain"));
            }
            r
        })
        .collect())
}

fn default_center() -> Vec<f64> {
    vec![0.0; 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiYauParams {
    pub models: Vec<String>,
    pub times: Vec<f64>,
    /// Positive floor added to the bump.
    pub eps: f64,
    pub width: f64,
    pub center: Vec<f64>,
    /// Nodes with every coordinate in `[−window, window]` are evaluated.
    pub window: f64,
    pub betas: Vec<f64>,
    /// Allowed shortfall as a fraction of the right-hand side.
    pub tolerance_fraction: f64,
    /// Half-width of the time difference used for the pointwise identity.
    pub identity_step: f64,
    pub identity_tolerance: f64,
    pub pde: PdeSettings,
}

impl Default for LiYauParams {
    fn default() -> Self {
        LiYauParams {
            models: heisenberg(),
            times: vec![0.3, 0.5, 1.0],
            eps: 1e-3,
            width: 0.5,
            center: default_center(),
            window: 1.0,
            betas: super::schedule::default_betas(),
            tolerance_fraction: 0.05,
            identity_step: 0.02,
            identity_tolerance: 0.1,
            pde: PdeSettings { half_width: 5.5, ..PdeSettings::default() },
        }
    }
}

/// Interior nodes of `grid` with every coordinate in `[−window, window]`.
fn window_nodes(grid: &HeisenbergGrid, window: f64) -> Vec<(usize, usize, usize)> {
    let n = grid.n;
    let inside = |i: usize| grid.coord(i).abs() <= window + 1e-12;
    let mut out = Vec::new();
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            for k in 1..n - 1 {
                if inside(i) && inside(j) && inside(k) {
                    out.push((i, j, k));
                }
            }
        }
    }
    out
}

fn x_log_x(u: f64) -> f64 {
    if u > 0.0 {
        u * u.ln()
    } else {
        0.0
    }
}

/// Li-Yau family, the optimized Li-Yau bound, the entropy bound and the `u log u` identity on PDE fields.
pub fn check_entropy_li_yau(model: &LieModel, p: &LiYauParams) -> Result<Vec<CheckResult>> {
    require_heisenberg(model)?;
    if !(p.eps > 0.0) || p.center.len() != 3 {
        return Err(Error::InvalidArgument("need eps > 0 and a 3-dimensional centre".into()));
    }
    let (_, _, k) = model_and_constants(model)?;
    let (big_n, big_d) = rho2_positive(&k)?;
    let n = k.n as f64;
    let f = TestFunction::gaussian_bump(p.center.clone(), p.width, 1.0, p.eps);
    let mut times: Vec<f64> = Vec::new();
    for &t in &p.times {
        if t - p.identity_step <= 0.0 {
            return Err(Error::InvalidArgument(format!("time {t} must exceed the identity step")));
        }
        times.extend([t - p.identity_step, t, t + p.identity_step]);
    }
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let fields = pde_evolve(&f, &p.pde, &times)?;
    let at = |t: f64| -> &HeatField { fields.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).expect("fields") };
    let bump = TestFunction::gaussian_bump(p.center.clone(), p.width, 1.0, 0.0);
    let base = x_log_x(p.eps);
    let g = |x: &[f64]| x_log_x(p.eps + bump.eval(x)) - base;
    let entropy_fields = pde_evolve_with(&g, base, &p.pde, &p.times)?;
    let grid = fields[0].grid;
    let nodes = window_nodes(&grid, p.window);
    let inputs = (model.name(), p);

    let mut out = Vec::new();
    let mut ly_rows: Vec<Vec<CaseRow>> = vec![Vec::new(); p.betas.len()];
    let mut ly2_rows = Vec::new();
    let mut ly2_worst = f64::INFINITY;
    let mut ly2_tol: f64 = 0.0;
    for (ti, &t) in p.times.iter().enumerate() {
        let u = at(t);
        let (before, after) = (at(t - p.identity_step), at(t + p.identity_step));
        let w = &entropy_fields[ti];
        let ly2_rhs = big_n / t;
        let mut worst_ly2 = (f64::INFINITY, 0.0);
        let mut worst_ly = vec![(f64::INFINITY, 0.0, 0.0); p.betas.len()];
        let mut worst_entropy = (f64::INFINITY, 0.0, 0.0);
        let mut entropy_scale: f64 = 0.0;
        let mut identity_worst: f64 = 0.0;
        let mut identity_scale: f64 = 0.0;
        let mut time_error: f64 = 0.0;
        for &(i, j, kk) in &nodes {
            let v = u.at(i, j, kk);
            let gamma = u.gamma_h(i, j, kk);
            let lv = u.sublaplacian(i, j, kk);
            time_error = time_error.max(u.error_at(&grid.point(i, j, kk)) / v);
            let ly2 = gamma / (big_d * v * v) - lv / v;
            if ly2_rhs - ly2 < worst_ly2.0 {
                worst_ly2 = (ly2_rhs - ly2, ly2);
            }
            for (bi, &beta) in p.betas.iter().enumerate() {
                let a = (k.rho20 + beta) / k.rho20;
                let b = (beta - 1.0) / beta;
                let lhs = gamma / (v * v) - (a - b * k.rho1 * t) * lv / v;
                let rhs = n / (4.0 * t) * (a * a / ((2.0 - beta) * (beta - 1.0)) - k.rho1 * t * (2.0 * a - b * k.rho1 * t));
                if rhs - lhs < worst_ly[bi].0 {
                    worst_ly[bi] = (rhs - lhs, lhs, rhs);
                }
            }
            let lhs = damped(k.rho1, t) / 2.0 * gamma / (v * v);
            let rhs = (1.0 + 2.0 / k.rho20) * (w.at(i, j, kk) - x_log_x(v)) / v;
            entropy_scale = entropy_scale.max(rhs.abs());
            if rhs - lhs < worst_entropy.0 {
                worst_entropy = (rhs - lhs, lhs, rhs);
            }
            // (½L − ∂_s) F(u_s) = ½Γ(u)/u for F(u) = u log u
            let dt = (after.t - before.t).max(f64::MIN_POSITIVE);
            let ds = (x_log_x(after.at(i, j, kk)) - x_log_x(before.at(i, j, kk))) / dt;
            let lhs = 0.5 * u.sublaplacian_of(x_log_x, i, j, kk) - ds;
            let rhs = 0.5 * gamma / v;
            identity_worst = identity_worst.max((lhs - rhs).abs());
            identity_scale = identity_scale.max(rhs.abs());
        }
        ly2_rows.push(CaseRow { case: format!("t={t}"), lhs: worst_ly2.1, rhs: ly2_rhs, margin: worst_ly2.0, error: time_error });
        if worst_ly2.0 + p.tolerance_fraction * ly2_rhs < ly2_worst + ly2_tol {
            ly2_worst = worst_ly2.0;
            ly2_tol = p.tolerance_fraction * ly2_rhs;
        }
        for (bi, wl) in worst_ly.iter().enumerate() {
            ly_rows[bi].push(CaseRow { case: format!("t={t}"), lhs: wl.1, rhs: wl.2, margin: wl.0, error: time_error });
        }
        out.push(
            CheckResult::new("entropy_li_yau", "entropy_bound", model.name(), &(&inputs, t, "entropy"), worst_entropy.0, p.tolerance_fraction * entropy_scale, 0.0)
                .detail("t", t)
                .detail("lhs_at_worst", worst_entropy.1)
                .detail("rhs_at_worst", worst_entropy.2)
                .with_rows(vec![CaseRow { case: format!("t={t}"), lhs: worst_entropy.1, rhs: worst_entropy.2, margin: worst_entropy.0, error: 0.0 }]),
        );
        let rel = if identity_scale > 0.0 { identity_worst / identity_scale } else { identity_worst };
        out.push(
            CheckResult::new("entropy_li_yau", "log_identity", model.name(), &(&inputs, t, "identity"), -rel, p.identity_tolerance, 0.0)
                .detail("t", t)
                .detail("max_abs_residual", identity_worst)
                .detail("max_rhs", identity_scale)
                .note("diagnostic: relative residual of (½L − ∂_s)(u log u) = ½Γ(u)/u on the grid"),
        );
    }
    let ly2 = CheckResult::new("entropy_li_yau", "li_yau.optimized", model.name(), &(&inputs, "ly2"), ly2_worst, ly2_tol, 0.0)
        .detail("N", big_n)
        .detail("D", big_d)
        .note("tolerance is a fraction of N/t")
        .with_rows(ly2_rows);
    out.insert(0, ly2);
    for (bi, &beta) in p.betas.iter().enumerate() {
        let rows = std::mem::take(&mut ly_rows[bi]);
        let worst = rows
            .iter()
            .min_by(|a, b| (a.margin + p.tolerance_fraction * a.rhs).total_cmp(&(b.margin + p.tolerance_fraction * b.rhs)))
            .cloned()
            .expect("at least one time");
        out.push(
            CheckResult::new("entropy_li_yau", "li_yau", model.name(), &(&inputs, beta), worst.margin, p.tolerance_fraction * worst.rhs, 0.0)
                .detail("beta", beta)
                .note(format!("worst at {}", worst.case))
                .with_rows(rows),
        );
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnackParams {
    pub models: Vec<String>,
    pub samples: usize,
    pub t0: f64,
    pub t1: f64,
    pub max_distance: f64,
    pub window: f64,
    pub width: f64,
    pub center: Vec<f64>,
    /// Relative allowance for trilinear interpolation between grid nodes.
    pub interpolation_tolerance: f64,
    pub kernel_triples: usize,
    pub kernel_width: f64,
    pub pde: PdeSettings,
}

impl Default for HarnackParams {
    fn default() -> Self {
        HarnackParams {
            models: heisenberg(),
            samples: 20,
            t0: 0.4,
            t1: 0.8,
            max_distance: 1.0,
            window: 1.0,
            width: 0.5,
            center: default_center(),
            interpolation_tolerance: 1e-3,
            kernel_triples: 3,
            kernel_width: 0.15,
            pde: PdeSettings::default(),
        }
    }
}

fn harnack_factor(big_n: f64, big_d: f64, t0: f64, t1: f64, dist: f64) -> f64 {
    (t1 / t0).powf(0.5 * big_n) * (big_d * dist * dist / (2.0 * (t1 - t0))).exp()
}

/// Pairs `(x, y)` in the window with `d_cc(x, y) ≤ max_distance`.
fn sample_pairs(model: &LieModel, count: usize, window: f64, max_distance: f64, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..100 * count.max(1) {
        if out.len() == count {
            break;
        }
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-window..=window)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-window..=window)).collect();
        if cc_distance(model, &x, &y)?.value <= max_distance {
            out.push((x, y));
        }
    }
    if out.len() < count {
        return Err(Error::Numerical("could not sample enough close pairs".into()));
    }
    Ok(out)
}

/// Parabolic Harnack inequality on sampled pairs, and its heat-kernel form on sampled triples.
///
/// The verdict uses the horizontal-projection lower bound for `d_cc`, which
/// makes the right-hand side smallest; the exact-distance verdict is reported alongside.
pub fn check_harnack(model: &LieModel, p: &HarnackParams, seed: u64) -> Result<Vec<CheckResult>> {
    require_heisenberg(model)?;
    if !(0.0 < p.t0 && p.t0 < p.t1) {
        return Err(Error::InvalidArgument("need 0 < t0 < t1".into()));
    }
    let (_, _, k) = model_and_constants(model)?;
    let (big_n, big_d) = rho2_positive(&k)?;
    let f = TestFunction::gaussian_bump(p.center.clone(), p.width, 1.0, 0.0);
    let fields = pde_evolve(&f, &p.pde, &[p.t0, p.t1])?;
    let (u0, u1) = (&fields[0], &fields[1]);
    let pairs = sample_pairs(model, p.samples, p.window, p.max_distance, mix_seed(seed, 1))?;
    let mut rows = Vec::new();
    let mut exact_min = f64::INFINITY;
    for (x, y) in &pairs {
        let dist = cc_distance(model, x, y)?;
        let lhs = u0.interpolate(x);
        let v1 = u1.interpolate(y);
        let rhs = v1 * harnack_factor(big_n, big_d, p.t0, p.t1, dist.lower);
        let rhs_exact = v1 * harnack_factor(big_n, big_d, p.t0, p.t1, dist.value);
        let err = u0.error_at(x) + harnack_factor(big_n, big_d, p.t0, p.t1, dist.lower) * u1.error_at(y)
            + p.interpolation_tolerance * (lhs.abs() + rhs.abs());
        exact_min = exact_min.min((rhs_exact - lhs) / err.max(f64::MIN_POSITIVE));
        rows.push(CaseRow { case: format!("x={x:.3?} y={y:.3?} d={:.4}", dist.value), lhs, rhs, margin: rhs - lhs, error: err });
    }
    let pair_result = worst_case("harnack", "harnack.parabolic", model.name(), &(model.name(), p, seed), rows, 1.0)
        .detail("min_exact_distance_margin_over_error", exact_min)
        .note("distance lower bound in the exponent; exact-distance margins are in min_exact_distance_margin_over_error");

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
    let mut krows = Vec::new();
    let grid = HeisenbergGrid::new(p.pde.half_width, p.pde.h)?;
    let quick = PdeSettings { estimate_error: false, ..p.pde };
    for ti in 0..p.kernel_triples {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5 * p.window..=0.5 * p.window)).collect();
        let (y, z) = sample_pairs(model, 1, p.window, p.max_distance, mix_seed(seed, 100 + ti as u64))?.remove(0);
        // p_t(x, ·) from a normalized bump at x; the kernel is symmetric.
        let narrow = pde_evolve(&normalized_bump(&x, p.kernel_width, &grid), &p.pde, &[p.t0, p.t1])?;
        let wide = pde_evolve(&normalized_bump(&x, p.kernel_width * std::f64::consts::SQRT_2, &grid), &quick, &[p.t0, p.t1])?;
        let read = |idx: usize, pt: &[f64]| {
            let (a, b) = (narrow[idx].interpolate(pt), wide[idx].interpolate(pt));
            (2.0 * a - b, 2.0 * narrow[idx].error_at(pt) + (a - b).abs())
        };
        let (lhs, e0) = read(0, &y);
        let (v1, e1) = read(1, &z);
        let dist = cc_distance(model, &y, &z)?;
        let factor = harnack_factor(big_n, big_d, p.t0, p.t1, dist.lower);
        let rhs = v1 * factor;
        krows.push(CaseRow { case: format!("x={x:.3?} y={y:.3?} z={z:.3?}"), lhs, rhs, margin: rhs - lhs, error: e0 + factor * e1 });
    }
    let kernel_result = worst_case("harnack", "harnack.kernel", model.name(), &(model.name(), p, seed, "kernel"), krows, 1.0)
        .note("kernel values extrapolated in bump width; error bars include the size of that correction");
    Ok(vec![pair_result, kernel_result])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelDecayParams {
    pub models: Vec<String>,
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
    pub width: f64,
    pub pde: PdeSettings,
}

impl Default for KernelDecayParams {
    fn default() -> Self {
        KernelDecayParams {
            models: heisenberg(),
            t_min: 0.2,
            t_max: 1.0,
            steps: 9,
            width: 0.15,
            pde: PdeSettings { half_width: 4.5, ..PdeSettings::default() },
        }
    }
}

/// Least-squares slope of `log p` against `log t`; `−2` on the Heisenberg group.
fn log_slope(series: &[KernelEstimate]) -> f64 {
    let xs: Vec<f64> = series.iter().map(|e| e.t.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|e| e.value.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}

/// On-diagonal heat kernel `p_t(0,0)` over a time grid.
///
/// Two statements are checked. The first is that `t^{N/2} p_t(0,0)` is
/// non-increasing. The Harnack inequality only yields the reverse direction, and
/// on the Heisenberg group `p_t(0,0) = 1/(4t²)`, so this one is expected to fail.
/// The second is the bound the Harnack inequality does give:
/// `p_t(0,0) ≤ (T/t)^{N/2} p_T(0,0)` for `t ≤ T`.
pub fn check_kernel_decay(model: &LieModel, p: &KernelDecayParams) -> Result<Vec<CheckResult>> {
    require_heisenberg(model)?;
    if p.steps < 2 || !(0.0 < p.t_min && p.t_min < p.t_max) {
        return Err(Error::InvalidArgument("need at least two times with 0 < t_min < t_max".into()));
    }
    let (_, _, k) = model_and_constants(model)?;
    let (big_n, _) = rho2_positive(&k)?;
    let times: Vec<f64> = (0..p.steps).map(|i| p.t_min + (p.t_max - p.t_min) * i as f64 / (p.steps - 1) as f64).collect();
    let origin = [0.0; 3];
    let series = crate::heat::heat_kernel_series(&origin, &origin, &times, &p.pde, p.width)?;
    let scaled: Vec<(f64, f64)> = series.iter().map(|e| (e.value * e.t.powf(0.5 * big_n), e.error * e.t.powf(0.5 * big_n))).collect();
    let top = scaled.iter().fold(0.0f64, |m, s| m.max(s.0));
    // Non-increasing means q(s) ≥ q(t) for every sampled s < t, not just neighbours.
    let mut rows = Vec::new();
    for i in 0..times.len() {
        for j in i + 1..times.len() {
            let (a, b) = (scaled[i], scaled[j]);
            rows.push(CaseRow { case: format!("t={:.3}->{:.3}", times[i], times[j]), lhs: b.0, rhs: a.0, margin: (a.0 - b.0) / top, error: (a.1 + b.1) / top });
        }
    }
    let worst = rows.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)).cloned().expect("two times");
    let inputs = (model.name(), p);
    let slope = log_slope(&series);
    let late: Vec<KernelEstimate> = series.iter().filter(|e| e.t >= 0.5 * p.t_max).cloned().collect();
    let late_slope = if late.len() >= 2 { log_slope(&late) } else { f64::NAN };
    let monotone = CheckResult::new("kernel_decay", "heat_kernel.scaled_monotone", model.name(), &(&inputs, "monotone"), worst.margin, 0.0, worst.error)
        .detail("fitted_exponent", slope)
        .detail("fitted_exponent_late", late_slope)
        .detail("N", big_n)
        .note(format!("worst pair {}", worst.case))
        .note("checks t^{N/2} p_t(0,0) non-increasing; the Harnack inequality implies non-decreasing instead")
        .with_rows(rows);

    let last = series.last().expect("times");
    let mut drows = Vec::new();
    for e in &series {
        let factor = (last.t / e.t).powf(0.5 * big_n);
        let bound = factor * last.value;
        let err = e.error + factor * last.error;
        drows.push(CaseRow { case: format!("t={:.3}", e.t), lhs: e.value, rhs: bound, margin: (bound - e.value) / e.value, error: err / e.value });
    }
    let diagonal = worst_case("kernel_decay", "heat_kernel.diagonal_bound", model.name(), &(&inputs, "diagonal"), drows, 1.0)
        .detail("fitted_exponent", slope)
        .detail("fitted_exponent_late", late_slope)
        .note("checks p_t(0,0) ≤ (T/t)^{N/2} p_T(0,0) for t ≤ T, relative to p_t(0,0)");
    Ok(vec![monotone, diagonal])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareParams {
    pub models: Vec<String>,
    pub times: Vec<f64>,
    pub width: f64,
    pub center: Vec<f64>,
    /// Allowed increase relative to `‖Γ^h(f)‖_{L¹}`.
    pub tolerance_fraction: f64,
    pub pde: PdeSettings,
}

impl Default for PoincareParams {
    fn default() -> Self {
        PoincareParams {
            models: heisenberg(),
            times: vec![0.0, 0.25, 0.5, 1.0],
            width: 0.5,
            center: vec![0.3, -0.2, 0.1],
            tolerance_fraction: 1e-3,
            pde: PdeSettings { half_width: 5.5, ..PdeSettings::default() },
        }
    }
}

/// `‖Γ^h(P_t f)‖_{L¹} ≤ e^{−rt}‖Γ^h(f)‖_{L¹}` with `r = min{ρ₁, ρ₂,₁}` and, where admissible, the sharper rate.
pub fn check_poincare_decay(model: &LieModel, p: &PoincareParams) -> Result<Vec<CheckResult>> {
    require_heisenberg(model)?;
    let (_, _, k) = model_and_constants(model)?;
    let mut times = p.times.clone();
    if !times.contains(&0.0) {
        times.insert(0, 0.0);
    }
    times.sort_by(|a, b| a.total_cmp(b));
    let f = TestFunction::gaussian_bump(p.center.clone(), p.width, 1.0, 0.0);
    let fields = pde_evolve(&f, &p.pde, &times)?;
    let norms: Vec<f64> = fields.iter().map(|u| u.l1_gamma_h()).collect();
    let initial = norms[0];
    let mut rates = vec![("poincare.a", k.rho1.min(k.rho21))];
    if let Some(alpha) = k.alpha {
        rates.push(("poincare.b", alpha));
    }
    let inputs = (model.name(), p);
    Ok(rates
        .into_iter()
        .map(|(anchor, rate)| {
            let rows: Vec<CaseRow> = times
                .iter()
                .zip(&norms)
                .map(|(&t, &nt)| {
                    let rhs = (-rate * t).exp() * initial;
                    CaseRow { case: format!("t={t}"), lhs: nt, rhs, margin: rhs - nt, error: fields[0].flux }
                })
                .collect();
            let worst = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
            CheckResult::new("poincare_decay", anchor, model.name(), &(&inputs, anchor), worst, p.tolerance_fraction * initial, 0.0)
                .detail("rate", rate)
                .detail("initial_norm", initial)
                .detail("max_flux", fields.iter().map(|u| u.flux).fold(0.0, f64::max))
                .with_rows(rows)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::build_heisenberg;

    fn small_pde() -> PdeSettings {
        PdeSettings { half_width: 3.0, h: 0.25, dt: 0.05, ..PdeSettings::default() }
    }

    #[test]
    fn constant_function_gradient_bounds_are_trivial() {
        // f ≡ 1: every left side is zero and every right side is nonnegative.
        let p = GradientParams { cases: 1, paths: 2000, steps: 10, degree: 0, ..GradientParams::default() };
        let r = check_gradient_bounds(&build_heisenberg(), &p, 1).unwrap();
        assert!(r.len() >= 4);
        for c in &r {
            assert!(c.passed(), "{c:?}");
            for row in &c.rows {
                assert!(row.lhs.abs() < 1e-9, "{row:?}");
            }
        }
    }

    #[test]
    fn too_few_paths_rejected() {
        let p = GradientParams { paths: 10, ..GradientParams::default() };
        assert!(check_gradient_bounds(&build_heisenberg(), &p, 1).is_err());
    }

    #[test]
    fn poincare_at_time_zero_is_equality() {
        let p = PoincareParams { times: vec![0.0], pde: small_pde(), ..PoincareParams::default() };
        let r = check_poincare_decay(&build_heisenberg(), &p).unwrap();
        assert_eq!(r[0].rows[0].margin, 0.0);
    }

    #[test]
    fn pde_checks_reject_other_models() {
        let m = crate::model_zoo::build_free_nilpotent(3).unwrap();
        assert!(check_poincare_decay(&m, &PoincareParams::default()).is_err());
    }
}
