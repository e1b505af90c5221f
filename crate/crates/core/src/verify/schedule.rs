//! Interpolation schedules `(a, ℓ, b, C)` for the semigroup interpolation lemmas.
//!
//! A gradient-bound schedule must satisfy on `(0, T)`
//!   `ȧ + (ρ₁ − 1/ℓ)a + C ≥ 0` and `ℓ̇ + ρ₂,₀ + (ρ₂,₁ + ȧ/a)ℓ ≥ 0`;
//! an entropy schedule must satisfy
//!   `ȧ + (ρ₁ − 1/ℓ − 2b)a + C ≥ 0` and `ℓ̇ + ρ₂ + (ȧ/a)ℓ ≥ 0`.
//! Schedules are stored as closures and checked on a uniform grid of the
//! open interval; derivatives are Ridders-extrapolated central differences
//! and the grid is doubled once to estimate how much the minimum moves.

use std::sync::Arc;

use serde::Serialize;

use super::result::{CaseRow, CheckResult};
use crate::geometry::{grad_bound_rate, CDConstants};
use crate::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Conditions without `b`, for gradient bounds.
    Gradient,
    /// Conditions with `b`, for entropy and Li-Yau bounds.
    Entropy,
}

#[derive(Clone)]
pub struct Schedule {
    pub name: String,
    pub kind: ScheduleKind,
    pub horizon: f64,
    pub c: f64,
    pub a: ScalarFn,
    pub ell: ScalarFn,
    pub b: Option<ScalarFn>,
    /// Whether the construction relies on `a/ℓ` increasing.
    pub ratio_increasing: bool,
}

impl std::fmt::Debug for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Schedule")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("horizon", &self.horizon)
            .field("c", &self.c)
            .finish()
    }
}

/// Samples of a schedule on a uniform grid of `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledSchedule {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub ell: Vec<f64>,
    pub b: Vec<f64>,
}

impl Schedule {
    pub fn new(name: &str, kind: ScheduleKind, horizon: f64, c: f64, a: ScalarFn, ell: ScalarFn, b: Option<ScalarFn>) -> Schedule {
        Schedule { name: name.to_string(), kind, horizon, c, a, ell, b, ratio_increasing: false }
    }

    pub fn b_at(&self, t: f64) -> f64 {
        self.b.as_ref().map_or(0.0, |b| b(t))
    }

    pub fn sample(&self, intervals: usize) -> SampledSchedule {
        let t: Vec<f64> = (0..=intervals).map(|i| self.horizon * i as f64 / intervals as f64).collect();
        SampledSchedule {
            a: t.iter().map(|&s| (self.a)(s)).collect(),
            ell: t.iter().map(|&s| (self.ell)(s)).collect(),
            b: t.iter().map(|&s| self.b_at(s)).collect(),
            t,
        }
    }
}

/// `(1 − e^{−ρu})/ρ`, read as `u` when `ρ = 0`.
fn damped(rho: f64, u: f64) -> f64 {
    if rho == 0.0 {
        u
    } else {
        -(-rho * u).exp_m1() / rho
    }
}

/// `∫₀ᵘ damped(ρ, s) ds = (ρu − 1 + e^{−ρu})/ρ²`.
fn damped_integral(rho: f64, u: f64) -> f64 {
    let x = rho * u;
    if x.abs() < 1e-3 {
        u * u * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0)
    } else {
        (x + (-x).exp_m1()) / (rho * rho)
    }
}

fn arc(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

/// Gradient-bound schedule (a): `a = e^{−α(ℓ)t}` with constant `ℓ`.
pub fn exponential_schedule(k: &CDConstants, horizon: f64, ell: f64) -> Schedule {
    let alpha = grad_bound_rate(k, ell);
    Schedule::new(
        "gradient_bound.a",
        ScheduleKind::Gradient,
        horizon,
        0.0,
        arc(move |t| (-alpha * t).exp()),
        arc(move |_| ell),
        None,
    )
}

/// Gradient-bound schedule (b): `a = T − t`, `ℓ = ρ₂,₀(T − t)/(Tk₂ + 2)`.
pub fn linear_schedule(k: &CDConstants, horizon: f64) -> Result<Schedule> {
    if !(k.rho20 > 0.0) {
        return Err(Error::Hypothesis(format!("schedule (b) needs ρ₂,₀ > 0, got {}", k.rho20)));
    }
    let (rho20, denom) = (k.rho20, horizon * k.k2() + 2.0);
    let c = 1.0 + k.k1() * horizon + denom / rho20;
    Ok(Schedule::new(
        "gradient_bound.b",
        ScheduleKind::Gradient,
        horizon,
        c,
        arc(move |t| horizon - t),
        arc(move |t| rho20 * (horizon - t) / denom),
        None,
    ))
}

/// Gradient-bound schedule (c): `a = (1 − e^{−ρ₁(T−t)})/ρ₁`, `ℓ = ρ₂,₀ ∫ₜᵀ a / a`.
pub fn damped_schedule(k: &CDConstants, horizon: f64) -> Result<Schedule> {
    if !(k.rho1 >= 0.0 && k.rho21 >= 0.0 && k.rho20 > 0.0) {
        return Err(Error::Hypothesis("schedule (c) needs ρ₁ ≥ 0, ρ₂,₁ ≥ 0 and ρ₂,₀ > 0".into()));
    }
    let (rho1, rho20) = (k.rho1, k.rho20);
    let mut s = Schedule::new(
        "gradient_bound.c",
        ScheduleKind::Gradient,
        horizon,
        1.0 + 2.0 / rho20,
        arc(move |t| damped(rho1, horizon - t)),
        arc(move |t| {
            let u = horizon - t;
            if u <= 0.0 {
                0.0
            } else {
                rho20 * damped_integral(rho1, u) / damped(rho1, u)
            }
        }),
        None,
    );
    s.ratio_increasing = true;
    Ok(s)
}

/// Gradient-bound schedule (d): `a = t`, `ℓ = (ℓ₀ + T)t/T`, `C = −ℓ₀/(ℓ₀ + T)`.
pub fn reverse_schedule(k: &CDConstants, horizon: f64, ell0: f64) -> Result<Schedule> {
    if !(k.rho1 >= 0.0 && k.rho20 >= 0.0 && k.rho21 >= 0.0) {
        return Err(Error::Hypothesis("schedule (d) needs ρ₁, ρ₂,₀, ρ₂,₁ ≥ 0".into()));
    }
    Ok(Schedule::new(
        "gradient_bound.d",
        ScheduleKind::Gradient,
        horizon,
        -ell0 / (ell0 + horizon),
        arc(|t| t),
        arc(move |t| (ell0 + horizon) * t / horizon),
        None,
    ))
}

/// Entropy schedule: the `a` and `ℓ` of (c) with `ρ₂ = ρ₂,₀`, `b = 0`, `C = 1 + 2/ρ₂`.
pub fn entropy_schedule(k: &CDConstants, horizon: f64) -> Result<Schedule> {
    if !(k.rho20 > 0.0 && k.rho21 >= 0.0) {
        return Err(Error::Hypothesis("entropy schedule needs ρ₂,₀ > 0 and ρ₂,₁ ≥ 0".into()));
    }
    let (rho1, rho2) = (k.rho1, k.rho20);
    Ok(Schedule::new(
        "entropy",
        ScheduleKind::Entropy,
        horizon,
        1.0 + 2.0 / rho2,
        arc(move |t| damped(rho1, horizon - t)),
        arc(move |t| {
            let u = horizon - t;
            if u <= 0.0 {
                0.0
            } else {
                rho2 * damped_integral(rho1, u) / damped(rho1, u)
            }
        }),
        None,
    ))
}

/// Li-Yau schedule for exponent `α > 0`: `ℓ = ρ₂(T−t)/(α+2)`, `a = (T−t)^{α+1}`, `b = ½(ρ₁ + ȧ/a − 1/ℓ)`.
pub fn li_yau_schedule(k: &CDConstants, horizon: f64, alpha: f64) -> Result<Schedule> {
    if !(k.rho20 > 0.0 && k.rho21 >= 0.0) {
        return Err(Error::Hypothesis("Li-Yau schedule needs ρ₂,₀ > 0 and ρ₂,₁ ≥ 0".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("Li-Yau exponent must be positive, got {alpha}")));
    }
    let (rho1, rho2) = (k.rho1, k.rho20);
    let beta = (alpha + 2.0) / (alpha + 1.0);
    Ok(Schedule::new(
        &format!("li_yau(beta={beta:.4})"),
        ScheduleKind::Entropy,
        horizon,
        0.0,
        arc(move |t| (horizon - t).max(0.0).powf(alpha + 1.0)),
        arc(move |t| rho2 * (horizon - t) / (alpha + 2.0)),
        Some(arc(move |t| {
            let u = horizon - t;
            0.5 * (rho1 - (alpha + 1.0) / u - (alpha + 2.0) / (rho2 * u))
        })),
    ))
}

/// `α` with `β = (α+2)/(α+1)`.
pub fn li_yau_exponent(beta: f64) -> f64 {
    (2.0 - beta) / (beta - 1.0)
}

/// Default Li-Yau family: β ∈ {1.1, 1.2, …, 1.9}.
pub fn default_betas() -> Vec<f64> {
    (11..=19).map(|i| i as f64 / 10.0).collect()
}

/// Every construction whose hypotheses the constants meet, plus the reasons for those omitted.
pub fn builtin_schedules(k: &CDConstants, horizon: f64) -> (Vec<Schedule>, Vec<String>) {
    let mut out = vec![exponential_schedule(k, horizon, 1.0)];
    let mut omitted = Vec::new();
    let mut push = |r: Result<Schedule>| match r {
        Ok(s) => out.push(s),
        Err(e) => omitted.push(e.to_string()),
    };
    push(linear_schedule(k, horizon));
    if k.rho1 == 0.0 {
        push(Err(Error::Hypothesis("schedule (c) coincides with (b) when ρ₁ = 0".into())));
    } else {
        push(damped_schedule(k, horizon));
    }
    push(reverse_schedule(k, horizon, 1.0));
    push(entropy_schedule(k, horizon));
    for beta in default_betas() {
        push(li_yau_schedule(k, horizon, li_yau_exponent(beta)));
    }
    (out, omitted)
}

/// Ridders' extrapolation of central differences; returns the derivative and an error estimate.
pub fn ridders(f: &dyn Fn(f64) -> f64, x: f64, h0: f64) -> (f64, f64) {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const NTAB: usize = 10;
    let mut tab = [[0.0f64; NTAB]; NTAB];
    let mut h = h0;
    tab[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
    let mut best = tab[0][0];
    let mut err = f64::INFINITY;
    for i in 1..NTAB {
        h /= CON;
        tab[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut fac = CON2;
        for j in 1..=i {
            tab[j][i] = (tab[j - 1][i] * fac - tab[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let e = (tab[j][i] - tab[j - 1][i]).abs().max((tab[j][i] - tab[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = tab[j][i];
            }
        }
        if (tab[i][i] - tab[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    (best, err)
}

/// Per-point values of the two admissibility conditions, each divided by its term scale.
struct GridMargins {
    first: f64,
    second: f64,
    error: f64,
    worst_t: f64,
}

fn grid_margins(s: &Schedule, k: &CDConstants, intervals: usize) -> Result<GridMargins> {
    let big_t = s.horizon;
    let mut m = GridMargins { first: f64::INFINITY, second: f64::INFINITY, error: 0.0, worst_t: 0.0 };
    for i in 1..intervals {
        let t = big_t * i as f64 / intervals as f64;
        let a = (s.a)(t);
        let ell = (s.ell)(t);
        if !(a > 0.0 && ell > 0.0) {
            return Err(Error::Hypothesis(format!("{}: a = {a}, ℓ = {ell} at t = {t}", s.name)));
        }
        let h0 = 0.5 * t.min(big_t - t).min(big_t / 16.0);
        let (da, ea) = ridders(&*s.a, t, h0);
        let (dl, el) = ridders(&*s.ell, t, h0);
        let b = match s.kind {
            ScheduleKind::Gradient => 0.0,
            ScheduleKind::Entropy => s.b_at(t),
        };
        let rho21 = if s.kind == ScheduleKind::Gradient { k.rho21 } else { 0.0 };
        let first_terms = [da, (k.rho1 - 1.0 / ell - 2.0 * b) * a, s.c];
        let second_terms = [dl, k.rho20, (rho21 + da / a) * ell];
        // Each condition is measured against the size of its terms, so cancellation
        // between large terms is not mistaken for a violation.
        let scale = |terms: &[f64]| terms.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        let (s1, s2) = (scale(&first_terms), scale(&second_terms));
        let first = first_terms.iter().sum::<f64>() / s1;
        let second = second_terms.iter().sum::<f64>() / s2;
        let err = ea / s1 + (el + ea / a * ell) / s2;
        if first.min(second) < m.first.min(m.second) {
            m.worst_t = t;
        }
        m.first = m.first.min(first);
        m.second = m.second.min(second);
        m.error = m.error.max(err);
    }
    Ok(m)
}

#[derive(Serialize)]
struct ScheduleInputs<'a> {
    name: &'a str,
    kind: ScheduleKind,
    horizon: f64,
    c: f64,
    constants: &'a CDConstants,
    intervals: usize,
}

pub const SCHEDULE_INTERVALS: usize = 2048;
pub const SCHEDULE_TOLERANCE: f64 = 1e-8;

/// Minimum of both conditions over a 2048-interval grid, each relative to the size of its terms
/// (floored at 1), with the change under one doubling as error.
pub fn check_schedule_admissible(s: &Schedule, k: &CDConstants) -> Result<CheckResult> {
    check_schedule_on(s, k, SCHEDULE_INTERVALS)
}

pub fn check_schedule_on(s: &Schedule, k: &CDConstants, intervals: usize) -> Result<CheckResult> {
    let coarse = grid_margins(s, k, intervals)?;
    let fine = grid_margins(s, k, 2 * intervals)?;
    let margin = coarse.first.min(coarse.second).min(fine.first.min(fine.second));
    let refinement = (coarse.first.min(coarse.second) - fine.first.min(fine.second)).abs();
    let error = coarse.error.max(fine.error).max(refinement);
    let inputs = ScheduleInputs { name: &s.name, kind: s.kind, horizon: s.horizon, c: s.c, constants: k, intervals };
    let anchor = match s.kind {
        ScheduleKind::Gradient => "schedule_lemma.gradient",
        ScheduleKind::Entropy => "schedule_lemma.entropy",
    };
    Ok(CheckResult::new("schedules", anchor, "", &inputs, margin, SCHEDULE_TOLERANCE, error)
        .detail("first_condition_min", coarse.first.min(fine.first))
        .detail("second_condition_min", coarse.second.min(fine.second))
        .detail("refinement_change", refinement)
        .detail("worst_t", coarse.worst_t)
        .note(format!("schedule {}", s.name)))
}

/// Minimum of `d/dt (a/ℓ)` over the grid, for constructions that rely on the ratio increasing.
pub fn check_ratio_increasing(s: &Schedule, intervals: usize) -> Result<CheckResult> {
    let big_t = s.horizon;
    let (a, ell) = (s.a.clone(), s.ell.clone());
    let ratio = move |t: f64| a(t) / ell(t);
    let mut min = f64::INFINITY;
    let mut err: f64 = 0.0;
    let mut rows = Vec::new();
    for n in [intervals, 2 * intervals] {
        for i in 1..n {
            let t = big_t * i as f64 / n as f64;
            let h0 = 0.5 * t.min(big_t - t).min(big_t / 16.0);
            let (d, e) = ridders(&ratio, t, h0);
            min = min.min(d);
            err = err.max(e);
            if n == intervals && i % (intervals / 16).max(1) == 0 {
                rows.push(CaseRow { case: format!("t={t:.6}"), lhs: 0.0, rhs: d, margin: d, error: e });
            }
        }
    }
    let inputs = (&s.name, big_t, s.c, intervals);
    Ok(CheckResult::new("schedule_monotone", "gradient_bound.c.ratio", "", &inputs, min, SCHEDULE_TOLERANCE, err)
        .detail("strictly_positive", if min > 0.0 { 1.0 } else { 0.0 })
        .note(format!("schedule {}", s.name))
        .with_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{assemble_constants, geometry_report, CChoice};
    use crate::model_zoo::{build_heisenberg, build_su2_pair};

    fn heisenberg() -> CDConstants {
        let r = geometry_report(&build_heisenberg()).unwrap();
        assemble_constants(&r, 2, CChoice::Infinite).unwrap()
    }

    fn su2() -> CDConstants {
        let r = geometry_report(&build_su2_pair(1.0).unwrap()).unwrap();
        assemble_constants(&r, 3, CChoice::Infinite).unwrap()
    }

    #[test]
    fn ridders_on_exponential() {
        let (d, e) = ridders(&|x: f64| x.exp(), 0.5, 0.1);
        assert!((d - 0.5f64.exp()).abs() < 1e-12 && e < 1e-10);
    }

    #[test]
    fn heisenberg_list() {
        let (s, omitted) = builtin_schedules(&heisenberg(), 1.0);
        let names: Vec<_> = s.iter().map(|s| s.name.as_str()).collect();
        for n in ["gradient_bound.a", "gradient_bound.b", "gradient_bound.d", "entropy"] {
            assert!(names.contains(&n), "{names:?}");
        }
        assert!(!names.contains(&"gradient_bound.c"));
        assert!(omitted.iter().any(|o| o.contains("(c)")));
    }

    #[test]
    fn all_builtin_admissible() {
        for k in [heisenberg(), su2()] {
            let (list, _) = builtin_schedules(&k, 1.0);
            for s in &list {
                let r = check_schedule_admissible(s, &k).unwrap();
                assert!(r.passed(), "{} {:?}", s.name, r);
            }
        }
    }

    #[test]
    fn damped_ratio_increases() {
        let s = damped_schedule(&su2(), 1.0).unwrap();
        let r = check_ratio_increasing(&s, 256).unwrap();
        assert!(r.passed() && r.margin > 0.0, "{r:?}");
    }

    #[test]
    fn damped_reduces_to_linear() {
        let mut k = heisenberg();
        k.rho1 = 0.0;
        let c = damped_schedule(&k, 1.0).unwrap();
        let b = linear_schedule(&k, 1.0).unwrap();
        for t in [0.1, 0.5, 0.9] {
            assert!(((c.a)(t) - (b.a)(t)).abs() < 1e-15);
            assert!(((c.ell)(t) - (b.ell)(t)).abs() < 1e-15);
        }
        assert_eq!(c.c, b.c);
    }

    #[test]
    fn constructed_violation_fails_by_one() {
        let k = heisenberg();
        let ell = 2.0;
        let c = -(k.rho1 - 1.0 / ell) - 1.0;
        let s = Schedule::new("violation", ScheduleKind::Gradient, 1.0, c, arc(|_| 1.0), arc(move |_| ell), None);
        let r = check_schedule_on(&s, &k, 64).unwrap();
        assert!(!r.passed());
        assert!((r.details["first_condition_min"] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_interior_is_an_error() {
        let s = Schedule::new("bad", ScheduleKind::Gradient, 1.0, 0.0, arc(|t| 0.5 - t), arc(|_| 1.0), None);
        assert!(check_schedule_on(&s, &heisenberg(), 64).is_err());
    }
}
