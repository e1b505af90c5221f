use serde::{Deserialize, Serialize};

use super::GeometryReport;
use crate::model_zoo::DeclaredConstants;
use crate::{Error, Result};

/// How the free coupling parameter `c > 0` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CChoice {
    Fixed(f64),
    /// The limit `c → ∞`, which only makes sense when the mixed terms vanish.
    Infinite,
    Optimize(Objective),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MaxRho2,
    MaxAlpha,
    Rho1Zero,
}

/// Curvature-dimension constants and everything derived from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CDConstants {
    pub n: usize,
    pub rho1: f64,
    pub rho20: f64,
    pub rho21: f64,
    /// `None` encodes `c = ∞`.
    pub c: Option<f64>,
    pub kappa: f64,
    /// Dimension and distance factors of the optimized Li-Yau inequality; need `ρ₂,₀ > 0`.
    pub big_n: Option<f64>,
    pub big_d: Option<f64>,
    /// L¹ gradient decay rate; needs `ρ₁ ≥ ρ₂,₁` and `ρ₂,₀ > −1`.
    pub alpha: Option<f64>,
    /// Lower bound for `−λ` over nonzero eigenvalues; needs `ρ₂,₀ > 0`.
    pub spectral_gap_bound: Option<f64>,
}

impl CDConstants {
    pub fn declared(&self) -> DeclaredConstants {
        DeclaredConstants { n: self.n, rho1: self.rho1, rho20: self.rho20, rho21: self.rho21 }
    }

    /// `max{0, −ρ₂,₁}`.
    pub fn k2(&self) -> f64 {
        (-self.rho21).max(0.0)
    }

    /// `max{0, −ρ₁}`.
    pub fn k1(&self) -> f64 {
        (-self.rho1).max(0.0)
    }
}

/// Mixed terms below this are rounding noise and count as zero.
const COUPLING_ZERO: f64 = 1e-12;

/// `(ρ₁, ρ₂,₀, ρ₂,₁)` for a given `c` (`None` = ∞).
fn rhos(r: &GeometryReport, c: Option<f64>) -> Result<(f64, f64, f64)> {
    let coupling = r.m_hv + r.m_grad_v;
    let half_m2 = 0.5 * r.m_r_min * r.m_r_min;
    let rho21 = 0.5 * r.rho_lv - r.m_grad_v * r.m_grad_v;
    match c {
        Some(c) => Ok((r.rho_h - 1.0 / c, half_m2 - c * coupling * coupling, rho21)),
        None if coupling.abs() <= COUPLING_ZERO => Ok((r.rho_h, half_m2, rho21)),
        None => Err(Error::Hypothesis(format!(
            "c = ∞ needs M_HV + M_∇v = 0, got {coupling}"
        ))),
    }
}

fn alpha_of(rho1: f64, rho20: f64, rho21: f64) -> Option<f64> {
    (rho1 >= rho21 && rho20 > -1.0).then(|| (rho20 * rho1 + rho21) / (rho20 + 1.0))
}

/// `α(ℓ) = min{ρ₁ − 1/ℓ, ρ₂,₁ + ρ₂,₀/ℓ}`.
pub fn grad_bound_rate(k: &CDConstants, ell: f64) -> f64 {
    (k.rho1 - 1.0 / ell).min(k.rho21 + k.rho20 / ell)
}

/// Closed-form Poincaré rate `(2κ / (2M_HV + m_R √(2ρ_H + 2κ)))²`; requires `κ > 0`.
pub fn closed_form_alpha(r: &GeometryReport) -> Result<f64> {
    let kappa = r.kappa();
    if kappa <= 0.0 {
        return Err(Error::Hypothesis(format!("closed-form rate needs κ > 0, got {kappa}")));
    }
    let denom = 2.0 * r.m_hv + r.m_r_min * (2.0 * r.rho_h + 2.0 * kappa).sqrt();
    Ok((2.0 * kappa / denom).powi(2))
}

fn choose_c(r: &GeometryReport, choice: CChoice) -> Result<Option<f64>> {
    let coupling = r.m_hv + r.m_grad_v;
    match choice {
        CChoice::Fixed(c) if c > 0.0 && c.is_finite() => Ok(Some(c)),
        CChoice::Fixed(c) => Err(Error::InvalidArgument(format!("c must be positive, got {c}"))),
        CChoice::Infinite => Ok(None),
        CChoice::Optimize(Objective::Rho1Zero) => {
            if r.rho_h.abs() <= 1e-12 {
                Ok(None)
            } else if r.rho_h > 0.0 {
                Ok(Some(1.0 / r.rho_h))
            } else {
                Err(Error::Hypothesis(format!("ρ₁ = 0 is unreachable with ρ_H = {} < 0", r.rho_h)))
            }
        }
        CChoice::Optimize(Objective::MaxRho2) => {
            if coupling.abs() <= COUPLING_ZERO {
                Ok(None)
            } else {
                Err(Error::Hypothesis(
                    "ρ₂,₀ increases without bound as c → 0 while ρ₁ → −∞; fix c instead".into(),
                ))
            }
        }
        CChoice::Optimize(Objective::MaxAlpha) => {
            let score = |c: Option<f64>| {
                rhos(r, c).ok().and_then(|(a, b, d)| alpha_of(a, b, d)).unwrap_or(f64::NEG_INFINITY)
            };
            // golden-section search on ln c
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let (mut lo, mut hi) = (-20.0f64, 20.0f64);
            let mut x1 = hi - phi * (hi - lo);
            let mut x2 = lo + phi * (hi - lo);
            let (mut f1, mut f2) = (score(Some(x1.exp())), score(Some(x2.exp())));
            for _ in 0..200 {
                if f1 < f2 {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = score(Some(x2.exp()));
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = score(Some(x1.exp()));
                }
            }
            let best = Some((0.5 * (lo + hi)).exp());
            let at_inf = score(None);
            if at_inf >= score(best) && at_inf > f64::NEG_INFINITY {
                Ok(None)
            } else if score(best) > f64::NEG_INFINITY {
                Ok(best)
            } else {
                Err(Error::Hypothesis("no c gives an admissible Poincaré rate".into()))
            }
        }
    }
}

/// Assembles all constants from a geometry report.
pub fn assemble_constants(r: &GeometryReport, n: usize, choice: CChoice) -> Result<CDConstants> {
    if !(r.m_r_min.is_finite() && r.rho_h.is_finite()) {
        return Err(Error::Hypothesis("m_R and ρ_H must be finite".into()));
    }
    let c = choose_c(r, choice)?;
    let (rho1, rho20, rho21) = rhos(r, c)?;
    let nf = n as f64;
    let (big_n, big_d) = if rho20 > 0.0 {
        let (a, b) = ((2.0 + rho20).sqrt(), (1.0 + rho20).sqrt());
        (Some(nf / 4.0 * (a + b).powi(2) / rho20), Some(a * b / rho20))
    } else {
        (None, None)
    };
    let spectral_gap_bound = (rho20 > 0.0).then(|| {
        let k2 = (-rho21).max(0.0);
        nf * rho20 / (nf + rho20 * (nf - 1.0)) * (rho1 - k2 / rho20)
    });
    Ok(CDConstants {
        n,
        rho1,
        rho20,
        rho21,
        c,
        kappa: r.kappa(),
        big_n,
        big_d,
        alpha: alpha_of(rho1, rho20, rho21),
        spectral_gap_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geometry_report, normalized_geometry};
    use crate::model_zoo::{build_free_nilpotent, build_heisenberg, build_su2_pair};

    #[test]
    fn heisenberg_dimension_constants() {
        let r = geometry_report(&build_heisenberg()).unwrap();
        let k = assemble_constants(&r, 2, CChoice::Optimize(Objective::Rho1Zero)).unwrap();
        assert_eq!((k.rho1, k.rho20, k.rho21), (0.0, 0.5, 0.0));
        let n_expected = 0.5 * (5f64.sqrt() + 3f64.sqrt()).powi(2);
        assert!((k.big_n.unwrap() - n_expected).abs() < 1e-12);
        assert!((k.big_n.unwrap() - (4.0 + 15f64.sqrt())).abs() < 1e-12);
        assert!((k.big_d.unwrap() - 15f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn free_nilpotent_example_formula() {
        for n in 2..=5 {
            let (_, r) = normalized_geometry(&build_free_nilpotent(n).unwrap()).unwrap();
            let k = assemble_constants(&r, n, CChoice::Optimize(Objective::Rho1Zero)).unwrap();
            let nf = n as f64;
            assert!((k.rho20 - 1.0 / (2.0 * (nf - 1.0))).abs() < 1e-12);
            let big_n = nf / 4.0 * ((4.0 * nf - 3.0).sqrt() + (2.0 * nf - 1.0).sqrt()).powi(2);
            assert!((k.big_n.unwrap() - big_n).abs() < 1e-9 * big_n);
            let big_d = ((2.0 * nf - 1.0) * (4.0 * nf - 3.0)).sqrt();
            assert!((k.big_d.unwrap() - big_d).abs() < 1e-9 * big_d);
        }
    }

    #[test]
    fn su2_pair_rates() {
        let rho = 1.0;
        let r = geometry_report(&build_su2_pair(rho).unwrap()).unwrap();
        let k = assemble_constants(&r, 3, CChoice::Optimize(Objective::Rho1Zero)).unwrap();
        assert!((k.rho20 - 0.25).abs() < 1e-12 && k.rho1.abs() < 1e-12);
        let best = assemble_constants(&r, 3, CChoice::Optimize(Objective::MaxAlpha)).unwrap();
        assert_eq!(best.c, None);
        assert!((best.alpha.unwrap() - 0.8).abs() < 1e-9);
        assert!((closed_form_alpha(&r).unwrap() - 0.8).abs() < 1e-9);
        assert!((best.spectral_gap_bound.unwrap() - 6.0 / 7.0).abs() < 1e-9);
        assert!((r.kappa() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_c() {
        let mut r = (*geometry_report(&build_su2_pair(1.0).unwrap()).unwrap()).clone();
        r.m_hv = 0.3;
        let mut prev: Option<(f64, f64)> = None;
        for k in -20..=20 {
            let c = 10f64.powf(k as f64 / 5.0);
            let cd = assemble_constants(&r, 3, CChoice::Fixed(c)).unwrap();
            if let Some((r1, r2)) = prev {
                assert!(cd.rho1 >= r1 && cd.rho20 <= r2);
            }
            prev = Some((cd.rho1, cd.rho20));
        }
        assert!(assemble_constants(&r, 3, CChoice::Optimize(Objective::MaxRho2)).is_err());
        assert!(assemble_constants(&r, 3, CChoice::Fixed(-1.0)).is_err());
    }

    #[test]
    fn negative_kappa_rejects_closed_form() {
        let mut r = (*geometry_report(&build_heisenberg()).unwrap()).clone();
        r.m_hv = 0.5;
        assert!(closed_form_alpha(&r).is_err());
    }
}
