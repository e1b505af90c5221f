//! Riemannian Ricci curvature of `g = h ⊕ v` against its split decomposition.

use serde::{Deserialize, Serialize};

use super::{curvature, ric_hv};
use crate::model_zoo::{validate, LieModel};
use crate::{Error, Result};

/// Terms of the decomposition evaluated on one direction `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RicciTerms {
    /// `Ric_g(Y,Y)` from the Levi-Civita curvature.
    pub ric_g: f64,
    pub ric_h: f64,
    pub ric_hv: f64,
    /// `‖g(Y, R(·,·))‖²` over `∧²g*`.
    pub twist: f64,
    pub ric_v: f64,
    /// `‖R(Y, ·)‖²` over `g*⊗g`.
    pub curvature_norm: f64,
}

impl RicciTerms {
    /// Right-hand side with coefficient `q` on `‖R(Y,·)‖²`.
    pub fn split_sum(&self, q: f64) -> f64 {
        self.ric_h + self.ric_hv + 0.5 * self.twist + self.ric_v - q * self.curvature_norm
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RicciComparison {
    pub directions: usize,
    /// Max `|Ric_g − split sum|` with the stated coefficient `¾`.
    pub max_residual: f64,
    /// Same with coefficient `½`, which is what the frame computation supports.
    pub max_corrected_residual: f64,
    /// Terms at the direction where the stated form is worst.
    pub worst: Option<RicciTerms>,
}

/// Evaluates every term of the decomposition on the direction `y` (frame components).
pub fn ricci_components(model: &LieModel, y: &[f64]) -> RicciTerms {
    let a = model.algebra();
    let (n, d) = (model.dim_h(), model.dim());
    let lc = curvature(a, |c, x, z| a.lc(c, x, z));
    let ad = curvature(a, |c, x, z| a.adapted(c, x, z));
    let trace = |r: &[f64], range: std::ops::Range<usize>| -> f64 {
        let mut s = 0.0;
        for k in range {
            for b in 0..d {
                for c in 0..d {
                    s += r[((k * d + k) * d + b) * d + c] * y[b] * y[c];
                }
            }
        }
        s
    };
    let rhv = ric_hv(model);
    let mut ric_hv_val = 0.0;
    for p in 0..d {
        for q in 0..d {
            ric_hv_val += rhv[(p, q)] * y[p] * y[q];
        }
    }
    let mut twist = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let w: f64 = (n..d).map(|s| y[s] * a.c(s, i, j)).sum();
            twist += w * w;
        }
    }
    let mut curvature_norm = 0.0;
    for j in 0..n {
        for s in n..d {
            let w: f64 = (0..n).map(|i| y[i] * a.c(s, i, j)).sum();
            curvature_norm += w * w;
        }
    }
    RicciTerms {
        ric_g: trace(&lc, 0..d),
        ric_h: trace(&ad, 0..n),
        ric_hv: ric_hv_val,
        twist,
        ric_v: trace(&ad, n..d),
        curvature_norm,
    }
}

/// Compares both Ricci pipelines over unit directions; needs `∇̊g = 0`.
pub fn riemann_ricci_compare(model: &LieModel, directions: &[Vec<f64>]) -> Result<RicciComparison> {
    if !validate(model).metric_parallel {
        return Err(Error::Hypothesis(format!("{} is not metric parallel", model.name())));
    }
    let mut out = RicciComparison { directions: directions.len(), max_residual: 0.0, max_corrected_residual: 0.0, worst: None };
    for y in directions {
        if y.len() != model.dim() {
            return Err(Error::InvalidArgument("direction has wrong dimension".into()));
        }
        let t = ricci_components(model, y);
        let r = (t.ric_g - t.split_sum(0.75)).abs();
        if r > out.max_residual || out.worst.is_none() {
            out.max_residual = out.max_residual.max(r);
            out.worst = Some(t);
        }
        out.max_corrected_residual = out.max_corrected_residual.max((t.ric_g - t.split_sum(0.5)).abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{build_abelian, build_engel, build_heisenberg, build_su2_pair};

    #[test]
    fn heisenberg_known_values() {
        let m = build_heisenberg();
        let x = ricci_components(&m, &[1.0, 0.0, 0.0]);
        assert!((x.ric_g + 0.5).abs() < 1e-15);
        assert!((x.curvature_norm - 1.0).abs() < 1e-15);
        let z = ricci_components(&m, &[0.0, 0.0, 1.0]);
        assert!((z.ric_g - 0.5).abs() < 1e-15);
        assert!((z.split_sum(0.75) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn abelian_is_flat() {
        let m = build_abelian(2, 1).unwrap();
        let c = riemann_ricci_compare(&m, &[vec![0.6, 0.0, 0.8]]).unwrap();
        assert_eq!(c.max_residual, 0.0);
    }

    #[test]
    fn corrected_coefficient_matches_on_su2_pair() {
        let m = build_su2_pair(1.0).unwrap();
        let dirs: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let mut v = vec![0.0; 6];
                v[i] = 1.0;
                v
            })
            .collect();
        let c = riemann_ricci_compare(&m, &dirs).unwrap();
        assert!(c.max_corrected_residual < 1e-10, "{c:?}");
    }

    #[test]
    fn requires_parallel_metric() {
        assert!(riemann_ricci_compare(&build_engel(), &[]).is_err());
    }
}
