//! Left-invariant frame fields in exponential coordinates of the first kind.
//!
//! At the point `exp(u)` the field `E_i` has coordinate components
//! `ψ(ad_u) e_i` with `ψ(z) = z / (1 − e^{−z}) = Σ_m b_m z^m`. The series is
//! evaluated on jets, so the components come out as Taylor expansions
//! around the base point.

use std::sync::Arc;

use super::{Jet, JetSpace};
use crate::model_zoo::LieModel;
use crate::{Error, Result};

const MAX_TERMS: usize = 200;

/// Bernoulli numbers `B_0..=B_m` with `B_1 = −½`.
pub fn bernoulli_numbers(m: usize) -> Vec<f64> {
    let mut b = vec![0.0; m + 1];
    b[0] = 1.0;
    for n in 1..=m {
        // Σ_{k<n+1} C(n+1, k) B_k = 0
        let mut binom = 1.0;
        let mut s = 0.0;
        for (k, bk) in b.iter().enumerate().take(n) {
            s += binom * bk;
            binom *= (n + 1 - k) as f64 / (k + 1) as f64;
        }
        b[n] = -s / (n + 1) as f64;
    }
    b
}

/// Taylor coefficients `b_0..=b_m` of `z / (1 − e^{−z})`.
pub fn chart_series_coefficients(m: usize) -> Vec<f64> {
    // Inverts (1 − e^{−z})/z = Σ_k (−1)^k z^k/(k+1)! term by term; this path
    // is independent of the Bernoulli recurrence and the tests compare them.
    let mut g = vec![0.0; m + 1];
    let mut fact = 1.0;
    for (k, gk) in g.iter_mut().enumerate() {
        fact *= (k + 1) as f64;
        *gk = if k % 2 == 0 { 1.0 } else { -1.0 } / fact;
    }
    let mut b = vec![0.0; m + 1];
    for n in 0..=m {
        let s: f64 = (1..=n).map(|k| g[k] * b[n - k]).sum();
        b[n] = if n == 0 { 1.0 } else { -s };
    }
    b
}

fn series_coefficients_cached() -> &'static [f64] {
    static B: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    B.get_or_init(|| chart_series_coefficients(MAX_TERMS))
}

/// Coordinate components of every stored-frame field `E_i` as jets of the given
/// order around `base`. Entry `[i][k]` is the `∂_k` component of `E_i`.
pub fn chart_field_jets_in(
    model: &LieModel,
    space: &Arc<JetSpace>,
    base: &Arc<[f64]>,
    order: usize,
) -> Result<Vec<Vec<Jet>>> {
    let d = model.dim();
    if base.len() != d {
        return Err(Error::InvalidArgument(format!("point has {} coordinates, model has {d}", base.len())));
    }
    let b = series_coefficients_cached();
    // Nonzero raw constants as (j, l, k, c^k_{jl}).
    let mut consts = Vec::new();
    for j in 0..d {
        for l in 0..d {
            for k in 0..d {
                let w = model.c(k, j, l);
                if w != 0.0 {
                    consts.push((j, l, k, w));
                }
            }
        }
    }
    let mut fields = Vec::with_capacity(d);
    for i in 0..d {
        let mut v: Vec<Jet> = (0..d)
            .map(|k| Jet::constant(space, base, order, if k == i { 1.0 } else { 0.0 }))
            .collect();
        let mut phi = v.clone();
        let mut small_run = 0;
        let mut converged = false;
        for (m, bm) in b.iter().enumerate().skip(1) {
            let mut next: Vec<Jet> = (0..d).map(|_| Jet::zeros(space, base, order)).collect();
            // ad_{x+h} v = Σ c^k_{jl} (x_j + h_j) v_l
            let mut by_j: Vec<Option<Vec<Jet>>> = vec![None; d];
            for &(j, l, k, w) in &consts {
                if base[j] != 0.0 {
                    next[k].axpy(w * base[j], &v[l]);
                }
                let slot = by_j[j].get_or_insert_with(|| (0..d).map(|_| Jet::zeros(space, base, order)).collect());
                slot[k].axpy(w, &v[l]);
            }
            for (j, slot) in by_j.into_iter().enumerate() {
                if let Some(slot) = slot {
                    for k in 0..d {
                        let shifted = slot[k].mul_displacement(j);
                        next[k].axpy(1.0, &shifted);
                    }
                }
            }
            v = next;
            let size = v.iter().flat_map(|j| j.coeffs().iter()).fold(0.0f64, |a, c| a.max(c.abs()));
            if size == 0.0 {
                converged = true;
                break;
            }
            if *bm != 0.0 {
                for k in 0..d {
                    phi[k].axpy(*bm, &v[k]);
                }
            }
            let scale = phi.iter().flat_map(|j| j.coeffs().iter()).fold(1.0f64, |a, c| a.max(c.abs()));
            let bound = 2.0 * (2.0 * std::f64::consts::PI).powi(-(m as i32));
            if bound * size < 1e-17 * scale {
                small_run += 1;
                if small_run >= 3 {
                    converged = true;
                    break;
                }
            } else {
                small_run = 0;
            }
            if !size.is_finite() {
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "chart series for field {i} did not converge at {:?}",
                base.as_ref()
            )));
        }
        fields.push(phi);
    }
    Ok(fields)
}

/// Convenience wrapper around [`chart_field_jets_in`] with a fresh jet space.
pub fn chart_field_jets(model: &LieModel, x: &[f64], order: usize) -> Result<Vec<Vec<Jet>>> {
    let space = JetSpace::get(model.dim(), order.max(1));
    let base: Arc<[f64]> = x.into();
    chart_field_jets_in(model, &space, &base, order)
}

/// `Σ_k field[k] · ∂_k f`; the result has order `f.order() − 1`.
pub fn apply_with(field: &[Jet], f: &Jet) -> Result<Jet> {
    if f.order() == 0 {
        return Err(Error::OrderExhausted("cannot differentiate an order-0 jet".into()));
    }
    let mut out = Jet::zeros(f.space(), f.base_point(), f.order() - 1);
    for (k, comp) in field.iter().enumerate() {
        if comp.coeffs().iter().all(|c| *c == 0.0) {
            continue;
        }
        let dk = f.deriv(k)?;
        out.axpy(1.0, &comp.mul_jet(&dk));
    }
    Ok(out)
}

/// Applies the stored-frame field `E_i` to a jet.
pub fn apply_field(model: &LieModel, i: usize, f: &Jet) -> Result<Jet> {
    if i >= model.dim() {
        return Err(Error::InvalidArgument(format!("frame index {i} out of range")));
    }
    if f.order() == 0 {
        return Err(Error::OrderExhausted("cannot differentiate an order-0 jet".into()));
    }
    let fields = chart_field_jets_in(model, f.space(), f.base_point(), f.order() - 1)?;
    apply_with(&fields[i], f)
}
