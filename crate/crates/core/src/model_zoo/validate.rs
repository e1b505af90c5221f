use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LieModel;

/// Structural checks on a model. Residuals are maxima of absolute values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model: String,
    pub jacobi_residual: f64,
    pub antisymmetry_residual: f64,
    /// Depth of iterated brackets of `H` needed to span the algebra.
    pub bracket_step: Option<usize>,
    pub bracket_generating: bool,
    pub metric_min_eigenvalue: f64,
    /// `∇̊h = 0`: vertical flows preserve the horizontal metric.
    pub metric_preserving: bool,
    pub metric_preserving_residual: f64,
    /// `∇̊g = 0`: both metrics are parallel.
    pub metric_parallel: bool,
    pub metric_parallel_residual: f64,
    pub vertical_integrable: bool,
    pub integrability_residual: f64,
    /// Trace-zero condition on curvature and co-curvature; vacuous when `V` is integrable.
    pub trace_zero: bool,
    pub trace_zero_residual: f64,
    pub passed: bool,
}

const TOL: f64 = 1e-12;

fn span_rank(vectors: &[Vec<f64>], d: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(d, vectors.len(), |i, j| vectors[j][i]);
    let sv = m.singular_values();
    let top = sv.iter().fold(0.0f64, |a, b| a.max(*b));
    sv.iter().filter(|s| **s > 1e-10 * top.max(1.0)).count()
}

fn bracket_step(model: &LieModel) -> Option<usize> {
    let d = model.dim();
    let br = |x: &[f64], y: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += model.c(k, i, j) * x[i] * y[j];
                    }
                }
                s
            })
            .collect()
    };
    let gens: Vec<Vec<f64>> = (0..model.dim_h())
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut all = gens.clone();
    let mut layer = gens.clone();
    let mut rank = span_rank(&all, d);
    for step in 1..=d {
        if rank == d {
            return Some(step);
        }
        layer = gens.iter().flat_map(|g| layer.iter().map(|v| br(g, v))).collect();
        all.extend(layer.iter().cloned());
        let r = span_rank(&all, d);
        if r == rank {
            return None;
        }
        rank = r;
    }
    (rank == d).then_some(d)
}

pub fn validate(model: &LieModel) -> ValidationReport {
    let d = model.dim();
    let a = model.algebra();
    let h = |i: usize| i < model.dim_h();

    let mut antisym: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                antisym = antisym.max((model.c(k, i, j) + model.c(k, j, i)).abs());
            }
        }
    }

    let eig = crate::util::sym_eigenvalues(model.frame_metric());
    let metric_min_eigenvalue = eig.first().copied().unwrap_or(0.0);

    // ∇̊ is metric inside each bundle except through its cross terms
    // ∇̊_V X = pr_H[V, X] and ∇̊_X V = pr_V[X, V]; metric compatibility
    // in an orthonormal frame is antisymmetry of those blocks.
    let mut preserving: f64 = 0.0;
    let mut parallel_v: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                if h(j) != h(k) {
                    continue;
                }
                let r = (a.adapted(k, i, j) + a.adapted(j, i, k)).abs();
                if h(j) {
                    preserving = preserving.max(r);
                } else {
                    parallel_v = parallel_v.max(r);
                }
            }
        }
    }
    let parallel = preserving.max(parallel_v);

    let mut integrability: f64 = 0.0;
    for s in model.dim_h()..d {
        for t in model.dim_h()..d {
            for k in 0..model.dim_h() {
                integrability = integrability.max(a.c(k, s, t).abs());
            }
        }
    }
    let vertical_integrable = integrability <= TOL;

    let mut trace_zero: f64 = 0.0;
    if !vertical_integrable {
        for i in 0..model.dim_h() {
            for s in model.dim_h()..d {
                let mut m = 0.0;
                for q in 0..model.dim_h() {
                    for t in model.dim_h()..d {
                        m += a.c(t, i, q) * a.c(q, s, t);
                    }
                }
                trace_zero = trace_zero.max(m.abs());
            }
        }
    }

    let jacobi_residual = a.jacobi_residual();
    let step = bracket_step(model);
    let trace_ok = trace_zero <= TOL;
    ValidationReport {
        model: model.name().to_string(),
        jacobi_residual,
        antisymmetry_residual: antisym,
        bracket_step: step,
        bracket_generating: step.is_some(),
        metric_min_eigenvalue,
        metric_preserving: preserving <= TOL,
        metric_preserving_residual: preserving,
        metric_parallel: parallel <= TOL,
        metric_parallel_residual: parallel,
        vertical_integrable,
        integrability_residual: integrability,
        trace_zero: trace_ok,
        trace_zero_residual: trace_zero,
        passed: jacobi_residual <= TOL
            && antisym == 0.0
            && metric_min_eigenvalue > 0.0
            && step.is_some()
            && trace_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{build_abelian, build_engel, build_heisenberg, build_su2_pair, shipped_models};

    #[test]
    fn shipped_models_pass() {
        for m in shipped_models() {
            let r = validate(&m);
            assert!(r.passed, "{r:?}");
            assert!(r.jacobi_residual <= 1e-12);
        }
    }

    #[test]
    fn heisenberg_flags() {
        let r = validate(&build_heisenberg());
        assert!(r.metric_preserving && r.metric_parallel && r.vertical_integrable);
        assert_eq!(r.bracket_step, Some(2));
    }

    #[test]
    fn engel_flags() {
        let r = validate(&build_engel());
        assert!(r.metric_preserving);
        assert!(!r.metric_parallel);
        assert!(r.vertical_integrable);
        assert_eq!(r.bracket_step, Some(3));
    }

    #[test]
    fn su2_pair_flags() {
        let r = validate(&build_su2_pair(1.0).unwrap());
        assert!(r.metric_preserving && r.metric_parallel && r.vertical_integrable);
        assert_eq!(r.bracket_step, Some(2));
    }

    #[test]
    fn abelian_is_not_bracket_generating() {
        let r = validate(&build_abelian(2, 1).unwrap());
        assert!(!r.bracket_generating);
        assert!(!r.passed);
    }
}
