//! Group law in exponential coordinates of the first kind.
//!
//! Nilpotent algebras of step at most four use the exact truncated
//! Baker-Campbell-Hausdorff series. The `su(2) ⊕ su(2)` model is realized
//! on a pair of unit quaternions.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::LieModel;
use crate::{Error, Result};

/// Sparse bracket table `[E_i, E_j] = Σ w E_k` with `i < j`.
#[derive(Clone, Debug)]
pub struct BracketTable {
    d: usize,
    entries: Vec<(usize, usize, usize, f64)>,
}

impl BracketTable {
    fn from_model(model: &LieModel) -> BracketTable {
        let d = model.dim();
        let mut entries = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                for k in 0..d {
                    let w = model.c(k, i, j);
                    if w != 0.0 {
                        entries.push((i, j, k, w));
                    }
                }
            }
        }
        BracketTable { d, entries }
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for &(i, j, k, w) in &self.entries {
            out[k] += w * (x[i] * y[j] - x[j] * y[i]);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat(pub [f64; 4]);

impl Quat {
    pub const ONE: Quat = Quat([1.0, 0.0, 0.0, 0.0]);

    pub fn mul(self, o: Quat) -> Quat {
        let [a1, b1, c1, d1] = self.0;
        let [a2, b2, c2, d2] = o.0;
        Quat([
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ])
    }

    pub fn conj(self) -> Quat {
        let [a, b, c, d] = self.0;
        Quat([a, -b, -c, -d])
    }

    /// `exp` of the pure quaternion with vector part `v`.
    pub fn exp_pure(v: [f64; 3]) -> Quat {
        let th = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let sinc = if th < 1e-8 { 1.0 - th * th / 6.0 } else { th.sin() / th };
        Quat([th.cos(), sinc * v[0], sinc * v[1], sinc * v[2]])
    }

    /// Principal logarithm of a unit quaternion, as a vector part with norm ≤ π.
    pub fn log_unit(self) -> [f64; 3] {
        let n = self.0.iter().map(|c| c * c).sum::<f64>().sqrt();
        let [a, b, c, d] = self.0.map(|c| c / n);
        let vn = (b * b + c * c + d * d).sqrt();
        let th = vn.atan2(a);
        let k = if vn < 1e-12 { 1.0 + th * th / 6.0 } else { th / vn };
        [k * b, k * c, k * d]
    }
}

#[derive(Clone, Debug)]
pub enum Realization {
    /// No global group law available; Monte Carlo and distance computations are unsupported.
    None,
    Nilpotent { step: usize, table: Arc<BracketTable> },
    /// `su(2) ⊕ su(2)` with bracket scale `s = √(2ρ)`.
    Su2Pair { s: f64 },
}

fn numeric_rank(vectors: &[Vec<f64>], d: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(d, vectors.len(), |i, j| vectors[j][i]);
    let sv = m.singular_values();
    let top = sv.iter().fold(0.0f64, |a, b| a.max(*b));
    sv.iter().filter(|s| **s > 1e-10 * top.max(1.0)).count()
}

/// Nilpotency step, or `None` when the lower central series stalls above zero.
fn lower_central_step(table: &BracketTable) -> Option<usize> {
    let d = table.d;
    let basis: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut current = basis.clone();
    let mut rank = d;
    for step in 1..=d + 1 {
        let next: Vec<Vec<f64>> = basis
            .iter()
            .flat_map(|e| current.iter().map(|v| table.bracket(e, v)))
            .filter(|v| v.iter().any(|c| c.abs() > 1e-14))
            .collect();
        let r = numeric_rank(&next, d);
        if r == 0 {
            return Some(step);
        }
        if r == rank {
            return None;
        }
        rank = r;
        current = next;
    }
    None
}

impl Realization {
    pub(crate) fn su2_pair(s: f64) -> Realization {
        Realization::Su2Pair { s }
    }

    pub(crate) fn detect(model: &LieModel) -> Realization {
        let table = BracketTable::from_model(model);
        if let Some(step) = lower_central_step(&table) {
            if step <= 4 {
                return Realization::Nilpotent { step, table: Arc::new(table) };
            }
            return Realization::None;
        }
        if model.dim() == 6 && model.dim_h() == 3 {
            let s = model.c(5, 3, 4);
            if s > 0.0 {
                let same = super::builders::su2_pair_constants(s)
                    .iter()
                    .zip(model.raw_constants())
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * s.max(1.0));
                if same {
                    return Realization::Su2Pair { s };
                }
            }
        }
        Realization::None
    }

    pub fn is_available(&self) -> bool {
        !matches!(self, Realization::None)
    }

    pub fn nilpotency_step(&self) -> Option<usize> {
        match self {
            Realization::Nilpotent { step, .. } => Some(*step),
            _ => None,
        }
    }

    fn unsupported() -> Error {
        Error::Unsupported("model has no group realization".into())
    }

    /// Group product `x · y` in exponential coordinates.
    pub fn mul(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        match self {
            Realization::None => Err(Self::unsupported()),
            Realization::Nilpotent { step, table } => Ok(bch(table, *step, x, y)),
            Realization::Su2Pair { s } => {
                let (p1, p2) = su2_to_quats(*s, x);
                let (q1, q2) = su2_to_quats(*s, y);
                Ok(su2_from_quats(*s, p1.mul(q1), p2.mul(q2)))
            }
        }
    }

    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Realization::None => Err(Self::unsupported()),
            _ => Ok(x.iter().map(|v| -v).collect()),
        }
    }

    /// A mutable group element starting at `x`, for repeated right multiplication.
    pub fn walker(&self, x: &[f64]) -> Result<Walker> {
        match self {
            Realization::None => Err(Self::unsupported()),
            Realization::Nilpotent { step, table } => {
                Ok(Walker::Coords { x: x.to_vec(), step: *step, table: table.clone() })
            }
            Realization::Su2Pair { s } => {
                let (p, q) = su2_to_quats(*s, x);
                Ok(Walker::Quats { p, q, s: *s })
            }
        }
    }
}

/// Exact BCH for nilpotent algebras of step ≤ 4.
fn bch(table: &BracketTable, step: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    if step < 2 {
        return z;
    }
    let xy = table.bracket(x, y);
    for (zi, v) in z.iter_mut().zip(&xy) {
        *zi += 0.5 * v;
    }
    if step < 3 {
        return z;
    }
    let x_xy = table.bracket(x, &xy);
    let y_xy = table.bracket(y, &xy);
    for k in 0..z.len() {
        // [y,[y,x]] = −[y,[x,y]]
        z[k] += (x_xy[k] - y_xy[k]) / 12.0;
    }
    if step < 4 {
        return z;
    }
    let y_x_xy = table.bracket(y, &x_xy);
    for (zi, v) in z.iter_mut().zip(&y_x_xy) {
        *zi -= v / 24.0;
    }
    z
}

fn su2_to_quats(s: f64, u: &[f64]) -> (Quat, Quat) {
    let first = [0, 1, 2].map(|i| 0.5 * s * (u[i] + u[3 + i]));
    let second = [0, 1, 2].map(|i| s * u[i]);
    (Quat::exp_pure(first), Quat::exp_pure(second))
}

fn su2_from_quats(s: f64, p: Quat, q: Quat) -> Vec<f64> {
    let v1 = p.log_unit();
    let v2 = q.log_unit();
    let mut u = vec![0.0; 6];
    for i in 0..3 {
        u[i] = v2[i] / s;
        u[3 + i] = 2.0 * v1[i] / s - u[i];
    }
    u
}

#[derive(Clone, Debug)]
pub enum Walker {
    Coords { x: Vec<f64>, step: usize, table: Arc<BracketTable> },
    Quats { p: Quat, q: Quat, s: f64 },
}

impl Walker {
    /// Right-multiplies by `exp(Σ v_i E_i)`.
    pub fn step(&mut self, v: &[f64]) {
        match self {
            Walker::Coords { x, step, table } => *x = bch(table, *step, x, v),
            Walker::Quats { p, q, s } => {
                let (a, b) = su2_to_quats(*s, v);
                *p = p.mul(a);
                *q = q.mul(b);
            }
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match self {
            Walker::Coords { x, .. } => x.clone(),
            Walker::Quats { p, q, s } => su2_from_quats(*s, *p, *q),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{build_engel, build_free_nilpotent, build_heisenberg, build_su2_pair};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn heisenberg_product() {
        let r = build_heisenberg().realization().clone();
        let z = r.mul(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(z, vec![1.0, 1.0, 0.5]);
    }

    #[test]
    fn associativity_and_inverse() {
        let xs = [[0.3, -0.2, 0.5, 0.1], [-0.7, 0.4, 0.2, -0.3], [0.1, 0.9, -0.6, 0.4]];
        let r = build_engel().realization().clone();
        let ab_c = r.mul(&r.mul(&xs[0], &xs[1]).unwrap(), &xs[2]).unwrap();
        let a_bc = r.mul(&xs[0], &r.mul(&xs[1], &xs[2]).unwrap()).unwrap();
        assert!(close(&ab_c, &a_bc, 1e-13));
        let e = r.mul(&xs[0], &r.inverse(&xs[0]).unwrap()).unwrap();
        assert!(close(&e, &[0.0; 4], 1e-15));

        let r = build_su2_pair(1.3).unwrap().realization().clone();
        let a = [0.2, -0.1, 0.3, 0.4, 0.0, -0.2];
        let b = [-0.3, 0.2, 0.1, 0.1, 0.5, 0.3];
        let c = [0.1, 0.1, -0.4, -0.2, 0.2, 0.1];
        let ab_c = r.mul(&r.mul(&a, &b).unwrap(), &c).unwrap();
        let a_bc = r.mul(&a, &r.mul(&b, &c).unwrap()).unwrap();
        assert!(close(&ab_c, &a_bc, 1e-12));
    }

    #[test]
    fn one_parameter_subgroups_add() {
        let r = build_su2_pair(0.8).unwrap().realization().clone();
        let u = [0.1, 0.2, -0.3, 0.05, -0.1, 0.2];
        let half: Vec<f64> = u.iter().map(|v| v * 0.5).collect();
        assert!(close(&r.mul(&half, &half).unwrap(), &u, 1e-14));
    }

    #[test]
    fn detection() {
        assert_eq!(build_heisenberg().realization().nilpotency_step(), Some(2));
        assert_eq!(build_free_nilpotent(4).unwrap().realization().nilpotency_step(), Some(2));
        let m = build_su2_pair(2.0).unwrap();
        let doc = m.to_document();
        let back = LieModel::from_document(&doc).unwrap();
        assert!(matches!(back.realization(), Realization::Su2Pair { s } if (s - 2.0).abs() < 1e-12));
    }

    #[test]
    fn quaternion_log_inverts_exp() {
        let v = [0.4, -1.1, 0.7];
        let w = Quat::exp_pure(v).log_unit();
        assert!(close(&v, &w, 1e-14));
        assert_eq!(Quat::ONE.conj(), Quat::ONE);
    }
}
