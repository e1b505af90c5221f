//! Carnot-Carathéodory distance.
//!
//! On a Heisenberg-type model (`[A₁, A₂] = s·Z`, orthonormal `A₁, A₂`) the
//! horizontal projection of a geodesic from the origin is a circular arc and
//! the vertical coordinate is `s` times the area between arc and chord. For a
//! chord of length `r` and arc angle `φ` that area is `r² μ(φ)` with
//! `μ(φ) = (φ − sin φ) / (8 sin²(φ/2))`, increasing from 0 to ∞ on `[0, 2π)`,
//! and the arc length is `r (φ/2) / sin(φ/2)`. Solving `μ(φ) = |z| / (s r²)`
//! gives the exact distance.
//!
//! Other models fall back to Dijkstra on a horizontal step graph.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::model_zoo::LieModel;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    GeodesicShooting,
    Graph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    /// Norm of the horizontal projection, which no horizontal curve can beat.
    pub lower: f64,
    /// Length of an explicit admissible curve; infinite when none is constructed.
    pub upper: f64,
    pub method: DistanceMethod,
    /// Graph step length for [`DistanceMethod::Graph`].
    pub resolution: Option<f64>,
}

fn area_ratio(phi: f64) -> f64 {
    if phi < 1e-4 {
        // series of (φ − sin φ)/(8 sin²(φ/2))
        return phi / 12.0 + phi.powi(3) / 720.0;
    }
    let s = (0.5 * phi).sin();
    (phi - phi.sin()) / (8.0 * s * s)
}

/// Distance from the origin to `exp(a A₁ + b A₂ + z Z)` when `[A₁, A₂] = s Z`.
pub fn heisenberg_distance(a: f64, b: f64, z: f64, s: f64) -> f64 {
    let r = a.hypot(b);
    let area = if s == 0.0 { 0.0 } else { (z / s).abs() };
    if area == 0.0 {
        return r;
    }
    if r == 0.0 {
        return 2.0 * (std::f64::consts::PI * area).sqrt();
    }
    let target = area / (r * r);
    if target < 1e-6 {
        let phi = 12.0 * target;
        return r * (1.0 + phi * phi / 24.0);
    }
    let (mut lo, mut hi) = (0.0, 2.0 * std::f64::consts::PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if area_ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let phi = 0.5 * (lo + hi);
    let half = 0.5 * phi;
    let exact = r * half / half.sin();
    // Near φ = 2π the arc is almost a full circle; the circle-of-given-area bound is tighter there.
    exact.min(r + 2.0 * (std::f64::consts::PI * area).sqrt()).max(r)
}

/// Bracket scale `s` when the model is the Heisenberg algebra with an orthonormal horizontal pair.
fn heisenberg_scale(model: &LieModel) -> Option<f64> {
    if model.dim() != 3 || model.dim_h() != 2 {
        return None;
    }
    let g = model.frame_metric();
    if (g[(0, 0)] - 1.0).abs() > 1e-14 || (g[(1, 1)] - 1.0).abs() > 1e-14 || g[(0, 1)].abs() > 1e-14 {
        return None;
    }
    let s = model.c(2, 0, 1);
    let nonzero = model.raw_constants().iter().filter(|c| **c != 0.0).count();
    (s != 0.0 && nonzero == 2).then_some(s)
}

/// Horizontal-projection lower bound, available when the vertical part is the derived algebra.
fn projection_bound(model: &LieModel, g: &[f64]) -> f64 {
    let n = model.dim_h();
    let d = model.dim();
    let derived_is_vertical = model.realization().nilpotency_step().is_some()
        && (0..d).all(|i| (0..d).all(|j| (0..n).all(|k| model.c(k, i, j) == 0.0)));
    if !derived_is_vertical {
        return 0.0;
    }
    let metric = model.frame_metric();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += g[i] * metric[(i, j)] * g[j];
        }
    }
    q.max(0.0).sqrt()
}

/// `d_cc(x, y)` with bracketing bounds.
pub fn cc_distance(model: &LieModel, x: &[f64], y: &[f64]) -> Result<DistanceEstimate> {
    let d = model.dim();
    if x.len() != d || y.len() != d {
        return Err(Error::InvalidArgument("points have the wrong dimension".into()));
    }
    let real = model.realization();
    let g = real.mul(&real.inverse(x)?, y)?;
    if g.iter().all(|v| *v == 0.0) {
        return Ok(DistanceEstimate { value: 0.0, lower: 0.0, upper: 0.0, method: DistanceMethod::GeodesicShooting, resolution: None });
    }
    let lower = projection_bound(model, &g);
    if let Some(s) = heisenberg_scale(model) {
        let value = heisenberg_distance(g[0], g[1], g[2], s);
        let area = (g[2] / s).abs();
        // Straight segment followed by a loop enclosing the remaining area.
        let upper = lower + 2.0 * (std::f64::consts::PI * area).sqrt();
        return Ok(DistanceEstimate { value: value.clamp(lower, upper), lower, upper, method: DistanceMethod::GeodesicShooting, resolution: None });
    }
    let eps = (lower.max(0.2) / 8.0).min(0.25);
    graph_distance(model, &g, eps, 400_000, lower)
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Dijkstra from the origin over steps `exp(ε u)` for unit horizontal `u`, until a node is within one step of `g`.
pub(crate) fn graph_distance(model: &LieModel, g: &[f64], eps: f64, max_nodes: usize, lower: f64) -> Result<DistanceEstimate> {
    let d = model.dim();
    let n = model.dim_h();
    let real = model.realization();
    let frame = model.orthonormal_frame();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for a in 0..n {
        for sa in [1.0, -1.0] {
            dirs.push((0..n).map(|b| if b == a { sa } else { 0.0 }).collect());
            for b in a + 1..n {
                for sb in [1.0, -1.0] {
                    let mut u = vec![0.0; n];
                    u[a] = sa * std::f64::consts::FRAC_1_SQRT_2;
                    u[b] = sb * std::f64::consts::FRAC_1_SQRT_2;
                    dirs.push(u);
                }
            }
        }
    }
    let steps: Vec<Vec<f64>> = dirs
        .iter()
        .map(|u| (0..d).map(|i| eps * (0..n).map(|a| frame[(i, a)] * u[a]).sum::<f64>()).collect())
        .collect();
    // Horizontal coordinates move by ε per step, vertical ones by O(ε²).
    let key = |p: &[f64]| -> Vec<i64> {
        p.iter()
            .enumerate()
            .map(|(i, v)| {
                let q = if i < n { 0.5 * eps } else { 0.5 * eps * eps };
                (v / q).round() as i64
            })
            .collect()
    };
    let ginv = real.inverse(g)?;
    let gap = |p: &[f64]| -> Result<f64> {
        let r = real.mul(&ginv, p)?;
        let h: f64 = r[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let v: f64 = r[n..].iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(h.max(v.sqrt()))
    };
    let mut nodes: Vec<Vec<f64>> = vec![vec![0.0; d]];
    let mut dist = vec![0.0];
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    index.insert(key(&nodes[0]), 0);
    let mut heap = BinaryHeap::new();
    heap.push(Entry(0.0, 0));
    while let Some(Entry(du, u)) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        if gap(&nodes[u])? <= eps {
            let value = du.max(lower);
            return Ok(DistanceEstimate { value, lower, upper: f64::INFINITY, method: DistanceMethod::Graph, resolution: Some(eps) });
        }
        for s in &steps {
            let p = real.mul(&nodes[u], s)?;
            let nd = du + eps;
            let k = key(&p);
            match index.get(&k) {
                Some(&v) if dist[v] <= nd => {}
                Some(&v) => {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
                None => {
                    if nodes.len() >= max_nodes {
                        return Err(Error::Numerical(format!("distance graph exceeded {max_nodes} nodes")));
                    }
                    index.insert(k, nodes.len());
                    heap.push(Entry(nd, nodes.len()));
                    nodes.push(p);
                    dist.push(nd);
                }
            }
        }
    }
    Err(Error::Numerical("distance graph exhausted without reaching the target".into()))
}
