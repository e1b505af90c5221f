//! Truncated multivariate Taylor jets and frame-field application.
//!
//! A [`Jet`] of order `K` at base point `x` stores the coefficients
//! `∂^α f(x) / α!` for every multi-index with `|α| ≤ K`, in graded
//! lexicographic order. Because the ordering is graded, the jet of order
//! `k < K` is a prefix of the order-`K` coefficient vector.

mod chart;
mod function;

pub use chart::{
    apply_field, apply_with, bernoulli_numbers, chart_field_jets, chart_field_jets_in, chart_series_coefficients,
};
pub use function::{NamedFunction, TestFunction, Term, TrigTerm};

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock, RwLock};

use crate::{Error, Result};

/// Monomial bookkeeping shared by all jets with the same variable count and maximal order.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    max_order: usize,
    exps: Vec<Vec<u8>>,
    degree_end: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    mul: Vec<[u32; 3]>,
    mul_end: Vec<usize>,
    up: Vec<Vec<u32>>,
}

type SpaceCache = RwLock<HashMap<(usize, usize), Arc<JetSpace>>>;

fn space_cache() -> &'static SpaceCache {
    static CACHE: OnceLock<SpaceCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn monomials_of_degree(nvars: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left as u8;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e as u8;
            rec(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    if nvars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return;
    }
    let mut cur = vec![0u8; nvars];
    rec(0, degree, &mut cur, out);
}

impl JetSpace {
    /// Shared space for `nvars` variables up to order `max_order`.
    pub fn get(nvars: usize, max_order: usize) -> Arc<JetSpace> {
        if let Some(s) = space_cache().read().expect("jet space cache").get(&(nvars, max_order)) {
            return s.clone();
        }
        let built = Arc::new(JetSpace::build(nvars, max_order));
        space_cache()
            .write()
            .expect("jet space cache")
            .entry((nvars, max_order))
            .or_insert(built)
            .clone()
    }

    fn build(nvars: usize, max_order: usize) -> JetSpace {
        let mut exps = Vec::new();
        let mut degree_end = Vec::with_capacity(max_order + 1);
        for deg in 0..=max_order {
            monomials_of_degree(nvars, deg, &mut exps);
            degree_end.push(exps.len());
        }
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let degree = |i: usize| degree_end.iter().position(|&end| i < end).unwrap_or(max_order);

        let mut mul = Vec::new();
        for i in 0..exps.len() {
            let di = degree(i);
            for j in 0..degree_end[max_order - di] {
                let sum: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                let r = index[&sum];
                mul.push([i as u32, j as u32, r as u32]);
            }
        }
        mul.sort_by_key(|t| (degree(t[2] as usize), t[2], t[0]));
        let mut mul_end = vec![0; max_order + 1];
        for (k, end) in mul_end.iter_mut().enumerate() {
            *end = mul.partition_point(|t| degree(t[2] as usize) <= k);
        }

        let lower = if max_order == 0 { 0 } else { degree_end[max_order - 1] };
        let up = (0..nvars)
            .map(|v| {
                (0..lower)
                    .map(|a| {
                        let mut e = exps[a].clone();
                        e[v] += 1;
                        index[&e] as u32
                    })
                    .collect()
            })
            .collect();

        JetSpace { nvars, max_order, exps, degree_end, index, mul, mul_end, up }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of monomials of degree at most `order`.
    pub fn len(&self, order: usize) -> usize {
        self.degree_end[order]
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exps[i]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }
}

/// Truncated Taylor expansion of a scalar function at a base point.
#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    base: Arc<[f64]>,
    order: usize,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zeros(space: &Arc<JetSpace>, base: &Arc<[f64]>, order: usize) -> Jet {
        assert!(order <= space.max_order, "jet order above space order");
        assert_eq!(base.len(), space.nvars, "base point dimension");
        Jet { space: space.clone(), base: base.clone(), order, coeffs: vec![0.0; space.len(order)] }
    }

    pub fn constant(space: &Arc<JetSpace>, base: &Arc<[f64]>, order: usize, c: f64) -> Jet {
        let mut j = Jet::zeros(space, base, order);
        j.coeffs[0] = c;
        j
    }

    /// The coordinate function `x_v` expanded at the base point.
    pub fn coordinate(space: &Arc<JetSpace>, base: &Arc<[f64]>, order: usize, v: usize) -> Jet {
        let mut j = Jet::constant(space, base, order, base[v]);
        if order >= 1 {
            let mut e = vec![0u8; space.nvars];
            e[v] = 1;
            j.coeffs[space.index[&e]] = 1.0;
        }
        j
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, base: &Arc<[f64]>, order: usize, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), space.len(order));
        Jet { space: space.clone(), base: base.clone(), order, coeffs }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn base_point(&self) -> &Arc<[f64]> {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficient `∂^α f(x)/α!`, zero outside the stored range.
    pub fn coeff(&self, alpha: &[u8]) -> f64 {
        match self.space.index_of(alpha) {
            Some(i) if i < self.coeffs.len() => self.coeffs[i],
            _ => 0.0,
        }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            space: self.space.clone(),
            base: self.base.clone(),
            order,
            coeffs: self.coeffs[..self.space.len(order)].to_vec(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `self += s * other`, truncating to the lower order.
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        if other.order < self.order {
            self.order = other.order;
            self.coeffs.truncate(self.space.len(other.order));
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// Product truncated at the lower of the two orders.
    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let mut out = vec![0.0; self.space.len(order)];
        for t in &self.space.mul[..self.space.mul_end[order]] {
            out[t[2] as usize] += self.coeffs[t[0] as usize] * other.coeffs[t[1] as usize];
        }
        Jet { space: self.space.clone(), base: self.base.clone(), order, coeffs: out }
    }

    /// Partial derivative in coordinate `v`; the order drops by one.
    pub fn deriv(&self, v: usize) -> Result<Jet> {
        if self.order == 0 {
            return Err(Error::OrderExhausted("derivative of an order-0 jet".into()));
        }
        let order = self.order - 1;
        let n = self.space.len(order);
        let up = &self.space.up[v];
        let out = (0..n)
            .map(|a| (self.space.exps[a][v] as f64 + 1.0) * self.coeffs[up[a] as usize])
            .collect();
        Ok(Jet { space: self.space.clone(), base: self.base.clone(), order, coeffs: out })
    }

    /// Multiplication by the displacement `h_v = x_v − base_v`.
    pub fn mul_displacement(&self, v: usize) -> Jet {
        let mut out = vec![0.0; self.coeffs.len()];
        if self.order > 0 {
            let up = &self.space.up[v];
            for a in 0..self.space.len(self.order - 1) {
                out[up[a] as usize] += self.coeffs[a];
            }
        }
        Jet { space: self.space.clone(), base: self.base.clone(), order: self.order, coeffs: out }
    }

    /// `F(self)` given the derivatives `F^(m)(self.value())` for `m = 0..=order`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let k = self.order;
        assert!(derivs.len() > k, "need order+1 derivatives");
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut fact = 1.0;
        let mut taylor = Vec::with_capacity(k + 1);
        for (m, d) in derivs.iter().take(k + 1).enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            taylor.push(d / fact);
        }
        let mut acc = Jet::constant(&self.space, &self.base, k, taylor[k]);
        for m in (0..k).rev() {
            acc = acc.mul_jet(&delta);
            acc.coeffs[0] += taylor[m];
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.order + 1])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        self.compose(&(0..=self.order).map(|m| cycle[m % 4]).collect::<Vec<_>>())
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        self.compose(&(0..=self.order).map(|m| cycle[m % 4]).collect::<Vec<_>>())
    }

    /// Natural logarithm; requires a positive value.
    pub fn ln(&self) -> Result<Jet> {
        let v = self.value();
        if v <= 0.0 {
            return Err(Error::InvalidArgument(format!("log of non-positive jet value {v}")));
        }
        let mut d = vec![v.ln()];
        let mut fact = 1.0;
        for m in 1..=self.order {
            if m > 1 {
                fact *= (m - 1) as f64;
            }
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * fact / v.powi(m as i32));
        }
        Ok(self.compose(&d))
    }

    /// Square root; requires a positive value.
    pub fn sqrt(&self) -> Result<Jet> {
        let v = self.value();
        if v <= 0.0 {
            return Err(Error::InvalidArgument(format!("sqrt of non-positive jet value {v}")));
        }
        let mut d = Vec::with_capacity(self.order + 1);
        let mut c = 1.0;
        let mut p = 0.5;
        for _ in 0..=self.order {
            d.push(c * v.powf(p));
            c *= p;
            p -= 1.0;
        }
        Ok(self.compose(&d))
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
