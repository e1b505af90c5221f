use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Jet, JetSpace};
use crate::{Error, Result};

/// One monomial `coeff · x^exponents`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// One trigonometric term `a·cos(k·x) + b·sin(k·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub frequency: Vec<i32>,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum NamedFunction {
    /// `offset + amplitude · exp(−|x − center|² / (2 width²))`.
    GaussianBump { center: Vec<f64>, width: f64, amplitude: f64, offset: f64 },
    /// `exp(p(x))`.
    ExpPolynomial { terms: Vec<Term> },
    /// `p(x)² + eps`.
    ShiftedSquare { terms: Vec<Term>, eps: f64 },
}

/// A test function on coordinate space, evaluable as a jet at any point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Polynomial { nvars: usize, degree: u32, seed: Option<u64>, coefficients: Vec<Term> },
    TrigPolynomial { nvars: usize, degree: u32, seed: Option<u64>, coefficients: Vec<TrigTerm> },
    Named { nvars: usize, function: NamedFunction },
}

fn all_exponents(nvars: usize, max_degree: u32) -> Vec<Vec<u32>> {
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur[pos] = e;
            rec(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    rec(0, max_degree, &mut vec![0; nvars], &mut out);
    out.sort_by_key(|e| e.iter().sum::<u32>());
    out
}

fn poly_degree(terms: &[Term]) -> u32 {
    terms.iter().map(|t| t.exponents.iter().sum::<u32>()).max().unwrap_or(0)
}

fn eval_poly(terms: &[Term], x: &[f64]) -> f64 {
    terms
        .iter()
        .map(|t| t.coeff * t.exponents.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product::<f64>())
        .sum()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Taylor coefficients of a polynomial at `base` by binomial expansion; exact.
fn lift_poly(terms: &[Term], space: &Arc<JetSpace>, base: &Arc<[f64]>, order: usize) -> Jet {
    let n = space.nvars();
    let mut coeffs = vec![0.0; space.len(order)];
    let mut beta = vec![0u8; n];
    for t in terms {
        let alpha = &t.exponents;
        fn rec(
            pos: usize,
            budget: usize,
            alpha: &[u32],
            base: &[f64],
            acc: f64,
            beta: &mut Vec<u8>,
            space: &JetSpace,
            coeffs: &mut [f64],
        ) {
            if pos == alpha.len() {
                if let Some(i) = space.index_of(beta) {
                    if i < coeffs.len() {
                        coeffs[i] += acc;
                    }
                }
                return;
            }
            let top = (alpha[pos] as usize).min(budget);
            for b in 0..=top {
                let factor = binomial(alpha[pos], b as u32) * base[pos].powi((alpha[pos] - b as u32) as i32);
                if factor == 0.0 {
                    continue;
                }
                beta[pos] = b as u8;
                rec(pos + 1, budget - b, alpha, base, acc * factor, beta, space, coeffs);
            }
            beta[pos] = 0;
        }
        rec(0, order, alpha, base, t.coeff, &mut beta, space, &mut coeffs);
    }
    Jet::from_coeffs(space, base, order, coeffs)
}

impl TestFunction {
    pub fn nvars(&self) -> usize {
        match self {
            TestFunction::Polynomial { nvars, .. }
            | TestFunction::TrigPolynomial { nvars, .. }
            | TestFunction::Named { nvars, .. } => *nvars,
        }
    }

    pub fn polynomial(nvars: usize, terms: Vec<Term>) -> TestFunction {
        let degree = poly_degree(&terms);
        TestFunction::Polynomial { nvars, degree, seed: None, coefficients: terms }
    }

    pub fn constant(nvars: usize, c: f64) -> TestFunction {
        TestFunction::polynomial(nvars, vec![Term { exponents: vec![0; nvars], coeff: c }])
    }

    /// The monomial `x^exponents`.
    pub fn monomial(exponents: &[u32]) -> TestFunction {
        TestFunction::polynomial(exponents.len(), vec![Term { exponents: exponents.to_vec(), coeff: 1.0 }])
    }

    /// The coordinate function `x_v`.
    pub fn coordinate(nvars: usize, v: usize) -> TestFunction {
        let mut e = vec![0; nvars];
        e[v] = 1;
        TestFunction::monomial(&e)
    }

    /// Dense polynomial of total degree ≤ `degree`, coefficients uniform on [−1, 1].
    pub fn random_polynomial(nvars: usize, degree: u32, seed: u64) -> TestFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coefficients = all_exponents(nvars, degree)
            .into_iter()
            .map(|exponents| Term { exponents, coeff: rng.random_range(-1.0..=1.0) })
            .collect();
        TestFunction::Polynomial { nvars, degree, seed: Some(seed), coefficients }
    }

    /// Random trigonometric polynomial with integer frequencies of max-norm ≤ `degree`.
    pub fn random_trig(nvars: usize, degree: u32, terms: usize, seed: u64) -> TestFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = degree as i32;
        let coefficients = (0..terms)
            .map(|_| TrigTerm {
                frequency: (0..nvars).map(|_| rng.random_range(-d..=d)).collect(),
                cos: rng.random_range(-1.0..=1.0),
                sin: rng.random_range(-1.0..=1.0),
            })
            .collect();
        TestFunction::TrigPolynomial { nvars, degree, seed: Some(seed), coefficients }
    }

    pub fn gaussian_bump(center: Vec<f64>, width: f64, amplitude: f64, offset: f64) -> TestFunction {
        TestFunction::Named {
            nvars: center.len(),
            function: NamedFunction::GaussianBump { center, width, amplitude, offset },
        }
    }

    /// `p² + eps` for a random polynomial `p`; strictly positive.
    pub fn random_shifted_square(nvars: usize, degree: u32, eps: f64, seed: u64) -> TestFunction {
        let TestFunction::Polynomial { coefficients, .. } = TestFunction::random_polynomial(nvars, degree, seed) else {
            unreachable!()
        };
        TestFunction::Named { nvars, function: NamedFunction::ShiftedSquare { terms: coefficients, eps } }
    }

    pub fn degree(&self) -> Option<u32> {
        match self {
            TestFunction::Polynomial { degree, .. } => Some(*degree),
            TestFunction::Named { function: NamedFunction::ShiftedSquare { terms, .. }, .. } => {
                Some(2 * poly_degree(terms))
            }
            _ => None,
        }
    }

    /// Multiply every coefficient by `s` (the function becomes `s·f`).
    pub fn scaled(&self, s: f64) -> Result<TestFunction> {
        match self {
            TestFunction::Polynomial { nvars, degree, seed, coefficients } => Ok(TestFunction::Polynomial {
                nvars: *nvars,
                degree: *degree,
                seed: *seed,
                coefficients: coefficients.iter().map(|t| Term { exponents: t.exponents.clone(), coeff: s * t.coeff }).collect(),
            }),
            TestFunction::TrigPolynomial { nvars, degree, seed, coefficients } => Ok(TestFunction::TrigPolynomial {
                nvars: *nvars,
                degree: *degree,
                seed: *seed,
                coefficients: coefficients
                    .iter()
                    .map(|t| TrigTerm { frequency: t.frequency.clone(), cos: s * t.cos, sin: s * t.sin })
                    .collect(),
            }),
            TestFunction::Named { .. } => Err(Error::Unsupported("scaling a named function".into())),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Polynomial { coefficients, .. } => eval_poly(coefficients, x),
            TestFunction::TrigPolynomial { coefficients, .. } => coefficients
                .iter()
                .map(|t| {
                    let phase: f64 = t.frequency.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
                    t.cos * phase.cos() + t.sin * phase.sin()
                })
                .sum(),
            TestFunction::Named { function, .. } => match function {
                NamedFunction::GaussianBump { center, width, amplitude, offset } => {
                    let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                    offset + amplitude * (-r2 / (2.0 * width * width)).exp()
                }
                NamedFunction::ExpPolynomial { terms } => eval_poly(terms, x).exp(),
                NamedFunction::ShiftedSquare { terms, eps } => {
                    let p = eval_poly(terms, x);
                    p * p + eps
                }
            },
        }
    }

    /// Jet of order `order` at `x` inside `space`; coefficient α equals `∂^α f(x)/α!`.
    pub fn lift_in(&self, space: &Arc<JetSpace>, x: &Arc<[f64]>, order: usize) -> Result<Jet> {
        if x.len() != self.nvars() || space.nvars() != self.nvars() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, function has {}",
                x.len(),
                self.nvars()
            )));
        }
        Ok(match self {
            TestFunction::Polynomial { coefficients, .. } => lift_poly(coefficients, space, x, order),
            TestFunction::TrigPolynomial { coefficients, .. } => {
                let coords: Vec<Jet> = (0..x.len()).map(|v| Jet::coordinate(space, x, order, v)).collect();
                let mut acc = Jet::zeros(space, x, order);
                for t in coefficients {
                    let mut phase = Jet::zeros(space, x, order);
                    for (k, c) in t.frequency.iter().zip(&coords) {
                        if *k != 0 {
                            phase.axpy(*k as f64, c);
                        }
                    }
                    acc.axpy(t.cos, &phase.cos());
                    acc.axpy(t.sin, &phase.sin());
                }
                acc
            }
            TestFunction::Named { function, .. } => match function {
                NamedFunction::GaussianBump { center, width, amplitude, offset } => {
                    let mut q = Jet::zeros(space, x, order);
                    for (v, c) in center.iter().enumerate() {
                        let mut d = Jet::coordinate(space, x, order, v);
                        d.axpy(-c, &Jet::constant(space, x, order, 1.0));
                        q.axpy(-1.0 / (2.0 * width * width), &(&d * &d));
                    }
                    let mut out = q.exp().scale(*amplitude);
                    out.axpy(*offset, &Jet::constant(space, x, order, 1.0));
                    out
                }
                NamedFunction::ExpPolynomial { terms } => lift_poly(terms, space, x, order).exp(),
                NamedFunction::ShiftedSquare { terms, eps } => {
                    let p = lift_poly(terms, space, x, order);
                    let mut out = &p * &p;
                    out.axpy(*eps, &Jet::constant(space, x, order, 1.0));
                    out
                }
            },
        })
    }

    /// Short human-readable name used in report rows.
    pub fn label(&self) -> String {
        match self {
            TestFunction::Polynomial { degree, seed: Some(s), .. } => format!("poly(deg={degree},seed={s})"),
            TestFunction::Polynomial { coefficients, .. } if coefficients.len() == 1 => {
                let t = &coefficients[0];
                let mono: Vec<String> = t
                    .exponents
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| **e > 0)
                    .map(|(i, e)| if *e == 1 { format!("x{i}") } else { format!("x{i}^{e}") })
                    .collect();
                if mono.is_empty() {
                    format!("{}", t.coeff)
                } else if t.coeff == 1.0 {
                    mono.join("*")
                } else {
                    format!("{}*{}", t.coeff, mono.join("*"))
                }
            }
            TestFunction::Polynomial { degree, coefficients, .. } => format!("poly(deg={degree},terms={})", coefficients.len()),
            TestFunction::TrigPolynomial { degree, seed, .. } => match seed {
                Some(s) => format!("trig(deg={degree},seed={s})"),
                None => format!("trig(deg={degree})"),
            },
            TestFunction::Named { function, .. } => match function {
                NamedFunction::GaussianBump { width, offset, .. } => format!("bump(width={width},offset={offset})"),
                NamedFunction::ExpPolynomial { terms } => format!("exp_poly(terms={})", terms.len()),
                NamedFunction::ShiftedSquare { eps, .. } => format!("shifted_square(eps={eps})"),
            },
        }
    }

    /// Jet of order `order` at `x` in the shared space of that order.
    pub fn lift(&self, x: &[f64], order: usize) -> Result<Jet> {
        let space = JetSpace::get(self.nvars(), order);
        self.lift_in(&space, &Arc::from(x.to_vec()), order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_origin() {
        let f = TestFunction::monomial(&[2, 0, 0]);
        let j = f.lift(&[0.0, 0.0, 0.0], 3).unwrap();
        for (i, c) in j.coeffs().iter().enumerate() {
            let e = j.space().exponents(i);
            let expect = if e == [2, 0, 0] { 1.0 } else { 0.0 };
            assert_eq!(*c, expect);
        }
    }

    #[test]
    fn constant_only_zero_index() {
        let j = TestFunction::constant(3, 2.5).lift(&[0.3, -0.2, 1.0], 4).unwrap();
        assert_eq!(j.value(), 2.5);
        assert!(j.coeffs()[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn sine_trig_lift() {
        let f = TestFunction::TrigPolynomial {
            nvars: 1,
            degree: 1,
            seed: None,
            coefficients: vec![TrigTerm { frequency: vec![1], cos: 0.0, sin: 1.0 }],
        };
        let j = f.lift(&[0.0], 3).unwrap();
        let expect = [0.0, 1.0, 0.0, -1.0 / 6.0];
        for (p, e) in expect.iter().enumerate() {
            assert!((j.coeff(&[p as u8]) - e).abs() < 1e-15);
        }
    }

    #[test]
    fn polynomial_lift_matches_jet_products() {
        let f = TestFunction::random_polynomial(3, 4, 11);
        let x = [0.4, -0.7, 0.2];
        let j = f.lift(&x, 4).unwrap();
        assert!((j.value() - f.eval(&x)).abs() < 1e-13);
        let TestFunction::Polynomial { coefficients, .. } = &f else { unreachable!() };
        let space = JetSpace::get(3, 4);
        let base: Arc<[f64]> = Arc::from(x.to_vec());
        let mut acc = Jet::zeros(&space, &base, 4);
        for t in coefficients {
            let mut m = Jet::constant(&space, &base, 4, t.coeff);
            for (v, &e) in t.exponents.iter().enumerate() {
                for _ in 0..e {
                    m = &m * &Jet::coordinate(&space, &base, 4, v);
                }
            }
            acc.axpy(1.0, &m);
        }
        for (a, b) in acc.coeffs().iter().zip(j.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn named_functions_match_eval() {
        let x = [0.1, 0.2, -0.3];
        let fs = [
            TestFunction::gaussian_bump(vec![0.0, 0.5, 0.0], 0.7, 2.0, 1e-3),
            TestFunction::random_shifted_square(3, 2, 1e-3, 5),
            TestFunction::Named {
                nvars: 3,
                function: NamedFunction::ExpPolynomial {
                    terms: vec![Term { exponents: vec![1, 1, 0], coeff: -0.5 }],
                },
            },
        ];
        for f in &fs {
            let j = f.lift(&x, 2).unwrap();
            assert!((j.value() - f.eval(&x)).abs() < 1e-14);
            let h = 1e-6;
            let mut xp = x;
            xp[1] += h;
            let mut xm = x;
            xm[1] -= h;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
            assert!((j.coeff(&[0, 1, 0]) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn serde_roundtrip() {
        let f = TestFunction::random_polynomial(2, 2, 3);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"kind\":\"polynomial\""));
        let g: TestFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }
}
