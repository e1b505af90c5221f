//! Monte Carlo estimation of `P_t f` by group-exponential stepping.
//!
//! Each step of size `h = t/steps` right-multiplies the current point by
//! `exp(√h Σ ξ_a A_a)` with `ξ_a` standard normal, which has generator
//! `½ Σ A_a²` as `h → 0`. Paths are processed in fixed batches; batch `b`
//! draws from the ChaCha8 stream `(seed, b)`, so results do not depend on
//! how many worker threads are running.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EstimateSettings, GradientEstimate, Method, Part, SemigroupEstimate};
use crate::jet::{chart_field_jets, TestFunction};
use crate::model_zoo::LieModel;
use crate::{Error, Result};

fn default_batch() -> usize {
    1024
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    /// Paths per RNG stream. Part of the determinism contract: changing it changes the estimate.
    #[serde(default = "default_batch")]
    pub batch: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings { paths: 10_000, steps: 100, seed: 0, batch: default_batch() }
    }
}

impl McSettings {
    pub fn new(paths: usize, steps: usize, seed: u64) -> McSettings {
        McSettings { paths, steps, seed, batch: default_batch() }
    }

    fn check(&self) -> Result<()> {
        if self.paths == 0 || self.steps == 0 || self.batch == 0 {
            return Err(Error::InvalidArgument("paths, steps and batch must be positive".into()));
        }
        Ok(())
    }
}

/// Streaming mean and covariance of a vector-valued sample (Welford, merged with Chan's rule).
#[derive(Clone, Debug, PartialEq)]
pub struct PathStatistics {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl PathStatistics {
    pub fn new(outputs: usize) -> PathStatistics {
        PathStatistics { count: 0, mean: vec![0.0; outputs], m2: vec![0.0; outputs * outputs] }
    }

    pub fn outputs(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        let k = self.mean.len();
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / n;
        }
        for i in 0..k {
            for j in 0..k {
                self.m2[i * k + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    pub fn merge(&mut self, other: &PathStatistics) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let k = self.mean.len();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl * nb / n;
        }
        for i in 0..k {
            for j in 0..k {
                self.m2[i * k + j] += other.m2[i * k + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        self.count += other.count;
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Covariance of the sample means of outputs `i` and `j`.
    pub fn mean_covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        self.m2[i * self.mean.len() + j] / ((n - 1.0) * n)
    }

    pub fn std_error(&self, i: usize) -> f64 {
        self.mean_covariance(i, i).max(0.0).sqrt()
    }

    /// Standard error of `Σ g_i · mean_i` (delta method for smooth functions of the means).
    pub fn linear_error(&self, grad: &[(usize, f64)]) -> f64 {
        let mut v = 0.0;
        for &(i, gi) in grad {
            for &(j, gj) in grad {
                v += gi * gj * self.mean_covariance(i, j);
            }
        }
        v.max(0.0).sqrt()
    }
}

/// Simulates paths from every start with shared increments and reduces `observe(ends)`.
pub(crate) fn simulate<F>(
    model: &LieModel,
    starts: &[Vec<f64>],
    t: f64,
    settings: &McSettings,
    outputs: usize,
    observe: F,
) -> Result<PathStatistics>
where
    F: Fn(&[Vec<f64>], &mut [f64]) + Sync,
{
    settings.check()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and ≥ 0, got {t}")));
    }
    let d = model.dim();
    if let Some(s) = starts.iter().find(|s| s.len() != d) {
        return Err(Error::InvalidArgument(format!("point has {} coordinates, model has {d}", s.len())));
    }
    let real = model.realization();
    let walkers: Vec<_> = starts.iter().map(|s| real.walker(s)).collect::<Result<_>>()?;
    let n = model.dim_h();
    let frame = model.orthonormal_frame();
    let sqrt_h = (t / settings.steps as f64).sqrt();
    let batches = settings.paths.div_ceil(settings.batch);
    let parts: Vec<PathStatistics> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(b as u64);
            let count = settings.batch.min(settings.paths - b * settings.batch);
            let mut stats = PathStatistics::new(outputs);
            let mut xi = vec![0.0; n];
            let mut v = vec![0.0; d];
            let mut buf = vec![0.0; outputs];
            let mut ends = starts.to_vec();
            for _ in 0..count {
                if t > 0.0 {
                    let mut ws = walkers.clone();
                    for _ in 0..settings.steps {
                        for x in xi.iter_mut() {
                            *x = rng.sample(StandardNormal);
                        }
                        for (i, vi) in v.iter_mut().enumerate() {
                            *vi = sqrt_h * (0..n).map(|a| frame[(i, a)] * xi[a]).sum::<f64>();
                        }
                        for w in ws.iter_mut() {
                            w.step(&v);
                        }
                    }
                    for (e, w) in ends.iter_mut().zip(&ws) {
                        *e = w.coords();
                    }
                }
                observe(&ends, &mut buf);
                stats.push(&buf);
            }
            stats
        })
        .collect();
    let mut total = PathStatistics::new(outputs);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

fn check_function(model: &LieModel, f: &TestFunction) -> Result<()> {
    if f.nvars() != model.dim() {
        return Err(Error::InvalidArgument(format!(
            "function has {} variables, model has dimension {}",
            f.nvars(),
            model.dim()
        )));
    }
    Ok(())
}

/// `P_t f(x)` with its standard error.
pub fn mc_semigroup(model: &LieModel, f: &TestFunction, x: &[f64], t: f64, settings: &McSettings) -> Result<SemigroupEstimate> {
    check_function(model, f)?;
    mc_expectation(model, &f.label(), x, t, settings, |y| f.eval(y))
}

/// `P_t g(x)` for an arbitrary observable `g`.
pub fn mc_expectation<G>(model: &LieModel, label: &str, x: &[f64], t: f64, settings: &McSettings, g: G) -> Result<SemigroupEstimate>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let stats = simulate(model, &[x.to_vec()], t, settings, 1, |ends, out| out[0] = g(&ends[0]))?;
    Ok(SemigroupEstimate {
        model: model.name().to_string(),
        f: label.to_string(),
        x: x.to_vec(),
        t,
        method: Method::Mc,
        value: stats.mean(0),
        error: stats.std_error(0),
        seed: Some(settings.seed),
        settings: EstimateSettings::Mc(*settings),
    })
}

/// Observable evaluated at the centre path's endpoint.
pub type Observable<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Paths from `x` and from `x·exp(±δF_a)` for every orthonormal frame field, with common increments.
#[derive(Clone, Debug)]
pub struct StencilRun {
    pub stats: PathStatistics,
    pub delta: f64,
    extras: usize,
    dim: usize,
}

impl StencilRun {
    /// `P_t f(x)` and its standard error.
    pub fn semigroup(&self) -> (f64, f64) {
        (self.stats.mean(0), self.stats.std_error(0))
    }

    /// Output index of the `i`-th extra observable.
    pub fn extra_index(&self, i: usize) -> usize {
        1 + i
    }

    pub fn extra(&self, i: usize) -> (f64, f64) {
        let k = self.extra_index(i);
        (self.stats.mean(k), self.stats.std_error(k))
    }

    /// Output index of the central difference along `F_a`.
    pub fn derivative_index(&self, a: usize) -> usize {
        1 + self.extras + a
    }

    pub fn derivative(&self, a: usize) -> (f64, f64) {
        let k = self.derivative_index(a);
        (self.stats.mean(k), self.stats.std_error(k))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Σ w_a (F_a P_t f)²` and an error bar that includes the `Σ w_a se_a²` squaring bias.
    pub fn gradient_squared(&self, weights: &[f64]) -> (f64, f64) {
        let mut value = 0.0;
        let mut bias = 0.0;
        let mut grad = Vec::new();
        for (a, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (m, se) = self.derivative(a);
            value += w * m * m;
            bias += w * se * se;
            grad.push((self.derivative_index(a), 2.0 * w * m));
        }
        (value, self.stats.linear_error(&grad) + bias)
    }
}

/// Weights selecting one part of the frame, with `ell` on the vertical directions for `Γ^h + ℓΓ^v`.
pub fn part_weights(model: &LieModel, h: f64, ell: f64) -> Vec<f64> {
    (0..model.dim()).map(|a| if a < model.dim_h() { h } else { ell }).collect()
}

/// Runs the common-random-number stencil for `f` plus extra centre observables.
pub fn mc_stencil(
    model: &LieModel,
    f: &TestFunction,
    x: &[f64],
    t: f64,
    settings: &McSettings,
    delta: f64,
    extras: &[Observable<'_>],
) -> Result<StencilRun> {
    check_function(model, f)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("stencil step must be positive".into()));
    }
    let d = model.dim();
    let real = model.realization();
    let frame = model.orthonormal_frame();
    let mut starts = vec![x.to_vec()];
    for a in 0..d {
        for sign in [1.0, -1.0] {
            let step: Vec<f64> = (0..d).map(|i| sign * delta * frame[(i, a)]).collect();
            starts.push(real.mul(x, &step)?);
        }
    }
    let ne = extras.len();
    let stats = simulate(model, &starts, t, settings, 1 + ne + d, |ends, out| {
        out[0] = f.eval(&ends[0]);
        for (i, g) in extras.iter().enumerate() {
            out[1 + i] = g(&ends[0]);
        }
        for a in 0..d {
            out[1 + ne + a] = (f.eval(&ends[1 + 2 * a]) - f.eval(&ends[2 + 2 * a])) / (2.0 * delta);
        }
    })?;
    Ok(StencilRun { stats, delta, extras: ne, dim: d })
}

/// `Γ^•(P_t f)(x)` from central differences with common random numbers.
pub fn mc_gradient(
    model: &LieModel,
    f: &TestFunction,
    x: &[f64],
    t: f64,
    part: Part,
    settings: &McSettings,
    delta: f64,
) -> Result<GradientEstimate> {
    let run = mc_stencil(model, f, x, t, settings, delta, &[])?;
    let weights = match part {
        Part::H => part_weights(model, 1.0, 0.0),
        Part::V => part_weights(model, 0.0, 1.0),
    };
    let (value, error) = run.gradient_squared(&weights);
    let components = (0..model.dim()).filter(|a| weights[*a] != 0.0).map(|a| run.derivative(a)).collect();
    Ok(GradientEstimate { value, error, components })
}

/// Orthonormal frame derivatives `F_a f(y)` for every frame field.
pub fn frame_gradient(model: &LieModel, f: &TestFunction, y: &[f64]) -> Result<Vec<f64>> {
    check_function(model, f)?;
    let d = model.dim();
    let fields = chart_field_jets(model, y, 0)?;
    let jet = f.lift(y, 1)?;
    let partials: Vec<f64> = (0..d).map(|k| jet.deriv(k).map(|j| j.value())).collect::<Result<_>>()?;
    let raw: Vec<f64> = fields
        .iter()
        .map(|field| field.iter().zip(&partials).map(|(c, p)| c.value() * p).sum())
        .collect();
    let frame = model.orthonormal_frame();
    Ok((0..d).map(|a| (0..d).map(|i| frame[(i, a)] * raw[i]).sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{build_engel, build_heisenberg, build_su2_pair};

    #[test]
    fn constant_is_preserved_exactly() {
        let m = build_su2_pair(1.0).unwrap();
        let one = TestFunction::constant(6, 1.0);
        let e = mc_semigroup(&m, &one, &[0.1, 0.2, 0.0, -0.3, 0.0, 0.4], 0.7, &McSettings::new(500, 20, 3)).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.error, 0.0);
    }

    #[test]
    fn zero_time_is_identity() {
        let m = build_su2_pair(1.0).unwrap();
        let f = TestFunction::random_polynomial(6, 3, 5);
        let x = [0.3, -0.1, 0.2, 0.5, 0.0, -0.2];
        let e = mc_semigroup(&m, &f, &x, 0.0, &McSettings::new(64, 5, 1)).unwrap();
        assert_eq!(e.value, f.eval(&x));
    }

    #[test]
    fn heisenberg_square_mean() {
        let m = build_heisenberg();
        let f = TestFunction::monomial(&[2, 0, 0]);
        let e = mc_semigroup(&m, &f, &[0.0; 3], 1.0, &McSettings::new(20_000, 50, 11)).unwrap();
        assert!((e.value - 1.0).abs() < 4.0 * e.error, "{e:?}");
    }

    #[test]
    fn seeds_are_reproducible() {
        let m = build_engel();
        let f = TestFunction::random_polynomial(4, 2, 8);
        let s = McSettings::new(3000, 10, 42);
        let a = mc_semigroup(&m, &f, &[0.0; 4], 0.5, &s).unwrap();
        let b = mc_semigroup(&m, &f, &[0.0; 4], 0.5, &s).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.error.to_bits(), b.error.to_bits());
    }

    #[test]
    fn linear_function_gradient() {
        let m = build_heisenberg();
        let f = TestFunction::coordinate(3, 0);
        let s = McSettings::new(2000, 20, 9);
        let gh = mc_gradient(&m, &f, &[0.2, 0.4, -0.1], 0.5, Part::H, &s, 1e-3).unwrap();
        assert!((gh.value - 1.0).abs() < 1e-9 + 3.0 * gh.error, "{gh:?}");
        let gv = mc_gradient(&m, &f, &[0.2, 0.4, -0.1], 0.5, Part::V, &s, 1e-3).unwrap();
        assert!(gv.value < 1e-12, "{gv:?}");
    }

    #[test]
    fn merged_statistics_match_single_pass() {
        let xs: Vec<[f64; 2]> = (0..50).map(|i| [i as f64 * 0.3, (i * i) as f64 * 0.01]).collect();
        let mut all = PathStatistics::new(2);
        xs.iter().for_each(|x| all.push(x));
        let mut a = PathStatistics::new(2);
        let mut b = PathStatistics::new(2);
        xs[..17].iter().for_each(|x| a.push(x));
        xs[17..].iter().for_each(|x| b.push(x));
        a.merge(&b);
        for i in 0..2 {
            assert!((a.mean(i) - all.mean(i)).abs() < 1e-12);
            for j in 0..2 {
                assert!((a.mean_covariance(i, j) - all.mean_covariance(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frame_gradient_heisenberg() {
        let m = build_heisenberg();
        // A_1 z = −y/2, A_2 z = x/2
        let g = frame_gradient(&m, &TestFunction::coordinate(3, 2), &[0.4, -0.6, 1.0]).unwrap();
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] - 0.2).abs() < 1e-15 && (g[2] - 1.0).abs() < 1e-15);
    }
}
