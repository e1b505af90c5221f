//! Finite-difference heat flow on a truncated Heisenberg box.
//!
//! In exponential coordinates `A₁ = ∂x − (y/2)∂z`, `A₂ = ∂y + (x/2)∂z`, so
//!
//! `L = ∂xx + ∂yy + ¼(x² + y²)∂zz − y∂xz + x∂yz`.
//!
//! Pure second derivatives use the compact stencil `D₊D₋`, cross terms the
//! product of centred first differences. With `A_i^h` the centred
//! discretization of `A_i` (antisymmetric), the grid operator equals
//! `−Σ(A_i^h)ᵀA_i^h` plus `(D₊D₋ − D₀²)` terms that are themselves negative
//! semidefinite. So `L_h` is symmetric and nonpositive and every implicit
//! step is an SPD solve, done here with Jacobi-preconditioned CG.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EstimateSettings, Method, SemigroupEstimate};
use crate::jet::{NamedFunction, TestFunction};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    ImplicitEuler,
    /// Crank-Nicolson, started with four implicit-Euler quarter steps to damp rough data.
    CrankNicolson,
}

impl TimeScheme {
    fn order(self) -> i32 {
        match self {
            TimeScheme::ImplicitEuler => 1,
            TimeScheme::CrankNicolson => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSettings {
    /// The box is `[−half_width, half_width]³`.
    pub half_width: f64,
    pub h: f64,
    pub dt: f64,
    pub scheme: TimeScheme,
    /// Relative residual target for each linear solve.
    pub tol: f64,
    /// Maximum boundary loss as a fraction of the initial mass.
    pub flux_limit: f64,
    /// Also run with step `2·dt` and use the difference as the error estimate.
    pub estimate_error: bool,
}

impl Default for PdeSettings {
    fn default() -> Self {
        PdeSettings {
            half_width: 4.0,
            h: 0.2,
            dt: 0.02,
            scheme: TimeScheme::CrankNicolson,
            tol: 1e-11,
            flux_limit: 1e-3,
            estimate_error: true,
        }
    }
}

/// Uniform grid with `n` points per axis, boundary included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergGrid {
    pub half_width: f64,
    pub h: f64,
    pub n: usize,
}

impl HeisenbergGrid {
    pub fn new(half_width: f64, h: f64) -> Result<HeisenbergGrid> {
        if !(half_width > 0.0 && h > 0.0 && h < half_width) {
            return Err(Error::InvalidArgument(format!("bad grid: half width {half_width}, spacing {h}")));
        }
        let cells = 2.0 * half_width / h;
        let n = cells.round() as usize + 1;
        if (cells - cells.round()).abs() > 1e-9 * cells {
            return Err(Error::InvalidArgument("spacing must divide the box width".into()));
        }
        if n < 5 {
            return Err(Error::InvalidArgument("grid needs at least 5 points per axis".into()));
        }
        Ok(HeisenbergGrid { half_width, h, n })
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Grid indices of `x` if it is a grid node.
    pub fn node_of(&self, x: &[f64]) -> Option<(usize, usize, usize)> {
        let mut idx = [0usize; 3];
        for (a, v) in x.iter().enumerate().take(3) {
            let s = (v + self.half_width) / self.h;
            let r = s.round();
            if (s - r).abs() > 1e-9 || r < 0.0 || r as usize >= self.n {
                return None;
            }
            idx[a] = r as usize;
        }
        Some((idx[0], idx[1], idx[2]))
    }

    pub fn is_interior(&self, i: usize, j: usize, k: usize) -> bool {
        let top = self.n - 1;
        i > 0 && j > 0 && k > 0 && i < top && j < top && k < top
    }

    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }
}

/// Off-centre stencil entries `(di, dj, dk, weight)` of `L_h` at `(x, y)` plus the centre weight.
fn stencil(grid: &HeisenbergGrid, x: f64, y: f64) -> (f64, [(isize, isize, isize, f64); 14]) {
    let h2 = grid.h * grid.h;
    let c = 0.25 * (x * x + y * y);
    let q = 1.0 / (4.0 * h2);
    let centre = -(2.0 + 2.0 + 2.0 * c) / h2;
    let entries = [
        (1, 0, 0, 1.0 / h2),
        (-1, 0, 0, 1.0 / h2),
        (0, 1, 0, 1.0 / h2),
        (0, -1, 0, 1.0 / h2),
        (0, 0, 1, c / h2),
        (0, 0, -1, c / h2),
        // −y ∂x∂z
        (1, 0, 1, -y * q),
        (1, 0, -1, y * q),
        (-1, 0, 1, y * q),
        (-1, 0, -1, -y * q),
        // x ∂y∂z
        (0, 1, 1, x * q),
        (0, 1, -1, -x * q),
        (0, -1, 1, -x * q),
        (0, -1, -1, x * q),
    ];
    (centre, entries)
}

/// `L_h` restricted to interior unknowns, compressed-row.
struct Operator {
    rowptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    diag: Vec<f64>,
    /// Full-grid index of each unknown.
    nodes: Vec<usize>,
}

impl Operator {
    fn new(grid: &HeisenbergGrid) -> Operator {
        let n = grid.n;
        let m = n - 2;
        let unknown = |i: usize, j: usize, k: usize| ((i - 1) * m + (j - 1)) * m + (k - 1);
        let mut op = Operator { rowptr: vec![0], col: Vec::new(), val: Vec::new(), diag: Vec::new(), nodes: Vec::new() };
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for k in 1..n - 1 {
                    let (centre, entries) = stencil(grid, grid.coord(i), grid.coord(j));
                    op.col.push(unknown(i, j, k));
                    op.val.push(centre);
                    for (di, dj, dk, w) in entries {
                        let (a, b, c) = ((i as isize + di) as usize, (j as isize + dj) as usize, (k as isize + dk) as usize);
                        if w != 0.0 && grid.is_interior(a, b, c) {
                            op.col.push(unknown(a, b, c));
                            op.val.push(w);
                        }
                    }
                    op.diag.push(centre);
                    op.rowptr.push(op.col.len());
                    op.nodes.push(grid.index(i, j, k));
                }
            }
        }
        op
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.rowptr[r]..self.rowptr[r + 1] {
                s += self.val[p] * u[self.col[p]];
            }
            *o = s;
        }
    }

    /// Solves `(I − s·L_h) u = b` by preconditioned CG, starting from `u`.
    fn solve_shifted(&self, s: f64, b: &[f64], u: &mut [f64], tol: f64) -> Result<usize> {
        let n = self.len();
        let mut lu = vec![0.0; n];
        let apply = |v: &[f64], out: &mut [f64], lv: &mut [f64]| {
            self.apply(v, lv);
            for i in 0..n {
                out[i] = v[i] - s * lv[i];
            }
        };
        let inv_diag: Vec<f64> = self.diag.iter().map(|d| 1.0 / (1.0 - s * d)).collect();
        let mut r = vec![0.0; n];
        apply(u, &mut r, &mut lu);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        for it in 0..10_000 {
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= tol * bnorm {
                return Ok(it);
            }
            apply(&p, &mut ap, &mut lu);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::Numerical("implicit step matrix lost positive definiteness".into()));
            }
            let alpha = rz / pap;
            for i in 0..n {
                u[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::Numerical("conjugate gradients did not converge".into()))
    }
}

/// `P_t f` sampled on the whole grid (boundary nodes are zero apart from `offset`).
#[derive(Clone, Debug)]
pub struct HeatField {
    pub grid: HeisenbergGrid,
    pub t: f64,
    /// Constant part of the initial data, carried exactly because `P_t 1 = 1`.
    pub offset: f64,
    values: Vec<f64>,
    coarse: Option<Vec<f64>>,
    order: i32,
    pub initial_mass: f64,
    pub mass: f64,
    /// Mass of the non-constant part lost through the boundary so far, plus what the box cut off initially.
    pub flux: f64,
}

impl HeatField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `P_t f` at a grid node.
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.offset + self.values[self.grid.index(i, j, k)]
    }

    fn raw(&self, i: isize, j: isize, k: isize) -> f64 {
        let n = self.grid.n as isize;
        if i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n {
            return 0.0;
        }
        self.values[self.grid.index(i as usize, j as usize, k as usize)]
    }

    /// Trilinear interpolation of `P_t f`; zero (plus offset) outside the box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        self.offset + self.interpolate_raw(&self.values, x)
    }

    fn interpolate_raw(&self, values: &[f64], x: &[f64]) -> f64 {
        let g = &self.grid;
        let mut base = [0isize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let s = (x[a] + g.half_width) / g.h;
            if !(0.0..=(g.n - 1) as f64).contains(&s) {
                return 0.0;
            }
            let f = s.floor().min((g.n - 2) as f64);
            base[a] = f as isize;
            frac[a] = s - f;
        }
        let mut out = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let up = (corner >> a) & 1 == 1;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx[a] = (base[a] + up as isize) as usize;
            }
            if w != 0.0 {
                out += w * values[g.index(idx[0], idx[1], idx[2])];
            }
        }
        out
    }

    /// Time-discretization error estimate at `x` from the `2·dt` companion run.
    pub fn error_at(&self, x: &[f64]) -> f64 {
        match &self.coarse {
            Some(c) => (self.interpolate_raw(&self.values, x) - self.interpolate_raw(c, x)).abs() / (2f64.powi(self.order) - 1.0),
            None => 0.0,
        }
    }

    /// `(A₁u, A₂u, ∂z u)` at an interior node of `g(u)` for a pointwise map `g`.
    pub fn frame_derivatives_of(&self, g: impl Fn(f64) -> f64, i: usize, j: usize, k: usize) -> [f64; 3] {
        let (x, y) = (self.grid.coord(i), self.grid.coord(j));
        let h = self.grid.h;
        let v = |di: isize, dj: isize, dk: isize| g(self.offset + self.raw(i as isize + di, j as isize + dj, k as isize + dk));
        let dx = (v(1, 0, 0) - v(-1, 0, 0)) / (2.0 * h);
        let dy = (v(0, 1, 0) - v(0, -1, 0)) / (2.0 * h);
        let dz = (v(0, 0, 1) - v(0, 0, -1)) / (2.0 * h);
        [dx - 0.5 * y * dz, dy + 0.5 * x * dz, dz]
    }

    pub fn frame_derivatives(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        self.frame_derivatives_of(|u| u, i, j, k)
    }

    /// `Γ^h(P_t f)` at a node.
    pub fn gamma_h(&self, i: usize, j: usize, k: usize) -> f64 {
        let d = self.frame_derivatives(i, j, k);
        d[0] * d[0] + d[1] * d[1]
    }

    /// `Γ^v(P_t f)` at a node.
    pub fn gamma_v(&self, i: usize, j: usize, k: usize) -> f64 {
        let d = self.frame_derivatives(i, j, k);
        d[2] * d[2]
    }

    /// `L_h g(u)` at an interior node, with the same stencil as the solver.
    pub fn sublaplacian_of(&self, g: impl Fn(f64) -> f64, i: usize, j: usize, k: usize) -> f64 {
        let (centre, entries) = stencil(&self.grid, self.grid.coord(i), self.grid.coord(j));
        let v = |di: isize, dj: isize, dk: isize| g(self.offset + self.raw(i as isize + di, j as isize + dj, k as isize + dk));
        let mut s = centre * v(0, 0, 0);
        for (di, dj, dk, w) in entries {
            s += w * v(di, dj, dk);
        }
        s
    }

    /// `L P_t f = P_t L f` at a node.
    pub fn sublaplacian(&self, i: usize, j: usize, k: usize) -> f64 {
        self.sublaplacian_of(|u| u, i, j, k)
    }

    /// `‖Γ^h(P_t f)‖_{L¹}` over the box by the midpoint rule on interior nodes.
    pub fn l1_gamma_h(&self) -> f64 {
        let n = self.grid.n;
        let mut s = 0.0;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for k in 1..n - 1 {
                    s += self.gamma_h(i, j, k);
                }
            }
        }
        s * self.grid.cell_volume()
    }

    /// Writes `x,y,z,u` rows for every grid node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "z", "u"])?;
        let n = self.grid.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = self.grid.point(i, j, k);
                    w.write_record([p[0], p[1], p[2], self.at(i, j, k)].iter().map(|v| format!("{v:.17e}")))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn split_offset(f: &TestFunction) -> Result<(TestFunction, f64)> {
    if f.nvars() != 3 {
        return Err(Error::Unsupported("the PDE solver is implemented for the Heisenberg group only".into()));
    }
    Ok(match f {
        TestFunction::Named { nvars, function: NamedFunction::GaussianBump { center, width, amplitude, offset } } => (
            TestFunction::Named {
                nvars: *nvars,
                function: NamedFunction::GaussianBump { center: center.clone(), width: *width, amplitude: *amplitude, offset: 0.0 },
            },
            *offset,
        ),
        other => (other.clone(), 0.0),
    })
}

fn run(op: &Operator, grid: &HeisenbergGrid, u0: &[f64], settings: &PdeSettings, dt: f64, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut u = u0.to_vec();
    let mut rhs = vec![0.0; u.len()];
    let mut lu = vec![0.0; u.len()];
    let mut now = 0.0;
    let mut first = true;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - now;
        let steps = if span > 0.0 { (span / dt - 1e-9).ceil().max(1.0) as usize } else { 0 };
        for _ in 0..steps {
            let tau = span / steps as f64;
            match settings.scheme {
                TimeScheme::ImplicitEuler => {
                    rhs.copy_from_slice(&u);
                    op.solve_shifted(0.5 * tau, &rhs, &mut u, settings.tol)?;
                }
                TimeScheme::CrankNicolson if first => {
                    for _ in 0..4 {
                        rhs.copy_from_slice(&u);
                        op.solve_shifted(0.125 * tau, &rhs, &mut u, settings.tol)?;
                    }
                }
                TimeScheme::CrankNicolson => {
                    op.apply(&u, &mut lu);
                    for i in 0..u.len() {
                        rhs[i] = u[i] + 0.25 * tau * lu[i];
                    }
                    op.solve_shifted(0.25 * tau, &rhs, &mut u, settings.tol)?;
                }
            }
            first = false;
        }
        now = target;
        let mut full = vec![0.0; grid.n * grid.n * grid.n];
        for (v, &node) in u.iter().zip(&op.nodes) {
            full[node] = *v;
        }
        out.push(full);
    }
    Ok(out)
}

/// Evolves `f` under `∂_t u = ½Lu` and returns the fields at the requested times (ascending, ≥ 0).
pub fn pde_evolve(f: &TestFunction, settings: &PdeSettings, times: &[f64]) -> Result<Vec<HeatField>> {
    let (g, offset) = split_offset(f)?;
    pde_evolve_with(&|p: &[f64]| g.eval(p), offset, settings, times)
}

/// Evolves `offset + g`, where `g` should decay towards the box boundary.
pub fn pde_evolve_with(g: &(dyn Fn(&[f64]) -> f64 + Sync), offset: f64, settings: &PdeSettings, times: &[f64]) -> Result<Vec<HeatField>> {
    if !(settings.dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("times must be finite, non-negative and ascending".into()));
    }
    let grid = HeisenbergGrid::new(settings.half_width, settings.h)?;
    let op = Operator::new(&grid);
    let vol = grid.cell_volume();
    let n = grid.n;
    let u0: Vec<f64> = op
        .nodes
        .iter()
        .map(|&node| {
            let (i, j, k) = (node / (n * n), (node / n) % n, node % n);
            g(&grid.point(i, j, k))
        })
        .collect();
    let initial_mass: f64 = u0.iter().sum::<f64>() * vol;
    let mut cut = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if !grid.is_interior(i, j, k) {
                    cut += g(&grid.point(i, j, k)).abs();
                }
            }
        }
    }
    cut *= vol;
    let fine = run(&op, &grid, &u0, settings, settings.dt, times)?;
    let coarse = if settings.estimate_error { Some(run(&op, &grid, &u0, settings, 2.0 * settings.dt, times)?) } else { None };
    let scale = initial_mass.abs().max(u0.iter().fold(0.0f64, |a, b| a.max(b.abs())) * vol);
    let mut out = Vec::with_capacity(times.len());
    for (idx, (values, &t)) in fine.into_iter().zip(times).enumerate() {
        let mass = values.iter().sum::<f64>() * vol;
        let flux = (initial_mass - mass).abs() + cut;
        if scale > 0.0 && flux > settings.flux_limit * scale {
            return Err(Error::BoundaryFlux { flux: flux / scale, limit: settings.flux_limit });
        }
        out.push(HeatField {
            grid,
            t,
            offset,
            values,
            coarse: coarse.as_ref().map(|c| c[idx].clone()),
            order: settings.scheme.order(),
            initial_mass,
            mass,
            flux,
        });
    }
    Ok(out)
}

/// `P_t f(x)` from the PDE solver.
pub fn pde_semigroup(f: &TestFunction, x: &[f64], t: f64, settings: &PdeSettings) -> Result<SemigroupEstimate> {
    let field = pde_evolve(f, settings, &[t])?.remove(0);
    Ok(SemigroupEstimate {
        model: "heisenberg".into(),
        f: f.label(),
        x: x.to_vec(),
        t,
        method: Method::Pde,
        value: field.interpolate(x),
        error: field.error_at(x),
        seed: None,
        settings: EstimateSettings::Pde(*settings),
    })
}

/// `p_t(x, y)` with an error bar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
    pub value: f64,
    /// Time-step error plus the size of the bump-width correction.
    pub error: f64,
    pub width: f64,
}

pub(crate) fn normalized_bump(y: &[f64], width: f64, grid: &HeisenbergGrid) -> TestFunction {
    let raw = TestFunction::gaussian_bump(y.to_vec(), width, 1.0, 0.0);
    let n = grid.n;
    let mut mass = 0.0;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            for k in 1..n - 1 {
                mass += raw.eval(&grid.point(i, j, k));
            }
        }
    }
    mass *= grid.cell_volume();
    TestFunction::gaussian_bump(y.to_vec(), width, 1.0 / mass, 0.0)
}

/// `p_t(x, y)` for each time, from normalized bumps of width `width` and `√2·width` centred at `y`.
pub fn heat_kernel_series(x: &[f64], y: &[f64], times: &[f64], settings: &PdeSettings, width: f64) -> Result<Vec<KernelEstimate>> {
    let grid = HeisenbergGrid::new(settings.half_width, settings.h)?;
    let narrow = pde_evolve(&normalized_bump(y, width, &grid), settings, times)?;
    let quick = PdeSettings { estimate_error: false, ..*settings };
    let wide_w = width * std::f64::consts::SQRT_2;
    let wide = pde_evolve(&normalized_bump(y, wide_w, &grid), &quick, times)?;
    Ok(narrow
        .iter()
        .zip(&wide)
        .map(|(a, b)| {
            // The smoothing bias is O(width²); doubling width² and extrapolating removes its leading term.
            let (narrow, wide) = (a.interpolate(x), b.interpolate(x));
            KernelEstimate {
                x: x.to_vec(),
                y: y.to_vec(),
                t: a.t,
                value: 2.0 * narrow - wide,
                error: 2.0 * a.error_at(x) + (narrow - wide).abs(),
                width,
            }
        })
        .collect())
}

/// `p_t(x, y)` on the Heisenberg group.
pub fn heat_kernel(x: &[f64], y: &[f64], t: f64, settings: &PdeSettings, width: f64) -> Result<KernelEstimate> {
    Ok(heat_kernel_series(x, y, &[t], settings, width)?.remove(0))
}
