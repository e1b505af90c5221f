//! Structure constants and connections in the orthonormalized frame.
//!
//! Frame fields `F_0..F_{d-1}` are orthonormal for `g = h ⊕ v`; the first
//! `dim_h` span `H`. All tensors are stored flat with the upper index last.

use nalgebra::DMatrix;

#[derive(Clone, Debug)]
pub struct FrameAlgebra {
    dim_h: usize,
    d: usize,
    /// `C[(a*d + b)*d + c]` is the `F_c`-component of `[F_a, F_b]`.
    bracket: Vec<f64>,
    /// Levi-Civita: `∇_{F_a} F_b = Σ_c lc[(a*d + b)*d + c] F_c`.
    lc: Vec<f64>,
    /// Adapted connection that preserves the splitting.
    adapted: Vec<f64>,
}

impl FrameAlgebra {
    pub(crate) fn from_raw(dim_h: usize, dim_v: usize, c: &[f64], m: &DMatrix<f64>, minv: &DMatrix<f64>) -> FrameAlgebra {
        let d = dim_h + dim_v;
        let raw = |k: usize, i: usize, j: usize| c[(i * d + j) * d + k];
        let mut bracket = vec![0.0; d * d * d];
        for a in 0..d {
            for b in 0..d {
                // [F_a, F_b] in the E basis, then re-expressed in F.
                let mut e = vec![0.0; d];
                for i in 0..d {
                    let mia = m[(i, a)];
                    if mia == 0.0 {
                        continue;
                    }
                    for j in 0..d {
                        let mjb = m[(j, b)];
                        if mjb == 0.0 {
                            continue;
                        }
                        for (k, ek) in e.iter_mut().enumerate() {
                            *ek += mia * mjb * raw(k, i, j);
                        }
                    }
                }
                for cc in 0..d {
                    bracket[(a * d + b) * d + cc] = (0..d).map(|k| minv[(cc, k)] * e[k]).sum();
                }
            }
        }
        let mut alg = FrameAlgebra { dim_h, d, bracket, lc: vec![0.0; d * d * d], adapted: vec![0.0; d * d * d] };
        for a in 0..d {
            for b in 0..d {
                for cc in 0..d {
                    alg.lc[(a * d + b) * d + cc] =
                        0.5 * (alg.c(cc, a, b) - alg.c(a, b, cc) + alg.c(b, cc, a));
                }
            }
        }
        for a in 0..d {
            for b in 0..d {
                for cc in 0..d {
                    let (ha, hb, hc) = (alg.is_h(a), alg.is_h(b), alg.is_h(cc));
                    let v = match (ha, hb) {
                        (true, true) | (false, false) if ha == hc => alg.lc(cc, a, b),
                        (false, true) if hc => alg.c(cc, a, b),
                        (true, false) if !hc => alg.c(cc, a, b),
                        _ => 0.0,
                    };
                    alg.adapted[(a * d + b) * d + cc] = v;
                }
            }
        }
        alg
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn is_h(&self, a: usize) -> bool {
        a < self.dim_h
    }

    /// `F_c`-component of `[F_a, F_b]`.
    pub fn c(&self, c: usize, a: usize, b: usize) -> f64 {
        self.bracket[(a * self.d + b) * self.d + c]
    }

    /// `F_c`-component of the Levi-Civita derivative `∇_{F_a} F_b`.
    pub fn lc(&self, c: usize, a: usize, b: usize) -> f64 {
        self.lc[(a * self.d + b) * self.d + c]
    }

    /// `F_c`-component of `∇̊_{F_a} F_b`, the connection that keeps `H` and `V` parallel,
    /// agrees with Levi-Civita inside each bundle and with the bracket across them.
    pub fn adapted(&self, c: usize, a: usize, b: usize) -> f64 {
        self.adapted[(a * self.d + b) * self.d + c]
    }

    pub fn brackets(&self) -> &[f64] {
        &self.bracket
    }

    /// Drift `Σ_a ∇̊_{F_a} F_a` over the horizontal frame; zero for unimodular splittings.
    pub fn horizontal_drift(&self) -> Vec<f64> {
        (0..self.d).map(|c| (0..self.dim_h).map(|a| self.adapted(c, a, a)).sum()).collect()
    }

    /// Largest `|[F_a,[F_b,F_c]] + cyclic|` component.
    pub fn jacobi_residual(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for cc in 0..d {
                    for e in 0..d {
                        let mut s = 0.0;
                        for m in 0..d {
                            s += self.c(m, b, cc) * self.c(e, a, m)
                                + self.c(m, cc, a) * self.c(e, b, m)
                                + self.c(m, a, b) * self.c(e, cc, m);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use crate::model_zoo::{build_heisenberg, build_su2_pair};

    #[test]
    fn levi_civita_is_metric_and_torsion_free() {
        for m in [build_heisenberg(), build_su2_pair(0.7).unwrap()] {
            let a = m.algebra();
            let d = a.dim();
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        // metric compatibility in an orthonormal frame: antisymmetry in (j, k)
                        assert!((a.lc(k, i, j) + a.lc(j, i, k)).abs() < 1e-12);
                        // torsion: ∇_i F_j − ∇_j F_i = [F_i, F_j]
                        assert!((a.lc(k, i, j) - a.lc(k, j, i) - a.c(k, i, j)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn adapted_connection_preserves_splitting() {
        let m = build_su2_pair(1.3).unwrap();
        let a = m.algebra();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    if a.is_h(j) != a.is_h(k) {
                        assert_eq!(a.adapted(k, i, j), 0.0);
                    }
                }
            }
        }
    }
}
