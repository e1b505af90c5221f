//! Left-invariant sub-Riemannian model spaces built from structure constants.
//!
//! A model is a Lie algebra with a frame `E_1..E_d`, the first `dim_h`
//! fields spanning the horizontal bundle and the rest the vertical bundle,
//! plus a block-diagonal metric on the frame. Points are exponential
//! coordinates of the first kind relative to that frame.

mod builders;
pub mod frame;
pub mod group;
mod validate;

pub use builders::{build_abelian, build_engel, build_free_nilpotent, build_heisenberg, build_su2_pair, shipped_models};
pub use frame::FrameAlgebra;
pub use group::Realization;
pub use validate::{validate, ValidationReport};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Curvature-dimension constants quoted for a model, `(n, ρ₁, ρ₂,₀, ρ₂,₁)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    pub n: usize,
    pub rho1: f64,
    pub rho20: f64,
    pub rho21: f64,
}

/// Serialized form of a model. `structure_constants[i][j][k]` is the
/// `E_k`-component of `[E_i, E_j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub name: String,
    pub dim_h: usize,
    pub dim_v: usize,
    pub structure_constants: Vec<Vec<Vec<f64>>>,
    pub frame_metric: Vec<Vec<f64>>,
    pub declared_constants: Option<DeclaredConstants>,
}

#[derive(Clone, Debug)]
pub struct LieModel {
    name: String,
    dim_h: usize,
    dim_v: usize,
    c: Vec<f64>,
    metric: DMatrix<f64>,
    declared: Option<DeclaredConstants>,
    /// Columns are the orthonormalized frame fields expressed in `E`.
    ortho: DMatrix<f64>,
    ortho_inv: DMatrix<f64>,
    algebra: FrameAlgebra,
    realization: Realization,
    id: String,
}

fn cholesky_inverse_transpose(block: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(block)
        .ok_or_else(|| Error::MalformedModel("metric block is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .try_inverse()
        .ok_or_else(|| Error::MalformedModel("singular metric block".into()))?;
    Ok(linv.transpose())
}

impl LieModel {
    /// Builds a model from flat structure constants `c[(i*d + j)*d + k] = c^k_{ij}`.
    pub fn new(
        name: impl Into<String>,
        dim_h: usize,
        dim_v: usize,
        c: Vec<f64>,
        metric: DMatrix<f64>,
        declared: Option<DeclaredConstants>,
    ) -> Result<LieModel> {
        let d = dim_h + dim_v;
        if dim_h == 0 {
            return Err(Error::MalformedModel("horizontal rank must be positive".into()));
        }
        if c.len() != d * d * d {
            return Err(Error::MalformedModel(format!("expected {} structure constants, got {}", d * d * d, c.len())));
        }
        if metric.nrows() != d || metric.ncols() != d {
            return Err(Error::MalformedModel(format!("frame metric must be {d}×{d}")));
        }
        if c.iter().chain(metric.iter()).any(|v| !v.is_finite()) {
            return Err(Error::MalformedModel("non-finite entries".into()));
        }
        for i in 0..d {
            for j in 0..d {
                if metric[(i, j)] != metric[(j, i)] {
                    return Err(Error::MalformedModel("frame metric is not symmetric".into()));
                }
                if (i < dim_h) != (j < dim_h) && metric[(i, j)] != 0.0 {
                    return Err(Error::MalformedModel("frame metric couples H and V".into()));
                }
            }
        }
        let mut ortho = DMatrix::zeros(d, d);
        let mh = cholesky_inverse_transpose(metric.view((0, 0), (dim_h, dim_h)).into_owned())?;
        ortho.view_mut((0, 0), (dim_h, dim_h)).copy_from(&mh);
        if dim_v > 0 {
            let mv = cholesky_inverse_transpose(metric.view((dim_h, dim_h), (dim_v, dim_v)).into_owned())?;
            ortho.view_mut((dim_h, dim_h), (dim_v, dim_v)).copy_from(&mv);
        }
        let ortho_inv = ortho
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::MalformedModel("degenerate frame".into()))?;
        let algebra = FrameAlgebra::from_raw(dim_h, dim_v, &c, &ortho, &ortho_inv);
        let name = name.into();
        let mut model = LieModel {
            name,
            dim_h,
            dim_v,
            c,
            metric,
            declared,
            ortho,
            ortho_inv,
            algebra,
            realization: Realization::None,
            id: String::new(),
        };
        model.realization = Realization::detect(&model);
        model.id = crate::util::sha256_hex(serde_json::to_string(&model.to_document())?.as_bytes());
        Ok(model)
    }

    pub(crate) fn with_realization(mut self, r: Realization) -> LieModel {
        self.realization = r;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    pub fn dim(&self) -> usize {
        self.dim_h + self.dim_v
    }

    /// Raw structure constant `c^k_{ij}` in the stored frame.
    pub fn c(&self, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dim();
        self.c[(i * d + j) * d + k]
    }

    pub fn raw_constants(&self) -> &[f64] {
        &self.c
    }

    pub fn frame_metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn declared_constants(&self) -> Option<DeclaredConstants> {
        self.declared
    }

    /// Orthonormalized frame: column `a` holds the `E`-components of field `F_a`.
    pub fn orthonormal_frame(&self) -> &DMatrix<f64> {
        &self.ortho
    }

    pub fn orthonormal_frame_inverse(&self) -> &DMatrix<f64> {
        &self.ortho_inv
    }

    /// Structure constants and connections in the orthonormal frame.
    pub fn algebra(&self) -> &FrameAlgebra {
        &self.algebra
    }

    pub fn realization(&self) -> &Realization {
        &self.realization
    }

    /// Content digest used as the model identity for caches and reports.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Same algebra with the vertical metric block multiplied by `s`.
    pub fn with_vertical_scale(&self, s: f64) -> Result<LieModel> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("vertical scale {s} must be positive")));
        }
        let mut metric = self.metric.clone();
        for i in self.dim_h..self.dim() {
            for j in self.dim_h..self.dim() {
                metric[(i, j)] *= s;
            }
        }
        let m = LieModel::new(self.name.clone(), self.dim_h, self.dim_v, self.c.clone(), metric, self.declared)?;
        Ok(m.with_realization(self.realization.clone()))
    }

    pub fn to_document(&self) -> ModelDocument {
        let d = self.dim();
        ModelDocument {
            name: self.name.clone(),
            dim_h: self.dim_h,
            dim_v: self.dim_v,
            structure_constants: (0..d)
                .map(|i| (0..d).map(|j| (0..d).map(|k| self.c(k, i, j)).collect()).collect())
                .collect(),
            frame_metric: (0..d).map(|i| (0..d).map(|j| self.metric[(i, j)]).collect()).collect(),
            declared_constants: self.declared,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<LieModel> {
        let d = doc.dim_h + doc.dim_v;
        let bad = || Error::MalformedModel("structure constant array has wrong shape".into());
        if doc.structure_constants.len() != d {
            return Err(bad());
        }
        let mut c = vec![0.0; d * d * d];
        for (i, row) in doc.structure_constants.iter().enumerate() {
            if row.len() != d {
                return Err(bad());
            }
            for (j, col) in row.iter().enumerate() {
                if col.len() != d {
                    return Err(bad());
                }
                for (k, v) in col.iter().enumerate() {
                    c[(i * d + j) * d + k] = *v;
                }
            }
        }
        if doc.frame_metric.len() != d || doc.frame_metric.iter().any(|r| r.len() != d) {
            return Err(Error::MalformedModel("frame metric has wrong shape".into()));
        }
        let metric = DMatrix::from_fn(d, d, |i, j| doc.frame_metric[i][j]);
        LieModel::new(doc.name.clone(), doc.dim_h, doc.dim_v, c, metric, doc.declared_constants)
    }
}

impl Serialize for LieModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_document().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LieModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ModelDocument::deserialize(d)?;
        LieModel::from_document(&doc).map_err(serde::de::Error::custom)
    }
}

/// Looks up a shipped model by name: `heisenberg`, `engel`, `free_nilpotent_<n>`, `su2_pair` or `su2_pair_<rho>`.
pub fn model_by_name(name: &str) -> Result<LieModel> {
    match name {
        "heisenberg" => Ok(build_heisenberg()),
        "engel" => Ok(build_engel()),
        "su2_pair" => build_su2_pair(1.0),
        _ => {
            if let Some(n) = name.strip_prefix("free_nilpotent_") {
                let n: usize = n.parse().map_err(|_| Error::InvalidArgument(format!("bad model name {name}")))?;
                build_free_nilpotent(n)
            } else if let Some(r) = name.strip_prefix("su2_pair_") {
                let r: f64 = r.parse().map_err(|_| Error::InvalidArgument(format!("bad model name {name}")))?;
                build_su2_pair(r)
            } else if let Some(n) = name.strip_prefix("abelian_") {
                let n: usize = n.parse().map_err(|_| Error::InvalidArgument(format!("bad model name {name}")))?;
                build_abelian(n, 0)
            } else {
                Err(Error::InvalidArgument(format!("unknown model {name}")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_roundtrip() {
        for m in shipped_models() {
            let s = serde_json::to_string(&m).unwrap();
            let back: LieModel = serde_json::from_str(&s).unwrap();
            assert_eq!(back.to_document(), m.to_document());
            assert_eq!(back.id(), m.id());
            assert_eq!(
                std::mem::discriminant(back.realization()),
                std::mem::discriminant(m.realization())
            );
        }
    }

    #[test]
    fn malformed_rejected() {
        let r = LieModel::new("bad", 2, 1, vec![0.0; 26], DMatrix::identity(3, 3), None);
        assert!(matches!(r, Err(Error::MalformedModel(_))));
        let mut g = DMatrix::identity(3, 3);
        g[(0, 2)] = 0.1;
        g[(2, 0)] = 0.1;
        let r = LieModel::new("bad", 2, 1, vec![0.0; 27], g, None);
        assert!(matches!(r, Err(Error::MalformedModel(_))));
        let r = LieModel::new("bad", 2, 1, vec![0.0; 27], -DMatrix::<f64>::identity(3, 3), None);
        assert!(matches!(r, Err(Error::MalformedModel(_))));
    }

    #[test]
    fn names_resolve() {
        assert_eq!(model_by_name("free_nilpotent_3").unwrap().dim(), 6);
        assert_eq!(model_by_name("su2_pair_2").unwrap().dim(), 6);
        assert!(model_by_name("nope").is_err());
    }
}
