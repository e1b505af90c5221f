//! Heat semigroup `P_t = e^{tL/2}`, its gradients, the Heisenberg heat kernel
//! and the Carnot-Carathéodory distance.
//!
//! Two independent estimators are provided. [`mc`] simulates the
//! `½L`-diffusion by composing group exponentials of Gaussian horizontal
//! increments, which works on any model with a group realization. [`pde`]
//! solves `∂_t u = ½Lu` on a truncated Heisenberg box.

pub mod distance;
pub mod mc;
pub mod pde;

use serde::{Deserialize, Serialize};

pub use distance::{cc_distance, heisenberg_distance, DistanceEstimate, DistanceMethod};
pub use mc::{
    frame_gradient, mc_expectation, mc_gradient, mc_semigroup, mc_stencil, McSettings, PathStatistics, StencilRun,
};
pub use pde::{heat_kernel, heat_kernel_series, pde_evolve, pde_evolve_with, pde_semigroup, HeatField, HeisenbergGrid, KernelEstimate, PdeSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Pde,
}

/// Settings recorded alongside an estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EstimateSettings {
    Mc(McSettings),
    Pde(PdeSettings),
}

/// One value of `P_t f(x)`.
///
/// `error` is the Monte Carlo standard error or, for the PDE solver, a
/// discretization-error estimate from a coarser time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupEstimate {
    pub model: String,
    pub f: String,
    pub x: Vec<f64>,
    pub t: f64,
    pub method: Method,
    pub value: f64,
    pub error: f64,
    pub seed: Option<u64>,
    pub settings: EstimateSettings,
}

/// Which part of the metric a gradient refers to.
pub use crate::gamma::Part;

/// `Γ^•(P_t f)(x)` with a standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub value: f64,
    pub error: f64,
    /// Frame derivatives `F_a P_t f(x)` with their standard errors.
    pub components: Vec<(f64, f64)>,
}
