//! Rough-path numerics: dyadic lifts of Gaussian noise, controlled rough
//! integration, mild RDE solvers and discrete Lyapunov–Perron center manifolds.
//!
//! Every numerical type is generic over a [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below cover the common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod controlled_calculus;
pub mod error;
pub mod grid_paths;
pub mod linalg;
pub mod linear_flow;
pub mod lp_manifold;
pub mod rde_solver;
pub mod rough_lift;
pub mod scalar;
pub mod spectral;
pub mod systems;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TimeGrid64 = grid_paths::TimeGrid<f64>;
pub type SampledPath64 = grid_paths::SampledPath<f64>;
pub type TwoParamField64 = grid_paths::TwoParamField<f64>;
pub type RoughPath64 = rough_lift::RoughPath<f64>;
pub type ControlledPath64 = controlled_calculus::ControlledPath<f64>;
pub type Mat64 = linalg::Mat<f64>;
pub type Splitting64 = linear_flow::Splitting<f64>;
pub type ManifoldChart64 = lp_manifold::ManifoldChart<f64>;

pub type TimeGrid32 = grid_paths::TimeGrid<f32>;
pub type SampledPath32 = grid_paths::SampledPath<f32>;
pub type RoughPath32 = rough_lift::RoughPath<f32>;
pub type ControlledPath32 = controlled_calculus::ControlledPath<f32>;
pub type Mat32 = linalg::Mat<f32>;
