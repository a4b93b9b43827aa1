//! Risk-aware network-constrained economic dispatch.
//!
//! Wind forecasts are sampled, reduced to per-farm reserve bounds by order
//! statistics, and the resulting DC optimal power flow is solved by a dense
//! interior-point method. Prices come from the duals of the nodal balances.
//!
//! Numerical code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod dispatch;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod qp;
pub mod risk;
pub mod rng;
pub mod scalar;
pub mod scenario;

pub use error::{Diagnosis, Error, Result};

pub type Matrix64 = linalg::Matrix<f64>;
pub type DcModel64 = grid::DcModel<f64>;
pub type QuadProgram64 = qp::QuadProgram<f64>;
pub type QpSolution64 = qp::QpSolution<f64>;
pub type ForecastModel64 = scenario::ForecastModel<f64>;
pub type ScenarioSet64 = scenario::ScenarioSet<f64>;
pub type ReserveVector64 = scenario::ReserveVector<f64>;
pub type DispatchProblem64 = dispatch::DispatchProblem<f64>;
pub type DispatchSolution64 = dispatch::DispatchSolution<f64>;
