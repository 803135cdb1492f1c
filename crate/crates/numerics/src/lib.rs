//! Numerical lab on the periodic unit interval: white noise and its
//! mollification, solvers for the regularized multiplicative stochastic
//! heat equation together with its tangent and dual equations, quadrature
//! evaluation of trees against smooth inputs, and Monte-Carlo expectations.

pub mod config;
pub mod error;
pub mod funcs;
pub mod grid;
pub mod lift;
pub mod mc;
pub mod noise;
pub mod solver;
pub mod spectral;

pub use config::{SimConfig, SimulationSpec};
pub use error::{NumError, NumResult};
pub use funcs::{InitialData, Profile, ScalarFn};
pub use grid::{Field, Grid};
pub use noise::{mollify, sample_white_noise, sample_white_noise_stream, MollifierSpec};
