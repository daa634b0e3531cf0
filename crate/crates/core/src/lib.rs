#![no_std]

extern crate alloc;

pub mod bregman;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod rates;
pub mod solvers;
pub mod stability;
pub mod transport;

pub use error::{Error, Result};
pub use problem::{
    discrepancy, feasible, lp_norm, regularizer_value, value_function, Problem, SolveReport,
    Status, ValuePoint,
};
pub use solvers::{
    nonconvex_solve, prox_lp, residual_method_solve, tikhonov_min, SolverOptions,
};
