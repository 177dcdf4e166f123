//! Extrapolated proximal subgradient method for
//! `min_{x in C} f(x) + h(Ax) - g(x)`, with two baseline methods and the
//! compressed-sensing and DC optimal power flow problem families.

pub mod baselines;
pub mod bench;
pub mod cs;
pub mod error;
pub mod linear_map;
pub mod opf;
pub mod problem;
pub mod prox;
pub mod qp;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use linear_map::{spectral_norm, LinearMap, Matrix, Vector};
pub use problem::{tau_upper_bound, MuSchedule, ProblemSpec, ProxCache, SolverParams, TauRule};
pub use solver::{extrapolation_coeffs, psg_step, solve, ExtrapolationState};
pub use trace::{check_decrease, DecreaseCheck, IterateTrace, SolveReport, Status};
