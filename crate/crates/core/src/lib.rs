//! Numerical toolkit for a jointly regulated stochastic control problem in
//! dynamic pricing and recycling investment.
//!
//! The state is a recycling rate kept inside `[0, 1]` by two local-time
//! regulators. The controller picks an investment rate and a product price to
//! maximize an infinite-horizon discounted profit that also pays a penalty
//! proportional to the lower-boundary local time. The crate provides:
//!
//! - [`model`]: parameters and the scalar primitives (drift, Cobb-Douglas
//!   demand, profit, the auxiliary functions closing the HJB equation),
//! - [`hjb`]: a shooting solver for the value function, bisecting on the
//!   free initial slope of the reduced nonlinear ODE,
//! - [`policy`]: closed-form optimal controls extracted from the solved value
//!   function, plus reference policies and a brute-force Hamiltonian oracle,
//! - [`sde`]: projected Euler simulation of the doubly reflected state with
//!   exact per-step local-time bookkeeping,
//! - [`eval`]: discounted-profit evaluation, seedable Monte Carlo with
//!   common random numbers, policy comparison, and parameter sweeps.
//!
//! Monte Carlo path loops run data-parallel under the default `parallel`
//! feature (rayon) and fall back to sequential iteration without it; results
//! are identical either way because every path draws from its own
//! counter-derived RNG stream and reductions run in path order.

pub mod error;
pub mod eval;
pub mod hjb;
pub mod model;
pub mod policy;
pub mod sde;

pub use error::{Error, Result};
pub use eval::{
    compare_policies, discounted_profit, mean_se, monte_carlo_j, monte_carlo_profits, paired_diff,
    sensitivity_sweep, verification_inequality, EvalReport, PairedStats, SweepRow,
    VerificationOutcome,
};
pub use hjb::{
    classify_series, hjb_residual, integrate_w, shoot_kstar, HjbSolution, ShootConfig,
    TrajectoryClass, WTrajectory,
};
pub use model::ModelParams;
pub use policy::{
    argmax_hamiltonian_bruteforce, hamiltonian, optimal_investment, optimal_price, Policy,
    PolicyKind, PRICE_FLOOR,
};
pub use sde::{path_rng, simulate_path, simulate_unregulated, RegulatedPath, SimConfig};
