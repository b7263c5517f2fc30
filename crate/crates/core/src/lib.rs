//! Exact and asymptotic stationary analysis of a threshold-modulated
//! single-server queue with compound Poisson input (the "large dam" model).
//!
//! The level process is an M^X/G/1-type queue where each service is drawn
//! from `B1` when the queue length immediately before the service start is
//! at most `L`, and from `B2` otherwise; the first customer of every busy
//! period is served by `B1`. The crate computes:
//!
//! * exact stationary probabilities `p1`, `p2`, `q_1..q_L` from busy-period
//!   recurrences ([`stationary`]),
//! * all asymptotic regimes, including the heavy-traffic family indexed by
//!   `C = lim L(rho1(L) - 1)` ([`asymptotics`]),
//! * the long-run cost objective and the optimal control `C` ([`objective`]),
//! * a discrete-event simulator acting as an independent oracle ([`sim`]).

pub mod asymptotics;
pub mod busy_period;
pub mod error;
pub mod model;
pub mod objective;
pub mod sim;
pub mod stationary;

pub use error::{Error, Result};
pub use model::{BatchDistribution, CostProfile, DamModel, ServiceDistribution};
