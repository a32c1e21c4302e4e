//! Split-point planning for layered inference between an edge device and a
//! server.
//!
//! The planner derives per-layer costs from a declarative [`profile`],
//! evaluates every split against a latency objective and an edge-memory
//! objective ([`objective`]), and traces the Pareto front with an
//! epsilon-constraint sweep ([`optimizer`]). [`baselines`] and [`sweep`]
//! provide comparison and sensitivity runs; [`splitrt`] executes a chosen split
//! over TCP with synthetic layers to check the predictions.

pub mod baselines;
pub mod cli;
pub mod hash;
pub mod objective;
pub mod optimizer;
pub mod profile;
pub mod splitrt;
pub mod sweep;
