//! Sequential simulation of parallel Constraint Handling Rules execution.
//!
//! A program is a list of guarded simpagation rules over ground terms. The
//! [`engine`] repeatedly collects all applicable rule instances and applies
//! as many of them per step as there are (simulated) processors, in an order
//! chosen by a scheduling strategy. [`bench`] ships the benchmark programs
//! with query generators and independent result oracles, and [`report`]
//! turns traces into CSV and JSON.

pub mod bench;
pub mod check;
pub mod cli;
pub mod engine;
pub mod matcher;
pub mod program;
pub mod report;
pub mod store;
pub mod term;
