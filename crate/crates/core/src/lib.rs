//! Joint replenishment workbench: demand models, simulation, benchmark
//! policies, exact dynamic programming and neural impulse control.

pub mod bench;
pub mod bsde;
pub mod demand;
pub mod error;
pub mod mdp;
pub mod model;
pub mod nn;
pub mod optim;
pub mod policy;
pub mod problems;
pub mod qvi;
pub mod sim;

pub use error::{Error, Result};
