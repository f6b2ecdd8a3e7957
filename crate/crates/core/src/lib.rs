//! Physics-informed neural networks for small ODE systems.

pub mod autodiff;
pub mod error;
pub mod experiment;
pub mod integrate;
pub mod network;
pub mod objective;
pub mod optim;
pub mod pinn;
pub mod problems;
pub mod random;

pub use error::{Error, Result};
pub use objective::{FnObjective, Objective};
