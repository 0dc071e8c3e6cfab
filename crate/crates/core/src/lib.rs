//! Simulation and drift estimation for Vasicek-type models driven by Hermite processes.

pub mod asymptotics;
pub mod chaos;
pub mod cli;
pub mod estimators;
pub mod error;
pub mod fgn;
pub mod hermite;
pub mod quadrature;
pub mod io;
pub mod mc;
pub mod seed;
pub mod stats;
pub mod vasicek;

pub use error::{Error, Result};
pub use estimators::{estimate, EstimateResult, GTResult};
pub use hermite::{GridSpec, HermiteSpec, SamplePath};
pub use mc::{MCConfig, MCResult};
pub use vasicek::VasicekParams;
