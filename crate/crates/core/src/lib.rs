//! Brute-force laboratory for quantum query simulation and proof-of-quantumness
//! transformations at toy scale.

pub mod advice_oracle;
pub mod compressed;
pub mod error;
pub mod experiments;
pub mod oracle_world;
pub mod oracles;
pub mod ow2h;
pub mod poq;
pub mod qsim;
pub mod sim_reduction;
pub mod transforms;

pub use error::{Error, Result};
