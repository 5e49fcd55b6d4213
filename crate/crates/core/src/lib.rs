//! Within-host leprosy model with six cytokine biomarkers, its multi-drug
//! optimal control problem, and the experiments built on them.

pub mod cli;
pub mod config;
pub mod error;
pub mod integrate;
pub mod model;
pub mod octl;
pub mod output;
pub mod scenarios;
pub mod validate;

pub use error::{Error, Result};
