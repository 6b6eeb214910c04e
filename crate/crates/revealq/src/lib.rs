//! Command-line simulations and the HTTP teaching-session service built on
//! [`revealq_core`].

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod session;
pub mod store;

pub use error::{Result, ServiceError};
