//! Generation pipeline, record store, HTTP API and command line.

pub mod cli;
pub mod config;
pub mod http;
pub mod service;
pub mod store;

pub use service::{App, AppError};
