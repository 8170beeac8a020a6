//! Session service and command-line front end for per-object restoration.
//!
//! [`ops`] holds the operations both front ends share; [`http`] exposes them
//! as a JSON API over a [`session::SessionStore`] and [`cli`] runs them
//! against project files. [`bench`] is the acceptance harness behind
//! `objrestore bench`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod ops;
pub mod session;

pub use config::Config;
pub use error::{ServiceError, ServiceResult};
