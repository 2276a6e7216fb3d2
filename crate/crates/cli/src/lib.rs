//! Command line and HTTP API of the roleseer pipeline.

pub mod cli;
pub mod schemas;
pub mod service;
