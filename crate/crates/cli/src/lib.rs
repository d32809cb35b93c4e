//! Command-line entry points and the HTTP host of the browser companion.
//! Both drive the pipeline of [`quasisym::pipeline`].

pub mod commands;
pub mod exit;
pub mod server;
