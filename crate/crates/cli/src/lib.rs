//! Command implementations behind the `wmeval` binary.

pub mod api;
pub mod commands;
