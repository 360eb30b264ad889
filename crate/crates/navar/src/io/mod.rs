//! File formats used by the `navar` command-line tool.
//!
//! Three formats, all plain text:
//!
//! - [`csv`]: comma-separated panels and result tables (header required,
//!   no quoting, floats in shortest round-trip form);
//! - [`config`]: flat `key = value` run configuration with `#` comments;
//! - [`dot`]: Graphviz export of a fitted influence network.

pub mod config;
pub mod csv;
pub mod dot;
