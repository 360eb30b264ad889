//! Graphviz export of a fitted influence network.
//!
//! The graph is directed: an edge `k -> j` means covariate `k` drives
//! response `j` in the fitted model, and the edge label is the empirical
//! norm of the fitted component function. Every variable appears as a node
//! so isolated variables stay visible.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::csv::float_repr;
use crate::solver::FitResult;

fn quote(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Writes `result`'s support as a DOT digraph with one node per variable and
/// one labeled edge per recovered influence.
pub fn write_influence_graph<W: Write>(
    mut writer: W,
    result: &FitResult,
    labels: &[String],
) -> Result<()> {
    let p = result.coefficients.num_vars();
    if labels.len() != p {
        return Err(Error::InvalidInput(format!(
            "model has {p} variables but {} labels",
            labels.len()
        )));
    }
    writeln!(writer, "digraph influence {{")?;
    writeln!(writer, "  rankdir=LR;")?;
    for label in labels {
        writeln!(writer, "  {};", quote(label))?;
    }
    for &(j, k) in &result.support {
        writeln!(
            writer,
            "  {} -> {} [label={}];",
            quote(&labels[k]),
            quote(&labels[j]),
            quote(&float_repr(result.group_norms[[j, k]])),
        )?;
    }
    writeln!(writer, "}}")?;
    Ok(())
}
