//! Residual traces as CSV: `sample_id,iteration,relative_residual`.

use std::io::Write;

use crate::error::{Error, Result};

pub const HEADER: [&str; 3] = ["sample_id", "iteration", "relative_residual"];

/// Writes one row per iteration of every trace; iterations are numbered from 1.
pub fn write_trace_csv<'a, W, I>(writer: W, traces: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (usize, &'a [f64])>,
{
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(HEADER).map_err(to_err)?;
    for (sample_id, trace) in traces {
        for (i, r) in trace.iter().enumerate() {
            w.write_record(&[sample_id.to_string(), (i + 1).to_string(), format!("{r:e}")])
                .map_err(to_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
