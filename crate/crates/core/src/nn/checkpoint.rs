//! Text checkpoints holding any number of named networks.
//!
//! ```text
//! qexp-checkpoint 1
//! net actor 3 64 64 2
//! <one parameter per line, shortest round-trip decimal>
//! net critic 3 64 64 1
//! ...
//! ```
//!
//! Parameters follow the flat layout of [`MlpParams`]: per layer, the
//! row-major `out × in` weights then the `out` biases.

use super::MlpParams;
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "qexp-checkpoint";

pub fn write_checkpoint(mut out: impl Write, nets: &[(&str, &MlpParams)]) -> Result<()> {
    writeln!(out, "{MAGIC} {CHECKPOINT_VERSION}")?;
    for (name, net) in nets {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::format(format!("invalid network name {name:?}")));
        }
        write!(out, "net {name}")?;
        for s in net.sizes() {
            write!(out, " {s}")?;
        }
        writeln!(out)?;
        for v in net.as_slice() {
            writeln!(out, "{v:?}")?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(input: impl BufRead) -> Result<Vec<(String, MlpParams)>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        [MAGIC, v] if v.parse::<u32>() == Ok(CHECKPOINT_VERSION) => {}
        _ => return Err(Error::format(format!("not a version {CHECKPOINT_VERSION} checkpoint"))),
    }
    let mut nets = Vec::new();
    while let Some(line) = lines.next().transpose()? {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        if parts.next() != Some("net") {
            return Err(Error::format(format!("expected a net header, got {line:?}")));
        }
        let name = parts.next().ok_or_else(|| Error::format("missing network name"))?;
        let sizes = parts
            .map(str::parse::<usize>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(format!("bad layer size: {e}")))?;
        let len = MlpParams::zeros(&sizes)?.len();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let l = lines.next().transpose()?.ok_or_else(|| Error::format("truncated checkpoint"))?;
            data.push(l.trim().parse::<f64>().map_err(|e| Error::format(format!("bad value: {e}")))?);
        }
        nets.push((name.to_string(), MlpParams::from_parts(&sizes, data)?));
    }
    Ok(nets)
}
