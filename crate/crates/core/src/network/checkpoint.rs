//! Plain-text parameter checkpoints.
//!
//! ```text
//! ptpinn-checkpoint 1
//! mlp 2 5 50            # or: resnet <input_dim> <blocks> <block_depth> <width>
//! layers 6
//! 50 2                  # out in, one line per affine layer
//! ...
//! <entries>             # per layer: weights row-major, then bias; one per line
//! ```
//!
//! Entries use the shortest representation that parses back to the same
//! bits, so a write/read cycle is exact.

use std::io::{BufRead, BufReader, Read, Write};

use super::{MlpSpec, NetworkError, NetworkParams, NetworkSpec, ResNetSpec};
use crate::Real;

const MAGIC: &str = "ptpinn-checkpoint 1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub fn write_checkpoint<W: Write>(params: &NetworkParams, mut out: W) -> Result<(), CheckpointError> {
    writeln!(out, "{MAGIC}")?;
    match params.spec() {
        NetworkSpec::Mlp(s) => writeln!(out, "mlp {} {} {}", s.input_dim, s.hidden_layers, s.width)?,
        NetworkSpec::ResNet(s) => writeln!(out, "resnet {} {} {} {}", s.input_dim, s.blocks, s.block_depth, s.width)?,
    }
    let shapes = params.spec().layer_shapes();
    writeln!(out, "layers {}", shapes.len())?;
    for (o, i) in &shapes {
        writeln!(out, "{o} {i}")?;
    }
    for v in params.values() {
        writeln!(out, "{v:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<NetworkParams, CheckpointError> {
    let mut lines = BufReader::new(input).lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String), CheckpointError> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l.trim().to_string())),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(CheckpointError::Format {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let fmt_err = |line: usize, message: String| CheckpointError::Format { line, message };

    let (ln, magic) = next("header")?;
    if magic != MAGIC {
        return Err(fmt_err(ln, format!("expected `{MAGIC}`")));
    }
    let (ln, arch) = next("architecture line")?;
    let fields: Vec<&str> = arch.split_whitespace().collect();
    let nums = |xs: &[&str]| -> Result<Vec<usize>, CheckpointError> {
        xs.iter()
            .map(|x| {
                x.parse::<usize>()
                    .map_err(|e| fmt_err(ln, format!("bad integer `{x}`: {e}")))
            })
            .collect()
    };
    let spec = match fields.first().copied() {
        Some("mlp") if fields.len() == 4 => {
            let v = nums(&fields[1..])?;
            NetworkSpec::Mlp(MlpSpec {
                input_dim: v[0],
                hidden_layers: v[1],
                width: v[2],
                output_dim: 1,
            })
        }
        Some("resnet") if fields.len() == 5 => {
            let v = nums(&fields[1..])?;
            NetworkSpec::ResNet(ResNetSpec {
                input_dim: v[0],
                blocks: v[1],
                block_depth: v[2],
                width: v[3],
            })
        }
        _ => return Err(fmt_err(ln, format!("unknown architecture line `{arch}`"))),
    };
    spec.validate()?;
    let shapes = spec.layer_shapes();
    let (ln, count) = next("layer count")?;
    let declared = count
        .strip_prefix("layers ")
        .and_then(|c| c.trim().parse::<usize>().ok())
        .ok_or_else(|| fmt_err(ln, "expected `layers <count>`".into()))?;
    if declared != shapes.len() {
        return Err(fmt_err(
            ln,
            format!("architecture has {} layers, file declares {declared}", shapes.len()),
        ));
    }
    for (o, i) in &shapes {
        let (ln, line) = next("layer shape")?;
        if line != format!("{o} {i}") {
            return Err(fmt_err(ln, format!("expected layer shape `{o} {i}`, found `{line}`")));
        }
    }
    let mut values = Vec::with_capacity(spec.param_count());
    for _ in 0..spec.param_count() {
        let (ln, line) = next("parameter entry")?;
        let v: Real = line
            .parse()
            .map_err(|e| fmt_err(ln, format!("bad number `{line}`: {e}")))?;
        if !v.is_finite() {
            return Err(fmt_err(ln, "non-finite parameter".into()));
        }
        values.push(v);
    }
    Ok(NetworkParams::from_flat(spec, values)?)
}
