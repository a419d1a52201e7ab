//! Weight files: a text header naming each tensor and its shape, then the
//! tensors' values as little-endian f32 in header order.
//!
//! ```text
//! MFW1
//! embed.coarse 64x512
//! head.detect.b 1
//! end
//! <binary>
//! ```

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use measurefirst_core::neural::TensorStore;

const MAGIC_LINE: &str = "MFW1";

pub fn write_weights(path: &Path, store: &TensorStore) -> Result<()> {
    let mut out = format!("{MAGIC_LINE}\n").into_bytes();
    for (name, (shape, _)) in &store.tensors {
        ensure!(!name.contains(char::is_whitespace), "tensor name {name:?} contains whitespace");
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        out.extend(format!("{name} {}\n", dims.join("x")).into_bytes());
    }
    out.extend(b"end\n");
    for (_, data) in store.tensors.values() {
        for &v in data {
            out.extend((v as f32).to_le_bytes());
        }
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_weights(path: &Path) -> Result<TensorStore> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pos = 0;
    let mut next_line = || -> Result<&str> {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .context("weight header ends early")?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).context("weight header is not UTF-8")?;
        pos += end + 1;
        Ok(line)
    };
    ensure!(next_line()? == MAGIC_LINE, "not a weight file");
    let mut entries = Vec::new();
    loop {
        let line = next_line()?;
        if line == "end" {
            break;
        }
        let Some((name, dims)) = line.split_once(' ') else {
            bail!("malformed header line {line:?}");
        };
        let shape = dims
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad shape in {line:?}"))?;
        entries.push((name.to_string(), shape));
    }
    let mut store = TensorStore::default();
    let mut data = &bytes[pos..];
    for (name, shape) in entries {
        let n: usize = shape.iter().product();
        ensure!(data.len() >= 4 * n, "tensor {name} truncated");
        let values = data[..4 * n]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        data = &data[4 * n..];
        store.insert(&name, shape, values);
    }
    ensure!(data.is_empty(), "{} trailing bytes after the last tensor", data.len());
    Ok(store)
}
