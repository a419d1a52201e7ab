//! EEGR stream files and the JSON sidecar that pairs them into a recording.
//!
//! Stream layout, little-endian:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `EEGR`               |
//! | 4      | 2    | version (`1`)              |
//! | 6      | 2    | channel count              |
//! | 8      | 8    | sample rate, f64           |
//! | 16     | 8    | samples per channel, u64   |
//! | 24     | ...  | channel-major f32 samples  |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use measurefirst_core::signal::{MontageGraph, Recording, Stream};
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 4] = b"EEGR";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 24;

pub fn write_stream(path: &Path, stream: &Stream) -> Result<()> {
    let n_ch = u16::try_from(stream.n_channels()).context("more than 65535 channels")?;
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&n_ch.to_le_bytes())?;
    w.write_all(&stream.rate_hz().to_le_bytes())?;
    w.write_all(&(stream.len() as u64).to_le_bytes())?;
    for ch in stream.channels() {
        for &v in ch {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_stream(path: &Path) -> Result<Stream> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let file_len = file.metadata()?.len();
    let mut r = BufReader::new(file);
    let mut header = [0u8; HEADER_LEN as usize];
    r.read_exact(&mut header).context("truncated EEGR header")?;
    ensure!(&header[0..4] == MAGIC, "{} is not an EEGR stream", path.display());
    let version = u16::from_le_bytes([header[4], header[5]]);
    ensure!(version == VERSION, "unsupported EEGR version {version}");
    let n_ch = u16::from_le_bytes([header[6], header[7]]) as usize;
    let rate = f64::from_le_bytes(header[8..16].try_into()?);
    let n = u64::from_le_bytes(header[16..24].try_into()?);
    let expected = HEADER_LEN + 4 * n_ch as u64 * n;
    ensure!(file_len == expected, "{}: {file_len} bytes, header implies {expected}", path.display());
    let mut channels = Vec::with_capacity(n_ch);
    let mut buf = vec![0u8; 4 * n as usize];
    for _ in 0..n_ch {
        r.read_exact(&mut buf)?;
        channels.push(
            buf.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect(),
        );
    }
    Ok(Stream::new(rate, channels)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: String,
    pub version: u16,
    pub channel_names: Vec<String>,
    pub start_time_s: f64,
    pub montage: MontageGraph,
    /// Paths relative to the sidecar.
    pub low: String,
    pub high: Option<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Writes `<stem>.json`, `<stem>.low.eegr` and, when present, `<stem>.high.eegr`.
pub fn write_recording(dir: &Path, stem: &str, rec: &Recording) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let low = format!("{stem}.low.eegr");
    write_stream(&dir.join(&low), rec.low())?;
    let high = match rec.high() {
        Some(h) => {
            let name = format!("{stem}.high.eegr");
            write_stream(&dir.join(&name), h)?;
            Some(name)
        }
        None => None,
    };
    let sidecar = Sidecar {
        format: "eegr".into(),
        version: VERSION,
        channel_names: rec.channel_names().to_vec(),
        start_time_s: rec.start_time_s(),
        montage: rec.montage().clone(),
        low,
        high,
        notes: rec.notes().to_vec(),
    };
    let path = dir.join(format!("{stem}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(path)
}

pub fn read_recording(sidecar_path: &Path) -> Result<Recording> {
    let text = std::fs::read_to_string(sidecar_path).with_context(|| format!("reading {}", sidecar_path.display()))?;
    let s: Sidecar = serde_json::from_str(&text).with_context(|| format!("parsing {}", sidecar_path.display()))?;
    if s.format != "eegr" || s.version != VERSION {
        bail!("unsupported sidecar format {} v{}", s.format, s.version);
    }
    let dir = sidecar_path.parent().unwrap_or(Path::new("."));
    let low = read_stream(&dir.join(&s.low))?;
    let high = s.high.as_ref().map(|h| read_stream(&dir.join(h))).transpose()?;
    let mut rec = Recording::new(s.channel_names, low, high, s.start_time_s, s.montage)?;
    for n in s.notes {
        rec = rec.with_note(n);
    }
    Ok(rec)
}
