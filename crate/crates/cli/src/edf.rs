//! Minimal EDF reader: 16-bit samples, one common rate across the ordinal
//! signals, `EDF Annotations` signals skipped.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use measurefirst_core::signal::{MontageGraph, Recording, Stream};

fn field(bytes: &[u8], what: &str) -> Result<String> {
    let s = std::str::from_utf8(bytes).with_context(|| format!("{what} is not ASCII"))?;
    Ok(s.trim().to_string())
}

fn num<T: std::str::FromStr>(bytes: &[u8], what: &str) -> Result<T> {
    let s = field(bytes, what)?;
    s.parse().ok().with_context(|| format!("{what}: {s:?} is not a number"))
}

struct Signal {
    label: String,
    scale: f64,
    offset: f64,
    samples_per_record: usize,
}

pub fn read_edf(path: &Path) -> Result<Recording> {
    let data = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    ensure!(data.len() >= 256, "EDF header truncated");
    ensure!(&data[0..8] == b"0       ", "not an EDF file (version field)");
    let header_len: usize = num(&data[184..192], "header length")?;
    let n_records: i64 = num(&data[236..244], "record count")?;
    let record_s: f64 = num(&data[244..252], "record duration")?;
    let ns: usize = num(&data[252..256], "signal count")?;
    ensure!(header_len == 256 * (ns + 1), "header length {header_len} does not match {ns} signals");
    ensure!(data.len() >= header_len, "EDF signal headers truncated");
    ensure!(n_records > 0 && record_s > 0.0, "EDF has no timed data records");

    let h = &data[256..header_len];
    let col = |offset: usize, width: usize, i: usize| &h[ns * offset + i * width..ns * offset + (i + 1) * width];
    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let label = field(col(0, 16, i), "label")?;
        let pmin: f64 = num(col(104, 8, i), "physical minimum")?;
        let pmax: f64 = num(col(112, 8, i), "physical maximum")?;
        let dmin: f64 = num(col(120, 8, i), "digital minimum")?;
        let dmax: f64 = num(col(128, 8, i), "digital maximum")?;
        let spr: usize = num(col(216, 8, i), "samples per record")?;
        ensure!(dmax > dmin, "{label}: digital range is empty");
        let scale = (pmax - pmin) / (dmax - dmin);
        signals.push(Signal {
            label,
            scale,
            offset: pmin - scale * dmin,
            samples_per_record: spr,
        });
    }
    let record_samples: usize = signals.iter().map(|s| s.samples_per_record).sum();
    let n_records = n_records as usize;
    ensure!(
        data.len() >= header_len + 2 * record_samples * n_records,
        "EDF data section truncated"
    );

    let keep: Vec<usize> = (0..ns).filter(|&i| signals[i].label != "EDF Annotations").collect();
    ensure!(!keep.is_empty(), "EDF has no ordinary signals");
    let spr = signals[keep[0]].samples_per_record;
    if keep.iter().any(|&i| signals[i].samples_per_record != spr) {
        bail!("signals with different sample rates are not supported");
    }
    let mut channels = vec![Vec::with_capacity(spr * n_records); keep.len()];
    let mut pos = header_len;
    for _ in 0..n_records {
        for (i, s) in signals.iter().enumerate() {
            let slot = keep.iter().position(|&k| k == i);
            for k in 0..s.samples_per_record {
                if let Some(c) = slot {
                    let d = i16::from_le_bytes([data[pos + 2 * k], data[pos + 2 * k + 1]]) as f64;
                    channels[c].push(s.offset + s.scale * d);
                }
            }
            pos += 2 * s.samples_per_record;
        }
    }
    let names: Vec<String> = keep.iter().map(|&i| signals[i].label.clone()).collect();
    let montage = MontageGraph::from_channel_names(&names);
    Ok(Recording::new(names, Stream::new(spr as f64 / record_s, channels)?, None, 0.0, montage)?)
}

/// Writes a single-rate EDF with a +-3276.7 µV range, for fixtures.
pub fn write_edf(path: &Path, names: &[&str], rate_hz: usize, channels: &[Vec<f64>]) -> Result<()> {
    let ns = names.len();
    ensure!(ns == channels.len() && ns > 0, "names and channels disagree");
    let n = channels[0].len();
    ensure!(n % rate_hz == 0, "sample count must fill whole one-second records");
    let pad = |s: &str, w: usize| format!("{s:<w$}").into_bytes();
    let mut out = Vec::new();
    out.extend(pad("0", 8));
    out.extend(pad("X X X X", 80));
    out.extend(pad("Startdate X X X X", 80));
    out.extend(pad("01.01.00", 8));
    out.extend(pad("00.00.00", 8));
    out.extend(pad(&(256 * (ns + 1)).to_string(), 8));
    out.extend(pad("", 44));
    out.extend(pad(&(n / rate_hz).to_string(), 8));
    out.extend(pad("1", 8));
    out.extend(pad(&ns.to_string(), 4));
    let cols: [(usize, &dyn Fn(usize) -> String); 10] = [
        (16, &|i| names[i].to_string()),
        (80, &|_| String::new()),
        (8, &|_| "uV".into()),
        (8, &|_| "-3276.8".into()),
        (8, &|_| "3276.7".into()),
        (8, &|_| "-32768".into()),
        (8, &|_| "32767".into()),
        (80, &|_| String::new()),
        (8, &|_| rate_hz.to_string()),
        (32, &|_| String::new()),
    ];
    for (w, f) in cols {
        for i in 0..ns {
            out.extend(pad(&f(i), w));
        }
    }
    for rec in 0..n / rate_hz {
        for ch in channels {
            for &v in &ch[rec * rate_hz..(rec + 1) * rate_hz] {
                let d = (v * 10.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend(d.to_le_bytes());
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
