//! Headered CSV: a time column in seconds, then one column per channel.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use measurefirst_core::signal::{MontageGraph, Recording, Stream};

/// Allowed relative jitter of the sample interval.
const RATE_TOLERANCE: f64 = 1e-3;

pub fn read_csv(path: &Path) -> Result<Recording> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    ensure!(headers.len() >= 2, "CSV needs a time column and at least one channel");
    let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut time = Vec::new();
    let mut channels = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("CSV row {}", row + 2))?;
        ensure!(rec.len() == headers.len(), "CSV row {} has {} fields", row + 2, rec.len());
        let mut fields = rec.iter().map(|f| f.trim().parse::<f64>());
        time.push(fields.next().unwrap().with_context(|| format!("time in row {}", row + 2))?);
        for (c, v) in fields.enumerate() {
            channels[c].push(v.with_context(|| format!("{} in row {}", names[c], row + 2))?);
        }
    }
    ensure!(time.len() >= 2, "CSV needs at least two samples");
    let dt = (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64;
    if !(dt > 0.0) {
        bail!("time column must increase");
    }
    for w in time.windows(2) {
        ensure!(
            ((w[1] - w[0]) - dt).abs() <= RATE_TOLERANCE * dt,
            "time column is not uniformly sampled near t = {}",
            w[0]
        );
    }
    let montage = MontageGraph::from_channel_names(&names);
    Ok(Recording::new(names, Stream::new(1.0 / dt, channels)?, None, time[0], montage)?)
}

pub fn write_csv(path: &Path, rec: &Recording) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["time".to_string()];
    header.extend(rec.channel_names().iter().cloned());
    w.write_record(&header)?;
    let low = rec.low();
    for i in 0..low.len() {
        let mut row = vec![format!("{}", rec.start_time_s() + i as f64 / low.rate_hz())];
        row.extend(low.channels().iter().map(|c| format!("{}", c[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
