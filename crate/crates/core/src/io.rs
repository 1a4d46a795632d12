//! File formats: the `.rdc` cube container and the CSV exports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::{Event, EventList, Method};
use crate::displacement::{DisplacementTrace, EnvelopeTrace};
use crate::em_gmm::{mixture_pdf, EmFit};
use crate::error::{arg_err, Error, Result};
use crate::evaluation::WindowCount;
use crate::imaging::PowerImage;
use crate::scene_sim::TruthRecord;
use crate::signal_model::DataCube;

pub const RDC_VERSION: u32 = 1;

/// Header line of an `.rdc` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdcHeader {
    pub version: u32,
    pub n_slow: usize,
    pub n_elem: usize,
    pub n_range: usize,
    pub slow_time_rate_hz: f64,
    pub range_bin_m: f64,
    pub lambda_m: f64,
    pub t0_s: f64,
}

impl RdcHeader {
    pub fn of(cube: &DataCube) -> Self {
        Self {
            version: RDC_VERSION,
            n_slow: cube.n_slow,
            n_elem: cube.n_elem,
            n_range: cube.n_range,
            slow_time_rate_hz: cube.slow_time_rate,
            range_bin_m: cube.range_bin_size,
            lambda_m: cube.wavelength,
            t0_s: cube.t0,
        }
    }

    fn n_samples(&self) -> Result<usize> {
        self.n_slow
            .checked_mul(self.n_elem)
            .and_then(|n| n.checked_mul(self.n_range))
            .ok_or_else(|| Error::Format("cube dimensions overflow".into()))
    }
}

/// Header line, then little-endian `f32` (re, im) pairs in
/// slow-time/element/range order.
pub fn write_rdc<W: Write>(mut w: W, cube: &DataCube) -> Result<()> {
    cube.validate()?;
    serde_json::to_writer(&mut w, &RdcHeader::of(cube))?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(cube.samples.len() * 8);
    for z in &cube.samples {
        buf.extend_from_slice(&(z.re as f32).to_le_bytes());
        buf.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_rdc<R: Read>(r: R) -> Result<DataCube> {
    let mut r = BufReader::new(r);
    let mut line = Vec::new();
    r.by_ref().take(1 << 16).read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header line".into()));
    }
    let header: RdcHeader = serde_json::from_slice(&line[..line.len() - 1])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.version != RDC_VERSION {
        return Err(Error::Format(format!("unsupported cube version {}", header.version)));
    }
    let n = header.n_samples()?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != n * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header promises {}",
            payload.len(),
            n * 8
        )));
    }
    let f = |b: &[u8]| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    let samples = payload.chunks_exact(8).map(|c| Complex64::new(f(&c[..4]), f(&c[4..]))).collect();
    let cube = DataCube {
        samples,
        n_slow: header.n_slow,
        n_elem: header.n_elem,
        n_range: header.n_range,
        t0: header.t0_s,
        slow_time_rate: header.slow_time_rate_hz,
        range_bin_size: header.range_bin_m,
        wavelength: header.lambda_m,
    };
    cube.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(cube)
}

pub fn save_rdc(path: &Path, cube: &DataCube) -> Result<()> {
    write_rdc(BufWriter::new(File::create(path)?), cube)
}

pub fn load_rdc(path: &Path) -> Result<DataCube> {
    read_rdc(File::open(path)?)
}

/// Hex SHA-256 of a file, used as the recording id.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    std::io::copy(&mut File::open(path)?, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_events_csv<W: Write>(w: W, events: &EventList) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["t1_s", "t2_s", "method"])?;
    for e in &events.events {
        c.write_record([e.t1.to_string(), e.t2.to_string(), e.method.to_string()])?;
    }
    c.flush()?;
    Ok(())
}

pub fn read_events_csv<R: Read>(r: R) -> Result<EventList> {
    let mut c = csv::Reader::from_reader(r);
    let headers = c.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t1_s", "t2_s", "method"] {
        return Err(Error::Format("events CSV needs columns t1_s,t2_s,method".into()));
    }
    let mut events = Vec::new();
    for (i, rec) in c.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("line {}: bad number {:?}", i + 2, &rec[k])))
        };
        let (t1, t2) = (num(0)?, num(1)?);
        if !(t2 > t1) {
            return Err(Error::Format(format!("line {}: event ends before it starts", i + 2)));
        }
        let method: Method = rec[2].parse().map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?;
        events.push(Event { t1, t2, method });
    }
    Ok(EventList { events })
}

pub fn save_events_csv(path: &Path, events: &EventList) -> Result<()> {
    write_events_csv(BufWriter::new(File::create(path)?), events)
}

pub fn load_events_csv(path: &Path) -> Result<EventList> {
    read_events_csv(File::open(path)?)
}

pub fn write_truth_events_csv<W: Write>(w: W, truth: &TruthRecord) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["start_s", "end_s", "kind"])?;
    for e in &truth.schedule {
        c.write_record([e.start_s.to_string(), e.end_s.to_string(), e.kind.as_str().to_string()])?;
    }
    c.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(w: W, trace: &DisplacementTrace) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["time_s", "value_m", "flag"])?;
    for (i, (v, f)) in trace.d.iter().zip(&trace.flags).enumerate() {
        c.write_record([trace.time(i).to_string(), v.to_string(), u8::from(*f).to_string()])?;
    }
    c.flush()?;
    Ok(())
}

pub fn write_envelope_csv<W: Write>(w: W, env: &EnvelopeTrace) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["time_s", "value_m", "flag"])?;
    for (i, v) in env.d_bar.iter().enumerate() {
        c.write_record([env.time(i).to_string(), v.to_string(), "0".to_string()])?;
    }
    c.flush()?;
    Ok(())
}

/// Grid layout: header `range_m` then one column per azimuth in degrees.
pub fn write_power_image_csv<W: Write>(w: W, p: &PowerImage, range_bin_m: f64) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    let mut header = vec!["range_m".to_string()];
    header.extend(p.azimuth_grid.iter().map(|a| format!("{:.3}", a.to_degrees())));
    c.write_record(&header)?;
    for r in 0..p.n_range {
        let mut row = vec![(r as f64 * range_bin_m).to_string()];
        row.extend((0..p.n_az()).map(|a| p.get(r, a).to_string()));
        c.write_record(&row)?;
    }
    c.flush()?;
    Ok(())
}

pub fn write_window_counts_csv<W: Write>(w: W, counts: &[WindowCount]) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["window_start_s", "true_per_hour", "est_per_hour"])?;
    for wc in counts {
        c.write_record([wc.window_start.to_string(), wc.true_per_hour.to_string(), wc.est_per_hour.to_string()])?;
    }
    c.flush()?;
    Ok(())
}

/// Normalized histogram of `samples` next to the fitted mixture density at
/// each bin center.
pub fn write_histogram_csv<W: Write>(w: W, samples: &[f64], fit: &EmFit, n_bins: usize) -> Result<()> {
    if samples.is_empty() || n_bins == 0 {
        return arg_err("histogram needs samples and at least one bin");
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; n_bins];
    for &x in samples {
        let b = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["bin_center_m", "density", "fitted_density"])?;
    for (b, &n) in counts.iter().enumerate() {
        let x = lo + (b as f64 + 0.5) * width;
        let density = n as f64 / (samples.len() as f64 * width);
        let fitted = if fit.degenerate { f64::NAN } else { mixture_pdf(x, &fit.params) };
        c.write_record([x.to_string(), density.to_string(), fitted.to_string()])?;
    }
    c.flush()?;
    Ok(())
}
