//! Respiratory displacement from echo phase, band-pass conditioning and the
//! sliding RMS envelope.

pub mod butterworth;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use butterworth::SosFilter;

/// Samples weaker than this fraction of the series peak carry no usable phase.
pub const RELIABLE_MAGNITUDE: f64 = 1e-12;

pub const DEFAULT_BAND_HZ: (f64, f64) = (0.17, 1.8);
pub const DEFAULT_FILTER_ORDER: usize = 4;
pub const DEFAULT_ENVELOPE_S: f64 = 5.0;

/// Uniformly sampled displacement in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementTrace {
    pub t0: f64,
    pub rate: f64,
    pub d: Vec<f64>,
    /// `true` where the sample was interpolated over an unreliable gap.
    pub flags: Vec<bool>,
    pub source: usize,
    /// Set when the trace is too short for the band-pass to settle.
    #[serde(default)]
    pub short_for_filter: bool,
}

impl DisplacementTrace {
    pub fn new(t0: f64, rate: f64, d: Vec<f64>, source: usize) -> Self {
        let flags = vec![false; d.len()];
        Self { t0, rate, d, flags, source, short_for_filter: false }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.rate
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.d.len()).map(|i| self.time(i)).collect()
    }
}

/// Sliding RMS amplitude `d_bar(t)`, same sampling as its source trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTrace {
    pub t0: f64,
    pub rate: f64,
    pub d_bar: Vec<f64>,
    pub source: usize,
}

impl EnvelopeTrace {
    pub fn len(&self) -> usize {
        self.d_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_bar.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.rate
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { d_bar: self.d_bar.iter().map(|v| v * alpha).collect(), ..self.clone() }
    }
}

/// Wraps an angle into `(-pi, pi]`.
fn wrap(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Unwrapped phase over the reliable samples, with unreliable samples
/// linearly interpolated (and held flat past either end). Returns the phase
/// and the per-sample unreliable flags.
pub fn unwrap_phase(series: &[Complex64]) -> Result<(Vec<f64>, Vec<bool>)> {
    if series.is_empty() {
        return arg_err("phase series is empty");
    }
    let peak = series.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return arg_err("phase series has no non-zero finite samples");
    }
    let eps = RELIABLE_MAGNITUDE * peak;
    let flags: Vec<bool> = series.iter().map(|c| !(c.norm() >= eps)).collect();

    let mut phase = vec![0.0; series.len()];
    let mut last: Option<(usize, f64, f64)> = None; // index, wrapped, unwrapped
    for (i, c) in series.iter().enumerate() {
        if flags[i] {
            continue;
        }
        let wrapped = c.arg();
        let unwrapped = match last {
            None => wrapped,
            Some((_, prev_w, prev_u)) => prev_u + wrap(wrapped - prev_w),
        };
        phase[i] = unwrapped;
        if let Some((j, _, prev_u)) = last {
            let gap = i - j;
            for g in 1..gap {
                phase[j + g] = prev_u + (unwrapped - prev_u) * g as f64 / gap as f64;
            }
        } else {
            phase[..i].iter_mut().for_each(|p| *p = unwrapped);
        }
        last = Some((i, wrapped, unwrapped));
    }
    if let Some((j, _, u)) = last {
        phase[j + 1..].iter_mut().for_each(|p| *p = u);
    }
    Ok((phase, flags))
}

/// `lambda / (4 pi)` times the unwrapped phase, without offset removal.
pub fn raw_displacement(series: &[Complex64], wavelength: f64) -> Result<(Vec<f64>, Vec<bool>)> {
    let (phase, flags) = unwrap_phase(series)?;
    let k = wavelength / (4.0 * PI);
    Ok((phase.into_iter().map(|p| p * k).collect(), flags))
}

/// Displacement `d_0(t)` from the phase of a complex slow-time series,
/// offset so the first sample is zero.
pub fn phase_displacement(
    series: &[Complex64],
    wavelength: f64,
    t0: f64,
    rate: f64,
    source: usize,
) -> Result<DisplacementTrace> {
    if !(wavelength > 0.0) || !(rate > 0.0) {
        return arg_err("wavelength and sample rate must be positive");
    }
    let (mut d, flags) = raw_displacement(series, wavelength)?;
    let offset = d[0];
    d.iter_mut().for_each(|v| *v -= offset);
    Ok(DisplacementTrace { t0, rate, d, flags, source, short_for_filter: false })
}

/// Which complex signal the displacement phase is read from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseReference {
    /// Unsuppressed beam output minus its fitted arc center.
    #[default]
    ArcCenter,
    /// The clutter-suppressed image `I_c` as is.
    ClutterSuppressed,
}

/// Center of the circle traced by a complex series, by algebraic
/// least-squares (Kasa) fit. A moving reflector in front of static echoes
/// traces an arc around the static sum; subtracting the center leaves a
/// phasor whose phase follows the motion. `None` for degenerate input.
pub fn fit_arc_center(series: &[Complex64]) -> Option<Complex64> {
    if series.len() < 3 {
        return None;
    }
    let n = series.len() as f64;
    let mean: Complex64 = series.iter().sum::<Complex64>() / n;
    let scale = (series.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n).sqrt();
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    // normal equations for |u|^2 + D x + E y + F = 0 on normalized points
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for z in series {
        let u = (z - mean) / scale;
        let row = [u.re, u.im, 1.0];
        let r2 = u.norm_sqr();
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
            b[i] -= r2 * row[i];
        }
    }
    let sol = solve3(a, b)?;
    let center = Complex64::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = center.norm_sqr() - sol[2];
    if !(r2 > 0.0) || !center.re.is_finite() || !center.im.is_finite() {
        return None;
    }
    Some(mean + center * scale)
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[pivot][col].abs() > 1e-12) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Band-pass settings for [`bandpass`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub f_lo: f64,
    pub f_hi: f64,
    pub order: usize,
}

impl Default for Band {
    fn default() -> Self {
        Self { f_lo: DEFAULT_BAND_HZ.0, f_hi: DEFAULT_BAND_HZ.1, order: DEFAULT_FILTER_ORDER }
    }
}

/// Zero-phase Butterworth band-pass of a displacement trace.
pub fn bandpass(trace: &DisplacementTrace, band: Band) -> Result<DisplacementTrace> {
    let filter = SosFilter::bandpass(band.order, band.f_lo, band.f_hi, trace.rate)?;
    Ok(bandpass_with(trace, &filter, band.f_lo))
}

/// As [`bandpass`] with a prebuilt filter; `f_lo` sets the settling check.
pub fn bandpass_with(trace: &DisplacementTrace, filter: &SosFilter, f_lo: f64) -> DisplacementTrace {
    let time_constant = trace.rate / (TAU * f_lo);
    let short = (trace.len() as f64) < 3.0 * time_constant || trace.len() <= filter.default_padlen();
    DisplacementTrace {
        d: filter.filtfilt(&trace.d),
        short_for_filter: short,
        ..trace.clone()
    }
}

/// Number of samples in an envelope window of `t_a` seconds.
pub fn envelope_window(t_a: f64, rate: f64) -> Result<usize> {
    if !(t_a > 0.0) {
        return arg_err("envelope window T_a must be positive");
    }
    Ok(((t_a * rate).round() as usize).max(1))
}

/// `d_bar(t) = sqrt(mean of d^2 over a centered window of t_a seconds)`,
/// truncated at the edges. An even window length `W` spans
/// `[n - W/2, n + W/2 - 1]`.
pub fn envelope(trace: &DisplacementTrace, t_a: f64) -> Result<EnvelopeTrace> {
    let w = envelope_window(t_a, trace.rate)?;
    Ok(EnvelopeTrace {
        t0: trace.t0,
        rate: trace.rate,
        d_bar: windowed_rms(&trace.d, w),
        source: trace.source,
    })
}

/// Centered windowed RMS with direct per-window sums.
pub fn windowed_rms(d: &[f64], w: usize) -> Vec<f64> {
    let n = d.len();
    let back = w / 2;
    let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + w - back).min(n);
            let s: f64 = sq[lo..hi].iter().sum();
            (s / (hi - lo) as f64).sqrt()
        })
        .collect()
}
