//! Synthetic FMCW scenes: breathing scatterers with a scheduled
//! apnea/hypopnea timeline, static clutter and complex white noise, written
//! straight into a post-range-FFT [`DataCube`].

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::rng::{purpose, Stream};
use crate::signal_model::{DataCube, RadarConfig};

pub mod presets;

/// Raised-cosine transition length at event and posture-change boundaries.
pub const TRANSITION_S: f64 = 2.0;

/// Shortest event that counts toward the apnea-hypopnea index.
pub const SCOREABLE_MIN_S: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreathingPattern {
    pub rate_hz: f64,
    pub amplitude_m: f64,
    #[serde(default)]
    pub harmonic_2_fraction: f64,
    #[serde(default)]
    pub phase0_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Apnea,
    Hypopnea,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Apnea => "apnea",
            EventKind::Hypopnea => "hypopnea",
        }
    }

    /// Largest residual breathing fraction still consistent with the kind.
    pub fn max_residual(self) -> f64 {
        match self {
            EventKind::Apnea => 0.1,
            EventKind::Hypopnea => 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApneaEvent {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: EventKind,
    pub residual_fraction: f64,
    /// 0 = no periodic effort (central type), 1 = full periodic effort at
    /// the residual amplitude (obstructive type).
    pub effort_modulation: f64,
}

impl ApneaEvent {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Amplitude multiplier inside the event.
    pub fn depth(&self) -> f64 {
        self.residual_fraction * self.effort_modulation
    }

    pub fn is_scoreable(&self) -> bool {
        self.duration() >= SCOREABLE_MIN_S
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub reflectivity: f64,
    pub breathing: BreathingPattern,
    #[serde(default = "unit")]
    pub displacement_gain: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterSource {
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub reflectivity: f64,
}

/// A step change of every scatterer's displacement amplitude, e.g. the
/// sleeper rolling over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostureChange {
    pub time_s: f64,
    pub amplitude_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePlan {
    pub scatterers: Vec<Scatterer>,
    #[serde(default)]
    pub schedule: Vec<ApneaEvent>,
    #[serde(default)]
    pub clutter: Vec<ClutterSource>,
    pub noise_power: f64,
    pub duration_s: f64,
    pub sleep_intervals: Vec<[f64; 2]>,
    pub rng_seed: u64,
    #[serde(default)]
    pub posture_changes: Vec<PostureChange>,
}

impl ScenePlan {
    pub fn validate(&self, cfg: &RadarConfig) -> Result<()> {
        cfg.validate()?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return arg_err("scene duration must be positive");
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return arg_err("noise power must be non-negative");
        }
        let extent = cfg.max_range_m();
        let in_extent = |r: f64, th: f64, what: &str, i: usize| -> Result<()> {
            if !(0.0..extent).contains(&r) {
                return arg_err(format!(
                    "{what} {i} at range {r} m lies outside the cube extent [0, {extent}) m"
                ));
            }
            if !(th.abs() < PI / 2.0) {
                return arg_err(format!("{what} {i} azimuth {th} rad is not within (-pi/2, pi/2)"));
            }
            Ok(())
        };
        for (i, s) in self.scatterers.iter().enumerate() {
            in_extent(s.range_m, s.azimuth_rad, "scatterer", i)?;
            let b = &s.breathing;
            if !(b.amplitude_m > 0.0) || !(b.rate_hz > 0.0) {
                return arg_err(format!("scatterer {i} needs positive breathing rate and amplitude"));
            }
            if !(0.0..1.0).contains(&b.harmonic_2_fraction) {
                return arg_err(format!("scatterer {i} harmonic fraction must be in [0, 1)"));
            }
        }
        for (i, c) in self.clutter.iter().enumerate() {
            in_extent(c.range_m, c.azimuth_rad, "clutter source", i)?;
        }
        validate_schedule(&self.schedule)?;
        for (i, e) in self.schedule.iter().enumerate() {
            if e.start_s < 0.0 || e.end_s > self.duration_s {
                return arg_err(format!("event {i} extends beyond the recording"));
            }
        }
        let mut prev_end = f64::NEG_INFINITY;
        for (i, iv) in self.sleep_intervals.iter().enumerate() {
            if !(iv[0] < iv[1]) || iv[0] < 0.0 || iv[1] > self.duration_s {
                return arg_err(format!("sleep interval {i} is empty or outside the recording"));
            }
            if iv[0] < prev_end {
                return arg_err(format!("sleep interval {i} overlaps or precedes its predecessor"));
            }
            prev_end = iv[1];
        }
        for p in &self.posture_changes {
            if !(p.amplitude_factor > 0.0) {
                return arg_err("posture-change amplitude factor must be positive");
            }
        }
        Ok(())
    }

    pub fn n_slow(&self, cfg: &RadarConfig) -> usize {
        (self.duration_s * cfg.slow_time_rate_hz).round() as usize
    }
}

/// Checks event ordering, overlap and kind-dependent residual bounds.
pub fn validate_schedule(schedule: &[ApneaEvent]) -> Result<()> {
    let mut sorted: Vec<&ApneaEvent> = schedule.iter().collect();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for (i, e) in sorted.iter().enumerate() {
        if !(e.end_s > e.start_s) {
            return arg_err(format!("event at {} s has non-positive duration", e.start_s));
        }
        if !(0.0..=e.kind.max_residual()).contains(&e.residual_fraction) {
            return arg_err(format!(
                "{} at {} s has residual fraction {} (allowed up to {})",
                e.kind.as_str(),
                e.start_s,
                e.residual_fraction,
                e.kind.max_residual()
            ));
        }
        if !(0.0..=1.0).contains(&e.effort_modulation) {
            return arg_err(format!("event at {} s has effort outside [0, 1]", e.start_s));
        }
        if i > 0 && e.start_s < sorted[i - 1].end_s {
            return arg_err(format!(
                "events at {} s and {} s overlap",
                sorted[i - 1].start_s, e.start_s
            ));
        }
    }
    Ok(())
}

/// Smooth step from 1 to `level` centered on `at`, over [`TRANSITION_S`].
fn ramp_down(t: f64, at: f64, level: f64) -> f64 {
    let half = TRANSITION_S / 2.0;
    if t <= at - half {
        1.0
    } else if t >= at + half {
        level
    } else {
        let u = (t - (at - half)) / TRANSITION_S;
        1.0 - (1.0 - level) * 0.5 * (1.0 - (PI * u).cos())
    }
}

/// Amplitude multiplier of one event: 1 outside, `depth` inside.
fn event_gain(e: &ApneaEvent, t: f64) -> f64 {
    let level = e.depth();
    let mid = 0.5 * (e.start_s + e.end_s);
    if t < mid {
        ramp_down(t, e.start_s, level)
    } else {
        ramp_down(-t, -e.end_s, level)
    }
}

fn schedule_gain(schedule: &[ApneaEvent], t: f64) -> f64 {
    schedule
        .iter()
        .filter(|e| t > e.start_s - TRANSITION_S && t < e.end_s + TRANSITION_S)
        .map(|e| event_gain(e, t))
        .product()
}

fn posture_gain(changes: &[PostureChange], t: f64) -> f64 {
    changes
        .iter()
        .map(|p| ramp_down(t, p.time_s, p.amplitude_factor))
        .product()
}

/// Ground-truth displacement of one breathing pattern under a schedule.
///
/// `d(t) = A(t) [sin(2 pi f t + phi0) + h sin(4 pi f t)]`, where `A(t)` drops
/// from the pattern amplitude to `amplitude * residual * effort` inside each
/// event, with raised-cosine transitions centered on the event edges.
pub fn breathing_waveform(
    p: &BreathingPattern,
    schedule: &[ApneaEvent],
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return arg_err("time grid must be strictly increasing");
    }
    validate_schedule(schedule)?;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let shape = (TAU * p.rate_hz * t + p.phase0_rad).sin()
                + p.harmonic_2_fraction * (2.0 * TAU * p.rate_hz * t).sin();
            p.amplitude_m * schedule_gain(schedule, t) * shape
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererTruth {
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub range_bin: usize,
    pub displacement_m: Vec<f64>,
}

/// Everything the simulator knows about a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    /// SHA-256 of the written cube file, filled in when the cube is saved.
    #[serde(default)]
    pub recording_id: Option<String>,
    pub duration_s: f64,
    pub slow_time_rate_hz: f64,
    pub schedule: Vec<ApneaEvent>,
    pub sleep_intervals: Vec<[f64; 2]>,
    #[serde(default)]
    pub posture_changes: Vec<PostureChange>,
    pub scatterers: Vec<ScattererTruth>,
}

impl TruthRecord {
    /// Scheduled events long enough to be scored, sorted by start.
    pub fn scored_events(&self) -> Vec<ApneaEvent> {
        let mut v: Vec<ApneaEvent> =
            self.schedule.iter().filter(|e| e.is_scoreable()).cloned().collect();
        v.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        v
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Range-bin leakage: sinc weights on the nearest bin and two bins either side.
fn range_taps(range_m: f64, bin_size: f64, n_range: usize) -> Vec<(usize, f64)> {
    let pos = range_m / bin_size;
    let center = pos.round() as isize;
    (center - 2..=center + 2)
        .filter(|&b| b >= 0 && (b as usize) < n_range)
        .map(|b| (b as usize, sinc(pos - b as f64)))
        .filter(|&(_, w)| w != 0.0)
        .collect()
}

/// Per-element steering phasor `exp(-j pi k sin(theta))` of a source at
/// azimuth `theta`, so matched weights `w(theta)` recover it coherently.
fn element_phasors(azimuth: f64, k: usize) -> Vec<Complex64> {
    let step = -PI * azimuth.sin();
    (0..k).map(|i| Complex64::from_polar(1.0, step * i as f64)).collect()
}

/// Spatial signature of a point source: `taps x elements` complex weights,
/// laid out `[elem][range]` like one cube frame.
fn point_signature(
    range_m: f64,
    azimuth: f64,
    reflectivity: f64,
    cfg: &RadarConfig,
) -> Vec<(usize, usize, Complex64)> {
    let static_phase = Complex64::from_polar(reflectivity, 4.0 * PI * range_m / cfg.wavelength_m);
    let taps = range_taps(range_m, cfg.range_resolution_m, cfg.n_range_bins);
    let elems = element_phasors(azimuth, cfg.n_virtual());
    let mut out = Vec::with_capacity(taps.len() * elems.len());
    for (k, e) in elems.iter().enumerate() {
        for &(b, w) in &taps {
            out.push((k, b, static_phase * e * w));
        }
    }
    out
}

/// Generates the data cube and the matching truth record for a scene.
pub fn synthesize_cube(plan: &ScenePlan, cfg: &RadarConfig) -> Result<(DataCube, TruthRecord)> {
    plan.validate(cfg)?;
    let n_slow = plan.n_slow(cfg);
    if n_slow == 0 {
        return arg_err("scene is shorter than one slow-time sample");
    }
    let fs = cfg.slow_time_rate_hz;
    let t_grid: Vec<f64> = (0..n_slow).map(|n| n as f64 / fs).collect();

    let mut truths = Vec::with_capacity(plan.scatterers.len());
    for s in &plan.scatterers {
        let base = breathing_waveform(&s.breathing, &plan.schedule, &t_grid)?;
        let d: Vec<f64> = base
            .iter()
            .zip(&t_grid)
            .map(|(v, &t)| s.displacement_gain * posture_gain(&plan.posture_changes, t) * v)
            .collect();
        truths.push(ScattererTruth {
            range_m: s.range_m,
            azimuth_rad: s.azimuth_rad,
            range_bin: (s.range_m / cfg.range_resolution_m).round() as usize,
            displacement_m: d,
        });
    }

    let mut cube = DataCube::zeros(
        n_slow,
        cfg.n_virtual(),
        cfg.n_range_bins,
        fs,
        cfg.range_resolution_m,
        cfg.wavelength_m,
    );
    let frame_len = cube.n_elem * cube.n_range;
    let n_range = cube.n_range;

    let mut static_frame = vec![Complex64::new(0.0, 0.0); frame_len];
    for c in &plan.clutter {
        for (k, b, v) in point_signature(c.range_m, c.azimuth_rad, c.reflectivity, cfg) {
            static_frame[k * n_range + b] += v;
        }
    }
    let signatures: Vec<_> = plan
        .scatterers
        .iter()
        .map(|s| point_signature(s.range_m, s.azimuth_rad, s.reflectivity, cfg))
        .collect();

    let noise = Stream::new(plan.rng_seed, purpose::NOISE);
    let noise_scale = (plan.noise_power / 2.0).sqrt();
    let phase_scale = 4.0 * PI / cfg.wavelength_m;

    for (n, frame) in cube.samples.chunks_exact_mut(frame_len).enumerate() {
        frame.copy_from_slice(&static_frame);
        for (sig, truth) in signatures.iter().zip(&truths) {
            let echo = Complex64::from_polar(1.0, phase_scale * truth.displacement_m[n]);
            for &(k, b, v) in sig {
                frame[k * n_range + b] += v * echo;
            }
        }
        if noise_scale > 0.0 {
            let base = (n * frame_len) as u64;
            for (i, s) in frame.iter_mut().enumerate() {
                let (re, im) = noise.normal_pair(base + i as u64);
                *s += Complex64::new(re * noise_scale, im * noise_scale);
            }
        }
    }

    let truth = TruthRecord {
        recording_id: None,
        duration_s: plan.duration_s,
        slow_time_rate_hz: fs,
        schedule: plan.schedule.clone(),
        sleep_intervals: plan.sleep_intervals.clone(),
        posture_changes: plan.posture_changes.clone(),
        scatterers: truths,
    };
    Ok((cube, truth))
}
