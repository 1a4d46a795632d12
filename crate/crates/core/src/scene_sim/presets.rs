//! Ready-made scene plans: a sleeper lying in front of the radar with a
//! randomized but reproducible event schedule.

use serde::{Deserialize, Serialize};

use super::{ApneaEvent, BreathingPattern, ClutterSource, EventKind, PostureChange, ScenePlan, Scatterer};
use crate::rng::{purpose, Stream};

/// Parameters of [`synthetic_night`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NightSpec {
    pub duration_s: f64,
    pub n_apnea: usize,
    pub n_hypopnea: usize,
    pub apnea_residual: f64,
    pub hypopnea_residual: f64,
    pub event_duration_s: [f64; 2],
    /// Time kept free of events at both ends of the recording.
    pub edge_margin_s: f64,
    /// Per-element, per-sample SNR of the strongest scatterer.
    pub snr_db: f64,
    pub n_scatterers: usize,
    pub breathing_amplitude_m: f64,
    pub breathing_rate_hz: f64,
    pub static_clutter: bool,
    pub posture_change: Option<PostureChange>,
    pub seed: u64,
}

impl Default for NightSpec {
    fn default() -> Self {
        Self {
            duration_s: 7200.0,
            n_apnea: 21,
            n_hypopnea: 3,
            apnea_residual: 0.05,
            hypopnea_residual: 0.5,
            event_duration_s: [15.0, 45.0],
            edge_margin_s: 120.0,
            snr_db: 20.0,
            n_scatterers: 3,
            breathing_amplitude_m: 1.0e-3,
            breathing_rate_hz: 0.25,
            static_clutter: true,
            posture_change: None,
            seed: 1,
        }
    }
}

/// Body regions as (range m, azimuth deg, reflectivity, displacement gain).
const BODY: [(f64, f64, f64, f64); 4] = [
    (0.86, -12.0, 1.0, 1.0),
    (0.95, 2.0, 0.8, 0.8),
    (1.04, 15.0, 0.6, 0.6),
    (1.12, -2.0, 0.5, 0.5),
];

/// A night with `n_apnea + n_hypopnea` events, one placed at random inside
/// each equal slot of the usable span, kinds interleaved deterministically.
pub fn synthetic_night(spec: &NightSpec) -> ScenePlan {
    let rng = Stream::new(spec.seed, purpose::SCHEDULE);
    let n = spec.n_apnea + spec.n_hypopnea;
    let usable = spec.duration_s - 2.0 * spec.edge_margin_s;
    let slot = if n > 0 { usable / n as f64 } else { usable };
    let mut kinds: Vec<EventKind> = Vec::with_capacity(n);
    for i in 0..n {
        // spread hypopneas evenly among apneas
        let h_before = (i * spec.n_hypopnea) / n.max(1);
        let h_after = ((i + 1) * spec.n_hypopnea) / n.max(1);
        kinds.push(if h_after > h_before { EventKind::Hypopnea } else { EventKind::Apnea });
    }
    let schedule = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let (u1, u2) = rng.uniform_pair(i as u64);
            let [lo, hi] = spec.event_duration_s;
            let dur = (lo + (hi - lo) * u1).round();
            let free = (slot - dur - 2.0 * super::TRANSITION_S).max(0.0);
            let start = (spec.edge_margin_s + i as f64 * slot + super::TRANSITION_S + free * u2).round();
            let residual = match kind {
                EventKind::Apnea => spec.apnea_residual,
                EventKind::Hypopnea => spec.hypopnea_residual,
            };
            ApneaEvent { start_s: start, end_s: start + dur, kind, residual_fraction: residual, effort_modulation: 1.0 }
        })
        .collect();

    let scatterers = BODY
        .iter()
        .take(spec.n_scatterers.clamp(1, BODY.len()))
        .enumerate()
        .map(|(m, &(r, az, refl, gain))| Scatterer {
            range_m: r,
            azimuth_rad: az.to_radians(),
            reflectivity: refl,
            breathing: BreathingPattern {
                rate_hz: spec.breathing_rate_hz,
                amplitude_m: spec.breathing_amplitude_m,
                harmonic_2_fraction: 0.15,
                phase0_rad: 0.4 * m as f64,
            },
            displacement_gain: gain,
        })
        .collect();
    let clutter = if spec.static_clutter {
        vec![
            ClutterSource { range_m: 0.35, azimuth_rad: 25f64.to_radians(), reflectivity: 3.0 },
            ClutterSource { range_m: 1.30, azimuth_rad: -28f64.to_radians(), reflectivity: 2.0 },
        ]
    } else {
        Vec::new()
    };
    ScenePlan {
        scatterers,
        schedule,
        clutter,
        noise_power: 10f64.powf(-spec.snr_db / 10.0),
        duration_s: spec.duration_s,
        sleep_intervals: vec![[0.0, spec.duration_s]],
        rng_seed: spec.seed,
        posture_changes: spec.posture_change.iter().cloned().collect(),
    }
}
