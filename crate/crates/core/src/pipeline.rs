//! End-to-end detection on a range-transformed cube.
//!
//! Both methods share the front end: element-domain clutter suppression,
//! power imaging, scattering-center extraction and phase displacement at
//! each center. The EM method then works epoch by epoch; ABM works on the
//! whole night at once.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::detection::{
    abm_detect, consensus_events, fuse_labels, label_scatterer, make_epochs, EventList, Grid, LabelTrack, Method,
};
use crate::displacement::butterworth::SosFilter;
use crate::displacement::{
    bandpass_with, envelope, fit_arc_center, phase_displacement, DisplacementTrace, EnvelopeTrace, PhaseReference,
};
use crate::em_gmm::{fit, EmFit, GmmParams};
use crate::error::{Error, Result};
use crate::imaging::{
    azimuth_grid, beam_series, epoch_power_image, epoch_samples, extract_scatterers, suppress_clutter_cube,
    PowerImage, ScattererSet, ScatteringCenter,
};
use crate::signal_model::{taylor_window, DataCube};

/// Residual power below this fraction of the raw beamformed power is treated
/// as numerical leftovers of suppressed clutter.
const RESIDUAL_FLOOR_REL: f64 = 1e-10;

/// Which detectors to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Methods {
    pub em: bool,
    pub abm: bool,
}

impl Methods {
    pub const EM: Methods = Methods { em: true, abm: false };
    pub const ABM: Methods = Methods { em: false, abm: true };
    pub const BOTH: Methods = Methods { em: true, abm: true };
}

/// Shared front-end state for one recording.
pub struct FrontEnd {
    /// Clutter-suppressed cube.
    pub cube: DataCube,
    /// The cube before suppression, kept when displacement is read from it.
    pub raw: Option<DataCube>,
    pub taylor: Vec<f64>,
    pub grid: Vec<f64>,
    pub filter: SosFilter,
    pub residual_floor: f64,
    pub params: PipelineConfig,
}

impl FrontEnd {
    /// Takes ownership of the cube and suppresses clutter in place.
    pub fn new(mut cube: DataCube, params: &PipelineConfig) -> Result<Self> {
        cube.validate()?;
        if cube.n_slow == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let taylor = taylor_window(cube.n_elem, params.taylor_sidelobe_db)?;
        let grid = azimuth_grid(params.azimuth_step_deg, params.azimuth_max_deg)?;
        let filter = SosFilter::bandpass(params.filter_order, params.band_hz[0], params.band_hz[1], cube.slow_time_rate)?;
        let raw_power = cube.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / cube.samples.len() as f64;
        let gain: f64 = taylor.iter().sum();
        let residual_floor = RESIDUAL_FLOOR_REL * raw_power * gain * gain;
        let raw = (params.phase_reference == PhaseReference::ArcCenter).then(|| cube.clone());
        suppress_clutter_cube(&mut cube, params.clutter_window_s)?;
        Ok(Self { cube, raw, taylor, grid, filter, residual_floor, params: params.clone() })
    }

    pub fn grid(&self) -> Grid {
        Grid { t0: self.cube.t0, rate: self.cube.slow_time_rate, len: self.cube.n_slow }
    }

    pub fn span(&self, interval: [f64; 2]) -> Result<Range<usize>> {
        epoch_samples(self.cube.t0, self.cube.slow_time_rate, self.cube.n_slow, interval)
    }

    /// Power image over `span` and its scattering centers; an image without
    /// enough contrast or energy yields no centers.
    pub fn scatterers(&self, span: Range<usize>) -> Result<(PowerImage, ScattererSet)> {
        let img = epoch_power_image(&self.cube, &self.taylor, &self.grid, span)?;
        let peak = img.peak();
        let contrast = 10f64.powf(self.params.target_contrast_db / 10.0);
        if !(peak > self.residual_floor) || peak < contrast * img.median() {
            return Ok((img, ScattererSet::default()));
        }
        let set = extract_scatterers(&img, self.params.maxima_threshold_db, self.params.max_centers)?;
        Ok((img, set))
    }

    /// Band-passed displacement at one center over `range`.
    pub fn displacement_at(&self, c: &ScatteringCenter, range: Range<usize>, source: usize) -> Result<DisplacementTrace> {
        let theta = self.grid[c.azimuth_index];
        let series = match &self.raw {
            Some(raw) => {
                let mut s = beam_series(raw, &self.taylor, theta, c.range_bin, range.clone())?;
                if let Some(center) = fit_arc_center(&s) {
                    s.iter_mut().for_each(|z| *z -= center);
                }
                s
            }
            None => beam_series(&self.cube, &self.taylor, theta, c.range_bin, range.clone())?,
        };
        let t0 = self.cube.time_of(range.start);
        let d0 = phase_displacement(&series, self.cube.wavelength, t0, self.cube.slow_time_rate, source)?;
        Ok(bandpass_with(&d0, &self.filter, self.params.band_hz[0]))
    }

    /// Envelope at one center over `span`, computed on `span` widened by
    /// `margin` samples on each side and cropped back.
    pub fn envelope_at(&self, c: &ScatteringCenter, span: Range<usize>, margin: usize, source: usize) -> Result<EnvelopeTrace> {
        let lo = span.start.saturating_sub(margin);
        let hi = (span.end + margin).min(self.cube.n_slow);
        let d = self.displacement_at(c, lo..hi, source)?;
        let mut env = envelope(&d, self.params.envelope_s)?;
        env.d_bar = env.d_bar[span.start - lo..span.end - lo].to_vec();
        env.t0 = self.cube.time_of(span.start);
        Ok(env)
    }
}

/// Envelopes of all scattering centers of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochEnvelopes {
    pub interval: [f64; 2],
    pub start: usize,
    pub centers: Vec<ScatteringCenter>,
    pub envelopes: Vec<EnvelopeTrace>,
}

impl EpochEnvelopes {
    pub fn scaled(&self, alpha: f64) -> Self {
        Self { envelopes: self.envelopes.iter().map(|e| e.scaled(alpha)).collect(), ..self.clone() }
    }
}

pub fn epoch_envelopes(fe: &FrontEnd, sleep_intervals: &[[f64; 2]]) -> Result<Vec<EpochEnvelopes>> {
    let p = &fe.params;
    let epochs = make_epochs(sleep_intervals, p.epoch_s, p.hop_s)?;
    let margin = (p.epoch_margin_s * fe.cube.slow_time_rate).round() as usize;
    let mut out = Vec::with_capacity(epochs.epochs.len());
    for &interval in &epochs.epochs {
        let span = fe.span(interval)?;
        let (_, set) = fe.scatterers(span.clone())?;
        let envelopes = set
            .centers
            .iter()
            .enumerate()
            .map(|(m, c)| fe.envelope_at(c, span.clone(), margin, m))
            .collect::<Result<Vec<_>>>()?;
        out.push(EpochEnvelopes { interval, start: span.start, centers: set.centers, envelopes });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererDiag {
    pub range_bin: usize,
    pub azimuth_deg: f64,
    pub power: f64,
    pub params: GmmParams,
    pub degenerate: bool,
    pub converged: bool,
    pub n_iter: usize,
    pub label_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochDiag {
    pub start_s: f64,
    pub end_s: f64,
    pub scatterers: Vec<ScattererDiag>,
    pub fused_label_fraction: f64,
}

fn fraction(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        0.0
    } else {
        labels.iter().map(|&l| f64::from(l)).sum::<f64>() / labels.len() as f64
    }
}

/// Labels, fusion and consensus over precomputed epoch envelopes.
pub fn em_events(
    epochs: &[EpochEnvelopes],
    params: &PipelineConfig,
    grid: Grid,
    azimuth_grid: &[f64],
) -> Result<(EventList, Vec<EpochDiag>)> {
    let rule = params.label_rule();
    let mut fused_tracks = Vec::with_capacity(epochs.len());
    let mut diags = Vec::with_capacity(epochs.len());
    for ep in epochs {
        let len = ep.envelopes.first().map(|e| e.len()).unwrap_or(0);
        let mut tracks: Vec<LabelTrack> = Vec::new();
        let mut fits: Vec<EmFit> = Vec::new();
        let mut sdiag = Vec::new();
        for (c, env) in ep.centers.iter().zip(&ep.envelopes) {
            let f = fit(&env.d_bar, &params.em)?;
            let t = label_scatterer(env, ep.start, &f, rule);
            sdiag.push(ScattererDiag {
                range_bin: c.range_bin,
                azimuth_deg: azimuth_grid.get(c.azimuth_index).map_or(f64::NAN, |a| a.to_degrees()),
                power: c.power,
                params: f.params,
                degenerate: f.degenerate,
                converged: f.converged,
                n_iter: f.n_iter,
                label_fraction: fraction(&t.labels),
            });
            tracks.push(t);
            fits.push(f);
        }
        let fused = if tracks.is_empty() {
            None
        } else {
            Some(fuse_labels(&tracks, &fits)?)
        };
        diags.push(EpochDiag {
            start_s: ep.interval[0],
            end_s: ep.interval[1],
            scatterers: sdiag,
            fused_label_fraction: fused.as_ref().map_or(0.0, |f| fraction(&f.labels)),
        });
        if let Some(f) = fused {
            debug_assert_eq!(f.labels.len(), len);
            fused_tracks.push(f);
        }
    }
    let events = consensus_events(&fused_tracks, grid, params.t_min_s, params.merge_gap_s)?;
    Ok((events, diags))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmDiag {
    pub centers: Vec<ScatteringCenter>,
    pub error: Option<String>,
}

/// ABM on the whole sleep span: centers from one power image, envelopes
/// over the full recording weighted by center power.
pub fn abm_events(fe: &FrontEnd, sleep_intervals: &[[f64; 2]]) -> Result<(EventList, AbmDiag)> {
    let (first, last) = match (sleep_intervals.first(), sleep_intervals.last()) {
        (Some(a), Some(b)) => (a[0], b[1]),
        _ => return Err(Error::Argument("no sleep intervals".into())),
    };
    let (_, set) = fe.scatterers(fe.span([first, last])?)?;
    if set.is_empty() {
        return Err(Error::NoTarget);
    }
    let full = 0..fe.cube.n_slow;
    let envs = set
        .centers
        .iter()
        .enumerate()
        .map(|(m, c)| fe.envelope_at(c, full.clone(), 0, m))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = set.centers.iter().map(|c| c.power).collect();
    let diag = AbmDiag { centers: set.centers.clone(), error: None };
    let events = abm_detect(&envs, &weights, sleep_intervals, fe.params.abm_options())?;
    Ok((events, diag))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub recording_id: Option<String>,
    pub n_slow: usize,
    pub slow_time_rate_hz: f64,
    pub sleep_intervals: Vec<[f64; 2]>,
    pub epochs: Vec<EpochDiag>,
    pub abm: Option<AbmDiag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub em: Option<EventList>,
    pub abm: Option<EventList>,
    pub diagnostics: Diagnostics,
}

impl Detection {
    pub fn events(&self, method: Method) -> Option<&EventList> {
        match method {
            Method::Em => self.em.as_ref(),
            Method::Abm => self.abm.as_ref(),
        }
    }
}

/// Runs the requested detectors. A recording whose epochs all lack a
/// target fails with [`Error::NoTarget`]; an ABM baseline failure is
/// recorded in the diagnostics when EM also ran, and returned otherwise.
pub fn run_detection(
    cube: DataCube,
    sleep_intervals: Option<&[[f64; 2]]>,
    params: &PipelineConfig,
    methods: Methods,
) -> Result<Detection> {
    let fe = FrontEnd::new(cube, params)?;
    let whole = [[fe.cube.t0, fe.cube.t0 + fe.cube.duration()]];
    let sleep = sleep_intervals.unwrap_or(&whole).to_vec();
    let mut diagnostics = Diagnostics {
        recording_id: None,
        n_slow: fe.cube.n_slow,
        slow_time_rate_hz: fe.cube.slow_time_rate,
        sleep_intervals: sleep.clone(),
        epochs: Vec::new(),
        abm: None,
    };
    let mut em = None;
    if methods.em {
        let epochs = epoch_envelopes(&fe, &sleep)?;
        if epochs.iter().all(|e| e.centers.is_empty()) {
            return Err(Error::NoTarget);
        }
        let (events, diags) = em_events(&epochs, params, fe.grid(), &fe.grid)?;
        diagnostics.epochs = diags;
        em = Some(events);
    }
    let mut abm = None;
    if methods.abm {
        match abm_events(&fe, &sleep) {
            Ok((events, d)) => {
                diagnostics.abm = Some(d);
                abm = Some(events);
            }
            Err(e @ Error::BaselineFailure(_)) if methods.em => {
                log::warn!("ABM skipped: {e}");
                diagnostics.abm = Some(AbmDiag { centers: Vec::new(), error: Some(e.to_string()) });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Detection { em, abm, diagnostics })
}
