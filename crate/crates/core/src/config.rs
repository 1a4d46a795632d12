//! Run configuration: a TOML document with radar overrides, pipeline
//! parameters and optional paths. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::{AbmOptions, LabelRule};
use crate::displacement::{Band, PhaseReference, DEFAULT_BAND_HZ, DEFAULT_ENVELOPE_S, DEFAULT_FILTER_ORDER};
use crate::em_gmm::EmOptions;
use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_WINDOW_S;
use crate::signal_model::RadarConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Clutter averaging window `T_c`, seconds.
    pub clutter_window_s: f64,
    pub azimuth_step_deg: f64,
    pub azimuth_max_deg: f64,
    /// Taylor window sidelobe suppression, dB below the main lobe.
    pub taylor_sidelobe_db: f64,
    /// Local maxima below `peak + maxima_threshold_db` are ignored.
    pub maxima_threshold_db: f64,
    pub max_centers: usize,
    /// Minimum peak-to-median ratio of an epoch power image for it to count
    /// as containing a target.
    pub target_contrast_db: f64,
    pub phase_reference: PhaseReference,
    pub envelope_s: f64,
    pub band_hz: [f64; 2],
    pub filter_order: usize,
    pub epoch_s: f64,
    pub hop_s: f64,
    /// Extra signal taken on each side of an epoch before filtering.
    pub epoch_margin_s: f64,
    pub beta: f64,
    pub beta_abm: f64,
    pub abm_baseline_s: [f64; 2],
    pub t_min_s: f64,
    pub merge_gap_s: f64,
    pub eq12_literal: bool,
    pub count_window_s: f64,
    pub em: EmOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            clutter_window_s: 60.0,
            azimuth_step_deg: 1.0,
            azimuth_max_deg: 35.0,
            taylor_sidelobe_db: 25.0,
            maxima_threshold_db: -20.0,
            max_centers: 8,
            target_contrast_db: 10.0,
            phase_reference: PhaseReference::ArcCenter,
            envelope_s: DEFAULT_ENVELOPE_S,
            band_hz: [DEFAULT_BAND_HZ.0, DEFAULT_BAND_HZ.1],
            filter_order: DEFAULT_FILTER_ORDER,
            epoch_s: 60.0,
            hop_s: 30.0,
            epoch_margin_s: 30.0,
            beta: 0.5,
            beta_abm: 0.7,
            abm_baseline_s: [0.0, 120.0],
            t_min_s: 10.0,
            merge_gap_s: 2.0,
            eq12_literal: false,
            count_window_s: DEFAULT_WINDOW_S,
            em: EmOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn band(&self) -> Band {
        Band { f_lo: self.band_hz[0], f_hi: self.band_hz[1], order: self.filter_order }
    }

    pub fn label_rule(&self) -> LabelRule {
        LabelRule { beta: self.beta, eq12_literal: self.eq12_literal }
    }

    pub fn abm_options(&self) -> AbmOptions {
        AbmOptions {
            baseline_window: self.abm_baseline_s,
            beta: self.beta_abm,
            t_min: self.t_min_s,
            ..AbmOptions::default()
        }
    }

    pub fn validate(&self, radar: &RadarConfig) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("pipeline: {m}")));
        let positive = [
            ("clutter_window_s", self.clutter_window_s),
            ("azimuth_step_deg", self.azimuth_step_deg),
            ("azimuth_max_deg", self.azimuth_max_deg),
            ("envelope_s", self.envelope_s),
            ("epoch_s", self.epoch_s),
            ("hop_s", self.hop_s),
            ("t_min_s", self.t_min_s),
            ("count_window_s", self.count_window_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(&format!("{name} must be positive"));
            }
        }
        if self.azimuth_max_deg >= 90.0 {
            return fail("azimuth_max_deg must stay below 90");
        }
        if !(self.maxima_threshold_db < 0.0) || !(self.taylor_sidelobe_db > 0.0) {
            return fail("maxima_threshold_db must be negative and taylor_sidelobe_db positive");
        }
        if self.max_centers == 0 {
            return fail("max_centers must be at least 1");
        }
        let nyquist = radar.slow_time_rate_hz / 2.0;
        if !(self.band_hz[0] > 0.0 && self.band_hz[0] < self.band_hz[1] && self.band_hz[1] < nyquist) {
            return fail("band_hz needs 0 < low < high < slow-time Nyquist");
        }
        if self.filter_order == 0 {
            return fail("filter_order must be at least 1");
        }
        if self.hop_s > self.epoch_s {
            return fail("hop_s cannot exceed epoch_s");
        }
        if !(self.epoch_margin_s >= 0.0) || !(self.merge_gap_s >= 0.0) || !(self.target_contrast_db >= 0.0) {
            return fail("epoch_margin_s, merge_gap_s and target_contrast_db must be nonnegative");
        }
        for (name, b) in [("beta", self.beta), ("beta_abm", self.beta_abm)] {
            if !(b > 0.0 && b < 1.0) {
                return fail(&format!("{name} must lie in (0, 1)"));
            }
        }
        if !(self.abm_baseline_s[1] > self.abm_baseline_s[0]) || self.abm_baseline_s[0] < 0.0 {
            return fail("abm_baseline_s must be an increasing pair of offsets");
        }
        self.em.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub radar: RadarConfig,
    pub pipeline: PipelineConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.pipeline.validate(&self.radar)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
