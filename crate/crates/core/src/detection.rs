//! From envelopes to apnea-hypopnea intervals.
//!
//! The EM route labels each scatterer's envelope per epoch from its mixture
//! fit, fuses scatterers by a `mu_2`-weighted vote, and keeps only time
//! covered by two agreeing overlapping epochs for at least `T_min`. The
//! amplitude-baseline route thresholds a power-weighted mean envelope
//! against its own early-night median.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::displacement::EnvelopeTrace;
use crate::em_gmm::{e_step, EmFit};
use crate::error::{arg_err, Error, Result};

pub const DEFAULT_EPOCH_S: f64 = 60.0;
pub const DEFAULT_HOP_S: f64 = 30.0;
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_T_MIN_S: f64 = 10.0;
pub const DEFAULT_MERGE_GAP_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Em,
    Abm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Em => "em",
            Method::Abm => "abm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "em" => Ok(Method::Em),
            "abm" => Ok(Method::Abm),
            other => Err(Error::Format(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochGrid {
    pub epoch_length: f64,
    pub hop: f64,
    pub epochs: Vec<[f64; 2]>,
    /// Indices of sleep intervals too short to hold a single epoch.
    pub skipped_intervals: Vec<usize>,
}

/// Epochs of `t_ep` seconds every `hop` seconds inside each sleep interval;
/// trailing partial epochs are dropped.
pub fn make_epochs(sleep_intervals: &[[f64; 2]], t_ep: f64, hop: f64) -> Result<EpochGrid> {
    if !(t_ep > 0.0) || !(hop > 0.0) {
        return arg_err("epoch length and hop must be positive");
    }
    let mut epochs = Vec::new();
    let mut skipped = Vec::new();
    let mut prev_end = f64::NEG_INFINITY;
    for (i, iv) in sleep_intervals.iter().enumerate() {
        if !(iv[1] > iv[0]) || iv[0] < prev_end {
            return arg_err(format!("sleep interval {i} is empty, unsorted or overlapping"));
        }
        prev_end = iv[1];
        let n = ((iv[1] - iv[0] - t_ep) / hop + 1e-9).floor();
        if n < 0.0 {
            log::warn!("sleep interval {i} ({:.1} s) is shorter than one epoch", iv[1] - iv[0]);
            skipped.push(i);
            continue;
        }
        for j in 0..=n as usize {
            let start = iv[0] + j as f64 * hop;
            epochs.push([start, start + t_ep]);
        }
    }
    Ok(EpochGrid { epoch_length: t_ep, hop, epochs, skipped_intervals: skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "index")]
pub enum Scope {
    Scatterer(usize),
    Fused,
}

/// Binary labels on a stretch of the recording's slow-time grid starting at
/// sample `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTrack {
    pub start: usize,
    pub labels: Vec<u8>,
    pub scope: Scope,
}

/// Parameters of the per-scatterer label rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRule {
    pub beta: f64,
    /// Use the inequality as printed (`gamma_1 <= gamma_2`) instead of the
    /// low-component-dominates reading.
    pub eq12_literal: bool,
}

impl Default for LabelRule {
    fn default() -> Self {
        Self { beta: DEFAULT_BETA, eq12_literal: false }
    }
}

impl LabelRule {
    /// Decision for one sample given its responsibilities and the fit's
    /// mean ratio `mu_1 / mu_2`.
    pub fn decide(&self, gamma1: f64, gamma2: f64, ratio: f64) -> bool {
        let dominant = if self.eq12_literal { gamma1 <= gamma2 } else { gamma1 >= gamma2 };
        dominant && ratio <= self.beta
    }
}

/// Labels one scatterer's envelope within an epoch. `start` places the
/// envelope on the recording grid. Degenerate fits label nothing.
pub fn label_scatterer(env: &EnvelopeTrace, start: usize, fit: &EmFit, rule: LabelRule) -> LabelTrack {
    let scope = Scope::Scatterer(env.source);
    let p = &fit.params;
    if fit.degenerate || !(p.mu[1] > 0.0) {
        return LabelTrack { start, labels: vec![0; env.len()], scope };
    }
    let ratio = p.mu[0] / p.mu[1];
    let gamma = e_step(&env.d_bar, p);
    let labels = gamma[0]
        .iter()
        .zip(&gamma[1])
        .map(|(&g1, &g2)| u8::from(rule.decide(g1, g2, ratio)))
        .collect();
    LabelTrack { start, labels, scope }
}

/// Weighted vote: 1 where `sum_m l_m mu_2,m > (sum_m mu_2,m) / 2`.
pub fn fuse_labels(tracks: &[LabelTrack], fits: &[EmFit]) -> Result<LabelTrack> {
    let weights: Vec<f64> = fits.iter().map(|f| f.params.mu[1]).collect();
    fuse_weighted(tracks, &weights)
}

pub fn fuse_weighted(tracks: &[LabelTrack], mu2: &[f64]) -> Result<LabelTrack> {
    let first = match tracks.first() {
        Some(t) => t,
        None => return arg_err("no label tracks to fuse"),
    };
    if mu2.len() != tracks.len() {
        return arg_err("need one weight per label track");
    }
    if tracks.iter().any(|t| t.start != first.start || t.labels.len() != first.labels.len()) {
        return arg_err("label tracks are on different time grids");
    }
    let half: f64 = mu2.iter().sum::<f64>() / 2.0;
    let labels = (0..first.labels.len())
        .map(|i| {
            let vote: f64 = tracks.iter().zip(mu2).map(|(t, w)| f64::from(t.labels[i]) * w).sum();
            u8::from(vote > half)
        })
        .collect();
    Ok(LabelTrack { start: first.start, labels, scope: Scope::Fused })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t1: f64,
    pub t2: f64,
    pub method: Method,
}

impl Event {
    pub fn duration(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t1 + self.t2)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventList {
    pub events: Vec<Event>,
}

impl EventList {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Time-grid description shared by the run-extraction helpers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub rate: f64,
    pub len: usize,
}

impl Grid {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.rate
    }
}

/// Maximal runs of `flag`, joined across gaps shorter than `merge_gap`
/// seconds, kept when at least `t_min` long. A run over samples `a..=b`
/// spans `[t(a), t(b) + 1/rate]`.
fn runs_to_events(flag: &[bool], grid: Grid, t_min: f64, merge_gap: f64, method: Method) -> EventList {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < flag.len() {
        if flag[i] {
            let a = i;
            while i < flag.len() && flag[i] {
                i += 1;
            }
            runs.push((a, i));
        } else {
            i += 1;
        }
    }
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some(last) if ((r.0 - last.1) as f64) / grid.rate < merge_gap => last.1 = r.1,
            _ => merged.push(r),
        }
    }
    let events = merged
        .into_iter()
        .filter(|(a, b)| (b - a) as f64 / grid.rate >= t_min - 1e-9)
        .map(|(a, b)| Event { t1: grid.time(a), t2: grid.time(b), method })
        .collect();
    EventList { events }
}

/// Sums the fused labels of overlapping epochs on the recording grid and
/// emits regions where the sum reaches 2.
pub fn consensus_events(per_epoch: &[LabelTrack], grid: Grid, t_min: f64, merge_gap: f64) -> Result<EventList> {
    let mut sum = vec![0u8; grid.len];
    for t in per_epoch {
        if t.start + t.labels.len() > grid.len {
            return arg_err("epoch labels extend past the recording");
        }
        for (s, l) in sum[t.start..].iter_mut().zip(&t.labels) {
            *s = s.saturating_add(*l);
        }
    }
    let flag: Vec<bool> = sum.iter().map(|&s| s >= 2).collect();
    Ok(runs_to_events(&flag, grid, t_min, merge_gap, Method::Em))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbmOptions {
    /// Baseline window relative to the start of the first sleep interval.
    pub baseline_window: [f64; 2],
    pub beta: f64,
    pub t_min: f64,
    /// Baselines below this amplitude (meters) mean there is no breathing to
    /// compare against.
    pub min_baseline: f64,
}

impl Default for AbmOptions {
    fn default() -> Self {
        Self { baseline_window: [0.0, 120.0], beta: 0.7, t_min: DEFAULT_T_MIN_S, min_baseline: 1e-6 }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Power-weighted mean of envelopes sampled on one grid.
pub fn weighted_envelope(envs: &[EnvelopeTrace], weights: &[f64]) -> Result<Vec<f64>> {
    let first = match envs.first() {
        Some(e) => e,
        None => return arg_err("no envelopes to combine"),
    };
    if weights.len() != envs.len() || envs.iter().any(|e| e.len() != first.len()) {
        return arg_err("envelopes and weights must line up");
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return arg_err("envelope weights must have a positive sum");
    }
    Ok((0..first.len())
        .map(|i| envs.iter().zip(weights).map(|(e, w)| e.d_bar[i] * w).sum::<f64>() / total)
        .collect())
}

/// Amplitude-baseline detection on the combined envelope. Samples outside
/// the sleep intervals never belong to an event.
pub fn abm_detect(
    envs: &[EnvelopeTrace],
    weights: &[f64],
    sleep_intervals: &[[f64; 2]],
    opts: AbmOptions,
) -> Result<EventList> {
    let combined = weighted_envelope(envs, weights)?;
    let grid = Grid { t0: envs[0].t0, rate: envs[0].rate, len: combined.len() };
    abm_detect_combined(&combined, grid, sleep_intervals, opts)
}

pub fn abm_detect_combined(
    combined: &[f64],
    grid: Grid,
    sleep_intervals: &[[f64; 2]],
    opts: AbmOptions,
) -> Result<EventList> {
    if !(opts.beta > 0.0 && opts.beta < 1.0) {
        return arg_err("ABM beta must lie in (0, 1)");
    }
    let sleep_start = sleep_intervals.first().map(|iv| iv[0]).unwrap_or(grid.t0);
    let (b0, b1) = (sleep_start + opts.baseline_window[0], sleep_start + opts.baseline_window[1]);
    let in_sleep = |t: f64| sleep_intervals.iter().any(|iv| t >= iv[0] && t < iv[1]);
    let mut window: Vec<f64> = (0..grid.len)
        .filter(|&i| {
            let t = grid.time(i);
            t >= b0 && t < b1 && in_sleep(t)
        })
        .map(|i| combined[i])
        .collect();
    if window.is_empty() {
        return Err(Error::BaselineFailure("baseline window holds no sleep samples".into()));
    }
    let baseline = median(&mut window);
    if !(baseline >= opts.min_baseline) {
        return Err(Error::BaselineFailure(format!(
            "baseline amplitude {baseline:.3e} m is below the {:.1e} m floor",
            opts.min_baseline
        )));
    }
    let threshold = opts.beta * baseline;
    let flag: Vec<bool> = (0..grid.len)
        .map(|i| combined[i] < threshold && in_sleep(grid.time(i)))
        .collect();
    Ok(runs_to_events(&flag, grid, opts.t_min, 0.0, Method::Abm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em_gmm::GmmParams;

    fn fit_with(mu: [f64; 2]) -> EmFit {
        EmFit {
            params: GmmParams { pi: [0.5, 0.5], mu, sigma2: [1e-10, 1e-10] },
            responsibilities: [vec![], vec![]],
            log_likelihood: 0.0,
            n_iter: 1,
            converged: true,
            degenerate: false,
            history: vec![],
        }
    }

    fn env(values: Vec<f64>) -> EnvelopeTrace {
        EnvelopeTrace { t0: 0.0, rate: 1.0, d_bar: values, source: 0 }
    }

    #[test]
    fn epochs_tile_intervals() {
        let g = make_epochs(&[[0.0, 300.0]], 60.0, 30.0).unwrap();
        let starts: Vec<f64> = g.epochs.iter().map(|e| e[0]).collect();
        assert_eq!(starts, vec![0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0, 210.0, 240.0]);
        let g = make_epochs(&[[0.0, 59.0]], 60.0, 30.0).unwrap();
        assert!(g.epochs.is_empty());
        assert_eq!(g.skipped_intervals, vec![0]);
        let g = make_epochs(&[[0.0, 120.0], [500.0, 620.0]], 60.0, 30.0).unwrap();
        assert_eq!(g.epochs.len(), 6);
    }

    #[test]
    fn clear_apnea_regime_is_labeled() {
        let fit = fit_with([0.3e-3, 1.0e-3]);
        let t = label_scatterer(&env(vec![0.3e-3, 1.0e-3]), 0, &fit, LabelRule::default());
        assert_eq!(t.labels, vec![1, 0]);
    }

    #[test]
    fn ratio_gate_blocks_close_means() {
        let fit = fit_with([0.8e-3, 1.0e-3]);
        let t = label_scatterer(&env(vec![0.8e-3, 0.5e-3, 1.0e-3]), 0, &fit, LabelRule::default());
        assert!(t.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn literal_mode_flips_dominance() {
        let fit = fit_with([0.3e-3, 1.0e-3]);
        let rule = LabelRule { eq12_literal: true, ..LabelRule::default() };
        let t = label_scatterer(&env(vec![0.3e-3, 1.0e-3]), 0, &fit, rule);
        assert_eq!(t.labels, vec![0, 1]);
    }

    fn track(labels: Vec<u8>) -> LabelTrack {
        LabelTrack { start: 0, labels, scope: Scope::Scatterer(0) }
    }

    #[test]
    fn weighted_vote_arithmetic() {
        let f = fuse_weighted(&[track(vec![1]), track(vec![1]), track(vec![0])], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(f.labels, vec![1]);
        let f = fuse_weighted(&[track(vec![1]), track(vec![0]), track(vec![0])], &[3.0, 1.0, 1.0]).unwrap();
        assert_eq!(f.labels, vec![1]);
        let single = fuse_weighted(&[track(vec![0, 1, 1, 0])], &[2.0]).unwrap();
        assert_eq!(single.labels, vec![0, 1, 1, 0]);
    }

    #[test]
    fn fusion_rejects_grid_mismatch() {
        let a = track(vec![1, 0]);
        let b = LabelTrack { start: 1, ..track(vec![1, 0]) };
        assert!(fuse_weighted(&[a, b], &[1.0, 1.0]).is_err());
    }

    fn grid(len: usize) -> Grid {
        Grid { t0: 0.0, rate: 1.0, len }
    }

    fn epoch_track(start: usize, len: usize, on: std::ops::Range<usize>) -> LabelTrack {
        let labels = (start..start + len).map(|i| u8::from(on.contains(&i))).collect();
        LabelTrack { start, labels, scope: Scope::Fused }
    }

    #[test]
    fn doubly_labeled_region_becomes_event() {
        let tracks = [epoch_track(0, 60, 35..55), epoch_track(30, 60, 35..55)];
        let ev = consensus_events(&tracks, grid(90), 10.0, 2.0).unwrap();
        assert_eq!(ev.events, vec![Event { t1: 35.0, t2: 55.0, method: Method::Em }]);
    }

    #[test]
    fn single_epoch_label_is_not_enough() {
        let tracks = [epoch_track(0, 60, 35..55), epoch_track(30, 60, 0..0)];
        assert!(consensus_events(&tracks, grid(90), 10.0, 2.0).unwrap().is_empty());
    }

    #[test]
    fn short_region_fails_duration_rule() {
        let tracks = [epoch_track(0, 60, 35..44), epoch_track(30, 60, 35..44)];
        assert!(consensus_events(&tracks, grid(90), 10.0, 2.0).unwrap().is_empty());
    }

    fn abm_env(drop_to: f64, from: usize, to: usize) -> EnvelopeTrace {
        env((0..400).map(|i| if (from..to).contains(&i) { drop_to } else { 1e-3 }).collect())
    }

    #[test]
    fn abm_threshold_crossings() {
        let sleep = [[0.0, 400.0]];
        let half = AbmOptions { beta: 0.5, ..AbmOptions::default() };
        let ev = abm_detect(&[abm_env(0.3e-3, 200, 215)], &[1.0], &sleep, half).unwrap();
        assert_eq!(ev.events, vec![Event { t1: 200.0, t2: 215.0, method: Method::Abm }]);
        assert!(abm_detect(&[abm_env(0.6e-3, 200, 215)], &[1.0], &sleep, half).unwrap().is_empty());
        let seventy = AbmOptions { beta: 0.7, ..AbmOptions::default() };
        let ev = abm_detect(&[abm_env(0.6e-3, 200, 212)], &[1.0], &sleep, seventy).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev.events[0].duration() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn abm_needs_breathing_baseline() {
        let flat = env(vec![1e-9; 400]);
        assert!(matches!(
            abm_detect(&[flat], &[1.0], &[[0.0, 400.0]], AbmOptions::default()),
            Err(Error::BaselineFailure(_))
        ));
    }

    #[test]
    fn method_round_trips_through_text() {
        assert_eq!("abm".parse::<Method>().unwrap(), Method::Abm);
        assert_eq!(Method::Em.to_string(), "em");
        assert!("xyz".parse::<Method>().is_err());
    }
}
