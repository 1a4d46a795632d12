//! Scoring detections against ground truth: AHI, per-window counts scaled to
//! events per hour, RMS count error and method comparison.

use serde::{Deserialize, Serialize};

use crate::detection::{Event, EventList, Method};
use crate::error::{arg_err, Result};
use crate::scene_sim::TruthRecord;

pub const DEFAULT_WINDOW_S: f64 = 1800.0;

/// Total sleep time in hours.
pub fn total_sleep_hours(sleep_intervals: &[[f64; 2]]) -> f64 {
    sleep_intervals.iter().map(|iv| (iv[1] - iv[0]).max(0.0)).sum::<f64>() / 3600.0
}

fn in_sleep(t: f64, sleep_intervals: &[[f64; 2]]) -> bool {
    sleep_intervals.iter().any(|iv| t >= iv[0] && t < iv[1])
}

/// Events per hour of sleep, counting events by midpoint.
pub fn ahi(events: &[Event], sleep_intervals: &[[f64; 2]]) -> Result<f64> {
    let hours = total_sleep_hours(sleep_intervals);
    if !(hours > 0.0) {
        return arg_err("total sleep time must be positive");
    }
    let n = events.iter().filter(|e| in_sleep(e.midpoint(), sleep_intervals)).count();
    Ok(n as f64 / hours)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowCount {
    pub window_start: f64,
    pub true_per_hour: f64,
    pub est_per_hour: f64,
}

/// Windows of `window` seconds tiled from the first sleep onset; a trailing
/// partial window is dropped.
pub fn window_starts(sleep_intervals: &[[f64; 2]], window: f64) -> Result<Vec<f64>> {
    if !(window > 0.0) {
        return arg_err("window length must be positive");
    }
    let (first, last) = match (sleep_intervals.first(), sleep_intervals.last()) {
        (Some(a), Some(b)) => (a[0], b[1]),
        _ => return Ok(Vec::new()),
    };
    let n = ((last - first) / window + 1e-9).floor().max(0.0) as usize;
    Ok((0..n).map(|i| first + i as f64 * window).collect())
}

/// Per-hour counts in each window: count by midpoint, scaled by
/// `3600 / window` (doubling for 30-minute windows).
pub fn windowed_counts(events: &[Event], sleep_intervals: &[[f64; 2]], window: f64) -> Result<Vec<(f64, f64)>> {
    let starts = window_starts(sleep_intervals, window)?;
    let scale = 3600.0 / window;
    Ok(starts
        .iter()
        .map(|&s| {
            let n = events
                .iter()
                .filter(|e| {
                    let m = e.midpoint();
                    m >= s && m < s + window
                })
                .count();
            (s, n as f64 * scale)
        })
        .collect())
}

pub fn rms_error(true_counts: &[f64], est_counts: &[f64]) -> Result<f64> {
    if true_counts.len() != est_counts.len() {
        return arg_err(format!(
            "count series lengths differ ({} vs {})",
            true_counts.len(),
            est_counts.len()
        ));
    }
    if true_counts.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = true_counts.iter().zip(est_counts).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / true_counts.len() as f64).sqrt())
}

/// Ground-truth events as scored intervals.
pub fn truth_events(truth: &TruthRecord) -> Vec<Event> {
    truth
        .scored_events()
        .iter()
        .map(|e| Event { t1: e.start_s, t2: e.end_s, method: Method::Em })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    pub n_true: usize,
    pub n_est: usize,
    pub matched: usize,
    pub precision: f64,
    pub recall: f64,
}

fn overlap(a: &Event, b: &Event) -> f64 {
    (a.t2.min(b.t2) - a.t1.max(b.t1)).max(0.0)
}

/// Greedy one-to-one matching by overlap; a pair qualifies when the overlap
/// covers at least half of the shorter event.
pub fn match_events(truth: &[Event], est: &[Event]) -> MatchStats {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, e) in est.iter().enumerate() {
            let ov = overlap(t, e);
            if ov > 0.0 && ov >= 0.5 * t.duration().min(e.duration()) {
                pairs.push((ov, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; truth.len()];
    let mut used_e = vec![false; est.len()];
    let mut matched = 0;
    for (_, i, j) in pairs {
        if !used_t[i] && !used_e[j] {
            used_t[i] = true;
            used_e[j] = true;
            matched += 1;
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    MatchStats {
        n_true: truth.len(),
        n_est: est.len(),
        matched,
        precision: ratio(matched, est.len()),
        recall: ratio(matched, truth.len()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub recording_id: Option<String>,
    pub total_sleep_time: f64,
    pub ahi_true: f64,
    pub ahi_est: f64,
    pub ahi_error: f64,
    pub window_counts: Vec<WindowCount>,
    pub rms_error: f64,
    pub matching: MatchStats,
}

pub fn evaluate(truth: &TruthRecord, est: &EventList, method: Method, window: f64) -> Result<EvalReport> {
    let true_ev = truth_events(truth);
    let sleep = &truth.sleep_intervals;
    let ahi_true = ahi(&true_ev, sleep)?;
    let ahi_est = ahi(&est.events, sleep)?;
    let wt = windowed_counts(&true_ev, sleep, window)?;
    let we = windowed_counts(&est.events, sleep, window)?;
    let window_counts: Vec<WindowCount> = wt
        .iter()
        .zip(&we)
        .map(|(&(s, t), &(_, e))| WindowCount { window_start: s, true_per_hour: t, est_per_hour: e })
        .collect();
    let tc: Vec<f64> = window_counts.iter().map(|w| w.true_per_hour).collect();
    let ec: Vec<f64> = window_counts.iter().map(|w| w.est_per_hour).collect();
    Ok(EvalReport {
        method,
        recording_id: truth.recording_id.clone(),
        total_sleep_time: total_sleep_hours(sleep),
        ahi_true,
        ahi_est,
        ahi_error: (ahi_est - ahi_true).abs(),
        window_counts,
        rms_error: rms_error(&tc, &ec)?,
        matching: match_events(&true_ev, &est.events),
    })
}

/// `abm / em`, with equal errors (including both zero) giving 1.
fn error_ratio(abm: f64, em: f64) -> f64 {
    if abm == em {
        1.0
    } else if em == 0.0 {
        f64::INFINITY
    } else {
        abm / em
    }
}

/// Mean per-subject errors of the two methods and their ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorComparison {
    pub em_mean: f64,
    pub abm_mean: f64,
    pub ratio: f64,
}

impl ErrorComparison {
    pub fn from_errors(em: &[f64], abm: &[f64]) -> Result<Self> {
        if em.is_empty() || em.len() != abm.len() {
            return arg_err("error series must be nonempty and of equal length");
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (em_mean, abm_mean) = (mean(em), mean(abm));
        Ok(Self { em_mean, abm_mean, ratio: error_ratio(abm_mean, em_mean) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub em: EvalReport,
    pub abm: EvalReport,
    /// ABM RMS error over EM RMS error.
    pub rms_ratio: f64,
    /// ABM AHI error over EM AHI error.
    pub ahi_error_ratio: f64,
    /// The method with the larger RMS error, if they differ.
    pub worse: Option<Method>,
}

pub fn compare_methods(truth: &TruthRecord, em: &EventList, abm: &EventList, window: f64) -> Result<Comparison> {
    let em = evaluate(truth, em, Method::Em, window)?;
    let abm = evaluate(truth, abm, Method::Abm, window)?;
    let worse = if abm.rms_error > em.rms_error {
        Some(Method::Abm)
    } else if em.rms_error > abm.rms_error {
        Some(Method::Em)
    } else {
        None
    };
    Ok(Comparison {
        rms_ratio: error_ratio(abm.rms_error, em.rms_error),
        ahi_error_ratio: error_ratio(abm.ahi_error, em.ahi_error),
        worse,
        em,
        abm,
    })
}
