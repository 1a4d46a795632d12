//! Scoring event lists against a truth record: AHI, per-window counts,
//! their RMS error and the EM-versus-ABM error ratio.
//!
//! cargo run --example evaluate_methods

use apnea_radar::detection::{Event, EventList, Method};
use apnea_radar::evaluation::compare_methods;
use apnea_radar::scene_sim::{ApneaEvent, EventKind, TruthRecord};

fn main() -> apnea_radar::Result<()> {
    let schedule: Vec<ApneaEvent> = (0..30)
        .map(|i| {
            let start = 120.0 + 230.0 * i as f64;
            let kind = if i % 5 == 4 { EventKind::Hypopnea } else { EventKind::Apnea };
            let residual = if kind == EventKind::Apnea { 0.05 } else { 0.5 };
            ApneaEvent { start_s: start, end_s: start + 25.0, kind, residual_fraction: residual, effort_modulation: 1.0 }
        })
        .collect();
    let truth = TruthRecord {
        recording_id: None,
        duration_s: 7200.0,
        slow_time_rate_hz: 10.0,
        schedule: schedule.clone(),
        sleep_intervals: vec![[0.0, 7200.0]],
        posture_changes: Vec::new(),
        scatterers: Vec::new(),
    };

    // EM finds the apneas; ABM also finds them but adds spurious events late in the night.
    let em = EventList {
        events: schedule
            .iter()
            .filter(|e| e.kind == EventKind::Apnea)
            .map(|e| Event { t1: e.start_s + 2.0, t2: e.end_s - 1.0, method: Method::Em })
            .collect(),
    };
    let mut abm = EventList { events: em.events.iter().map(|e| Event { method: Method::Abm, ..*e }).collect() };
    abm.events.extend((0..12).map(|i| {
        let t1 = 5450.0 + 140.0 * i as f64;
        Event { t1, t2: t1 + 12.0, method: Method::Abm }
    }));
    abm.events.sort_by(|a, b| a.t1.total_cmp(&b.t1));

    let c = compare_methods(&truth, &em, &abm, 1800.0)?;
    println!("window   truth   em     abm   (events/h)");
    for (e, a) in c.em.window_counts.iter().zip(&c.abm.window_counts) {
        println!("{:5.0} s  {:5.1}  {:5.1}  {:5.1}", e.window_start, e.true_per_hour, e.est_per_hour, a.est_per_hour);
    }
    for r in [&c.em, &c.abm] {
        println!(
            "{}: AHI {:.1} (truth {:.1}), RMS error {:.2}/h, recall {:.2}, precision {:.2}",
            r.method, r.ahi_est, r.ahi_true, r.rms_error, r.matching.recall, r.matching.precision
        );
    }
    println!("ABM/EM error ratio {:.2}", c.rms_ratio);
    Ok(())
}
