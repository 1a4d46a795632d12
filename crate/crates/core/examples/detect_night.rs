//! Simulate a two-hour night with 24 events, run both detectors and score
//! them against the schedule.
//!
//! cargo run --release --example detect_night -- [seed]

use std::time::Instant;

use apnea_radar::config::PipelineConfig;
use apnea_radar::detection::Method;
use apnea_radar::evaluation::compare_methods;
use apnea_radar::pipeline::{run_detection, Methods};
use apnea_radar::scene_sim::presets::{synthetic_night, NightSpec};
use apnea_radar::scene_sim::synthesize_cube;
use apnea_radar::signal_model::RadarConfig;

fn main() -> apnea_radar::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let plan = synthetic_night(&NightSpec { seed, ..NightSpec::default() });
    let radar = RadarConfig::default();

    let started = Instant::now();
    let (cube, truth) = synthesize_cube(&plan, &radar)?;
    println!("simulated {} samples in {:.1?}", cube.n_slow, started.elapsed());

    let started = Instant::now();
    let params = PipelineConfig::default();
    let det = run_detection(cube, Some(&truth.sleep_intervals), &params, Methods::BOTH)?;
    println!("detected in {:.1?}", started.elapsed());

    let em = det.events(Method::Em).cloned().unwrap_or_default();
    let abm = det.events(Method::Abm).cloned().unwrap_or_default();
    let c = compare_methods(&truth, &em, &abm, params.count_window_s)?;
    for r in [&c.em, &c.abm] {
        println!(
            "{:>3}: {:2} events  AHI {:5.2} (truth {:5.2})  recall {:.2}  precision {:.2}  window RMS {:.2}/h",
            r.method.to_string(),
            r.matching.n_est,
            r.ahi_est,
            r.ahi_true,
            r.matching.recall,
            r.matching.precision,
            r.rms_error
        );
    }
    println!("\n  truth                  em                  abm");
    for e in truth.scored_events() {
        let hit = |list: &apnea_radar::detection::EventList| {
            list.events
                .iter()
                .find(|d| d.t1 < e.end_s && d.t2 > e.start_s)
                .map_or("      -      ".to_string(), |d| format!("{:6.1}-{:6.1}", d.t1, d.t2))
        };
        println!(
            "{:6.0}-{:6.0} {:8}  {}  {}",
            e.start_s,
            e.end_s,
            e.kind.as_str(),
            hit(&em),
            hit(&abm)
        );
    }
    Ok(())
}
