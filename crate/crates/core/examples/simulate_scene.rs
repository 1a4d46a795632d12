//! Load a scene plan from JSON, synthesize the cube and write the cube,
//! truth record and truth events to a directory.
//!
//! cargo run --example simulate_scene -- [scene.json] [out_dir]

use std::fs::File;
use std::path::PathBuf;

use apnea_radar::io;
use apnea_radar::scene_sim::{synthesize_cube, ScenePlan};
use apnea_radar::signal_model::RadarConfig;

fn main() -> apnea_radar::Result<()> {
    let mut args = std::env::args().skip(1);
    let scene = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/scene.json")));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("apnea_scene"));

    let plan: ScenePlan = io::read_json(&scene)?;
    let (cube, mut truth) = synthesize_cube(&plan, &RadarConfig::default())?;
    std::fs::create_dir_all(&out)?;
    let cube_path = out.join("cube.rdc");
    io::save_rdc(&cube_path, &cube)?;
    truth.recording_id = Some(io::file_sha256(&cube_path)?);
    io::write_json(&out.join("truth.json"), &truth)?;
    io::write_truth_events_csv(File::create(out.join("truth_events.csv"))?, &truth)?;

    println!(
        "{} s at {} Hz: {} x {} x {} samples",
        plan.duration_s, cube.slow_time_rate, cube.n_slow, cube.n_elem, cube.n_range
    );
    for s in &truth.scatterers {
        println!("scatterer at {:.3} m (bin {}), {:+.1} deg", s.range_m, s.range_bin, s.azimuth_rad.to_degrees());
    }
    for e in truth.scored_events() {
        println!("{:8} {:6.0}-{:6.0} s  residual {:.2}", e.kind.as_str(), e.start_s, e.end_s, e.residual_fraction);
    }
    println!("recording {}", truth.recording_id.as_deref().unwrap_or("-"));
    println!("written to {}", out.display());
    Ok(())
}
