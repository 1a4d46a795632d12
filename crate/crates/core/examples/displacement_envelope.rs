//! Chest displacement from the echo phase of one scattering center, its
//! band-passed version and the 5 s RMS envelope, written as CSV.
//!
//! cargo run --example displacement_envelope -- [out_dir]

use std::fs::File;
use std::path::PathBuf;

use apnea_radar::config::PipelineConfig;
use apnea_radar::io::{write_envelope_csv, write_power_image_csv, write_trace_csv};
use apnea_radar::pipeline::FrontEnd;
use apnea_radar::scene_sim::presets::{synthetic_night, NightSpec};
use apnea_radar::scene_sim::synthesize_cube;
use apnea_radar::signal_model::RadarConfig;

fn main() -> apnea_radar::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("apnea_trace"));
    let spec = NightSpec { duration_s: 900.0, n_apnea: 3, n_hypopnea: 1, ..NightSpec::default() };
    let (cube, truth) = synthesize_cube(&synthetic_night(&spec), &RadarConfig::default())?;
    let bin_m = cube.range_bin_size;
    let fe = FrontEnd::new(cube, &PipelineConfig::default())?;

    let (img, set) = fe.scatterers(fe.span([0.0, 900.0])?)?;
    let c = set.centers[0];
    println!("{} centers; strongest at bin {}, {:+.0} deg", set.len(), c.range_bin, fe.grid[c.azimuth_index].to_degrees());

    let all = 0..fe.cube.n_slow;
    let trace = fe.displacement_at(&c, all.clone(), 0)?;
    let env = fe.envelope_at(&c, all, 0, 0)?;
    let planted = &truth.scatterers[0].displacement_m;
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    println!("planted RMS {:.3} mm, recovered RMS {:.3} mm", rms(planted) * 1e3, rms(&trace.d) * 1e3);
    for e in truth.scored_events() {
        let i = ((e.start_s + e.end_s) / 2.0 * env.rate) as usize;
        println!("{:8} at {:4.0} s: envelope {:.3} mm", e.kind.as_str(), e.start_s, env.d_bar[i] * 1e3);
    }

    std::fs::create_dir_all(&out)?;
    write_trace_csv(File::create(out.join("displacement.csv"))?, &trace)?;
    write_envelope_csv(File::create(out.join("envelope.csv"))?, &env)?;
    write_power_image_csv(File::create(out.join("power_image.csv"))?, &img, bin_m)?;
    println!("written to {}", out.display());
    Ok(())
}
