//! Two-component Gaussian mixture fitted by EM to an envelope-like sample
//! set, with the apnea labeling rule applied to the result.
//!
//! cargo run --example em_fit -- [histogram.csv]

use std::fs::File;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use apnea_radar::detection::LabelRule;
use apnea_radar::em_gmm::{e_step, fit, EmOptions};
use apnea_radar::io::write_histogram_csv;

fn main() -> apnea_radar::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let breathing = Normal::new(1.0e-3, 0.1e-3).unwrap();
    let apnea = Normal::new(0.2e-3, 0.02e-3).unwrap();
    let mut x: Vec<f64> = (0..450).map(|_| breathing.sample(&mut rng)).collect();
    x.extend((0..150).map(|_| apnea.sample(&mut rng)));

    let f = fit(&x, &EmOptions::default())?;
    let p = &f.params;
    println!("converged {} after {} iterations, log-likelihood {:.2}", f.converged, f.n_iter, f.log_likelihood);
    for k in 0..2 {
        println!("  component {}: pi {:.3}  mu {:.4} mm  sigma {:.4} mm", k + 1, p.pi[k], p.mu[k] * 1e3, p.sigma2[k].sqrt() * 1e3);
    }
    println!("  mu1/mu2 = {:.3}", p.ratio());

    let rule = LabelRule::default();
    let gamma = e_step(&x, p);
    let labeled = (0..x.len()).filter(|&i| rule.decide(gamma[0][i], gamma[1][i], p.ratio())).count();
    println!("{labeled} of {} samples labeled apnea (150 planted)", x.len());

    if let Some(path) = std::env::args().nth(1) {
        write_histogram_csv(File::create(&path)?, &x, &f, 40)?;
        println!("histogram written to {path}");
    }
    Ok(())
}
