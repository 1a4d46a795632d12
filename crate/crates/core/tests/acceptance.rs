//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use apnea_radar::cli::{self, events_file, report_file, DetectArgs, MethodArg, SimulateArgs};
use apnea_radar::config::{PipelineConfig, RunConfig};
use apnea_radar::detection::{consensus_events, fuse_weighted, Event, Grid, LabelRule, LabelTrack, Method, Scope};
use apnea_radar::displacement::{bandpass, envelope, Band, DisplacementTrace};
use apnea_radar::em_gmm::{e_step, fit, EmOptions, GmmParams};
use apnea_radar::evaluation::{compare_methods, evaluate, match_events};
use apnea_radar::imaging::suppress_clutter_cube;
use apnea_radar::pipeline::{em_events, epoch_envelopes, run_detection, FrontEnd, Methods};
use apnea_radar::scene_sim::presets::{synthetic_night, NightSpec};
use apnea_radar::scene_sim::{
    synthesize_cube, BreathingPattern, ClutterSource, EventKind, PostureChange, ScenePlan, Scatterer,
};
use apnea_radar::signal_model::RadarConfig;

struct Outcome {
    pass: bool,
    detail: String,
}

fn single_scatterer(azimuth_deg: f64, noise_power: f64, duration_s: f64) -> ScenePlan {
    ScenePlan {
        scatterers: vec![Scatterer {
            range_m: 0.9,
            azimuth_rad: azimuth_deg.to_radians(),
            reflectivity: 1.0,
            breathing: BreathingPattern { rate_hz: 0.25, amplitude_m: 1e-3, harmonic_2_fraction: 0.0, phase0_rad: 0.0 },
            displacement_gain: 1.0,
        }],
        schedule: vec![],
        clutter: vec![],
        noise_power,
        duration_s,
        sleep_intervals: vec![[0.0, duration_s]],
        rng_seed: 7,
        posture_changes: vec![],
    }
}

fn nrmse(est: &[f64], truth: &[f64]) -> f64 {
    let e: f64 = est.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    let r: f64 = truth.iter().map(|b| b * b).sum();
    (e / r).sqrt()
}

/// Displacement as the detector extracts it, at the strongest scattering
/// center, against the planted waveform through the same band-pass;
/// settling edges excluded.
fn round_trip_error(noise_power: f64) -> f64 {
    let plan = single_scatterer(0.0, noise_power, 600.0);
    let (cube, truth) = synthesize_cube(&plan, &RadarConfig::default()).unwrap();
    let n = cube.n_slow;
    let fe = FrontEnd::new(cube, &PipelineConfig::default()).unwrap();
    let (_, set) = fe.scatterers(0..n).unwrap();
    let est = fe.displacement_at(&set.centers[0], 0..n, 0).unwrap();
    let st = &truth.scatterers[0];
    let planted = bandpass(&DisplacementTrace::new(0.0, 10.0, st.displacement_m.clone(), 0), Band::default()).unwrap();
    let settle = 300;
    nrmse(&est.d[settle..n - settle], &planted.d[settle..n - settle])
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let clean = round_trip_error(0.0);
    let elapsed = started.elapsed().as_secs_f64();
    let noisy = round_trip_error(0.01);
    Outcome {
        pass: clean < 0.01 && noisy < 0.05 && elapsed < 10.0,
        detail: format!("NRMSE noiseless {clean:.2e}, 20 dB {noisy:.2e}; 10-min run {elapsed:.2} s"),
    }
}

fn criterion_2() -> Outcome {
    let radar = RadarConfig::default();
    let params = PipelineConfig::default();
    let mut hits = 0;
    let mut found = Vec::new();
    for az in [-30.0, -10.0, 0.0, 15.0, 30.0] {
        let (cube, _) = synthesize_cube(&single_scatterer(az, 0.0, 120.0), &radar).unwrap();
        let fe = FrontEnd::new(cube, &params).unwrap();
        let (_, set) = fe.scatterers(fe.span([0.0, 120.0]).unwrap()).unwrap();
        let est = set.centers.first().map_or(f64::NAN, |c| fe.grid[c.azimuth_index].to_degrees());
        if (est - az).abs() <= params.azimuth_step_deg + 1e-9 {
            hits += 1;
        }
        found.push(format!("{az}->{est:.0}"));
    }
    Outcome { pass: hits == 5, detail: format!("{hits}/5 within one grid step ({})", found.join(", ")) }
}

fn criterion_3() -> Outcome {
    let (pi, mu, sd) = ([0.4, 0.6], [0.2e-3, 1.0e-3], [0.02e-3, 0.1e-3]);
    let mut successes = 0;
    let mut monotone = true;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = [Normal::new(mu[0], sd[0]).unwrap(), Normal::new(mu[1], sd[1]).unwrap()];
        let x: Vec<f64> = (0..600)
            .map(|_| if rng.gen::<f64>() < pi[0] { comps[0].sample(&mut rng) } else { comps[1].sample(&mut rng) })
            .collect();
        let f = fit(&x, &EmOptions::default()).unwrap();
        monotone &= f.history.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs());
        let p = f.params;
        let ok = (0..2).all(|k| (p.mu[k] - mu[k]).abs() <= 0.05 * mu[k] && (p.pi[k] - pi[k]).abs() <= 0.05);
        successes += usize::from(ok);
    }
    Outcome {
        pass: successes >= 95 && monotone,
        detail: format!("{successes}/100 recovered, log-likelihood monotone in all runs: {monotone}"),
    }
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let plan = synthetic_night(&NightSpec::default());
    let (cube, truth) = synthesize_cube(&plan, &RadarConfig::default()).unwrap();
    let params = PipelineConfig::default();
    let det = run_detection(cube, Some(&truth.sleep_intervals), &params, Methods::EM).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let events = det.em.unwrap();
    let r = evaluate(&truth, &events, Method::Em, params.count_window_s).unwrap();
    let per_kind = |kind: EventKind| {
        let list: Vec<Event> = truth
            .scored_events()
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| Event { t1: e.start_s, t2: e.end_s, method: Method::Em })
            .collect();
        let m = match_events(&list, &events.events);
        format!("{}/{}", m.matched, list.len())
    };
    let m = r.matching;
    Outcome {
        pass: m.recall >= 0.85 && m.precision >= 0.85 && (r.ahi_est - r.ahi_true).abs() <= 3.0 && elapsed < 300.0,
        detail: format!(
            "recall {:.3}, precision {:.3}, AHI {:.2} vs {:.2}; apneas {}, hypopneas {}; {:.1} s",
            m.recall,
            m.precision,
            r.ahi_est,
            r.ahi_true,
            per_kind(EventKind::Apnea),
            per_kind(EventKind::Hypopnea),
            elapsed
        ),
    }
}

fn criterion_5() -> Outcome {
    let params = PipelineConfig::default();
    let (mut em_sum, mut abm_sum) = (0.0, 0.0);
    let mut rows = Vec::new();
    for i in 0..10u64 {
        let contaminated = i % 2 == 1;
        let spec = NightSpec {
            duration_s: 3600.0,
            n_apnea: 10,
            n_hypopnea: 2,
            seed: 100 + i,
            posture_change: contaminated.then_some(PostureChange { time_s: 1800.0, amplitude_factor: 0.6 }),
            ..NightSpec::default()
        };
        let (cube, truth) = synthesize_cube(&synthetic_night(&spec), &RadarConfig::default()).unwrap();
        let det = run_detection(cube, Some(&truth.sleep_intervals), &params, Methods::BOTH).unwrap();
        let c = compare_methods(&truth, det.em.as_ref().unwrap(), det.abm.as_ref().unwrap(), params.count_window_s)
            .unwrap();
        em_sum += c.em.rms_error;
        abm_sum += c.abm.rms_error;
        rows.push(format!("{:.1}/{:.1}", c.em.rms_error, c.abm.rms_error));
    }
    let (em, abm) = (em_sum / 10.0, abm_sum / 10.0);
    Outcome {
        pass: em <= abm,
        detail: format!("mean RMS em {em:.2}/h vs abm {abm:.2}/h (per scene em/abm: {})", rows.join(" ")),
    }
}

fn all_patterns(m: usize) -> Vec<Vec<u8>> {
    (0..1u32 << m).map(|bits| (0..m).map(|k| ((bits >> k) & 1) as u8).collect()).collect()
}

/// Independent run extraction: sum-reaches-2 flags, gaps under `gap`
/// samples merged, runs of at least `t_min` samples kept.
fn oracle_events(sum: &[u8], gap: usize, t_min: usize) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for i in 0..=sum.len() {
        let on = i < sum.len() && sum[i] >= 2;
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                runs.push((a, i));
                start = None;
            }
            _ => {}
        }
    }
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        if let Some(last) = merged.last_mut() {
            if r.0 - last.1 < gap {
                last.1 = r.1;
                continue;
            }
        }
        merged.push(r);
    }
    merged.into_iter().filter(|(a, b)| b - a >= t_min).collect()
}

fn criterion_6() -> Outcome {
    let mut checks = 0usize;
    let mut failures = Vec::new();

    // Labeling gate over a grid of responsibilities and mean ratios.
    let rule = LabelRule::default();
    for gi in 0..=20 {
        let g1 = gi as f64 / 20.0;
        for ri in 0..=40 {
            let ratio = ri as f64 / 40.0;
            let want = g1 >= 1.0 - g1 && ratio <= 0.5;
            checks += 1;
            if rule.decide(g1, 1.0 - g1, ratio) != want {
                failures.push(format!("gate g1={g1} ratio={ratio}"));
            }
        }
    }

    // Weighted vote over every label pattern for up to three scatterers.
    let weights = [vec![1.0], vec![1.0, 1.0], vec![2.0, 1.0], vec![1.0, 1.0, 1.0], vec![3.0, 1.0, 1.0], vec![1.0, 2.0, 4.0]];
    for w in &weights {
        for pattern in all_patterns(w.len()) {
            let tracks: Vec<LabelTrack> = pattern
                .iter()
                .enumerate()
                .map(|(m, &l)| LabelTrack { start: 0, labels: vec![l], scope: Scope::Scatterer(m) })
                .collect();
            let fused = fuse_weighted(&tracks, w).unwrap().labels[0];
            let vote: f64 = pattern.iter().zip(w).map(|(&l, x)| f64::from(l) * x).sum();
            let want = u8::from(vote > w.iter().sum::<f64>() / 2.0);
            checks += 1;
            if fused != want {
                failures.push(format!("vote {pattern:?} w={w:?}"));
            }
        }
    }

    // Sum-reaches-2 consensus over every half-epoch labeling of five
    // overlapping epochs, plus sub-interval shapes, at 1 sample per second.
    let grid = Grid { t0: 0.0, rate: 1.0, len: 180 };
    let shapes: [(usize, usize); 6] = [(0, 30), (30, 60), (0, 60), (20, 45), (25, 33), (0, 0)];
    let mut patterns = 0usize;
    let mut choose = vec![0usize; 5];
    loop {
        let tracks: Vec<LabelTrack> = (0..5)
            .map(|e| {
                let (a, b) = shapes[choose[e]];
                LabelTrack {
                    start: e * 30,
                    labels: (0..60).map(|i| u8::from(i >= a && i < b)).collect(),
                    scope: Scope::Fused,
                }
            })
            .collect();
        let mut sum = vec![0u8; 180];
        for t in &tracks {
            for (i, l) in t.labels.iter().enumerate() {
                sum[t.start + i] += l;
            }
        }
        let want = oracle_events(&sum, 2, 10);
        let mut shuffled = tracks.clone();
        shuffled.reverse();
        for order in [&tracks, &shuffled] {
            let got: Vec<(usize, usize)> = consensus_events(order, grid, 10.0, 2.0)
                .unwrap()
                .events
                .iter()
                .map(|e| (e.t1 as usize, e.t2 as usize))
                .collect();
            checks += 1;
            if got != want {
                failures.push(format!("consensus {choose:?}"));
            }
        }
        patterns += 1;
        let mut k = 0;
        while k < 5 {
            choose[k] += 1;
            if choose[k] < shapes.len() {
                break;
            }
            choose[k] = 0;
            k += 1;
        }
        if k == 5 {
            break;
        }
    }

    // Duration rule: a doubly labeled run of n seconds is an event iff n >= 10.
    for n in 1..=30usize {
        let labels: Vec<u8> = (0..60).map(|i| u8::from((10..10 + n).contains(&i))).collect();
        let tracks = [
            LabelTrack { start: 0, labels: labels.clone(), scope: Scope::Fused },
            LabelTrack { start: 0, labels, scope: Scope::Fused },
        ];
        let ev = consensus_events(&tracks, Grid { t0: 0.0, rate: 1.0, len: 60 }, 10.0, 2.0).unwrap();
        checks += 1;
        if ev.len() != usize::from(n >= 10) {
            failures.push(format!("duration {n}"));
        }
    }

    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{checks} cases ({patterns} five-epoch patterns), {} mismatches{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(", first: {f}"))
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // EM scale equivariance through labeling, fusion and consensus.
    let spec = NightSpec { duration_s: 1200.0, n_apnea: 3, n_hypopnea: 1, seed: 11, ..NightSpec::default() };
    let (cube, truth) = synthesize_cube(&synthetic_night(&spec), &RadarConfig::default()).unwrap();
    let params = PipelineConfig::default();
    let fe = FrontEnd::new(cube, &params).unwrap();
    let epochs = epoch_envelopes(&fe, &truth.sleep_intervals).unwrap();
    let lists: Vec<Vec<Event>> = [0.1, 1.0, 10.0]
        .iter()
        .map(|&a| {
            let scaled: Vec<_> = epochs.iter().map(|e| e.scaled(a)).collect();
            em_events(&scaled, &params, fe.grid(), &fe.grid).unwrap().0.events
        })
        .collect();
    let same = lists.windows(2).all(|w| w[0] == w[1]);
    pass &= same && !lists[1].is_empty();
    notes.push(format!("scale 0.1/1/10 identical: {same} ({} events)", lists[1].len()));

    // Static clutter suppression.
    let mut plan = single_scatterer(0.0, 0.0, 300.0);
    plan.scatterers.clear();
    plan.clutter = vec![
        ClutterSource { range_m: 0.5, azimuth_rad: 0.3, reflectivity: 5.0 },
        ClutterSource { range_m: 1.1, azimuth_rad: -0.2, reflectivity: 2.0 },
    ];
    let (mut cube, _) = synthesize_cube(&plan, &RadarConfig::default()).unwrap();
    let before: f64 = cube.samples.iter().map(|z| z.norm_sqr()).sum();
    suppress_clutter_cube(&mut cube, 60.0).unwrap();
    let after: f64 = cube.samples.iter().map(|z| z.norm_sqr()).sum();
    let db = if after == 0.0 { f64::INFINITY } else { 10.0 * (before / after).log10() };
    pass &= db >= 120.0;
    notes.push(format!("clutter suppression {db:.1} dB"));

    // Envelope against brute-force window sums.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d: Vec<f64> = (0..3000).map(|_| rng.gen_range(-2e-3..2e-3)).collect();
    let env = envelope(&DisplacementTrace::new(0.0, 10.0, d.clone(), 0), 5.0).unwrap();
    let mut worst = 0.0f64;
    for i in 0..d.len() {
        let lo = i.saturating_sub(25);
        let hi = (i + 25).min(d.len());
        let mut s = 0.0;
        for v in &d[lo..hi] {
            s += v * v;
        }
        let want = (s / (hi - lo) as f64).sqrt();
        worst = worst.max((env.d_bar[i] - want).abs() / want);
    }
    pass &= worst <= 1e-12;
    notes.push(format!("envelope rel. error {worst:.1e}"));

    // Responsibilities sum to one.
    let mut worst_sum = 0.0f64;
    for _ in 0..10_000 {
        let p = GmmParams {
            pi: {
                let a = rng.gen_range(0.01..0.99);
                [a, 1.0 - a]
            },
            mu: [rng.gen_range(0.0..1e-3), rng.gen_range(0.0..2e-3)],
            sigma2: [rng.gen_range(1e-12..1e-7), rng.gen_range(1e-12..1e-7)],
        };
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1e-3..4e-3)).collect();
        let g = e_step(&x, &p);
        for i in 0..x.len() {
            worst_sum = worst_sum.max((g[0][i] + g[1][i] - 1.0).abs());
        }
    }
    pass &= worst_sum <= 1e-9;
    notes.push(format!("max |sum gamma - 1| {worst_sum:.1e}"));

    Outcome { pass, detail: notes.join("; ") }
}

fn run_cli_chain(dir: &Path, scene: &Path, cfg: &RunConfig) {
    let sim = dir.join("sim");
    cli::simulate(&SimulateArgs { scene: scene.to_path_buf(), seed: Some(42), out: sim.clone() }, cfg).unwrap();
    let det = dir.join("det");
    let args = DetectArgs {
        cube: sim.join(cli::CUBE_FILE),
        method: MethodArg::Both,
        truth: Some(sim.join(cli::TRUTH_FILE)),
        out: det.clone(),
    };
    cli::detect(&args, cfg).unwrap();
    let files: Vec<_> = [Method::Em, Method::Abm].iter().map(|&m| det.join(events_file(m))).collect();
    cli::evaluate_files(&files, &sim.join(cli::TRUTH_FILE), cfg, &dir.join("eval")).unwrap();
}

fn criterion_8() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let spec = NightSpec { duration_s: 1200.0, n_apnea: 3, n_hypopnea: 1, ..NightSpec::default() };
    let scene = root.path().join("scene.json");
    std::fs::write(&scene, serde_json::to_string_pretty(&synthetic_night(&spec)).unwrap()).unwrap();
    let cfg = RunConfig::default();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    run_cli_chain(&a, &scene, &cfg);
    run_cli_chain(&b, &scene, &cfg);
    let mut files = vec!["sim/cube.rdc".to_string(), "sim/truth.json".to_string(), "det/diagnostics.json".to_string()];
    for m in [Method::Em, Method::Abm] {
        files.push(format!("det/{}", events_file(m)));
        files.push(format!("eval/{}", report_file(m)));
    }
    files.push("eval/comparison.json".to_string());
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .collect();
    Outcome {
        pass: differing.is_empty(),
        detail: format!("{} artifacts compared, differing: {differing:?}", files.len()),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("displacement round trip", criterion_1),
        ("beamformer azimuth", criterion_2),
        ("EM recovery", criterion_3),
        ("synthetic night, EM detector", criterion_4),
        ("EM vs ABM windowed-count error", criterion_5),
        ("rule fidelity enumeration", criterion_6),
        ("numerical invariants", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
