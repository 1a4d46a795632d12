//! Beamforming, static-clutter suppression, epoch power images and
//! scattering-center extraction.
//!
//! Two routes produce the same power image. The direct route materializes
//! the complex image series `I_0(t, r, theta)` ([`beamform`]), removes the
//! trailing mean ([`suppress_clutter`]) and averages `|I_c|^2`
//! ([`power_image`]). The night-scale route uses linearity: clutter
//! suppression commutes with beamforming, so it is applied once per element
//! in place ([`suppress_clutter_cube`]) and each epoch's image is read off a
//! per-range-bin spatial covariance ([`epoch_power_image`]).

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::signal_model::DataCube;

/// `w_k(theta) = exp(-j pi k sin(theta))`.
pub fn steering_weights(theta: f64, k: usize) -> Vec<Complex64> {
    let step = -PI * theta.sin();
    (0..k).map(|i| Complex64::from_polar(1.0, step * i as f64)).collect()
}

/// Uniform azimuth grid `-max..=max` in `step` increments, both in degrees.
pub fn azimuth_grid(step_deg: f64, max_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0) || !(max_deg >= 0.0) || max_deg >= 90.0 {
        return arg_err("azimuth grid needs step > 0 and 0 <= max < 90 degrees");
    }
    let n = (max_deg / step_deg + 1e-9).floor() as i64;
    Ok((-n..=n).map(|i| (i as f64 * step_deg).to_radians()).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return arg_err("azimuth grid is empty");
    }
    if grid.iter().any(|t| !(t.abs() < PI / 2.0)) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return arg_err("azimuth grid must be strictly increasing within (-pi/2, pi/2)");
    }
    Ok(())
}

/// Combined per-element weights `conj(w_k(theta)) * c_k`.
fn beam_coefficients(theta: f64, taylor: &[f64]) -> Vec<Complex64> {
    steering_weights(theta, taylor.len())
        .into_iter()
        .zip(taylor)
        .map(|(w, c)| w.conj() * c)
        .collect()
}

/// Complex radar image over slow time, `[slow][range][azimuth]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarImageSeries {
    pub values: Vec<Complex64>,
    pub n_slow: usize,
    pub n_range: usize,
    pub azimuth_grid: Vec<f64>,
    pub t0: f64,
    pub slow_time_rate: f64,
}

impl RadarImageSeries {
    pub fn n_az(&self) -> usize {
        self.azimuth_grid.len()
    }

    #[inline]
    pub fn index(&self, slow: usize, range: usize, az: usize) -> usize {
        (slow * self.n_range + range) * self.n_az() + az
    }

    #[inline]
    pub fn get(&self, slow: usize, range: usize, az: usize) -> Complex64 {
        self.values[self.index(slow, range, az)]
    }

    pub fn series(&self, range: usize, az: usize) -> Vec<Complex64> {
        (0..self.n_slow).map(|s| self.get(s, range, az)).collect()
    }
}

/// `I_0(t, r, theta) = sum_k conj(w_k(theta)) c_k s'_k(t, r)`.
pub fn beamform(cube: &DataCube, taylor: &[f64], azimuth_grid: &[f64]) -> Result<RadarImageSeries> {
    if taylor.len() != cube.n_elem {
        return arg_err(format!(
            "taylor window has {} coefficients, cube has {} elements",
            taylor.len(),
            cube.n_elem
        ));
    }
    check_grid(azimuth_grid)?;
    let coeffs: Vec<Vec<Complex64>> =
        azimuth_grid.iter().map(|&th| beam_coefficients(th, taylor)).collect();
    let n_az = azimuth_grid.len();
    let mut values = vec![Complex64::new(0.0, 0.0); cube.n_slow * cube.n_range * n_az];
    for s in 0..cube.n_slow {
        for r in 0..cube.n_range {
            for (a, w) in coeffs.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, wk) in w.iter().enumerate() {
                    acc += wk * cube.get(s, k, r);
                }
                values[(s * cube.n_range + r) * n_az + a] = acc;
            }
        }
    }
    Ok(RadarImageSeries {
        values,
        n_slow: cube.n_slow,
        n_range: cube.n_range,
        azimuth_grid: azimuth_grid.to_vec(),
        t0: cube.t0,
        slow_time_rate: cube.slow_time_rate,
    })
}

/// Number of samples in a clutter window of `t_c` seconds.
pub fn clutter_window(t_c: f64, rate: f64) -> Result<usize> {
    if !(t_c > 0.0) {
        return arg_err("clutter window T_c must be positive");
    }
    Ok(((t_c * rate).round() as usize).max(1))
}

/// Subtracts the mean over the trailing `window` samples (inclusive of the
/// current one) from each sample; the first samples use the expanding window
/// of what is available.
///
/// The running sum is recomputed from scratch once per window so rounding
/// drift stays at the level of a single window sum.
pub fn subtract_trailing_mean(x: &mut [Complex64], window: usize) {
    let window = window.max(1);
    let orig = x.to_vec();
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..orig.len() {
        if n >= window {
            sum -= orig[n - window];
        }
        sum += orig[n];
        if (n + 1) % window == 0 {
            sum = orig[n + 1 - window..=n].iter().sum();
        }
        let count = (n + 1).min(window) as f64;
        x[n] = orig[n] - sum / count;
    }
}

/// `I_c(t) = I_0(t) - mean of I_0 over (t - T_c, t]`.
pub fn suppress_clutter(img: &RadarImageSeries, t_c: f64) -> Result<RadarImageSeries> {
    if img.n_slow == 0 || img.values.is_empty() {
        return arg_err("cannot suppress clutter in an empty image series");
    }
    let window = clutter_window(t_c, img.slow_time_rate)?;
    let mut out = img.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); img.n_slow];
    for r in 0..img.n_range {
        for a in 0..img.n_az() {
            for (s, b) in buf.iter_mut().enumerate() {
                *b = img.get(s, r, a);
            }
            subtract_trailing_mean(&mut buf, window);
            for (s, b) in buf.iter().enumerate() {
                let i = out.index(s, r, a);
                out.values[i] = *b;
            }
        }
    }
    Ok(out)
}

/// Element-domain clutter suppression, applied in place. Equivalent to
/// [`suppress_clutter`] after beamforming because both are linear.
pub fn suppress_clutter_cube(cube: &mut DataCube, t_c: f64) -> Result<()> {
    if cube.n_slow == 0 {
        return arg_err("cannot suppress clutter in an empty cube");
    }
    let window = clutter_window(t_c, cube.slow_time_rate)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); cube.n_slow];
    for k in 0..cube.n_elem {
        for r in 0..cube.n_range {
            for (s, b) in buf.iter_mut().enumerate() {
                *b = cube.get(s, k, r);
            }
            subtract_trailing_mean(&mut buf, window);
            for (s, b) in buf.iter().enumerate() {
                let i = cube.index(s, k, r);
                cube.samples[i] = *b;
            }
        }
    }
    Ok(())
}

/// Time-averaged power `|I_c|^2` over one epoch, `[range][azimuth]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerImage {
    pub values: Vec<f64>,
    pub n_range: usize,
    pub azimuth_grid: Vec<f64>,
}

impl PowerImage {
    pub fn n_az(&self) -> usize {
        self.azimuth_grid.len()
    }

    #[inline]
    pub fn get(&self, range: usize, az: usize) -> f64 {
        self.values[range * self.n_az() + az]
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            0.0
        } else if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

/// Slow-time sample range `[t_a, t_b)` of an epoch, checked against `n_slow`.
pub fn epoch_samples(t0: f64, rate: f64, n_slow: usize, epoch: [f64; 2]) -> Result<Range<usize>> {
    if !(epoch[1] > epoch[0]) {
        return arg_err("epoch end must follow its start");
    }
    let a = ((epoch[0] - t0) * rate).round();
    let b = ((epoch[1] - t0) * rate).round();
    if a < 0.0 || b > n_slow as f64 || b <= a {
        return arg_err(format!("epoch [{}, {}] s lies outside the series", epoch[0], epoch[1]));
    }
    Ok(a as usize..b as usize)
}

/// `I_p(r, theta) = mean over the epoch of |I_c(t, r, theta)|^2`.
pub fn power_image(img: &RadarImageSeries, epoch: [f64; 2]) -> Result<PowerImage> {
    let span = epoch_samples(img.t0, img.slow_time_rate, img.n_slow, epoch)?;
    let n_az = img.n_az();
    let mut values = vec![0.0; img.n_range * n_az];
    for s in span.clone() {
        for (i, v) in values.iter_mut().enumerate() {
            *v += img.values[s * img.n_range * n_az + i].norm_sqr();
        }
    }
    let n = span.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(PowerImage { values, n_range: img.n_range, azimuth_grid: img.azimuth_grid.clone() })
}

/// Epoch power image straight from an (already clutter-suppressed) cube,
/// through the windowed spatial covariance of each range bin.
pub fn epoch_power_image(
    cube: &DataCube,
    taylor: &[f64],
    azimuth_grid: &[f64],
    span: Range<usize>,
) -> Result<PowerImage> {
    if taylor.len() != cube.n_elem {
        return arg_err("taylor window length differs from the cube's element count");
    }
    check_grid(azimuth_grid)?;
    if span.is_empty() || span.end > cube.n_slow {
        return arg_err("epoch span lies outside the cube");
    }
    let k = cube.n_elem;
    let coeffs: Vec<Vec<Complex64>> = azimuth_grid.iter().map(|&th| beam_coefficients(th, taylor)).collect();
    let n = span.len() as f64;
    let mut values = vec![0.0; cube.n_range * azimuth_grid.len()];
    let mut cov = vec![Complex64::new(0.0, 0.0); k * k];
    for r in 0..cube.n_range {
        cov.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for s in span.clone() {
            let frame = cube.frame(s);
            for i in 0..k {
                let si = frame[i * cube.n_range + r];
                for j in i..k {
                    cov[i * k + j] += si * frame[j * cube.n_range + r].conj();
                }
            }
        }
        for (a, w) in coeffs.iter().enumerate() {
            // w^H-weighted quadratic form over the upper triangle
            let mut p = 0.0;
            for i in 0..k {
                p += w[i].norm_sqr() * cov[i * k + i].re;
                for j in i + 1..k {
                    p += 2.0 * (w[i] * w[j].conj() * cov[i * k + j]).re;
                }
            }
            values[r * azimuth_grid.len() + a] = (p / n).max(0.0);
        }
    }
    Ok(PowerImage { values, n_range: cube.n_range, azimuth_grid: azimuth_grid.to_vec() })
}

/// Beamformed slow-time series at one range bin and azimuth.
pub fn beam_series(
    cube: &DataCube,
    taylor: &[f64],
    theta: f64,
    range_bin: usize,
    span: Range<usize>,
) -> Result<Vec<Complex64>> {
    if taylor.len() != cube.n_elem || range_bin >= cube.n_range || span.end > cube.n_slow {
        return Err(Error::Config("beam series request does not fit the cube".into()));
    }
    let w = beam_coefficients(theta, taylor);
    Ok(span
        .map(|s| {
            let frame = cube.frame(s);
            w.iter()
                .enumerate()
                .map(|(k, wk)| wk * frame[k * cube.n_range + range_bin])
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCenter {
    pub range_bin: usize,
    pub azimuth_index: usize,
    pub power: f64,
}

/// Scattering centers in descending power order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScattererSet {
    pub centers: Vec<ScatteringCenter>,
}

impl ScattererSet {
    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }
}

/// Strict 8-neighborhood local maxima at or above `peak * 10^(db/10)`,
/// strongest first, at most `max_centers`. An empty set means no target.
pub fn extract_scatterers(p: &PowerImage, rel_threshold_db: f64, max_centers: usize) -> Result<ScattererSet> {
    if p.values.is_empty() || p.n_range == 0 || p.n_az() == 0 {
        return arg_err("power image is empty");
    }
    let peak = p.peak();
    if !(peak > 0.0) {
        return Ok(ScattererSet::default());
    }
    let floor = peak * 10f64.powf(rel_threshold_db / 10.0);
    let (nr, na) = (p.n_range as isize, p.n_az() as isize);
    let mut centers = Vec::new();
    for r in 0..nr {
        for a in 0..na {
            let v = p.get(r as usize, a as usize);
            if v < floor {
                continue;
            }
            let mut is_max = true;
            'nb: for dr in -1..=1 {
                for da in -1..=1 {
                    let (rr, aa) = (r + dr, a + da);
                    if (dr, da) == (0, 0) || rr < 0 || aa < 0 || rr >= nr || aa >= na {
                        continue;
                    }
                    if p.get(rr as usize, aa as usize) >= v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                centers.push(ScatteringCenter { range_bin: r as usize, azimuth_index: a as usize, power: v });
            }
        }
    }
    centers.sort_by(|x, y| {
        y.power
            .total_cmp(&x.power)
            .then(x.range_bin.cmp(&y.range_bin))
            .then(x.azimuth_index.cmp(&y.azimuth_index))
    });
    centers.truncate(max_centers);
    Ok(ScattererSet { centers })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<Complex64>, n_slow: usize, rate: f64) -> RadarImageSeries {
        RadarImageSeries { values, n_slow, n_range: 1, azimuth_grid: vec![0.0], t0: 0.0, slow_time_rate: rate }
    }

    #[test]
    fn steering_closed_forms() {
        assert!(steering_weights(0.0, 5).iter().all(|w| (w - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let w = steering_weights(30f64.to_radians(), 2);
        assert!((w[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        for th in [-1.2, -0.3, 0.7, 1.4] {
            assert!(steering_weights(th, 12).iter().all(|w| (w.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn single_element_beam_is_the_windowed_signal() {
        let mut cube = DataCube::zeros(3, 1, 2, 10.0, 0.043, 3.8e-3);
        for (i, s) in cube.samples.iter_mut().enumerate() {
            *s = Complex64::new(i as f64, -(i as f64) / 2.0);
        }
        let img = beamform(&cube, &[0.5], &[-0.4, 0.0, 0.9]).unwrap();
        for s in 0..3 {
            for r in 0..2 {
                for a in 0..3 {
                    assert!((img.get(s, r, a) - cube.get(s, 0, r) * 0.5).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn beamform_rejects_wrong_window() {
        let cube = DataCube::zeros(1, 4, 1, 10.0, 0.043, 3.8e-3);
        assert!(beamform(&cube, &[1.0; 3], &[0.0]).is_err());
    }

    #[test]
    fn constant_input_is_fully_suppressed() {
        let c = Complex64::new(0.7, -1.3);
        let img = series(vec![c; 2000], 2000, 10.0);
        let out = suppress_clutter(&img, 60.0).unwrap();
        for s in 600..2000 {
            assert!(out.get(s, 0, 0).norm() < 1e-12 * c.norm());
        }
    }

    #[test]
    fn breathing_band_survives_suppression() {
        let rate = 10.0;
        let n = 3000;
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((2.0 * PI * 0.25 * i as f64 / rate).sin(), 0.0))
            .collect();
        let out = suppress_clutter(&series(x.clone(), n, rate), 60.0).unwrap();
        let amp = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let ratio_db = 20.0 * (amp(&out.values[600..]) / amp(&x[600..])).log10();
        assert!(ratio_db.abs() < 0.5, "{ratio_db}");
    }

    #[test]
    fn step_settles_after_one_window() {
        let n = 1500;
        let x: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(if i < 700 { 1.0 } else { 3.0 }, 0.5)).collect();
        let out = suppress_clutter(&series(x.clone(), n, 10.0), 60.0).unwrap();
        for s in 0..n {
            // direct trailing-window mean
            let lo = s.saturating_sub(599);
            let mean: Complex64 = x[lo..=s].iter().sum::<Complex64>() / (s - lo + 1) as f64;
            assert!((out.get(s, 0, 0) - (x[s] - mean)).norm() < 1e-12);
            if s >= 1300 {
                assert!(out.get(s, 0, 0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn power_image_unit_and_homogeneity() {
        let n = 100;
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, i as f64)).collect();
        let img = series(x.clone(), n, 10.0);
        let p = power_image(&img, [0.0, 10.0]).unwrap();
        assert!((p.get(0, 0) - 1.0).abs() < 1e-12);
        let alpha = Complex64::new(2.0, -1.0);
        let scaled = series(x.iter().map(|v| v * alpha).collect(), n, 10.0);
        let ps = power_image(&scaled, [0.0, 10.0]).unwrap();
        assert!((ps.get(0, 0) - 5.0).abs() < 1e-12);
        assert!(power_image(&img, [5.0, 15.0]).is_err());
    }

    #[test]
    fn uniform_image_has_no_maxima() {
        let p = PowerImage { values: vec![2.0; 20], n_range: 4, azimuth_grid: vec![-0.2, -0.1, 0.0, 0.1, 0.2] };
        assert!(extract_scatterers(&p, -20.0, 8).unwrap().is_empty());
    }

    #[test]
    fn maxima_respect_threshold_and_order() {
        let mut values = vec![0.0; 5 * 5];
        values[6] = 10.0; // (1, 1)
        values[18] = 0.5; // (3, 3), -13 dB
        values[4] = 0.05; // (0, 4), -23 dB
        let p = PowerImage { values, n_range: 5, azimuth_grid: (0..5).map(|i| i as f64 * 0.1 - 0.2).collect() };
        let set = extract_scatterers(&p, -20.0, 8).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!((set.centers[0].range_bin, set.centers[0].azimuth_index), (1, 1));
        assert_eq!((set.centers[1].range_bin, set.centers[1].azimuth_index), (3, 3));
        assert_eq!(extract_scatterers(&p, -20.0, 1).unwrap().len(), 1);
    }

    #[test]
    fn grid_spans_coverage() {
        let g = azimuth_grid(1.0, 35.0).unwrap();
        assert_eq!(g.len(), 71);
        assert!((g[35]).abs() < 1e-15);
        assert!((g[70] - 35f64.to_radians()).abs() < 1e-15);
    }
}
