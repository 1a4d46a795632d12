//! Radar constants, virtual-array geometry and the fast-time range transform.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

/// FMCW MIMO radar parameters. Defaults describe a 79 GHz, 3TX x 4RX unit
/// sampled at 10 Hz in slow time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub center_frequency_hz: f64,
    pub wavelength_m: f64,
    pub range_resolution_m: f64,
    pub slow_time_rate_hz: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_range_bins: usize,
    pub n_fast_samples: usize,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            center_frequency_hz: 79e9,
            wavelength_m: 3.8e-3,
            range_resolution_m: 43e-3,
            slow_time_rate_hz: 10.0,
            n_tx: 3,
            n_rx: 4,
            n_range_bins: 32,
            n_fast_samples: 64,
        }
    }
}

impl RadarConfig {
    /// Number of virtual elements, `n_tx * n_rx`.
    pub fn n_virtual(&self) -> usize {
        self.n_tx * self.n_rx
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return arg_err("wavelength must be positive");
        }
        if !(self.slow_time_rate_hz > 0.0 && self.slow_time_rate_hz.is_finite()) {
            return arg_err("slow-time rate must be positive");
        }
        if !(self.range_resolution_m > 0.0) {
            return arg_err("range resolution must be positive");
        }
        if self.n_tx == 0 || self.n_rx == 0 {
            return arg_err("n_tx and n_rx must be at least 1");
        }
        if self.n_range_bins == 0 {
            return arg_err("n_range_bins must be at least 1");
        }
        if self.n_fast_samples < 2 {
            return arg_err("n_fast_samples must be at least 2");
        }
        if self.n_range_bins > self.n_fast_samples {
            return arg_err("n_range_bins cannot exceed n_fast_samples");
        }
        Ok(())
    }

    pub fn max_range_m(&self) -> f64 {
        self.n_range_bins as f64 * self.range_resolution_m
    }
}

/// Element x-positions of the uniform linear virtual array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualArray {
    pub element_positions_x: Vec<f64>,
}

impl VirtualArray {
    pub fn len(&self) -> usize {
        self.element_positions_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions_x.is_empty()
    }
}

/// `x_k = k * lambda / 2` for `k = 0..n_tx*n_rx`.
pub fn virtual_positions(cfg: &RadarConfig) -> VirtualArray {
    let half = cfg.wavelength_m / 2.0;
    VirtualArray {
        element_positions_x: (0..cfg.n_virtual()).map(|k| k as f64 * half).collect(),
    }
}

/// Post-range-FFT samples `s'_k(t, r)`, stored slow-time-major, then element,
/// then range bin.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCube {
    pub samples: Vec<Complex64>,
    pub n_slow: usize,
    pub n_elem: usize,
    pub n_range: usize,
    /// Time of the first slow-time sample, seconds.
    pub t0: f64,
    pub slow_time_rate: f64,
    pub range_bin_size: f64,
    pub wavelength: f64,
}

impl DataCube {
    pub fn zeros(
        n_slow: usize,
        n_elem: usize,
        n_range: usize,
        slow_time_rate: f64,
        range_bin_size: f64,
        wavelength: f64,
    ) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); n_slow * n_elem * n_range],
            n_slow,
            n_elem,
            n_range,
            t0: 0.0,
            slow_time_rate,
            range_bin_size,
            wavelength,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slow == 0 || self.n_elem == 0 || self.n_range == 0 {
            return arg_err("data cube dimensions must all be at least 1");
        }
        if self.samples.len() != self.n_slow * self.n_elem * self.n_range {
            return Err(Error::Config(format!(
                "cube holds {} samples, dimensions imply {}",
                self.samples.len(),
                self.n_slow * self.n_elem * self.n_range
            )));
        }
        if !(self.slow_time_rate > 0.0) || !(self.range_bin_size > 0.0) || !(self.wavelength > 0.0)
        {
            return arg_err("cube rates and sizes must be positive");
        }
        if self.samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return arg_err("cube contains non-finite samples");
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, slow: usize, elem: usize, range: usize) -> usize {
        (slow * self.n_elem + elem) * self.n_range + range
    }

    #[inline]
    pub fn get(&self, slow: usize, elem: usize, range: usize) -> Complex64 {
        self.samples[self.index(slow, elem, range)]
    }

    /// The `[elem][range]` slice for one slow-time sample.
    pub fn frame(&self, slow: usize) -> &[Complex64] {
        let n = self.n_elem * self.n_range;
        &self.samples[slow * n..(slow + 1) * n]
    }

    pub fn time_of(&self, slow: usize) -> f64 {
        self.t0 + slow as f64 / self.slow_time_rate
    }

    pub fn duration(&self) -> f64 {
        self.n_slow as f64 / self.slow_time_rate
    }

    /// Slow-time index nearest to `t`, clamped into `0..=n_slow`.
    pub fn sample_at(&self, t: f64) -> usize {
        let n = ((t - self.t0) * self.slow_time_rate).round();
        n.clamp(0.0, self.n_slow as f64) as usize
    }

    /// The slow-time series of one element and range bin.
    pub fn series(&self, elem: usize, range: usize) -> Vec<Complex64> {
        (0..self.n_slow).map(|s| self.get(s, elem, range)).collect()
    }
}

/// Raw fast-time samples, `[slow][elem][fast]`.
#[derive(Debug, Clone)]
pub struct FastTimeFrames {
    pub samples: Vec<Complex64>,
    pub n_slow: usize,
    pub n_elem: usize,
    pub n_fast: usize,
}

/// Forward, unnormalized DFT along fast time. Bin `b` corresponds to range
/// `b * range_resolution`; only the first `n_range_bins` bins are kept.
pub fn range_transform(frames: &FastTimeFrames, cfg: &RadarConfig) -> Result<DataCube> {
    cfg.validate()?;
    if frames.n_fast < 2 {
        return arg_err("fast-time dimension must be at least 2");
    }
    if frames.n_elem != cfg.n_virtual() || frames.n_fast != cfg.n_fast_samples {
        return Err(Error::Config(format!(
            "frames are {} elements x {} fast samples, config expects {} x {}",
            frames.n_elem,
            frames.n_fast,
            cfg.n_virtual(),
            cfg.n_fast_samples
        )));
    }
    if frames.samples.len() != frames.n_slow * frames.n_elem * frames.n_fast {
        return Err(Error::Config("frame buffer length disagrees with its dimensions".into()));
    }

    let fft = FftPlanner::<f64>::new().plan_fft_forward(frames.n_fast);
    let mut cube = DataCube::zeros(
        frames.n_slow,
        frames.n_elem,
        cfg.n_range_bins,
        cfg.slow_time_rate_hz,
        cfg.range_resolution_m,
        cfg.wavelength_m,
    );
    let mut buf = vec![Complex64::new(0.0, 0.0); frames.n_fast];
    for (chirp, out) in frames
        .samples
        .chunks_exact(frames.n_fast)
        .zip(cube.samples.chunks_exact_mut(cfg.n_range_bins))
    {
        buf.copy_from_slice(chirp);
        fft.process(&mut buf);
        out.copy_from_slice(&buf[..cfg.n_range_bins]);
    }
    Ok(cube)
}

/// Taylor window with `nbar = 4`, normalized to a peak of 1.
pub fn taylor_window(k: usize, sidelobe_db: f64) -> Result<Vec<f64>> {
    taylor_window_nbar(k, 4, sidelobe_db)
}

pub fn taylor_window_nbar(k: usize, nbar: usize, sidelobe_db: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return arg_err("Taylor window length must be at least 1");
    }
    if nbar == 0 || !(sidelobe_db > 0.0) {
        return arg_err("Taylor window needs nbar >= 1 and a positive sidelobe level");
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let b = 10f64.powf(sidelobe_db / 20.0);
    let a = b.acosh() / std::f64::consts::PI;
    let nbar_f = nbar as f64;
    let s2 = nbar_f * nbar_f / (a * a + (nbar_f - 0.5).powi(2));
    let ms: Vec<f64> = (1..nbar).map(|m| m as f64).collect();

    let fm: Vec<f64> = ms
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let numer: f64 = ms
                .iter()
                .map(|&mm| 1.0 - m * m / s2 / (a * a + (mm - 0.5).powi(2)))
                .product();
            let denom: f64 = ms
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &mm)| 1.0 - m * m / (mm * mm))
                .product();
            sign * numer / (2.0 * denom)
        })
        .collect();

    let len = k as f64;
    let w: Vec<f64> = (0..k)
        .map(|n| {
            let x = n as f64 - len / 2.0 + 0.5;
            1.0 + 2.0
                * fm.iter()
                    .zip(&ms)
                    .map(|(f, m)| f * (std::f64::consts::TAU * m * x / len).cos())
                    .sum::<f64>()
        })
        .collect();
    let peak = w.iter().cloned().fold(f64::MIN, f64::max);
    Ok(w.into_iter().map(|v| v / peak).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn dft_oracle(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| v * Complex64::from_polar(1.0, -TAU * (k * i) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    fn small_cfg(n_fast: usize, n_range: usize) -> RadarConfig {
        RadarConfig {
            n_tx: 1,
            n_rx: 2,
            n_fast_samples: n_fast,
            n_range_bins: n_range,
            ..RadarConfig::default()
        }
    }

    #[test]
    fn default_array_is_twelve_elements_at_half_wavelength() {
        let va = virtual_positions(&RadarConfig::default());
        assert_eq!(va.len(), 12);
        for w in va.element_positions_x.windows(2) {
            assert!((w[1] - w[0] - 1.9e-3).abs() < 1e-15);
        }
        assert!((va.element_positions_x[4] - 7.6e-3).abs() < 1e-15);
    }

    #[test]
    fn single_element_array_sits_at_origin() {
        let cfg = RadarConfig { n_tx: 1, n_rx: 1, ..RadarConfig::default() };
        assert_eq!(virtual_positions(&cfg).element_positions_x, vec![0.0]);
    }

    #[test]
    fn dc_frame_lands_in_bin_zero() {
        let cfg = small_cfg(16, 16);
        let frames = FastTimeFrames {
            samples: vec![Complex64::new(0.5, -0.25); 2 * 16],
            n_slow: 1,
            n_elem: 2,
            n_fast: 16,
        };
        let cube = range_transform(&frames, &cfg).unwrap();
        assert!((cube.get(0, 1, 0) - Complex64::new(8.0, -4.0)).norm() < 1e-12);
        for b in 1..16 {
            assert!(cube.get(0, 1, b).norm() < 1e-12);
        }
    }

    #[test]
    fn tones_match_direct_dft() {
        let n = 32;
        let cfg = small_cfg(n, n);
        let chirp: Vec<Complex64> = (0..n)
            .map(|i| {
                Complex64::from_polar(1.0, TAU * 5.0 * i as f64 / n as f64)
                    + Complex64::from_polar(0.3, TAU * 11.0 * i as f64 / n as f64 + 0.4)
            })
            .collect();
        let mut samples = chirp.clone();
        samples.extend(chirp.iter().map(|c| c * 2.0));
        let frames = FastTimeFrames { samples, n_slow: 1, n_elem: 2, n_fast: n };
        let cube = range_transform(&frames, &cfg).unwrap();
        let oracle = dft_oracle(&chirp);
        for b in 0..n {
            assert!((cube.get(0, 0, b) - oracle[b]).norm() < 1e-9);
        }
        let peak = (0..n).max_by(|&a, &b| cube.get(0, 0, a).norm().total_cmp(&cube.get(0, 0, b).norm()));
        assert_eq!(peak, Some(5));
        assert!((cube.get(0, 0, 11).norm() - 0.3 * n as f64).abs() < 1e-9);
    }

    #[test]
    fn rejects_mismatched_frames() {
        let frames = FastTimeFrames {
            samples: vec![Complex64::new(0.0, 0.0); 3 * 8],
            n_slow: 1,
            n_elem: 3,
            n_fast: 8,
        };
        assert!(matches!(range_transform(&frames, &small_cfg(8, 8)), Err(Error::Config(_))));
    }

    #[test]
    fn taylor_matches_reference_values() {
        // scipy.signal.windows.taylor(12, nbar=4, sll=25, norm=False) / max
        let reference = [
            0.38403951, 0.47327652, 0.62787664, 0.79864088, 0.93200199, 1.0, 1.0, 0.93200199,
            0.79864088, 0.62787664, 0.47327652, 0.38403951,
        ];
        let w = taylor_window(12, 25.0).unwrap();
        for (a, b) in w.iter().zip(reference) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        for k in 0..12 {
            assert_eq!(w[k], w[11 - k]);
            assert!(w[k] > 0.0 && w[k] <= 1.0);
        }
    }

    #[test]
    fn taylor_edge_cases() {
        assert_eq!(taylor_window(1, 25.0).unwrap(), vec![1.0]);
        assert!(taylor_window(0, 25.0).is_err());
    }
}
