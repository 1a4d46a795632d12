//! Digital Butterworth band-pass design as second-order sections, and
//! zero-phase forward-backward filtering.
//!
//! Design, section pairing, odd-extension padding and steady-state initial
//! conditions follow the conventions of SciPy's `butter(..., output="sos")`
//! and `sosfiltfilt`, so outputs can be checked against it sample by sample.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{arg_err, Result};

/// One biquad: `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Section {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (self.a[0] + z_inv * self.a[1] + z2 * self.a[2])
    }

    /// Steady-state transposed direct-form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        // (I - A^T) zi = b[1:] - a[1:] b0 with A the companion matrix
        let (r0, r1) = (b1 - a1 * b0, b2 - a2 * b0);
        let det = (1.0 + a1) + a2;
        let z0 = (r0 + r1) / det;
        [z0, r1 - a2 * z0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Section>,
}

impl SosFilter {
    /// Band-pass Butterworth with an `order`-pole analog prototype (the
    /// digital filter has `2 * order` poles). Edges in Hz at rate `fs`.
    pub fn bandpass(order: usize, f_lo: f64, f_hi: f64, fs: f64) -> Result<Self> {
        if order == 0 {
            return arg_err("filter order must be at least 1");
        }
        if !(0.0 < f_lo && f_lo < f_hi && f_hi < fs / 2.0) {
            return arg_err(format!(
                "band edges must satisfy 0 < {f_lo} < {f_hi} < {} Hz",
                fs / 2.0
            ));
        }
        // bilinear transform with an internal rate of 2, edges prewarped
        let fs2 = 2.0;
        let warp = |f: f64| 2.0 * fs2 * (PI * f / fs).tan();
        let (wl, wh) = (warp(f_lo), warp(f_hi));
        let bw = wh - wl;
        let w0 = (wl * wh).sqrt();

        let proto: Vec<Complex64> = (0..order)
            .map(|i| {
                let m = -(order as f64) + 1.0 + 2.0 * i as f64;
                -Complex64::from_polar(1.0, PI * m / (2.0 * order as f64))
            })
            .collect();
        let mut poles = Vec::with_capacity(2 * order);
        for p in &proto {
            let pl = p * (bw / 2.0);
            let root = (pl * pl - w0 * w0).sqrt();
            poles.push(pl + root);
            poles.push(pl - root);
        }
        let mut gain = bw.powi(order as i32);

        let two_fs = Complex64::new(2.0 * fs2, 0.0);
        let zpole: Vec<Complex64> = poles.iter().map(|p| (two_fs + p) / (two_fs - p)).collect();
        // analog zeros: `order` at the origin
        let num: Complex64 = (0..order).map(|_| two_fs).product();
        let den: Complex64 = poles.iter().map(|p| two_fs - p).product();
        gain *= (num / den).re;

        let mut zeros: Vec<f64> = vec![1.0; order];
        zeros.extend(std::iter::repeat(-1.0).take(order));

        Ok(Self { sections: pair_sections(zpole, zeros, gain) })
    }

    pub fn frequency_response(&self, f: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Single causal pass from the given per-section states.
    pub fn filter_with_state(&self, x: &mut [f64], state: &mut [[f64; 2]]) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            for v in x.iter_mut() {
                let xi = *v;
                let y = b0 * xi + z[0];
                z[0] = b1 * xi - a1 * y + z[1];
                z[1] = b2 * xi - a2 * y;
                *v = y;
            }
        }
    }

    /// Step-response initial states of the cascade.
    pub fn initial_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let z = s.step_state();
                let out = [scale * z[0], scale * z[1]];
                scale *= s.b.iter().sum::<f64>() / s.a.iter().sum::<f64>();
                out
            })
            .collect()
    }

    /// Default odd-extension length, three times the cascade's order.
    pub fn default_padlen(&self) -> usize {
        let trailing_b = self.sections.iter().filter(|s| s.b[2] == 0.0).count();
        let trailing_a = self.sections.iter().filter(|s| s.a[2] == 0.0).count();
        3 * (2 * self.sections.len() + 1 - trailing_b.min(trailing_a))
    }

    /// Zero-phase forward-backward filtering with odd-extension padding.
    /// The pad is shortened when the input is too short for the default.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let n = x.len();
        let pad = self.default_padlen().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }

        let zi = self.initial_state();
        let scaled = |x0: f64| -> Vec<[f64; 2]> { zi.iter().map(|z| [z[0] * x0, z[1] * x0]).collect() };

        let mut state = scaled(ext[0]);
        self.filter_with_state(&mut ext, &mut state);
        ext.reverse();
        let mut state = scaled(ext[0]);
        self.filter_with_state(&mut ext, &mut state);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Groups poles and zeros into biquads, pairing the pole nearest the unit
/// circle with its nearest zeros and placing it last; gain goes first.
fn pair_sections(poles: Vec<Complex64>, mut zeros: Vec<f64>, gain: f64) -> Vec<Section> {
    // keep one pole per conjugate pair
    let mut upper: Vec<Complex64> = poles.into_iter().filter(|p| p.im >= 0.0).collect();
    let mut out = Vec::with_capacity(upper.len());
    while !upper.is_empty() {
        let idx = (0..upper.len())
            .min_by(|&i, &j| (1.0 - upper[i].norm()).abs().total_cmp(&(1.0 - upper[j].norm()).abs()))
            .unwrap();
        let p = upper.remove(idx);
        let mut take_nearest = || -> f64 {
            let zi = (0..zeros.len())
                .min_by(|&i, &j| (p - zeros[i]).norm().total_cmp(&(p - zeros[j]).norm()))
                .unwrap();
            zeros.remove(zi)
        };
        let z1 = take_nearest();
        let z2 = take_nearest();
        out.push(Section {
            b: [1.0, -(z1 + z2), z1 * z2],
            a: [1.0, -2.0 * p.re, p.norm_sqr()],
        });
    }
    out.reverse();
    if let Some(first) = out.first_mut() {
        first.b.iter_mut().for_each(|b| *b *= gain);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> SosFilter {
        SosFilter::bandpass(4, 0.17, 1.8, 10.0).unwrap()
    }

    #[test]
    fn sections_match_reference_design() {
        // scipy.signal.butter(4, [0.17, 1.8], "bandpass", fs=10, output="sos")
        let expected = [
            [0.0242794, 0.04855881, 0.0242794, 1.0, -0.62436903, 0.14699595],
            [1.0, 2.0, 1.0, 1.0, -0.68111499, 0.54476594],
            [1.0, -2.0, 1.0, 1.0, -1.7872963, 0.8012951],
            [1.0, -2.0, 1.0, 1.0, -1.91971538, 0.93113814],
        ];
        let f = reference();
        assert_eq!(f.sections.len(), 4);
        for (s, e) in f.sections.iter().zip(expected) {
            for i in 0..3 {
                assert!((s.b[i] - e[i]).abs() < 1e-7, "{:?} vs {:?}", s, e);
                assert!((s.a[i] - e[3 + i]).abs() < 1e-7, "{:?} vs {:?}", s, e);
            }
        }
    }

    #[test]
    fn magnitude_matches_reference_response() {
        // |H(f)| from scipy.signal.sosfreqz of the reference design
        let f = reference();
        for (freq, mag) in [
            (0.05, 0.005399888829540693),
            (0.17, 0.7071067811865536),
            (0.25, 0.9909924608208681),
            (0.5, 0.9999999963823022),
            (1.8, 0.7071067811865483),
            (3.0, 0.03414830314773944),
        ] {
            assert!((f.frequency_response(freq, 10.0).norm() - mag).abs() < 1e-9, "{freq}");
        }
    }

    #[test]
    fn filtfilt_matches_reference_output() {
        let t: Vec<f64> = (0..300).map(|i| i as f64 / 10.0).collect();
        let x: Vec<f64> = t
            .iter()
            .map(|&t| (2.0 * PI * 0.3 * t).sin() + 0.5 * (2.0 * PI * 0.05 * t).cos() + 0.1 * t / 30.0)
            .collect();
        let y = reference().filtfilt(&x);
        // scipy.signal.sosfiltfilt on the same input
        for (i, v) in [
            (0, 9.48386862e-02),
            (1, 2.86577279e-01),
            (50, -2.39002504e-03),
            (150, 1.40477129e-04),
            (299, -1.95297350e-01),
        ] {
            assert!((y[i] - v).abs() < 1e-8, "y[{i}] = {} vs {v}", y[i]);
        }
    }

    #[test]
    fn step_state_gives_steady_output() {
        let f = reference();
        let mut x = vec![1.0; 50];
        let mut st = f.initial_state();
        f.filter_with_state(&mut x, &mut st);
        assert!(x.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(SosFilter::bandpass(4, 0.5, 0.3, 10.0).is_err());
        assert!(SosFilter::bandpass(4, 0.17, 6.0, 10.0).is_err());
        assert!(SosFilter::bandpass(0, 0.17, 1.8, 10.0).is_err());
    }
}
