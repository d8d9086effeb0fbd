//! Truncated Fourier representations of periodic signals.
//!
//! A periodic vector signal is stored as complex coefficients `U_n` for the
//! harmonics `n = 0..=n_h` of the fundamental, with the convention
//!
//! ```text
//! u(t) = U_0 + sum_n Re( U_n * exp(i n W t) )
//!      = U_0 + sum_n ( Re(U_n) cos(n W t) - Im(U_n) sin(n W t) )
//! ```
//!
//! The zeroth coefficient is real. Solvers work on the equivalent stacked
//! real vector `[U_0, Re U_1, Im U_1, ..., Re U_nh, Im U_nh]` (block per
//! harmonic, `n_dof` entries per block).

use nalgebra::DVector;
use num_complex::Complex64;

/// Complex Fourier coefficients of a vector-valued periodic signal.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    n_dof: usize,
    n_h: usize,
    /// Harmonic-major storage: `data[n * n_dof + dof]`.
    data: Vec<Complex64>,
}

impl HarmonicCoeffs {
    pub fn zeros(n_dof: usize, n_h: usize) -> Self {
        Self {
            n_dof,
            n_h,
            data: vec![Complex64::new(0.0, 0.0); (n_h + 1) * n_dof],
        }
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn n_harmonics(&self) -> usize {
        self.n_h
    }

    #[inline]
    pub fn get(&self, harmonic: usize, dof: usize) -> Complex64 {
        self.data[harmonic * self.n_dof + dof]
    }

    #[inline]
    pub fn set(&mut self, harmonic: usize, dof: usize, value: Complex64) {
        self.data[harmonic * self.n_dof + dof] = value;
    }

    /// All coefficients of one harmonic.
    pub fn harmonic(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.n_dof..(n + 1) * self.n_dof]
    }

    pub fn harmonic_mut(&mut self, n: usize) -> &mut [Complex64] {
        &mut self.data[n * self.n_dof..(n + 1) * self.n_dof]
    }

    /// Multiply every coefficient by a real factor.
    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.data {
            *c *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// Time shift: harmonic `n` picks up the phase `exp(i n xi)`.
    pub fn rotated(&self, xi: f64) -> Self {
        let mut out = self.clone();
        for n in 0..=self.n_h {
            let phase = Complex64::from_polar(1.0, n as f64 * xi);
            for c in out.harmonic_mut(n) {
                *c *= phase;
            }
        }
        out
    }

    /// Truncate or zero-pad to a different harmonic order.
    pub fn with_harmonics(&self, n_h: usize) -> Self {
        let mut out = Self::zeros(self.n_dof, n_h);
        for n in 0..=n_h.min(self.n_h) {
            out.harmonic_mut(n).copy_from_slice(self.harmonic(n));
        }
        out
    }

    /// Number of stacked real unknowns.
    pub fn real_len(&self) -> usize {
        self.n_dof * (2 * self.n_h + 1)
    }

    pub fn to_real_vector(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.real_len());
        for d in 0..self.n_dof {
            x[d] = self.get(0, d).re;
        }
        for n in 1..=self.n_h {
            let base = self.n_dof * (2 * n - 1);
            for d in 0..self.n_dof {
                let c = self.get(n, d);
                x[base + d] = c.re;
                x[base + self.n_dof + d] = c.im;
            }
        }
        x
    }

    pub fn from_real_vector(x: &DVector<f64>, n_dof: usize, n_h: usize) -> Self {
        assert_eq!(x.len(), n_dof * (2 * n_h + 1), "stacked vector length");
        let mut out = Self::zeros(n_dof, n_h);
        for d in 0..n_dof {
            out.set(0, d, Complex64::new(x[d], 0.0));
        }
        for n in 1..=n_h {
            let base = n_dof * (2 * n - 1);
            for d in 0..n_dof {
                out.set(n, d, Complex64::new(x[base + d], x[base + n_dof + d]));
            }
        }
        out
    }

    /// Displacement sample at phase angle `phi` (one full period is `2 pi`).
    pub fn sample_dof(&self, dof: usize, phi: f64) -> f64 {
        let mut u = self.get(0, dof).re;
        for n in 1..=self.n_h {
            let c = self.get(n, dof);
            let a = n as f64 * phi;
            u += c.re * a.cos() - c.im * a.sin();
        }
        u
    }

    /// Velocity sample at phase `phi` for fundamental frequency `omega`.
    pub fn sample_velocity_dof(&self, dof: usize, phi: f64, omega: f64) -> f64 {
        let mut v = 0.0;
        for n in 1..=self.n_h {
            let c = self.get(n, dof);
            let a = n as f64 * phi;
            v -= n as f64 * omega * (c.re * a.sin() + c.im * a.cos());
        }
        v
    }

    /// Largest absolute coefficient, for convergence scaling.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Precomputed trigonometric tables for an `n_t`-sample period.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub n_t: usize,
    pub n_h: usize,
    /// `cos_t[n][k] = cos(2 pi n k / n_t)`
    cos_t: Vec<Vec<f64>>,
    sin_t: Vec<Vec<f64>>,
}

impl SampleGrid {
    pub fn new(n_h: usize, n_t: usize) -> Self {
        assert!(n_t >= 4 * n_h + 1, "n_t = {n_t} aliases harmonics up to {n_h}");
        let mut cos_t = Vec::with_capacity(n_h + 1);
        let mut sin_t = Vec::with_capacity(n_h + 1);
        for n in 0..=n_h {
            let mut c = Vec::with_capacity(n_t);
            let mut s = Vec::with_capacity(n_t);
            for k in 0..n_t {
                let a = 2.0 * std::f64::consts::PI * (n * k) as f64 / n_t as f64;
                c.push(a.cos());
                s.push(a.sin());
            }
            cos_t.push(c);
            sin_t.push(s);
        }
        Self { n_t, n_h, cos_t, sin_t }
    }

    #[inline]
    pub fn cos(&self, n: usize, k: usize) -> f64 {
        self.cos_t[n][k]
    }

    #[inline]
    pub fn sin(&self, n: usize, k: usize) -> f64 {
        self.sin_t[n][k]
    }

    /// Synthesize one scalar signal from its coefficients over the period.
    pub fn synthesize(&self, coeffs: &[Complex64], out: &mut [f64]) {
        assert_eq!(coeffs.len(), self.n_h + 1);
        assert_eq!(out.len(), self.n_t);
        for k in 0..self.n_t {
            let mut u = coeffs[0].re;
            for n in 1..=self.n_h {
                u += coeffs[n].re * self.cos_t[n][k] - coeffs[n].im * self.sin_t[n][k];
            }
            out[k] = u;
        }
    }

    /// Synthesize the time derivative for fundamental frequency `omega`.
    pub fn synthesize_velocity(&self, coeffs: &[Complex64], omega: f64, out: &mut [f64]) {
        assert_eq!(coeffs.len(), self.n_h + 1);
        assert_eq!(out.len(), self.n_t);
        for k in 0..self.n_t {
            let mut v = 0.0;
            for n in 1..=self.n_h {
                v -= n as f64 * omega
                    * (coeffs[n].re * self.sin_t[n][k] + coeffs[n].im * self.cos_t[n][k]);
            }
            out[k] = v;
        }
    }

    /// Fourier analysis of a sampled signal back to coefficients `0..=n_h`.
    pub fn analyze(&self, samples: &[f64], out: &mut [Complex64]) {
        assert_eq!(samples.len(), self.n_t);
        assert_eq!(out.len(), self.n_h + 1);
        let inv = 1.0 / self.n_t as f64;
        let mut mean = 0.0;
        for &s in samples {
            mean += s;
        }
        out[0] = Complex64::new(mean * inv, 0.0);
        for n in 1..=self.n_h {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in 0..self.n_t {
                re += samples[k] * self.cos_t[n][k];
                im -= samples[k] * self.sin_t[n][k];
            }
            out[n] = Complex64::new(2.0 * re * inv, 2.0 * im * inv);
        }
    }
}

/// Locate the maximum of a smooth periodic sampled signal and refine it with
/// one parabolic fit through the three samples bracketing the discrete
/// maximum. `eval` must return the exact signal at an arbitrary phase.
pub fn refined_periodic_max(samples: &[f64], eval: impl Fn(f64) -> f64) -> f64 {
    let n = samples.len();
    let (mut k_max, mut y_max) = (0usize, f64::NEG_INFINITY);
    for (k, &y) in samples.iter().enumerate() {
        if y > y_max {
            y_max = y;
            k_max = k;
        }
    }
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let ym = samples[(k_max + n - 1) % n];
    let yp = samples[(k_max + 1) % n];
    let denom = ym - 2.0 * y_max + yp;
    if denom >= 0.0 || !denom.is_finite() {
        return y_max;
    }
    let offset = 0.5 * (ym - yp) / denom;
    let phi = h * (k_max as f64 + offset.clamp(-0.5, 0.5));
    eval(phi).max(y_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn arbitrary_coeffs() -> HarmonicCoeffs {
        let mut c = HarmonicCoeffs::zeros(2, 3);
        c.set(0, 0, Complex64::new(0.3, 0.0));
        c.set(1, 0, Complex64::new(1.0, -0.5));
        c.set(2, 1, Complex64::new(-0.2, 0.7));
        c.set(3, 0, Complex64::new(0.05, 0.11));
        c
    }

    #[test]
    fn real_stack_round_trip() {
        let c = arbitrary_coeffs();
        let x = c.to_real_vector();
        let back = HarmonicCoeffs::from_real_vector(&x, 2, 3);
        assert_eq!(c, back);
    }

    #[test]
    fn synthesis_analysis_round_trip() {
        let c = arbitrary_coeffs();
        let grid = SampleGrid::new(3, 32);
        let mut samples = vec![0.0; 32];
        let mut out = vec![Complex64::new(0.0, 0.0); 4];
        for dof in 0..2 {
            let coeffs: Vec<_> = (0..=3).map(|n| c.get(n, dof)).collect();
            grid.synthesize(&coeffs, &mut samples);
            grid.analyze(&samples, &mut out);
            for n in 0..=3 {
                assert_relative_eq!(out[n].re, coeffs[n].re, epsilon = 1e-12);
                assert_relative_eq!(out[n].im, coeffs[n].im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn velocity_matches_finite_difference() {
        let c = arbitrary_coeffs();
        let omega = 7.3;
        let dphi = 1e-6;
        for &phi in &[0.1, 1.0, 4.0] {
            let v = c.sample_velocity_dof(0, phi, omega);
            let fd = (c.sample_dof(0, phi + dphi) - c.sample_dof(0, phi - dphi)) / (2.0 * dphi)
                * omega;
            assert_relative_eq!(v, fd, epsilon = 1e-5, max_relative = 1e-5);
        }
    }

    #[test]
    fn rotation_is_time_shift() {
        let c = arbitrary_coeffs();
        let xi = 0.83;
        let r = c.rotated(xi);
        for &phi in &[0.0, 0.5, 2.0] {
            assert_relative_eq!(r.sample_dof(0, phi), c.sample_dof(0, phi + xi), epsilon = 1e-12);
        }
    }

    #[test]
    fn refined_max_recovers_offset_peak() {
        let n = 64;
        let f = |phi: f64| (phi - 0.3).cos() + 0.2 * (2.0 * (phi - 0.3)).cos();
        let samples: Vec<f64> = (0..n)
            .map(|k| f(2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        let max = refined_periodic_max(&samples, f);
        assert_relative_eq!(max, 1.2, epsilon = 1e-4);
    }
}
