//! Truncated Fourier series on a circle.
//!
//! Convention: `w(theta) = sum_k c_k exp(i k theta)` for `|k| <= K`, with the
//! `1/M` factor carried by [`BoundarySpectrum::analyze`]. The spectrum also
//! records the radius of the circle it lives on so that tangential
//! derivatives `d/dt = (1/r) d/dtheta` can be taken without extra context.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpectrum {
    k_max: usize,
    radius: f64,
    /// `coeffs[k + k_max]` is `c_k`.
    coeffs: Vec<Complex64>,
}

impl BoundarySpectrum {
    pub fn zeros(k_max: usize, radius: f64) -> Self {
        BoundarySpectrum {
            k_max,
            radius,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * k_max + 1],
        }
    }

    /// Build from `(k, c_k)` pairs; unspecified modes are zero and repeated
    /// modes accumulate.
    pub fn from_modes(k_max: usize, radius: f64, modes: &[(i32, Complex64)]) -> Result<Self> {
        let mut spec = Self::zeros(k_max, radius);
        for &(k, c) in modes {
            if k.unsigned_abs() as usize > k_max {
                return Err(Error::invalid(format!(
                    "mode {k} exceeds truncation order K = {k_max}"
                )));
            }
            spec.coeffs[(k + k_max as i32) as usize] += c;
        }
        Ok(spec)
    }

    /// Discrete Fourier coefficients of samples taken at `theta_j = 2 pi j / M`.
    pub fn analyze(samples: &[Complex64], k_max: usize, radius: f64) -> Result<Self> {
        let m = samples.len();
        if m < 2 * k_max + 1 {
            return Err(Error::invalid(format!(
                "{m} samples cannot resolve modes up to K = {k_max} (need at least {})",
                2 * k_max + 1
            )));
        }
        let mut spec = Self::zeros(k_max, radius);
        let inv_m = 1.0 / m as f64;
        for k in -(k_max as i32)..=(k_max as i32) {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &w) in samples.iter().enumerate() {
                // Reduce k*j mod M before scaling so the phase stays exact for large products.
                let kj = (k as i64 * j as i64).rem_euclid(m as i64) as f64;
                let phase = -2.0 * PI * kj * inv_m;
                acc += w * Complex64::from_polar(1.0, phase);
            }
            spec.coeffs[(k + k_max as i32) as usize] = acc * inv_m;
        }
        Ok(spec)
    }

    pub fn synthesize(&self, theta: f64) -> Complex64 {
        self.modes()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    /// Samples at `theta_j = 2 pi j / m`.
    pub fn sample(&self, m: usize) -> Vec<Complex64> {
        (0..m)
            .map(|j| self.synthesize(2.0 * PI * j as f64 / m as f64))
            .collect()
    }

    /// Derivative along the circle: mode `k` is multiplied by `(i k / r)^order`.
    pub fn tangential_derivative(&self, order: u32) -> Result<Self> {
        if !(order == 1 || order == 2) {
            return Err(Error::invalid(format!(
                "tangential derivative order must be 1 or 2, got {order}"
            )));
        }
        if self.radius <= 0.0 {
            return Err(Error::invalid(
                "tangential derivative needs a positive radius",
            ));
        }
        let mut out = self.clone();
        for (k, c) in out.modes_mut() {
            let factor = Complex64::new(0.0, k as f64 / self.radius).powu(order);
            *c *= factor;
        }
        Ok(out)
    }

    /// Spectrum of `w(theta - alpha)`.
    pub fn rotated(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for (k, c) in out.modes_mut() {
            *c *= Complex64::from_polar(1.0, -(k as f64) * alpha);
        }
        out
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= factor);
        out
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        BoundarySpectrum {
            radius,
            ..self.clone()
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn coeff(&self, k: i32) -> Complex64 {
        if k.unsigned_abs() as usize > self.k_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.k_max as i32) as usize]
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        let kmax = self.k_max as i32;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (i as i32 - kmax, c))
    }

    fn modes_mut(&mut self) -> impl Iterator<Item = (i32, &mut Complex64)> {
        let kmax = self.k_max as i32;
        self.coeffs
            .iter_mut()
            .enumerate()
            .map(move |(i, c)| (i as i32 - kmax, c))
    }

    /// `int_0^{2pi} |w|^2 dtheta = 2 pi sum |c_k|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        2.0 * PI * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    /// True when `c_{-k} = conj(c_k)` for every mode, i.e. the samples are real.
    pub fn is_real(&self, tol: f64) -> bool {
        self.modes()
            .all(|(k, c)| (c - self.coeff(-k).conj()).norm() <= tol)
    }

    /// Smoothness sanity check: the outermost retained modes should not carry
    /// more weight than the mean. Advisory only.
    pub fn decay_suspicious(&self, tol: f64) -> bool {
        let k = self.k_max as i32;
        let edge = self.coeff(k).norm().max(self.coeff(-k).norm());
        edge > self.coeff(0).norm() + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn samples_of(f: impl Fn(f64) -> f64, m: usize) -> Vec<Complex64> {
        (0..m)
            .map(|j| c(f(2.0 * PI * j as f64 / m as f64), 0.0))
            .collect()
    }

    #[test]
    fn analyze_cosine() {
        let s = BoundarySpectrum::analyze(&samples_of(f64::cos, 16), 4, 1.0).unwrap();
        for (k, ck) in s.modes() {
            let expect = if k.abs() == 1 { 0.5 } else { 0.0 };
            assert!((ck - c(expect, 0.0)).norm() < 1e-14, "k={k} c={ck}");
        }
    }

    #[test]
    fn analyze_constant_and_sum() {
        let s = BoundarySpectrum::analyze(&samples_of(|_| 1.0, 9), 4, 1.0).unwrap();
        assert!((s.coeff(0) - 1.0).norm() < 1e-14);
        assert!(s
            .modes()
            .filter(|(k, _)| *k != 0)
            .all(|(_, v)| v.norm() < 1e-14));

        let f = |t: f64| t.cos() + 0.5 * (3.0 * t).cos();
        let s = BoundarySpectrum::analyze(&samples_of(f, 32), 4, 1.0).unwrap();
        assert!((s.coeff(1) - 0.5).norm() < 1e-14);
        assert!((s.coeff(-1) - 0.5).norm() < 1e-14);
        assert!((s.coeff(3) - 0.25).norm() < 1e-14);
        assert!((s.coeff(-3) - 0.25).norm() < 1e-14);
        assert!(s.coeff(2).norm() < 1e-14);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(BoundarySpectrum::analyze(&samples_of(f64::cos, 8), 4, 1.0).is_err());
    }

    #[test]
    fn synthesize_basics() {
        let s = BoundarySpectrum::from_modes(2, 1.0, &[(0, c(1.0, 0.0))]).unwrap();
        assert!((s.synthesize(1.3) - 1.0).norm() < 1e-15);
        let s = BoundarySpectrum::from_modes(2, 1.0, &[(1, c(1.0, 0.0))]).unwrap();
        assert!((s.synthesize(PI) + 1.0).norm() < 1e-15);
    }

    #[test]
    fn tangential_derivative_examples() {
        let s = BoundarySpectrum::from_modes(3, 1.0, &[(2, c(1.0, 0.0))]).unwrap();
        let d2 = s.tangential_derivative(2).unwrap();
        assert!((d2.coeff(2) - c(-4.0, 0.0)).norm() < 1e-15);

        let s = BoundarySpectrum::from_modes(3, 5.0, &[(0, c(1.0, 0.0))]).unwrap();
        assert!(s.tangential_derivative(1).unwrap().is_zero());

        let s = BoundarySpectrum::from_modes(3, 2.0, &[(1, c(1.0, 0.0))]).unwrap();
        let d1 = s.tangential_derivative(1).unwrap();
        assert!((d1.coeff(1) - c(0.0, 0.5)).norm() < 1e-15);

        assert!(s.tangential_derivative(3).is_err());
    }

    #[test]
    fn first_derivative_twice_is_second() {
        let s = BoundarySpectrum::from_modes(
            4,
            1.7,
            &[(1, c(0.3, -0.2)), (-3, c(1.0, 2.0)), (4, c(0.0, 1.0))],
        )
        .unwrap();
        let twice = s
            .tangential_derivative(1)
            .unwrap()
            .tangential_derivative(1)
            .unwrap();
        assert_eq!(twice, s.tangential_derivative(2).unwrap());
    }

    #[test]
    fn rotation_shifts_samples() {
        let s = BoundarySpectrum::from_modes(
            3,
            1.0,
            &[(1, c(0.5, 0.0)), (-1, c(0.5, 0.0)), (3, c(0.1, 0.2))],
        )
        .unwrap();
        let r = s.rotated(0.7);
        for t in [0.0, 0.4, 2.5] {
            assert!((r.synthesize(t) - s.synthesize(t - 0.7)).norm() < 1e-13);
        }
    }

    #[test]
    fn real_data_is_conjugate_symmetric() {
        let s = BoundarySpectrum::analyze(&samples_of(|t| (2.0 * t).sin() + t.cos(), 16), 5, 1.0)
            .unwrap();
        assert!(s.is_real(1e-14));
        let s = BoundarySpectrum::from_modes(2, 1.0, &[(1, c(1.0, 0.0))]).unwrap();
        assert!(!s.is_real(1e-14));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spectrum() -> impl Strategy<Value = BoundarySpectrum> {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 11).prop_map(|v| {
                let modes: Vec<(i32, Complex64)> = v
                    .into_iter()
                    .enumerate()
                    .map(|(i, (a, b))| (i as i32 - 5, Complex64::new(a, b)))
                    .collect();
                BoundarySpectrum::from_modes(5, 1.0, &modes).unwrap()
            })
        }

        proptest! {
            #[test]
            fn round_trip_band_limited(s in spectrum(), extra in 0usize..7) {
                let m = 11 + extra;
                let samples = s.sample(m);
                let back = BoundarySpectrum::analyze(&samples, 5, 1.0).unwrap();
                let again = back.sample(m);
                for (a, b) in samples.iter().zip(&again) {
                    prop_assert!((a - b).norm() < 1e-12);
                }
            }

            #[test]
            fn parseval_matches_trapezoid(s in spectrum()) {
                let m = 64;
                let trap: f64 = s.sample(m).iter().map(|w| w.norm_sqr()).sum::<f64>()
                    * 2.0 * PI / m as f64;
                prop_assert!((trap - s.l2_norm_sq()).abs() < 1e-10);
            }
        }
    }
}
