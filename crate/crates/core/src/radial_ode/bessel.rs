//! Bessel `J_k` of complex argument by the ascending series.
//!
//! Used only as a validation oracle for the finite-difference radial solver:
//! `J_k(sqrt(z) r)` solves `u'' + u'/r - k^2 u / r^2 + z u = 0`.

use num_complex::Complex64;

use crate::{Error, Result};

/// Largest `|x|` accepted; beyond this the alternating series loses too many
/// digits to cancellation.
pub const SERIES_LIMIT: f64 = 30.0;

const MAX_TERMS: usize = 500;

/// `J_k(x)` for complex `x`, `k >= 0`.
pub fn bessel_j_series(k: u32, x: Complex64) -> Result<Complex64> {
    if x.norm() > SERIES_LIMIT {
        return Err(Error::invalid(format!(
            "|x| = {:.3} outside the ascending-series regime (<= {SERIES_LIMIT})",
            x.norm()
        )));
    }
    let half = x * 0.5;
    // (x/2)^k / k!
    let mut term = Complex64::new(1.0, 0.0);
    for j in 1..=k {
        term *= half / j as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut stalled = 0;
    for m in 1..MAX_TERMS {
        term *= q / ((m as f64) * ((m as u32 + k) as f64));
        let next = sum + term;
        if next == sum {
            stalled += 1;
            // Two unchanged partial sums in a row: further terms are below ulp.
            if stalled >= 2 {
                break;
            }
        } else {
            stalled = 0;
        }
        sum = next;
    }
    Ok(sum)
}

/// `J_k(sqrt(z) r)` with the principal square root.
pub fn bessel_oracle(z: Complex64, k: i32, r: f64) -> Result<Complex64> {
    if k < 0 {
        return Err(Error::invalid(format!(
            "oracle order must be >= 0, got {k}"
        )));
    }
    bessel_j_series(k as u32, z.sqrt() * r)
}

/// `d/dr J_k(sqrt(z) r)`.
pub fn bessel_oracle_derivative(z: Complex64, k: i32, r: f64) -> Result<Complex64> {
    if k < 0 {
        return Err(Error::invalid(format!(
            "oracle order must be >= 0, got {k}"
        )));
    }
    let s = z.sqrt();
    let x = s * r;
    let next = bessel_j_series(k as u32 + 1, x)?;
    let prev = if k == 0 {
        -next
    } else {
        bessel_j_series(k as u32 - 1, x)?
    };
    Ok(s * (prev - next) * 0.5)
}
