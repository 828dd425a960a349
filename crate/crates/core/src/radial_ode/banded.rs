//! Complex banded Gaussian elimination with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout in row form: row `i` keeps
//! columns `i - kl ..= i + ku + kl`, the extra `kl` slots absorbing fill-in
//! from row interchanges.

use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![Complex64::new(0.0, 0.0); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku + self.kl {
            self.data[self.slot(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Panics if `(i, j)` lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(
            self.in_band(i, j),
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(
            self.in_band(i, j),
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solve `A x = b`, consuming the matrix.
    pub fn solve(mut self, mut b: Vec<Complex64>) -> Result<Vec<Complex64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::invalid(format!(
                "rhs length {} != matrix order {n}",
                b.len()
            )));
        }
        let upper = self.ku + self.kl;
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::Solver {
                mode: None,
                message: "zero matrix".into(),
            });
        }
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;

        for c in 0..n {
            let last = (c + self.kl).min(n - 1);
            let mut p = c;
            let mut best = self.get(c, c).norm();
            for r in (c + 1)..=last {
                let v = self.get(r, c).norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::Solver {
                    mode: None,
                    message: format!(
                        "singular system at column {c} of {n} (pivot {best:.3e}, matrix scale {scale:.3e}); \
                         the complex parameters may be at a resonance"
                    ),
                });
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            let cmax = (c + upper).min(n - 1);
            if p != c {
                for j in c..=cmax {
                    let (sc, sp) = (self.slot(c, j), self.slot(p, j));
                    self.data.swap(sc, sp);
                }
                b.swap(c, p);
            }
            let pivot = self.data[self.slot(c, c)];
            for r in (c + 1)..=last {
                let sr = self.slot(r, c);
                let f = self.data[sr] / pivot;
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                self.data[sr] = Complex64::new(0.0, 0.0);
                for j in (c + 1)..=cmax {
                    let v = self.data[self.slot(c, j)];
                    let s = self.slot(r, j);
                    self.data[s] -= f * v;
                }
                let bc = b[c];
                b[r] -= f * bc;
            }
        }

        for i in (0..n).rev() {
            let hi = (i + upper).min(n - 1);
            let mut acc = b[i];
            for j in (i + 1)..=hi {
                acc -= self.data[self.slot(i, j)] * b[j];
            }
            b[i] = acc / self.data[self.slot(i, i)];
        }
        if b.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Solver {
                mode: None,
                message: format!(
                    "non-finite solution (pivot ratio {:.3e})",
                    min_pivot / max_pivot
                ),
            });
        }
        Ok(b)
    }
}
