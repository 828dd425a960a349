//! Closed curves, curvature, and the tubular coordinates of the membrane.
//!
//! A point of the membrane is `Phi(eta, theta) = Psi(theta) + h eta n(theta)`
//! with `eta` in `[0, 1]`, where `Psi` parameterizes the cell boundary and `n`
//! is its exterior unit normal. In these coordinates the metric reads
//! `h^2 deta^2 + (1 + h eta kappa)^2 dtheta^2`.
//!
//! General sampled curves are supported for validation (curvature, thickness
//! bound, injectivity of the tube map). The solvers only use
//! [`CircularGeometry`].

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::BoundarySpectrum;
use crate::{Error, Result};

pub const DEFAULT_CURVE_SAMPLES: usize = 256;

const MIN_SPEED: f64 = 1e-12;
const MIN_POINT_SEPARATION: f64 = 1e-12;

/// Closed curve sampled uniformly in its parameter, `theta_j = 2 pi j / M`.
#[derive(Debug, Clone)]
pub struct ParametricCurve {
    points: Vec<[f64; 2]>,
    x: BoundarySpectrum,
    y: BoundarySpectrum,
}

impl ParametricCurve {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        let m = points.len();
        if m < 8 {
            return Err(Error::Geometry(format!(
                "need at least 8 curve samples, got {m}"
            )));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let d = (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]);
                if d < MIN_POINT_SEPARATION {
                    return Err(Error::Geometry(format!(
                        "curve samples {i} and {j} coincide; the curve must be simple"
                    )));
                }
            }
        }
        let area = signed_area(&points);
        if area <= 0.0 {
            return Err(Error::Geometry(format!(
                "curve must be counterclockwise (signed area {area:.3e})"
            )));
        }
        // Drop the Nyquist mode for even M so derivatives stay real.
        let k_max = (m - 1) / 2;
        let xs: Vec<Complex64> = points.iter().map(|p| Complex64::new(p[0], 0.0)).collect();
        let ys: Vec<Complex64> = points.iter().map(|p| Complex64::new(p[1], 0.0)).collect();
        let x = BoundarySpectrum::analyze(&xs, k_max, 1.0)?;
        let y = BoundarySpectrum::analyze(&ys, k_max, 1.0)?;
        Ok(ParametricCurve { points, x, y })
    }

    pub fn circle(radius: f64, samples: usize) -> Result<Self> {
        Self::ellipse(radius, radius, samples)
    }

    pub fn ellipse(a: f64, b: f64, samples: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Geometry(format!(
                "ellipse semi-axes must be positive ({a}, {b})"
            )));
        }
        let pts = (0..samples)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / samples as f64;
                [a * t.cos(), b * t.sin()]
            })
            .collect();
        Self::new(pts)
    }

    /// Parse "x y" pairs, one per line. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Geometry(format!("line {}: {e}", lineno + 1)))?;
            if vals.len() != 2 {
                return Err(Error::Geometry(format!(
                    "line {}: expected two numbers, found {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            pts.push([vals[0], vals[1]]);
        }
        Self::new(pts)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn samples(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn parameter(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.points.len() as f64
    }

    fn eval(&self, spec: &BoundarySpectrum, order: u32, theta: f64) -> f64 {
        let s = if order == 0 {
            spec.synthesize(theta)
        } else {
            spec.tangential_derivative(order)
                .expect("order 1 or 2 on unit radius")
                .synthesize(theta)
        };
        s.re
    }

    /// Trigonometric interpolant of the samples.
    pub fn point(&self, theta: f64) -> [f64; 2] {
        [self.eval(&self.x, 0, theta), self.eval(&self.y, 0, theta)]
    }

    pub fn tangent(&self, theta: f64) -> [f64; 2] {
        [self.eval(&self.x, 1, theta), self.eval(&self.y, 1, theta)]
    }

    /// Exterior unit normal (right of the tangent for a counterclockwise curve).
    pub fn normal(&self, theta: f64) -> Result<[f64; 2]> {
        let [dx, dy] = self.tangent(theta);
        let speed = dx.hypot(dy);
        if speed < MIN_SPEED {
            return Err(Error::Geometry(format!(
                "degenerate tangent at theta = {theta}"
            )));
        }
        Ok([dy / speed, -dx / speed])
    }

    /// Signed curvature `(x'y'' - y'x'') / |Psi'|^3` from spectral derivatives.
    pub fn curvature(&self, theta: f64) -> Result<f64> {
        let (dx, dy) = (self.eval(&self.x, 1, theta), self.eval(&self.y, 1, theta));
        let (ddx, ddy) = (self.eval(&self.x, 2, theta), self.eval(&self.y, 2, theta));
        let speed = dx.hypot(dy);
        if speed < MIN_SPEED {
            return Err(Error::Geometry(format!(
                "degenerate tangent at theta = {theta}"
            )));
        }
        Ok((dx * ddy - dy * ddx) / speed.powi(3))
    }

    pub fn max_abs_curvature(&self) -> Result<f64> {
        let mut kmax = 0.0f64;
        for j in 0..self.samples() {
            kmax = kmax.max(self.curvature(self.parameter(j))?.abs());
        }
        Ok(kmax)
    }

    /// `Psi(theta) + h eta n(theta)`.
    pub fn tubular_point(&self, h: f64, eta: f64, theta: f64) -> Result<[f64; 2]> {
        let p = self.point(theta);
        let n = self.normal(theta)?;
        Ok([p[0] + h * eta * n[0], p[1] + h * eta * n[1]])
    }
}

/// Shoelace formula; positive for counterclockwise polygons.
fn signed_area(points: &[[f64; 2]]) -> f64 {
    let m = points.len();
    0.5 * (0..m)
        .map(|i| {
            let (p, q) = (points[i], points[(i + 1) % m]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

pub fn curvature(curve: &ParametricCurve, theta: f64) -> Result<f64> {
    curve.curvature(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessCheck {
    pub admissible: bool,
    /// `1 / max |kappa|` over the sample points.
    pub h0: f64,
}

pub fn validate_thickness(curve: &ParametricCurve, h: f64) -> Result<ThicknessCheck> {
    let kmax = curve.max_abs_curvature()?;
    let h0 = if kmax > 0.0 {
        1.0 / kmax
    } else {
        f64::INFINITY
    };
    Ok(ThicknessCheck {
        admissible: h > 0.0 && h < h0,
        h0,
    })
}

/// Concentric circles: cell boundary `r0`, membrane `[r0, r0 + h]`, outer
/// boundary `outer_radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularGeometry {
    r0: f64,
    h: f64,
    outer_radius: f64,
}

impl CircularGeometry {
    pub fn new(r0: f64, h: f64, outer_radius: f64) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::Geometry(format!(
                "cell radius must be positive, got {r0}"
            )));
        }
        // kappa = 1/r0 on a circle, so h0 = r0.
        if !(h > 0.0 && h < r0) {
            return Err(Error::Geometry(format!(
                "membrane thickness h = {h} must satisfy 0 < h < h0 = 1/max|kappa| = {r0}"
            )));
        }
        if !(r0 + h < outer_radius) {
            return Err(Error::Geometry(format!(
                "cell with membrane (radius {}) must lie strictly inside the outer boundary R = {outer_radius}",
                r0 + h
            )));
        }
        Ok(CircularGeometry {
            r0,
            h,
            outer_radius,
        })
    }

    /// Cell plus membrane only: the outer boundary is the membrane's outer circle.
    pub fn cell(r0: f64, h: f64) -> Result<Self> {
        let g = Self::new(r0, h, (r0 + h) * 2.0)?;
        Ok(CircularGeometry {
            outer_radius: r0 + h,
            ..g
        })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::new(self.r0, h, self.outer_radius)
    }

    pub fn curvature(&self) -> f64 {
        1.0 / self.r0
    }

    pub fn h0(&self) -> f64 {
        self.r0
    }

    pub fn membrane_radius(&self, eta: f64) -> f64 {
        self.r0 + self.h * eta
    }

    /// `Phi(eta, theta)`; `eta = 0` lies on the cell boundary, `eta = 1` on the
    /// outer membrane circle.
    pub fn tubular_map(&self, eta: f64, theta: f64) -> [f64; 2] {
        let r = self.membrane_radius(eta);
        [r * theta.cos(), r * theta.sin()]
    }

    pub fn metric_factor(&self, eta: f64, theta: f64) -> MetricSample {
        MetricSample::new(self.h, eta, theta, self.curvature())
    }
}

/// Metric coefficients of the membrane at `(eta, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub eta: f64,
    pub theta: f64,
    /// `1 + h eta kappa`
    pub factor: f64,
    /// `h (1 + h eta kappa)`
    pub jacobian: f64,
}

impl MetricSample {
    pub fn new(h: f64, eta: f64, theta: f64, kappa: f64) -> Self {
        let factor = 1.0 + h * eta * kappa;
        MetricSample {
            eta,
            theta,
            factor,
            jacobian: h * factor,
        }
    }
}

pub fn tubular_map(geom: &CircularGeometry, eta: f64, theta: f64) -> [f64; 2] {
    geom.tubular_map(eta, theta)
}

pub fn metric_factor(geom: &CircularGeometry, eta: f64, theta: f64) -> MetricSample {
    geom.metric_factor(eta, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Closed-form ellipse curvature `ab / (a^2 sin^2 t + b^2 cos^2 t)^{3/2}`.
    fn ellipse_curvature(a: f64, b: f64, t: f64) -> f64 {
        a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5)
    }

    #[test]
    fn circle_curvature() {
        let c = ParametricCurve::circle(1.0, 64).unwrap();
        let c2 = ParametricCurve::circle(2.0, 64).unwrap();
        for t in [0.0, 0.3, 1.7, 4.0] {
            assert!(close(c.curvature(t).unwrap(), 1.0, 1e-10));
            assert!(close(c2.curvature(t).unwrap(), 0.5, 1e-10));
        }
    }

    #[test]
    fn ellipse_curvature_matches_closed_form() {
        let e = ParametricCurve::ellipse(2.0, 1.0, DEFAULT_CURVE_SAMPLES).unwrap();
        assert!(close(e.curvature(0.0).unwrap(), 2.0, 1e-10));
        for t in [0.5, 1.0, 2.2, 5.9] {
            assert!(close(
                e.curvature(t).unwrap(),
                ellipse_curvature(2.0, 1.0, t),
                1e-9
            ));
        }
    }

    #[test]
    fn thickness_bound() {
        let c = ParametricCurve::circle(1.0, 64).unwrap();
        let ok = validate_thickness(&c, 0.5).unwrap();
        assert!(ok.admissible);
        assert!(close(ok.h0, 1.0, 1e-10));
        assert!(!validate_thickness(&c, 1.5).unwrap().admissible);

        let e = ParametricCurve::ellipse(2.0, 1.0, DEFAULT_CURVE_SAMPLES).unwrap();
        let chk = validate_thickness(&e, 0.4).unwrap();
        assert!(close(chk.h0, 0.5, 1e-9));
        assert!(chk.admissible);
        assert!(!validate_thickness(&e, 0.6).unwrap().admissible);
    }

    #[test]
    fn tubular_map_examples() {
        let g = CircularGeometry::new(1.0, 0.1, 2.0).unwrap();
        let p = g.tubular_map(0.0, 0.0);
        assert!(close(p[0], 1.0, 1e-15) && close(p[1], 0.0, 1e-15));
        let p = g.tubular_map(1.0, 0.0);
        assert!(close(p[0], 1.1, 1e-15) && close(p[1], 0.0, 1e-15));
        let p = g.tubular_map(0.5, PI / 2.0);
        assert!(close(p[0], 0.0, 1e-15) && close(p[1], 1.05, 1e-15));
    }

    #[test]
    fn metric_examples() {
        let g = CircularGeometry::new(1.0, 0.1, 2.0).unwrap();
        let m = g.metric_factor(0.5, 0.2);
        assert!(close(m.factor, 1.05, 1e-15));
        assert!(close(m.jacobian, 0.105, 1e-15));
        assert_eq!(g.metric_factor(0.0, 1.0).factor, 1.0);
        assert!(close(g.metric_factor(1.0, 0.0).factor, 1.1, 1e-15));
        assert_eq!(MetricSample::new(0.3, 0.0, 0.0, 7.0).factor, 1.0);
    }

    #[test]
    fn geometry_guards() {
        assert!(CircularGeometry::new(1.0, 1.0, 3.0).is_err());
        assert!(CircularGeometry::new(1.0, 0.0, 3.0).is_err());
        assert!(CircularGeometry::new(1.0, 0.5, 1.5).is_err());
        let msg = CircularGeometry::new(1.0, 1.2, 3.0)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("h0"), "{msg}");
    }

    #[test]
    fn curve_validation() {
        let mut cw: Vec<[f64; 2]> = ParametricCurve::circle(1.0, 16).unwrap().points().to_vec();
        cw.reverse();
        assert!(ParametricCurve::new(cw).is_err());

        let mut dup: Vec<[f64; 2]> = ParametricCurve::circle(1.0, 16).unwrap().points().to_vec();
        dup[3] = dup[2];
        assert!(ParametricCurve::new(dup).is_err());

        let text = "# unit square-ish\n1 0\n0.7071 0.7071\n0 1\n-0.7071 0.7071\n-1 0\n-0.7071 -0.7071\n0 -1\n0.7071 -0.7071\n";
        let c = ParametricCurve::parse(text).unwrap();
        assert_eq!(c.samples(), 8);
        assert!(ParametricCurve::parse("1 2 3\n").is_err());
    }

    #[test]
    fn normal_offset_is_exactly_h() {
        let e = ParametricCurve::ellipse(2.0, 1.0, 128).unwrap();
        let h = 0.3;
        for j in 0..16 {
            let t = 2.0 * PI * j as f64 / 16.0 + 0.01;
            let p0 = e.tubular_point(h, 0.0, t).unwrap();
            let p1 = e.tubular_point(h, 1.0, t).unwrap();
            assert!(close((p1[0] - p0[0]).hypot(p1[1] - p0[1]), h, 1e-13));
        }
    }

    #[test]
    fn tube_map_injective_below_h0() {
        let e = ParametricCurve::ellipse(2.0, 1.0, 128).unwrap();
        let h = 0.45; // h0 = 0.5
        let mut pts = Vec::new();
        for i in 0..=6 {
            for j in 0..48 {
                let eta = i as f64 / 6.0;
                let t = 2.0 * PI * j as f64 / 48.0;
                pts.push(e.tubular_point(h, eta, t).unwrap());
            }
        }
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                let d = (pts[a][0] - pts[b][0]).hypot(pts[a][1] - pts[b][1]);
                assert!(d > 1e-6, "points {a} and {b} collide");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn metric_factor_positive(h in 0.001f64..0.999, eta in 0.0f64..=1.0, theta in 0.0f64..std::f64::consts::TAU) {
                let g = CircularGeometry::new(1.0, h, 2.5).unwrap();
                let m = g.metric_factor(eta, theta);
                prop_assert!(m.factor > 0.0);
                prop_assert!((m.jacobian - h * m.factor).abs() < 1e-15);
                let p0 = g.tubular_map(0.0, theta);
                let p1 = g.tubular_map(1.0, theta);
                prop_assert!(((p1[0]-p0[0]).hypot(p1[1]-p0[1]) - h).abs() < 1e-14);
            }

            #[test]
            fn ellipse_metric_positive(eta in 0.0f64..=1.0, theta in 0.0f64..std::f64::consts::TAU, frac in 0.01f64..0.99) {
                let e = ParametricCurve::ellipse(2.0, 1.0, 128).unwrap();
                let h = frac * validate_thickness(&e, 0.1).unwrap().h0;
                let m = MetricSample::new(h, eta, theta, e.curvature(theta).unwrap());
                prop_assert!(m.factor > 0.0);
            }
        }
    }
}
