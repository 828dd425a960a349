//! Error functionals: piecewise H1 norms of mode expansions, the membrane
//! discrepancy with its `mu`-weighted gradient term, the weighted membrane
//! norms of the local coordinates, and log-log rate fitting.
//!
//! All norms are evaluated mode by mode, `||w||^2 = 2 pi sum_k int |w_k|^2 r dr`,
//! with composite Simpson quadrature on the (possibly nonuniform) nodes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::full_model::{FieldExpansion, MaterialSet, Region};
use crate::geometry::CircularGeometry;
use crate::radial_ode::{cubic_interpolate, SegmentProfile};
use crate::{Error, Result};

/// Complex samples on sorted radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub u: Vec<Complex64>,
}

impl RadialProfile {
    pub fn new(r: Vec<f64>, u: Vec<Complex64>) -> Result<Self> {
        if r.len() != u.len() || r.len() < 3 {
            return Err(Error::invalid(
                "profile needs at least 3 nodes and matching lengths",
            ));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("profile radii must be strictly increasing"));
        }
        Ok(RadialProfile { r, u })
    }

    pub fn from_segment(s: &SegmentProfile) -> Self {
        RadialProfile {
            r: s.r.clone(),
            u: s.u.clone(),
        }
    }

    pub fn value_at(&self, r: f64) -> Complex64 {
        cubic_interpolate(&self.r, &self.u, r)
    }

    pub fn derivative(&self) -> Vec<Complex64> {
        derivative(&self.r, &self.u)
    }

    fn same_nodes(&self, other: &RadialProfile) -> bool {
        self.r.len() == other.r.len()
            && self
                .r
                .iter()
                .zip(&other.r)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }

    /// `self - other`, resampling both onto the union of their nodes over the
    /// common range when the grids differ.
    pub fn difference(&self, other: &RadialProfile) -> Result<RadialProfile> {
        if self.same_nodes(other) {
            let u = self.u.iter().zip(&other.u).map(|(a, b)| a - b).collect();
            return Ok(RadialProfile {
                r: self.r.clone(),
                u,
            });
        }
        let (a, b) = union_resample(self, other)?;
        let u = a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect();
        Ok(RadialProfile { r: a.r, u })
    }
}

/// Both profiles interpolated (cubic) onto the merged node set of their common range.
pub fn union_resample(
    p: &RadialProfile,
    q: &RadialProfile,
) -> Result<(RadialProfile, RadialProfile)> {
    let lo = p.r[0].max(q.r[0]);
    let hi = p.r.last().unwrap().min(*q.r.last().unwrap());
    if !(hi > lo) {
        return Err(Error::invalid("profiles have no common radial range"));
    }
    let mut r: Vec<f64> =
        p.r.iter()
            .chain(&q.r)
            .copied()
            .filter(|&x| x >= lo && x <= hi)
            .collect();
    r.sort_by(|a, b| a.total_cmp(b));
    let tol = 1e-12 * hi.abs().max(1.0);
    r.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let pa = r.iter().map(|&x| p.value_at(x)).collect();
    let qa = r.iter().map(|&x| q.value_at(x)).collect();
    Ok((
        RadialProfile::new(r.clone(), pa)?,
        RadialProfile::new(r, qa)?,
    ))
}

/// Composite Simpson on arbitrary sorted nodes; an odd trailing interval is
/// integrated with the parabola through the last three nodes.
pub fn simpson(x: &[f64], f: &[f64]) -> f64 {
    let n = x.len();
    assert_eq!(n, f.len());
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (x[1] - x[0]) * (f[0] + f[1]);
    }
    let mut acc = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
        let s = h0 + h1;
        acc += s / 6.0
            * ((2.0 - h1 / h0) * f[i] + s * s / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let s = h0 + h1;
        acc += h1
            * ((2.0 * h1 + 3.0 * h0) / (6.0 * s) * f[i + 1] + (h1 + 3.0 * h0) / (6.0 * h0) * f[i]
                - h1 * h1 / (6.0 * h0 * s) * f[i - 1]);
    }
    acc
}

/// Second-order three-point derivative on arbitrary sorted nodes.
pub fn derivative(x: &[f64], u: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    assert!(n >= 3 && n == u.len());
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let j = i.clamp(1, n - 2);
        let (h0, h1) = (x[j] - x[j - 1], x[j + 1] - x[j]);
        let s = h0 + h1;
        let (a, b, c) = match i as isize - j as isize {
            -1 => (-(2.0 * h0 + h1) / (h0 * s), s / (h0 * h1), -h0 / (h1 * s)),
            0 => (-h1 / (h0 * s), (h1 - h0) / (h0 * h1), h0 / (h1 * s)),
            _ => (h1 / (h0 * s), -s / (h0 * h1), (2.0 * h1 + h0) / (h1 * s)),
        };
        d[i] = u[j - 1] * a + u[j] * b + u[j + 1] * c;
    }
    d
}

/// `int (|w'|^2 + k^2/r^2 |w|^2 + |w|^2) r dr` for one mode, without the `2 pi`.
pub fn mode_h1_sq(k: i32, r: &[f64], w: &[Complex64]) -> f64 {
    let dw = derivative(r, w);
    let k2 = (k as f64).powi(2);
    let f: Vec<f64> = r
        .iter()
        .zip(w)
        .zip(&dw)
        .map(|((&r, w), dw)| {
            // The angular term has limit 0 at the origin for regular profiles.
            let ang = if r > 0.0 { k2 * w.norm_sqr() / r } else { 0.0 };
            r * dw.norm_sqr() + ang + r * w.norm_sqr()
        })
        .collect();
    simpson(r, &f)
}

/// `int |w|^2 r dr` for one mode, without the `2 pi`.
pub fn mode_l2_sq(r: &[f64], w: &[Complex64]) -> f64 {
    let f: Vec<f64> = r.iter().zip(w).map(|(&r, w)| r * w.norm_sqr()).collect();
    simpson(r, &f)
}

/// `sqrt(2 pi sum_k int_a^b (|w_k'|^2 + k^2/r^2 |w_k|^2 + |w_k|^2) r dr)`.
/// Nodes outside `[a, b]` are dropped and interpolated end values are added
/// when `a` or `b` is not a node.
pub fn h1_norm(profiles: &[(i32, RadialProfile)], a: f64, b: f64) -> Result<f64> {
    let mut total = 0.0;
    for (k, p) in profiles {
        let clipped = clip(p, a, b)?;
        total += mode_h1_sq(*k, &clipped.r, &clipped.u);
    }
    Ok((2.0 * PI * total).sqrt())
}

fn clip(p: &RadialProfile, a: f64, b: f64) -> Result<RadialProfile> {
    let tol = 1e-12 * b.abs().max(1.0);
    if a < p.r[0] - tol || b > p.r.last().unwrap() + tol || !(b > a) {
        return Err(Error::invalid(format!(
            "interval [{a}, {b}] outside profile support [{}, {}]",
            p.r[0],
            p.r.last().unwrap()
        )));
    }
    let mut r = Vec::new();
    let mut u = Vec::new();
    if (p.r[0] - a).abs() > tol && !p.r.iter().any(|&x| (x - a).abs() <= tol) {
        r.push(a);
        u.push(p.value_at(a));
    }
    for (&x, &v) in p.r.iter().zip(&p.u) {
        if x >= a - tol && x <= b + tol {
            r.push(x);
            u.push(v);
        }
    }
    if (r.last().unwrap() - b).abs() > tol {
        r.push(b);
        u.push(p.value_at(b));
    }
    RadialProfile::new(r, u)
}

fn region_pairs<'a>(
    u: &'a FieldExpansion,
    v: &'a FieldExpansion,
    region: Region,
) -> Result<Vec<(i32, &'a SegmentProfile, Option<&'a SegmentProfile>)>> {
    if u.region_index(region).is_none() {
        return Err(Error::invalid(format!(
            "field has no {} region",
            region.name()
        )));
    }
    let k_max = u.k_max().max(v.k_max()) as i32;
    let mut out = Vec::new();
    for k in -k_max..=k_max {
        match (u.profile(k, region), v.profile(k, region)) {
            (Some(a), b) => out.push((k, a, b)),
            (None, Some(_)) => {
                return Err(Error::invalid("second field has modes the first lacks"));
            }
            (None, None) => {}
        }
    }
    Ok(out)
}

fn diff_profile(a: &SegmentProfile, b: Option<&SegmentProfile>) -> Result<RadialProfile> {
    let pa = RadialProfile::from_segment(a);
    match b {
        Some(b) => pa.difference(&RadialProfile::from_segment(b)),
        None => Ok(pa),
    }
}

/// H1 norm of `u - v` over the union of `regions`; modes missing from `v` count as zero.
pub fn difference_h1(u: &FieldExpansion, v: &FieldExpansion, regions: &[Region]) -> Result<f64> {
    let mut total = 0.0;
    for &reg in regions {
        for (k, a, b) in region_pairs(u, v, reg)? {
            let d = diff_profile(a, b)?;
            total += mode_h1_sq(k, &d.r, &d.u);
        }
    }
    Ok((2.0 * PI * total).sqrt())
}

/// H1 norm of a field over the union of `regions`.
pub fn region_h1(field: &FieldExpansion, regions: &[Region]) -> Result<f64> {
    let mut total = 0.0;
    for &reg in regions {
        let i = field
            .region_index(reg)
            .ok_or_else(|| Error::invalid(format!("field has no {} region", reg.name())))?;
        for (k, m) in field.modes() {
            let s = &m.segments[i];
            total += mode_h1_sq(k, &s.r, &s.u);
        }
    }
    Ok((2.0 * PI * total).sqrt())
}

/// H1 norm over every region the field has.
pub fn field_h1(field: &FieldExpansion) -> Result<f64> {
    region_h1(field, &field.regions.clone())
}

/// The membrane discrepancy `||u - v||_{L2(O_h)} + ||(1/mu_m) grad u - (1/mu_e) grad v||_{L2(O_h)}`
/// with its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembraneError {
    pub total: f64,
    pub l2: f64,
    pub gradient: f64,
    /// Radial part of the weighted gradient discrepancy.
    pub normal_flux: f64,
    /// Angular part of the weighted gradient discrepancy.
    pub tangential: f64,
}

/// `u_full` must resolve the membrane; `v_e` is the exterior approximation
/// extended over the membrane annulus.
pub fn membrane_error(
    u_full: &FieldExpansion,
    v_e: &FieldExpansion,
    materials: &MaterialSet,
) -> Result<MembraneError> {
    let (wm, we) = (1.0 / materials.mu_m, 1.0 / materials.mu_e);
    let mut l2 = 0.0;
    let mut normal = 0.0;
    let mut tangential = 0.0;
    for (k, a, b) in region_pairs(u_full, v_e, Region::Membrane)? {
        let pu = RadialProfile::from_segment(a);
        let pv = match b {
            Some(b) => RadialProfile::from_segment(b),
            None => RadialProfile {
                r: pu.r.clone(),
                u: vec![Complex64::new(0.0, 0.0); pu.r.len()],
            },
        };
        let (pu, pv) = if pu.same_nodes(&pv) {
            (pu, pv)
        } else {
            union_resample(&pu, &pv)?
        };
        let r = &pu.r;
        let diff: Vec<Complex64> = pu.u.iter().zip(&pv.u).map(|(x, y)| x - y).collect();
        l2 += mode_l2_sq(r, &diff);
        let (du, dv) = (pu.derivative(), pv.derivative());
        let rad: Vec<Complex64> = du.iter().zip(&dv).map(|(x, y)| x * wm - y * we).collect();
        normal += mode_l2_sq(r, &rad);
        let kk = k as f64;
        let tan: Vec<Complex64> = r
            .iter()
            .zip(pu.u.iter().zip(&pv.u))
            .map(|(&r, (x, y))| (x * wm - y * we) * (kk / r))
            .collect();
        tangential += mode_l2_sq(r, &tan);
    }
    let s = 2.0 * PI;
    let l2 = (s * l2).sqrt();
    let gradient = (s * (normal + tangential)).sqrt();
    Ok(MembraneError {
        total: l2 + gradient,
        l2,
        gradient,
        normal_flux: (s * normal).sqrt(),
        tangential: (s * tangential).sqrt(),
    })
}

/// Result of the weighted-norm ratio
/// `||w||^2_{L2_m} / (||dw||^2_{L2_m} + int |w(0, theta)|^2 dtheta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareRatio {
    pub h: f64,
    pub value_norm_sq: f64,
    pub gradient_norm_sq: f64,
    pub trace_sq: f64,
    pub ratio: f64,
}

/// `w` is given per mode on a uniform grid in `eta` over `[0, 1]`. The norms
/// use the membrane metric `h^2 deta^2 + (1 + h eta kappa)^2 dtheta^2`.
pub fn poincare_diagnostic(
    w: &[(i32, Vec<Complex64>)],
    geom: &CircularGeometry,
) -> Result<PoincareRatio> {
    let (h, kappa) = (geom.h(), geom.curvature());
    let mut value = 0.0;
    let mut grad = 0.0;
    let mut trace = 0.0;
    for (k, wk) in w {
        let n = wk.len();
        if n < 3 {
            return Err(Error::invalid(
                "membrane samples need at least 3 nodes in eta",
            ));
        }
        let eta: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
        let dw = derivative(&eta, wk);
        let k2 = (*k as f64).powi(2);
        let fv: Vec<f64> = eta
            .iter()
            .zip(wk)
            .map(|(&e, w)| h * (1.0 + h * e * kappa) * w.norm_sqr())
            .collect();
        let fg: Vec<f64> = eta
            .iter()
            .zip(wk.iter().zip(&dw))
            .map(|(&e, (w, d))| {
                let a = 1.0 + h * e * kappa;
                d.norm_sqr() * a / h + h * k2 * w.norm_sqr() / a
            })
            .collect();
        value += simpson(&eta, &fv);
        grad += simpson(&eta, &fg);
        trace += wk[0].norm_sqr();
    }
    let s = 2.0 * PI;
    let (value, grad, trace) = (s * value, s * grad, s * trace);
    let denom = grad + trace;
    if denom < 1e-14 {
        return Err(Error::invalid(format!(
            "weighted-norm ratio undefined: denominator {denom:.3e} below 1e-14"
        )));
    }
    Ok(PoincareRatio {
        h,
        value_norm_sq: value,
        gradient_norm_sq: grad,
        trace_sq: trace,
        ratio: value / denom,
    })
}

/// Least-squares line through `(log h, log error)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|log error - fitted|`.
    pub max_residual: f64,
    /// Standard error of the slope; zero for two points.
    pub slope_stderr: f64,
    pub points_used: usize,
    /// Indices of pairs dropped because the error was not positive and finite.
    pub excluded: Vec<usize>,
    /// Slope below 0.5: the error is not decreasing at a useful rate.
    pub stagnant: bool,
}

pub const STAGNATION_SLOPE: f64 = 0.5;

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for (i, &(h, e)) in pairs.iter().enumerate() {
        if e > 0.0 && e.is_finite() && h > 0.0 && h.is_finite() {
            pts.push((h.ln(), e.ln()));
        } else {
            excluded.push(i);
        }
    }
    if pts.len() < 2 {
        return Err(Error::invalid(format!(
            "rate fit needs at least 2 positive errors, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid(
            "rate fit needs at least two distinct abscissae",
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: Vec<f64> = pts
        .iter()
        .map(|p| p.1 - (intercept + slope * p.0))
        .collect();
    let max_residual = res.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let slope_stderr = if pts.len() > 2 {
        (res.iter().map(|r| r * r).sum::<f64>() / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        max_residual,
        slope_stderr,
        points_used: pts.len(),
        excluded,
        stagnant: slope < STAGNATION_SLOPE,
    })
}

/// Per-`h` report: the core, membrane and far-field error channels plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h: f64,
    pub e_core: f64,
    pub e_membrane: f64,
    pub e_exterior: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub transmission_residual: f64,
    pub transmission_tolerance: f64,
    pub green_residual: f64,
    /// Richardson estimates of each channel's own discretization error.
    pub discretization: BTreeMap<String, f64>,
    /// Largest estimate-to-error ratio over the checked channels.
    pub subdominance_ratio: f64,
    pub subdominant: bool,
    pub grid_doublings: u32,
    /// Further channels and components, keyed by name.
    pub channels: BTreeMap<String, f64>,
}

pub const GREEN_TOLERANCE: f64 = 1e-6;

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.transmission_residual <= self.transmission_tolerance
            && self.green_residual < GREEN_TOLERANCE
            && self.subdominant
    }
}

impl ErrorReport {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("e_core", self.e_core),
            ("e_membrane", self.e_membrane),
            ("e_exterior", self.e_exterior),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Report(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub x: f64,
    pub channels: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ErrorReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FitOutcome {
    Fitted(RateFit),
    Indeterminate { reason: String },
}

impl FitOutcome {
    pub fn slope(&self) -> Option<f64> {
        match self {
            FitOutcome::Fitted(f) => Some(f.slope),
            FitOutcome::Indeterminate { .. } => None,
        }
    }
}

/// A sweep over a decreasing abscissa (`h` or `|z_m|`) with one rate fit per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub abscissa: String,
    pub points: Vec<ConvergencePoint>,
    pub fits: BTreeMap<String, FitOutcome>,
}

impl ConvergenceReport {
    /// Channel values at or below `floor` are treated as solver noise: a
    /// channel with every value at the floor gets an indeterminate fit.
    pub fn new(
        abscissa: impl Into<String>,
        points: Vec<ConvergencePoint>,
        floor: f64,
    ) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Report(format!(
                "a convergence report needs at least 3 points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| !(w[1].x < w[0].x)) {
            return Err(Error::Report(
                "abscissa values must be strictly decreasing".into(),
            ));
        }
        let mut fits = BTreeMap::new();
        for name in points[0].channels.keys() {
            let series: Vec<(f64, f64)> = points
                .iter()
                .map(|p| (p.x, p.channels.get(name).copied().unwrap_or(f64::NAN)))
                .collect();
            let outcome = if series.iter().all(|&(_, e)| e <= floor) {
                FitOutcome::Indeterminate {
                    reason: format!("all errors at or below the solver floor {floor:.1e}"),
                }
            } else {
                match fit_rate(&series) {
                    Ok(f) => FitOutcome::Fitted(f),
                    Err(e) => FitOutcome::Indeterminate {
                        reason: e.to_string(),
                    },
                }
            };
            fits.insert(name.clone(), outcome);
        }
        Ok(ConvergenceReport {
            abscissa: abscissa.into(),
            points,
            fits,
        })
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.fits.keys().cloned().collect()
    }

    pub fn series(&self, channel: &str) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.channels.get(channel).map(|&e| (p.x, e)))
            .collect()
    }

    pub fn slope(&self, channel: &str) -> Option<f64> {
        self.fits.get(channel).and_then(|f| f.slope())
    }

    /// Header `<abscissa>,<channel>...` then one row per point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let names = self.channel_names();
        writeln!(w, "{},{}", self.abscissa, names.join(","))?;
        for p in &self.points {
            let vals: Vec<String> = names
                .iter()
                .map(|n| p.channels.get(n).map(|v| v.to_string()).unwrap_or_default())
                .collect();
            writeln!(w, "{},{}", p.x, vals.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|j| a + (b - a) * j as f64 / n as f64).collect()
    }

    #[test]
    fn constant_on_annulus() {
        let r = uniform(1.0, 2.0, 32);
        let p = RadialProfile::new(r.clone(), vec![c(1.0, 0.0); r.len()]).unwrap();
        let n = h1_norm(&[(0, p)], 1.0, 2.0).unwrap();
        assert!((n - (3.0 * PI).sqrt()).abs() < 1e-12, "{n}");
        assert!((n - 3.0700).abs() < 1e-4);
    }

    #[test]
    fn zero_profile_zero_norm() {
        let r = uniform(0.0, 1.0, 16);
        let p = RadialProfile::new(r.clone(), vec![c(0.0, 0.0); r.len()]).unwrap();
        assert_eq!(h1_norm(&[(3, p)], 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_mode_one_on_disk() {
        // w = r e^{i theta} = x + i y: |grad w|^2 = 2, so ||w||^2 = 2 pi int (2 + r^2) r dr = 2.5 pi.
        let r = uniform(0.0, 1.0, 64);
        let p = RadialProfile::new(r.clone(), r.iter().map(|&x| c(x, 0.0)).collect()).unwrap();
        let n = h1_norm(&[(1, p)], 0.0, 1.0).unwrap();
        assert!((n - (2.5 * PI).sqrt()).abs() < 1e-8, "{n}");
    }

    #[test]
    fn polar_quadrature_agrees_with_mode_sum() {
        // Band-limited field on [0.5, 1.5]: compare the mode sum against an explicit
        // (r, theta) quadrature of |u_r|^2 + |u_theta|^2 / r^2 + |u|^2.
        let r = uniform(0.5, 1.5, 64);
        let modes: Vec<(i32, RadialProfile)> =
            [(0, c(1.0, 0.5)), (2, c(-0.3, 0.2)), (-1, c(0.1, -0.7))]
                .iter()
                .map(|&(k, a)| {
                    let u = r
                        .iter()
                        .map(|&x| a * (x * x + k as f64 * x).sin())
                        .collect();
                    (k, RadialProfile::new(r.clone(), u).unwrap())
                })
                .collect();
        let by_modes = h1_norm(&modes, 0.5, 1.5).unwrap();

        let m = 64;
        let derivs: Vec<Vec<Complex64>> = modes.iter().map(|(_, p)| p.derivative()).collect();
        let mut radial = vec![0.0; r.len()];
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            for (i, &ri) in r.iter().enumerate() {
                let mut u = c(0.0, 0.0);
                let mut ur = c(0.0, 0.0);
                let mut ut = c(0.0, 0.0);
                for ((k, p), d) in modes.iter().zip(&derivs) {
                    let e = Complex64::from_polar(1.0, *k as f64 * th);
                    u += p.u[i] * e;
                    ur += d[i] * e;
                    ut += p.u[i] * e * c(0.0, *k as f64);
                }
                radial[i] +=
                    (ur.norm_sqr() + ut.norm_sqr() / (ri * ri) + u.norm_sqr()) * ri * 2.0 * PI
                        / m as f64;
            }
        }
        let by_grid = simpson(&r, &radial).sqrt();
        assert!((by_modes - by_grid).abs() < 1e-8 * by_grid);
    }

    #[test]
    fn simpson_is_fourth_order() {
        // int_0^1 r e^r dr = 1.
        let err = |n: usize| {
            let x = uniform(0.0, 1.0, n);
            let f: Vec<f64> = x.iter().map(|&r| r * r.exp()).collect();
            (simpson(&x, &f) - 1.0).abs()
        };
        let order = (err(16) / err(32)).log2();
        assert!((3.8..=4.2).contains(&order), "{order}");
    }

    #[test]
    fn simpson_nonuniform_and_odd() {
        let x = vec![0.0, 0.1, 0.35, 0.5, 0.8, 1.0];
        let f: Vec<f64> = x.iter().map(|&t| 3.0 * t * t - t + 2.0).collect();
        assert!((simpson(&x, &f) - 2.5).abs() < 1e-13);
    }

    #[test]
    fn derivative_exact_for_quadratics() {
        let x = vec![0.0, 0.1, 0.35, 0.5, 0.8, 1.0];
        let u: Vec<Complex64> = x.iter().map(|&t| c(t * t, 1.0 - 2.0 * t)).collect();
        for (d, &t) in derivative(&x, &u).iter().zip(&x) {
            assert!((d - c(2.0 * t, -2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn difference_on_mismatched_grids() {
        let f = |t: f64| c(t.powi(3), -t);
        let a = uniform(1.0, 2.0, 16);
        let b = uniform(1.0, 2.0, 24);
        let pa = RadialProfile::new(a.clone(), a.iter().map(|&t| f(t)).collect()).unwrap();
        let pb = RadialProfile::new(b.clone(), b.iter().map(|&t| f(t)).collect()).unwrap();
        let d = pa.difference(&pb).unwrap();
        assert!(d.u.iter().all(|v| v.norm() < 1e-12));
        assert_eq!(d.r.len(), 33);
    }

    #[test]
    fn fit_rate_examples() {
        let f = fit_rate(&[(0.1, 1e-2), (0.05, 2.5e-3), (0.025, 6.25e-4)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        let s = fit_rate(&[(0.1, 1e-3), (0.05, 1e-3)]).unwrap();
        assert!(s.slope.abs() < 1e-12 && s.stagnant);
        let e = fit_rate(&[(0.1, 1e-2), (0.05, 0.0), (0.025, 6.25e-4), (0.0125, -1.0)]).unwrap();
        assert_eq!(e.excluded, vec![1, 3]);
        assert!((e.slope - 2.0).abs() < 1e-12);
        assert!(fit_rate(&[(0.1, 0.0), (0.05, 1e-3)]).is_err());
    }

    #[test]
    fn fit_rate_noisy_fixture() {
        // C h^1.5 (1 + 0.05 noise) with a fixed noise pattern in [-1, 1].
        let noise = [0.83, -0.41, 0.97, -0.88, 0.12];
        let pairs: Vec<(f64, f64)> = [0.1f64, 0.05, 0.025, 0.0125, 0.00625]
            .iter()
            .zip(noise)
            .map(|(&h, n)| (h, 0.7 * h.powf(1.5) * (1.0 + 0.05 * n)))
            .collect();
        let f = fit_rate(&pairs).unwrap();
        assert!((1.4..=1.6).contains(&f.slope), "{}", f.slope);
    }

    #[test]
    fn poincare_constant_function() {
        let g = CircularGeometry::new(1.0, 0.1, 2.0).unwrap();
        let w = vec![(0, vec![c(1.0, 0.0); 33])];
        let p = poincare_diagnostic(&w, &g).unwrap();
        // ||1||^2 = 2 pi h (1 + h kappa / 2), boundary term 2 pi.
        assert!((p.ratio - 0.1 * (1.0 + 0.05)).abs() < 1e-13, "{}", p.ratio);
        assert!(poincare_diagnostic(&[(0, vec![c(0.0, 0.0); 9])], &g).is_err());
    }

    #[test]
    fn poincare_linear_in_eta() {
        // w = eta on mode 0: value 2 pi h int eta^2 (1 + h eta), gradient 2 pi / h int (1 + h eta).
        let g = CircularGeometry::new(1.0, 0.1, 2.0).unwrap();
        let n = 32;
        let w = vec![(0, (0..=n).map(|j| c(j as f64 / n as f64, 0.0)).collect())];
        let p = poincare_diagnostic(&w, &g).unwrap();
        let h: f64 = 0.1;
        let value = 2.0 * PI * h * (1.0 / 3.0 + h / 4.0);
        let grad = 2.0 * PI / h * (1.0 + h / 2.0);
        assert!((p.ratio - value / grad).abs() < 1e-12 * (value / grad));
    }

    #[test]
    fn convergence_report_validation() {
        let pt = |x: f64, e: f64| ConvergencePoint {
            x,
            channels: BTreeMap::from([("a".to_string(), e)]),
            report: None,
        };
        assert!(ConvergenceReport::new("h", vec![], 0.0).is_err());
        assert!(
            ConvergenceReport::new("h", vec![pt(0.1, 1.0), pt(0.2, 1.0), pt(0.05, 1.0)], 0.0)
                .is_err()
        );
        let r = ConvergenceReport::new(
            "h",
            vec![pt(0.1, 1e-2), pt(0.05, 2.5e-3), pt(0.025, 6.25e-4)],
            0.0,
        )
        .unwrap();
        assert!((r.slope("a").unwrap() - 2.0).abs() < 1e-12);
        let floor = ConvergenceReport::new(
            "h",
            vec![pt(0.1, 1e-15), pt(0.05, 0.0), pt(0.025, 1e-16)],
            1e-12,
        )
        .unwrap();
        assert!(matches!(floor.fits["a"], FitOutcome::Indeterminate { .. }));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn profile(coef: &[f64]) -> RadialProfile {
            let r = uniform(0.5, 1.5, 32);
            let u = r
                .iter()
                .map(|&x| c(coef[0] + coef[1] * x, coef[2] * x * x - coef[3]))
                .collect();
            RadialProfile::new(r, u).unwrap()
        }

        proptest! {
            #[test]
            fn homogeneity(a in prop::collection::vec(-2.0f64..2.0, 4), s in -5.0f64..5.0, k in -3i32..4) {
                let p = profile(&a);
                let q = RadialProfile { r: p.r.clone(), u: p.u.iter().map(|v| v * s).collect() };
                let n1 = h1_norm(&[(k, p)], 0.5, 1.5).unwrap();
                let n2 = h1_norm(&[(k, q)], 0.5, 1.5).unwrap();
                prop_assert!((n2 - s.abs() * n1).abs() <= 1e-10 * (1.0 + n2));
            }

            #[test]
            fn triangle(a in prop::collection::vec(-2.0f64..2.0, 4), b in prop::collection::vec(-2.0f64..2.0, 4), k in -3i32..4) {
                let (p, q) = (profile(&a), profile(&b));
                let sum = RadialProfile { r: p.r.clone(), u: p.u.iter().zip(&q.u).map(|(x, y)| x + y).collect() };
                let ns = h1_norm(&[(k, sum)], 0.5, 1.5).unwrap();
                let np = h1_norm(&[(k, p)], 0.5, 1.5).unwrap();
                let nq = h1_norm(&[(k, q)], 0.5, 1.5).unwrap();
                prop_assert!(ns <= np + nq + 1e-10);
            }
        }
    }
}
